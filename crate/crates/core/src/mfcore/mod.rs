//! Matrix-factorization model, BPR accuracy loss and the Adam optimizer.

mod adam;
mod bpr;
mod checkpoint;
mod model;

pub use adam::{Adam, AdamConfig};
pub use bpr::{bpr_loss_and_grad, sample_bpr_triples, BprTriple};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use model::{MfModel, ModelGrad};
