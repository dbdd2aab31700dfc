use rand::Rng;

use super::{MfModel, ModelGrad};
use crate::dataio::UserItems;
use crate::error::{Error, Result};

/// A (user, observed item, unobserved item) training triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BprTriple {
    pub user: u32,
    pub pos: u32,
    pub neg: u32,
}

/// Draws `batch_size` interactions uniformly from `train`, each paired with a
/// uniformly resampled negative item.
///
/// Interactions of users who have seen the whole catalog have no negative
/// and are skipped, so the batch may come back short.
pub fn sample_bpr_triples(
    train: &UserItems,
    batch_size: usize,
    rng: &mut impl Rng,
) -> Result<Vec<BprTriple>> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    let nnz = train.nnz();
    if nnz == 0 {
        return Err(Error::Empty("training set has no interactions".into()));
    }
    let n_items = train.n_items() as u32;
    let offsets = row_offsets(train);

    let mut batch = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let flat = rng.random_range(0..nnz);
        let user = offsets.partition_point(|&o| o <= flat) - 1;
        let pos = train.items(user)[flat - offsets[user]];
        if train.degree(user) as u32 >= n_items {
            log::warn!("user {user} has interacted with every item; skipping");
            continue;
        }
        let neg = loop {
            let j = rng.random_range(0..n_items);
            if !train.contains(user, j) {
                break j;
            }
        };
        batch.push(BprTriple {
            user: user as u32,
            pos,
            neg,
        });
    }
    Ok(batch)
}

fn row_offsets(train: &UserItems) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(train.n_users() + 1);
    let mut acc = 0;
    offsets.push(0);
    for u in 0..train.n_users() {
        acc += train.degree(u);
        offsets.push(acc);
    }
    offsets
}

/// `-ln(sigmoid(x))`, evaluated without overflow.
fn neg_log_sigmoid(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Summed BPR loss over `batch` with exact gradients.
///
/// Rows untouched by the batch keep a zero gradient.
pub fn bpr_loss_and_grad(model: &MfModel, batch: &[BprTriple]) -> Result<(f64, ModelGrad)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty BPR batch".into()));
    }
    let mut grad = ModelGrad::zeros_like(model);
    let mut loss = 0.0;
    for t in batch {
        let (u, i, j) = (t.user as usize, t.pos as usize, t.neg as usize);
        let x = model.score(u, i) - model.score(u, j);
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("BPR score difference for user {u}")));
        }
        loss += neg_log_sigmoid(x);
        // d/dx of -ln(sigmoid(x)) = -sigmoid(-x)
        let coef = -1.0 / (1.0 + x.exp());

        let pu = model.user_row(u);
        let qi = model.item_row(i);
        let qj = model.item_row(j);
        {
            let mut gu = grad.user.row_mut(u);
            for k in 0..pu.len() {
                gu[k] += coef * (qi[k] - qj[k]);
            }
        }
        {
            let mut gi = grad.item.row_mut(i);
            for k in 0..pu.len() {
                gi[k] += coef * pu[k];
            }
        }
        {
            let mut gj = grad.item.row_mut(j);
            for k in 0..pu.len() {
                gj[k] -= coef * pu[k];
            }
        }
    }
    Ok((loss, grad))
}
