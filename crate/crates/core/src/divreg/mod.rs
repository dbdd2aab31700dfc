//! Aggregate-diversity regularizer.
//!
//! For a block of raw scores `R`, `S` is the row softmax of `R` and
//! `T = keep ⊙ S` keeps each row's top entries (plus any unmasked extras).
//! The loss is
//!
//! ```text
//! L_div = -Σ_i ln(Σ_u t_ui + ε)  +  Σ_u Σ_i t'_ui ln t'_ui,   t'_ui = t_ui / Σ_j t_uj
//! ```
//!
//! The first term (coverage) equalizes column mass, the second (skewness)
//! equalizes the kept values within each row. The mask is treated as a
//! constant when differentiating.

mod batch;
mod mask;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

pub use batch::{sample_minibatch, MiniBatch, MiniBatchSpec};
pub use mask::{top_mask, unmask, TopMask, UnmaskScheme};

use crate::error::{Error, Result};
use crate::mfcore::{MfModel, ModelGrad};

/// Floor added inside the coverage logarithm so uncovered columns stay finite.
pub const EPS_LOG: f64 = 1e-12;

/// Numerically stable softmax of every row.
pub fn softmax_rows(raw: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("softmax input".into()));
    }
    let mut out = raw.to_owned();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    Ok(out)
}

fn check_shape(soft: &ArrayView2<'_, f64>, mask: &TopMask) -> Result<()> {
    if soft.dim() != mask.keep().dim() {
        return Err(Error::Shape(format!(
            "mask {:?} does not match scores {:?}",
            mask.keep().dim(),
            soft.dim()
        )));
    }
    Ok(())
}

fn masked_sums(soft: &ArrayView2<'_, f64>, mask: &TopMask) -> (Vec<f64>, Vec<f64>) {
    let (rows, cols) = soft.dim();
    let mut row_sum = vec![0.0; rows];
    let mut col_sum = vec![0.0; cols];
    for ((r, c), &keep) in mask.keep().indexed_iter() {
        if keep {
            let t = soft[[r, c]];
            row_sum[r] += t;
            col_sum[c] += t;
        }
    }
    (row_sum, col_sum)
}

/// `-Σ_cols ln(column sum of T + EPS_LOG)`.
pub fn coverage_reg(soft: ArrayView2<'_, f64>, mask: &TopMask) -> Result<f64> {
    check_shape(&soft, mask)?;
    let (_, col_sum) = masked_sums(&soft, mask);
    Ok(-col_sum.iter().map(|c| (c + EPS_LOG).ln()).sum::<f64>())
}

/// `Σ_rows Σ_cols t' ln t'` over the row-normalized masked matrix, i.e.
/// minus the summed row entropies. `0 ln 0` is taken as 0.
pub fn skewness_reg(soft: ArrayView2<'_, f64>, mask: &TopMask) -> Result<f64> {
    check_shape(&soft, mask)?;
    let (row_sum, _) = masked_sums(&soft, mask);
    let mut total = 0.0;
    for (r, row) in mask.keep().rows().into_iter().enumerate() {
        if row_sum[r] <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "row {r} has no kept entry with positive mass"
            )));
        }
        for (c, &keep) in row.iter().enumerate() {
            if keep {
                let p = soft[[r, c]] / row_sum[r];
                if p > 0.0 {
                    total += p * p.ln();
                }
            }
        }
    }
    Ok(total)
}

/// Diversity loss of a raw score block and its gradient with respect to the
/// raw scores, for a fixed mask.
#[derive(Clone, Debug)]
pub struct DivEval {
    pub loss: f64,
    pub grad_raw: Array2<f64>,
    pub soft: Array2<f64>,
}

pub fn div_objective(raw: ArrayView2<'_, f64>, mask: &TopMask) -> Result<DivEval> {
    let soft = softmax_rows(raw)?;
    div_objective_soft(soft, mask)
}

fn div_objective_soft(soft: Array2<f64>, mask: &TopMask) -> Result<DivEval> {
    let view = soft.view();
    let loss = coverage_reg(view, mask)? + skewness_reg(view, mask)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("diversity loss".into()));
    }
    let (row_sum, col_sum) = masked_sums(&view, mask);

    // dL/ds for kept entries; masked entries have no direct dependence.
    let (rows, cols) = soft.dim();
    let mut grad_soft = Array2::<f64>::zeros((rows, cols));
    for r in 0..rows {
        let z = row_sum[r];
        let mut neg_entropy = 0.0;
        for c in 0..cols {
            if mask.is_kept(r, c) {
                let p = soft[[r, c]] / z;
                if p > 0.0 {
                    neg_entropy += p * p.ln();
                }
            }
        }
        for c in 0..cols {
            if mask.is_kept(r, c) {
                let t = soft[[r, c]];
                let mut g = -1.0 / (col_sum[c] + EPS_LOG);
                if t > 0.0 {
                    g += ((t / z).ln() - neg_entropy) / z;
                }
                grad_soft[[r, c]] = g;
            }
        }
    }

    // Back through the row softmax: dL/dr = s ⊙ (g - <g, s>).
    let mut grad_raw = grad_soft;
    for (mut g_row, s_row) in grad_raw.rows_mut().into_iter().zip(soft.rows()) {
        let inner = g_row.dot(&s_row);
        for (g, &s) in g_row.iter_mut().zip(s_row.iter()) {
            *g = s * (*g - inner);
        }
    }
    Ok(DivEval {
        loss,
        grad_raw,
        soft,
    })
}

/// Selection step: top-`k` mask of `soft`, widened by the unmasking scheme.
pub fn build_mask(
    soft: ArrayView2<'_, f64>,
    k: usize,
    scheme: UnmaskScheme,
    n_unmask: usize,
    rng: &mut impl Rng,
) -> Result<TopMask> {
    let base = top_mask(soft, k)?;
    Ok(unmask(&base, soft, scheme, n_unmask, rng))
}

/// A scored sub-block of the full score matrix.
#[derive(Clone, Debug)]
pub struct ScoreBlock {
    pub raw: Array2<f64>,
    pub soft: Array2<f64>,
    pub user_ids: Vec<usize>,
    pub item_ids: Vec<usize>,
}

impl ScoreBlock {
    pub fn from_model(model: &MfModel, users: &[usize], items: &[usize]) -> Result<Self> {
        let raw = model.score_submatrix(users, items)?;
        let soft = softmax_rows(raw.view())?;
        Ok(ScoreBlock {
            raw,
            soft,
            user_ids: users.to_vec(),
            item_ids: items.to_vec(),
        })
    }
}

/// Result of one diversity-loss evaluation on a mini-batch.
#[derive(Clone, Debug)]
pub struct DivStep {
    pub loss: f64,
    pub grad: ModelGrad,
    pub mask: TopMask,
}

/// Samples nothing itself: scores `batch`, builds its mask with `k_b` and the
/// unmasking scheme, and returns the loss with exact embedding gradients.
pub fn div_loss_and_grad(
    model: &MfModel,
    batch: &MiniBatch,
    scheme: UnmaskScheme,
    n_unmask: usize,
    rng: &mut impl Rng,
) -> Result<DivStep> {
    let block = ScoreBlock::from_model(model, &batch.users, &batch.items)?;
    let mask = build_mask(block.soft.view(), batch.spec.k_b, scheme, n_unmask, rng)?;
    let (loss, grad) = div_loss_with_mask_block(model, batch, block.soft, &mask)?;
    Ok(DivStep { loss, grad, mask })
}

/// Loss and embedding gradients of `batch` under a caller-supplied mask.
pub fn div_loss_with_mask(
    model: &MfModel,
    batch: &MiniBatch,
    mask: &TopMask,
) -> Result<(f64, ModelGrad)> {
    let block = ScoreBlock::from_model(model, &batch.users, &batch.items)?;
    div_loss_with_mask_block(model, batch, block.soft, mask)
}

fn div_loss_with_mask_block(
    model: &MfModel,
    batch: &MiniBatch,
    soft: Array2<f64>,
    mask: &TopMask,
) -> Result<(f64, ModelGrad)> {
    let eval = div_objective_soft(soft, mask)?;
    let users = model.user_emb().select(Axis(0), &batch.users);
    let items = model.item_emb().select(Axis(0), &batch.items);
    let grad_users = eval.grad_raw.dot(&items);
    let grad_items = eval.grad_raw.t().dot(&users);

    let mut grad = ModelGrad::zeros_like(model);
    for (a, &u) in batch.users.iter().enumerate() {
        grad.user.row_mut(u).assign(&grad_users.row(a));
    }
    for (b, &i) in batch.items.iter().enumerate() {
        grad.item.row_mut(i).assign(&grad_items.row(b));
    }
    Ok((eval.loss, grad))
}
