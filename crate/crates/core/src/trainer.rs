//! Two-phase training: BPR until validation nDCG stops improving, then a
//! fixed number of diversity epochs. Also the trade-off sweep built on top.
//!
//! Every optimizer step consumes the gradient of exactly one loss.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::TrainConfig;
use crate::dataio::{SplitSet, UserItems};
use crate::divreg::{div_loss_and_grad, sample_minibatch};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricReport};
use crate::mfcore::{bpr_loss_and_grad, sample_bpr_triples, Adam, AdamConfig, MfModel};

pub use crate::mfcore::{load_checkpoint, save_checkpoint};

const ACCURACY_STREAM: u64 = 1;
const DIVERSITY_STREAM: u64 = 2;

/// Generator for one epoch of one phase, derived from the run seed only, so
/// any epoch can be replayed without the history before it.
fn epoch_rng(seed: u64, phase: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(phase << 32 | epoch as u64);
    rng
}

/// One pass of BPR updates: `ceil(nnz / batch)` Adam steps. Returns the mean
/// per-triple loss.
pub fn bpr_epoch(
    model: &mut MfModel,
    adam: &mut Adam,
    train: &UserItems,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let steps = train.nnz().div_ceil(batch_size);
    let mut total = 0.0;
    let mut count = 0usize;
    for _ in 0..steps {
        let batch = sample_bpr_triples(train, batch_size, rng)?;
        if batch.is_empty() {
            continue;
        }
        let (loss, grad) = bpr_loss_and_grad(model, &batch)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("BPR loss diverged after {} steps", adam.steps())));
        }
        adam.step_model(model, &grad)?;
        total += loss;
        count += batch.len();
    }
    if !model.is_finite() {
        return Err(Error::NonFinite("model parameters after BPR epoch".into()));
    }
    Ok(if count > 0 { total / count as f64 } else { 0.0 })
}

/// State of an in-progress accuracy phase. Cloning it and continuing
/// reproduces the original trajectory.
#[derive(Clone, Debug)]
pub struct AccuracyRun {
    model: MfModel,
    adam: Adam,
    epoch: usize,
    best_model: MfModel,
    best_epoch: usize,
    best_ndcg: f64,
    stale: usize,
    history: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct AccuracyOutcome {
    /// Best-validation model.
    pub model: MfModel,
    pub best_epoch: usize,
    pub best_ndcg: f64,
    pub epochs_run: usize,
    /// Validation nDCG@k after each epoch, index 0 being the initial model.
    pub history: Vec<f64>,
}

impl AccuracyRun {
    pub fn new(model: MfModel, split: &SplitSet, cfg: &TrainConfig) -> Result<Self> {
        model.check_shape(split.n_users, split.n_items)?;
        let initial = validation_ndcg(&model, split, cfg.k)?;
        Ok(AccuracyRun {
            adam: Adam::for_model(cfg.adam, &model),
            best_model: model.clone(),
            model,
            epoch: 0,
            best_epoch: 0,
            best_ndcg: initial,
            stale: 0,
            history: vec![initial],
        })
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn model(&self) -> &MfModel {
        &self.model
    }

    pub fn is_done(&self, cfg: &TrainConfig) -> bool {
        self.stale >= cfg.accuracy_patience || self.epoch >= cfg.max_accuracy_epochs
    }

    /// Trains one epoch and returns the new validation nDCG@k.
    pub fn step_epoch(&mut self, split: &SplitSet, train: &UserItems, cfg: &TrainConfig) -> Result<f64> {
        self.epoch += 1;
        let mut rng = epoch_rng(cfg.seed, ACCURACY_STREAM, self.epoch);
        let loss = bpr_epoch(&mut self.model, &mut self.adam, train, cfg.bpr_batch_size, &mut rng)?;
        let ndcg = validation_ndcg(&self.model, split, cfg.k)?;
        log::debug!("accuracy epoch {} loss={loss:.5} val_ndcg={ndcg:.5}", self.epoch);
        self.history.push(ndcg);
        if ndcg > self.best_ndcg {
            self.best_ndcg = ndcg;
            self.best_epoch = self.epoch;
            self.best_model = self.model.clone();
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        Ok(ndcg)
    }

    pub fn finish(self) -> AccuracyOutcome {
        AccuracyOutcome {
            model: self.best_model,
            best_epoch: self.best_epoch,
            best_ndcg: self.best_ndcg,
            epochs_run: self.epoch,
            history: self.history,
        }
    }
}

fn validation_ndcg(model: &MfModel, split: &SplitSet, k: usize) -> Result<f64> {
    Ok(evaluate(model, &split.train_items(), &split.validation_items(), k)?.ndcg)
}

/// Runs BPR epochs until validation nDCG@k has not improved for
/// `accuracy_patience` consecutive epochs; returns the best model seen.
pub fn train_accuracy_phase(model: MfModel, split: &SplitSet, cfg: &TrainConfig) -> Result<AccuracyOutcome> {
    cfg.validate()?;
    let train = split.train_items();
    let mut run = AccuracyRun::new(model, split, cfg)?;
    while !run.is_done(cfg) {
        run.step_epoch(split, &train, cfg)?;
    }
    let outcome = run.finish();
    log::info!(
        "accuracy phase: {} epochs, best val nDCG@{}={:.5} at epoch {}",
        outcome.epochs_run,
        cfg.k,
        outcome.best_ndcg,
        outcome.best_epoch
    );
    Ok(outcome)
}

fn diversity_adam(cfg: &TrainConfig, model: &MfModel) -> Adam {
    let adam = AdamConfig {
        weight_decay: if cfg.diversity_weight_decay {
            cfg.adam.weight_decay
        } else {
            0.0
        },
        ..cfg.adam
    };
    Adam::for_model(adam, model)
}

/// Number of diversity mini-batches per epoch: `ceil(|U| / r_b)`.
pub fn diversity_batches_per_epoch(n_users: usize, cfg: &TrainConfig) -> usize {
    n_users.div_ceil(cfg.r_b.unwrap_or(n_users).min(n_users))
}

/// One diversity epoch; returns the mean mini-batch loss.
pub fn diversity_epoch(model: &mut MfModel, adam: &mut Adam, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<f64> {
    let (n_users, n_items) = (model.n_users(), model.n_items());
    let r_b = cfg.r_b.unwrap_or(n_users).min(n_users);
    let c_b = cfg.c_b.unwrap_or(n_items).min(n_items);
    let batches = diversity_batches_per_epoch(n_users, cfg);
    let mut total = 0.0;
    for _ in 0..batches {
        let batch = sample_minibatch(n_users, n_items, r_b, c_b, cfg.k, rng)?;
        let step = div_loss_and_grad(model, &batch, cfg.unmask_scheme, cfg.n_unmask, rng)?;
        adam.step_model(model, &step.grad)?;
        total += step.loss;
    }
    if !model.is_finite() {
        return Err(Error::NonFinite("model parameters after diversity epoch".into()));
    }
    Ok(total / batches as f64)
}

/// Runs `n_ep` diversity epochs with a fresh optimizer, calling `sink` with
/// the 1-based epoch number after each.
pub fn train_diversity_phase(
    mut model: MfModel,
    cfg: &TrainConfig,
    n_ep: usize,
    mut sink: impl FnMut(usize, &MfModel) -> Result<()>,
) -> Result<MfModel> {
    cfg.validate()?;
    let mut adam = diversity_adam(cfg, &model);
    for epoch in 1..=n_ep {
        let mut rng = epoch_rng(cfg.seed, DIVERSITY_STREAM, epoch);
        let loss = diversity_epoch(&mut model, &mut adam, cfg, &mut rng)?;
        log::debug!("diversity epoch {epoch} loss={loss:.5}");
        sink(epoch, &model)?;
    }
    Ok(model)
}

/// Interleaved variant: each epoch is one BPR epoch followed by one diversity
/// epoch, each loss with its own optimizer.
pub fn train_alternating(
    mut model: MfModel,
    split: &SplitSet,
    cfg: &TrainConfig,
    n_ep: usize,
    mut sink: impl FnMut(usize, &MfModel) -> Result<()>,
) -> Result<MfModel> {
    cfg.validate()?;
    model.check_shape(split.n_users, split.n_items)?;
    let train = split.train_items();
    let mut acc_adam = Adam::for_model(cfg.adam, &model);
    let mut div_adam = diversity_adam(cfg, &model);
    for epoch in 1..=n_ep {
        let mut rng = epoch_rng(cfg.seed, ACCURACY_STREAM, epoch);
        bpr_epoch(&mut model, &mut acc_adam, &train, cfg.bpr_batch_size, &mut rng)?;
        let mut rng = epoch_rng(cfg.seed, DIVERSITY_STREAM, epoch);
        diversity_epoch(&mut model, &mut div_adam, cfg, &mut rng)?;
        sink(epoch, &model)?;
    }
    Ok(model)
}

/// Test-split metrics: lists exclude each user's train and validation items.
pub fn test_metrics(model: &MfModel, split: &SplitSet, k: usize) -> Result<MetricReport> {
    evaluate(model, &split.known_items(), &split.test_items(), k)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveRow {
    pub n_ep: usize,
    pub ndcg: f64,
    pub coverage: f64,
    pub entropy: f64,
    pub neg_gini: f64,
}

impl CurveRow {
    pub fn from_report(n_ep: usize, r: &MetricReport) -> Self {
        CurveRow {
            n_ep,
            ndcg: r.ndcg,
            coverage: r.coverage,
            entropy: r.entropy,
            neg_gini: r.neg_gini(),
        }
    }
}

/// Accuracy/diversity trade-off curve; row 0 is the converged MF model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CurveTable {
    rows: Vec<CurveRow>,
}

pub const CURVE_HEADER: &str = "n_ep,ndcg,coverage,entropy,neg_gini";

impl CurveTable {
    pub fn push(&mut self, row: CurveRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.n_ep <= last.n_ep {
                return Err(Error::InvalidArgument(format!(
                    "curve rows must have increasing n_ep ({} after {})",
                    row.n_ep, last.n_ep
                )));
            }
        } else if row.n_ep != 0 {
            return Err(Error::InvalidArgument("first curve row must be n_ep = 0".into()));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[CurveRow] {
        &self.rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CURVE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.n_ep,
                sig6(r.ndcg),
                sig6(r.coverage),
                sig6(r.entropy),
                sig6(r.neg_gini)
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Formats `x` with 6 significant digits, like C's `%.6g`.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        let fixed = format!("{x:.decimals$}");
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    } else {
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    }
}

/// Trains the accuracy phase once from a seeded initialization, then records
/// test metrics every `eval_every` diversity epochs up to `n_ep` (and at the
/// last epoch).
pub fn sweep_tradeoff(split: &SplitSet, cfg: &TrainConfig) -> Result<CurveTable> {
    cfg.validate()?;
    let init = MfModel::init(split.n_users, split.n_items, cfg.dim, cfg.seed)?;
    let mut table = CurveTable::default();
    if cfg.alternating {
        table.push(CurveRow::from_report(0, &test_metrics(&init, split, cfg.k)?))?;
        train_alternating(init, split, cfg, cfg.n_ep, |epoch, model| {
            record(&mut table, epoch, model, split, cfg)
        })?;
        return Ok(table);
    }
    let base = train_accuracy_phase(init, split, cfg)?.model;
    table.push(CurveRow::from_report(0, &test_metrics(&base, split, cfg.k)?))?;
    train_diversity_phase(base, cfg, cfg.n_ep, |epoch, model| {
        record(&mut table, epoch, model, split, cfg)
    })?;
    Ok(table)
}

fn record(table: &mut CurveTable, epoch: usize, model: &MfModel, split: &SplitSet, cfg: &TrainConfig) -> Result<()> {
    if epoch % cfg.eval_every == 0 || epoch == cfg.n_ep {
        let report = test_metrics(model, split, cfg.k)?;
        log::info!(
            "n_ep={epoch} ndcg={:.5} coverage={:.5} entropy={:.5} neg_gini={:.5}",
            report.ndcg,
            report.coverage,
            report.entropy,
            report.neg_gini()
        );
        table.push(CurveRow::from_report(epoch, &report))?;
    }
    Ok(())
}
