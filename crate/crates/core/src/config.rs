//! Run configuration as flat `key=value` text.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dataio::FormatSpec;
use crate::divreg::UnmaskScheme;
use crate::error::{Error, Result};
use crate::mfcore::AdamConfig;

/// Training hyperparameters shared by the accuracy and diversity phases.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub adam: AdamConfig,
    /// Recommendation list length.
    pub k: usize,
    pub n_unmask: usize,
    pub unmask_scheme: UnmaskScheme,
    /// Diversity batch rows; `None` means all users.
    pub r_b: Option<usize>,
    /// Diversity batch columns; `None` means all items.
    pub c_b: Option<usize>,
    /// Diversity epochs (the maximum for a sweep).
    pub n_ep: usize,
    pub accuracy_patience: usize,
    pub max_accuracy_epochs: usize,
    pub bpr_batch_size: usize,
    pub seed: u64,
    pub eval_every: usize,
    /// Keep the L2 term during the diversity phase.
    pub diversity_weight_decay: bool,
    /// Interleave accuracy and diversity epochs instead of running them in sequence.
    pub alternating: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 32,
            adam: AdamConfig::default(),
            k: 5,
            n_unmask: 100,
            unmask_scheme: UnmaskScheme::TopPlus,
            r_b: None,
            c_b: None,
            n_ep: 10,
            accuracy_patience: 5,
            max_accuracy_epochs: 500,
            bpr_batch_size: 1024,
            seed: 0,
            eval_every: 1,
            diversity_weight_decay: true,
            alternating: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value '{value}' for '{key}'")))
}

fn parse_batch(key: &str, value: &str) -> Result<Option<usize>> {
    match value {
        "full" => Ok(None),
        v => parse(key, v).map(Some),
    }
}

fn fmt_batch(v: Option<usize>) -> String {
    v.map_or_else(|| "full".to_string(), |n| n.to_string())
}

impl TrainConfig {
    pub const KEYS: &'static [&'static str] = &[
        "dim",
        "lr",
        "weight_decay",
        "beta1",
        "beta2",
        "eps",
        "k",
        "n_unmask",
        "unmask_scheme",
        "r_b",
        "c_b",
        "n_ep",
        "accuracy_patience",
        "max_accuracy_epochs",
        "bpr_batch_size",
        "seed",
        "eval_every",
        "diversity_weight_decay",
        "alternating",
    ];

    /// Applies one `key=value` setting. Returns `Ok(false)` for keys this
    /// struct does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "dim" => self.dim = parse(key, value)?,
            "lr" => self.adam.lr = parse(key, value)?,
            "weight_decay" => self.adam.weight_decay = parse(key, value)?,
            "beta1" => self.adam.beta1 = parse(key, value)?,
            "beta2" => self.adam.beta2 = parse(key, value)?,
            "eps" => self.adam.eps = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "n_unmask" => self.n_unmask = parse(key, value)?,
            "unmask_scheme" => self.unmask_scheme = value.parse()?,
            "r_b" => self.r_b = parse_batch(key, value)?,
            "c_b" => self.c_b = parse_batch(key, value)?,
            "n_ep" | "n_ep_max" => self.n_ep = parse(key, value)?,
            "accuracy_patience" => self.accuracy_patience = parse(key, value)?,
            "max_accuracy_epochs" => self.max_accuracy_epochs = parse(key, value)?,
            "bpr_batch_size" => self.bpr_batch_size = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "eval_every" => self.eval_every = parse(key, value)?,
            "diversity_weight_decay" => self.diversity_weight_decay = parse(key, value)?,
            "alternating" => self.alternating = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("dim", self.dim),
            ("k", self.k),
            ("accuracy_patience", self.accuracy_patience),
            ("max_accuracy_epochs", self.max_accuracy_epochs),
            ("bpr_batch_size", self.bpr_batch_size),
            ("eval_every", self.eval_every),
            ("r_b", self.r_b.unwrap_or(1)),
            ("c_b", self.c_b.unwrap_or(1)),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        let a = &self.adam;
        if !(a.lr > 0.0 && a.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", a.lr)));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
            return Err(Error::Config("beta1 and beta2 must lie in [0, 1)".into()));
        }
        if !(a.eps > 0.0) || !(a.weight_decay >= 0.0) {
            return Err(Error::Config("eps must be positive and weight_decay non-negative".into()));
        }
        Ok(())
    }

    fn write_kv(&self, out: &mut String) {
        let a = &self.adam;
        let pairs: [(&str, String); 19] = [
            ("dim", self.dim.to_string()),
            ("lr", a.lr.to_string()),
            ("weight_decay", a.weight_decay.to_string()),
            ("beta1", a.beta1.to_string()),
            ("beta2", a.beta2.to_string()),
            ("eps", a.eps.to_string()),
            ("k", self.k.to_string()),
            ("n_unmask", self.n_unmask.to_string()),
            ("unmask_scheme", self.unmask_scheme.to_string()),
            ("r_b", fmt_batch(self.r_b)),
            ("c_b", fmt_batch(self.c_b)),
            ("n_ep", self.n_ep.to_string()),
            ("accuracy_patience", self.accuracy_patience.to_string()),
            ("max_accuracy_epochs", self.max_accuracy_epochs.to_string()),
            ("bpr_batch_size", self.bpr_batch_size.to_string()),
            ("seed", self.seed.to_string()),
            ("eval_every", self.eval_every.to_string()),
            ("diversity_weight_decay", self.diversity_weight_decay.to_string()),
            ("alternating", self.alternating.to_string()),
        ];
        for (k, v) in pairs {
            let _ = writeln!(out, "{k}={v}");
        }
    }
}

/// Everything a CLI run needs: data locations, preprocessing and training.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Raw interaction file.
    pub input: Option<PathBuf>,
    /// Name of a [`FormatSpec`] preset.
    pub format: String,
    /// k-core threshold; 0 disables filtering.
    pub core: usize,
    pub split_seed: u64,
    /// Directory holding the canonical dataset and split files.
    pub data_dir: Option<PathBuf>,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            format: "movielens".into(),
            core: 0,
            split_seed: 0,
            data_dir: None,
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "format" => {
                value.parse::<FormatSpec>()?;
                self.format = value.to_string();
            }
            "core" => self.core = parse(key, value)?,
            "split_seed" => self.split_seed = parse(key, value)?,
            "data_dir" => self.data_dir = Some(PathBuf::from(value)),
            _ => {
                if !self.train.set(key, value)? {
                    return Err(Error::Config(format!("unknown key '{key}'")));
                }
            }
        }
        Ok(())
    }

    pub fn format_spec(&self) -> Result<FormatSpec> {
        self.format.parse()
    }

    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got '{line}'", idx + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        if let Some(p) = &self.input {
            let _ = writeln!(out, "input={}", p.display());
        }
        let _ = writeln!(out, "format={}", self.format);
        let _ = writeln!(out, "core={}", self.core);
        let _ = writeln!(out, "split_seed={}", self.split_seed);
        if let Some(p) = &self.data_dir {
            let _ = writeln!(out, "data_dir={}", p.display());
        }
        self.train.write_kv(&mut out);
        out
    }

    /// Reads a config file and checks that the paths it names exist.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::from_kv_str(&text)?;
        for p in cfg.input.iter().chain(cfg.data_dir.iter()) {
            if !p.exists() {
                return Err(Error::Config(format!("path '{}' does not exist", p.display())));
            }
        }
        Ok(cfg)
    }
}
