use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use divmf::dataio::{
    dataset_stats, kcore_filter, leave_one_out_split, parse_interactions, read_dataset, read_split, remap_ids,
    to_implicit, write_dataset, write_split, Dataset, InteractionLog, ShortUserPolicy, SplitSet,
};
use divmf::metrics::recommend_topk;
use divmf::trainer::{
    load_checkpoint, save_checkpoint, sweep_tradeoff, test_metrics, train_accuracy_phase, train_alternating,
    train_diversity_phase,
};
use divmf::{MfModel, RunConfig};

const DATASET_FILE: &str = "dataset.tsv";
const SPLIT_FILE: &str = "split.tsv";

#[derive(Parser)]
#[command(name = "divmf", version, about = "Diversity-regularized matrix factorization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, filter and split a raw interaction file into a data directory.
    Preprocess {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        input: Option<PathBuf>,
        /// movielens, csv, tsv, whitespace or epinions.
        #[arg(long)]
        format: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print dataset statistics for a raw file or a data directory.
    Stats {
        #[command(flatten)]
        shared: Shared,
        #[arg(long, conflicts_with = "data")]
        input: Option<PathBuf>,
        #[arg(long)]
        format: Option<String>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Train both phases, save a checkpoint and print test metrics.
    Train {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Defaults to `model.ckpt` inside the data directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Also write the final top-k lists here.
        #[arg(long)]
        lists: Option<PathBuf>,
    },
    /// Record the accuracy/diversity curve over diversity epochs as CSV.
    Sweep {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        data: Option<PathBuf>,
        /// CSV destination; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        eval_every: Option<usize>,
    },
    /// Print test metrics of a saved checkpoint.
    Eval {
        #[command(flatten)]
        shared: Shared,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

/// Flags accepted by every subcommand; they override the config file.
#[derive(Args)]
struct Shared {
    /// key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Split seed for preprocess, training seed otherwise.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long = "n-ep", visible_alias = "n-ep-max")]
    n_ep: Option<usize>,
    #[arg(long)]
    core: Option<usize>,
    #[arg(long, value_parser = ["none", "top_plus", "random"])]
    unmask_scheme: Option<String>,
    #[arg(long)]
    n_unmask: Option<usize>,
    /// Diversity batch rows, or "full".
    #[arg(long)]
    rb: Option<String>,
    /// Diversity batch columns, or "full".
    #[arg(long)]
    cb: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
}

impl Shared {
    fn load(&self, seed_key: &str) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path).with_context(|| format!("loading config {}", path.display()))?,
            None => RunConfig::default(),
        };
        let overrides = [
            (seed_key, self.seed.map(|v| v.to_string())),
            ("k", self.k.map(|v| v.to_string())),
            ("n_ep", self.n_ep.map(|v| v.to_string())),
            ("core", self.core.map(|v| v.to_string())),
            ("unmask_scheme", self.unmask_scheme.clone()),
            ("n_unmask", self.n_unmask.map(|v| v.to_string())),
            ("r_b", self.rb.clone()),
            ("c_b", self.cb.clone()),
            ("dim", self.dim.map(|v| v.to_string())),
        ];
        for (key, value) in overrides {
            if let Some(value) = value {
                cfg.set(key, &value).with_context(|| format!("--{key}"))?;
            }
        }
        Ok(cfg)
    }
}

fn data_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf> {
    match flag.or_else(|| cfg.data_dir.clone()) {
        Some(dir) => Ok(dir),
        None => bail!("no data directory given (use --data or data_dir= in the config)"),
    }
}

fn load_split(dir: &Path) -> Result<SplitSet> {
    let path = dir.join(SPLIT_FILE);
    read_split(&path).with_context(|| format!("reading {}", path.display()))
}

fn load_raw(cfg: &RunConfig) -> Result<InteractionLog> {
    let Some(input) = &cfg.input else {
        bail!("no input file given (use --input or input= in the config)");
    };
    let log = parse_interactions(input, &cfg.format_spec()?)
        .with_context(|| format!("parsing {}", input.display()))?;
    let log = to_implicit(log);
    Ok(if cfg.core > 0 { kcore_filter(&log, cfg.core)? } else { log })
}

fn preprocess(cfg: &RunConfig, out: &Path) -> Result<()> {
    let log = load_raw(cfg)?;
    let (log, _maps) = remap_ids(&log);
    let stats = dataset_stats(&log);
    let split = leave_one_out_split(&log, cfg.split_seed, ShortUserPolicy::Drop)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let dataset = Dataset { n_users: log.n_users(), n_items: log.n_items(), log };
    write_dataset(out.join(DATASET_FILE), &dataset)?;
    write_split(out.join(SPLIT_FILE), &split)?;
    println!("split_seed={}", cfg.split_seed);
    println!("{stats}");
    println!("split_users={}", split.n_users);
    Ok(())
}

fn train(cfg: &RunConfig, split: &SplitSet) -> Result<MfModel> {
    let t = &cfg.train;
    let init = MfModel::init(split.n_users, split.n_items, t.dim, t.seed)?;
    let model = if t.alternating {
        train_alternating(init, split, t, t.n_ep, |_, _| Ok(()))?
    } else {
        let base = train_accuracy_phase(init, split, t)?.model;
        train_diversity_phase(base, t, t.n_ep, |_, _| Ok(()))?
    };
    Ok(model)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess { shared, input, format, out } => {
            let mut cfg = shared.load("split_seed")?;
            apply_input(&mut cfg, input, format)?;
            let out = data_dir(out, &cfg)?;
            preprocess(&cfg, &out)
        }
        Command::Stats { shared, input, format, data } => {
            let mut cfg = shared.load("split_seed")?;
            apply_input(&mut cfg, input, format)?;
            let stats = match data.or_else(|| cfg.input.is_none().then(|| cfg.data_dir.clone()).flatten()) {
                Some(dir) => {
                    let path = dir.join(DATASET_FILE);
                    let data = read_dataset(&path).with_context(|| format!("reading {}", path.display()))?;
                    dataset_stats(&data.log)
                }
                None => dataset_stats(&load_raw(&cfg)?),
            };
            println!("{stats}");
            Ok(())
        }
        Command::Train { shared, data, checkpoint, lists } => {
            let cfg = shared.load("seed")?;
            cfg.train.validate()?;
            let dir = data_dir(data, &cfg)?;
            let split = load_split(&dir)?;
            let model = train(&cfg, &split)?;
            let ckpt = checkpoint.unwrap_or_else(|| dir.join("model.ckpt"));
            save_checkpoint(&model, &ckpt).with_context(|| format!("writing {}", ckpt.display()))?;
            if let Some(path) = lists {
                let recs = recommend_topk(&model, &split.known_items(), cfg.train.k)?;
                fs::write(&path, recs.to_text()).with_context(|| format!("writing {}", path.display()))?;
            }
            let report = test_metrics(&model, &split, cfg.train.k)?;
            println!("seed={}", cfg.train.seed);
            println!("{report}");
            Ok(())
        }
        Command::Sweep { shared, data, out, eval_every } => {
            let mut cfg = shared.load("seed")?;
            if let Some(n) = eval_every {
                cfg.train.eval_every = n;
            }
            cfg.train.validate()?;
            let dir = data_dir(data, &cfg)?;
            let split = load_split(&dir)?;
            log::info!("sweep seed={}", cfg.train.seed);
            let table = sweep_tradeoff(&split, &cfg.train)?;
            match out {
                Some(path) => {
                    table.write_csv(&path)?;
                    let sidecar = path.with_extension("cfg");
                    fs::write(&sidecar, cfg.to_kv_string())
                        .with_context(|| format!("writing {}", sidecar.display()))?;
                }
                None => print!("{}", table.to_csv()),
            }
            Ok(())
        }
        Command::Eval { shared, data, checkpoint } => {
            let cfg = shared.load("seed")?;
            let dir = data_dir(data, &cfg)?;
            let split = load_split(&dir)?;
            let ckpt = checkpoint.unwrap_or_else(|| dir.join("model.ckpt"));
            let model = load_checkpoint(&ckpt).with_context(|| format!("reading {}", ckpt.display()))?;
            model
                .check_shape(split.n_users, split.n_items)
                .with_context(|| format!("checkpoint {} does not match {}", ckpt.display(), dir.display()))?;
            println!("{}", test_metrics(&model, &split, cfg.train.k)?);
            Ok(())
        }
    }
}

fn apply_input(cfg: &mut RunConfig, input: Option<PathBuf>, format: Option<String>) -> Result<()> {
    if let Some(path) = input {
        cfg.input = Some(path);
    }
    if let Some(format) = format {
        cfg.set("format", &format)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
