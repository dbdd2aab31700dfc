use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn divmf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_divmf")).args(args).output().expect("run divmf")
}

fn ok(args: &[&str]) -> String {
    let out = divmf(args);
    assert!(
        out.status.success(),
        "divmf {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Small clustered ratings file; `with_time` selects the MovieLens layout,
/// otherwise whitespace `user item rating`.
fn write_ratings(path: &Path, users: u32, items: u32, with_time: bool) {
    let mut text = String::new();
    for u in 0..users {
        let mut state = u.wrapping_mul(2_654_435_761).wrapping_add(12_345);
        for t in 0..(8 + u % 7) {
            state = state.wrapping_mul(1_103_515_245).wrapping_add(12_345);
            let item = (u % 3) * (items / 3) + (state >> 8) % (items / 3 + 2);
            let item = item % items;
            if with_time {
                let _ = writeln!(text, "{}::{}::4::{}", u + 1, item + 1, 1000 + t);
            } else {
                let _ = writeln!(text, "{} {} 4", u + 1, item + 1);
            }
        }
    }
    fs::write(path, text).unwrap();
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new(users: u32, items: u32) -> Self {
        let dir = tempfile::tempdir().unwrap();
        write_ratings(&dir.path().join("ratings.dat"), users, items, true);
        let f = Fixture { dir };
        ok(&["preprocess", "--input", &f.path("ratings.dat"), "--format", "movielens", "--out", &f.path("data")]);
        f
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_str().unwrap().to_string()
    }
}

const FAST: [&str; 4] = ["--dim", "8", "--n-unmask", "5"];
const TWO_EPOCHS: [&str; 2] = ["--n-ep", "2"];

fn with<'a>(base: &[&'a str], extra: &[&'a str]) -> Vec<&'a str> {
    base.iter().chain(extra).copied().collect()
}

#[test]
fn preprocess_reports_stats_and_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("r.txt");
    write_ratings(&raw, 60, 30, false);
    let raw = raw.to_str().unwrap();
    let run = |out: &str, seed: &str| {
        let target = dir.path().join(out);
        let stdout = ok(&["preprocess", "--input", raw, "--format", "whitespace", "--seed", seed, "--out", target.to_str().unwrap()]);
        (stdout, fs::read(target.join("split.tsv")).unwrap(), fs::read(target.join("dataset.tsv")).unwrap())
    };
    let (stdout, split_a, data_a) = run("a", "5");
    assert!(stdout.contains("users=60"), "{stdout}");
    assert!(stdout.contains("split_seed=5"));
    let (_, split_b, data_b) = run("b", "5");
    assert_eq!(split_a, split_b);
    assert_eq!(data_a, data_b);
    let (_, split_c, data_c) = run("c", "6");
    assert_eq!(data_a, data_c);
    assert_ne!(split_a, split_c, "untimed splits should depend on the seed");
}

#[test]
fn kcore_flag_filters_sparse_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("r.dat");
    write_ratings(&raw, 60, 30, true);
    let raw = raw.to_str().unwrap();
    let plain = ok(&["stats", "--input", raw, "--format", "movielens"]);
    let cored = ok(&["stats", "--input", raw, "--format", "movielens", "--core", "6"]);
    assert_ne!(plain, cored);
    let users = |s: &str| s.lines().find_map(|l| l.strip_prefix("users=")).unwrap().parse::<usize>().unwrap();
    assert!(users(&cored) < users(&plain));
}

#[test]
fn train_is_deterministic_and_eval_reproduces_its_report() {
    let f = Fixture::new(80, 45);
    let data = f.path("data");
    let ckpt = f.path("m.ckpt");
    let args = with(&["train", "--data", &data, "--checkpoint", &ckpt, "--seed", "3"], &with(&FAST, &TWO_EPOCHS));
    let first = ok(&args);
    let second = ok(&args);
    assert_eq!(first, second);
    assert!(first.starts_with("seed=3\n"), "{first}");
    for key in ["k=5", "ndcg=", "coverage=", "entropy=", "neg_gini="] {
        assert!(first.contains(key), "missing {key} in {first}");
    }

    let eval = ok(&["eval", "--data", &data, "--checkpoint", &ckpt]);
    assert_eq!(first.strip_prefix("seed=3\n").unwrap(), eval);
    assert_eq!(eval, ok(&["eval", "--data", &data, "--checkpoint", &ckpt]));
}

#[test]
fn zero_diversity_epochs_match_the_sweep_baseline() {
    let f = Fixture::new(80, 45);
    let data = f.path("data");
    let train = ok(&with(&["train", "--data", &data, "--checkpoint", &f.path("m.ckpt")], &with(&FAST, &["--n-ep", "0"])));
    let csv = ok(&with(&["sweep", "--data", &data], &with(&FAST, &["--n-ep-max", "0"])));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "n_ep,ndcg,coverage,entropy,neg_gini");
    let row: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
    let ndcg: f64 = train.lines().find_map(|l| l.strip_prefix("ndcg=")).unwrap().parse().unwrap();
    assert_eq!(row[0], 0.0);
    assert!((row[1] - ndcg).abs() < 1e-5, "{} vs {ndcg}", row[1]);
}

#[test]
fn sweep_writes_csv_and_config_sidecar() {
    let f = Fixture::new(80, 45);
    let out = f.path("curve.csv");
    ok(&with(&["sweep", "--data", &f.path("data"), "--out", &out, "--k", "10", "--seed", "9"], &with(&FAST, &TWO_EPOCHS)));
    let csv = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n_ep,ndcg,coverage,entropy,neg_gini");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0,") && lines[3].starts_with("2,"));
    let sidecar = fs::read_to_string(f.path("curve.cfg")).unwrap();
    assert!(sidecar.contains("seed=9\n") && sidecar.contains("k=10\n"), "{sidecar}");

    let again = f.path("again.csv");
    ok(&with(&["sweep", "--data", &f.path("data"), "--out", &again, "--k", "10", "--seed", "9"], &with(&FAST, &TWO_EPOCHS)));
    assert_eq!(csv, fs::read_to_string(&again).unwrap());
}

#[test]
fn flags_override_config_file() {
    let f = Fixture::new(80, 45);
    let cfg = f.path("run.cfg");
    fs::write(&cfg, format!("data_dir={}\nk=10\ndim=8\nn_ep=1\nn_unmask=5\n", f.path("data"))).unwrap();
    let from_file = ok(&["train", "--config", &cfg, "--checkpoint", &f.path("a.ckpt")]);
    assert!(from_file.contains("\nk=10\n"), "{from_file}");
    let overridden = ok(&["train", "--config", &cfg, "--checkpoint", &f.path("b.ckpt"), "--k", "3"]);
    assert!(overridden.contains("\nk=3\n"), "{overridden}");
}

#[test]
fn eval_rejects_checkpoint_of_another_dataset() {
    let small = Fixture::new(40, 30);
    let large = Fixture::new(80, 45);
    let ckpt = small.path("m.ckpt");
    ok(&with(&["train", "--data", &small.path("data"), "--checkpoint", &ckpt], &with(&FAST, &TWO_EPOCHS)));
    let out = divmf(&["eval", "--data", &large.path("data"), "--checkpoint", &ckpt]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("shape"), "{err}");
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.dat");
    let out = divmf(&["preprocess", "--input", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "bogus_key=1\n").unwrap();
    let out = divmf(&["train", "--config", cfg.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus_key"));

    let out = divmf(&["train", "--data", dir.path().to_str().unwrap(), "--k", "0"]);
    assert!(!out.status.success());
}
