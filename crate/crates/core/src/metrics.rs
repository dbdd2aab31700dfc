//! Top-k list generation and the accuracy / aggregate-diversity metrics.

use std::cmp::Ordering;
use std::fmt;

use ndarray::{ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::dataio::UserItems;
use crate::error::{Error, Result};
use crate::mfcore::MfModel;

/// Per-user ordered recommendation lists of a common length `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecLists {
    k: usize,
    lists: Vec<Vec<u32>>,
}

impl RecLists {
    pub fn new(k: usize, lists: Vec<Vec<u32>>) -> Result<Self> {
        for (u, list) in lists.iter().enumerate() {
            if list.len() != k {
                return Err(Error::Shape(format!(
                    "list of user {u} has length {}, expected {k}",
                    list.len()
                )));
            }
            let mut sorted = list.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidArgument(format!("list of user {u} repeats an item")));
            }
        }
        Ok(RecLists { k, lists })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_users(&self) -> usize {
        self.lists.len()
    }

    pub fn list(&self, user: usize) -> &[u32] {
        &self.lists[user]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.lists.iter().map(Vec::as_slice)
    }

    /// One line per user: `u: i1 i2 ... ik`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (u, list) in self.lists.iter().enumerate() {
            out.push_str(&u.to_string());
            out.push(':');
            for i in list {
                out.push(' ');
                out.push_str(&i.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lists = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let bad = |message: String| Error::Malformed {
                line: idx + 1,
                message,
            };
            let (user, rest) = line
                .split_once(':')
                .ok_or_else(|| bad("missing ':'".into()))?;
            let user: usize = user.trim().parse().map_err(|_| bad(format!("bad user '{user}'")))?;
            if user != lists.len() {
                return Err(bad(format!("expected user {}, found {user}", lists.len())));
            }
            let items = rest
                .split_whitespace()
                .map(|t| t.parse::<u32>().map_err(|_| bad(format!("bad item '{t}'"))))
                .collect::<Result<Vec<_>>>()?;
            lists.push(items);
        }
        let k = lists.first().map_or(0, Vec::len);
        Self::new(k, lists)
    }
}

fn rank_order(scores: &ArrayView1<'_, f64>, a: u32, b: u32) -> Ordering {
    scores[b as usize]
        .total_cmp(&scores[a as usize])
        .then(a.cmp(&b))
}

/// The `k` highest-scored items of one row, skipping `excluded` (sorted).
/// Ties go to the lower item index.
fn top_k_row(scores: ArrayView1<'_, f64>, excluded: &[u32], k: usize) -> Vec<u32> {
    let mut candidates: Vec<u32> = (0..scores.len() as u32)
        .filter(|i| excluded.binary_search(i).is_err())
        .collect();
    if candidates.len() > k {
        candidates.select_nth_unstable_by(k - 1, |&a, &b| rank_order(&scores, a, b));
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(|&a, &b| rank_order(&scores, a, b));
    candidates
}

fn check_feasible(exclude: Option<&UserItems>, n_users: usize, n_items: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    for u in 0..n_users {
        let seen = exclude.map_or(0, |e| e.degree(u));
        if n_items < seen + k {
            return Err(Error::InvalidArgument(format!(
                "user {u} has only {} unseen items, cannot recommend {k}",
                n_items.saturating_sub(seen)
            )));
        }
    }
    Ok(())
}

/// Top-k lists from an explicit score matrix (one row per user).
pub fn recommend_from_scores(
    scores: ArrayView2<'_, f64>,
    exclude: Option<&UserItems>,
    k: usize,
) -> Result<RecLists> {
    let (n_users, n_items) = scores.dim();
    check_feasible(exclude, n_users, n_items, k)?;
    let lists = (0..n_users)
        .map(|u| top_k_row(scores.row(u), exclude.map_or(&[][..], |e| e.items(u)), k))
        .collect();
    Ok(RecLists { k, lists })
}

const SCORE_CHUNK: usize = 256;

/// Scores every item for every user, removes the user's `exclude` items and
/// keeps the `k` best. Users are processed in parallel chunks; the output
/// does not depend on the thread count.
pub fn recommend_topk(model: &MfModel, exclude: &UserItems, k: usize) -> Result<RecLists> {
    if exclude.n_users() != model.n_users() {
        return Err(Error::Shape(format!(
            "exclusion set covers {} users, model has {}",
            exclude.n_users(),
            model.n_users()
        )));
    }
    check_feasible(Some(exclude), model.n_users(), model.n_items(), k)?;
    let starts: Vec<usize> = (0..model.n_users()).step_by(SCORE_CHUNK).collect();
    let chunks: Vec<Vec<Vec<u32>>> = starts
        .par_iter()
        .map(|&start| {
            let end = (start + SCORE_CHUNK).min(model.n_users());
            let users: Vec<usize> = (start..end).collect();
            let scores = model.score_users(&users).expect("indices in range");
            users
                .iter()
                .enumerate()
                .map(|(row, &u)| top_k_row(scores.row(row), exclude.items(u), k))
                .collect()
        })
        .collect();
    Ok(RecLists {
        k,
        lists: chunks.into_iter().flatten().collect(),
    })
}

/// Appearance counts of each item across all lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ItemFrequency {
    counts: Vec<u64>,
}

impl ItemFrequency {
    pub fn from_lists(lists: &RecLists, n_items: usize) -> Result<Self> {
        let mut counts = vec![0u64; n_items];
        for list in lists.iter() {
            for &i in list {
                let slot = counts.get_mut(i as usize).ok_or(Error::OutOfRange {
                    what: "items",
                    index: i as usize,
                    len: n_items,
                })?;
                *slot += 1;
            }
        }
        Ok(ItemFrequency { counts })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Normalized distribution `p(i) = f(i) / Σ f`; all zeros when empty.
    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total();
        if total == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts.iter().map(|&c| c as f64 / total as f64).collect()
    }
}

fn catalog_size(lists: &RecLists) -> usize {
    lists
        .iter()
        .flat_map(|l| l.iter())
        .map(|&i| i as usize + 1)
        .max()
        .unwrap_or(0)
}

/// Mean over users of `1 / log2(rank + 1)` for the held-out item's 1-based
/// rank, or 0 when it is not in the list.
pub fn ndcg_at_k(lists: &RecLists, test: &[u32]) -> Result<f64> {
    if test.len() != lists.n_users() {
        return Err(Error::Shape(format!(
            "{} test items for {} users",
            test.len(),
            lists.n_users()
        )));
    }
    if test.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = lists
        .iter()
        .zip(test)
        .map(|(list, target)| match list.iter().position(|i| i == target) {
            Some(pos) => 1.0 / ((pos + 2) as f64).log2(),
            None => 0.0,
        })
        .sum();
    Ok(total / test.len() as f64)
}

/// Share of the catalog that appears in at least one list.
pub fn coverage_at_k(lists: &RecLists, n_items: usize) -> Result<f64> {
    let freq = ItemFrequency::from_lists(lists, n_items)?;
    let covered = freq.counts().iter().filter(|&&c| c > 0).count();
    Ok(covered as f64 / n_items as f64)
}

/// Natural-log entropy of the item frequency distribution.
pub fn entropy_at_k(lists: &RecLists) -> f64 {
    let freq = ItemFrequency::from_lists(lists, catalog_size(lists)).expect("sized to fit");
    entropy_of(&freq.probabilities())
}

fn entropy_of(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

/// Gini index of the item frequency distribution over the whole catalog;
/// items never recommended count as zero-probability entries.
pub fn gini_at_k(lists: &RecLists, n_items: usize) -> Result<f64> {
    if n_items < 2 {
        return Err(Error::InvalidArgument("Gini index needs at least 2 items".into()));
    }
    let freq = ItemFrequency::from_lists(lists, n_items)?;
    Ok(gini_of(freq.probabilities()))
}

fn gini_of(mut p: Vec<f64>) -> f64 {
    let n = p.len() as f64;
    p.sort_by(f64::total_cmp);
    let weighted: f64 = p
        .iter()
        .enumerate()
        .map(|(j, &v)| (2.0 * (j + 1) as f64 - n - 1.0) * v)
        .sum();
    weighted / (n - 1.0)
}

/// All four metrics at one list length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub k: usize,
    pub ndcg: f64,
    pub coverage: f64,
    pub entropy: f64,
    pub gini: f64,
}

impl MetricReport {
    pub fn neg_gini(&self) -> f64 {
        -self.gini
    }

    pub fn from_lists(lists: &RecLists, targets: &[u32], n_items: usize) -> Result<Self> {
        Ok(MetricReport {
            k: lists.k(),
            ndcg: ndcg_at_k(lists, targets)?,
            coverage: coverage_at_k(lists, n_items)?,
            entropy: entropy_at_k(lists),
            gini: gini_at_k(lists, n_items)?,
        })
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "k={}", self.k)?;
        writeln!(f, "ndcg={:.6}", self.ndcg)?;
        writeln!(f, "coverage={:.6}", self.coverage)?;
        writeln!(f, "entropy={:.6}", self.entropy)?;
        write!(f, "neg_gini={:.6}", self.neg_gini())
    }
}

/// Generates lists for `model` excluding `exclude` and scores them against
/// one target item per user.
pub fn evaluate(model: &MfModel, exclude: &UserItems, targets: &[u32], k: usize) -> Result<MetricReport> {
    let lists = recommend_topk(model, exclude, k)?;
    MetricReport::from_lists(&lists, targets, model.n_items())
}
