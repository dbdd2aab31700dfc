use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};

/// Boolean selection over a score block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopMask {
    keep: Array2<bool>,
    k_eff: Vec<usize>,
}

impl TopMask {
    pub fn from_keep(keep: Array2<bool>) -> Self {
        let k_eff = keep
            .rows()
            .into_iter()
            .map(|row| row.iter().filter(|&&k| k).count())
            .collect();
        TopMask { keep, k_eff }
    }

    pub fn keep(&self) -> &Array2<bool> {
        &self.keep
    }

    /// Number of kept entries in each row.
    pub fn k_eff(&self) -> &[usize] {
        &self.k_eff
    }

    pub fn is_kept(&self, row: usize, col: usize) -> bool {
        self.keep[[row, col]]
    }
}

/// Keeps entry `v` of a row iff fewer than `k` entries of the row are
/// strictly greater than `v`. Ties at the boundary are all kept.
pub fn top_mask(soft: ArrayView2<'_, f64>, k: usize) -> Result<TopMask> {
    let cols = soft.ncols();
    if k == 0 || k > cols {
        return Err(Error::InvalidArgument(format!(
            "top-k size {k} must lie in [1, {cols}]"
        )));
    }
    let mut keep = Array2::from_elem(soft.dim(), false);
    let mut scratch = Vec::with_capacity(cols);
    for (r, row) in soft.rows().into_iter().enumerate() {
        scratch.clear();
        scratch.extend(row.iter().copied());
        // k-th largest value; anything >= it has at most k-1 strictly larger entries.
        let (_, kth, _) = scratch.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
        let threshold = *kth;
        for (c, &v) in row.iter().enumerate() {
            keep[[r, c]] = v >= threshold;
        }
    }
    Ok(TopMask::from_keep(keep))
}

/// How extra entries are admitted into the mask beyond the top-k.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum UnmaskScheme {
    None,
    /// The `n` highest-scored entries not already kept.
    #[default]
    TopPlus,
    /// `n` uniformly random entries not already kept.
    Random,
}

impl FromStr for UnmaskScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(UnmaskScheme::None),
            "top_plus" => Ok(UnmaskScheme::TopPlus),
            "random" => Ok(UnmaskScheme::Random),
            other => Err(Error::InvalidArgument(format!(
                "unknown unmask scheme '{other}' (expected none, top_plus or random)"
            ))),
        }
    }
}

impl fmt::Display for UnmaskScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnmaskScheme::None => "none",
            UnmaskScheme::TopPlus => "top_plus",
            UnmaskScheme::Random => "random",
        })
    }
}

/// Widens `mask` by up to `n` entries per row that it does not already keep.
///
/// When fewer than `n` entries remain outside the mask, all of them are
/// admitted. `TopPlus` breaks score ties by lower column index.
pub fn unmask(
    mask: &TopMask,
    soft: ArrayView2<'_, f64>,
    scheme: UnmaskScheme,
    n: usize,
    rng: &mut impl Rng,
) -> TopMask {
    if scheme == UnmaskScheme::None || n == 0 {
        return mask.clone();
    }
    let mut keep = mask.keep.clone();
    for (r, row) in soft.rows().into_iter().enumerate() {
        let mut candidates: Vec<usize> = (0..row.len()).filter(|&c| !keep[[r, c]]).collect();
        let take = n.min(candidates.len());
        if take == 0 {
            continue;
        }
        match scheme {
            UnmaskScheme::TopPlus => {
                candidates.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
                for &c in &candidates[..take] {
                    keep[[r, c]] = true;
                }
            }
            UnmaskScheme::Random => {
                for pick in sample(rng, candidates.len(), take) {
                    keep[[r, candidates[pick]]] = true;
                }
            }
            UnmaskScheme::None => unreachable!(),
        }
    }
    TopMask::from_keep(keep)
}
