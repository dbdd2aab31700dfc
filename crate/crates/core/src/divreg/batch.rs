use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};

/// Shape of a diversity mini-batch: `r_b` users by `c_b` items, with `k_b`
/// items recommended per row inside the block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MiniBatchSpec {
    pub r_b: usize,
    pub c_b: usize,
    pub k_b: usize,
}

impl MiniBatchSpec {
    /// `k_b = max(1, round_half_even(c_b / n_items * k))`, capped at `c_b`.
    pub fn new(n_users: usize, n_items: usize, r_b: usize, c_b: usize, k: usize) -> Result<Self> {
        if r_b == 0 || r_b > n_users || c_b == 0 || c_b > n_items {
            return Err(Error::InvalidArgument(format!(
                "batch {r_b}x{c_b} does not fit a {n_users}x{n_items} score matrix"
            )));
        }
        if k == 0 || k > n_items {
            return Err(Error::InvalidArgument(format!(
                "k={k} must lie in [1, {n_items}]"
            )));
        }
        let expected = c_b as f64 / n_items as f64 * k as f64;
        let k_b = (expected.round_ties_even() as usize).max(1).min(c_b);
        Ok(MiniBatchSpec { r_b, c_b, k_b })
    }
}

/// Sampled rows and columns of a mini-batch, each in ascending order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MiniBatch {
    pub spec: MiniBatchSpec,
    pub users: Vec<usize>,
    pub items: Vec<usize>,
}

impl MiniBatch {
    pub fn full(n_users: usize, n_items: usize, k: usize) -> Result<Self> {
        Ok(MiniBatch {
            spec: MiniBatchSpec::new(n_users, n_items, n_users, n_items, k)?,
            users: (0..n_users).collect(),
            items: (0..n_items).collect(),
        })
    }
}

/// Uniformly samples `r_b` users and `c_b` items without replacement.
pub fn sample_minibatch(
    n_users: usize,
    n_items: usize,
    r_b: usize,
    c_b: usize,
    k: usize,
    rng: &mut impl Rng,
) -> Result<MiniBatch> {
    let spec = MiniBatchSpec::new(n_users, n_items, r_b, c_b, k)?;
    let mut users = sample(rng, n_users, r_b).into_vec();
    let mut items = sample(rng, n_items, c_b).into_vec();
    users.sort_unstable();
    items.sort_unstable();
    Ok(MiniBatch { spec, users, items })
}
