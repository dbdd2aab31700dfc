#![allow(dead_code)]

use std::fmt::Write as _;

use divmf::dataio::{
    leave_one_out_split, parse_reader, remap_ids, to_implicit, FormatSpec, InteractionLog, ShortUserPolicy,
    SplitSet,
};
use divmf::mfcore::MfModel;
use rand::distr::weighted::WeightedIndex;
use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

/// Largest per-entry relative error between `analytic` and `numeric`.
/// Entries where both are below `floor` in magnitude are compared against
/// `floor` instead of themselves.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

fn entry_mut(model: &mut MfModel, table: usize, idx: usize) -> &mut f64 {
    let t = if table == 0 { model.user_emb_mut() } else { model.item_emb_mut() };
    &mut t.as_slice_mut().unwrap()[idx]
}

/// Central differences of `f` with respect to every embedding entry, user
/// table first.
pub fn numeric_grad(model: &MfModel, h: f64, mut f: impl FnMut(&MfModel) -> f64) -> Vec<f64> {
    let mut probe = model.clone();
    let sizes = [model.user_emb().len(), model.item_emb().len()];
    let mut out = Vec::with_capacity(sizes[0] + sizes[1]);
    for (table, &len) in sizes.iter().enumerate() {
        for idx in 0..len {
            let orig = *entry_mut(&mut probe, table, idx);
            *entry_mut(&mut probe, table, idx) = orig + h;
            let plus = f(&probe);
            *entry_mut(&mut probe, table, idx) = orig - h;
            let minus = f(&probe);
            *entry_mut(&mut probe, table, idx) = orig;
            out.push((plus - minus) / (2.0 * h));
        }
    }
    out
}

/// Model with entries drawn from N(0, scale²).
pub fn gaussian_model(n_users: usize, n_items: usize, dim: usize, scale: f64, seed: u64) -> MfModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, scale).unwrap();
    let u = ndarray::Array2::from_shape_simple_fn((n_users, dim), || normal.sample(&mut rng));
    let v = ndarray::Array2::from_shape_simple_fn((n_items, dim), || normal.sample(&mut rng));
    MfModel::from_embeddings(u, v).unwrap()
}

/// Synthetic ratings in MovieLens `user::item::rating::timestamp` form.
///
/// Users and items carry low-rank latent factors plus a Zipf-like item
/// popularity bias, so the data has both learnable structure and the
/// popularity skew that makes plain MF concentrate its recommendations.
pub fn synthetic_ratings(n_users: usize, n_items: usize, min_len: usize, max_len: usize, seed: u64) -> String {
    const RANK: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let users: Vec<[f64; RANK]> = (0..n_users).map(|_| std::array::from_fn(|_| normal.sample(&mut rng))).collect();
    let items: Vec<[f64; RANK]> = (0..n_items).map(|_| std::array::from_fn(|_| normal.sample(&mut rng))).collect();
    let mut order: Vec<usize> = (0..n_items).collect();
    for i in (1..n_items).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut popularity = vec![0.0; n_items];
    for (rank, &item) in order.iter().enumerate() {
        popularity[item] = -1.1 * ((rank + 1) as f64).ln();
    }
    let len_dist = Uniform::new_inclusive(min_len, max_len).unwrap();

    let mut out = String::new();
    for (u, uf) in users.iter().enumerate() {
        let weights: Vec<f64> = items
            .iter()
            .zip(&popularity)
            .map(|(vf, pop)| {
                let affinity: f64 = uf.iter().zip(vf).map(|(a, b)| a * b).sum::<f64>() / (RANK as f64).sqrt();
                (1.5 * affinity + pop).exp()
            })
            .collect();
        let mut dist = WeightedIndex::new(&weights).unwrap();
        let len = len_dist.sample(&mut rng).min(n_items);
        for t in 0..len {
            let item = dist.sample(&mut rng);
            dist.update_weights(&[(item, &0.0)]).unwrap();
            let rating = rng.random_range(1..=5);
            let _ = writeln!(out, "{}::{}::{}::{}", u + 1, item + 1, rating, 978_300_000 + t * 60);
        }
    }
    out
}

pub fn parse_movielens(text: &str) -> InteractionLog {
    parse_reader(text.as_bytes(), &FormatSpec::movielens()).unwrap()
}

/// parse → implicit → remap → leave-one-out split.
pub fn split_from_text(text: &str, seed: u64) -> SplitSet {
    let log = to_implicit(parse_movielens(text));
    let (log, _) = remap_ids(&log);
    leave_one_out_split(&log, seed, ShortUserPolicy::Drop).unwrap()
}
