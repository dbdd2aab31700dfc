mod common;

use common::{gaussian_model, max_rel_error, numeric_grad};
use divmf::divreg::{div_loss_and_grad, div_loss_with_mask, sample_minibatch, MiniBatch, UnmaskScheme};
use divmf::mfcore::{bpr_loss_and_grad, BprTriple, ModelGrad};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-4;
const FLOOR: f64 = 1e-6;

fn flat(grad: &ModelGrad) -> Vec<f64> {
    grad.user.iter().chain(grad.item.iter()).copied().collect()
}

fn random_triples(n_users: u32, n_items: u32, n: usize, seed: u64) -> Vec<BprTriple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let pos = rng.random_range(0..n_items);
            let mut neg = rng.random_range(0..n_items);
            while neg == pos {
                neg = rng.random_range(0..n_items);
            }
            BprTriple { user: rng.random_range(0..n_users), pos, neg }
        })
        .collect()
}

#[test]
fn bpr_gradient_matches_central_differences() {
    for seed in 0..5 {
        let model = gaussian_model(8, 12, 4, 0.5, seed);
        let triples = random_triples(8, 12, 16, seed + 100);
        let (_, grad) = bpr_loss_and_grad(&model, &triples).unwrap();
        let numeric = numeric_grad(&model, H, |m| bpr_loss_and_grad(m, &triples).unwrap().0);
        let err = max_rel_error(&flat(&grad), &numeric, FLOOR);
        assert!(err <= 1e-5, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn bpr_gradient_with_repeated_triples() {
    let model = gaussian_model(3, 4, 2, 1.0, 9);
    let t = BprTriple { user: 1, pos: 0, neg: 3 };
    let triples = vec![t, t, t, BprTriple { user: 1, pos: 3, neg: 0 }];
    let (_, grad) = bpr_loss_and_grad(&model, &triples).unwrap();
    let numeric = numeric_grad(&model, H, |m| bpr_loss_and_grad(m, &triples).unwrap().0);
    assert!(max_rel_error(&flat(&grad), &numeric, FLOOR) <= 1e-5);
}

fn check_div_fd(scheme: UnmaskScheme, n_unmask: usize, batch: &MiniBatch, seed: u64) -> f64 {
    let model = gaussian_model(8, 12, 4, 0.7, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = div_loss_and_grad(&model, batch, scheme, n_unmask, &mut rng).unwrap();
    let numeric = numeric_grad(&model, H, |m| div_loss_with_mask(m, batch, &step.mask).unwrap().0);
    max_rel_error(&flat(&step.grad), &numeric, FLOOR)
}

#[test]
fn diversity_gradient_full_batch_every_scheme() {
    let batch = MiniBatch::full(8, 12, 3).unwrap();
    for scheme in [UnmaskScheme::None, UnmaskScheme::TopPlus, UnmaskScheme::Random] {
        for seed in 0..3 {
            let err = check_div_fd(scheme, 2, &batch, seed);
            assert!(err <= 1e-4, "{scheme} seed {seed}: relative error {err:e}");
        }
    }
}

#[test]
fn diversity_gradient_on_sampled_submatrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seed in 0..3 {
        let batch = sample_minibatch(8, 12, 5, 7, 3, &mut rng).unwrap();
        let err = check_div_fd(UnmaskScheme::TopPlus, 2, &batch, seed);
        assert!(err <= 1e-4, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn diversity_gradient_is_zero_outside_the_batch() {
    let model = gaussian_model(8, 12, 4, 0.7, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let batch = sample_minibatch(8, 12, 3, 5, 3, &mut rng).unwrap();
    let step = div_loss_and_grad(&model, &batch, UnmaskScheme::TopPlus, 1, &mut rng).unwrap();
    for u in (0..8).filter(|u| !batch.users.contains(u)) {
        assert!(step.grad.user.row(u).iter().all(|&g| g == 0.0));
    }
    for i in (0..12).filter(|i| !batch.items.contains(i)) {
        assert!(step.grad.item.row(i).iter().all(|&g| g == 0.0));
    }
}
