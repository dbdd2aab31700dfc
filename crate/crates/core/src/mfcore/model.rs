use ndarray::{Array2, ArrayView1, Axis};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Matrix-factorization model: `score(u, i) = <user_emb[u], item_emb[i]>`.
#[derive(Clone, Debug, PartialEq)]
pub struct MfModel {
    user_emb: Array2<f64>,
    item_emb: Array2<f64>,
}

/// Gradient buffers with the same shapes as an [`MfModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGrad {
    pub user: Array2<f64>,
    pub item: Array2<f64>,
}

impl ModelGrad {
    pub fn zeros_like(model: &MfModel) -> Self {
        ModelGrad {
            user: Array2::zeros(model.user_emb.raw_dim()),
            item: Array2::zeros(model.item_emb.raw_dim()),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.user
            .iter()
            .chain(self.item.iter())
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

impl MfModel {
    pub fn from_embeddings(user_emb: Array2<f64>, item_emb: Array2<f64>) -> Result<Self> {
        if user_emb.ncols() != item_emb.ncols() {
            return Err(Error::Shape(format!(
                "user embedding dim {} != item embedding dim {}",
                user_emb.ncols(),
                item_emb.ncols()
            )));
        }
        if user_emb.iter().chain(item_emb.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding entry".into()));
        }
        // Standard layout is relied upon by the optimizer's flat views.
        Ok(MfModel {
            user_emb: user_emb.as_standard_layout().into_owned(),
            item_emb: item_emb.as_standard_layout().into_owned(),
        })
    }

    /// Zero-mean uniform initialization with standard deviation `0.1 / sqrt(dim)`.
    pub fn init(n_users: usize, n_items: usize, dim: usize, seed: u64) -> Result<Self> {
        if n_users == 0 || n_items == 0 || dim == 0 {
            return Err(Error::InvalidArgument(format!(
                "model dimensions must be positive (users={n_users}, items={n_items}, dim={dim})"
            )));
        }
        let std = 0.1 / (dim as f64).sqrt();
        let half_width = std * 3f64.sqrt();
        let dist = Uniform::new_inclusive(-half_width, half_width)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let user_emb = Array2::from_shape_simple_fn((n_users, dim), || dist.sample(&mut rng));
        let item_emb = Array2::from_shape_simple_fn((n_items, dim), || dist.sample(&mut rng));
        Ok(MfModel { user_emb, item_emb })
    }

    pub fn n_users(&self) -> usize {
        self.user_emb.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.item_emb.nrows()
    }

    pub fn dim(&self) -> usize {
        self.user_emb.ncols()
    }

    pub fn user_emb(&self) -> &Array2<f64> {
        &self.user_emb
    }

    pub fn item_emb(&self) -> &Array2<f64> {
        &self.item_emb
    }

    pub fn user_emb_mut(&mut self) -> &mut Array2<f64> {
        &mut self.user_emb
    }

    pub fn item_emb_mut(&mut self) -> &mut Array2<f64> {
        &mut self.item_emb
    }

    pub(crate) fn param_slices_mut(&mut self) -> [&mut [f64]; 2] {
        [
            self.user_emb.as_slice_mut().expect("standard layout"),
            self.item_emb.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn user_row(&self, user: usize) -> ArrayView1<'_, f64> {
        self.user_emb.row(user)
    }

    pub fn item_row(&self, item: usize) -> ArrayView1<'_, f64> {
        self.item_emb.row(item)
    }

    pub fn score(&self, user: usize, item: usize) -> f64 {
        self.user_emb.row(user).dot(&self.item_emb.row(item))
    }

    pub fn is_finite(&self) -> bool {
        self.user_emb
            .iter()
            .chain(self.item_emb.iter())
            .all(|v| v.is_finite())
    }

    /// Checks the model against a dataset's catalog sizes.
    pub fn check_shape(&self, n_users: usize, n_items: usize) -> Result<()> {
        if self.n_users() != n_users || self.n_items() != n_items {
            return Err(Error::Shape(format!(
                "model has {} users x {} items, dataset has {} x {}",
                self.n_users(),
                self.n_items(),
                n_users,
                n_items
            )));
        }
        Ok(())
    }

    /// Raw scores of `users` against `items`; entry `(a, b)` is
    /// `score(users[a], items[b])`.
    pub fn score_submatrix(&self, users: &[usize], items: &[usize]) -> Result<Array2<f64>> {
        check_indices(users, self.n_users(), "users")?;
        check_indices(items, self.n_items(), "items")?;
        let u = self.user_emb.select(Axis(0), users);
        let v = self.item_emb.select(Axis(0), items);
        Ok(u.dot(&v.t()))
    }

    /// Scores of `users` against the whole catalog.
    pub fn score_users(&self, users: &[usize]) -> Result<Array2<f64>> {
        check_indices(users, self.n_users(), "users")?;
        let u = self.user_emb.select(Axis(0), users);
        Ok(u.dot(&self.item_emb.t()))
    }
}

fn check_indices(indices: &[usize], len: usize, what: &'static str) -> Result<()> {
    match indices.iter().find(|&&i| i >= len) {
        Some(&index) => Err(Error::OutOfRange { what, index, len }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn init_is_deterministic_and_shaped() {
        let a = MfModel::init(2, 3, 4, 9).unwrap();
        let b = MfModel::init(2, 3, 4, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.user_emb().dim(), (2, 4));
        assert_eq!(a.item_emb().dim(), (3, 4));
        assert_ne!(a, MfModel::init(2, 3, 4, 10).unwrap());
        assert!(MfModel::init(0, 3, 4, 1).is_err());
        assert!(MfModel::init(2, 3, 0, 1).is_err());
    }

    #[test]
    fn init_scale() {
        let d = 16;
        let m = MfModel::init(625, 1, d, 3).unwrap();
        let vals: Vec<f64> = m.user_emb().iter().copied().collect();
        assert_eq!(vals.len(), 10_000);
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let target = 0.1 / (d as f64).sqrt();
        assert!(std > target / 3.0 && std < target * 3.0, "std {std}");
        assert!(mean.abs() < 0.05 * target * 3.0);
    }

    #[test]
    fn dot_product_scores() {
        let m = MfModel::from_embeddings(array![[1.0, 0.0], [0.0, 0.0]], array![[2.0, 3.0]]).unwrap();
        let s = m.score_submatrix(&[0, 1], &[0]).unwrap();
        assert_eq!(s, array![[2.0], [0.0]]);
    }

    #[test]
    fn submatrix_matches_loop_oracle() {
        let m = MfModel::init(9, 11, 6, 5).unwrap();
        let users = [3, 0, 8, 5, 1];
        let items = [10, 2, 4, 4, 7, 0, 9];
        let block = m.score_submatrix(&users, &items).unwrap();
        for (a, &u) in users.iter().enumerate() {
            for (b, &i) in items.iter().enumerate() {
                let mut expected = 0.0;
                for k in 0..m.dim() {
                    expected += m.user_emb()[[u, k]] * m.item_emb()[[i, k]];
                }
                assert!((block[[a, b]] - expected).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn out_of_range_indices() {
        let m = MfModel::init(2, 2, 2, 0).unwrap();
        assert!(matches!(
            m.score_submatrix(&[2], &[0]),
            Err(Error::OutOfRange { what: "users", index: 2, len: 2 })
        ));
        assert!(m.score_submatrix(&[0], &[5]).is_err());
    }

    #[test]
    fn scores_are_bilinear_in_user_embedding() {
        let mut m = MfModel::init(3, 7, 5, 1).unwrap();
        let before = m.score_users(&[1]).unwrap();
        // power-of-two scaling is exact in binary floating point
        m.user_emb_mut().row_mut(1).mapv_inplace(|v| v * 4.0);
        let after = m.score_users(&[1]).unwrap();
        assert_eq!(before.mapv(|v| v * 4.0), after);
    }

    #[test]
    fn rejects_mismatched_or_non_finite_embeddings() {
        assert!(MfModel::from_embeddings(Array2::zeros((2, 3)), Array2::zeros((2, 4))).is_err());
        assert!(MfModel::from_embeddings(array![[f64::NAN]], array![[1.0]]).is_err());
    }
}
