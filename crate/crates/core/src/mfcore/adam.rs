use super::{MfModel, ModelGrad};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 coefficient; `weight_decay * param` is added to the gradient.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

/// Adam with bias correction and classic (coupled) L2 regularization.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    config: AdamConfig,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    steps: u64,
}

impl Adam {
    /// One moment buffer pair per parameter tensor of the given length.
    pub fn new(config: AdamConfig, sizes: &[usize]) -> Self {
        Adam {
            config,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            steps: 0,
        }
    }

    pub fn for_model(config: AdamConfig, model: &MfModel) -> Self {
        Self::new(config, &[model.user_emb().len(), model.item_emb().len()])
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (t, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.first[t].len() || g.len() != p.len() {
                return Err(Error::Shape(format!(
                    "tensor {t}: optimizer size {}, param size {}, grad size {}",
                    self.first[t].len(),
                    p.len(),
                    g.len()
                )));
            }
        }

        self.steps += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        let bias1 = 1.0 - beta1.powi(self.steps as i32);
        let bias2 = 1.0 - beta2.powi(self.steps as i32);

        for (t, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.first[t];
            let v = &mut self.second[t];
            for j in 0..p.len() {
                let grad = g[j] + weight_decay * p[j];
                m[j] = beta1 * m[j] + (1.0 - beta1) * grad;
                v[j] = beta2 * v[j] + (1.0 - beta2) * grad * grad;
                let m_hat = m[j] / bias1;
                let v_hat = v[j] / bias2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }

    pub fn step_model(&mut self, model: &mut MfModel, grad: &ModelGrad) -> Result<()> {
        let grads = [
            grad.user
                .as_slice()
                .ok_or_else(|| Error::Shape("user gradient not contiguous".into()))?,
            grad.item
                .as_slice()
                .ok_or_else(|| Error::Shape("item gradient not contiguous".into()))?,
        ];
        let mut params = model.param_slices_mut();
        self.step(&mut params, &grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_decay() -> AdamConfig {
        AdamConfig {
            weight_decay: 0.0,
            ..AdamConfig::default()
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut adam = Adam::new(no_decay(), &[3]);
        let mut p = vec![0.5, -1.0, 2.0];
        adam.step(&mut [&mut p], &[&[0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(p, vec![0.5, -1.0, 2.0]);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn first_step_closed_form() {
        // m = 0.1, v = 0.001; bias correction restores m_hat = v_hat = 1.
        let cfg = no_decay();
        let mut adam = Adam::new(cfg, &[1]);
        let mut p = vec![0.0];
        adam.step(&mut [&mut p], &[&[1.0]]).unwrap();
        let expected = -cfg.lr / (1.0 + cfg.eps);
        assert!((p[0] - expected).abs() < 1e-9, "{} vs {expected}", p[0]);
    }

    #[test]
    fn second_step_closed_form() {
        let cfg = no_decay();
        let mut adam = Adam::new(cfg, &[1]);
        let mut p = vec![0.0];
        adam.step(&mut [&mut p], &[&[1.0]]).unwrap();
        adam.step(&mut [&mut p], &[&[-2.0]]).unwrap();
        let m = 0.9 * 0.1 + 0.1 * -2.0;
        let v = 0.999 * 0.001 + 0.001 * 4.0;
        let m_hat = m / (1.0 - 0.81);
        let v_hat = v / (1.0 - 0.999f64.powi(2));
        let expected = -cfg.lr / (1.0 + cfg.eps) - cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        assert!((p[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn weight_decay_enters_gradient() {
        let cfg = AdamConfig::default();
        let mut adam = Adam::new(cfg, &[1]);
        let mut p = vec![3.0];
        adam.step(&mut [&mut p], &[&[0.0]]).unwrap();
        // effective gradient 3e-4 > 0, so the first step moves by about -lr
        assert!((p[0] - (3.0 - cfg.lr)).abs() < 1e-6);
    }

    #[test]
    fn shape_mismatch() {
        let mut adam = Adam::new(no_decay(), &[2]);
        let mut p = vec![0.0; 3];
        assert!(matches!(
            adam.step(&mut [&mut p], &[&[0.0; 3]]),
            Err(Error::Shape(_))
        ));
        let mut q = vec![0.0; 2];
        assert!(adam.step(&mut [&mut q], &[&[0.0; 1]]).is_err());
        assert_eq!(adam.steps(), 0);
    }

    #[test]
    fn identical_runs_match() {
        let run = || {
            let mut adam = Adam::new(AdamConfig::default(), &[2]);
            let mut p = vec![1.0, -1.0];
            for t in 0..50 {
                let g = [p[0] * 2.0 + t as f64 * 0.01, p[1] - 0.3];
                adam.step(&mut [&mut p], &[&g]).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }
}
