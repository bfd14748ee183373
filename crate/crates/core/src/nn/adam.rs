use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Per-step multiplicative learning-rate decay.
    pub decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr0: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            decay: 0.9999,
        }
    }
}

/// Adam with bias correction and learning rate `lr0 * decay^t`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Zeroed moments shaped like `shapes` (lengths of the parameter slices).
    pub fn new(config: AdamConfig, shapes: &[usize]) -> Self {
        AdamState {
            config,
            t: 0,
            m: shapes.iter().map(|&l| vec![0.0; l]).collect(),
            v: shapes.iter().map(|&l| vec![0.0; l]).collect(),
        }
    }

    /// Rate the next step will use.
    pub fn lr(&self) -> f64 {
        self.config.lr0 * self.config.decay.powi(self.t as i32)
    }

    pub fn step(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::dims(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (k, (p, g)) in params.iter().zip(&grads).enumerate() {
            if p.len() != self.m[k].len() || g.len() != self.m[k].len() {
                return Err(Error::dims(format!("tensor {k} changed size")));
            }
        }
        let AdamConfig {
            beta1, beta2, eps, ..
        } = self.config;
        let lr = self.lr();
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let cfg = AdamConfig::default();
        let mut params = vec![1.0, -2.0, 0.5];
        let grads = vec![0.3, -4.0, 1e-3];
        let mut adam = AdamState::new(cfg, &[3]);
        adam.step(vec![&mut params], vec![&grads]).unwrap();
        let start = [1.0, -2.0, 0.5];
        for i in 0..3 {
            let moved = params[i] - start[i];
            let expected = -cfg.lr0 * grads[i].signum();
            assert!(((moved - expected) / expected).abs() < 1e-3);
        }
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut params = vec![0.7, -0.1];
        let mut adam = AdamState::new(AdamConfig::default(), &[2]);
        for _ in 0..10 {
            adam.step(vec![&mut params], vec![&[0.0, 0.0]]).unwrap();
        }
        assert_eq!(params, vec![0.7, -0.1]);
        assert_eq!(adam.t, 10);
    }

    #[test]
    fn learning_rate_decays_per_step() {
        let cfg = AdamConfig {
            decay: 0.999,
            ..Default::default()
        };
        let mut adam = AdamState::new(cfg, &[1]);
        let mut p = vec![0.0];
        for _ in 0..100 {
            adam.step(vec![&mut p], vec![&[1.0]]).unwrap();
        }
        assert!((adam.lr() - cfg.lr0 * 0.999f64.powi(100)).abs() < 1e-18);
        assert!((adam.lr() / cfg.lr0 - 0.905).abs() < 1e-3);
    }

    #[test]
    fn rejects_shape_changes() {
        let mut adam = AdamState::new(AdamConfig::default(), &[2]);
        let mut p = vec![0.0; 3];
        assert!(adam.step(vec![&mut p], vec![&[0.0; 3]]).is_err());
    }
}
