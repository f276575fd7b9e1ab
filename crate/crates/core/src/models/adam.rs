//! Bias-corrected Adam over a list of flat parameter arrays.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub step_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { step_rate: 0.01, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moment buffers plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(sizes: &[usize]) -> Self {
        AdamState {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    pub fn step(&mut self, cfg: &AdamConfig, params: &mut [&mut Vec<f64>], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam holds {} arrays, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powf(self.t as f64);
        let c2 = 1.0 - cfg.beta2.powf(self.t as f64);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            if p.len() != g.len() || p.len() != m.len() {
                return Err(Error::Shape("adam parameter and gradient lengths differ".into()));
            }
            for k in 0..p.len() {
                m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
                v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                p[k] -= cfg.step_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_step_rate_against_the_gradient() {
        let cfg = AdamConfig { step_rate: 0.1, ..Default::default() };
        for g in [3.7, -0.002, 1e3] {
            let mut state = AdamState::new(&[1]);
            let mut p = vec![0.5];
            state.step(&cfg, &mut [&mut p], &[&[g]]).unwrap();
            let expect = 0.5 - 0.1 * g / (g.abs() + 1e-8);
            assert!((p[0] - expect).abs() < 1e-15);
            assert!((p[0] - (0.5 - 0.1 * g.signum())).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_gradient_leaves_weights() {
        let mut state = AdamState::new(&[3]);
        let mut p = vec![1.0, -2.0, 0.25];
        for _ in 0..10 {
            state.step(&AdamConfig::default(), &mut [&mut p], &[&[0.0; 3]]).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0, 0.25]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut state = AdamState::new(&[2]);
        let mut p = vec![0.0; 3];
        assert!(state.step(&AdamConfig::default(), &mut [&mut p], &[&[0.0; 3]]).is_err());
    }
}
