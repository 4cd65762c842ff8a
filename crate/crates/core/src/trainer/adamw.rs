//! Adam with decoupled weight decay.
//!
//! ```text
//! m ← β₁ m + (1 − β₁) g
//! v ← β₂ v + (1 − β₂) g²
//! m̂ = m / (1 − β₁ᵏ),  v̂ = v / (1 − β₂ᵏ)
//! θ ← θ − lr · (m̂ / (√v̂ + ε) + wd · θ)
//! ```

use crate::error::{Error, Result};
use crate::features::{StudentGrads, StudentParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

/// First and second moments per parameter tensor plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl OptimizerState {
    pub fn zeros_like(tensors: &[&[f64]]) -> Self {
        OptimizerState {
            m: tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
            v: tensors.iter().map(|t| vec![0.0; t.len()]).collect(),
            step: 0,
        }
    }

    pub fn for_student(params: &StudentParams) -> Self {
        let named = params.named_tensors();
        let tensors: Vec<&[f64]> = named.iter().map(|(_, t)| *t).collect();
        Self::zeros_like(&tensors)
    }
}

impl AdamW {
    /// Updates `params` in place from `grads`.
    pub fn step(&self, params: &mut [&mut [f64]], grads: &[&[f64]], state: &mut OptimizerState) -> Result<()> {
        let shapes_ok = params.len() == grads.len()
            && params.len() == state.m.len()
            && params.len() == state.v.len()
            && params.iter().zip(grads).zip(&state.m).zip(&state.v).all(|(((p, g), m), v)| {
                p.len() == g.len() && p.len() == m.len() && p.len() == v.len()
            });
        if !shapes_ok {
            return Err(Error::Dimension("optimizer tensors do not match parameters".into()));
        }
        state.step += 1;
        let k = state.step as i32;
        let c1 = 1.0 - self.beta1.powi(k);
        let c2 = 1.0 - self.beta2.powi(k);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.lr * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * p[i]);
            }
        }
        Ok(())
    }

    pub fn step_student(&self, params: &mut StudentParams, grads: &StudentGrads, state: &mut OptimizerState) -> Result<()> {
        let g = grads.tensors();
        self.step(&mut params.tensors_mut(), &g, state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opt(lr: f64, wd: f64) -> AdamW {
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: wd,
        }
    }

    #[test]
    fn zero_grad_zero_param_is_fixed_point() {
        let mut p = vec![0.0; 4];
        let g = vec![0.0; 4];
        let mut s = OptimizerState::zeros_like(&[&p]);
        for _ in 0..3 {
            opt(1e-2, 1e-4).step(&mut [&mut p], &[&g], &mut s).unwrap();
        }
        assert_eq!(p, vec![0.0; 4]);
        assert_eq!(s.m[0], vec![0.0; 4]);
        assert_eq!(s.v[0], vec![0.0; 4]);
        assert_eq!(s.step, 3);
    }

    #[test]
    fn first_step_is_bias_corrected() {
        let lr = 1e-3;
        let mut p = vec![0.0; 3];
        let g = vec![1.0; 3];
        let mut s = OptimizerState::zeros_like(&[&p]);
        opt(lr, 0.0).step(&mut [&mut p], &[&g], &mut s).unwrap();
        for &x in &p {
            assert_eq!(x, -lr * 1.0 / (1.0 + 1e-8));
        }
    }

    #[test]
    fn decoupled_decay_scales_parameters() {
        let (lr, wd) = (0.1, 0.01);
        let start = vec![2.0, -3.0, 0.5];
        let mut p = start.clone();
        let g = vec![0.0; 3];
        let mut s = OptimizerState::zeros_like(&[&p]);
        opt(lr, wd).step(&mut [&mut p], &[&g], &mut s).unwrap();
        for (a, b) in p.iter().zip(&start) {
            let want = b * (1.0 - lr * wd);
            assert!((a - want).abs() <= f64::EPSILON * want.abs(), "{a} vs {want}");
        }
    }

    #[test]
    fn zero_lr_is_identity() {
        let start = vec![0.3, -1.0];
        let mut p = start.clone();
        let mut s = OptimizerState::zeros_like(&[&p]);
        for _ in 0..5 {
            opt(0.0, 0.5).step(&mut [&mut p], &[&[4.0, -2.0][..]], &mut s).unwrap();
        }
        assert_eq!(p, start);
        assert!(s.v[0].iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![0.0; 2];
        let mut s = OptimizerState::zeros_like(&[&p]);
        assert!(opt(1.0, 0.0).step(&mut [&mut p], &[&[1.0][..]], &mut s).is_err());
    }
}
