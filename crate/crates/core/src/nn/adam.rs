use serde::{Deserialize, Serialize};

use super::layers::Param;
use crate::error::{Error, Result};

pub const DEFAULT_LR: f64 = 0.003;

/// Adam with bias-corrected moments. Moment buffers are created on the first
/// step and follow the order of the parameter list passed in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Default for Adam {
    fn default() -> Self {
        Adam::new(DEFAULT_LR)
    }
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut Param]) -> Result<()> {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len()
            || self.m.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len())
        {
            return Err(Error::Shape("optimizer state does not match parameters".into()));
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            for (((x, &g), mi), vi) in p.value.iter_mut().zip(&p.grad).zip(m).zip(v) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * g;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * g * g;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *x -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_about_lr() {
        let mut p = Param::new(vec![1.0, -2.0, 0.5]);
        p.grad = vec![0.3, -4.0, 1e-3];
        let mut adam = Adam::new(0.003);
        adam.step(&mut [&mut p]).unwrap();
        // m_hat = g and v_hat = g^2 after one step
        let want = |x0: f64, g: f64| x0 - 0.003 * g / (g.abs() + 1e-8);
        assert!((p.value[0] - want(1.0, 0.3)).abs() < 1e-15);
        assert!((p.value[1] - want(-2.0, -4.0)).abs() < 1e-15);
        assert!((p.value[2] - want(0.5, 1e-3)).abs() < 1e-15);
        assert!(((1.0 - p.value[0]) - 0.003).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = Param::new(vec![0.25, -0.5]);
        let mut adam = Adam::new(0.01);
        for _ in 0..100 {
            adam.step(&mut [&mut p]).unwrap();
        }
        assert_eq!(p.value, vec![0.25, -0.5]);
        assert_eq!(adam.t, 100);
    }

    #[test]
    fn shape_change_is_rejected() {
        let mut p = Param::new(vec![0.0; 3]);
        let mut adam = Adam::default();
        adam.step(&mut [&mut p]).unwrap();
        let mut q = Param::new(vec![0.0; 4]);
        assert!(adam.step(&mut [&mut q]).is_err());
    }
}
