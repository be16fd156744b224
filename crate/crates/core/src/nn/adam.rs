use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adam with L2 weight decay folded into the gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    /// Fresh state for parameter tensors of the given lengths.
    pub fn new(shapes: &[usize], lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            first_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_params(params: &[&[f64]], lr: f64, weight_decay: f64) -> Self {
        let shapes: Vec<usize> = params.iter().map(|p| p.len()).collect();
        Self::new(&shapes, lr, weight_decay)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update, `g ← g + λθ` applied before the moments.
pub fn adam_step(params: &mut [&mut [f64]], grads: &[Vec<f64>], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(Error::input("parameter, gradient and optimizer tensor counts differ"));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.first_moment) {
        if p.len() != g.len() || p.len() != m.len() {
            return Err(Error::input("parameter and gradient lengths differ"));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let (b1, b2, lr, eps, wd) = (state.beta1, state.beta2, state.lr, state.eps, state.weight_decay);
    for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.first_moment[k];
        let v = &mut state.second_moment[k];
        for i in 0..p.len() {
            let gi = g[i] + wd * p[i];
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            p[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut w = vec![0.5, -2.0];
        let mut st = AdamState::new(&[2], 0.1, 0.0);
        adam_step(&mut [&mut w[..]], &[vec![0.0, 0.0]], &mut st).unwrap();
        assert_eq!(w, vec![0.5, -2.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut w = [1.0];
        let mut st = AdamState::new(&[1], 0.1, 0.0);
        adam_step(&mut [&mut w[..]], &[vec![1.0]], &mut st).unwrap();
        // m̂ = 1, v̂ = 1 so the step is lr / (1 + eps).
        assert!((w[0] - (1.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn constant_gradient_update_tends_to_lr() {
        let mut w = [0.0];
        let mut st = AdamState::new(&[1], 0.01, 0.0);
        let mut last = 0.0;
        for _ in 0..2000 {
            let before = w[0];
            adam_step(&mut [&mut w[..]], &[vec![3.0]], &mut st).unwrap();
            last = before - w[0];
        }
        assert!((last - 0.01).abs() < 1e-6);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let mut w = [0.0; 2];
        let mut st = AdamState::new(&[2], 0.01, 0.0);
        assert!(adam_step(&mut [&mut w[..]], &[vec![0.0]], &mut st).is_err());
    }
}
