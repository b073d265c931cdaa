use super::{Gradients, ModelParams};
use crate::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Adam moments for every trainable tensor, in [`Gradients::tensors`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ModelParams, learning_rate: f64) -> Self {
        let shapes: Vec<usize> = params.zero_gradients().tensors().iter().map(|t| t.len()).collect();
        AdamState {
            learning_rate,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            step: 0,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// One bias-corrected Adam update of `params`.
    pub fn step(&mut self, params: &mut ModelParams, grads: &Gradients) -> Result<()> {
        let grads = grads.tensors();
        let mut targets = params.trainable_mut();
        if grads.len() != targets.len()
            || grads.iter().zip(&targets).any(|(g, p)| g.len() != p.len())
            || grads.iter().zip(&self.first).any(|(g, m)| g.len() != m.len())
        {
            return Err(Error::Shape("gradients do not match parameters".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2_sqrt = (1.0 - self.beta2.powi(t)).sqrt();
        let step_size = self.learning_rate / bias1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (((param, grad), m), v) in targets
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                param[i] -= step_size * m[i] / (v[i].sqrt() / bias2_sqrt + eps);
            }
        }
        Ok(())
    }
}

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm {
        let scale = max_norm / norm;
        for t in grads.tensors_mut() {
            t.iter_mut().for_each(|g| *g *= scale);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny() -> ModelParams {
        ModelParams::init_with_hidden(1, &[1], 0).unwrap()
    }

    #[test]
    fn zero_gradients_leave_params_unchanged() {
        let mut p = tiny();
        let before = p.clone();
        let mut adam = AdamState::new(&p, 1e-3);
        let g = p.zero_gradients();
        for _ in 0..10 {
            adam.step(&mut p, &g).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(adam.step, 10);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = tiny();
        let before = p.output.bias[0];
        let mut adam = AdamState::new(&p, 1e-3);
        let mut g = p.zero_gradients();
        g.output.bias[0] = 1.0;
        adam.step(&mut p, &g).unwrap();
        let delta = p.output.bias[0] - before;
        assert!((delta + 1e-3 / (1.0 + 1e-8)).abs() < 1e-15, "{delta}");
    }

    #[test]
    fn clip_examples() {
        let p = tiny();
        let mut g = p.zero_gradients();
        g.output.bias[0] = 3.0;
        g.output.weight[[0, 0]] = 4.0;
        let before = g.clone();
        assert_eq!(clip_global_norm(&mut g, 10.0), 5.0);
        assert_eq!(g, before);

        g.output.bias[0] = 12.0;
        g.output.weight[[0, 0]] = 16.0;
        assert_eq!(clip_global_norm(&mut g, 10.0), 20.0);
        assert_eq!(g.output.bias[0], 6.0);
        assert_eq!(g.output.weight[[0, 0]], 8.0);
    }

    proptest! {
        #[test]
        fn clipped_norm_never_exceeds_limit(
            values in proptest::collection::vec(-1e3f64..1e3, 10),
            max_norm in 1e-3f64..100.0,
        ) {
            let p = ModelParams::init_with_hidden(1, &[2], 0).unwrap();
            let mut g = p.zero_gradients();
            let flat: Vec<&mut [f64]> = g.tensors_mut();
            let mut it = values.iter();
            for t in flat {
                for x in t.iter_mut() {
                    *x = *it.next().unwrap_or(&0.0);
                }
            }
            clip_global_norm(&mut g, max_norm);
            prop_assert!(g.global_norm() <= max_norm + 1e-9);
        }
    }
}
