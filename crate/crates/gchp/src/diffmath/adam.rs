//! Adam optimizer with bias correction.

use super::tensor::Tensor;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Real> Default for AdamConfig<T> {
    fn default() -> Self {
        AdamConfig {
            learning_rate: T::of(1e-3),
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            epsilon: T::of(1e-8),
        }
    }
}

impl<T: Real> AdamConfig<T> {
    pub fn with_learning_rate(learning_rate: T) -> Self {
        AdamConfig {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Optimizer state: first/second moment estimates per parameter tensor.
pub struct Adam<T> {
    config: AdamConfig<T>,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig<T>, param_sizes: &[usize]) -> Self {
        Adam {
            config,
            step: 0,
            m: param_sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: param_sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    /// One update: `p -= lr * m̂ / (sqrt(v̂) + eps)`.
    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>]) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        self.step += 1;
        let t = self.step as i32;
        let c = &self.config;
        let bc1 = T::one() - c.beta1.powi(t);
        let bc2 = T::one() - c.beta2.powi(t);
        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            assert_eq!(param.len(), grad.len(), "parameter/gradient size mismatch");
            for ((p, &g), (mi, vi)) in param
                .values_mut()
                .iter_mut()
                .zip(grad.values())
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                *mi = c.beta1 * *mi + (T::one() - c.beta1) * g;
                *vi = c.beta2 * *vi + (T::one() - c.beta2) * g * g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *p = *p - c.learning_rate * m_hat / (v_hat.sqrt() + c.epsilon);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_fresh_params_unchanged() {
        let mut params = vec![Tensor::from_rows(&[vec![1.0, -2.0]])];
        let grads = vec![Tensor::<f64>::zeros(1, 2)];
        let mut adam = Adam::new(AdamConfig::default(), &[2]);
        adam.step(&mut params, &grads);
        assert_eq!(params[0].values(), &[1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        // With fresh state and gradient g, bias correction gives
        // m̂ = g and v̂ = g², so the step is lr·g/(|g|+eps) ≈ lr·sign(g).
        let lr = 1e-3;
        let mut params = vec![Tensor::from_rows(&[vec![0.5, 0.5]])];
        let grads = vec![Tensor::from_rows(&[vec![2.0, -0.3]])];
        let mut adam = Adam::new(AdamConfig::with_learning_rate(lr), &[2]);
        adam.step(&mut params, &grads);
        assert!((params[0].values()[0] - (0.5 - lr)).abs() < lr * 1e-6);
        assert!((params[0].values()[1] - (0.5 + lr)).abs() < lr * 1e-6);
    }

    #[test]
    fn trajectories_are_deterministic() {
        let run = || {
            let mut params = vec![Tensor::from_rows(&[vec![1.0, 2.0, 3.0]])];
            let mut adam = Adam::new(AdamConfig::default(), &[3]);
            for step in 0..50 {
                let g = 0.1 * (step as f64 + 1.0).sin();
                let grads = vec![Tensor::from_rows(&[vec![g, -g, 2.0 * g]])];
                adam.step(&mut params, &grads);
            }
            params[0].values().to_vec()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
