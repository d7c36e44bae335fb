//! Adam optimizer over flat parameter arrays, with bias correction.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdamError {
    #[error("parameter/gradient shape mismatch at array {array}: {params} vs {grads}")]
    ShapeMismatch {
        array: usize,
        params: usize,
        grads: usize,
    },
    #[error("non-finite gradient entry at array {array}, index {index}")]
    NonFiniteGradient { array: usize, index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig<T> {
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> Default for AdamConfig<T> {
    fn default() -> Self {
        AdamConfig {
            beta1: T::from_f64_lossy(0.9),
            beta2: T::from_f64_lossy(0.999),
            epsilon: T::from_f64_lossy(1e-8),
        }
    }
}

/// First/second moment accumulators for a fixed list of parameter arrays.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    cfg: AdamConfig<T>,
    t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(shapes: &[usize], cfg: AdamConfig<T>) -> Self {
        AdamState {
            cfg,
            t: 0,
            m: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    pub fn for_params(params: &[&[T]], cfg: AdamConfig<T>) -> Self {
        let shapes: Vec<usize> = params.iter().map(|p| p.len()).collect();
        Self::new(&shapes, cfg)
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One Adam update: `p -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step(
        &mut self,
        params: &mut [&mut [T]],
        grads: &[&[T]],
        lr: T,
    ) -> Result<(), AdamError> {
        assert_eq!(self.m.len(), params.len(), "state built for another model");
        if params.len() != grads.len() {
            return Err(AdamError::ShapeMismatch {
                array: 0,
                params: params.len(),
                grads: grads.len(),
            });
        }
        for (array, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(AdamError::ShapeMismatch {
                    array,
                    params: p.len(),
                    grads: g.len(),
                });
            }
            if let Some(index) = g.iter().position(|v| !v.is_finite()) {
                return Err(AdamError::NonFiniteGradient { array, index });
            }
        }

        self.t += 1;
        let b1 = self.cfg.beta1;
        let b2 = self.cfg.beta2;
        let bias1 = T::one() - b1.powi(self.t as i32);
        let bias2 = T::one() - b2.powi(self.t as i32);
        for (array, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.m[array];
            let v = &mut self.v[array];
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (T::one() - b1) * gi;
                v[i] = b2 * v[i] + (T::one() - b2) * gi * gi;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + self.cfg.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_scalar(state: &mut AdamState<f64>, p: &mut f64, g: f64, lr: f64) {
        let mut ps = [*p];
        let mut views: Vec<&mut [f64]> = vec![&mut ps];
        state.step(&mut views, &[&[g]], lr).unwrap();
        *p = ps[0];
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // with bias correction, m_hat = g and v_hat = g^2 on step one,
        // so the update is lr * g / (|g| + eps)
        let mut state = AdamState::new(&[1], AdamConfig::default());
        let mut p = 0.5;
        step_scalar(&mut state, &mut p, 1.0, 0.01);
        assert!((p - (0.5 - 0.01 / (1.0 + 1e-8))).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut state = AdamState::new(&[3], AdamConfig::default());
        let mut p = [1.0f64, -2.0, 0.25];
        let before = p;
        let mut views: Vec<&mut [f64]> = vec![&mut p];
        state.step(&mut views, &[&[0.0, 0.0, 0.0]], 0.1).unwrap();
        assert_eq!(p, before);
    }

    /// Independent scalar re-implementation used as the oracle for the
    /// quadratic-descent check.
    fn reference_adam(x0: f64, lr: f64, steps: usize) -> Vec<f64> {
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        let (mut m, mut v, mut x) = (0.0, 0.0, x0);
        let mut xs = Vec::new();
        for t in 1..=steps {
            let g = 2.0 * x; // d/dx x^2
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1f64(t, b1));
            let vh = v / (1.0 - b1f64(t, b2));
            x -= lr * mh / (vh.sqrt() + eps);
            xs.push(x);
        }
        xs
    }

    fn b1f64(t: usize, b: f64) -> f64 {
        b.powi(t as i32)
    }

    #[test]
    fn ten_steps_on_quadratic_strictly_decrease() {
        let mut state = AdamState::new(&[1], AdamConfig::default());
        let mut x = 1.0f64;
        let reference = reference_adam(1.0, 0.1, 10);
        let mut prev = x.abs();
        for expected in reference {
            let g = 2.0 * x;
            step_scalar(&mut state, &mut x, g, 0.1);
            assert!((x - expected).abs() < 1e-12, "trajectory diverged");
            assert!(x.abs() < prev, "|x| should strictly decrease");
            prev = x.abs();
        }
    }

    #[test]
    fn gradient_scaling_preserves_first_update_signs() {
        for c in [0.5f64, 2.0, 17.0] {
            let g = [0.3f64, -1.2, 0.0, 4.5];
            let mut a = [1.0f64, 1.0, 1.0, 1.0];
            let mut b = a;
            let mut sa = AdamState::new(&[4], AdamConfig::default());
            let mut sb = AdamState::new(&[4], AdamConfig::default());
            let mut va: Vec<&mut [f64]> = vec![&mut a];
            sa.step(&mut va, &[&g], 0.05).unwrap();
            let scaled: Vec<f64> = g.iter().map(|x| x * c).collect();
            let mut vb: Vec<&mut [f64]> = vec![&mut b];
            sb.step(&mut vb, &[&scaled], 0.05).unwrap();
            for i in 0..4 {
                let da = a[i] - 1.0;
                let db = b[i] - 1.0;
                assert_eq!(da.signum(), db.signum());
            }
        }
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut state = AdamState::new(&[2], AdamConfig::default());
        let mut p = [0.0f64, 0.0];
        let mut views: Vec<&mut [f64]> = vec![&mut p];
        let err = state.step(&mut views, &[&[1.0, f64::NAN]], 0.1).unwrap_err();
        assert_eq!(err, AdamError::NonFiniteGradient { array: 0, index: 1 });
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut state = AdamState::new(&[2], AdamConfig::default());
        let mut p = [0.0f64, 0.0];
        let mut views: Vec<&mut [f64]> = vec![&mut p];
        let err = state.step(&mut views, &[&[1.0]], 0.1).unwrap_err();
        assert!(matches!(err, AdamError::ShapeMismatch { .. }));
    }
}
