use alloc::{format, vec::Vec};

use serde::{Deserialize, Serialize};

use super::{check_finite, NumericsError, Result, Tensor};

/// Adam hyperparameters other than the learning rate, which comes from the
/// schedule at every step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay: `p <- p - lr * weight_decay * p`, outside the moments.
    pub weight_decay: f64,
}

impl AdamConfig {
    pub const fn new(beta1: f64, beta2: f64, weight_decay: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps: 1e-8,
            weight_decay,
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self::new(0.9, 0.95, 0.0)
    }
}

/// First and second moment buffers plus the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl OptimizerState {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let m: Vec<Tensor> = params
            .into_iter()
            .map(|p| Tensor::zeros(p.shape()))
            .collect();
        let v = m.clone();
        Self { step: 0, m, v }
    }

    fn check_against(&self, params: &[&mut Tensor], grads: &[&Tensor]) -> Result<()> {
        if params.len() != grads.len()
            || params.len() != self.m.len()
            || self.v.len() != self.m.len()
        {
            return Err(NumericsError::LengthMismatch {
                expected: params.len(),
                found: grads.len().min(self.m.len()).min(self.v.len()),
            });
        }
        for (i, p) in params.iter().enumerate() {
            if !p.same_shape(grads[i]) || !p.same_shape(&self.m[i]) || !p.same_shape(&self.v[i]) {
                return Err(NumericsError::InvalidArgument(format!(
                    "shape mismatch at parameter {i}: param {:?}, grad {:?}",
                    p.shape(),
                    grads[i].shape()
                )));
            }
        }
        Ok(())
    }
}

/// One bias-corrected Adam step with decoupled weight decay, in place.
///
/// ```text
/// m <- b1 m + (1 - b1) g            v <- b2 v + (1 - b2) g^2
/// p <- p - lr * wd * p - lr * m_hat / (sqrt(v_hat) + eps)
/// ```
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[&Tensor],
    state: &mut OptimizerState,
    lr: f64,
    config: &AdamConfig,
) -> Result<()> {
    if !(lr >= 0.0) || !lr.is_finite() {
        return Err(NumericsError::InvalidArgument(format!(
            "learning rate must be >= 0, got {lr}"
        )));
    }
    state.check_against(params, grads)?;
    for g in grads {
        check_finite(g.data())?;
    }
    state.step += 1;
    let t = state.step as f64;
    let bias1 = 1.0 - libm::pow(config.beta1, t);
    let bias2 = 1.0 - libm::pow(config.beta2, t);
    let decay = lr * config.weight_decay;
    for (i, p) in params.iter_mut().enumerate() {
        let g = grads[i].data();
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        let p = p.data_mut();
        for j in 0..p.len() {
            m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
            v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
            let m_hat = m[j] / bias1;
            let v_hat = v[j] / bias2;
            p[j] -= decay * p[j] + lr * m_hat / (libm::sqrt(v_hat) + config.eps);
        }
    }
    Ok(())
}

pub fn global_norm(grads: &[&mut Tensor]) -> f64 {
    libm::sqrt(grads.iter().map(|g| g.sum_of_squares()).sum())
}

/// Rescales all gradients so that their joint L2 norm is at most `max_norm`.
/// Returns the applied scale (1 when under the threshold).
pub fn clip_grad_norm(grads: &mut [&mut Tensor], max_norm: f64) -> Result<f64> {
    if !(max_norm > 0.0) || !max_norm.is_finite() {
        return Err(NumericsError::InvalidArgument(format!(
            "max_norm must be > 0, got {max_norm}"
        )));
    }
    for g in grads.iter() {
        check_finite(g.data())?;
    }
    let norm = global_norm(grads);
    if norm <= max_norm {
        return Ok(1.0);
    }
    let scale = max_norm / norm;
    for g in grads.iter_mut() {
        g.data_mut().iter_mut().for_each(|x| *x *= scale);
    }
    Ok(scale)
}

#[cfg(test)]
mod tests {
    use alloc::vec;

    use super::*;

    fn scalar(x: f64) -> Tensor {
        Tensor::from_vec(&[1], vec![x]).unwrap()
    }

    #[test]
    fn zero_gradient_without_decay_leaves_params() {
        let mut p = Tensor::from_vec(&[3], vec![1.0, -2.0, 0.5]).unwrap();
        let g = Tensor::zeros(&[3]);
        let mut st = OptimizerState::new([&p]);
        adam_step(&mut [&mut p], &[&g], &mut st, 0.1, &AdamConfig::default()).unwrap();
        assert_eq!(p.data(), &[1.0, -2.0, 0.5]);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = scalar(0.0);
        let g = scalar(1.0);
        let mut st = OptimizerState::new([&p]);
        adam_step(
            &mut [&mut p],
            &[&g],
            &mut st,
            1.0,
            &AdamConfig::new(0.9, 0.95, 0.0),
        )
        .unwrap();
        // m_hat = v_hat = 1, so the update is 1 / (1 + eps).
        assert!((p.data()[0] + 1.0).abs() < 1e-7);
        assert!((st.m[0].data()[0] - 0.1).abs() < 1e-15);
        assert!((st.v[0].data()[0] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn decoupled_decay() {
        let mut p = scalar(1.0);
        let g = scalar(0.0);
        let mut st = OptimizerState::new([&p]);
        adam_step(
            &mut [&mut p],
            &[&g],
            &mut st,
            1.0,
            &AdamConfig::new(0.9, 0.95, 0.1),
        )
        .unwrap();
        assert!((p.data()[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let mut p = Tensor::zeros(&[2]);
        let g = Tensor::zeros(&[3]);
        let mut st = OptimizerState::new([&p]);
        assert!(adam_step(&mut [&mut p], &[&g], &mut st, 0.1, &AdamConfig::default()).is_err());
        assert_eq!(st.step, 0);
        let g2 = Tensor::zeros(&[2]);
        assert!(adam_step(
            &mut [&mut p],
            &[&g2, &g2],
            &mut st,
            0.1,
            &AdamConfig::default()
        )
        .is_err());
        assert!(adam_step(&mut [&mut p], &[&g2], &mut st, -1.0, &AdamConfig::default()).is_err());
    }

    #[test]
    fn clip_examples() {
        let mut a = Tensor::from_vec(&[2], vec![0.3, 0.4]).unwrap();
        assert_eq!(clip_grad_norm(&mut [&mut a], 1.0).unwrap(), 1.0);
        assert_eq!(a.data(), &[0.3, 0.4]);

        let mut b = Tensor::from_vec(&[2], vec![3.0, 4.0]).unwrap();
        let scale = clip_grad_norm(&mut [&mut b], 1.0).unwrap();
        assert!((scale - 0.2).abs() < 1e-15);
        assert!((b.data()[0] - 0.6).abs() < 1e-15 && (b.data()[1] - 0.8).abs() < 1e-15);

        let mut z = Tensor::zeros(&[4]);
        assert_eq!(clip_grad_norm(&mut [&mut z], 1.0).unwrap(), 1.0);
        assert!(z.data().iter().all(|&x| x == 0.0));

        assert!(clip_grad_norm(&mut [&mut z], 0.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn clipping_is_idempotent_and_hits_max_norm(
            xs in proptest::collection::vec(-10.0f64..10.0, 1..20),
            ys in proptest::collection::vec(-10.0f64..10.0, 1..20),
            max_norm in 0.01f64..5.0,
        ) {
            let mut a = Tensor::from_vec(&[xs.len()], xs).unwrap();
            let mut b = Tensor::from_vec(&[ys.len()], ys).unwrap();
            let before = libm::sqrt(a.sum_of_squares() + b.sum_of_squares());
            clip_grad_norm(&mut [&mut a, &mut b], max_norm).unwrap();
            let once = (a.clone(), b.clone());
            let after = libm::sqrt(a.sum_of_squares() + b.sum_of_squares());
            if before > max_norm {
                proptest::prop_assert!((after - max_norm).abs() < 1e-9);
            }
            clip_grad_norm(&mut [&mut a, &mut b], max_norm).unwrap();
            for (x, y) in a.data().iter().chain(b.data()).zip(once.0.data().iter().chain(once.1.data())) {
                proptest::prop_assert!((x - y).abs() <= 1e-15 * y.abs().max(1e-300));
            }
        }

        #[test]
        fn zero_lr_without_decay_is_identity(
            ps in proptest::collection::vec(-5.0f64..5.0, 1..10),
            gs in proptest::collection::vec(-5.0f64..5.0, 1..10),
        ) {
            let n = ps.len().min(gs.len());
            let mut p = Tensor::from_vec(&[n], ps[..n].to_vec()).unwrap();
            let g = Tensor::from_vec(&[n], gs[..n].to_vec()).unwrap();
            let orig = p.clone();
            let mut st = OptimizerState::new([&p]);
            for _ in 0..3 {
                adam_step(&mut [&mut p], &[&g], &mut st, 0.0, &AdamConfig::default()).unwrap();
            }
            proptest::prop_assert_eq!(p, orig);
            proptest::prop_assert!(st.v.iter().all(|v| v.data().iter().all(|&x| x >= 0.0)));
        }
    }
}
