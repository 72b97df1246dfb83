//! Bias-corrected Adam on flat parameter vectors.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> AdamState {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam update in place: params -= lr * m_hat / (sqrt(v_hat) + eps).
pub fn adam_step(
    state: &mut AdamState,
    params: &mut [f64],
    grads: &[f64],
    lr: f64,
) -> Result<()> {
    if params.len() != state.m.len() || grads.len() != state.m.len() {
        return Err(Error::DimensionMismatch {
            expected: state.m.len(),
            got: params.len().max(grads.len()),
        });
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            context: "adam gradient".into(),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_signed_unit_times_lr() {
        // Bias correction makes m_hat/sqrt(v_hat) = g/|g| on step one.
        for g in [3.7, -0.02, 1e-6] {
            let mut st = AdamState::new(1);
            let mut p = vec![1.0];
            adam_step(&mut st, &mut p, &[g], 0.1).unwrap();
            let expected = 1.0 - 0.1 * g.signum() * (g.abs() / (g.abs() + 1e-8));
            assert!((p[0] - expected).abs() < 1e-12, "g={g}: {}", p[0]);
        }
    }

    #[test]
    fn zero_gradient_leaves_params_but_decays_moments() {
        let mut st = AdamState::new(2);
        st.m = vec![1.0, -2.0];
        st.v = vec![0.5, 0.5];
        let mut p = vec![3.0, 4.0];
        let before_m = st.m.clone();
        // Nonzero moments with zero grad still move params slightly, so
        // check the pure-zero state first.
        let mut st0 = AdamState::new(2);
        let mut p0 = vec![3.0, 4.0];
        adam_step(&mut st0, &mut p0, &[0.0, 0.0], 0.1).unwrap();
        assert_eq!(p0, vec![3.0, 4.0]);
        adam_step(&mut st, &mut p, &[0.0, 0.0], 0.1).unwrap();
        assert!(st.m[0].abs() < before_m[0].abs());
    }

    #[test]
    fn quadratic_converges() {
        // Minimize theta^2/2 from theta=1.
        let mut st = AdamState::new(1);
        let mut p = vec![1.0];
        for _ in 0..200 {
            let g = p[0];
            adam_step(&mut st, &mut p, &[g], 0.1).unwrap();
        }
        assert!(p[0].abs() <= 0.05, "theta = {}", p[0]);
    }

    #[test]
    fn rejects_non_finite_gradient() {
        let mut st = AdamState::new(1);
        let mut p = vec![0.0];
        assert!(adam_step(&mut st, &mut p, &[f64::NAN], 0.1).is_err());
        assert_eq!(st.step, 0);
    }

    #[test]
    fn rejects_length_mismatch() {
        let mut st = AdamState::new(2);
        let mut p = vec![0.0];
        assert!(adam_step(&mut st, &mut p, &[1.0], 0.1).is_err());
    }
}
