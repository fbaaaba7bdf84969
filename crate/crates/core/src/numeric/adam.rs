use crate::error::{contract, Error, Result};

use super::network::{GradientSet, ParameterSet};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Moment estimates for Adam. Constants are fixed at [`BETA1`], [`BETA2`], [`EPSILON`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
        }
    }
}

/// One bias-corrected Adam step. Inputs are left untouched.
pub fn adam_step(
    params: &ParameterSet,
    grads: &GradientSet,
    state: &AdamState,
    lr: f64,
) -> Result<(ParameterSet, AdamState)> {
    let n = params.len();
    if grads.len() != n || state.first_moment.len() != n || state.second_moment.len() != n {
        return Err(contract(format!(
            "adam length mismatch: params {n}, grads {}, moments {}/{}",
            grads.len(),
            state.first_moment.len(),
            state.second_moment.len()
        )));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(contract(format!("learning rate must be positive, got {lr}")));
    }
    if grads.as_slice().iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient passed to adam".into()));
    }

    let step_count = state.step_count + 1;
    let correction1 = 1.0 - BETA1.powi(step_count as i32);
    let correction2 = 1.0 - BETA2.powi(step_count as i32);

    let mut next = params.clone();
    let mut first_moment = state.first_moment.clone();
    let mut second_moment = state.second_moment.clone();
    for (((p, &g), m), v) in next
        .as_mut_slice()
        .iter_mut()
        .zip(grads.as_slice())
        .zip(&mut first_moment)
        .zip(&mut second_moment)
    {
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        *p -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }

    Ok((
        next,
        AdamState {
            first_moment,
            second_moment,
            step_count,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::NetworkConfig;

    fn scalar_config() -> NetworkConfig {
        // smallest valid network: no hidden layer, 1 input, 2 actions -> 6 params
        NetworkConfig::new(1, vec![], 2).unwrap()
    }

    #[test]
    fn zero_gradient_is_identity() {
        let config = scalar_config();
        let params = ParameterSet::from_vec(&config, vec![0.5, -1.0, 2.0, 0.0, 3.0, 1e-3]).unwrap();
        let grads = GradientSet::new(vec![0.0; 6]);
        let mut state = AdamState::new(6);
        let mut current = params.clone();
        for _ in 0..25 {
            let (p, s) = adam_step(&current, &grads, &state, 1e-3).unwrap();
            current = p;
            state = s;
        }
        assert_eq!(current, params);
        assert_eq!(state.step_count, 25);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let config = scalar_config();
        let params = ParameterSet::zeros(&config);
        let mut g = vec![0.0; 6];
        g[0] = 0.5;
        g[1] = -2.0;
        let (next, state) = adam_step(&params, &GradientSet::new(g), &AdamState::new(6), 0.001).unwrap();
        // m_hat = g, v_hat = g^2 at t = 1
        let expected = -0.001 * 0.5 / (0.5 + 1e-8);
        assert!((next.as_slice()[0] - expected).abs() < 1e-18);
        assert!((next.as_slice()[0] + 0.000999999980).abs() < 1e-12);
        assert!((next.as_slice()[1] - 0.001 * 2.0 / (2.0 + 1e-8)).abs() < 1e-18);
        assert_eq!(state.step_count, 1);
        assert!(state.second_moment.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn pure_and_repeatable() {
        let config = scalar_config();
        let params = ParameterSet::from_vec(&config, vec![0.1; 6]).unwrap();
        let grads = GradientSet::new(vec![0.3, -0.1, 0.2, 0.0, 1.0, -1.0]);
        let state = AdamState::new(6);
        let a = adam_step(&params, &grads, &state, 3e-4).unwrap();
        let b = adam_step(&params, &grads, &state, 3e-4).unwrap();
        assert_eq!(a, b);
        assert_eq!(state, AdamState::new(6));
    }

    #[test]
    fn rejects_bad_inputs() {
        let config = scalar_config();
        let params = ParameterSet::zeros(&config);
        let state = AdamState::new(6);
        let nan = GradientSet::new(vec![f64::NAN; 6]);
        assert!(adam_step(&params, &nan, &state, 1e-3).is_err());
        let short = GradientSet::new(vec![0.0; 3]);
        assert!(adam_step(&params, &short, &state, 1e-3).is_err());
        let ok = GradientSet::new(vec![0.0; 6]);
        assert!(adam_step(&params, &ok, &state, 0.0).is_err());
    }
}
