use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::ParamStore;

/// Adam moments for every parameter, keyed by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Number of optimizer steps taken so far.
    pub step: u64,
    first: BTreeMap<String, Vec<f64>>,
    second: BTreeMap<String, Vec<f64>>,
}

impl Default for OptimState {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        }
    }
}

impl OptimState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn first_moment(&self, name: &str) -> Option<&[f64]> {
        self.first.get(name).map(Vec::as_slice)
    }

    pub fn second_moment(&self, name: &str) -> Option<&[f64]> {
        self.second.get(name).map(Vec::as_slice)
    }
}

/// One bias-corrected Adam update using the gradients stored on `params`.
/// Nothing is modified if any parameter lacks a gradient.
pub fn adam_step(params: &mut ParamStore, state: &mut OptimState, lr: f64) -> Result<()> {
    if let Some((name, _)) = params.iter().find(|(_, t)| t.grad().is_none()) {
        return Err(Error::Contract(format!("parameter {name} has no gradient")));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (name, tensor) in params.iter_mut() {
        let n = tensor.numel();
        let grad = tensor.grad().expect("checked above").to_vec();
        let m = state.first.entry(name.to_string()).or_insert_with(|| vec![0.0; n]);
        let v = state.second.entry(name.to_string()).or_insert_with(|| vec![0.0; n]);
        for (((theta, g), m), v) in tensor.data_mut().iter_mut().zip(&grad).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *theta -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn store(values: &[(&str, f64, Option<f64>)]) -> ParamStore {
        let mut s = ParamStore::new();
        for &(name, v, g) in values {
            let mut t = Tensor::from_vec(vec![v]);
            if let Some(g) = g {
                t.accumulate_grad(&[g]).unwrap();
            }
            s.insert(name, t).unwrap();
        }
        s
    }

    #[test]
    fn first_step_closed_form() {
        let mut s = store(&[("w", 0.0, Some(1.0))]);
        let mut state = OptimState::new();
        adam_step(&mut s, &mut state, 0.1).unwrap();
        let theta = s.get("w").unwrap().data()[0];
        assert!((theta - (-0.1 / (1.0 + 1e-8))).abs() < 1e-15, "{theta}");
        assert!((theta + 0.09999999).abs() < 1e-8);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters_and_counts_step() {
        let mut s = store(&[("a", 0.5, Some(0.0)), ("b", -2.0, Some(0.0))]);
        let mut state = OptimState::new();
        adam_step(&mut s, &mut state, 0.1).unwrap();
        assert_eq!(s.get("a").unwrap().data(), &[0.5]);
        assert_eq!(s.get("b").unwrap().data(), &[-2.0]);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn equal_gradients_move_equally() {
        let mut s = store(&[("a", 1.0, Some(0.3)), ("b", 1.0, Some(0.3))]);
        let mut state = OptimState::new();
        adam_step(&mut s, &mut state, 0.01).unwrap();
        assert_eq!(s.get("a").unwrap().data(), s.get("b").unwrap().data());
    }

    #[test]
    fn missing_gradient_names_the_parameter() {
        let mut s = store(&[("a", 1.0, Some(0.3)), ("head.bias", 1.0, None)]);
        let mut state = OptimState::new();
        let err = adam_step(&mut s, &mut state, 0.01).unwrap_err();
        assert!(matches!(&err, Error::Contract(m) if m.contains("head.bias")), "{err}");
        assert_eq!(state.step, 0);
        assert_eq!(s.get("a").unwrap().data(), &[1.0]);
    }

    #[test]
    fn matches_a_scalar_reference_over_several_steps() {
        let grads = [0.5, -1.5, 2.0, 0.0, 0.25];
        let mut s = store(&[("w", 0.2, None)]);
        let mut state = OptimState::new();
        let (mut theta, mut m, mut v) = (0.2f64, 0.0f64, 0.0f64);
        for (i, &g) in grads.iter().enumerate() {
            s.zero_grads();
            s.get_mut("w").unwrap().accumulate_grad(&[g]).unwrap();
            adam_step(&mut s, &mut state, 1e-3).unwrap();
            let t = (i + 1) as i32;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            theta -= 1e-3 * (m / (1.0 - 0.9f64.powi(t))) / ((v / (1.0 - 0.999f64.powi(t))).sqrt() + 1e-8);
        }
        assert!((s.get("w").unwrap().data()[0] - theta).abs() < 1e-15);
    }
}
