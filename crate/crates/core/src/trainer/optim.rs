//! Adam with decoupled weight decay, two learning-rate groups.

use crate::error::{Error, Result};
use crate::neural::{Gradients, ParamGroup, ParamRegistry, Tensor};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimConfig {
    pub lr_encoder: f64,
    pub lr_other: f64,
    pub weight_decay: f64,
}

impl OptimConfig {
    pub fn lr(&self, group: ParamGroup) -> f64 {
        match group {
            ParamGroup::Encoder => self.lr_encoder,
            ParamGroup::Other => self.lr_other,
        }
    }
}

/// First and second moment estimates plus the step count.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &ParamRegistry) -> Self {
        let zeros: Vec<Tensor> = params
            .ids()
            .map(|id| Tensor::zeros(params.get(id).shape()))
            .collect();
        AdamState {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One update. Fails before touching any parameter if a gradient is not
/// finite.
pub fn optimizer_step(
    params: &mut ParamRegistry,
    grads: &Gradients,
    state: &mut AdamState,
    config: &OptimConfig,
) -> Result<()> {
    let ids: Vec<_> = params.ids().collect();
    for &id in &ids {
        if !grads.get(id).all_finite() {
            return Err(Error::NonFiniteGradient(params.name(id).to_string()));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - BETA1.powi(t);
    let bc2 = 1.0 - BETA2.powi(t);
    for id in ids {
        let lr = config.lr(params.group(id));
        let decay = 1.0 - lr * config.weight_decay;
        let g = grads.get(id).data();
        let m = state.m[id.0].data_mut();
        let v = state.v[id.0].data_mut();
        let theta = params.get_mut(id).data_mut();
        for k in 0..theta.len() {
            m[k] = BETA1 * m[k] + (1.0 - BETA1) * g[k];
            v[k] = BETA2 * v[k] + (1.0 - BETA2) * g[k] * g[k];
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            theta[k] = theta[k] * decay - lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(value: f64, group: ParamGroup) -> ParamRegistry {
        let mut reg = ParamRegistry::new();
        reg.register("theta", group, Tensor::from_vec(&[1], vec![value]).unwrap())
            .unwrap();
        reg
    }

    fn cfg(lr: f64, wd: f64) -> OptimConfig {
        OptimConfig {
            lr_encoder: lr,
            lr_other: lr,
            weight_decay: wd,
        }
    }

    fn theta(reg: &ParamRegistry) -> f64 {
        reg.get(reg.id("theta").unwrap()).data()[0]
    }

    #[test]
    fn zero_gradient_no_decay_is_noop() {
        let mut reg = scalar(0.7, ParamGroup::Other);
        let mut state = AdamState::new(&reg);
        let g = Gradients::zeros_like(&reg);
        optimizer_step(&mut reg, &g, &mut state, &cfg(0.1, 0.0)).unwrap();
        assert_eq!(theta(&reg), 0.7);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut reg = scalar(1.0, ParamGroup::Other);
        let mut state = AdamState::new(&reg);
        let mut g = Gradients::zeros_like(&reg);
        g.get_mut(reg.id("theta").unwrap()).fill(1.0);
        optimizer_step(&mut reg, &g, &mut state, &cfg(0.1, 0.0)).unwrap();
        // m̂ = v̂ = 1, so the step is lr · 1 / (1 + ε).
        assert!((theta(&reg) - (1.0 - 0.1 / (1.0 + EPSILON))).abs() < 1e-15);
        assert!((theta(&reg) - 0.9).abs() < 1e-7);
    }

    #[test]
    fn decoupled_decay_only() {
        let mut reg = scalar(2.0, ParamGroup::Encoder);
        let mut state = AdamState::new(&reg);
        let g = Gradients::zeros_like(&reg);
        optimizer_step(&mut reg, &g, &mut state, &cfg(0.1, 0.1)).unwrap();
        assert!((theta(&reg) - 2.0 * (1.0 - 0.01)).abs() < 1e-15);
    }

    #[test]
    fn groups_use_their_own_rate() {
        let mut reg = scalar(1.0, ParamGroup::Encoder);
        let mut state = AdamState::new(&reg);
        let mut g = Gradients::zeros_like(&reg);
        g.get_mut(reg.id("theta").unwrap()).fill(1.0);
        let config = OptimConfig {
            lr_encoder: 0.0,
            lr_other: 0.5,
            weight_decay: 0.0,
        };
        optimizer_step(&mut reg, &g, &mut state, &config).unwrap();
        assert_eq!(theta(&reg), 1.0);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut reg = scalar(1.0, ParamGroup::Other);
        let mut state = AdamState::new(&reg);
        let mut g = Gradients::zeros_like(&reg);
        g.get_mut(reg.id("theta").unwrap()).fill(f64::NAN);
        match optimizer_step(&mut reg, &g, &mut state, &cfg(0.1, 0.0)) {
            Err(Error::NonFiniteGradient(name)) => assert_eq!(name, "theta"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(theta(&reg), 1.0);
        assert_eq!(state.step, 0);
    }
}
