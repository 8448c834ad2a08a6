use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tensor::Parameterized;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Bias-corrected Adam with one moment pair per named parameter.
///
/// Gradients are consumed: every parameter's grad is cleared after the
/// update, so the next backward pass starts from zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    moments: BTreeMap<String, Moments>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut dyn Parameterized) -> Result<()> {
        let mut missing = Vec::new();
        params.visit_params(&mut |name, t| {
            if t.requires_grad() && t.grad().is_none() {
                missing.push(name.to_string());
            }
        });
        if !missing.is_empty() {
            return Err(Error::contract(format!(
                "adam step without gradient for parameter(s): {}",
                missing.join(", ")
            )));
        }

        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let moments = &mut self.moments;
        let mut shape_err = None;
        params.visit_params_mut(&mut |name, p| {
            if !p.requires_grad() || shape_err.is_some() {
                return;
            }
            let n = p.len();
            let mo = moments.entry(name.to_string()).or_insert_with(|| Moments {
                m: vec![0.0; n],
                v: vec![0.0; n],
            });
            if mo.m.len() != n {
                shape_err = Some(name.to_string());
                return;
            }
            let grad = p.grad().expect("checked above").to_vec();
            for (j, w) in p.data_mut().iter_mut().enumerate() {
                let g = grad[j];
                mo.m[j] = beta1 * mo.m[j] + (1.0 - beta1) * g;
                mo.v[j] = beta2 * mo.v[j] + (1.0 - beta2) * g * g;
                let m_hat = mo.m[j] / bc1;
                let v_hat = mo.v[j] / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            p.zero_grad();
        });
        match shape_err {
            Some(name) => Err(Error::contract(format!(
                "parameter {name} changed size between adam steps"
            ))),
            None => Ok(()),
        }
    }
}
