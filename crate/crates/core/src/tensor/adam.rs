//! Adam optimizer with bias correction and name-keyed moment slots.
//!
//! Parameters live outside any graph (plain tensors owned by the model);
//! each training step binds them as leaves, runs backward, and feeds the
//! accumulated gradients here by name. The step counter is explicit so one
//! logical step can span many named updates.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    slots: HashMap<String, (Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self::with_hyper(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam { lr, beta1, beta2, eps, t: 0, slots: HashMap::new() }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Advance the shared step counter; call once per optimization step,
    /// before the per-parameter updates of that step.
    pub fn begin_step(&mut self) {
        self.t += 1;
    }

    /// Apply one bias-corrected update to `param` under key `name`.
    pub fn update(&mut self, name: &str, param: &mut [f64], grad: &[f64]) -> Result<()> {
        if self.t == 0 {
            return Err(Error::InvalidArgument(
                "optimizer update before the first begin_step".into(),
            ));
        }
        if param.len() != grad.len() {
            return Err(Error::Shape(format!(
                "parameter {name}: {} values but {} gradients",
                param.len(),
                grad.len()
            )));
        }
        if let Some(bad) = grad.iter().find(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!("non-finite gradient {bad} for parameter {name}")));
        }
        let (m, v) = self
            .slots
            .entry(name.to_string())
            .or_insert_with(|| (vec![0.0; param.len()], vec![0.0; param.len()]));
        if m.len() != param.len() {
            return Err(Error::Shape(format!(
                "parameter {name} changed size: slot {} vs update {}",
                m.len(),
                param.len()
            )));
        }
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..param.len() {
            m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * grad[i];
            v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = m[i] / c1;
            let vh = v[i] / c2;
            param[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
        Ok(())
    }
}
