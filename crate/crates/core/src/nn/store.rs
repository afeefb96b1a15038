//! Named parameter store with gradients and Adam state.
//!
//! Parameters keep their insertion order, which fixes the optimizer update
//! order and the checkpoint layout; runs are therefore reproducible and
//! checkpoints round-trip bit-exactly.

use super::tensor::Tensor;
use std::collections::HashMap;

/// Handle into a [`ParamStore`]; plain index, cheap to copy into layer structs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamRef(pub(crate) usize);

#[derive(Clone, Debug)]
pub struct ParamStore {
    names: Vec<String>,
    by_name: HashMap<String, usize>,
    pub(crate) values: Vec<Tensor>,
    pub(crate) grads: Vec<Tensor>,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: Vec<u64>,
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore {
            names: Vec::new(),
            by_name: HashMap::new(),
            values: Vec::new(),
            grads: Vec::new(),
            m: Vec::new(),
            v: Vec::new(),
            t: Vec::new(),
        }
    }

    pub fn add(&mut self, name: &str, init: Tensor) -> ParamRef {
        assert!(!self.by_name.contains_key(name), "duplicate parameter name {name}");
        let idx = self.values.len();
        self.names.push(name.to_string());
        self.by_name.insert(name.to_string(), idx);
        self.grads.push(Tensor::zeros(init.shape()));
        self.m.push(Tensor::zeros(init.shape()));
        self.v.push(Tensor::zeros(init.shape()));
        self.t.push(0);
        self.values.push(init);
        ParamRef(idx)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn by_name(&self, name: &str) -> Option<ParamRef> {
        self.by_name.get(name).copied().map(ParamRef)
    }

    /// Handles for every parameter, in insertion order.
    pub fn refs(&self) -> Vec<ParamRef> {
        (0..self.values.len()).map(ParamRef).collect()
    }

    pub fn total_params(&self) -> usize {
        self.values.iter().map(|t| t.numel()).sum()
    }

    pub fn value(&self, r: ParamRef) -> &Tensor {
        &self.values[r.0]
    }

    pub fn value_mut(&mut self, r: ParamRef) -> &mut Tensor {
        &mut self.values[r.0]
    }

    pub fn grad(&self, r: ParamRef) -> &Tensor {
        &self.grads[r.0]
    }

    pub fn grad_mut(&mut self, r: ParamRef) -> &mut Tensor {
        &mut self.grads[r.0]
    }

    /// Split borrow: read-only values plus writable gradients, for handwritten
    /// backward passes that read weights while accumulating their gradients.
    pub fn split_mut(&mut self) -> (&[Tensor], &mut [Tensor]) {
        (&self.values, &mut self.grads)
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            g.fill(0.0);
        }
    }

    /// Scale all gradients, e.g. to average over a batch.
    pub fn scale_grads(&mut self, s: f64) {
        for g in &mut self.grads {
            for x in g.data_mut() {
                *x *= s;
            }
        }
    }

    /// L2 norm of the full gradient vector.
    pub fn grad_norm(&self) -> f64 {
        self.grads
            .iter()
            .flat_map(|g| g.data().iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Drop accumulated Adam state (fresh optimizer for a new training
    /// phase). Zero gradients then provably leave parameters unchanged.
    pub fn reset_optimizer(&mut self) {
        for i in 0..self.values.len() {
            self.m[i].fill(0.0);
            self.v[i].fill(0.0);
            self.t[i] = 0;
        }
    }

    /// Bias-corrected Adam update on every parameter, then zero the gradients.
    pub fn adam_step(&mut self, lr: f64, beta1: f64, beta2: f64, eps: f64) {
        for i in 0..self.values.len() {
            self.t[i] += 1;
            let bc1 = 1.0 - beta1.powi(self.t[i] as i32);
            let bc2 = 1.0 - beta2.powi(self.t[i] as i32);
            let value = self.values[i].data_mut();
            let grad = self.grads[i].data_mut();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for k in 0..value.len() {
                let g = grad[k];
                m[k] = beta1 * m[k] + (1.0 - beta1) * g;
                v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                value[k] -= lr * m_hat / (v_hat.sqrt() + eps);
                grad[k] = 0.0;
            }
        }
    }

    /// Iterate `(name, value, m, v, t)` in insertion order (checkpointing).
    pub fn iter_params(&self) -> impl Iterator<Item = (&str, &Tensor, &Tensor, &Tensor, u64)> {
        (0..self.values.len())
            .map(move |i| (self.names[i].as_str(), &self.values[i], &self.m[i], &self.v[i], self.t[i]))
    }

    /// Overwrite one parameter's value and optimizer state (checkpoint load).
    pub fn load_param(&mut self, name: &str, value: Tensor, m: Tensor, v: Tensor, t: u64) -> Result<(), String> {
        let idx = *self.by_name.get(name).ok_or_else(|| format!("unknown parameter {name}"))?;
        if value.shape() != self.values[idx].shape() {
            return Err(format!(
                "parameter {name}: checkpoint shape {:?} does not match model shape {:?}",
                value.shape(),
                self.values[idx].shape()
            ));
        }
        self.values[idx] = value;
        self.m[idx] = m;
        self.v[idx] = v;
        self.t[idx] = t;
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|t| t.all_finite())
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
