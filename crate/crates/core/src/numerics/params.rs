//! Trainable parameters and the stores that own them.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

static NEXT_STORE_UID: AtomicU64 = AtomicU64::new(1);

fn next_uid() -> u64 {
    NEXT_STORE_UID.fetch_add(1, Ordering::Relaxed)
}

/// A value together with its gradient and Adam moment buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub value: Tensor,
    pub gradient: Tensor,
    pub adam_m: Tensor,
    pub adam_v: Tensor,
    pub step_count: u64,
}

impl Parameter {
    pub fn new(value: Tensor) -> Self {
        let shape = value.shape().to_vec();
        Parameter {
            value,
            gradient: Tensor::zeros(&shape),
            adam_m: Tensor::zeros(&shape),
            adam_v: Tensor::zeros(&shape),
            step_count: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Owns the parameters of one network. Graphs borrow values from a store and
/// hand back [`Gradients`] tagged with the store's identity, so gradients can
/// only ever be applied to the store that produced them.
#[derive(Debug)]
pub struct ParamStore {
    uid: u64,
    names: Vec<String>,
    params: Vec<Parameter>,
    frozen: bool,
}

impl Clone for ParamStore {
    fn clone(&self) -> Self {
        ParamStore {
            uid: next_uid(),
            names: self.names.clone(),
            params: self.params.clone(),
            frozen: self.frozen,
        }
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        ParamStore::new()
    }
}

impl PartialEq for ParamStore {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
            && self.frozen == other.frozen
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|(a, b)| a.value == b.value)
    }
}

/// Layout entry used by model files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore {
            uid: next_uid(),
            names: Vec::new(),
            params: Vec::new(),
            frozen: false,
        }
    }

    pub(crate) fn uid(&self) -> u64 {
        self.uid
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.params.push(Parameter::new(value));
        ParamId(self.params.len() - 1)
    }

    pub fn zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    /// Glorot-uniform initialised `[fan_in, fan_out]` matrix.
    pub fn glorot<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> ParamId {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        self.add(name, Tensor::from_parts(vec![fan_in, fan_out], data))
    }

    /// Uniform `[rows, cols]` matrix in `(-scale, scale)`.
    pub fn uniform<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        scale: f64,
        rng: &mut R,
    ) -> ParamId {
        let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
        self.add(name, Tensor::from_parts(vec![rows, cols], data))
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Parameter)> {
        self.names.iter().map(String::as_str).zip(&self.params)
    }

    pub(crate) fn params_mut(&mut self) -> &mut [Parameter] {
        &mut self.params
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn unfreeze(&mut self) {
        self.frozen = false;
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Adds gradients recorded against this store. Entries from other stores
    /// are ignored, as is everything when the store is frozen.
    pub fn accumulate(&mut self, grads: &Gradients) {
        if self.frozen {
            return;
        }
        for (uid, id, g) in &grads.entries {
            if *uid == self.uid {
                self.params[id.0].gradient.add_assign(g);
            }
        }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.gradient.fill(0.0);
        }
    }

    pub fn layout(&self) -> Vec<ParamLayout> {
        self.iter()
            .map(|(name, p)| ParamLayout {
                name: name.to_string(),
                shape: p.value.shape().to_vec(),
            })
            .collect()
    }

    /// All values flattened in declaration order.
    pub fn flat_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_scalars());
        for p in &self.params {
            out.extend_from_slice(p.value.data());
        }
        out
    }

    /// Rebuilds a store from a layout and flattened values; optimizer state
    /// starts fresh.
    pub fn from_layout(layout: &[ParamLayout], values: &[f64], frozen: bool) -> Result<Self> {
        let mut store = ParamStore::new();
        let mut offset = 0;
        for entry in layout {
            let n: usize = entry.shape.iter().product();
            let chunk = values
                .get(offset..offset + n)
                .ok_or_else(|| Error::Format(format!("truncated values for {}", entry.name)))?;
            store.add(entry.name.clone(), Tensor::new(entry.shape.clone(), chunk.to_vec())?);
            offset += n;
        }
        if offset != values.len() {
            return Err(Error::Format(format!(
                "{} trailing values after layout",
                values.len() - offset
            )));
        }
        store.frozen = frozen;
        Ok(store)
    }
}

/// Gradients produced by one backward pass.
#[derive(Debug, Default)]
pub struct Gradients {
    pub(crate) entries: Vec<(u64, ParamId, Tensor)>,
}

impl Gradients {
    pub fn get(&self, store: &ParamStore, id: ParamId) -> Option<&Tensor> {
        self.entries
            .iter()
            .find(|(uid, pid, _)| *uid == store.uid && *pid == id)
            .map(|(_, _, g)| g)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
