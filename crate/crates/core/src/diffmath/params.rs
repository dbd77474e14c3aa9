use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "faframe-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Named parameter tensors in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Arc<Tensor>>,
    index: BTreeMap<String, usize>,
}

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut dyn RngCore) -> Tensor {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out).map(|_| rng.random_range(-a..=a)).collect();
    Tensor::matrix(fan_in, fan_out, data).unwrap()
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics on a duplicate name; parameter names are fixed by model layout.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> usize {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.values.push(Arc::new(value));
        self.names.len() - 1
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

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, i: usize) -> &Tensor {
        &self.values[i]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.position(name).map(|i| self.get(i))
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Tensor {
        Arc::make_mut(&mut self.values[i])
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|t| t.len()).sum()
    }

    /// Record every parameter as a leaf; returned vars follow store order.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.values.iter().map(|v| tape.leaf_shared(v.clone())).collect()
    }

    /// Record every parameter as a constant (inference, no gradients).
    pub fn bind_constant(&self, tape: &mut Tape) -> Vec<Var> {
        self.values.iter().map(|v| tape.constant_shared(v.clone())).collect()
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            params: self
                .names
                .iter()
                .zip(&self.values)
                .map(|(name, t)| CheckpointEntry {
                    name: name.clone(),
                    shape: t.shape().to_vec(),
                    values: t.data().to_vec(),
                })
                .collect(),
        }
    }

    /// Overwrite values from a checkpoint; names and shapes must match exactly.
    pub fn load_checkpoint(&mut self, ck: &Checkpoint) -> Result<()> {
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        if ck.params.len() != self.len() {
            return Err(Error::InvalidConfig(format!(
                "checkpoint has {} tensors, model has {}",
                ck.params.len(),
                self.len()
            )));
        }
        for entry in &ck.params {
            let i = self
                .position(&entry.name)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown parameter {}", entry.name)))?;
            if self.get(i).shape() != entry.shape.as_slice() {
                return Err(Error::ShapeMismatch {
                    op: "load_checkpoint",
                    lhs: self.get(i).shape().to_vec(),
                    rhs: entry.shape.clone(),
                });
            }
            *self.get_mut(i) = Tensor::new(entry.shape.clone(), entry.values.clone())?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string(&self.to_checkpoint())?;
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn load(&mut self, path: &Path) -> Result<()> {
        let ck: Checkpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        self.load_checkpoint(&ck)
    }
}

/// JSON checkpoint: a versioned list of `(name, shape, row-major values)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub params: Vec<CheckpointEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}
