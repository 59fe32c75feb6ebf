//! Versioned JSON checkpoints: named tensors with shape headers.
//!
//! Floats are written in shortest round-trip form, so save/load is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::scalar::Scalar;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Tensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Checkpoint<T> {
    pub version: u32,
    pub scalar: String,
    pub tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> Default for Checkpoint<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new() -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            scalar: std::any::type_name::<T>().to_string(),
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<T>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.tensors.push(Tensor { name: name.into(), shape, data });
    }

    pub fn push_scalar(&mut self, name: &str, v: T) {
        self.push(name, vec![1], vec![v]);
    }

    /// Stores every layer of `net` as `<prefix>.<l>.weight` / `.bias`.
    pub fn push_mlp(&mut self, prefix: &str, net: &Mlp<T>) {
        for l in 0..net.layers() {
            let (w, b) = net.layer(l);
            let (fi, fo) = (net.sizes()[l], net.sizes()[l + 1]);
            self.push(format!("{prefix}.{l}.weight"), vec![fi, fo], w.to_vec());
            self.push(format!("{prefix}.{l}.bias"), vec![fo], b.to_vec());
        }
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))
    }

    pub fn scalar_value(&self, name: &str) -> Result<T> {
        let t = self.get(name)?;
        t.data.first().copied().ok_or_else(|| Error::Checkpoint(format!("tensor {name} is empty")))
    }

    pub fn mlp(&self, prefix: &str) -> Result<Mlp<T>> {
        let mut sizes = Vec::new();
        let mut params = Vec::new();
        let mut l = 0;
        while let Ok(w) = self.get(&format!("{prefix}.{l}.weight")) {
            let b = self.get(&format!("{prefix}.{l}.bias"))?;
            if w.shape.len() != 2 || b.shape != [w.shape[1]] || w.data.len() != w.shape[0] * w.shape[1] {
                return Err(Error::Checkpoint(format!("inconsistent shapes for {prefix}.{l}")));
            }
            if l == 0 {
                sizes.push(w.shape[0]);
            } else if *sizes.last().unwrap() != w.shape[0] {
                return Err(Error::Checkpoint(format!("layer {prefix}.{l} does not chain")));
            }
            sizes.push(w.shape[1]);
            params.extend_from_slice(&w.data);
            params.extend_from_slice(&b.data);
            l += 1;
        }
        if l == 0 {
            return Err(Error::Checkpoint(format!("missing network {prefix}")));
        }
        Mlp::from_parts(sizes, params)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", c.version)));
        }
        if c.scalar != std::any::type_name::<T>() {
            return Err(Error::Checkpoint(format!("scalar type {} does not match {}", c.scalar, std::any::type_name::<T>())));
        }
        for t in &c.tensors {
            if t.shape.iter().product::<usize>() != t.data.len() {
                return Err(Error::Checkpoint(format!("tensor {} shape does not match data", t.name)));
            }
        }
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::report::write_atomic(path.as_ref(), self.to_json().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
