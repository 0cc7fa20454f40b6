//! `checkpoint.json`: `{"config", "stats", "tensors": {name: {"shape", "data"}}}`.
//!
//! Floats are written with shortest round-trip formatting, so saving and
//! reloading reproduces every bit and identical models give identical files.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: serde_json::Value,
    pub stats: serde_json::Value,
    pub tensors: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn new(config: &impl Serialize, stats: &impl Serialize) -> Self {
        Checkpoint {
            config: serde_json::to_value(config).expect("config serializes"),
            stats: serde_json::to_value(stats).expect("stats serialize"),
            tensors: BTreeMap::new(),
        }
    }

    pub fn config_as<T: DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_value(self.config.clone()).map_err(|e| Error::parse("checkpoint config", e))
    }

    pub fn stats_as<T: DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_value(self.stats.clone()).map_err(|e| Error::parse("checkpoint stats", e))
    }

    pub fn take(&mut self, name: &str, shape: &[usize]) -> Result<Tensor> {
        let t = self
            .tensors
            .remove(name)
            .ok_or_else(|| Error::parse("checkpoint", format!("missing tensor {name}")))?;
        if t.shape != shape || t.data.len() != shape.iter().product::<usize>() {
            return Err(Error::ShapeMismatch(format!(
                "tensor {name}: expected {shape:?}, found {:?} with {} values",
                t.shape,
                t.data.len()
            )));
        }
        if t.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::parse(
                "checkpoint",
                format!("tensor {name} has non-finite values"),
            ));
        }
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
            _ => Error::io(path, e),
        })?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
    }
}
