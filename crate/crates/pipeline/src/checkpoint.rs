//! Checkpoint container.
//!
//! Layout, integers little-endian:
//!
//! | bytes | content                                   |
//! |-------|-------------------------------------------|
//! | 4     | magic `SHCK`                              |
//! | 4     | version (`u32`, currently 1)              |
//! | 8     | manifest length `n` (`u64`)               |
//! | n     | JSON manifest                             |
//! | rest  | `f32` payloads in manifest tensor order   |

use std::path::Path;

use serde::{Deserialize, Serialize};
use shse_core::tensorfile::write_atomic;
use shse_enhancer::params::{ParameterSet, Tensor};
use shse_enhancer::train::{Adam, LrSchedule};
use shse_enhancer::Enhancer;

use crate::config::ExperimentConfig;
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SHCK";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Param,
    Buffer,
    AdamM,
    AdamV,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub group: Group,
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
    /// Learning rate used during the epoch.
    pub lr: f64,
    pub step_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    /// Completed epochs.
    pub epoch: usize,
    pub schedule: LrSchedule,
    pub adam_step: u64,
    pub history: Vec<EpochRecord>,
    pub tensors: Vec<TensorEntry>,
}

/// Full training state.
pub struct Checkpoint {
    pub config: ExperimentConfig,
    pub epoch: usize,
    pub schedule: LrSchedule,
    pub history: Vec<EpochRecord>,
    pub model: Enhancer<f32>,
    pub adam: Adam<f32>,
}

fn groups<'a>(model: &'a Enhancer<f32>, adam: &'a Adam<f32>) -> [(Group, &'a ParameterSet<f32>); 4] {
    [
        (Group::Param, model.params()),
        (Group::Buffer, model.buffers()),
        (Group::AdamM, &adam.m),
        (Group::AdamV, &adam.v),
    ]
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let sets = groups(&self.model, &self.adam);
        let tensors = sets
            .iter()
            .flat_map(|(g, set)| {
                set.tensors().iter().map(move |t| TensorEntry {
                    group: *g,
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    dtype: "f32".into(),
                })
            })
            .collect();
        let manifest = Manifest {
            config: self.config.clone(),
            epoch: self.epoch,
            schedule: self.schedule.clone(),
            adam_step: self.adam.step,
            history: self.history.clone(),
            tensors,
        };
        let json = serde_json::to_vec(&manifest).expect("manifest serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for (_, set) in sets {
            for t in set.tensors() {
                for v in &t.data {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Checkpoint {
            path: origin.to_path_buf(),
            reason,
        };
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(bad("not a checkpoint (bad magic)".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let json = bytes
            .get(16..16usize.saturating_add(len))
            .ok_or_else(|| bad("truncated manifest".into()))?;
        let manifest: Manifest = serde_json::from_slice(json).map_err(|e| bad(format!("manifest: {e}")))?;
        manifest.config.validate()?;

        let mut payload = &bytes[16 + len..];
        let mut loaded: [Vec<Tensor<f32>>; 4] = Default::default();
        for entry in &manifest.tensors {
            if entry.dtype != "f32" {
                return Err(bad(format!("tensor {} has dtype {}", entry.name, entry.dtype)));
            }
            let count: usize = entry.shape.iter().product();
            if payload.len() < 4 * count {
                return Err(bad(format!("payload truncated at tensor {}", entry.name)));
            }
            let (head, rest) = payload.split_at(4 * count);
            payload = rest;
            let data = head
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            loaded[entry.group as usize].push(Tensor {
                name: entry.name.clone(),
                shape: entry.shape.clone(),
                data,
            });
        }
        if !payload.is_empty() {
            return Err(bad(format!("{} trailing payload bytes", payload.len())));
        }

        let mut model = Enhancer::<f32>::new(manifest.config.model.clone(), 0)?;
        let [params, buffers, m, v] = loaded;
        model.params_mut().load_from(&params)?;
        model.buffers_mut().load_from(&buffers)?;
        let mut adam = Adam::new(model.params());
        adam.m.load_from(&m)?;
        adam.v.load_from(&v)?;
        adam.step = manifest.adam_step;
        Ok(Self {
            config: manifest.config,
            epoch: manifest.epoch,
            schedule: manifest.schedule,
            history: manifest.history,
            model,
            adam,
        })
    }
}
