//! Checkpoint files: JSON with a format tag, the model configuration,
//! training metadata and every tensor with its shape. Floats are written in
//! shortest round-trip form, so save→load is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{ModelConfig, ParamSet, PolicyModel, TrainingMeta};
use super::tensor::Matrix;
use super::PolicyError;

pub const CHECKPOINT_FORMAT: &str = "quake-restore-policy/1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorRecord {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointDocument {
    format: String,
    config: ModelConfig,
    meta: TrainingMeta,
    tensors: Vec<TensorRecord>,
}

pub fn checkpoint_to_json(model: &PolicyModel) -> String {
    let doc = CheckpointDocument {
        format: CHECKPOINT_FORMAT.into(),
        config: model.config.clone(),
        meta: model.meta.clone(),
        tensors: model
            .params
            .names
            .iter()
            .zip(&model.params.tensors)
            .map(|(name, t)| TensorRecord {
                name: name.clone(),
                rows: t.rows,
                cols: t.cols,
                data: t.data.clone(),
            })
            .collect(),
    };
    serde_json::to_string(&doc).expect("checkpoint serializes")
}

pub fn checkpoint_from_json(text: &str) -> Result<PolicyModel, PolicyError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: CheckpointDocument =
        serde_path_to_error::deserialize(de).map_err(|e| PolicyError::Checkpoint(e.to_string()))?;
    if doc.format != CHECKPOINT_FORMAT {
        return Err(PolicyError::Checkpoint(format!(
            "unsupported format \"{}\", expected \"{CHECKPOINT_FORMAT}\"",
            doc.format
        )));
    }
    let mut names = Vec::with_capacity(doc.tensors.len());
    let mut tensors = Vec::with_capacity(doc.tensors.len());
    for t in doc.tensors {
        if t.data.len() != t.rows * t.cols {
            return Err(PolicyError::Checkpoint(format!(
                "tensor {} holds {} values for shape {}x{}",
                t.name,
                t.data.len(),
                t.rows,
                t.cols
            )));
        }
        names.push(t.name);
        tensors.push(Matrix::from_vec(t.rows, t.cols, t.data));
    }
    PolicyModel::from_parts(doc.config, ParamSet { names, tensors }, doc.meta)
}

pub fn save_checkpoint(model: &PolicyModel, path: &Path) -> Result<(), PolicyError> {
    std::fs::write(path, checkpoint_to_json(model))
        .map_err(|e| PolicyError::Checkpoint(format!("{}: {e}", path.display())))
}

pub fn load_checkpoint(path: &Path) -> Result<PolicyModel, PolicyError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PolicyError::Checkpoint(format!("{}: {e}", path.display())))?;
    checkpoint_from_json(&text)
}
