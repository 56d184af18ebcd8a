//! Checkpoint persistence: a JSON manifest (model kind, config, seed,
//! parameter names and shapes) plus a little-endian f64 binary blob holding
//! the parameter values in store order.

use crate::baselines::{BaselineModel, BaselineVariant, BlstmConfig, BlstmModel, PaddedMlpConfig, PaddedMlpModel};
use crate::error::{Error, Result};
use crate::gnn::{GnnConfig, GnnModel};
use crate::tensor::Tensor;
use crate::train::{Model, ModelKind};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamMeta {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

/// Model-family-specific configuration stored inside the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelConfig {
    Baseline {
        variant: BaselineVariant,
        widths: Vec<usize>,
    },
    PaddedMlp(PaddedMlpConfig),
    Blstm(BlstmConfig),
    Gnn(GnnConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub kind: ModelKind,
    pub seed: u64,
    pub config: ModelConfig,
    pub params: Vec<ParamMeta>,
    /// Blob filename, relative to the manifest.
    pub blob: String,
}

fn model_config(model: &Model) -> ModelConfig {
    match model {
        Model::Baseline(m) => ModelConfig::Baseline {
            variant: m.variant,
            widths: m.widths.clone(),
        },
        Model::PaddedMlp(m) => ModelConfig::PaddedMlp(m.config.clone()),
        Model::Blstm(m) => ModelConfig::Blstm(m.config.clone()),
        Model::Gnn(_, m) => ModelConfig::Gnn(m.config.clone()),
    }
}

fn model_seed(model: &Model) -> u64 {
    match model {
        Model::Baseline(m) => m.seed,
        Model::PaddedMlp(m) => m.seed,
        Model::Blstm(m) => m.seed,
        Model::Gnn(_, m) => m.seed,
    }
}

/// Write `{stem}.json` and `{stem}.bin` into `dir`; returns the manifest
/// path.
pub fn save_model(model: &Model, dir: &Path, stem: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let manifest_path = dir.join(format!("{stem}.json"));
    let blob_name = format!("{stem}.bin");
    let store = model.store();
    let params: Vec<ParamMeta> = store
        .entries()
        .iter()
        .map(|e| ParamMeta {
            name: e.name.clone(),
            rows: e.value.rows(),
            cols: e.value.cols(),
        })
        .collect();
    let manifest = CheckpointManifest {
        kind: model.kind(),
        seed: model_seed(model),
        config: model_config(model),
        params,
        blob: blob_name.clone(),
    };
    let mut blob = Vec::with_capacity(store.n_scalars() * 8);
    for e in store.entries() {
        for &v in e.value.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(dir.join(&blob_name), blob)?;
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest_path)
}

/// Rebuild a model from a manifest, restoring all parameter values from the
/// blob.
pub fn load_model(manifest_path: &Path) -> Result<Model> {
    let manifest: CheckpointManifest =
        serde_json::from_str(&std::fs::read_to_string(manifest_path)?)?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut model = match &manifest.config {
        ModelConfig::Baseline { variant, widths } => {
            Model::Baseline(BaselineModel::new(*variant, widths.clone(), manifest.seed)?)
        }
        ModelConfig::PaddedMlp(cfg) => {
            Model::PaddedMlp(PaddedMlpModel::new(cfg.clone(), manifest.seed)?)
        }
        ModelConfig::Blstm(cfg) => Model::Blstm(BlstmModel::new(cfg.clone(), manifest.seed)?),
        ModelConfig::Gnn(cfg) => {
            let kind = manifest.kind.graph_kind().ok_or_else(|| {
                Error::Data(format!(
                    "manifest kind {:?} does not match a graph config",
                    manifest.kind
                ))
            })?;
            Model::Gnn(kind, GnnModel::new(cfg.clone(), manifest.seed)?)
        }
    };
    if model.kind() != manifest.kind {
        return Err(Error::Data(format!(
            "manifest kind {:?} does not match config family {:?}",
            manifest.kind,
            model.kind()
        )));
    }
    let blob = std::fs::read(dir.join(&manifest.blob))?;
    let store = model.store_mut();
    if manifest.params.len() != store.len() {
        return Err(Error::Data(format!(
            "checkpoint has {} parameters, model expects {}",
            manifest.params.len(),
            store.len()
        )));
    }
    let expected_bytes: usize = manifest
        .params
        .iter()
        .map(|p| p.rows * p.cols * 8)
        .sum();
    if blob.len() != expected_bytes {
        return Err(Error::Data(format!(
            "parameter blob has {} bytes, manifest describes {}",
            blob.len(),
            expected_bytes
        )));
    }
    let mut offset = 0usize;
    for (meta, entry) in manifest.params.iter().zip(store.entries_mut()) {
        if meta.name != entry.name
            || meta.rows != entry.value.rows()
            || meta.cols != entry.value.cols()
        {
            return Err(Error::Data(format!(
                "checkpoint parameter {} [{}x{}] does not match model parameter {} [{}x{}]",
                meta.name,
                meta.rows,
                meta.cols,
                entry.name,
                entry.value.rows(),
                entry.value.cols()
            )));
        }
        let n = meta.rows * meta.cols;
        let data: Vec<f64> = blob[offset..offset + n * 8]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        offset += n * 8;
        entry.value = Tensor::from_rows_unchecked(meta.rows, meta.cols, data);
    }
    Ok(model)
}
