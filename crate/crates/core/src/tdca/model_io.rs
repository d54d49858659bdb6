use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{FitDiagnostics, TdcaConfig, TdcaError, TdcaModel};
use crate::signal::AcquisitionConfig;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// On-disk form of a [`TdcaModel`]. Matrices are stored row-major as nested
/// arrays; projectors are rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TdcaModelFile {
    pub schema_version: u32,
    pub config: TdcaConfig,
    pub acquisition: AcquisitionConfig,
    pub filters: Vec<Vec<f64>>,
    pub templates: Vec<Vec<Vec<f64>>>,
    pub diagnostics: FitDiagnostics,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, TdcaError> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Err(TdcaError::Format(format!("{what} is empty")));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != m) {
        return Err(TdcaError::Format(format!(
            "{what} row {bad} has {} columns, expected {m}",
            rows[bad].len()
        )));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(TdcaError::Format(format!("{what} has non-finite entries")));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

impl TdcaModelFile {
    pub fn from_model(model: &TdcaModel) -> Self {
        Self {
            schema_version: MODEL_SCHEMA_VERSION,
            config: model.config.clone(),
            acquisition: model.acquisition,
            filters: to_rows(&model.filters),
            templates: model.templates.iter().map(to_rows).collect(),
            diagnostics: model.diagnostics.clone(),
        }
    }

    pub fn into_model(self) -> Result<TdcaModel, TdcaError> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(TdcaError::Format(format!(
                "unsupported model schema_version {}",
                self.schema_version
            )));
        }
        self.acquisition.validate()?;
        let filters = from_rows(&self.filters, "filters")?;
        let templates = self
            .templates
            .iter()
            .enumerate()
            .map(|(i, t)| from_rows(t, &format!("template {i}")))
            .collect::<Result<Vec<_>, _>>()?;
        TdcaModel::from_parts(filters, templates, self.config, self.acquisition, self.diagnostics)
    }
}

impl TdcaModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&TdcaModelFile::from_model(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TdcaError> {
        let file: TdcaModelFile = serde_json::from_str(text).map_err(|e| TdcaError::Format(e.to_string()))?;
        file.into_model()
    }

    /// Short stable identifier derived from the serialized model.
    pub fn model_id(&self) -> String {
        // FNV-1a, 64 bit
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_json().bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}
