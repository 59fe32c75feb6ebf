//! JSON dataset and budget files.
//!
//! Dataset: `{"K", "horizon", "assets": [{"id", "weight", "unit_cost": [h],
//! "deterioration": [[K x K]], "maintenance": [[K x K]], "initial": [K]}]}`.
//! Budget: `{"horizon", "lower": [h], "upper": [h], "total"}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{AssetSpec, BudgetSpec, ConditionDistribution, NetworkSpec, TransitionMatrix};
use crate::scalar::Scalar;

/// Schema version reported by the CLI help text.
pub const DATASET_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetRecord {
    pub id: String,
    pub weight: f64,
    pub unit_cost: Vec<f64>,
    pub deterioration: Vec<Vec<f64>>,
    pub maintenance: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    #[serde(rename = "K", default = "default_k")]
    pub k: usize,
    pub horizon: usize,
    pub assets: Vec<AssetRecord>,
}

fn default_k() -> usize {
    crate::network::DEFAULT_STATES
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetFile {
    pub horizon: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub total: f64,
}

fn cast<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

fn uncast<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}

impl DatasetFile {
    pub fn into_network<T: Scalar>(self) -> Result<NetworkSpec<T>> {
        let k = self.k;
        let mut assets = Vec::with_capacity(self.assets.len());
        for rec in self.assets {
            let at = |field: &str| format!("asset {} {field}", rec.id);
            let det = TransitionMatrix::with_location(rec.deterioration.iter().map(|r| cast(r)).collect(), &at("deterioration"))?;
            let act = TransitionMatrix::with_location(rec.maintenance.iter().map(|r| cast(r)).collect(), &at("maintenance"))?;
            let initial = ConditionDistribution::with_location(cast(&rec.initial), &at("initial"))?;
            assets.push(AssetSpec {
                id: rec.id.clone(),
                weight: T::lit(rec.weight),
                unit_cost: cast(&rec.unit_cost),
                deterioration: det,
                maintenance: act,
                initial,
            });
        }
        NetworkSpec::new(k, self.horizon, assets)
    }

    pub fn from_network<T: Scalar>(net: &NetworkSpec<T>) -> Self {
        let rows = |m: &TransitionMatrix<T>| m.rows().iter().map(|r| uncast(r)).collect();
        Self {
            k: net.k(),
            horizon: net.horizon(),
            assets: net
                .assets()
                .iter()
                .map(|a| AssetRecord {
                    id: a.id.clone(),
                    weight: a.weight.to_f64_lossy(),
                    unit_cost: uncast(&a.unit_cost),
                    deterioration: rows(&a.deterioration),
                    maintenance: rows(&a.maintenance),
                    initial: uncast(a.initial.probs()),
                })
                .collect(),
        }
    }
}

impl BudgetFile {
    pub fn into_budget<T: Scalar>(self) -> Result<BudgetSpec<T>> {
        if self.lower.len() != self.horizon {
            return Err(Error::invariant(
                "budget lower",
                format!("has {} entries, expected horizon {}", self.lower.len(), self.horizon),
            ));
        }
        BudgetSpec::new(cast(&self.lower), cast(&self.upper), T::lit(self.total))
    }

    pub fn from_budget<T: Scalar>(b: &BudgetSpec<T>) -> Self {
        Self {
            horizon: b.horizon(),
            lower: uncast(b.lower()),
            upper: uncast(b.upper()),
            total: b.total().to_f64_lossy(),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn parse_network<T: Scalar>(text: &str) -> Result<NetworkSpec<T>> {
    let file: DatasetFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.into_network()
}

pub fn parse_budget<T: Scalar>(text: &str) -> Result<BudgetSpec<T>> {
    let file: BudgetFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.into_budget()
}

pub fn load_network<T: Scalar>(path: impl AsRef<Path>) -> Result<NetworkSpec<T>> {
    parse_network(&read(path.as_ref())?)
}

pub fn load_budget<T: Scalar>(path: impl AsRef<Path>) -> Result<BudgetSpec<T>> {
    parse_budget(&read(path.as_ref())?)
}

pub fn network_to_json<T: Scalar>(net: &NetworkSpec<T>) -> String {
    serde_json::to_string_pretty(&DatasetFile::from_network(net)).expect("dataset serializes")
}

pub fn budget_to_json<T: Scalar>(b: &BudgetSpec<T>) -> String {
    serde_json::to_string_pretty(&BudgetFile::from_budget(b)).expect("budget serializes")
}

pub fn save_network<T: Scalar>(net: &NetworkSpec<T>, path: impl AsRef<Path>) -> Result<()> {
    crate::report::write_atomic(path.as_ref(), network_to_json(net).as_bytes())
}

pub fn save_budget<T: Scalar>(b: &BudgetSpec<T>, path: impl AsRef<Path>) -> Result<()> {
    crate::report::write_atomic(path.as_ref(), budget_to_json(b).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROW_BAD: &str = r#"{"K": 2, "horizon": 1, "assets": [
        {"id": "a", "weight": 1.0, "unit_cost": [3.0],
         "deterioration": [[0.9, 0.08], [0.0, 1.0]],
         "maintenance": [[1.0, 0.0], [1.0, 0.0]],
         "initial": [1.0, 0.0]}]}"#;

    #[test]
    fn row_sum_violation_names_asset_and_row() {
        let msg = parse_network::<f64>(ROW_BAD).unwrap_err().to_string();
        assert!(msg.contains("asset a deterioration row 1"), "{msg}");
    }

    #[test]
    fn empty_assets_rejected() {
        let msg = parse_network::<f64>(r#"{"K": 5, "horizon": 5, "assets": []}"#)
            .unwrap_err()
            .to_string();
        assert!(msg.contains("n ≥ 1 required"), "{msg}");
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(parse_network::<f64>("{"), Err(Error::Parse(_))));
        assert!(matches!(parse_budget::<f64>("[]"), Err(Error::Parse(_))));
    }

    #[test]
    fn budget_horizon_must_match_vectors() {
        let text = r#"{"horizon": 3, "lower": [1, 1], "upper": [2, 2], "total": 5}"#;
        assert!(parse_budget::<f64>(text).is_err());
    }
}
