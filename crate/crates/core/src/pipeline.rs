//! Suppress-then-evaluate runs used by the `sweep` subcommand.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, PredictionSet};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalConfig};
use crate::nms::{suppress_all, NmsConfig};

/// Sigma values of the published Gaussian SoftNMS sweep.
pub const SWEEP_SIGMAS: [f64; 4] = [0.9, 1.5, 2.0, 4.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub average_map: f64,
    pub map_at: Vec<f64>,
}

/// Run Gaussian SoftNMS at each sigma (other NMS settings from `nms`) and
/// evaluate the result.
pub fn sigma_sweep(
    dataset: &Dataset,
    preds: &PredictionSet,
    nms: &NmsConfig,
    sigmas: &[f64],
    eval: &EvalConfig,
) -> Result<Vec<SweepRow>> {
    if sigmas.is_empty() {
        return Err(Error::Config("sweep needs at least one sigma".into()));
    }
    sigmas
        .iter()
        .map(|&sigma| {
            let cfg = NmsConfig { sigma, ..nms.clone() };
            let kept = suppress_all(preds, &cfg)?;
            let report = evaluate(dataset, &kept, eval)?;
            Ok(SweepRow { sigma, average_map: report.average_map, map_at: report.map_at })
        })
        .collect()
}
