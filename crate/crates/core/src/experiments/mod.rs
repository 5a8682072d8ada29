//! Experiment harnesses: noise spectroscopy, dynamical decoupling, the
//! surface-code comparison, Landau–Zener sweeps and the analytic
//! dephasing and sample-size tools used to check them.

mod dd;
mod lz;
mod nnls;
mod qns;
mod stats;
mod surface;

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::io::ensure_parent;
use crate::linalg::CMatrix;

pub use dd::{dd_experiment, DdConfig, DdNoise, DdProtocol, DdSeries};
pub use lz::{lz_compare, LzComparison, LzConfig};
pub use nnls::nnls;
pub use qns::{
    qns_build_design, qns_forward_chi, qns_reconstruct, qns_simulate_survivals, survival_probability_analytic,
    QnsDesign, QnsReconstruction, SurvivalEstimates,
};
pub use stats::{f_distribution_quantile, f_test_sample_size, loglog_fit};
pub use surface::{surface_code_sweep, SurfacePoint, SurfaceSweep, SurfaceSweepConfig};

/// One tidy row: a metric at one sweep point and step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub protocol: String,
    pub gamma: f64,
    pub tau_c: f64,
    pub step: usize,
    pub metric: String,
    pub value: f64,
    pub standard_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Long-format table written as `results.csv`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
}

impl ExperimentResult {
    pub fn push(&mut self, row: ResultRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: ExperimentResult) {
        self.rows.extend(other.rows);
    }

    /// Rows carrying `metric`, in insertion order.
    pub fn metric<'a>(&'a self, metric: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| r.metric == metric)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        ensure_parent(path)?;
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "experiment", "protocol", "gamma", "tau_c", "step", "metric", "value", "standard_error", "n_samples",
            "seed",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.experiment.clone(),
                r.protocol.clone(),
                r.gamma.to_string(),
                r.tau_c.to_string(),
                r.step.to_string(),
                r.metric.clone(),
                r.value.to_string(),
                r.standard_error.to_string(),
                r.n_samples.to_string(),
                r.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Writes `meta.json` into `dir`: the resolved configuration, the seed and
/// the crate version.
pub fn write_meta(dir: &Path, experiment: &str, config: &serde_json::Value, seed: u64) -> Result<PathBuf> {
    #[derive(Serialize)]
    struct Meta<'a> {
        experiment: &'a str,
        seed: u64,
        version: &'a str,
        config: &'a serde_json::Value,
    }
    let path = dir.join("meta.json");
    ensure_parent(&path)?;
    let meta = Meta { experiment, seed, version: env!("CARGO_PKG_VERSION"), config };
    std::fs::write(&path, serde_json::to_string_pretty(&meta)?)?;
    Ok(path)
}

/// Average process fidelity of Gaussian collective dephasing
/// `exp(-i S sum_q sz_q)` with `Var(S) = variance`, around an ideal unitary
/// that commutes with the noise.
///
/// `E|Tr(e^{-iS G})|^2 / N^2 = N^-2 sum_{j,k} exp(-Var (g_j - g_k)^2 / 2)`
/// with `g_j` the eigenvalues of `G`.
pub fn analytic_dephasing_fidelity(variance: f64, u_ideal: &CMatrix) -> Result<f64> {
    if !(variance >= 0.0) {
        return Err(invalid(format!("variance must be >= 0, got {variance}")));
    }
    let dim = u_ideal.nrows();
    if dim == 0 || !dim.is_power_of_two() || u_ideal.ncols() != dim {
        return Err(invalid("ideal unitary must be a square qubit-register matrix"));
    }
    let n = dim.trailing_zeros();
    let g: Vec<f64> = (0..dim).map(|i| n as f64 - 2.0 * i.count_ones() as f64).collect();
    // the noise generator is diagonal, so commuting means U only mixes
    // basis states with equal eigenvalue
    for r in 0..dim {
        for c in 0..dim {
            if g[r] != g[c] && u_ideal[(r, c)].norm() > 1e-10 {
                return Err(invalid("ideal unitary does not commute with the dephasing generator"));
            }
        }
    }
    let total: f64 = g
        .iter()
        .flat_map(|a| g.iter().map(move |b| (-0.5 * variance * (a - b).powi(2)).exp()))
        .sum();
    Ok(total / (dim * dim) as f64)
}
