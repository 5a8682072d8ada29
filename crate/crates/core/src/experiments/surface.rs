//! Z-check circuit under multi-axis correlated noise: SchWARMA with one
//! matched step per gate against the Trotterized reference.

use serde::{Deserialize, Serialize};

use super::{loglog_fit, ExperimentResult, ResultRow};
use crate::circuit::{build_z_check, monte_carlo_fidelities, MeanWithError, QuantumCircuit};
use crate::error::{invalid, Result};
use crate::rng::derive_seed;
use crate::schwarma::SchwarmaModel;
use crate::trotter::{trotter_monte_carlo, GaussianProcessSpec, NoiseAxes, PulseSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSweepConfig {
    pub gammas: Vec<f64>,
    pub tau_cs: Vec<f64>,
    pub n_samples: usize,
    pub steps_per_gate: usize,
    pub seed: u64,
}

/// Infidelities of both simulators at one `(gamma, tau_c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfacePoint {
    pub gamma: f64,
    pub tau_c: f64,
    pub schwarma: MeanWithError,
    pub trotter: MeanWithError,
}

impl SurfacePoint {
    pub fn abs_error(&self) -> f64 {
        (self.schwarma.mean - self.trotter.mean).abs()
    }

    pub fn pooled_standard_error(&self) -> f64 {
        self.schwarma.standard_error.hypot(self.trotter.standard_error)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceSweep {
    pub points: Vec<SurfacePoint>,
    pub n_samples: usize,
    pub seed: u64,
}

fn infidelities(f: &[f64]) -> MeanWithError {
    MeanWithError::of(&f.iter().map(|x| 1.0 - x).collect::<Vec<_>>())
}

/// Per-qubit multi-axis SchWARMA models matched to `spec` at `ratio` fine
/// steps per gate.
pub fn matched_multiaxis(spec: &GaussianProcessSpec, ratio: usize, n_qubits: usize) -> Result<Vec<SchwarmaModel>> {
    let src = spec.matched_source(ratio)?;
    let model = SchwarmaModel::multiaxis(src.clone(), src.clone(), src)?;
    Ok(vec![model; n_qubits])
}

fn run_point(circuit: &QuantumCircuit, gamma: f64, tau_c: f64, cfg: &SurfaceSweepConfig, seed: u64) -> Result<SurfacePoint> {
    let spec = GaussianProcessSpec::new(gamma, tau_c, 1.0 / cfg.steps_per_gate as f64)?;
    let models = matched_multiaxis(&spec, cfg.steps_per_gate, circuit.n_qubits())?;
    let f_s = monte_carlo_fidelities(circuit, &models, cfg.n_samples, derive_seed(seed, 0))?;
    let sched = PulseSchedule::from_circuit(circuit, cfg.steps_per_gate)?;
    let f_t = trotter_monte_carlo(&sched, &spec, NoiseAxes::All, cfg.n_samples, derive_seed(seed, 1), false)?;
    Ok(SurfacePoint { gamma, tau_c, schwarma: infidelities(&f_s), trotter: infidelities(&f_t.fidelities) })
}

/// Both simulators on the Z-check circuit at every grid point. Point `i`
/// (gamma-major) owns seed `derive_seed(seed, i)`.
pub fn surface_code_sweep(cfg: &SurfaceSweepConfig) -> Result<SurfaceSweep> {
    if cfg.n_samples == 0 || cfg.steps_per_gate == 0 {
        return Err(invalid("surface sweep needs samples and Trotter steps"));
    }
    let circuit = build_z_check();
    let mut points = Vec::new();
    for (gi, &gamma) in cfg.gammas.iter().enumerate() {
        for (ti, &tau_c) in cfg.tau_cs.iter().enumerate() {
            let index = (gi * cfg.tau_cs.len() + ti) as u64;
            log::info!("surface point gamma={gamma} tau_c={tau_c}");
            points.push(run_point(&circuit, gamma, tau_c, cfg, derive_seed(cfg.seed, index))?);
        }
    }
    Ok(SurfaceSweep { points, n_samples: cfg.n_samples, seed: cfg.seed })
}

impl SurfaceSweep {
    /// `(slope, intercept)` of `log10 |dF|` against `log10 infidelity`,
    /// over points where both are positive.
    pub fn error_fit(&self) -> Result<(f64, f64)> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .points
            .iter()
            .filter(|p| p.abs_error() > 0.0 && p.trotter.mean > 0.0)
            .map(|p| (p.trotter.mean, p.abs_error()))
            .unzip();
        loglog_fit(&xs, &ys)
    }

    pub fn to_result(&self) -> ExperimentResult {
        let mut out = ExperimentResult::default();
        for p in &self.points {
            let row = |protocol: &str, metric: &str, v: f64, se: f64| ResultRow {
                experiment: "surface".into(),
                protocol: protocol.into(),
                gamma: p.gamma,
                tau_c: p.tau_c,
                step: 0,
                metric: metric.into(),
                value: v,
                standard_error: se,
                n_samples: self.n_samples,
                seed: self.seed,
            };
            out.push(row("schwarma", "infidelity", p.schwarma.mean, p.schwarma.standard_error));
            out.push(row("trotter", "infidelity", p.trotter.mean, p.trotter.standard_error));
            out.push(row("difference", "abs_error", p.abs_error(), p.pooled_standard_error()));
        }
        out
    }
}
