//! Dynamical decoupling with instantaneous pi pulses: each step applies the
//! protocol's pulse and then one noise step.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExperimentResult, ResultRow};
use crate::circuit::MeanWithError;
use crate::error::{invalid, Result};
use crate::linalg::{self, identity, CMatrix};
use crate::quantum::{nonunital_shift, process_fidelity, KrausSet, SuperOperator};
use crate::rng::{substream, SimRng};
use crate::schwarma::SchwarmaModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DdProtocol {
    #[serde(rename = "free")]
    Free,
    XX,
    XY4,
}

impl DdProtocol {
    pub const ALL: [DdProtocol; 3] = [DdProtocol::Free, DdProtocol::XX, DdProtocol::XY4];

    pub fn name(self) -> &'static str {
        match self {
            Self::Free => "free",
            Self::XX => "XX",
            Self::XY4 => "XY4",
        }
    }

    /// Pulses per period.
    pub fn period(self) -> usize {
        match self {
            Self::Free => 1,
            Self::XX => 2,
            Self::XY4 => 4,
        }
    }

    /// Pulse at step `k` (0-based).
    fn pulse(self, k: usize) -> Option<CMatrix> {
        let x = || linalg::to_dynamic(&linalg::su2_rotation(FRAC_PI_2, 0.0, 0.0));
        let y = || linalg::to_dynamic(&linalg::su2_rotation(0.0, FRAC_PI_2, 0.0));
        match self {
            Self::Free => None,
            Self::XX => Some(x()),
            Self::XY4 => Some(if k % 2 == 0 { x() } else { y() }),
        }
    }
}

/// Noise realization source for a decoupling run.
#[derive(Debug, Clone)]
pub enum DdNoise {
    Schwarma(SchwarmaModel),
    /// `exp(-i sum c_mu sigma_mu)` with `c_mu ~ N(0, sigma_mu^2)` drawn once
    /// per realization and held for every step.
    Static { sigma: [f64; 3] },
}

impl DdNoise {
    fn realize(&self, rng: &mut SimRng) -> Realization {
        match self {
            Self::Schwarma(m) => {
                let mut m = m.clone();
                m.reset();
                Realization::Schwarma(m)
            }
            Self::Static { sigma } => {
                let c = sigma.map(|s| s * rng.sample::<f64, _>(StandardNormal));
                Realization::Static(linalg::to_dynamic(&linalg::su2_rotation(c[0], c[1], c[2])))
            }
        }
    }
}

enum Realization {
    Schwarma(SchwarmaModel),
    Static(CMatrix),
}

impl Realization {
    fn step(&mut self, rng: &mut SimRng) -> Result<KrausSet> {
        match self {
            Self::Schwarma(m) => m.step(rng),
            Self::Static(u) => Ok(KrausSet::unitary(u.clone())?),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DdConfig {
    pub n_steps: usize,
    pub n_samples: usize,
    pub seed: u64,
}

/// Per-step averages for one protocol.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DdSeries {
    pub protocol: DdProtocol,
    pub fidelity: Vec<MeanWithError>,
    pub unitality: Vec<MeanWithError>,
}

/// Process fidelity and unitality of the averaged map after every step.
///
/// Trial `t` of every protocol draws from substream `t` of the seed, so the
/// protocols see common noise realizations.
pub fn dd_experiment(protocol: DdProtocol, noise: &DdNoise, cfg: &DdConfig) -> Result<DdSeries> {
    if cfg.n_samples == 0 || cfg.n_steps == 0 {
        return Err(invalid("decoupling run needs at least one step and one sample"));
    }
    if let DdNoise::Schwarma(m) = noise {
        if m.dim() != 2 {
            return Err(invalid("decoupling noise must be single-qubit"));
        }
    }
    let ideals: Vec<CMatrix> = (0..cfg.n_steps)
        .scan(identity(2), |u, k| {
            if let Some(p) = protocol.pulse(k) {
                *u = p * &*u;
            }
            Some(u.clone())
        })
        .collect();
    // per trial: fidelity and Bloch shift after each step
    let trials: Vec<Vec<(f64, [f64; 3])>> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|t| -> Result<_> {
            let mut rng = substream(cfg.seed, t as u64);
            let mut noise = noise.realize(&mut rng);
            let mut s = SuperOperator::identity(2);
            let mut out = Vec::with_capacity(cfg.n_steps);
            for (k, ideal) in ideals.iter().enumerate() {
                if let Some(p) = protocol.pulse(k) {
                    s = SuperOperator::from_unitary(&p).after(&s)?;
                }
                s = noise.step(&mut rng)?.to_superoperator().after(&s)?;
                out.push((process_fidelity(ideal, &s)?, nonunital_shift(&s)?.0));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut fidelity = Vec::with_capacity(cfg.n_steps);
    let mut unitality = Vec::with_capacity(cfg.n_steps);
    for k in 0..cfg.n_steps {
        let f: Vec<f64> = trials.iter().map(|tr| tr[k].0).collect();
        fidelity.push(MeanWithError::of(&f));
        let comps: Vec<MeanWithError> =
            (0..3).map(|i| MeanWithError::of(&trials.iter().map(|tr| tr[k].1[i]).collect::<Vec<_>>())).collect();
        let norm = comps.iter().map(|c| c.mean * c.mean).sum::<f64>().sqrt();
        // delta method for the norm of the mean shift
        let se = if norm > 0.0 {
            comps.iter().map(|c| (c.mean / norm * c.standard_error).powi(2)).sum::<f64>().sqrt()
        } else {
            comps.iter().map(|c| c.standard_error.powi(2)).sum::<f64>().sqrt()
        };
        unitality.push(MeanWithError { mean: 1.0 - norm, standard_error: se });
    }
    Ok(DdSeries { protocol, fidelity, unitality })
}

impl DdSeries {
    /// Tidy rows for `results.csv`.
    pub fn to_result(&self, gamma: f64, tau_c: f64, n_samples: usize, seed: u64) -> ExperimentResult {
        let mut out = ExperimentResult::default();
        for (metric, series) in [("fidelity", &self.fidelity), ("unitality", &self.unitality)] {
            for (k, v) in series.iter().enumerate() {
                out.push(ResultRow {
                    experiment: "dd".into(),
                    protocol: self.protocol.name().into(),
                    gamma,
                    tau_c,
                    step: k + 1,
                    metric: metric.into(),
                    value: v.mean,
                    standard_error: v.standard_error,
                    n_samples,
                    seed,
                });
            }
        }
        out
    }
}
