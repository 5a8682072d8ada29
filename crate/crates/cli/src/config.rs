//! TOML run configuration. Every field has a default and unknown keys are
//! rejected. Frequencies are given as multiples of pi.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use schwarma::arma::{design_bandlimited_ma, design_multipole_ar, design_one_over_f, ArmaModel};
use schwarma::experiments::{DdProtocol, LzConfig, SurfaceSweepConfig};
use schwarma::trotter::Spin;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub run: RunSection,
    pub spectrum: SpectrumSection,
    pub qns: QnsSection,
    pub dd: DdSection,
    pub surface: SurfaceSection,
    pub lz: LzSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub out: PathBuf,
    /// Fine Trotter steps per gate length.
    pub steps_per_gate: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 20190601, out: PathBuf::from("out"), steps_per_gate: 100 }
    }
}

/// ARMA model selection shared by the `spectrum` and `qns` sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    White,
    Bandlimited { taps: usize, low: f64, high: f64 },
    Multipole { poles: Vec<f64>, radius: f64 },
    OneOverF { alpha: f64, sections: usize, band: [f64; 2] },
    Arma { ar: Vec<f64>, ma: Vec<f64> },
}

impl ModelSpec {
    pub fn build(&self) -> schwarma::Result<ArmaModel> {
        match self {
            Self::White => Ok(ArmaModel::white()),
            Self::Bandlimited { taps, low, high } => design_bandlimited_ma(*taps, low * PI, high * PI),
            Self::Multipole { poles, radius } => {
                design_multipole_ar(&poles.iter().map(|p| p * PI).collect::<Vec<_>>(), *radius)
            }
            Self::OneOverF { alpha, sections, band } => design_one_over_f(*alpha, *sections, band.map(|b| b * PI)),
            Self::Arma { ar, ma } => ArmaModel::new(ar.clone(), ma.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub model: ModelSpec,
    pub n_freq: usize,
    /// When positive, also generate this many samples and write their
    /// Welch estimate beside the model spectrum.
    pub samples: usize,
    pub segment_len: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self { model: ModelSpec::White, n_freq: 513, samples: 0, segment_len: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QnsSection {
    pub w: usize,
    pub n_traj: usize,
    /// Standard deviation of the ARMA driving noise.
    pub scale: f64,
    pub model: ModelSpec,
}

impl Default for QnsSection {
    fn default() -> Self {
        Self { w: 128, n_traj: 1000, scale: 0.03, model: ModelSpec::Bandlimited { taps: 128, low: 0.0, high: 0.25 } }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DdNoiseKind {
    Multiaxis,
    AmplitudeDamping,
    Static,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DdSection {
    pub noise: DdNoiseKind,
    pub gamma: f64,
    pub tau_c: f64,
    /// Per-axis standard deviation for `static` noise.
    pub static_sigma: [f64; 3],
    pub protocols: Vec<DdProtocol>,
    pub n_steps: usize,
    pub n_samples: usize,
}

impl Default for DdSection {
    fn default() -> Self {
        Self {
            noise: DdNoiseKind::Multiaxis,
            gamma: 0.01,
            tau_c: 3.0,
            static_sigma: [0.0, 0.0, 0.3],
            protocols: DdProtocol::ALL.to_vec(),
            n_steps: 64,
            n_samples: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurfaceSection {
    pub gammas: Vec<f64>,
    pub tau_cs: Vec<f64>,
    pub n_samples: usize,
}

impl Default for SurfaceSection {
    fn default() -> Self {
        Self { gammas: vec![1e-6, 1e-4], tau_cs: vec![1.0, 32.0], n_samples: 1000 }
    }
}

impl SurfaceSection {
    pub fn sweep_config(&self, run: &RunSection) -> SurfaceSweepConfig {
        SurfaceSweepConfig {
            gammas: self.gammas.clone(),
            tau_cs: self.tau_cs.clone(),
            n_samples: self.n_samples,
            steps_per_gate: run.steps_per_gate,
            seed: run.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LzSection {
    pub delta: f64,
    pub alpha: f64,
    pub total_time: f64,
    pub tau_c: f64,
    pub f0: f64,
    pub dt: f64,
    pub kappa: usize,
    pub n_samples: usize,
    pub spin: Spin,
}

impl Default for LzSection {
    fn default() -> Self {
        Self {
            delta: 0.5,
            alpha: 1.0,
            total_time: 10.0,
            tau_c: 0.25,
            f0: 0.003,
            dt: 5e-4,
            kappa: 100,
            n_samples: 1000,
            spin: Spin::Half,
        }
    }
}

impl LzSection {
    pub fn lz_config(&self, seed: u64) -> LzConfig {
        LzConfig {
            delta: self.delta,
            alpha: self.alpha,
            total_time: self.total_time,
            tau_c: self.tau_c,
            f0: self.f0,
            dt: self.dt,
            kappa: self.kappa,
            n_samples: self.n_samples,
            seed,
            spin: self.spin,
        }
    }
}
