//! Landau–Zener sweeps under slow transverse noise: full Trotter reference
//! against the partitioned drive with coarse SchWARMA steps.
//!
//! The sweep runs over `t in [-T/2, T/2]` from the instantaneous ground
//! state; the noise couples through `2 S_x` (`sigma_x` for spin one-half).

use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::MeanWithError;
use crate::error::{invalid, Result};
use crate::linalg::CMatrix;
use crate::quantum::DensityMatrix;
use crate::rng::{derive_seed, substream};
use crate::schwarma::{ChannelFamily, NoiseSource, SchwarmaModel, TangentVector};
use crate::trotter::{
    continuous_drive_schwarma, ideal_segments, lz_hamiltonian, spin_operators, trotter_evolve, GaussianProcessSampler,
    GaussianProcessSpec, Spin,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LzConfig {
    pub delta: f64,
    pub alpha: f64,
    /// Sweep duration `T_0`.
    pub total_time: f64,
    /// Noise correlation time `tau_0`.
    pub tau_c: f64,
    /// Noise variance `f(0)`.
    pub f0: f64,
    pub dt: f64,
    /// Fine steps per coarse SchWARMA step.
    pub kappa: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub spin: Spin,
}

/// Transition probabilities of both simulators and the wall-clock time of
/// their noisy parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LzComparison {
    pub trotter: MeanWithError,
    pub schwarma: MeanWithError,
    pub noiseless: f64,
    pub trotter_seconds: f64,
    pub schwarma_seconds: f64,
}

impl LzComparison {
    pub fn pooled_standard_error(&self) -> f64 {
        self.trotter.standard_error.hypot(self.schwarma.standard_error)
    }

    pub fn speedup(&self) -> f64 {
        self.trotter_seconds / self.schwarma_seconds
    }
}

fn ground_state(h: &CMatrix) -> Vec<Complex64> {
    let real = DMatrix::from_fn(h.nrows(), h.ncols(), |r, c| h[(r, c)].re);
    let eig = SymmetricEigen::new(real);
    let i = eig.eigenvalues.imin();
    eig.eigenvectors.column(i).iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

fn population(psi: &DVector<Complex64>, g: &[Complex64]) -> f64 {
    g.iter().zip(psi.iter()).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm_sqr()
}

fn noise_model(op: &CMatrix, source: NoiseSource, spin: Spin) -> Result<SchwarmaModel> {
    match spin {
        // sigma_x direction in closed form
        Spin::Half => SchwarmaModel::multiaxis(source, NoiseSource::silent(), NoiseSource::silent()),
        Spin::One => SchwarmaModel::new(ChannelFamily::Custom(vec![TangentVector::hamiltonian(op)?]), vec![source]),
    }
}

pub fn lz_compare(cfg: &LzConfig) -> Result<LzComparison> {
    if cfg.kappa == 0 || cfg.n_samples == 0 {
        return Err(invalid("Landau-Zener run needs kappa >= 1 and at least one sample"));
    }
    if !(cfg.total_time > 0.0 && cfg.dt > 0.0) {
        return Err(invalid("Landau-Zener run needs positive duration and step"));
    }
    if !(cfg.f0 >= 0.0) {
        return Err(invalid("noise variance must be nonnegative"));
    }
    let n_coarse = (cfg.total_time / (cfg.kappa as f64 * cfg.dt)).round() as usize;
    if n_coarse == 0 {
        return Err(invalid("sweep is shorter than one coarse step"));
    }
    let n_fine = n_coarse * cfg.kappa;
    let t0 = -0.5 * n_fine as f64 * cfg.dt;
    let h = |t: f64| lz_hamiltonian(cfg.delta, cfg.alpha, t, cfg.spin);
    let psi0 = DVector::from_vec(ground_state(&h(t0)));
    let g_end = ground_state(&h(-t0));
    let op = spin_operators(cfg.spin).0 * Complex64::new(2.0, 0.0);
    let gamma = cfg.f0 * 2.0 * std::f64::consts::PI.sqrt() * cfg.tau_c;
    let spec = GaussianProcessSpec::new(gamma, cfg.tau_c, cfg.dt)?;

    let ideal = trotter_evolve(&h, &[], &[], t0, cfg.dt, n_fine)?;
    let noiseless = 1.0 - population(&(&ideal * &psi0), &g_end);

    let sampler = GaussianProcessSampler::new(&spec, n_fine)?;
    let trotter_seed = derive_seed(cfg.seed, 0);
    let start = Instant::now();
    let p_t: Vec<f64> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let eta = sampler.sample(&mut substream(trotter_seed, t as u64));
            let u = trotter_evolve(&h, std::slice::from_ref(&op), &[eta], t0, cfg.dt, n_fine)?;
            Ok(1.0 - population(&(u * &psi0), &g_end))
        })
        .collect::<Result<_>>()?;
    let trotter_seconds = start.elapsed().as_secs_f64();

    let segments = ideal_segments(&h, t0, cfg.dt, cfg.kappa, n_coarse);
    let model = noise_model(&op, spec.matched_source(cfg.kappa)?, cfg.spin)?;
    let rho0 = DensityMatrix::pure(psi0.as_slice())?;
    let rho_g = DensityMatrix::pure(&g_end)?;
    let schwarma_seed = derive_seed(cfg.seed, 1);
    let start = Instant::now();
    let p_s: Vec<f64> = (0..cfg.n_samples)
        .into_par_iter()
        .map(|t| -> Result<f64> {
            let mut m = model.clone();
            m.reset();
            let s = continuous_drive_schwarma(&segments, &mut m, n_coarse, &mut substream(schwarma_seed, t as u64))?;
            let rho = s.apply(&rho0)?;
            Ok(1.0 - (rho_g.matrix() * rho).trace().re)
        })
        .collect::<Result<_>>()?;
    let schwarma_seconds = start.elapsed().as_secs_f64();

    Ok(LzComparison {
        trotter: MeanWithError::of(&p_t),
        schwarma: MeanWithError::of(&p_s),
        noiseless,
        trotter_seconds,
        schwarma_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(spin: Spin) -> LzConfig {
        LzConfig {
            delta: 0.5,
            alpha: 1.0,
            total_time: 10.0,
            tau_c: 0.25,
            f0: 0.0,
            dt: 5e-3,
            kappa: 10,
            n_samples: 2,
            seed: 4,
            spin,
        }
    }

    #[test]
    fn noiseless_transition_near_landau_zener_formula() {
        // finite sweep window; the asymptotic formula holds to a few percent
        let c = lz_compare(&base(Spin::Half)).unwrap();
        let want = (-std::f64::consts::PI * 0.25).exp();
        assert!((c.noiseless - want).abs() < 0.05, "{} vs {want}", c.noiseless);
        assert!((c.trotter.mean - c.noiseless).abs() < 1e-12);
        assert!((c.schwarma.mean - c.noiseless).abs() < 1e-10);
    }

    #[test]
    fn spin_one_noiseless_agreement() {
        let c = lz_compare(&base(Spin::One)).unwrap();
        assert!((c.schwarma.mean - c.trotter.mean).abs() < 1e-10);
    }
}
