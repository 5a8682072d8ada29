//! Noise spectroscopy with square-wave modulation sequences.
//!
//! Sequence `k = 1..W/2` has modulation `f_k(m) = sign(cos(pi (k-1) m / W))`
//! for `m = 1..W` with `sign(0) = +1`, and applies an `X` gate when the sign
//! changes. The decay rate of sequence `k` is
//! `chi_k = (4/W) sum_j w_j |F_k(w_j)|^2 S(w_j)` on `w_j = 2 pi j / W`,
//! `j = 0..W/2-1`, with `w_0 = 1/2` and `w_j = 1` otherwise.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::nnls;
use crate::arma::PowerSpectrum;
use crate::error::{invalid, Result};
use crate::linalg::{self, CMatrix2, ONE, ZERO};
use crate::rng::{derive_seed, substream};
use crate::schwarma::SchwarmaModel;

#[derive(Debug, Clone, PartialEq)]
pub struct QnsDesign {
    w: usize,
    modulation: Vec<Vec<i8>>,
    /// `|F_k(2 pi j / W)|^2` for `j = 0..=W/2`.
    filter: Vec<Vec<f64>>,
}

fn modulation_row(k: usize, w: usize) -> Vec<i8> {
    (1..=w)
        .map(|m| {
            let c = (PI * (k - 1) as f64 * m as f64 / w as f64).cos();
            // cos hits zero exactly only up to rounding
            if c >= -1e-12 {
                1
            } else {
                -1
            }
        })
        .collect()
}

fn filter_row(f: &[i8], n_freq: usize) -> Vec<f64> {
    let w = f.len() as f64;
    (0..n_freq)
        .map(|j| {
            let omega = 2.0 * PI * j as f64 / w;
            let s: Complex64 =
                f.iter().enumerate().map(|(m, &v)| Complex64::from_polar(v as f64, -omega * (m + 1) as f64)).sum();
            s.norm_sqr()
        })
        .collect()
}

pub fn qns_build_design(w: usize) -> Result<QnsDesign> {
    if w < 4 || w % 2 != 0 {
        return Err(invalid(format!("sequence length must be even and >= 4, got {w}")));
    }
    let modulation: Vec<Vec<i8>> = (1..=w / 2).map(|k| modulation_row(k, w)).collect();
    let filter = modulation.iter().map(|f| filter_row(f, w / 2 + 1)).collect();
    Ok(QnsDesign { w, modulation, filter })
}

impl QnsDesign {
    pub fn sequence_length(&self) -> usize {
        self.w
    }

    pub fn n_sequences(&self) -> usize {
        self.modulation.len()
    }

    /// `W/2 x W` table of `f_k(m)`.
    pub fn modulation_table(&self) -> &[Vec<i8>] {
        &self.modulation
    }

    /// `W/2 x (W/2 + 1)` table of `|F_k(2 pi j / W)|^2`, `j = 0..=W/2`.
    pub fn filter_matrix(&self) -> &[Vec<f64>] {
        &self.filter
    }

    /// Regression frequencies `2 pi j / W`, `j = 0..W/2`.
    pub fn grid(&self) -> Vec<f64> {
        (0..self.w / 2).map(|j| 2.0 * PI * j as f64 / self.w as f64).collect()
    }

    /// Whether sequence `k` (0-based) applies an `X` at step `m`.
    pub fn pulses(&self, k: usize) -> Vec<bool> {
        let f = &self.modulation[k];
        (0..self.w).map(|m| if m == 0 { f[0] != 1 } else { f[m] != f[m - 1] }).collect()
    }

    /// Filter values of sequence `k` (0-based) on the regression grid.
    pub fn regression_filter(&self, k: usize) -> &[f64] {
        &self.filter[k][..self.w / 2]
    }

    /// `A[k][j]` with `chi = A S`.
    pub fn regression_matrix(&self) -> DMatrix<f64> {
        let n = self.w / 2;
        DMatrix::from_fn(n, n, |k, j| quadrature_weight(j, self.w) * self.filter[k][j])
    }

    pub fn condition_number(&self) -> f64 {
        let s = self.regression_matrix().singular_values();
        let max = s.max();
        let min = s.min();
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }
}

fn quadrature_weight(j: usize, w: usize) -> f64 {
    let base = 4.0 / w as f64;
    if j == 0 {
        0.5 * base
    } else {
        base
    }
}

fn check_grid(n: usize, spectrum: &PowerSpectrum) -> Result<usize> {
    if spectrum.len() != n {
        return Err(invalid(format!("spectrum has {} points, filter row has {n}", spectrum.len())));
    }
    let w = 2 * n;
    for (j, f) in spectrum.frequencies.iter().enumerate() {
        if (f - 2.0 * PI * j as f64 / w as f64).abs() > 1e-9 {
            return Err(invalid(format!("spectrum frequency {j} is {f}, expected 2 pi {j} / {w}")));
        }
    }
    Ok(w)
}

/// `1/2 (1 + exp(-chi))` with `chi` the quadrature of `|F|^2 S` on the grid.
pub fn survival_probability_analytic(filter_row: &[f64], spectrum: &PowerSpectrum) -> Result<f64> {
    let w = check_grid(filter_row.len(), spectrum)?;
    let chi: f64 =
        filter_row.iter().zip(&spectrum.values).enumerate().map(|(j, (f, s))| quadrature_weight(j, w) * f * s).sum();
    Ok(0.5 * (1.0 + (-chi).exp()))
}

/// Decay rates `chi_k` of every sequence for a spectrum on the design grid.
pub fn qns_forward_chi(design: &QnsDesign, spectrum: &PowerSpectrum) -> Result<Vec<f64>> {
    check_grid(design.w / 2, spectrum)?;
    let s = DVector::from_column_slice(&spectrum.values);
    Ok((design.regression_matrix() * s).iter().copied().collect())
}

/// Trajectory-averaged survival probabilities per sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalEstimates {
    pub mean: Vec<f64>,
    pub standard_error: Vec<f64>,
    pub n_traj: usize,
}

fn plus_state() -> CMatrix2 {
    let h = Complex64::new(0.5, 0.0);
    CMatrix2::new(h, h, h, h)
}

/// Exact survival probability of `|+>` for one noise realization.
fn survival_once(pulses: &[bool], model: &mut SchwarmaModel, rng: &mut crate::rng::SimRng) -> Result<f64> {
    let x = CMatrix2::new(ZERO, ONE, ONE, ZERO);
    let mut rho = plus_state();
    for &pulse in pulses {
        if pulse {
            rho = x * rho * x;
        }
        let k = model.step(rng)?;
        rho = k.operators().iter().map(linalg::to_fixed).fold(CMatrix2::zeros(), |acc, m| acc + m * rho * m.adjoint());
    }
    Ok((plus_state() * rho).trace().re)
}

/// Runs every sequence against `n_traj` fresh noise realizations: gate,
/// then one noise step, for each of the `W` steps. Sequence `k` and
/// trajectory `t` draw from substream `t` of `derive_seed(seed, k)`.
pub fn qns_simulate_survivals(
    design: &QnsDesign,
    model: &SchwarmaModel,
    n_traj: usize,
    seed: u64,
) -> Result<SurvivalEstimates> {
    if model.dim() != 2 {
        return Err(invalid("noise spectroscopy needs a single-qubit model"));
    }
    if n_traj == 0 {
        return Err(invalid("need at least one trajectory"));
    }
    let rows: Vec<(f64, f64)> = (0..design.n_sequences())
        .into_par_iter()
        .map(|k| -> Result<(f64, f64)> {
            let pulses = design.pulses(k);
            let child = derive_seed(seed, k as u64);
            let ps: Vec<f64> = (0..n_traj)
                .into_par_iter()
                .map(|t| {
                    let mut m = model.clone();
                    m.reset();
                    survival_once(&pulses, &mut m, &mut substream(child, t as u64))
                })
                .collect::<Result<_>>()?;
            let stats = crate::circuit::MeanWithError::of(&ps);
            Ok((stats.mean, stats.standard_error))
        })
        .collect::<Result<_>>()?;
    Ok(SurvivalEstimates {
        mean: rows.iter().map(|r| r.0).collect(),
        standard_error: rows.iter().map(|r| r.1).collect(),
        n_traj,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QnsReconstruction {
    pub spectrum: PowerSpectrum,
    /// Sequences (0-based) that entered the regression.
    pub used_rows: Vec<usize>,
    /// Sequences dropped because their survival was at or below 1/2.
    pub dropped_rows: Vec<usize>,
    pub condition_number: f64,
}

/// Nonnegative least-squares estimate of `S` from `chi_k = -ln(2 p_k - 1)`.
pub fn qns_reconstruct(p_hats: &[f64], design: &QnsDesign) -> Result<QnsReconstruction> {
    if p_hats.len() != design.n_sequences() {
        return Err(invalid(format!("{} survival estimates for {} sequences", p_hats.len(), design.n_sequences())));
    }
    let mut used = Vec::new();
    let mut dropped = Vec::new();
    for (k, &p) in p_hats.iter().enumerate() {
        if p > 0.5 {
            used.push(k);
        } else {
            dropped.push(k);
        }
    }
    if !dropped.is_empty() {
        log::warn!("dropping {} saturated sequences with survival <= 1/2: {dropped:?}", dropped.len());
    }
    let full = design.regression_matrix();
    let a = full.select_rows(&used);
    let chi = DVector::from_iterator(used.len(), used.iter().map(|&k| (-(2.0 * p_hats[k] - 1.0).ln()).max(0.0)));
    let s = nnls(&a, &chi)?;
    let sv = a.singular_values();
    let condition_number = if sv.is_empty() || sv.min() == 0.0 { f64::INFINITY } else { sv.max() / sv.min() };
    Ok(QnsReconstruction {
        spectrum: PowerSpectrum::new(design.grid(), s.iter().copied().collect())?,
        used_rows: used,
        dropped_rows: dropped,
        condition_number,
    })
}
