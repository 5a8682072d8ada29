//! Classical ARMA noise: trajectory generation, spectra, filter design and
//! autocovariance manipulation.
//!
//! The recursion is `y[k] = sum_i a[i] y[k-i] + sum_j b[j] x[k-j]`, so the
//! power spectrum is `|B(e^{-iw})|^2 / |1 - sum_i a[i] e^{-iiw}|^2`.
//!
//! A model is stored as a cascade of sections. High-order designs (the 1/f
//! cascade in particular) have poles very close to the unit circle, and
//! multiplying their polynomials out loses most of the precision, so the
//! recursion and the spectrum are both evaluated section by section.

mod covariance;
mod design;
mod welch;

pub use covariance::{
    convert_timescale, fit_ma_to_autocovariance, integrated_variance, project_toeplitz_psd,
    AutocovarianceSequence,
};
pub use design::{design_bandlimited_ma, design_multipole_ar, design_one_over_f, DEFAULT_POLE_RADIUS};
pub use welch::{expected_welch, welch_psd, WelchConfig};

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io::write_two_column_csv;

/// Default number of points of [`PowerSpectrum::uniform_grid`].
pub const DEFAULT_GRID_POINTS: usize = 1024;

/// One factor of a cascade: `B(z) / A(z)` with real coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
}

impl Section {
    pub fn new(ar: Vec<f64>, ma: Vec<f64>) -> Self {
        Self { ar, ma }
    }

    fn response(&self, omega: f64) -> Complex64 {
        let num = poly_at(&self.ma, omega, 0);
        let den = Complex64::new(1.0, 0.0) - poly_at(&self.ar, omega, 1);
        num / den
    }
}

/// `sum_k c[k] e^{-i (k + offset) w}`
fn poly_at(c: &[f64], omega: f64, offset: usize) -> Complex64 {
    c.iter()
        .enumerate()
        .map(|(k, &v)| v * Complex64::from_polar(1.0, -omega * (k + offset) as f64))
        .sum()
}

/// Sliding window over the most recent values, newest first, backed by a
/// doubled buffer so the window is always one contiguous slice.
#[derive(Debug, Clone)]
struct History {
    buf: Vec<Complex64>,
    len: usize,
    head: usize,
}

impl History {
    fn new(len: usize) -> Self {
        Self { buf: vec![Complex64::new(0.0, 0.0); 2 * len], len, head: 0 }
    }

    fn push(&mut self, v: Complex64) {
        if self.len == 0 {
            return;
        }
        self.head = if self.head == 0 { self.len - 1 } else { self.head - 1 };
        self.buf[self.head] = v;
        self.buf[self.head + self.len] = v;
    }

    fn window(&self) -> &[Complex64] {
        &self.buf[self.head..self.head + self.len]
    }

    fn clear(&mut self) {
        self.buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        self.head = 0;
    }
}

fn dot(c: &[f64], w: &[Complex64]) -> Complex64 {
    c.iter().zip(w).map(|(&a, &b)| b * a).sum()
}

#[derive(Debug, Clone)]
struct SectionState {
    inputs: History,
    outputs: History,
}

impl SectionState {
    fn new(s: &Section) -> Self {
        Self { inputs: History::new(s.ma.len()), outputs: History::new(s.ar.len()) }
    }

    fn advance(&mut self, s: &Section, x: Complex64) -> Complex64 {
        self.inputs.push(x);
        let y = dot(&s.ma, self.inputs.window()) + dot(&s.ar, self.outputs.window());
        self.outputs.push(y);
        y
    }
}

/// A stable ARMA model with its own recursion state.
///
/// Cloning copies the history; parallel trials should clone a freshly
/// reset model and drive it from their own RNG substream.
#[derive(Debug, Clone)]
pub struct ArmaModel {
    sections: Vec<Section>,
    state: Vec<SectionState>,
    burn_in: usize,
    primed: bool,
}

impl ArmaModel {
    /// Single-section model from `a` (AR, length p) and `b` (MA, length q+1).
    pub fn new(ar: Vec<f64>, ma: Vec<f64>) -> Result<Self> {
        Self::cascade(vec![Section::new(ar, ma)])
    }

    pub fn white() -> Self {
        Self::new(vec![], vec![1.0]).expect("white noise is stable")
    }

    pub fn pure_ma(ma: Vec<f64>) -> Result<Self> {
        Self::new(vec![], ma)
    }

    /// Product of the section transfer functions, applied in order.
    pub fn cascade(sections: Vec<Section>) -> Result<Self> {
        if sections.is_empty() {
            return Err(invalid("an ARMA cascade needs at least one section"));
        }
        for (i, s) in sections.iter().enumerate() {
            if s.ma.is_empty() {
                return Err(invalid(format!("section {i} has no MA coefficients")));
            }
            if s.ar.iter().chain(&s.ma).any(|v| !v.is_finite()) {
                return Err(invalid(format!("section {i} has non-finite coefficients")));
            }
            if let Some(k) = first_unstable_reflection(&s.ar) {
                return Err(Error::Unstable(format!(
                    "section {i}: AR polynomial has a root on or outside the unit circle \
                     (reflection coefficient {k:.6})"
                )));
            }
        }
        let state = sections.iter().map(SectionState::new).collect();
        let burn_in = default_burn_in(&sections);
        Ok(Self { sections, state, burn_in, primed: false })
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    /// Expanded AR coefficients `a[1..=p]` of the full transfer function.
    pub fn ar_coeffs(&self) -> Vec<f64> {
        let den = self
            .sections
            .iter()
            .fold(vec![1.0], |acc, s| {
                let mut d = vec![1.0];
                d.extend(s.ar.iter().map(|a| -a));
                convolve(&acc, &d)
            });
        let mut ar: Vec<f64> = den[1..].iter().map(|d| -d).collect();
        while ar.last() == Some(&0.0) {
            ar.pop();
        }
        ar
    }

    /// Expanded MA coefficients `b[0..=q]` of the full transfer function.
    pub fn ma_coeffs(&self) -> Vec<f64> {
        self.sections.iter().fold(vec![1.0], |acc, s| convolve(&acc, &s.ma))
    }

    /// `(p, q)` summed over sections.
    pub fn order(&self) -> (usize, usize) {
        self.sections
            .iter()
            .fold((0, 0), |(p, q), s| (p + s.ar.len(), q + s.ma.len() - 1))
    }

    pub fn is_pure_ma(&self) -> bool {
        self.sections.iter().all(|s| s.ar.is_empty())
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn with_burn_in(mut self, n: usize) -> Self {
        self.burn_in = n;
        self
    }

    pub fn set_burn_in(&mut self, n: usize) {
        self.burn_in = n;
    }

    /// Zeroes the history; the next draw repeats the burn-in.
    pub fn reset(&mut self) {
        for st in &mut self.state {
            st.inputs.clear();
            st.outputs.clear();
        }
        self.primed = false;
    }

    /// Feeds one driving input through the cascade, bypassing burn-in.
    pub fn filter_one(&mut self, x: Complex64) -> Complex64 {
        self.sections
            .iter()
            .zip(self.state.iter_mut())
            .fold(x, |v, (s, st)| st.advance(s, v))
    }

    /// Real trajectory driven by i.i.d. `N(0, noise_scale^2)` inputs.
    pub fn generate<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R, noise_scale: f64) -> Vec<f64> {
        self.generate_with(n, rng, |r| Complex64::new(noise_scale * r.sample::<f64, _>(StandardNormal), 0.0))
            .into_iter()
            .map(|y| y.re)
            .collect()
    }

    /// Complex trajectory driven by circular Gaussian inputs with
    /// `E|x|^2 = noise_scale^2`.
    pub fn generate_complex<R: Rng + ?Sized>(
        &mut self,
        n: usize,
        rng: &mut R,
        noise_scale: f64,
    ) -> Vec<Complex64> {
        let s = noise_scale / 2f64.sqrt();
        self.generate_with(n, rng, |r| {
            Complex64::new(s * r.sample::<f64, _>(StandardNormal), s * r.sample::<f64, _>(StandardNormal))
        })
    }

    /// Trajectory driven by an arbitrary input sampler.
    pub fn generate_with<R, F>(&mut self, n: usize, rng: &mut R, mut sampler: F) -> Vec<Complex64>
    where
        R: Rng + ?Sized,
        F: FnMut(&mut R) -> Complex64,
    {
        if n == 0 {
            return Vec::new();
        }
        self.prime_with(rng, &mut sampler);
        (0..n).map(|_| {
            let x = sampler(rng);
            self.filter_one(x)
        })
        .collect()
    }

    /// One real output, same stream as [`generate`](Self::generate).
    pub fn next_real<R: Rng + ?Sized>(&mut self, rng: &mut R, noise_scale: f64) -> f64 {
        self.generate(1, rng, noise_scale)[0]
    }

    /// One complex output, same stream as [`generate_complex`](Self::generate_complex).
    pub fn next_complex<R: Rng + ?Sized>(&mut self, rng: &mut R, noise_scale: f64) -> Complex64 {
        self.generate_complex(1, rng, noise_scale)[0]
    }

    fn prime_with<R, F>(&mut self, rng: &mut R, sampler: &mut F)
    where
        R: Rng + ?Sized,
        F: FnMut(&mut R) -> Complex64,
    {
        if self.primed {
            return;
        }
        for _ in 0..self.burn_in {
            let x = sampler(rng);
            self.filter_one(x);
        }
        self.primed = true;
    }

    /// Transfer function `H(e^{iw}) = B / A` with the recursion's sign convention.
    pub fn transfer(&self, omega: f64) -> Complex64 {
        self.sections.iter().map(|s| s.response(omega)).product()
    }

    /// `|H(e^{iw})|^2` for unit-variance driving noise.
    pub fn spectrum_at(&self, omega: f64) -> f64 {
        self.sections.iter().map(|s| s.response(omega).norm_sqr()).product()
    }

    pub fn power_spectrum(&self, frequencies: &[f64]) -> PowerSpectrum {
        PowerSpectrum {
            frequencies: frequencies.to_vec(),
            values: frequencies.iter().map(|&w| self.spectrum_at(w)).collect(),
        }
    }

    /// Impulse response `h[0..n]` of the cascade.
    pub fn impulse_response(&self, n: usize) -> Vec<f64> {
        let mut m = self.clone();
        m.reset();
        (0..n)
            .map(|k| m.filter_one(Complex64::new(if k == 0 { 1.0 } else { 0.0 }, 0.0)).re)
            .collect()
    }

    /// Theoretical autocovariance `r[0..=max_lag]` for driving variance
    /// `noise_scale^2`, from the impulse response.
    pub fn autocovariance(&self, max_lag: usize, noise_scale: f64) -> AutocovarianceSequence {
        let len = self.impulse_length().max(max_lag + 1);
        let h = self.impulse_response(len);
        let s2 = noise_scale * noise_scale;
        let values = (0..=max_lag)
            .map(|k| s2 * h.iter().zip(&h[k..]).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        AutocovarianceSequence { values, lag_unit: 1.0 }
    }

    /// Length after which the impulse response is negligible.
    fn impulse_length(&self) -> usize {
        let (_, q) = self.order();
        let r = self.max_pole_radius();
        let decay = if r > 0.0 { (1e-17f64.ln() / r.ln()).ceil() as usize } else { 0 };
        (q + 1 + decay).min(1 << 22)
    }

    /// Largest pole modulus over all sections.
    pub fn max_pole_radius(&self) -> f64 {
        self.sections.iter().map(|s| pole_radius(&s.ar)).fold(0.0, f64::max)
    }
}

fn default_burn_in(sections: &[Section]) -> usize {
    let (p, q) = sections
        .iter()
        .fold((0, 0), |(p, q), s| (p + s.ar.len(), q + s.ma.len() - 1));
    if p == 0 {
        return q;
    }
    let r = sections.iter().map(|s| pole_radius(&s.ar)).fold(0.0, f64::max);
    // the slowest pole must decay by 1e-6 before output starts
    let settle = if r > 0.0 { (1e-6f64.ln() / r.ln()).ceil() as usize } else { 0 };
    64.max(10 * (p + q + 1)).max(settle + q)
}

/// Returns the first reflection coefficient with `|k| >= 1` in the
/// Schur-Cohn step-down of `1 - sum a[i] z^-i`, or `None` when stable.
fn first_unstable_reflection(ar: &[f64]) -> Option<f64> {
    let mut c: Vec<f64> = std::iter::once(1.0).chain(ar.iter().map(|a| -a)).collect();
    while c.len() > 1 {
        let m = c.len() - 1;
        let k = c[m];
        if k.abs() >= 1.0 - 1e-14 {
            return Some(k);
        }
        let scale = 1.0 - k * k;
        c = (0..m).map(|i| (c[i] - k * c[m - i]) / scale).collect();
    }
    None
}

fn pole_radius(ar: &[f64]) -> f64 {
    match ar.len() {
        0 => 0.0,
        1 => ar[0].abs(),
        2 => {
            // z^2 - a1 z - a2
            let disc = ar[0] * ar[0] + 4.0 * ar[1];
            if disc >= 0.0 {
                let s = disc.sqrt();
                ((ar[0] + s) / 2.0).abs().max(((ar[0] - s) / 2.0).abs())
            } else {
                (-ar[1]).sqrt()
            }
        }
        p => {
            let mut companion = DMatrix::<f64>::zeros(p, p);
            for (j, &a) in ar.iter().enumerate() {
                companion[(0, j)] = a;
            }
            for i in 1..p {
                companion[(i, i - 1)] = 1.0;
            }
            companion.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
        }
    }
}

pub(crate) fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Spectrum samples on a normalized angular-frequency grid in `[0, pi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    pub frequencies: Vec<f64>,
    pub values: Vec<f64>,
}

impl PowerSpectrum {
    pub fn new(frequencies: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if frequencies.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: frequencies.len(), found: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0)) {
            return Err(invalid(format!("spectrum value {v} is negative or NaN")));
        }
        Ok(Self { frequencies, values })
    }

    /// `n` uniformly spaced points covering `[0, pi]` inclusive.
    pub fn uniform_grid(n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![0.0],
            _ => (0..n).map(|i| PI * i as f64 / (n - 1) as f64).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_two_column_csv(
            path,
            ("omega", "value"),
            self.frequencies
                .iter()
                .map(|w| crate::io::format_decimal(*w))
                .zip(self.values.iter().copied()),
        )
    }
}

/// Writes an `index,value` trajectory CSV.
pub fn write_trajectory_csv(path: &Path, samples: &[f64]) -> Result<()> {
    write_two_column_csv(path, ("index", "value"), samples.iter().copied().enumerate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn feed(model: &mut ArmaModel, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| model.filter_one(Complex64::new(x, 0.0)).re).collect()
    }

    #[test]
    fn identity_filter_passes_inputs() {
        let mut m = ArmaModel::white();
        assert_eq!(feed(&mut m, &[0.3, -1.1]), vec![0.3, -1.1]);
    }

    #[test]
    fn zero_filter_outputs_zero() {
        let mut m = ArmaModel::pure_ma(vec![0.0]).unwrap();
        let mut rng = seeded(1);
        assert!(m.generate(50, &mut rng, 1.0).iter().all(|&y| y == 0.0));
    }

    #[test]
    fn ar1_hand_unrolled() {
        let mut m = ArmaModel::new(vec![0.5], vec![1.0]).unwrap();
        assert_eq!(feed(&mut m, &[1.0, 0.0, 0.0]), vec![1.0, 0.5, 0.25]);
    }

    #[test]
    fn arma_recursion_matches_direct_sum() {
        let a = [0.4, -0.2];
        let b = [1.0, 0.3, -0.5];
        let xs = [0.7, -1.2, 0.4, 2.0, -0.1, 0.9, 0.0, -0.6];
        let mut expected = vec![0.0; xs.len()];
        for k in 0..xs.len() {
            let mut y = 0.0;
            for (i, ai) in a.iter().enumerate() {
                if k > i {
                    y += ai * expected[k - i - 1];
                }
            }
            for (j, bj) in b.iter().enumerate() {
                if k >= j {
                    y += bj * xs[k - j];
                }
            }
            expected[k] = y;
        }
        let mut m = ArmaModel::new(a.to_vec(), b.to_vec()).unwrap();
        let got = feed(&mut m, &xs);
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-14);
        }
    }

    #[test]
    fn cascade_equals_expanded_model() {
        let s1 = Section::new(vec![0.9], vec![1.0, -0.5]);
        let s2 = Section::new(vec![0.3, -0.4], vec![2.0]);
        let cascade = ArmaModel::cascade(vec![s1, s2]).unwrap();
        let flat = ArmaModel::new(cascade.ar_coeffs(), cascade.ma_coeffs()).unwrap();
        let hc = cascade.impulse_response(40);
        let hf = flat.impulse_response(40);
        for (a, b) in hc.iter().zip(&hf) {
            assert!((a - b).abs() < 1e-12);
        }
        for w in [0.0, 0.3, 1.7, PI] {
            assert!((cascade.spectrum_at(w) - flat.spectrum_at(w)).abs() < 1e-10 * flat.spectrum_at(w).max(1.0));
        }
    }

    #[test]
    fn rejects_unstable_and_nonfinite() {
        assert!(matches!(ArmaModel::new(vec![1.0], vec![1.0]), Err(Error::Unstable(_))));
        assert!(matches!(ArmaModel::new(vec![-1.2], vec![1.0]), Err(Error::Unstable(_))));
        // roots 1.25 and 0.5 of z^2 - 1.75 z + 0.625
        assert!(ArmaModel::new(vec![1.75, -0.625], vec![1.0]).is_err());
        assert!(ArmaModel::new(vec![1.5, -0.56], vec![1.0]).is_ok());
        assert!(ArmaModel::new(vec![], vec![f64::NAN]).is_err());
        assert!(ArmaModel::new(vec![], vec![]).is_err());
    }

    #[test]
    fn spectrum_examples() {
        let white = ArmaModel::white();
        assert!(PowerSpectrum::uniform_grid(16).iter().all(|&w| (white.spectrum_at(w) - 1.0).abs() < 1e-15));
        let ma = ArmaModel::pure_ma(vec![1.0, 1.0]).unwrap();
        assert!((ma.spectrum_at(0.0) - 4.0).abs() < 1e-14);
        assert!(ma.spectrum_at(PI) < 1e-28);
        let ar = ArmaModel::new(vec![0.5], vec![1.0]).unwrap();
        assert!((ar.spectrum_at(0.0) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn autocovariance_of_ar1() {
        let phi: f64 = 0.8;
        let m = ArmaModel::new(vec![phi], vec![1.0]).unwrap();
        let r = m.autocovariance(5, 1.0);
        for k in 0..=5 {
            let expected = phi.powi(k as i32) / (1.0 - phi * phi);
            assert!((r.values[k] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_calls_continue_the_realization() {
        let base = ArmaModel::new(vec![0.6], vec![1.0, 0.2]).unwrap();
        let mut whole = base.clone();
        let mut parts = base.clone();
        let mut r1 = seeded(9);
        let mut r2 = seeded(9);
        let all = whole.generate(30, &mut r1, 0.5);
        let mut split = parts.generate(10, &mut r2, 0.5);
        split.extend(parts.generate(20, &mut r2, 0.5));
        assert_eq!(all, split);
        assert!(parts.generate(0, &mut r2, 0.5).is_empty());
    }

    #[test]
    fn burn_in_defaults() {
        assert_eq!(ArmaModel::pure_ma(vec![1.0; 5]).unwrap().burn_in(), 4);
        assert_eq!(ArmaModel::new(vec![0.5], vec![1.0]).unwrap().burn_in(), 64);
        let slow = ArmaModel::new(vec![0.999], vec![1.0]).unwrap();
        assert!(slow.burn_in() > 13_000);
    }
}
