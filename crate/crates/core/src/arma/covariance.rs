use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::ArmaModel;
use crate::error::{invalid, Error, Result};
use crate::io::{read_two_column_csv, write_two_column_csv};

/// FFT-grid dips below zero smaller than this fraction of the peak are
/// treated as round-off in a PSD target.
const PSD_DIP_TOLERANCE: f64 = 1e-8;
const LOG_FLOOR: f64 = 1e-14;

/// Autocovariance `r[0..=P]` of a stationary process sampled every `lag_unit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocovarianceSequence {
    pub values: Vec<f64>,
    pub lag_unit: f64,
}

impl AutocovarianceSequence {
    pub fn new(values: Vec<f64>, lag_unit: f64) -> Result<Self> {
        let r = Self { values, lag_unit };
        r.check_basic()?;
        Ok(r)
    }

    /// Samples a kernel `f(tau)` at `tau = k * lag_unit`.
    pub fn from_kernel(kernel: impl Fn(f64) -> f64, len: usize, lag_unit: f64) -> Self {
        Self { values: (0..len).map(|k| kernel(k as f64 * lag_unit)).collect(), lag_unit }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn variance(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    fn check_basic(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(invalid("autocovariance needs at least r[0]"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("autocovariance contains non-finite values"));
        }
        if self.values[0] < 0.0 {
            return Err(invalid(format!("r[0] = {} is negative", self.values[0])));
        }
        Ok(())
    }

    /// `|r[k]| <= r[0]` for every lag, with relative slack `tol`.
    pub fn is_bounded_by_variance(&self, tol: f64) -> bool {
        let r0 = self.variance();
        self.values.iter().all(|v| v.abs() <= r0 * (1.0 + tol) + f64::MIN_POSITIVE)
    }

    /// Levinson-Durbin PSD test of the Toeplitz matrix: every reflection
    /// coefficient must satisfy `|k| <= 1 + tol`.
    pub fn is_toeplitz_psd(&self, tol: f64) -> bool {
        let r = &self.values;
        if r.is_empty() || r[0] < 0.0 {
            return false;
        }
        if r[0] == 0.0 {
            return r.iter().all(|v| *v == 0.0);
        }
        let mut a: Vec<f64> = Vec::with_capacity(r.len());
        let mut err = r[0];
        for m in 1..r.len() {
            if err <= r[0] * 1e-13 {
                // singular: contributions beyond this order are determined
                return true;
            }
            let acc: f64 = r[m] - a.iter().enumerate().map(|(j, aj)| aj * r[m - 1 - j]).sum::<f64>();
            let k = acc / err;
            if k.abs() > 1.0 + tol {
                return false;
            }
            let prev = a.clone();
            for j in 0..a.len() {
                a[j] = prev[j] - k * prev[prev.len() - 1 - j];
            }
            a.push(k);
            err *= 1.0 - k * k;
        }
        true
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_two_column_csv(path, ("lag", "value"), self.values.iter().copied().enumerate())
    }

    pub fn read_csv(path: &Path, lag_unit: f64) -> Result<Self> {
        let rows = read_two_column_csv(path)?;
        Self::new(rows.into_iter().map(|(_, v)| v).collect(), lag_unit)
    }
}

/// Variance of the sum of `t` consecutive samples:
/// `sum_{|i|<t} (t - |i|) r[|i|]`.
pub fn integrated_variance(r: &AutocovarianceSequence, t: usize) -> Result<f64> {
    if t == 0 {
        return Ok(0.0);
    }
    if r.len() < t {
        return Err(invalid(format!("integrated variance over {t} steps needs {t} lags, have {}", r.len())));
    }
    let v = t as f64 * r.values[0]
        + 2.0 * (1..t).map(|i| (t - i) as f64 * r.values[i]).sum::<f64>();
    Ok(v.max(0.0))
}

/// Autocovariance of block sums of `t` fast samples, lags `0..n_slow`.
///
/// Equating `Var(sum of k+1 slow steps)` with `Var(sum of (k+1) t fast
/// steps)` gives a triangular system in the slow lags; its solution is the
/// block covariance `r_s[k] = sum_{|i|<t} (t - |i|) r_f[|k t + i|]`.
/// A result that is not Toeplitz-PSD is projected and a warning is logged.
pub fn convert_timescale(
    r_fast: &AutocovarianceSequence,
    t: usize,
    n_slow: usize,
) -> Result<AutocovarianceSequence> {
    if t == 0 {
        return Err(invalid("time-scale ratio must be at least 1"));
    }
    if n_slow == 0 {
        return Err(invalid("need at least one slow lag"));
    }
    let needed = n_slow * t;
    if r_fast.len() < needed {
        return Err(invalid(format!(
            "fast autocovariance has {} lags, conversion to {n_slow} slow lags at ratio {t} needs {needed}",
            r_fast.len()
        )));
    }
    let rf = &r_fast.values;
    let ti = t as isize;
    let values: Vec<f64> = (0..n_slow as isize)
        .map(|k| {
            (-(ti - 1)..ti)
                .map(|i| (ti - i.abs()) as f64 * rf[(k * ti + i).unsigned_abs()])
                .sum()
        })
        .collect();
    let out = AutocovarianceSequence { values, lag_unit: r_fast.lag_unit * t as f64 };
    if !out.is_bounded_by_variance(1e-12) || !out.is_toeplitz_psd(1e-10) {
        log::warn!("converted autocovariance is not positive semidefinite; projecting");
        return Ok(project_toeplitz_psd(&out));
    }
    Ok(out)
}

/// Nearest PSD sequence obtained by clipping the negative eigenvalues of
/// the symmetric circulant embedding.
pub fn project_toeplitz_psd(r: &AutocovarianceSequence) -> AutocovarianceSequence {
    let p = r.len() - 1;
    if p == 0 {
        return AutocovarianceSequence { values: vec![r.values[0].max(0.0)], lag_unit: r.lag_unit };
    }
    let m = 2 * p;
    let mut buf: Vec<Complex64> = (0..m)
        .map(|j| Complex64::new(r.values[if j <= p { j } else { m - j }], 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    buf.iter_mut().for_each(|v| *v = Complex64::new(v.re.max(0.0), 0.0));
    planner.plan_fft_inverse(m).process(&mut buf);
    AutocovarianceSequence {
        values: buf[..=p].iter().map(|v| v.re / m as f64).collect(),
        lag_unit: r.lag_unit,
    }
}

/// Minimum-phase MA model whose autocovariance reproduces `r`, by cepstral
/// factorization of the spectrum `S(w) = r[0] + 2 sum r[k] cos(k w)`.
pub fn fit_ma_to_autocovariance(r: &AutocovarianceSequence) -> Result<ArmaModel> {
    r.check_basic()?;
    let p = r.len() - 1;
    if r.values.iter().all(|v| *v == 0.0) {
        return ArmaModel::pure_ma(vec![0.0; p + 1]);
    }
    if p == 0 {
        return ArmaModel::pure_ma(vec![r.values[0].sqrt()]);
    }
    let m = (64 * (p + 1)).max(1 << 16).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(m);
    let inverse = planner.plan_fft_inverse(m);

    let mut spec = vec![Complex64::new(0.0, 0.0); m];
    spec[0] = Complex64::new(r.values[0], 0.0);
    for k in 1..=p {
        spec[k] = Complex64::new(r.values[k], 0.0);
        spec[m - k] = Complex64::new(r.values[k], 0.0);
    }
    forward.process(&mut spec);
    let s_max = spec.iter().map(|v| v.re).fold(f64::MIN, f64::max);
    let s_min = spec.iter().map(|v| v.re).fold(f64::MAX, f64::min);
    if s_max <= 0.0 || s_min < -PSD_DIP_TOLERANCE * s_max {
        return Err(Error::NotPositiveSemidefinite(format!(
            "target spectrum dips to {s_min:.3e} (peak {s_max:.3e})"
        )));
    }
    let floor = LOG_FLOOR * s_max;
    let mut cep: Vec<Complex64> =
        spec.iter().map(|v| Complex64::new(v.re.max(floor).ln(), 0.0)).collect();
    inverse.process(&mut cep);
    let scale = 1.0 / m as f64;
    // fold the even cepstrum onto its causal half
    let half = m / 2;
    for (n, c) in cep.iter_mut().enumerate() {
        let w = match n {
            0 => 0.5,
            n if n < half => 1.0,
            n if n == half => 0.5,
            _ => 0.0,
        };
        *c = Complex64::new(c.re * scale * w, 0.0);
    }
    forward.process(&mut cep);
    let mut h: Vec<Complex64> = cep.iter().map(|c| c.exp()).collect();
    inverse.process(&mut h);
    ArmaModel::pure_ma(h[..=p].iter().map(|v| v.re * scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: &[f64]) -> AutocovarianceSequence {
        AutocovarianceSequence::new(v.to_vec(), 1.0).unwrap()
    }

    /// Autocovariance of an MA model by direct tap correlation.
    fn tap_autocov(b: &[f64]) -> Vec<f64> {
        (0..b.len()).map(|k| b.iter().zip(&b[k..]).map(|(x, y)| x * y).sum()).collect()
    }

    /// Solves the triangular system row by row: row k equates the variance
    /// of k+1 slow steps with that of (k+1) t fast steps.
    fn triangular_oracle(rf: &AutocovarianceSequence, t: usize, n: usize) -> Vec<f64> {
        let mut rs: Vec<f64> = Vec::new();
        for k in 0..n {
            let target = integrated_variance(rf, (k + 1) * t).unwrap();
            // Var(k+1 slow) = (k+1) rs0 + 2 sum_{i=1}^{k} (k+1-i) rs_i
            let known: f64 = if k == 0 {
                0.0
            } else {
                (k + 1) as f64 * rs[0] + 2.0 * (1..k).map(|i| (k + 1 - i) as f64 * rs[i]).sum::<f64>()
            };
            if k == 0 {
                rs.push(target);
            } else {
                rs.push((target - known) / 2.0);
            }
        }
        rs
    }

    #[test]
    fn white_and_constant_integrated_variance() {
        let s2 = 1.7;
        assert!((integrated_variance(&seq(&[s2, 0.0, 0.0, 0.0, 0.0]), 5).unwrap() - 5.0 * s2).abs() < 1e-14);
        assert!((integrated_variance(&seq(&[s2; 5]), 5).unwrap() - 25.0 * s2).abs() < 1e-12);
        assert!(integrated_variance(&seq(&[1.0]), 3).is_err());
    }

    #[test]
    fn white_fast_noise_converts_to_white_slow() {
        let s2: f64 = 0.3;
        let mut v = vec![0.0; 40];
        v[0] = s2;
        let rs = convert_timescale(&seq(&v), 4, 10).unwrap();
        assert!((rs.values[0] - 4.0 * s2).abs() < 1e-15);
        assert!(rs.values[1..].iter().all(|x| x.abs() < 1e-15));
        assert_eq!(rs.lag_unit, 4.0);
    }

    #[test]
    fn fully_correlated_fast_noise() {
        let rs = convert_timescale(&seq(&[2.0; 8]), 4, 2).unwrap();
        assert!((rs.values[0] - 32.0).abs() < 1e-12);
    }

    #[test]
    fn unit_ratio_is_identity() {
        let r = seq(&[1.0, 0.6, 0.2, -0.1]);
        assert_eq!(convert_timescale(&r, 1, 4).unwrap().values, r.values);
    }

    #[test]
    fn conversion_matches_triangular_system() {
        let r = AutocovarianceSequence::from_kernel(|tau| (-tau * tau / 40.0).exp(), 80, 1.0);
        let t = 5;
        let rs = convert_timescale(&r, t, 12).unwrap();
        let oracle = triangular_oracle(&r, t, 12);
        for (a, b) in rs.values.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9 * rs.values[0], "{a} vs {b}");
        }
        assert!((integrated_variance(&r, t).unwrap() - convert_timescale(&r, t, 1).unwrap().values[0]).abs() < 1e-12);
    }

    #[test]
    fn short_fast_sequence_rejected() {
        assert!(convert_timescale(&seq(&[1.0, 0.5]), 2, 2).is_err());
    }

    #[test]
    fn white_fit_is_single_tap() {
        let m = fit_ma_to_autocovariance(&seq(&[4.0, 0.0, 0.0, 0.0])).unwrap();
        let b = m.ma_coeffs();
        assert!((b[0].abs() - 2.0).abs() < 1e-10);
        assert!(b[1..].iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn two_tap_quadratic() {
        // r = [2, 1] has its spectral zero on the unit circle, which limits
        // cepstral accuracy
        let b = fit_ma_to_autocovariance(&seq(&[2.0, 1.0])).unwrap().ma_coeffs();
        assert!((b[0] * b[0] + b[1] * b[1] - 2.0).abs() < 2e-3, "{b:?}");
        assert!((b[0] * b[1] - 1.0).abs() < 2e-3, "{b:?}");
    }

    #[test]
    fn round_trip_for_strictly_psd_targets() {
        for p in [1usize, 4, 9, 16] {
            let taps: Vec<f64> = (0..=p).map(|k| (0.7f64).powi(k as i32) * if k % 3 == 1 { -1.0 } else { 1.0 }).collect();
            let r = tap_autocov(&taps);
            let fitted = fit_ma_to_autocovariance(&seq(&r)).unwrap();
            let back = fitted.autocovariance(p, 1.0).values;
            let num: f64 = back.iter().zip(&r).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let den: f64 = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(num / den <= 1e-6, "P={p}: {}", num / den);
        }
    }

    #[test]
    fn non_psd_target_rejected() {
        assert!(fit_ma_to_autocovariance(&seq(&[1.0, 0.9, 0.0, -0.9])).is_err());
        assert!(!seq(&[1.0, 0.9, 0.0, -0.9]).is_toeplitz_psd(1e-10));
        assert!(seq(&[1.0, 0.5, 0.25]).is_toeplitz_psd(1e-10));
    }

    #[test]
    fn projection_yields_psd() {
        let bad = seq(&[1.0, 0.9, 0.0, -0.9]);
        let fixed = project_toeplitz_psd(&bad);
        assert!(fixed.is_toeplitz_psd(1e-9));
        let good = seq(&[1.0, 0.5, 0.1, 0.0, 0.0, 0.0]);
        let same = project_toeplitz_psd(&good);
        for (a, b) in same.values.iter().zip(&good.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
