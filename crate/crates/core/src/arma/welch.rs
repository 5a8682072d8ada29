//! Welch periodogram averaging and its exact expectation for a known
//! autocovariance, used to validate generated trajectories.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{AutocovarianceSequence, PowerSpectrum};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchConfig {
    pub segment_len: usize,
    /// Samples shared by consecutive segments.
    pub overlap: usize,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self { segment_len: 1024, overlap: 512 }
    }
}

impl WelchConfig {
    /// Frequencies `2 pi j / L` for `j = 0..=L/2`.
    pub fn grid(&self) -> Vec<f64> {
        (0..=self.segment_len / 2).map(|j| 2.0 * PI * j as f64 / self.segment_len as f64).collect()
    }

    fn window(&self) -> Vec<f64> {
        let l = self.segment_len as f64;
        (0..self.segment_len).map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / l).cos()).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.segment_len < 2 || self.overlap >= self.segment_len {
            return Err(invalid(format!(
                "Welch segment length {} with overlap {} is invalid",
                self.segment_len, self.overlap
            )));
        }
        Ok(())
    }
}

/// Hann-windowed averaged periodogram, normalized so that unit-variance
/// white noise has expectation 1 at every frequency.
pub fn welch_psd(samples: &[f64], cfg: &WelchConfig) -> Result<PowerSpectrum> {
    cfg.validate()?;
    let l = cfg.segment_len;
    if samples.len() < l {
        return Err(invalid(format!("need at least {l} samples, have {}", samples.len())));
    }
    let w = cfg.window();
    let norm: f64 = w.iter().map(|x| x * x).sum();
    let step = l - cfg.overlap;
    let fft = FftPlanner::new().plan_fft_forward(l);
    let mut acc = vec![0.0; l / 2 + 1];
    let mut buf = vec![Complex64::new(0.0, 0.0); l];
    let mut count = 0usize;
    let mut start = 0;
    while start + l <= samples.len() {
        for (b, (x, wn)) in buf.iter_mut().zip(samples[start..start + l].iter().zip(&w)) {
            *b = Complex64::new(x * wn, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        count += 1;
        start += step;
    }
    let scale = 1.0 / (norm * count as f64);
    PowerSpectrum::new(cfg.grid(), acc.into_iter().map(|a| a * scale).collect())
}

/// Expectation of [`welch_psd`] for a process with autocovariance `r`
/// (lags `0..L`): the true spectrum smoothed by the window kernel.
pub fn expected_welch(r: &AutocovarianceSequence, cfg: &WelchConfig) -> Result<PowerSpectrum> {
    cfg.validate()?;
    let l = cfg.segment_len;
    if r.len() < l {
        return Err(invalid(format!("expected Welch spectrum needs {l} lags, have {}", r.len())));
    }
    let w = cfg.window();
    let norm: f64 = w.iter().map(|x| x * x).sum();
    let m = 2 * l;
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for k in 0..l {
        let cw: f64 = w.iter().zip(&w[k..]).map(|(a, b)| a * b).sum();
        let v = r.values[k] * cw / norm;
        buf[k] = Complex64::new(v, 0.0);
        if k > 0 {
            buf[m - k] = Complex64::new(v, 0.0);
        }
    }
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    // grid 2 pi j / L is every other point of the length-2L transform
    let values = (0..=l / 2).map(|j| buf[2 * j].re.max(0.0)).collect();
    PowerSpectrum::new(cfg.grid(), values)
}
