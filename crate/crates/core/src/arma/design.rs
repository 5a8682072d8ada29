use std::f64::consts::PI;

use super::{ArmaModel, Section};
use crate::error::{invalid, Result};

/// Pole radius used when a design asks for peaks "on" the unit circle.
pub const DEFAULT_POLE_RADIUS: f64 = 0.99;

/// Windowed-sinc FIR with unit gain in `[low, high]`.
///
/// A low-pass prototype with a Hamming window is designed for the band's
/// half-width and, when `low > 0`, cosine-modulated to the band center.
pub fn design_bandlimited_ma(num_taps: usize, low: f64, high: f64) -> Result<ArmaModel> {
    if num_taps < 2 {
        return Err(invalid("band-limited design needs at least 2 taps"));
    }
    if !(0.0 <= low && low < high && high <= PI) {
        return Err(invalid(format!("band edges must satisfy 0 <= low < high <= pi, got [{low}, {high}]")));
    }
    if low == 0.0 && high >= PI {
        // full band: a delayed impulse is the only exact all-pass FIR
        let mut taps = vec![0.0; num_taps];
        taps[(num_taps - 1) / 2] = 1.0;
        return ArmaModel::pure_ma(taps);
    }

    let (cutoff, center) = if low == 0.0 { (high, 0.0) } else { ((high - low) / 2.0, (high + low) / 2.0) };
    let mid = (num_taps - 1) as f64 / 2.0;
    let lowpass: Vec<f64> = (0..num_taps)
        .map(|n| {
            let t = n as f64 - mid;
            let sinc = if t == 0.0 { cutoff / PI } else { (cutoff * t).sin() / (PI * t) };
            let hamming = 0.54 - 0.46 * (2.0 * PI * n as f64 / (num_taps - 1) as f64).cos();
            sinc * hamming
        })
        .collect();

    let mut taps: Vec<f64> = if center == 0.0 {
        lowpass
    } else {
        lowpass
            .iter()
            .enumerate()
            .map(|(n, h)| 2.0 * h * (center * (n as f64 - mid)).cos())
            .collect()
    };
    let model = ArmaModel::pure_ma(taps.clone())?;
    let gain = model.spectrum_at(center).sqrt();
    if gain > 0.0 {
        taps.iter_mut().for_each(|t| *t /= gain);
    }
    ArmaModel::pure_ma(taps)
}

/// All-pole model with a conjugate pole pair at `radius * e^{+-i w}` for
/// every `w` in `pole_freqs`, one AR(2) section per pair.
pub fn design_multipole_ar(pole_freqs: &[f64], radius: f64) -> Result<ArmaModel> {
    if !(radius > 0.0 && radius < 1.0) {
        return Err(invalid(format!("pole radius must lie in (0, 1), got {radius}")));
    }
    if pole_freqs.is_empty() {
        return Ok(ArmaModel::white());
    }
    if let Some(w) = pole_freqs.iter().find(|w| !(0.0..=PI).contains(*w)) {
        return Err(invalid(format!("pole frequency {w} outside [0, pi]")));
    }
    let sections = pole_freqs
        .iter()
        .map(|&w| Section::new(vec![2.0 * radius * w.cos(), -radius * radius], vec![1.0]))
        .collect();
    ArmaModel::cascade(sections)
}

/// Cascade of first-order pole/zero sections approximating `w^-alpha`
/// over `[f_min, f_max]`.
///
/// The band is split into `num_sections` equal log-width cells. Each cell
/// holds one pole and one zero placed symmetrically about its log-center
/// and separated by `alpha/2` of the cell width, so the average log-log
/// slope across a cell is `-alpha`. One extra cell on each side of the band
/// keeps the slope from flattening near the edges, so the cascade has
/// `num_sections + 2` sections. Corner frequencies map to the z-plane as
/// `exp(-w)`.
pub fn design_one_over_f(alpha: f64, num_sections: usize, band: [f64; 2]) -> Result<ArmaModel> {
    let [f_min, f_max] = band;
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(invalid(format!("alpha must lie in (0, 2], got {alpha}")));
    }
    if !(f_min > 0.0) {
        return Err(invalid("1/f design needs f_min > 0"));
    }
    if !(f_max > f_min && f_max <= PI) {
        return Err(invalid(format!("1/f band [{f_min}, {f_max}] is invalid")));
    }
    if num_sections == 0 {
        return Err(invalid("1/f design needs at least one section"));
    }
    let cell = (f_max / f_min).log10() / num_sections as f64;
    let sections = (0..num_sections + 2)
        .map(|i| {
            let center = f_min.log10() + (i as f64 - 0.5) * cell;
            let pole = 10f64.powf(center - alpha * cell / 4.0);
            let zero = 10f64.powf(center + alpha * cell / 4.0);
            Section::new(vec![(-pole).exp()], vec![1.0, -(-zero).exp()])
        })
        .collect();
    ArmaModel::cascade(sections)
}
