//! Cross-module invariant suite behind `schwarma validate`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use schwarma::arma::{
    convert_timescale, design_bandlimited_ma, design_multipole_ar, expected_welch, welch_psd, ArmaModel,
    AutocovarianceSequence, WelchConfig,
};
use schwarma::circuit::MeanWithError;
use schwarma::experiments::{
    analytic_dephasing_fidelity, dd_experiment, f_test_sample_size, qns_build_design, qns_forward_chi,
    qns_reconstruct, DdConfig, DdNoise, DdProtocol,
};
use schwarma::linalg::{self, CMatrix};
use schwarma::quantum::{is_cptp, process_fidelity, KrausSet, SuperOperator};
use schwarma::rng::{seeded, substream, SimRng};
use schwarma::schwarma::{
    amplitude_damping_step, lindblad_depolarizing_step, multiaxis_step, stiefel_exp, z_dephasing_step, TangentVector,
};

/// One invariant with its measured residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self { name: name.into(), residual, tolerance, passed: residual <= tolerance }
    }

    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        format!("{status} {:<28} residual={:.3e} tolerance={:.1e}", self.name, self.residual, self.tolerance)
    }
}

/// Fault injected into the suite to show that it detects errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fixture {
    #[default]
    None,
    /// Reference spectra use `1 + sum a_k e^{-ikw}` in the AR denominator.
    FlippedArSign,
}

const PERIODOGRAM_SAMPLES: usize = 1 << 20;
const CPTP_DRAWS: usize = 200;

fn gaussian(rng: &mut SimRng, scale: f64) -> f64 {
    scale * rng.sample::<f64, _>(StandardNormal)
}

fn complex(rng: &mut SimRng, scale: f64) -> Complex64 {
    Complex64::new(gaussian(rng, scale), gaussian(rng, scale))
}

fn cptp_check(name: &str, seed: u64, draw: impl Fn(&mut SimRng) -> KrausSet) -> Check {
    let mut rng = seeded(seed);
    let mut worst = 0.0f64;
    for _ in 0..CPTP_DRAWS {
        let r = is_cptp(&draw(&mut rng).to_superoperator());
        worst = worst.max(-r.min_choi_eigenvalue).max(r.tp_residual);
    }
    Check::at_most(format!("cptp_{name}"), worst, 1e-10)
}

/// Analytic spectrum under the recursion's sign convention, or the flipped
/// one when the fixture asks for it.
fn reference_spectrum(model: &ArmaModel, fixture: Fixture, omega: f64) -> f64 {
    match fixture {
        Fixture::None => model.spectrum_at(omega),
        Fixture::FlippedArSign => {
            let poly = |lead: f64, tail: &[f64]| {
                lead + tail
                    .iter()
                    .enumerate()
                    .map(|(k, a)| Complex64::from_polar(*a, -omega * (k + 1) as f64))
                    .sum::<Complex64>()
            };
            let ma = model.ma_coeffs();
            poly(ma[0], &ma[1..]).norm_sqr() / poly(1.0, &model.ar_coeffs()).norm_sqr()
        }
    }
}

/// Autocovariance lags `0..n` from the analytic spectrum on `m` points.
fn spectrum_autocovariance(model: &ArmaModel, fixture: Fixture, n: usize, m: usize) -> Vec<f64> {
    let s: Vec<f64> = (0..m).map(|j| reference_spectrum(model, fixture, 2.0 * PI * j as f64 / m as f64)).collect();
    (0..n)
        .map(|k| {
            let acc: f64 = s.iter().enumerate().map(|(j, v)| v * (2.0 * PI * (j * k % m) as f64 / m as f64).cos()).sum();
            acc / m as f64
        })
        .collect()
}

fn periodogram_check(name: &str, model: &ArmaModel, fixture: Fixture, seed: u64) -> schwarma::Result<Check> {
    let cfg = WelchConfig::default();
    let samples = model.clone().generate(PERIODOGRAM_SAMPLES, &mut seeded(seed), 1.0);
    let est = welch_psd(&samples, &cfg)?;
    let r = spectrum_autocovariance(model, fixture, cfg.segment_len, 8 * cfg.segment_len);
    let exp = expected_welch(&AutocovarianceSequence { values: r, lag_unit: 1.0 }, &cfg)?;
    let num: f64 = est.values.iter().zip(&exp.values).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = exp.values.iter().map(|b| b * b).sum();
    Ok(Check::at_most(format!("periodogram_{name}"), (num / den).sqrt(), 0.05))
}

fn stiefel_check(seed: u64) -> schwarma::Result<Check> {
    let mut rng = seeded(seed);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let h = CMatrix::from_fn(3, 3, |_, _| complex(&mut rng, 1.0));
        let a = (&h - h.adjoint()) * Complex64::new(0.5, 0.0);
        let b = CMatrix::from_fn(6, 3, |_, _| complex(&mut rng, 1.0));
        let p = stiefel_exp(&linalg::identity(3), &TangentVector::new(a, b)?)?;
        worst = worst.max(p.orthonormality_residual());
    }
    Ok(Check::at_most("stiefel_orthonormality", worst, 1e-10))
}

fn timescale_checks() -> schwarma::Result<Vec<Check>> {
    let t = 10;
    let mut white = vec![0.0; 8 * t];
    white[0] = 0.7;
    let rs = convert_timescale(&AutocovarianceSequence::new(white, 1.0)?, t, 8)?;
    let white_res =
        rs.values.iter().enumerate().map(|(k, v)| (v - if k == 0 { 7.0 } else { 0.0 }).abs()).fold(0.0, f64::max);
    let rs = convert_timescale(&AutocovarianceSequence::new(vec![0.7; 8 * t], 1.0)?, t, 8)?;
    let corr_res = rs.values.iter().map(|v| (v - 70.0).abs()).fold(0.0, f64::max);
    Ok(vec![
        Check::at_most("timescale_white", white_res, 1e-12),
        Check::at_most("timescale_fully_correlated", corr_res, 1e-9),
    ])
}

fn dephasing_oracle(seed: u64) -> schwarma::Result<Check> {
    let (sigma, depth, trials) = (0.05, 64, 4000);
    let id = linalg::identity(2);
    let fids: Vec<f64> = (0..trials)
        .map(|t| {
            let mut rng = substream(seed, t);
            let mut s = SuperOperator::identity(2);
            for _ in 0..depth {
                s = z_dephasing_step(gaussian(&mut rng, sigma)).to_superoperator().after(&s)?;
            }
            process_fidelity(&id, &s)
        })
        .collect::<schwarma::Result<_>>()?;
    let mc = MeanWithError::of(&fids);
    let want = analytic_dephasing_fidelity(depth as f64 * sigma * sigma, &id)?;
    Ok(Check::at_most("dephasing_oracle_sigmas", (mc.mean - want).abs() / mc.standard_error, 4.0))
}

fn qns_round_trip() -> schwarma::Result<Check> {
    let d = qns_build_design(128)?;
    let m = design_bandlimited_ma(128, 0.0, 0.25 * PI)?;
    let s = m.power_spectrum(&d.grid());
    let truth = schwarma::arma::PowerSpectrum::new(s.frequencies, s.values.iter().map(|v| 1e-3 * v).collect())?;
    let p: Vec<f64> = qns_forward_chi(&d, &truth)?.iter().map(|c| 0.5 * (1.0 + (-c).exp())).collect();
    let rec = qns_reconstruct(&p, &d)?;
    let num: f64 = rec.spectrum.values.iter().zip(&truth.values).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = truth.values.iter().map(|b| b * b).sum();
    Ok(Check::at_most("qns_noiseless_round_trip", (num / den).sqrt(), 1e-6))
}

fn dd_refocusing() -> schwarma::Result<Check> {
    let cfg = DdConfig { n_steps: 16, n_samples: 100, seed: 3 };
    let s = dd_experiment(DdProtocol::XX, &DdNoise::Static { sigma: [0.0, 0.0, 0.4] }, &cfg)?;
    let worst = s.fidelity.iter().skip(1).step_by(2).map(|f| (1.0 - f.mean).abs()).fold(0.0, f64::max);
    Ok(Check::at_most("dd_static_refocusing", worst, 1e-10))
}

fn f_test_anchor() -> schwarma::Result<Check> {
    let n = f_test_sample_size(0.025, 0.05)? as f64;
    let mut c = Check::at_most("f_test_n_at_2_5_percent", (n / 17_500.0 - 1.0).abs(), 0.1);
    c.passed &= n > 17_000.0;
    Ok(c)
}

fn reproducibility(seed: u64) -> Check {
    let m = ArmaModel::new(vec![0.8], vec![1.0, 0.3]).expect("stable");
    let a = m.clone().generate(10_000, &mut seeded(seed), 1.0);
    let b = m.clone().generate(10_000, &mut seeded(seed), 1.0);
    let diff = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Check::at_most("seed_reproducibility", diff, 0.0)
}

pub fn run_suite(seed: u64, fixture: Fixture) -> schwarma::Result<Vec<Check>> {
    let mut out = vec![
        cptp_check("z_dephasing", seed, |r| z_dephasing_step(gaussian(r, 1.0))),
        cptp_check("multiaxis", seed, |r| multiaxis_step(gaussian(r, 1.0), gaussian(r, 1.0), gaussian(r, 1.0))),
        cptp_check("amplitude_damping", seed, |r| amplitude_damping_step(complex(r, 0.3))),
        cptp_check("depolarizing", seed, |r| {
            lindblad_depolarizing_step(complex(r, 0.5), complex(r, 0.5), complex(r, 0.5))
        }),
    ];
    let models = [
        ("white", ArmaModel::white()),
        ("ar1", ArmaModel::new(vec![0.5], vec![1.0])?),
        ("multipole", design_multipole_ar(&[0.2 * PI, 0.4 * PI, 0.6 * PI], 0.95)?),
        ("bandlimited", design_bandlimited_ma(128, 0.0, 0.1 * PI)?),
    ];
    for (i, (name, m)) in models.iter().enumerate() {
        out.push(periodogram_check(name, m, fixture, seed.wrapping_add(i as u64))?);
    }
    out.push(stiefel_check(seed)?);
    out.extend(timescale_checks()?);
    out.push(dephasing_oracle(seed)?);
    out.push(qns_round_trip()?);
    out.push(dd_refocusing()?);
    out.push(f_test_anchor()?);
    out.push(reproducibility(seed));
    Ok(out)
}
