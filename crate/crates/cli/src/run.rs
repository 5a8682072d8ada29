use std::path::Path;

use schwarma::arma::{expected_welch, welch_psd, PowerSpectrum, WelchConfig};
use schwarma::experiments::{
    dd_experiment, lz_compare, qns_build_design, qns_reconstruct, qns_simulate_survivals, surface_code_sweep,
    DdConfig, DdNoise, ExperimentResult, ResultRow,
};
use schwarma::io::{ensure_parent, format_decimal};
use schwarma::rng::seeded;
use schwarma::schwarma::{NoiseSource, SchwarmaModel};
use schwarma::trotter::GaussianProcessSpec;

use crate::config::{DdNoiseKind, RunConfig};
use crate::error::CliError;

fn row(experiment: &str, protocol: &str, metric: &str, value: f64, se: f64, n: usize, seed: u64) -> ResultRow {
    ResultRow {
        experiment: experiment.into(),
        protocol: protocol.into(),
        gamma: 0.0,
        tau_c: 0.0,
        step: 0,
        metric: metric.into(),
        value,
        standard_error: se,
        n_samples: n,
        seed,
    }
}

fn write_columns(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<(), CliError> {
    ensure_parent(path)?;
    let io = |e: csv::Error| CliError::Core(e.into());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for i in 0..columns[0].len() {
        w.write_record(columns.iter().map(|c| format_decimal(c[i]))).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })
}

pub fn spectrum(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let s = &cfg.spectrum;
    let model = s.model.build()?;
    model.power_spectrum(&PowerSpectrum::uniform_grid(s.n_freq)).write_csv(&out.join("spectrum.csv"))?;
    if s.samples > 0 {
        let welch = WelchConfig { segment_len: s.segment_len, overlap: s.segment_len / 2 };
        let est = welch_psd(&model.clone().generate(s.samples, &mut seeded(cfg.run.seed), 1.0), &welch)?;
        let exp = expected_welch(&model.autocovariance(s.segment_len - 1, 1.0), &welch)?;
        write_columns(&out.join("welch.csv"), &["omega", "estimate", "expected"], &[
            &est.frequencies,
            &est.values,
            &exp.values,
        ])?;
    }
    Ok(())
}

pub fn qns(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let q = &cfg.qns;
    let seed = cfg.run.seed;
    let design = qns_build_design(q.w)?;
    let arma = q.model.build()?;
    let truth = arma.power_spectrum(&design.grid());
    let model = SchwarmaModel::z_dephasing(NoiseSource::real(arma, q.scale))?;
    let est = qns_simulate_survivals(&design, &model, q.n_traj, seed)?;
    let rec = qns_reconstruct(&est.mean, &design)?;
    log::info!("regression condition number {:.3e}, {} rows dropped", rec.condition_number, rec.dropped_rows.len());

    let mut res = ExperimentResult::default();
    for (k, (p, se)) in est.mean.iter().zip(&est.standard_error).enumerate() {
        let mut r = row("qns", "sequence", "survival", *p, *se, q.n_traj, seed);
        r.step = k + 1;
        res.push(r);
    }
    res.write_csv(&out.join("results.csv"))?;
    let scaled: Vec<f64> = truth.values.iter().map(|v| v * q.scale * q.scale).collect();
    write_columns(&out.join("spectrum.csv"), &["omega", "reconstructed", "true"], &[
        &truth.frequencies,
        &rec.spectrum.values,
        &scaled,
    ])
}

pub fn dd(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let d = &cfg.dd;
    let noise = match d.noise {
        DdNoiseKind::Static => DdNoise::Static { sigma: d.static_sigma },
        kind => {
            let src = GaussianProcessSpec::new(d.gamma, d.tau_c, 1.0)?.matched_source(1)?;
            DdNoise::Schwarma(match kind {
                DdNoiseKind::AmplitudeDamping => {
                    SchwarmaModel::amplitude_damping(NoiseSource::complex(src.model, src.scale))?
                }
                _ => SchwarmaModel::multiaxis(src.clone(), src.clone(), src)?,
            })
        }
    };
    let run = DdConfig { n_steps: d.n_steps, n_samples: d.n_samples, seed: cfg.run.seed };
    let mut res = ExperimentResult::default();
    for &p in &d.protocols {
        log::info!("decoupling protocol {}", p.name());
        res.extend(dd_experiment(p, &noise, &run)?.to_result(d.gamma, d.tau_c, d.n_samples, cfg.run.seed));
    }
    Ok(res.write_csv(&out.join("results.csv"))?)
}

pub fn surface(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let sweep = surface_code_sweep(&cfg.surface.sweep_config(&cfg.run))?;
    let mut res = sweep.to_result();
    match sweep.error_fit() {
        Ok((slope, intercept)) => {
            let n = cfg.surface.n_samples;
            res.push(row("surface", "fit", "error_slope", slope, 0.0, n, cfg.run.seed));
            res.push(row("surface", "fit", "error_intercept", intercept, 0.0, n, cfg.run.seed));
        }
        Err(e) => log::warn!("no error fit: {e}"),
    }
    Ok(res.write_csv(&out.join("results.csv"))?)
}

pub fn lz(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let l = &cfg.lz;
    let seed = cfg.run.seed;
    let c = lz_compare(&l.lz_config(seed))?;
    let n = l.n_samples;
    let mut res = ExperimentResult::default();
    let mut push = |protocol: &str, metric: &str, v: f64, se: f64| {
        let mut r = row("lz", protocol, metric, v, se, n, seed);
        r.tau_c = l.tau_c;
        res.push(r);
    };
    push("trotter", "transition_probability", c.trotter.mean, c.trotter.standard_error);
    push("schwarma", "transition_probability", c.schwarma.mean, c.schwarma.standard_error);
    push("noiseless", "transition_probability", c.noiseless, 0.0);
    res.write_csv(&out.join("results.csv"))?;
    // wall-clock figures vary run to run, so they stay out of results.csv
    let timing = [c.trotter_seconds, c.schwarma_seconds, c.speedup()];
    write_columns(&out.join("timing.csv"), &["trotter_seconds", "schwarma_seconds", "speedup"], &[
        &timing[0..1],
        &timing[1..2],
        &timing[2..3],
    ])
}
