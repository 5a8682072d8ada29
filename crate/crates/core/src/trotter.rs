//! Brute-force reference simulator: continuous Gaussian noise sampled on a
//! fine grid, rectangular control pulses and first-order Trotter stepping.
//! Also the partitioned scheme that replaces the fine noisy steps by ideal
//! coarse segments followed by SchWARMA noise, and the Landau–Zener drives.
//!
//! Time is measured in gate lengths; a noise amplitude `eta` enters the
//! Hamiltonian as `eta * sigma`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::arma::{convert_timescale, fit_ma_to_autocovariance, AutocovarianceSequence};
use crate::circuit::{Gate, GateKind, QuantumCircuit};
use crate::error::{invalid, Error, Result};
use crate::io::ensure_parent;
use crate::linalg::{self, identity, CMatrix, ONE};
use crate::quantum::{SuperOperator, SuperOperatorAccumulator};
use crate::rng::{substream, SimRng};
use crate::schwarma::{NoiseSource, SchwarmaModel};

/// Largest circulant embedding tried before giving up.
const MAX_EMBEDDING: usize = 1 << 26;
/// Kernel values below this fraction of `f(0)` are dropped when matching a
/// coarse model; `exp(-x^2/4) < 1e-17` beyond `x = 12.6`.
const KERNEL_CUTOFF_WIDTHS: f64 = 12.6;

/// Stationary Gaussian noise with squared-exponential autocovariance
/// `f(tau) = gamma / (2 sqrt(pi) tau_c) exp(-tau^2 / (4 tau_c^2))`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GaussianProcessSpec {
    pub gamma: f64,
    pub tau_c: f64,
    pub dt: f64,
}

impl GaussianProcessSpec {
    pub fn new(gamma: f64, tau_c: f64, dt: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(invalid(format!("noise amplitude must be >= 0, got {gamma}")));
        }
        if !(tau_c > 0.0 && tau_c.is_finite()) {
            return Err(invalid(format!("correlation time must be > 0, got {tau_c}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("sample period must be > 0, got {dt}")));
        }
        Ok(Self { gamma, tau_c, dt })
    }

    pub fn kernel(&self, tau: f64) -> f64 {
        self.gamma / (2.0 * PI.sqrt() * self.tau_c) * (-(tau * tau) / (4.0 * self.tau_c * self.tau_c)).exp()
    }

    /// `f(k dt)` for `k = 0..n_lags`.
    pub fn autocovariance(&self, n_lags: usize) -> AutocovarianceSequence {
        AutocovarianceSequence::from_kernel(|t| self.kernel(t), n_lags, self.dt)
    }

    /// Autocovariance of the per-step phase increments `eta(k dt) dt`.
    pub fn increment_autocovariance(&self, n_lags: usize) -> AutocovarianceSequence {
        let dt2 = self.dt * self.dt;
        AutocovarianceSequence::from_kernel(|t| self.kernel(t) * dt2, n_lags, self.dt)
    }

    /// Autocovariance of the phase accumulated over consecutive blocks of
    /// `ratio` fine steps, out to where the kernel is negligible.
    pub fn block_autocovariance(&self, ratio: usize) -> Result<AutocovarianceSequence> {
        if ratio == 0 {
            return Err(invalid("block ratio must be at least 1"));
        }
        let reach = KERNEL_CUTOFF_WIDTHS * self.tau_c / (ratio as f64 * self.dt);
        let n_slow = reach.ceil() as usize + 2;
        convert_timescale(&self.increment_autocovariance(n_slow * ratio), ratio, n_slow)
    }

    /// SchWARMA source whose per-step output matches the phase accumulated
    /// over `ratio` fine steps of this process.
    pub fn matched_source(&self, ratio: usize) -> Result<NoiseSource> {
        if self.gamma == 0.0 {
            return Ok(NoiseSource::silent());
        }
        let model = fit_ma_to_autocovariance(&self.block_autocovariance(ratio)?)?;
        Ok(NoiseSource::real(model, 1.0))
    }
}

/// Exact sampler for `n` consecutive values, by circulant embedding.
#[derive(Clone)]
pub struct GaussianProcessSampler {
    n: usize,
    /// `sqrt(lambda_j / m)` for the embedding eigenvalues.
    amplitudes: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GaussianProcessSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaussianProcessSampler")
            .field("n", &self.n)
            .field("embedding", &self.amplitudes.len())
            .finish()
    }
}

impl GaussianProcessSampler {
    pub fn new(spec: &GaussianProcessSpec, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("need at least one sample"));
        }
        let mut planner = FftPlanner::new();
        let mut m = (2 * n.saturating_sub(1)).max(2).next_power_of_two();
        loop {
            let mut c: Vec<Complex64> =
                (0..m).map(|k| Complex64::new(spec.kernel(k.min(m - k) as f64 * spec.dt), 0.0)).collect();
            planner.plan_fft_forward(m).process(&mut c);
            let max = c.iter().map(|v| v.re).fold(0.0, f64::max);
            let min = c.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
            if min >= -1e-10 * max {
                let amplitudes = c.iter().map(|v| (v.re.max(0.0) / m as f64).sqrt()).collect();
                return Ok(Self { n, amplitudes, fft: planner.plan_fft_forward(m) });
            }
            if m >= MAX_EMBEDDING {
                return Err(Error::Numerical(format!(
                    "circulant embedding of size {m} still has eigenvalue {min:.3e} (max {max:.3e})"
                )));
            }
            m *= 2;
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Two independent trajectories from one transform (real and imaginary
    /// parts).
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let mut buf: Vec<Complex64> = self
            .amplitudes
            .iter()
            .map(|&a| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(a * re, a * im)
            })
            .collect();
        self.fft.process(&mut buf);
        buf.truncate(self.n);
        (buf.iter().map(|v| v.re).collect(), buf.iter().map(|v| v.im).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sample_pair(rng).0
    }

    /// `count` independent trajectories.
    pub fn sample_many<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(count + 1);
        while out.len() < count {
            let (a, b) = self.sample_pair(rng);
            out.push(a);
            out.push(b);
        }
        out.truncate(count);
        out
    }
}

/// One trajectory of length `n`.
pub fn sample_gaussian_process<R: Rng + ?Sized>(
    spec: &GaussianProcessSpec,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(GaussianProcessSampler::new(spec, n)?.sample(rng))
}

/// Per-qubit `[x, y, z]` noise amplitudes on the fine grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrajectories {
    axes: Vec<[Vec<f64>; 3]>,
    len: usize,
}

impl NoiseTrajectories {
    pub fn new(axes: Vec<[Vec<f64>; 3]>) -> Result<Self> {
        let len = axes.first().map_or(0, |a| a[0].len());
        if axes.iter().flatten().any(|t| t.len() != len) {
            return Err(invalid("noise trajectories must all have the same length"));
        }
        Ok(Self { axes, len })
    }

    pub fn zeros(n_qubits: usize, len: usize) -> Self {
        Self { axes: vec![[vec![0.0; len], vec![0.0; len], vec![0.0; len]]; n_qubits], len }
    }

    /// Independent draws of the same process on every qubit and axis.
    pub fn sample_iid<R: Rng + ?Sized>(sampler: &GaussianProcessSampler, n_qubits: usize, rng: &mut R) -> Self {
        let mut draws = sampler.sample_many(3 * n_qubits, rng).into_iter();
        let axes = (0..n_qubits)
            .map(|_| [draws.next().unwrap(), draws.next().unwrap(), draws.next().unwrap()])
            .collect();
        Self { axes, len: sampler.len() }
    }

    /// Draws on the axes flagged in `active`, zeros elsewhere.
    pub fn sample_axes<R: Rng + ?Sized>(
        sampler: &GaussianProcessSampler,
        n_qubits: usize,
        active: [bool; 3],
        rng: &mut R,
    ) -> Self {
        let per_qubit = active.iter().filter(|a| **a).count();
        let mut draws = sampler.sample_many(per_qubit * n_qubits, rng).into_iter();
        let axes = (0..n_qubits)
            .map(|_| active.map(|on| if on { draws.next().unwrap() } else { vec![0.0; sampler.len()] }))
            .collect();
        Self { axes, len: sampler.len() }
    }

    pub fn n_qubits(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `[x, y, z]` trajectories of qubit `q`.
    pub fn qubit(&self, q: usize) -> &[Vec<f64>; 3] {
        &self.axes[q]
    }

    /// Columns `step, q0_x, q0_y, q0_z, q1_x, ...`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        ensure_parent(path)?;
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["step".to_string()];
        for q in 0..self.n_qubits() {
            header.extend(["x", "y", "z"].map(|a| format!("q{q}_{a}")));
        }
        w.write_record(&header)?;
        for k in 0..self.len {
            let mut row = vec![k.to_string()];
            for axes in &self.axes {
                row.extend(axes.iter().map(|t| format!("{:.17e}", t[k])));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let width = r.headers()?.len();
        if width < 4 || (width - 1) % 3 != 0 {
            return Err(Error::Parse { line: 1, message: format!("expected step plus 3 columns per qubit, found {width}") });
        }
        let n_qubits = (width - 1) / 3;
        let mut axes = vec![[Vec::new(), Vec::new(), Vec::new()]; n_qubits];
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            for (c, field) in rec.iter().enumerate().skip(1) {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|e: std::num::ParseFloatError| Error::Parse { line: i + 2, message: e.to_string() })?;
                axes[(c - 1) / 3][(c - 1) % 3].push(v);
            }
        }
        Self::new(axes)
    }
}

/// Constant controls applied for `n_steps` fine steps.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveSegment {
    pub n_steps: usize,
    /// Per-qubit `(omega, phi)`: `H_q = omega (cos phi sx + sin phi sy)`.
    pub drives: Vec<(f64, f64)>,
    /// `(a, b, omega_zz)`: `H_ab = omega_zz sz sz`.
    pub couplings: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleEvent {
    Drive(DriveSegment),
    /// Zero-duration frame changes applied exactly.
    Instant(Vec<Gate>),
}

/// Rectangular pulses realizing a circuit, one gate length per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSchedule {
    n_qubits: usize,
    steps_per_gate: usize,
    events: Vec<ScheduleEvent>,
    target: CMatrix,
}

/// `(omega, phi)` rotating by the same angle as `g` in one gate length.
fn single_qubit_drive(g: &Gate) -> Result<(f64, f64)> {
    match g.kind() {
        GateKind::X => Ok((FRAC_PI_2, 0.0)),
        GateKind::YHalf => Ok((FRAC_PI_4, FRAC_PI_2)),
        GateKind::YNegHalf => Ok((FRAC_PI_4, -FRAC_PI_2)),
        GateKind::Custom { .. } if linalg::max_abs_diff(g.matrix(), &identity(2)) < 1e-12 => Ok((0.0, 0.0)),
        _ => Err(invalid(format!("no rectangular pulse for gate {}", g.label()))),
    }
}

impl PulseSchedule {
    pub fn from_circuit(circuit: &QuantumCircuit, steps_per_gate: usize) -> Result<Self> {
        if steps_per_gate == 0 {
            return Err(invalid("need at least one Trotter step per gate"));
        }
        let n = circuit.n_qubits();
        let mut events = Vec::new();
        for layer in circuit.timed_moments() {
            if layer.iter().all(Gate::is_virtual) {
                events.push(ScheduleEvent::Instant(layer));
                continue;
            }
            let mut seg = DriveSegment { n_steps: steps_per_gate, drives: vec![(0.0, 0.0); n], couplings: Vec::new() };
            for g in &layer {
                match (g.kind(), g.qubits()) {
                    (GateKind::ZZ90, [a, b]) => seg.couplings.push((*a, *b, FRAC_PI_4)),
                    (_, [q]) => seg.drives[*q] = single_qubit_drive(g)?,
                    _ => return Err(invalid(format!("no rectangular pulse for gate {}", g.label()))),
                }
            }
            events.push(ScheduleEvent::Drive(seg));
        }
        Ok(Self { n_qubits: n, steps_per_gate, events, target: circuit.ideal_unitary() })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn steps_per_gate(&self) -> usize {
        self.steps_per_gate
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.steps_per_gate as f64
    }

    pub fn events(&self) -> &[ScheduleEvent] {
        &self.events
    }

    pub fn total_steps(&self) -> usize {
        self.events
            .iter()
            .map(|e| match e {
                ScheduleEvent::Drive(s) => s.n_steps,
                ScheduleEvent::Instant(_) => 0,
            })
            .sum()
    }

    pub fn duration(&self) -> f64 {
        self.total_steps() as f64 * self.dt()
    }

    /// Ideal unitary of the circuit the schedule was built from.
    pub fn target_unitary(&self) -> &CMatrix {
        &self.target
    }

    /// Rotation angle `omega * T` of every pulse, with its segment index.
    pub fn pulse_areas(&self) -> Vec<(usize, f64)> {
        let dt = self.dt();
        let mut out = Vec::new();
        for (i, e) in self.events.iter().enumerate() {
            if let ScheduleEvent::Drive(s) = e {
                let t = s.n_steps as f64 * dt;
                out.extend(s.drives.iter().filter(|d| d.0 != 0.0).map(|d| (i, d.0 * t)));
                out.extend(s.couplings.iter().map(|c| (i, c.2 * t)));
            }
        }
        out
    }
}

/// `exp(-i dt sum omega z_a z_b)` as a diagonal.
fn coupling_phases(couplings: &[(usize, usize, f64)], n: usize, dt: f64) -> Option<Vec<Complex64>> {
    if couplings.is_empty() {
        return None;
    }
    let dim = 1usize << n;
    let z = |i: usize, q: usize| if i >> (n - 1 - q) & 1 == 0 { 1.0 } else { -1.0 };
    Some(
        (0..dim)
            .map(|i| {
                let e: f64 = couplings.iter().map(|&(a, b, w)| w * z(i, a) * z(i, b)).sum();
                Complex64::from_polar(1.0, -e * dt)
            })
            .collect(),
    )
}

/// Unitary of one noise realization, `prod_k exp(-i H(k dt) dt)` with later
/// steps on the left.
pub fn trotter_unitary(schedule: &PulseSchedule, noise: &NoiseTrajectories) -> Result<CMatrix> {
    let n = schedule.n_qubits;
    if noise.n_qubits() != n {
        return Err(invalid(format!("noise for {} qubits, schedule has {n}", noise.n_qubits())));
    }
    let total = schedule.total_steps();
    if noise.len() < total {
        return Err(invalid(format!("noise covers {} steps, schedule needs {total}", noise.len())));
    }
    let dt = schedule.dt();
    let mut u = identity(1 << n);
    let mut k = 0;
    for event in &schedule.events {
        match event {
            ScheduleEvent::Instant(gates) => {
                for g in gates {
                    linalg::apply_single_left(&mut u, &linalg::to_fixed(g.matrix()), g.qubits()[0], n);
                }
            }
            ScheduleEvent::Drive(seg) => {
                let zz = coupling_phases(&seg.couplings, n, dt);
                for _ in 0..seg.n_steps {
                    for (q, &(omega, phi)) in seg.drives.iter().enumerate() {
                        let [ex, ey, ez] = noise.qubit(q);
                        let hx = ex[k] + omega * phi.cos();
                        let hy = ey[k] + omega * phi.sin();
                        let hz = ez[k];
                        if hx != 0.0 || hy != 0.0 || hz != 0.0 {
                            let step = linalg::su2_rotation(hx * dt, hy * dt, hz * dt);
                            linalg::apply_single_left(&mut u, &step, q, n);
                        }
                    }
                    if let Some(d) = &zz {
                        linalg::apply_diag_left(&mut u, d);
                    }
                    k += 1;
                }
            }
        }
    }
    Ok(u)
}

/// Superoperator of one noise realization.
pub fn trotter_simulate(schedule: &PulseSchedule, noise: &NoiseTrajectories) -> Result<SuperOperator> {
    Ok(SuperOperator::from_unitary(&trotter_unitary(schedule, noise)?))
}

/// Which noise axes a Monte Carlo run draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseAxes {
    ZOnly,
    All,
}

impl NoiseAxes {
    fn mask(self) -> [bool; 3] {
        match self {
            Self::ZOnly => [false, false, true],
            Self::All => [true, true, true],
        }
    }
}

/// Monte Carlo average of the reference simulator.
#[derive(Debug, Clone)]
pub struct TrotterMonteCarlo {
    pub mean: SuperOperator,
    pub fidelities: Vec<f64>,
}

/// Process fidelities of `n_samples` realizations, each drawing fresh noise
/// from substream `t` of `master_seed`. The mean superoperator is only
/// accumulated when `keep_mean` is set, since it costs `N^4` per trial.
pub fn trotter_monte_carlo(
    schedule: &PulseSchedule,
    spec: &GaussianProcessSpec,
    axes: NoiseAxes,
    n_samples: usize,
    master_seed: u64,
    keep_mean: bool,
) -> Result<TrotterMonteCarlo> {
    if n_samples == 0 {
        return Err(invalid("need at least one Monte Carlo sample"));
    }
    if (spec.dt - schedule.dt()).abs() > 1e-12 * schedule.dt() {
        return Err(invalid(format!("noise sample period {} differs from Trotter step {}", spec.dt, schedule.dt())));
    }
    let sampler = GaussianProcessSampler::new(spec, schedule.total_steps().max(1))?;
    let target = schedule.target_unitary();
    let n = schedule.n_qubits();
    let dim = 1usize << n;
    let results: Vec<(f64, Option<SuperOperator>)> = (0..n_samples)
        .into_par_iter()
        .map(|t| -> Result<_> {
            let mut rng: SimRng = substream(master_seed, t as u64);
            let noise = NoiseTrajectories::sample_axes(&sampler, n, axes.mask(), &mut rng);
            let u = trotter_unitary(schedule, &noise)?;
            let f = (target.adjoint() * &u).trace().norm_sqr() / (dim * dim) as f64;
            Ok((f, keep_mean.then(|| SuperOperator::from_unitary(&u))))
        })
        .collect::<Result<_>>()?;
    let mut acc = SuperOperatorAccumulator::new(dim);
    let mut fidelities = Vec::with_capacity(n_samples);
    for (f, s) in &results {
        fidelities.push(*f);
        if let Some(s) = s {
            acc.push(s)?;
        }
    }
    let mean = if keep_mean { acc.finish()?.mean } else { SuperOperator::identity(dim) };
    Ok(TrotterMonteCarlo { mean, fidelities })
}

/// `exp(-i h dt)` for a Hermitian `h`, closed form for qubits.
fn step_unitary(h: &CMatrix, dt: f64) -> CMatrix {
    if h.nrows() == 2 {
        linalg::to_dynamic(&linalg::expm_hermitian_2x2(&linalg::to_fixed(h), dt))
    } else {
        linalg::expm(&(h * Complex64::new(0.0, -dt)))
    }
}

/// First-order Trotter evolution of `h_c(t) + sum_g eta_g(t) S_g` over
/// `n_steps` steps from `t0`; the Hamiltonian of step `k` is evaluated at
/// the midpoint `t0 + (k + 1/2) dt`.
pub fn trotter_evolve(
    h_c: &dyn Fn(f64) -> CMatrix,
    noise_ops: &[CMatrix],
    trajectories: &[Vec<f64>],
    t0: f64,
    dt: f64,
    n_steps: usize,
) -> Result<CMatrix> {
    if noise_ops.len() != trajectories.len() {
        return Err(invalid(format!("{} noise operators for {} trajectories", noise_ops.len(), trajectories.len())));
    }
    if let Some(t) = trajectories.iter().find(|t| t.len() < n_steps) {
        return Err(invalid(format!("trajectory of length {} for {n_steps} steps", t.len())));
    }
    let dim = h_c(t0).nrows();
    if let Some(s) = noise_ops.iter().find(|s| s.shape() != (dim, dim)) {
        return Err(Error::DimensionMismatch { expected: dim, found: s.nrows() });
    }
    let mut u = identity(dim);
    for k in 0..n_steps {
        let mut h = h_c(t0 + (k as f64 + 0.5) * dt);
        for (s, eta) in noise_ops.iter().zip(trajectories) {
            h += s * Complex64::new(eta[k], 0.0);
        }
        u = step_unitary(&h, dt) * u;
    }
    Ok(u)
}

/// Noiseless coarse segments `U_c(t_j) U_c(t_{j-1})^dagger`, each the
/// product of `kappa` fine Trotter steps.
pub fn ideal_segments(h_c: &dyn Fn(f64) -> CMatrix, t0: f64, dt: f64, kappa: usize, n_segments: usize) -> Vec<CMatrix> {
    (0..n_segments)
        .map(|j| trotter_evolve(h_c, &[], &[], t0 + (j * kappa) as f64 * dt, dt, kappa).expect("no noise operators"))
        .collect()
}

/// Composes `U_E(j) * segment_j` for `j = 1..n_steps`, with the noise
/// channel of step `j` drawn from `model`.
pub fn continuous_drive_schwarma(
    segments: &[CMatrix],
    model: &mut SchwarmaModel,
    n_steps: usize,
    rng: &mut SimRng,
) -> Result<SuperOperator> {
    if segments.len() != n_steps {
        return Err(invalid(format!("{} ideal segments for {n_steps} steps", segments.len())));
    }
    let dim = model.dim();
    if let Some(s) = segments.iter().find(|s| s.shape() != (dim, dim)) {
        return Err(Error::DimensionMismatch { expected: dim, found: s.nrows() });
    }
    let mut u = identity(dim);
    let mut sup: Option<CMatrix> = None;
    for seg in segments {
        let k = model.step(rng)?;
        match (&mut sup, k.operators()) {
            (None, [m]) => u = m * seg * &u,
            (None, _) => {
                let prev = SuperOperator::from_unitary(&(seg * &u));
                sup = Some(k.to_superoperator().matrix() * prev.matrix());
            }
            (Some(s), _) => {
                let next = SuperOperator::from_unitary(seg).matrix() * &*s;
                *s = k.to_superoperator().matrix() * next;
            }
        }
    }
    match sup {
        None => Ok(SuperOperator::from_unitary(&u)),
        Some(s) => SuperOperator::new(s),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spin {
    Half,
    One,
}

/// `(S_x, S_z)` in the `m = +s..-s` basis.
pub fn spin_operators(spin: Spin) -> (CMatrix, CMatrix) {
    let c = |x: f64| Complex64::new(x, 0.0);
    match spin {
        Spin::Half => (linalg::pauli_x() * c(0.5), linalg::pauli_z() * c(0.5)),
        Spin::One => {
            let r = c(std::f64::consts::FRAC_1_SQRT_2);
            let z = c(0.0);
            (
                CMatrix::from_row_slice(3, 3, &[z, r, z, r, z, r, z, r, z]),
                CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![ONE, z, -ONE])),
            )
        }
    }
}

/// Landau–Zener sweep `2 delta S_x + 2 alpha t S_z`.
pub fn lz_hamiltonian(delta: f64, alpha: f64, t: f64, spin: Spin) -> CMatrix {
    let (sx, sz) = spin_operators(spin);
    sx * Complex64::new(2.0 * delta, 0.0) + sz * Complex64::new(2.0 * alpha * t, 0.0)
}
