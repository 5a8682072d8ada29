//! Gate-level circuits, the surface-code check circuits, and Monte Carlo
//! simulation with one SchWARMA step per qubit after every timed moment.
//!
//! Qubit 0 is the most significant tensor factor. A gate's duration is
//! measured in gate lengths: virtual `Z^{+-1/2}` take none, `H` takes two
//! (it is pulsed as `Y^{1/2}` then `X`), everything else takes one.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::io::{ensure_parent, write_two_column_csv};
use crate::linalg::{self, identity, pauli_z, CMatrix, ONE, ZERO};
use crate::quantum::{process_fidelity, SuperOperator, SuperOperatorAccumulator};
use crate::rng::{substream, SimRng};
use crate::schwarma::SchwarmaModel;

/// Trials accumulated sequentially before merging; fixed so that results
/// do not depend on the thread count.
const TRIAL_CHUNK: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum GateKind {
    X,
    YHalf,
    YNegHalf,
    ZHalf,
    ZNegHalf,
    H,
    ZZ90,
    Custom { name: String, duration: usize },
}

impl GateKind {
    fn token(&self) -> &str {
        match self {
            Self::X => "X",
            Self::YHalf => "Y_HALF",
            Self::YNegHalf => "Y_NEG_HALF",
            Self::ZHalf => "Z_HALF",
            Self::ZNegHalf => "Z_NEG_HALF",
            Self::H => "H",
            Self::ZZ90 => "ZZ90",
            Self::Custom { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    kind: GateKind,
    qubits: Vec<usize>,
    matrix: CMatrix,
}

/// `exp(-i angle P)`
fn pauli_rotation(p: CMatrix, angle: f64) -> CMatrix {
    linalg::expm(&(p * Complex64::new(0.0, -angle)))
}

fn su2(x: f64, y: f64, z: f64) -> CMatrix {
    linalg::to_dynamic(&linalg::su2_rotation(x, y, z))
}

impl Gate {
    fn single(kind: GateKind, q: usize, matrix: CMatrix) -> Self {
        Self { kind, qubits: vec![q], matrix }
    }

    /// `exp(-i sx pi/2)`
    pub fn x(q: usize) -> Self {
        Self::single(GateKind::X, q, su2(std::f64::consts::FRAC_PI_2, 0.0, 0.0))
    }

    /// `exp(-i sy pi/4)`
    pub fn y_half(q: usize) -> Self {
        Self::single(GateKind::YHalf, q, su2(0.0, std::f64::consts::FRAC_PI_4, 0.0))
    }

    /// `exp(+i sy pi/4)`
    pub fn y_neg_half(q: usize) -> Self {
        Self::single(GateKind::YNegHalf, q, su2(0.0, -std::f64::consts::FRAC_PI_4, 0.0))
    }

    /// Virtual `exp(-i sz pi/4)`.
    pub fn z_half(q: usize) -> Self {
        Self::single(GateKind::ZHalf, q, su2(0.0, 0.0, std::f64::consts::FRAC_PI_4))
    }

    /// Virtual `exp(+i sz pi/4)`.
    pub fn z_neg_half(q: usize) -> Self {
        Self::single(GateKind::ZNegHalf, q, su2(0.0, 0.0, -std::f64::consts::FRAC_PI_4))
    }

    pub fn h(q: usize) -> Self {
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::single(GateKind::H, q, CMatrix::from_row_slice(2, 2, &[s, s, s, -s]))
    }

    /// `exp(-i sz kron sz pi/4)` on `(a, b)`.
    pub fn zz90(a: usize, b: usize) -> Result<Self> {
        if a == b {
            return Err(invalid("ZZ90 needs two distinct qubits"));
        }
        let zz = linalg::kron(&pauli_z(), &pauli_z());
        Ok(Self { kind: GateKind::ZZ90, qubits: vec![a, b], matrix: pauli_rotation(zz, std::f64::consts::FRAC_PI_4) })
    }

    pub fn custom(name: &str, qubits: Vec<usize>, matrix: CMatrix, duration: usize) -> Result<Self> {
        let dim = 1usize << qubits.len();
        if qubits.is_empty() || qubits.len() > 2 || matrix.shape() != (dim, dim) {
            return Err(invalid(format!("custom gate {name} must be a 2x2 or 4x4 matrix on 1 or 2 qubits")));
        }
        if qubits.len() == 2 && qubits[0] == qubits[1] {
            return Err(invalid("two-qubit gate needs distinct qubits"));
        }
        let r = linalg::unitarity_residual(&matrix);
        if r > 1e-12 {
            return Err(invalid(format!("custom gate {name} is not unitary (residual {r:.3e})")));
        }
        Ok(Self { kind: GateKind::Custom { name: name.to_string(), duration }, qubits, matrix })
    }

    pub fn kind(&self) -> &GateKind {
        &self.kind
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn duration(&self) -> usize {
        match &self.kind {
            GateKind::ZHalf | GateKind::ZNegHalf => 0,
            GateKind::H => 2,
            GateKind::Custom { duration, .. } => *duration,
            _ => 1,
        }
    }

    pub fn is_virtual(&self) -> bool {
        self.duration() == 0
    }

    /// Physical pulses, each one gate length long (or the gate itself when
    /// it is virtual or already elementary).
    pub fn pulses(&self) -> Vec<Gate> {
        match &self.kind {
            GateKind::H => vec![Gate::y_half(self.qubits[0]), Gate::x(self.qubits[0])],
            GateKind::Custom { name, duration } if *duration > 1 => {
                let mut out = vec![Gate {
                    kind: GateKind::Custom { name: name.clone(), duration: 1 },
                    ..self.clone()
                }];
                let dim = self.matrix.nrows();
                for _ in 1..*duration {
                    out.push(Gate {
                        kind: GateKind::Custom { name: "I".into(), duration: 1 },
                        qubits: self.qubits.clone(),
                        matrix: identity(dim),
                    });
                }
                out
            }
            _ => vec![self.clone()],
        }
    }

    pub fn label(&self) -> String {
        let qs: Vec<String> = self.qubits.iter().map(|q| q.to_string()).collect();
        format!("{}({})", self.kind.token(), qs.join(","))
    }
}

/// Ordered gate layers on `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumCircuit {
    n_qubits: usize,
    moments: Vec<Vec<Gate>>,
}

impl QuantumCircuit {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, moments: Vec::new() }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn moments(&self) -> &[Vec<Gate>] {
        &self.moments
    }

    pub fn push(&mut self, moment: Vec<Gate>) -> Result<&mut Self> {
        let mut seen = vec![false; self.n_qubits];
        for g in &moment {
            for &q in g.qubits() {
                if q >= self.n_qubits {
                    return Err(invalid(format!("gate {} addresses qubit {q} of {}", g.label(), self.n_qubits)));
                }
                if seen[q] {
                    return Err(invalid(format!("qubit {q} appears twice in one moment")));
                }
                seen[q] = true;
            }
        }
        self.moments.push(moment);
        Ok(self)
    }

    pub fn extend(&mut self, moments: Vec<Vec<Gate>>) -> Result<&mut Self> {
        for m in moments {
            self.push(m)?;
        }
        Ok(self)
    }

    /// An empty moment: every qubit idles for one gate length.
    pub fn push_idle(&mut self) -> &mut Self {
        let id = Gate::custom("I", vec![0], identity(2), 1).expect("identity is unitary");
        self.moments.push(vec![id]);
        self
    }

    /// Moments split into single-pulse layers; each layer is either virtual
    /// (no duration) or exactly one gate length.
    pub fn timed_moments(&self) -> Vec<Vec<Gate>> {
        let mut out = Vec::new();
        for moment in &self.moments {
            let pulses: Vec<Vec<Gate>> = moment.iter().map(Gate::pulses).collect();
            let depth = pulses.iter().map(Vec::len).max().unwrap_or(0);
            for j in 0..depth {
                out.push(pulses.iter().filter_map(|p| p.get(j).cloned()).collect());
            }
        }
        out
    }

    /// Number of noise steps per qubit in one run.
    pub fn noise_steps(&self) -> usize {
        self.timed_moments().iter().filter(|m| moment_is_timed(m)).count()
    }

    pub fn ideal_unitary(&self) -> CMatrix {
        let mut u = identity(self.dim());
        for m in &self.moments {
            for g in m {
                apply_gate_unitary(&mut u, g, self.n_qubits);
            }
        }
        u
    }

    /// One moment per line as `NAME(q[,q])` tokens, preceded by `qubits N`.
    pub fn to_text(&self) -> Result<String> {
        let mut s = format!("qubits {}\n", self.n_qubits);
        for m in &self.moments {
            if let Some(g) = m.iter().find(|g| matches!(g.kind, GateKind::Custom { .. })) {
                return Err(invalid(format!("custom gate {} has no text form", g.label())));
            }
            let line: Vec<String> = m.iter().map(Gate::label).collect();
            writeln!(s, "{}", line.join(" ")).expect("writing to a String");
        }
        Ok(s)
    }

    /// Parses the text form. `#` starts a comment; `CNOT(c,t)` must stand
    /// alone on its line and expands to its compiled moments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut n_qubits: Option<usize> = None;
        let mut moments: Vec<(usize, Vec<Gate>)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let perr = |message: String| Error::Parse { line: line_no, message };
            if let Some(rest) = line.strip_prefix("qubits") {
                let n = rest
                    .trim()
                    .trim_start_matches(':')
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| perr(format!("bad qubit count: {e}")))?;
                if n_qubits.is_some() || !moments.is_empty() {
                    return Err(perr("`qubits` must appear once, before any moment".into()));
                }
                n_qubits = Some(n);
                continue;
            }
            let tokens = split_tokens(line).map_err(perr)?;
            let mut gates = Vec::new();
            for (name, qs) in &tokens {
                if name.eq_ignore_ascii_case("CNOT") {
                    if tokens.len() != 1 || qs.len() != 2 {
                        return Err(perr("CNOT(c,t) must be alone on its line".into()));
                    }
                    let compiled = compile_cnot(qs[0], qs[1]).map_err(|e| perr(e.to_string()))?;
                    moments.extend(compiled.into_iter().map(|m| (line_no, m)));
                    continue;
                }
                gates.push(parse_gate(name, qs).map_err(perr)?);
            }
            if !gates.is_empty() {
                moments.push((line_no, gates));
            }
        }
        let inferred = moments
            .iter()
            .flat_map(|(_, m)| m.iter().flat_map(|g| g.qubits().iter().copied()))
            .max()
            .map_or(0, |q| q + 1);
        let mut circuit = QuantumCircuit::new(n_qubits.unwrap_or(inferred));
        for (line, m) in moments {
            circuit.push(m).map_err(|e| Error::Parse { line, message: e.to_string() })?;
        }
        Ok(circuit)
    }
}

fn split_tokens(line: &str) -> std::result::Result<Vec<(String, Vec<usize>)>, String> {
    let mut out = Vec::new();
    let mut rest = line;
    while !rest.trim().is_empty() {
        rest = rest.trim_start();
        let open = rest.find('(').ok_or_else(|| format!("expected NAME(qubits) in {rest:?}"))?;
        let close = rest.find(')').ok_or_else(|| format!("missing ')' in {rest:?}"))?;
        if close < open {
            return Err(format!("malformed token {rest:?}"));
        }
        let name = rest[..open].trim().to_string();
        let qs = rest[open + 1..close]
            .split(',')
            .map(|q| q.trim().parse::<usize>().map_err(|e| format!("bad qubit index {q:?}: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        out.push((name, qs));
        rest = &rest[close + 1..];
    }
    Ok(out)
}

fn parse_gate(name: &str, qs: &[usize]) -> std::result::Result<Gate, String> {
    let one = |f: fn(usize) -> Gate| {
        if qs.len() == 1 { Ok(f(qs[0])) } else { Err(format!("{name} takes one qubit")) }
    };
    match name.to_ascii_uppercase().as_str() {
        "X" => one(Gate::x),
        "Y_HALF" => one(Gate::y_half),
        "Y_NEG_HALF" => one(Gate::y_neg_half),
        "Z_HALF" => one(Gate::z_half),
        "Z_NEG_HALF" => one(Gate::z_neg_half),
        "H" => one(Gate::h),
        "I" => {
            if qs.len() == 1 {
                Gate::custom("I", qs.to_vec(), identity(2), 1).map_err(|e| e.to_string())
            } else {
                Err("I takes one qubit".into())
            }
        }
        "ZZ90" => {
            if qs.len() == 2 { Gate::zz90(qs[0], qs[1]).map_err(|e| e.to_string()) } else { Err("ZZ90 takes two qubits".into()) }
        }
        other => Err(format!("unknown gate {other}")),
    }
}

/// CNOT as `Y^{-1/2}(t)`, `X(t)`, `ZZ90(c,t)`, virtual `Z^{1/2}(c) Z^{-1/2}(t)`,
/// `X(t)`, `Y^{1/2}(t)`, one moment each.
pub fn compile_cnot(control: usize, target: usize) -> Result<Vec<Vec<Gate>>> {
    if control == target {
        return Err(invalid("CNOT control and target must differ"));
    }
    Ok(vec![
        vec![Gate::y_neg_half(target)],
        vec![Gate::x(target)],
        vec![Gate::zz90(control, target)?],
        vec![Gate::z_half(control), Gate::z_neg_half(target)],
        vec![Gate::x(target)],
        vec![Gate::y_half(target)],
    ])
}

pub const CHECK_QUBITS: usize = 5;
pub const ANCILLA: usize = 0;
/// Data-qubit interaction order of the check circuits.
pub const DATA_ORDER: [usize; 4] = [2, 1, 4, 3];

/// `X`-type stabilizer check: `H`, four compiled CNOTs ancilla to data, `H`.
pub fn build_x_check() -> QuantumCircuit {
    let mut c = QuantumCircuit::new(CHECK_QUBITS);
    c.push(vec![Gate::h(ANCILLA)]).expect("valid");
    for d in DATA_ORDER {
        c.extend(compile_cnot(ANCILLA, d).expect("distinct")).expect("valid");
    }
    c.push(vec![Gate::h(ANCILLA)]).expect("valid");
    c
}

/// `Z`-type stabilizer check: four CNOTs data to ancilla with the ancilla
/// rotations between consecutive CNOTs cancelled, leaving eight timed moments.
pub fn build_z_check() -> QuantumCircuit {
    let mut c = QuantumCircuit::new(CHECK_QUBITS);
    c.push(vec![Gate::y_neg_half(ANCILLA)]).expect("valid");
    c.push(vec![Gate::x(ANCILLA)]).expect("valid");
    for d in DATA_ORDER {
        c.push(vec![Gate::zz90(d, ANCILLA).expect("distinct")]).expect("valid");
        c.push(vec![Gate::z_half(d), Gate::z_neg_half(ANCILLA)]).expect("valid");
    }
    c.push(vec![Gate::x(ANCILLA)]).expect("valid");
    c.push(vec![Gate::y_half(ANCILLA)]).expect("valid");
    c
}

fn moment_is_timed(m: &[Gate]) -> bool {
    m.iter().any(|g| !g.is_virtual())
}

fn apply_gate_unitary(u: &mut CMatrix, g: &Gate, n: usize) {
    match g.qubits() {
        [q] => linalg::apply_single_left(u, &linalg::to_fixed(g.matrix()), *q, n),
        [a, b] => linalg::apply_two_left(u, g.matrix(), *a, *b, n),
        _ => unreachable!("gates act on one or two qubits"),
    }
}

/// The process of one realization: a unitary while every channel applied
/// has been unitary, a superoperator afterwards.
#[derive(Debug, Clone)]
pub enum ProcessState {
    Unitary(CMatrix),
    Super(CMatrix),
}

impl ProcessState {
    fn identity(n_qubits: usize) -> Self {
        Self::Unitary(identity(1 << n_qubits))
    }

    fn promote(&mut self) {
        if let Self::Unitary(u) = self {
            *self = Self::Super(SuperOperator::from_unitary(u).into_matrix());
        }
    }

    fn apply_gate(&mut self, g: &Gate, n: usize) {
        match self {
            Self::Unitary(u) => apply_gate_unitary(u, g, n),
            Self::Super(s) => {
                let conj = g.matrix().map(|z| z.conj());
                match g.qubits() {
                    [q] => {
                        linalg::apply_single_left(s, &linalg::to_fixed(&conj), *q, 2 * n);
                        linalg::apply_single_left(s, &linalg::to_fixed(g.matrix()), n + q, 2 * n);
                    }
                    [a, b] => {
                        linalg::apply_two_left(s, &conj, *a, *b, 2 * n);
                        linalg::apply_two_left(s, g.matrix(), n + a, n + b, 2 * n);
                    }
                    _ => unreachable!("gates act on one or two qubits"),
                }
            }
        }
    }

    /// Applies a single-qubit channel given by its Kraus operators.
    fn apply_local_channel(&mut self, ops: &[CMatrix], q: usize, n: usize) {
        if ops.len() == 1 {
            match self {
                Self::Unitary(u) => linalg::apply_single_left(u, &linalg::to_fixed(&ops[0]), q, n),
                Self::Super(_) => self.apply_gate(&Gate::custom_unchecked(&ops[0], q), n),
            }
            return;
        }
        self.promote();
        if let Self::Super(s) = self {
            let local = ops
                .iter()
                .fold(CMatrix::zeros(4, 4), |acc, m| acc + linalg::kron(&m.map(|z| z.conj()), m));
            linalg::apply_two_left(s, &local, q, n + q, 2 * n);
        }
    }

    pub fn into_superoperator(self) -> SuperOperator {
        match self {
            Self::Unitary(u) => SuperOperator::from_unitary(&u),
            Self::Super(s) => SuperOperator::new(s).expect("square N^2 matrix"),
        }
    }

    pub fn fidelity(&self, u_ideal: &CMatrix) -> f64 {
        match self {
            Self::Unitary(u) => {
                let n = u.nrows() as f64;
                (u_ideal.adjoint() * u).trace().norm_sqr() / (n * n)
            }
            Self::Super(s) => {
                let so = SuperOperator::new(s.clone()).expect("square N^2 matrix");
                process_fidelity(u_ideal, &so).expect("matching dimensions")
            }
        }
    }

    fn accumulate_into(&self, acc: &mut SuperOperatorAccumulator) {
        match self {
            Self::Unitary(u) => acc.push_matrix(SuperOperator::from_unitary(u).matrix()),
            Self::Super(s) => acc.push_matrix(s),
        }
    }
}

impl Gate {
    fn custom_unchecked(m: &CMatrix, q: usize) -> Gate {
        Gate { kind: GateKind::Custom { name: "noise".into(), duration: 0 }, qubits: vec![q], matrix: m.clone() }
    }
}

fn check_noise(circuit: &QuantumCircuit, noise: &[SchwarmaModel]) -> Result<()> {
    if noise.len() != circuit.n_qubits() {
        return Err(invalid(format!(
            "{} noise models for {} qubits",
            noise.len(),
            circuit.n_qubits()
        )));
    }
    if let Some(m) = noise.iter().find(|m| m.dim() != 2) {
        return Err(invalid(format!("per-qubit noise must be single-qubit, found dimension {}", m.dim())));
    }
    Ok(())
}

/// One realization as a [`ProcessState`]; models are stepped once per timed
/// moment on every qubit, in qubit order.
pub fn simulate_process(
    circuit: &QuantumCircuit,
    noise: &mut [SchwarmaModel],
    rng: &mut SimRng,
) -> Result<ProcessState> {
    check_noise(circuit, noise)?;
    let n = circuit.n_qubits();
    let mut state = ProcessState::identity(n);
    for moment in circuit.timed_moments() {
        for g in &moment {
            state.apply_gate(g, n);
        }
        if moment_is_timed(&moment) {
            for (q, model) in noise.iter_mut().enumerate() {
                let k = model.step(rng)?;
                state.apply_local_channel(k.operators(), q, n);
            }
        }
    }
    Ok(state)
}

/// One noisy realization of the circuit's process.
pub fn simulate_noisy(
    circuit: &QuantumCircuit,
    noise: &mut [SchwarmaModel],
    rng: &mut SimRng,
) -> Result<SuperOperator> {
    Ok(simulate_process(circuit, noise, rng)?.into_superoperator())
}

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloResult {
    #[serde(with = "crate::quantum::complex_matrix_serde")]
    pub mean: CMatrix,
    #[serde(with = "crate::quantum::complex_matrix_serde")]
    pub standard_error: CMatrix,
    pub fidelities: Vec<f64>,
    pub n_samples: usize,
    pub master_seed: u64,
}

impl MonteCarloResult {
    pub fn mean_superoperator(&self) -> SuperOperator {
        SuperOperator::new(self.mean.clone()).expect("square N^2 matrix")
    }

    pub fn fidelity_stats(&self) -> MeanWithError {
        MeanWithError::of(&self.fidelities)
    }

    pub fn write_fidelities_csv(&self, path: &Path) -> Result<()> {
        write_two_column_csv(path, ("sample", "fidelity"), self.fidelities.iter().copied().enumerate())
    }

    /// Mean superoperator and its standard error with run metadata.
    pub fn write_json(&self, path: &Path, noise_spec: &serde_json::Value) -> Result<()> {
        #[derive(Serialize)]
        struct Doc<'a> {
            seed: u64,
            n_samples: usize,
            noise: &'a serde_json::Value,
            mean_fidelity: f64,
            fidelity_standard_error: f64,
            #[serde(with = "crate::quantum::complex_matrix_serde")]
            mean: &'a CMatrix,
            #[serde(with = "crate::quantum::complex_matrix_serde")]
            standard_error: &'a CMatrix,
        }
        let stats = self.fidelity_stats();
        let doc = Doc {
            seed: self.master_seed,
            n_samples: self.n_samples,
            noise: noise_spec,
            mean_fidelity: stats.mean,
            fidelity_standard_error: stats.standard_error,
            mean: &self.mean,
            standard_error: &self.standard_error,
        };
        ensure_parent(path)?;
        std::fs::write(path, serde_json::to_string_pretty(&doc)?)?;
        Ok(())
    }
}

/// Sample mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanWithError {
    pub mean: f64,
    pub standard_error: f64,
}

impl MeanWithError {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Self { mean: f64::NAN, standard_error: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n;
        if xs.len() < 2 {
            return Self { mean, standard_error: 0.0 };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self { mean, standard_error: (var / n).sqrt() }
    }
}

fn fresh_models(templates: &[SchwarmaModel]) -> Vec<SchwarmaModel> {
    templates
        .iter()
        .map(|m| {
            let mut m = m.clone();
            m.reset();
            m
        })
        .collect()
}

fn run_trials<T, F>(n_samples: usize, trial: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    (0..n_samples).into_par_iter().map(&trial).collect()
}

/// Averages `n_samples` independent realizations. Trial `t` uses fresh
/// clones of `templates` and RNG substream `t` of `master_seed`.
pub fn monte_carlo_average(
    circuit: &QuantumCircuit,
    templates: &[SchwarmaModel],
    n_samples: usize,
    master_seed: u64,
) -> Result<MonteCarloResult> {
    if n_samples == 0 {
        return Err(invalid("need at least one Monte Carlo sample"));
    }
    check_noise(circuit, templates)?;
    let u_ideal = circuit.ideal_unitary();
    let dim = circuit.dim();
    let n_chunks = n_samples.div_ceil(TRIAL_CHUNK);
    let chunks: Vec<(SuperOperatorAccumulator, Vec<f64>)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| -> Result<_> {
            let mut acc = SuperOperatorAccumulator::new(dim);
            let mut fids = Vec::with_capacity(TRIAL_CHUNK);
            for t in c * TRIAL_CHUNK..((c + 1) * TRIAL_CHUNK).min(n_samples) {
                let mut models = fresh_models(templates);
                let mut rng = substream(master_seed, t as u64);
                let state = simulate_process(circuit, &mut models, &mut rng)?;
                fids.push(state.fidelity(&u_ideal));
                state.accumulate_into(&mut acc);
            }
            Ok((acc, fids))
        })
        .collect::<Result<_>>()?;
    let mut total = SuperOperatorAccumulator::new(dim);
    let mut fidelities = Vec::with_capacity(n_samples);
    for (acc, f) in &chunks {
        total.merge(acc);
        fidelities.extend_from_slice(f);
    }
    let avg = total.finish()?;
    Ok(MonteCarloResult {
        mean: avg.mean.into_matrix(),
        standard_error: avg.standard_error,
        fidelities,
        n_samples,
        master_seed,
    })
}

/// Per-sample process fidelities only, skipping the superoperator average.
pub fn monte_carlo_fidelities(
    circuit: &QuantumCircuit,
    templates: &[SchwarmaModel],
    n_samples: usize,
    master_seed: u64,
) -> Result<Vec<f64>> {
    check_noise(circuit, templates)?;
    let u_ideal = circuit.ideal_unitary();
    run_trials(n_samples, |t| {
        let mut models = fresh_models(templates);
        let mut rng = substream(master_seed, t as u64);
        Ok(simulate_process(circuit, &mut models, &mut rng)?.fidelity(&u_ideal))
    })
}

/// Probability that measuring `qubit` of `U|psi>` yields 1.
pub fn excited_probability(u: &CMatrix, psi: &[Complex64], qubit: usize, n_qubits: usize) -> f64 {
    let v = u * nalgebra::DVector::from_column_slice(psi);
    let mask = 1usize << (n_qubits - 1 - qubit);
    v.iter().enumerate().filter(|(i, _)| i & mask != 0).map(|(_, z)| z.norm_sqr()).sum()
}

/// Product state of single-qubit vectors, qubit 0 first.
pub fn product_state(qubits: &[[Complex64; 2]]) -> Vec<Complex64> {
    qubits.iter().fold(vec![ONE], |acc, q| {
        acc.iter().flat_map(|a| [a * q[0], a * q[1]]).collect()
    })
}

pub fn ket0() -> [Complex64; 2] {
    [ONE, ZERO]
}

pub fn ket1() -> [Complex64; 2] {
    [ZERO, ONE]
}

pub fn ket_plus() -> [Complex64; 2] {
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [s, s]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arma::ArmaModel;
    use crate::quantum::is_cptp;
    use crate::rng::seeded;
    use crate::schwarma::{z_dephasing_step, NoiseSource};

    fn cnot(n_control_first: bool) -> CMatrix {
        let mut m = CMatrix::zeros(4, 4);
        let perm: [usize; 4] = if n_control_first { [0, 1, 3, 2] } else { [0, 3, 2, 1] };
        for (i, &j) in perm.iter().enumerate() {
            m[(j, i)] = ONE;
        }
        m
    }

    fn circuit_of(n: usize, moments: Vec<Vec<Gate>>) -> QuantumCircuit {
        let mut c = QuantumCircuit::new(n);
        c.extend(moments).unwrap();
        c
    }

    #[test]
    fn gate_matrices_are_unitary_and_consistent() {
        use std::f64::consts::FRAC_PI_2;
        let x = Gate::x(0);
        assert!(linalg::max_abs_diff(x.matrix(), &pauli_rotation(linalg::pauli_x(), FRAC_PI_2)) < 1e-14);
        let h = Gate::h(0);
        let pulses = h.pulses();
        let via = pulses[1].matrix() * pulses[0].matrix();
        assert!(linalg::max_diff_up_to_phase(&via, h.matrix()) < 1e-14);
        for g in [Gate::x(0), Gate::y_half(0), Gate::y_neg_half(0), Gate::z_half(0), Gate::h(0), Gate::zz90(0, 1).unwrap()] {
            assert!(linalg::unitarity_residual(g.matrix()) < 1e-12);
        }
        assert!(Gate::zz90(1, 1).is_err());
    }

    #[test]
    fn compiled_cnot_matches_up_to_phase() {
        let c = circuit_of(2, compile_cnot(0, 1).unwrap());
        assert!(linalg::max_diff_up_to_phase(&c.ideal_unitary(), &cnot(true)) < 1e-12);
        let rev = circuit_of(2, compile_cnot(1, 0).unwrap());
        assert!(linalg::max_diff_up_to_phase(&rev.ideal_unitary(), &cnot(false)) < 1e-12);
        let u = c.ideal_unitary();
        assert!((excited_probability(&u, &product_state(&[ket0(), ket0()]), 1, 2)).abs() < 1e-24);
        let out = &u * nalgebra::DVector::from_column_slice(&product_state(&[ket1(), ket0()]));
        assert!((out[3].norm_sqr() - 1.0).abs() < 1e-12);
        assert!(compile_cnot(2, 2).is_err());
    }

    #[test]
    fn z_check_has_eight_timed_moments_and_reads_parity() {
        let c = build_z_check();
        assert_eq!(c.noise_steps(), 8);
        let u = c.ideal_unitary();
        let zeros = product_state(&[ket0(); 5]);
        assert!(excited_probability(&u, &zeros, ANCILLA, 5) < 1e-24);
        for d in 1..5 {
            let mut qs = [ket0(); 5];
            qs[d] = ket1();
            assert!((excited_probability(&u, &product_state(&qs), ANCILLA, 5) - 1.0).abs() < 1e-12);
        }
        // two flips restore even parity
        let mut qs = [ket0(); 5];
        qs[1] = ket1();
        qs[3] = ket1();
        assert!(excited_probability(&u, &product_state(&qs), ANCILLA, 5) < 1e-12);
    }

    #[test]
    fn x_check_reads_x_parity() {
        let c = build_x_check();
        assert_eq!(c.noise_steps(), 2 + 4 * 5 + 2);
        let u = c.ideal_unitary();
        let mut qs = [ket_plus(); 5];
        qs[ANCILLA] = ket0();
        assert!(excited_probability(&u, &product_state(&qs), ANCILLA, 5) < 1e-12);
        let minus = [ket_plus()[0], -ket_plus()[1]];
        qs[2] = minus;
        assert!((excited_probability(&u, &product_state(&qs), ANCILLA, 5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn moments_reject_overlap_and_range() {
        let mut c = QuantumCircuit::new(2);
        assert!(c.push(vec![Gate::x(0), Gate::zz90(0, 1).unwrap()]).is_err());
        assert!(c.push(vec![Gate::x(2)]).is_err());
    }

    #[test]
    fn zero_noise_gives_ideal_superoperator() {
        let c = build_z_check();
        let mut noise = vec![SchwarmaModel::noiseless(); 5];
        let s = simulate_noisy(&c, &mut noise, &mut seeded(0)).unwrap();
        let ideal = SuperOperator::from_unitary(&c.ideal_unitary());
        assert!(linalg::max_abs_diff(s.matrix(), ideal.matrix()) < 1e-13);
        let mc = monte_carlo_average(&c, &vec![SchwarmaModel::noiseless(); 5], 3, 1).unwrap();
        assert!(mc.standard_error.iter().all(|e| e.norm() < 1e-7));
        assert!(mc.fidelities.iter().all(|f| (f - 1.0).abs() < 1e-12));
    }

    #[test]
    fn single_step_reduction() {
        let mut c = QuantumCircuit::new(1);
        c.push_idle();
        // an all-ones MA model with scale 0 is silent, so drive one step by hand
        let model = SchwarmaModel::z_dephasing(NoiseSource::real(ArmaModel::white(), 0.3)).unwrap();
        let mut rng = seeded(12);
        let mut probe = model.clone();
        let y = probe.next_values(&mut seeded(12))[0].re;
        let s = simulate_noisy(&c, &mut [model], &mut rng).unwrap();
        let want = z_dephasing_step(y).to_superoperator();
        assert!(linalg::max_abs_diff(s.matrix(), want.matrix()) < 1e-15);
    }

    #[test]
    fn idle_qubits_accumulate_noise() {
        // a gate on qubit 0 only: qubit 1 still dephases every moment
        let mut c = QuantumCircuit::new(2);
        for _ in 0..4 {
            c.push(vec![Gate::custom("I", vec![0], identity(2), 1).unwrap()]).unwrap();
        }
        let t = SchwarmaModel::z_dephasing(NoiseSource::real(ArmaModel::white(), 0.2)).unwrap();
        let mut noise = vec![SchwarmaModel::noiseless(), t.clone()];
        let mut rng = seeded(4);
        let s = simulate_process(&c, &mut noise, &mut rng).unwrap();
        let mut probe = t.clone();
        let mut r2 = seeded(4);
        let mut total = 0.0;
        for _ in 0..4 {
            probe_skip(&mut r2);
            total += probe.next_values(&mut r2)[0].re;
        }
        let want = linalg::kron(&identity(2), &z_dephasing_step(total).operators()[0]);
        match s {
            ProcessState::Unitary(u) => assert!(linalg::max_abs_diff(&u, &want) < 1e-13),
            ProcessState::Super(_) => panic!("dephasing keeps the process unitary"),
        }
    }

    /// The silent model on qubit 0 still draws one normal per step.
    fn probe_skip(r: &mut SimRng) {
        let mut silent = SchwarmaModel::noiseless();
        silent.next_values(r);
    }

    #[test]
    fn determinism_contract() {
        let c = build_z_check();
        let t = SchwarmaModel::z_dephasing(NoiseSource::real(ArmaModel::new(vec![0.8], vec![1.0]).unwrap(), 0.05)).unwrap();
        let noise = vec![t; 5];
        let a = monte_carlo_average(&c, &noise, 40, 7).unwrap();
        let b = monte_carlo_average(&c, &noise, 40, 7).unwrap();
        let d = monte_carlo_average(&c, &noise, 40, 8).unwrap();
        assert_eq!(a.fidelities, b.fidelities);
        assert_eq!(a.mean, b.mean);
        assert_ne!(a.fidelities, d.fidelities);
        let single = monte_carlo_average(&c, &noise, 1, 7).unwrap();
        let mut m = noise.clone();
        let direct = simulate_noisy(&c, &mut m, &mut substream(7, 0)).unwrap();
        assert!(linalg::max_abs_diff(&single.mean, direct.matrix()) < 1e-15);
        let fids = monte_carlo_fidelities(&c, &noise, 40, 7).unwrap();
        assert_eq!(fids, a.fidelities);
    }

    #[test]
    fn dissipative_noise_promotes_to_superoperator() {
        let c = circuit_of(2, compile_cnot(0, 1).unwrap());
        let damp = SchwarmaModel::amplitude_damping(NoiseSource::complex(ArmaModel::white(), 0.1)).unwrap();
        let mut noise = vec![damp.clone(), damp];
        let s = simulate_noisy(&c, &mut noise, &mut seeded(3)).unwrap();
        assert!(is_cptp(&s).is_cptp);
        let f = process_fidelity(&c.ideal_unitary(), &s).unwrap();
        assert!(f < 1.0 && f > 0.8);
        assert!(simulate_noisy(&c, &mut noise[..1], &mut seeded(3)).is_err());
    }

    #[test]
    fn text_round_trip() {
        let c = build_z_check();
        let text = c.to_text().unwrap();
        let back = QuantumCircuit::parse(&text).unwrap();
        assert_eq!(back, c);
        let with_cnot = QuantumCircuit::parse("# bell\nH(0)\nCNOT(0,1)\n").unwrap();
        assert_eq!(with_cnot.moments().len(), 7);
        let err = QuantumCircuit::parse("X(0)\nFOO(1)\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(matches!(QuantumCircuit::parse("X(0) X(0)"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn exports() {
        let dir = tempfile::tempdir().unwrap();
        let c = build_z_check();
        let mc = monte_carlo_average(&c, &vec![SchwarmaModel::noiseless(); 5], 2, 1).unwrap();
        mc.write_fidelities_csv(&dir.path().join("f.csv")).unwrap();
        mc.write_json(&dir.path().join("m.json"), &serde_json::json!({"kind": "none"})).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
        assert_eq!(doc["n_samples"], 2);
        assert_eq!(doc["seed"], 1);
    }

    #[test]
    fn mean_with_error_basics() {
        let m = MeanWithError::of(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m.mean - 2.5).abs() < 1e-15);
        assert!((m.standard_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }
}
