//! States, channels and superoperators with the checks that keep them
//! physical.
//!
//! Superoperators act on column-stacked density matrices (see
//! [`crate::linalg`]), so a Kraus set `{M_k}` has superoperator
//! `sum_k conj(M_k) kron M_k`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io::ensure_parent;
use crate::linalg::{self, hermitian_eigenvalues, identity, kron, CMatrix, ONE, ZERO};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const STATE_EIGEN_TOL: f64 = 1e-10;
pub const CHOI_EIGEN_TOL: f64 = 1e-8;
pub const TP_TOL: f64 = 1e-10;
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// A normalized, Hermitian, positive semidefinite state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    data: CMatrix,
}

impl DensityMatrix {
    pub fn new(data: CMatrix) -> Result<Self> {
        if !data.is_square() {
            return Err(invalid("density matrix must be square"));
        }
        let herm = linalg::max_abs_diff(&data, &data.adjoint());
        if herm > HERMITIAN_TOL {
            return Err(invalid(format!("density matrix not Hermitian (residual {herm:.3e})")));
        }
        let tr = data.trace();
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(invalid(format!("density matrix trace {tr} is not 1")));
        }
        let min_eig = hermitian_eigenvalues(&data)[0];
        if min_eig < -STATE_EIGEN_TOL {
            return Err(invalid(format!("density matrix has eigenvalue {min_eig:.3e}")));
        }
        Ok(Self { data })
    }

    /// `|psi><psi|` for a normalized vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let v = DVector::from_column_slice(psi);
        let n = v.norm();
        if (n - 1.0).abs() > TRACE_TOL {
            return Err(invalid(format!("state vector norm {n} is not 1")));
        }
        Self::new(&v * v.adjoint())
    }

    /// Computational basis state `|index>` of dimension `dim`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        m[(index, index)] = ONE;
        Self { data: m }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { data: identity(dim) / Complex64::new(dim as f64, 0.0) }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn vectorized(&self) -> DVector<Complex64> {
        linalg::vec_col(&self.data)
    }

    /// Probability of measuring basis state `index`.
    pub fn population(&self, index: usize) -> f64 {
        self.data[(index, index)].re
    }
}

/// Kraus operators `{M_k}` with `sum M_k^dagger M_k = I` and `K <= N^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausSet {
    ops: Vec<CMatrix>,
}

impl KrausSet {
    pub fn new(ops: Vec<CMatrix>) -> Result<Self> {
        let set = Self::new_unchecked(ops)?;
        let residual = set.tp_residual();
        if residual > TP_TOL {
            return Err(invalid(format!("Kraus operators are not trace preserving (residual {residual:.3e})")));
        }
        Ok(set)
    }

    /// Shape checks only; used where trace preservation holds by construction.
    pub(crate) fn new_unchecked(ops: Vec<CMatrix>) -> Result<Self> {
        let first = ops.first().ok_or_else(|| invalid("a Kraus set needs at least one operator"))?;
        let n = first.nrows();
        if ops.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(invalid("Kraus operators must all be N x N"));
        }
        if ops.len() > n * n {
            return Err(invalid(format!("{} Kraus operators exceed the N^2 = {} bound", ops.len(), n * n)));
        }
        Ok(Self { ops })
    }

    pub fn unitary(u: CMatrix) -> Result<Self> {
        Self::new(vec![u])
    }

    pub fn identity(dim: usize) -> Self {
        Self { ops: vec![identity(dim)] }
    }

    pub fn dim(&self) -> usize {
        self.ops[0].nrows()
    }

    pub fn rank_bound(&self) -> usize {
        self.ops.len()
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn into_operators(self) -> Vec<CMatrix> {
        self.ops
    }

    pub fn tp_residual(&self) -> f64 {
        let n = self.dim();
        let sum = self.ops.iter().fold(CMatrix::zeros(n, n), |acc, m| acc + m.adjoint() * m);
        linalg::max_abs_diff(&sum, &identity(n))
    }

    pub fn to_stiefel(&self) -> StiefelPoint {
        let n = self.dim();
        let mut m = CMatrix::zeros(self.ops.len() * n, n);
        for (k, op) in self.ops.iter().enumerate() {
            m.view_mut((k * n, 0), (n, n)).copy_from(op);
        }
        StiefelPoint { matrix: m, dim: n }
    }

    pub fn to_superoperator(&self) -> SuperOperator {
        kraus_to_superoperator(self)
    }
}

/// `KN x N` matrix with orthonormal columns whose `N x N` blocks are Kraus
/// operators.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    matrix: CMatrix,
    dim: usize,
}

impl StiefelPoint {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let n = matrix.ncols();
        if n == 0 || matrix.nrows() % n != 0 {
            return Err(invalid(format!("{}x{} is not a stacked KN x N matrix", matrix.nrows(), n)));
        }
        let p = Self { matrix, dim: n };
        let r = p.orthonormality_residual();
        if r > ORTHONORMAL_TOL {
            return Err(invalid(format!("columns are not orthonormal (residual {r:.3e})")));
        }
        Ok(p)
    }

    pub(crate) fn from_parts(matrix: CMatrix, dim: usize) -> Self {
        Self { matrix, dim }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank_bound(&self) -> usize {
        self.matrix.nrows() / self.dim
    }

    pub fn orthonormality_residual(&self) -> f64 {
        linalg::max_abs_diff(&(self.matrix.adjoint() * &self.matrix), &identity(self.dim))
    }

    pub fn to_kraus(&self) -> KrausSet {
        let n = self.dim;
        let ops = (0..self.rank_bound())
            .map(|k| self.matrix.view((k * n, 0), (n, n)).into_owned())
            .collect();
        KrausSet { ops }
    }

    /// Kraus set without blocks that are identically zero, keeping at least one.
    pub fn to_kraus_compact(&self) -> KrausSet {
        let mut ops: Vec<CMatrix> = self.to_kraus().ops;
        let first = ops[0].clone();
        ops.retain(|m| m.iter().any(|v| *v != ZERO));
        if ops.is_empty() {
            ops.push(first);
        }
        KrausSet { ops }
    }
}

/// `N^2 x N^2` matrix acting on column-stacked density matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperOperator {
    #[serde(with = "complex_matrix_serde")]
    data: CMatrix,
    dim: usize,
}

impl SuperOperator {
    pub fn new(data: CMatrix) -> Result<Self> {
        let n2 = data.nrows();
        let n = (n2 as f64).sqrt().round() as usize;
        if !data.is_square() || n * n != n2 {
            return Err(invalid(format!("{}x{} is not an N^2 x N^2 superoperator", data.nrows(), data.ncols())));
        }
        Ok(Self { data, dim: n })
    }

    pub fn identity(dim: usize) -> Self {
        Self { data: identity(dim * dim), dim }
    }

    /// `conj(U) kron U`.
    pub fn from_unitary(u: &CMatrix) -> Self {
        Self { data: kron(&u.map(|z| z.conj()), u), dim: u.nrows() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<CMatrix> {
        check_dim(self.dim, rho.dim())?;
        let v = &self.data * rho.vectorized();
        Ok(linalg::unvec_col(v.as_slice(), self.dim))
    }

    /// `self` after `first`.
    pub fn after(&self, first: &SuperOperator) -> Result<SuperOperator> {
        compose(self, first)
    }

    /// Choi matrix `sum_{ij} |i><j| kron Phi(|i><j|)`.
    pub fn choi(&self) -> CMatrix {
        let n = self.dim;
        let mut c = CMatrix::zeros(n * n, n * n);
        for i in 0..n {
            for j in 0..n {
                let col = self.data.column(j * n + i);
                let out = linalg::unvec_col(col.as_slice(), n);
                c.view_mut((i * n, j * n), (n, n)).copy_from(&out);
            }
        }
        c
    }

    /// Largest deviation of `Tr Phi(|i><j|)` from `delta_ij`.
    pub fn tp_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let tr: Complex64 = (0..n).map(|a| self.data[(a * n + a, j * n + i)]).sum();
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((tr - target).norm());
            }
        }
        worst
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        ensure_parent(path)?;
        let mut w = BufWriter::new(File::create(path)?);
        let n2 = self.data.nrows();
        writeln!(w, "{n2},{n2}")?;
        for r in 0..n2 {
            let row: Vec<String> = (0..n2)
                .flat_map(|c| {
                    let z = self.data[(r, c)];
                    [format!("{:.17e}", z.re), format!("{:.17e}", z.im)]
                })
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();
        let header = lines.next().ok_or(Error::Parse { line: 1, message: "empty file".into() })??;
        let dims: Vec<usize> = header
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { line: 1, message: format!("bad dimension header: {e}") })?;
        if dims.len() != 2 || dims[0] != dims[1] {
            return Err(Error::Parse { line: 1, message: format!("header {header:?} is not `n,n`") });
        }
        let n2 = dims[0];
        let mut data = CMatrix::zeros(n2, n2);
        for r in 0..n2 {
            let line_no = r + 2;
            let line = lines
                .next()
                .ok_or(Error::Parse { line: line_no, message: "missing row".into() })??;
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })?;
            if vals.len() != 2 * n2 {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {} values, found {}", 2 * n2, vals.len()),
                });
            }
            for c in 0..n2 {
                data[(r, c)] = Complex64::new(vals[2 * c], vals[2 * c + 1]);
            }
        }
        Self::new(data)
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub fn kraus_to_superoperator(k: &KrausSet) -> SuperOperator {
    let n = k.dim();
    let data = k
        .ops
        .iter()
        .fold(CMatrix::zeros(n * n, n * n), |acc, m| acc + kron(&m.map(|z| z.conj()), m));
    SuperOperator { data, dim: n }
}

/// `sum_k M_k rho M_k^dagger`, re-validated as a density matrix.
pub fn apply_channel(k: &KrausSet, rho: &DensityMatrix) -> Result<DensityMatrix> {
    check_dim(k.dim(), rho.dim())?;
    let n = k.dim();
    let out = k
        .ops
        .iter()
        .fold(CMatrix::zeros(n, n), |acc, m| acc + m * rho.matrix() * m.adjoint());
    // restore exact Hermiticity lost to round-off
    let out = (&out + out.adjoint()) * Complex64::new(0.5, 0.0);
    DensityMatrix::new(out)
}

/// `(1/N^2) Re Tr[(U^T kron U^dagger) S]`.
pub fn process_fidelity(u_ideal: &CMatrix, s: &SuperOperator) -> Result<f64> {
    let n = u_ideal.nrows();
    check_dim(s.dim, n)?;
    // Tr[(U^T kron U^dag) S] = sum_{pq} K_pq S_qp with
    // K_{(aN+b),(cN+d)} = U_ca conj(U_db)
    let sd = &s.data;
    let mut tr = ZERO;
    for a in 0..n {
        for b in 0..n {
            let p = a * n + b;
            for c in 0..n {
                let uca = u_ideal[(c, a)];
                for d in 0..n {
                    let q = c * n + d;
                    tr += uca * u_ideal[(d, b)].conj() * sd[(q, p)];
                }
            }
        }
    }
    let f = tr / (n * n) as f64;
    if f.im.abs() > 1e-8 {
        log::warn!("process fidelity has imaginary residue {:.3e}", f.im);
    }
    Ok(f.re)
}

/// Bloch-origin shift `beta_i = Tr(sigma_i Phi(I/2))` of a qubit channel and
/// its unitality `1 - |beta|`.
pub fn nonunital_shift(s: &SuperOperator) -> Result<([f64; 3], f64)> {
    if s.dim != 2 {
        return Err(Error::UnsupportedDimension(s.dim));
    }
    let half_identity = DVector::from_column_slice(&[
        Complex64::new(0.5, 0.0),
        ZERO,
        ZERO,
        Complex64::new(0.5, 0.0),
    ]);
    let out = linalg::unvec_col((&s.data * half_identity).as_slice(), 2);
    let paulis = linalg::paulis();
    let mut beta = [0.0; 3];
    for (b, p) in beta.iter_mut().zip(&paulis) {
        *b = (p * &out).trace().re;
    }
    let norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    Ok((beta, 1.0 - norm))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CptpReport {
    pub is_cptp: bool,
    pub min_choi_eigenvalue: f64,
    pub tp_residual: f64,
}

pub fn is_cptp(s: &SuperOperator) -> CptpReport {
    let choi = s.choi();
    let choi = (&choi + choi.adjoint()) * Complex64::new(0.5, 0.0);
    let min_choi_eigenvalue = hermitian_eigenvalues(&choi)[0];
    let tp_residual = s.tp_residual();
    CptpReport {
        is_cptp: min_choi_eigenvalue >= -CHOI_EIGEN_TOL && tp_residual <= TP_TOL,
        min_choi_eigenvalue,
        tp_residual,
    }
}

/// `a` after `b`: the matrix product `a * b`.
pub fn compose(a: &SuperOperator, b: &SuperOperator) -> Result<SuperOperator> {
    check_dim(a.dim, b.dim)?;
    Ok(SuperOperator { data: &a.data * &b.data, dim: a.dim })
}

/// Elementwise mean and standard error of the mean.
#[derive(Debug, Clone)]
pub struct AveragedSuperOperator {
    pub mean: SuperOperator,
    /// Standard error of real and imaginary parts, stored as `re + i im`.
    pub standard_error: CMatrix,
    pub count: usize,
}

/// Streaming accumulator behind [`average`].
#[derive(Debug, Clone)]
pub struct SuperOperatorAccumulator {
    sum: CMatrix,
    sum_sq: CMatrix,
    count: usize,
    dim: usize,
}

impl SuperOperatorAccumulator {
    pub fn new(dim: usize) -> Self {
        let n2 = dim * dim;
        Self { sum: CMatrix::zeros(n2, n2), sum_sq: CMatrix::zeros(n2, n2), count: 0, dim }
    }

    pub fn push(&mut self, s: &SuperOperator) -> Result<()> {
        check_dim(self.dim, s.dim)?;
        self.push_matrix(&s.data);
        Ok(())
    }

    pub(crate) fn push_matrix(&mut self, m: &CMatrix) {
        self.sum += m;
        self.sum_sq.zip_apply(m, |acc, z| *acc += Complex64::new(z.re * z.re, z.im * z.im));
        self.count += 1;
    }

    pub fn merge(&mut self, other: &SuperOperatorAccumulator) {
        self.sum += &other.sum;
        self.sum_sq += &other.sum_sq;
        self.count += other.count;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(&self) -> Result<AveragedSuperOperator> {
        if self.count == 0 {
            return Err(invalid("cannot average an empty collection"));
        }
        let n = self.count as f64;
        let mean = &self.sum / Complex64::new(n, 0.0);
        let mut se = CMatrix::zeros(mean.nrows(), mean.ncols());
        if self.count > 1 {
            for ((e, m), q) in se.iter_mut().zip(mean.iter()).zip(self.sum_sq.iter()) {
                let var_re = ((q.re / n - m.re * m.re) * n / (n - 1.0)).max(0.0);
                let var_im = ((q.im / n - m.im * m.im) * n / (n - 1.0)).max(0.0);
                *e = Complex64::new((var_re / n).sqrt(), (var_im / n).sqrt());
            }
        }
        Ok(AveragedSuperOperator { mean: SuperOperator { data: mean, dim: self.dim }, standard_error: se, count: self.count })
    }
}

pub fn average(items: &[SuperOperator]) -> Result<AveragedSuperOperator> {
    let first = items.first().ok_or_else(|| invalid("cannot average an empty collection"))?;
    let mut acc = SuperOperatorAccumulator::new(first.dim);
    for s in items {
        acc.push(s)?;
    }
    acc.finish()
}

pub(crate) mod complex_matrix_serde {
    use super::CMatrix;
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr {
        rows: usize,
        cols: usize,
        /// Row-major `[re, im]` pairs.
        entries: Vec<[f64; 2]>,
    }

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        let entries = (0..m.nrows())
            .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
            .map(|(r, c)| [m[(r, c)].re, m[(r, c)].im])
            .collect();
        Repr { rows: m.nrows(), cols: m.ncols(), entries }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let r = Repr::deserialize(d)?;
        if r.entries.len() != r.rows * r.cols {
            return Err(serde::de::Error::custom("entry count does not match shape"));
        }
        let vals: Vec<Complex64> = r.entries.iter().map(|[re, im]| Complex64::new(*re, *im)).collect();
        Ok(CMatrix::from_row_slice(r.rows, r.cols, &vals))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pauli_x, pauli_z};
    use crate::rng::seeded;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_state<R: Rng>(rng: &mut R, n: usize) -> DensityMatrix {
        let g = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let m = &g * g.adjoint();
        let tr = m.trace();
        let m = m / tr;
        DensityMatrix::new((&m + m.adjoint()) * c(0.5)).unwrap()
    }

    fn random_unitary<R: Rng>(rng: &mut R, n: usize) -> CMatrix {
        let g = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let h = (&g + g.adjoint()) * c(0.5);
        linalg::expm(&(h * Complex64::new(0.0, -1.0)))
    }

    fn dephasing(p: f64) -> KrausSet {
        KrausSet::new(vec![identity(2) * c((1.0 - p).sqrt()), pauli_z() * c(p.sqrt())]).unwrap()
    }

    #[test]
    fn identity_kraus_superoperator() {
        let s = KrausSet::identity(2).to_superoperator();
        assert_eq!(s.matrix(), &identity(4));
    }

    #[test]
    fn pauli_x_superoperator_on_basis() {
        let s = KrausSet::unitary(pauli_x()).unwrap().to_superoperator();
        for i in 0..2 {
            for j in 0..2 {
                let mut e = CMatrix::zeros(2, 2);
                e[(i, j)] = ONE;
                let out = linalg::unvec_col((s.matrix() * linalg::vec_col(&e)).as_slice(), 2);
                let expected = pauli_x() * &e * pauli_x();
                assert!(linalg::max_abs_diff(&out, &expected) < 1e-15);
            }
        }
    }

    #[test]
    fn unitary_mixing_leaves_superoperator_unchanged() {
        let mut rng = seeded(3);
        let k = dephasing(0.3);
        let v = random_unitary(&mut rng, 2);
        let mixed: Vec<CMatrix> = (0..2)
            .map(|i| (0..2).fold(CMatrix::zeros(2, 2), |acc, j| acc + &k.operators()[j] * v[(i, j)]))
            .collect();
        let k2 = KrausSet::new(mixed).unwrap();
        assert!(linalg::max_abs_diff(k.to_superoperator().matrix(), k2.to_superoperator().matrix()) < 1e-12);
    }

    #[test]
    fn superoperator_agrees_with_kraus_application() {
        let mut rng = seeded(11);
        let u = random_unitary(&mut rng, 4);
        let ops = vec![
            &u * c(0.6f64.sqrt()),
            random_unitary(&mut rng, 4) * c(0.4f64.sqrt()),
        ];
        let k = KrausSet::new(ops).unwrap();
        let s = k.to_superoperator();
        for _ in 0..100 {
            let rho = random_state(&mut rng, 4);
            let direct = apply_channel(&k, &rho).unwrap();
            let via = s.apply(&rho).unwrap();
            assert!(linalg::max_abs_diff(direct.matrix(), &via) < 1e-12);
        }
    }

    #[test]
    fn apply_channel_examples() {
        let plus = DensityMatrix::pure(&[c(0.5f64.sqrt()), c(0.5f64.sqrt())]).unwrap();
        let out = apply_channel(&dephasing(0.5), &plus).unwrap();
        assert!(linalg::max_abs_diff(out.matrix(), DensityMatrix::maximally_mixed(2).matrix()) < 1e-15);
        let same = apply_channel(&KrausSet::identity(2), &plus).unwrap();
        assert_eq!(same, plus);
        assert!(matches!(
            apply_channel(&KrausSet::identity(4), &plus),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn density_matrix_validation() {
        let mut m = identity(2) * c(0.5);
        m[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        assert!(DensityMatrix::new(identity(2)).is_err());
        let neg = CMatrix::from_diagonal(&DVector::from_vec(vec![c(1.5), c(-0.5)]));
        assert!(DensityMatrix::new(neg).is_err());
    }

    #[test]
    fn kraus_bound_and_tp_checks() {
        assert!(KrausSet::new(vec![identity(2) * c(0.5); 5]).is_err());
        assert!(KrausSet::new(vec![identity(2) * c(0.5)]).is_err());
    }

    #[test]
    fn stiefel_round_trip_is_exact() {
        let k = dephasing(0.2);
        let st = k.to_stiefel();
        assert!(st.orthonormality_residual() < 1e-15);
        assert_eq!(st.to_kraus(), k);
        assert!(StiefelPoint::new(st.matrix().clone()).is_ok());
    }

    #[test]
    fn fidelity_examples() {
        let id = identity(2);
        assert!((process_fidelity(&id, &SuperOperator::identity(2)).unwrap() - 1.0).abs() < 1e-15);
        let dep = KrausSet::new(
            std::iter::once(identity(2))
                .chain(linalg::paulis())
                .map(|p| p * c(0.5))
                .collect(),
        )
        .unwrap();
        assert!((process_fidelity(&id, &dep.to_superoperator()).unwrap() - 0.25).abs() < 1e-15);
        assert!((process_fidelity(&id, &dephasing(0.5).to_superoperator()).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fidelity_matches_unitary_overlap_and_ignores_phase() {
        let mut rng = seeded(8);
        let u = random_unitary(&mut rng, 4);
        let v = random_unitary(&mut rng, 4);
        let s = SuperOperator::from_unitary(&v);
        let overlap = (u.adjoint() * &v).trace().norm_sqr() / 16.0;
        assert!((process_fidelity(&u, &s).unwrap() - overlap).abs() < 1e-12);
        let phased = &u * Complex64::from_polar(1.0, 0.7);
        assert!((process_fidelity(&phased, &s).unwrap() - overlap).abs() < 1e-12);
        assert!((process_fidelity(&v, &s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unital_channels_have_no_shift() {
        let mut rng = seeded(2);
        let (b, u) = nonunital_shift(&SuperOperator::from_unitary(&random_unitary(&mut rng, 2))).unwrap();
        assert!(b.iter().all(|x| x.abs() < 1e-14) && (u - 1.0).abs() < 1e-14);
        let (b, _) = nonunital_shift(&dephasing(0.3).to_superoperator()).unwrap();
        assert!(b.iter().all(|x| x.abs() < 1e-15));
        assert!(matches!(nonunital_shift(&SuperOperator::identity(4)), Err(Error::UnsupportedDimension(4))));
    }

    #[test]
    fn reset_to_ground_has_unit_shift() {
        let mut m1 = CMatrix::zeros(2, 2);
        m1[(0, 0)] = ONE;
        let mut m2 = CMatrix::zeros(2, 2);
        m2[(0, 1)] = ONE;
        let s = KrausSet::new(vec![m1, m2]).unwrap().to_superoperator();
        let (b, u) = nonunital_shift(&s).unwrap();
        assert!((b[2] - 1.0).abs() < 1e-15 && u.abs() < 1e-15);
    }

    #[test]
    fn cptp_checks() {
        assert!(is_cptp(&SuperOperator::identity(2)).is_cptp);
        let n = 2;
        let mut t = CMatrix::zeros(4, 4);
        for i in 0..n {
            for j in 0..n {
                t[(i * n + j, j * n + i)] = ONE;
            }
        }
        let report = is_cptp(&SuperOperator::new(t).unwrap());
        assert!(!report.is_cptp);
        assert!((report.min_choi_eigenvalue + 1.0).abs() < 1e-12);
        assert!(report.tp_residual < 1e-15);
    }

    #[test]
    fn compose_and_average() {
        let s = dephasing(0.2).to_superoperator();
        assert_eq!(compose(&SuperOperator::identity(2), &s).unwrap(), s);
        let avg = average(&vec![s.clone(); 5]).unwrap();
        assert!(linalg::max_abs_diff(avg.mean.matrix(), s.matrix()) < 1e-15);
        assert!(avg.standard_error.iter().all(|e| e.norm() < 1e-7));
        let pair = [SuperOperator::identity(2), KrausSet::unitary(pauli_z()).unwrap().to_superoperator()];
        let half = average(&pair).unwrap();
        assert!(linalg::max_abs_diff(half.mean.matrix(), dephasing(0.5).to_superoperator().matrix()) < 1e-15);
        assert!(average(&[]).is_err());
        assert!(compose(&SuperOperator::identity(2), &SuperOperator::identity(4)).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = KrausSet::unitary(random_unitary(&mut seeded(4), 2)).unwrap().to_superoperator();
        s.write_csv(&path).unwrap();
        let back = SuperOperator::read_csv(&path).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn json_round_trip() {
        let s = dephasing(0.1).to_superoperator();
        let text = serde_json::to_string(&s).unwrap();
        let back: SuperOperator = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}
