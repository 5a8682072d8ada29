//! Dense complex linear-algebra helpers shared by every module.
//!
//! Superoperators act on column-stacked density matrices: the element
//! `rho[(row, col)]` sits at index `col * n + row`, so that
//! `vec(M rho M^dagger) = (conj(M) kron M) vec(rho)`.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CMatrix2 = Matrix2<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// The three Pauli matrices in x, y, z order.
pub fn paulis() -> [CMatrix; 3] {
    [pauli_x(), pauli_y(), pauli_z()]
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vec_col(m: &CMatrix) -> nalgebra::DVector<Complex64> {
    // nalgebra stores column-major, which is exactly column stacking.
    nalgebra::DVector::from_column_slice(m.as_slice())
}

pub fn unvec_col(v: &[Complex64], n: usize) -> CMatrix {
    CMatrix::from_column_slice(n, n, v)
}

/// Matrix exponential by scaling and squaring with a Padé approximant.
pub fn expm(m: &CMatrix) -> CMatrix {
    m.exp()
}

/// `exp(-i (h0 I + a . sigma) t)` in closed form.
pub fn expm_hermitian_2x2(h: &CMatrix2, t: f64) -> CMatrix2 {
    let h0 = 0.5 * (h[(0, 0)].re + h[(1, 1)].re);
    let az = 0.5 * (h[(0, 0)].re - h[(1, 1)].re);
    let ax = h[(1, 0)].re;
    let ay = h[(1, 0)].im;
    su2_rotation(ax * t, ay * t, az * t) * Complex64::from_polar(1.0, -h0 * t)
}

/// `exp(-i (x sigma_x + y sigma_y + z sigma_z))` via the cos/sinc closed form.
pub fn su2_rotation(x: f64, y: f64, z: f64) -> CMatrix2 {
    let g = (x * x + y * y + z * z).sqrt();
    let c = g.cos();
    let s = sinc(g);
    CMatrix2::new(
        Complex64::new(c, -z * s),
        Complex64::new(-y * s, -x * s),
        Complex64::new(y * s, -x * s),
        Complex64::new(c, z * s),
    )
}

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

pub fn to_dynamic(m: &CMatrix2) -> CMatrix {
    CMatrix::from_column_slice(2, 2, m.as_slice())
}

pub fn to_fixed(m: &CMatrix) -> CMatrix2 {
    assert_eq!(m.shape(), (2, 2));
    CMatrix2::from_column_slice(m.as_slice())
}

/// Largest absolute elementwise difference.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Residual `max |U^dagger U - I|`.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    let n = u.ncols();
    max_abs_diff(&(u.adjoint() * u), &identity(n))
}

/// Removes the global phase of `b` relative to `a` and returns the max difference.
pub fn max_diff_up_to_phase(a: &CMatrix, b: &CMatrix) -> f64 {
    let overlap: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        ONE
    };
    max_abs_diff(&(a * phase), b)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(herm);
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| a.total_cmp(b));
    values
}

/// Embeds a single-qubit operator on qubit `q` of an `n`-qubit register
/// (qubit 0 is the most significant tensor factor).
pub fn embed_single(op: &CMatrix, q: usize, n: usize) -> CMatrix {
    let mut out = identity(1);
    for j in 0..n {
        let factor = if j == q { op.clone() } else { identity(2) };
        out = kron(&out, &factor);
    }
    out
}

/// Left-multiplies `m` in place by a 2x2 operator acting on qubit `q` of an
/// `n`-qubit register.
pub fn apply_single_left(m: &mut CMatrix, op: &CMatrix2, q: usize, n: usize) {
    let dim = 1usize << n;
    let stride = 1usize << (n - 1 - q);
    let cols = m.ncols();
    for col in 0..cols {
        let column = &mut m.as_mut_slice()[col * dim..(col + 1) * dim];
        for r0 in 0..dim {
            if r0 & stride != 0 {
                continue;
            }
            let r1 = r0 | stride;
            let a = column[r0];
            let b = column[r1];
            column[r0] = op[(0, 0)] * a + op[(0, 1)] * b;
            column[r1] = op[(1, 0)] * a + op[(1, 1)] * b;
        }
    }
}

/// Left-multiplies `m` in place by a 4x4 operator on qubits `(qa, qb)` of an
/// `n`-qubit register; `qa` is the more significant factor of `op`.
pub fn apply_two_left(m: &mut CMatrix, op: &CMatrix, qa: usize, qb: usize, n: usize) {
    assert_eq!(op.shape(), (4, 4));
    assert_ne!(qa, qb);
    let dim = 1usize << n;
    let sa = 1usize << (n - 1 - qa);
    let sb = 1usize << (n - 1 - qb);
    let cols = m.ncols();
    for col in 0..cols {
        let column = &mut m.as_mut_slice()[col * dim..(col + 1) * dim];
        for r in 0..dim {
            if r & (sa | sb) != 0 {
                continue;
            }
            let idx = [r, r | sb, r | sa, r | sa | sb];
            let v = idx.map(|i| column[i]);
            for (i, &target) in idx.iter().enumerate() {
                column[target] = (0..4).map(|j| op[(i, j)] * v[j]).sum();
            }
        }
    }
}

/// Embeds a two-qubit operator on `(qa, qb)` by permuting the basis.
pub fn embed_two(op: &CMatrix, qa: usize, qb: usize, n: usize) -> CMatrix {
    let mut out = identity(1usize << n);
    apply_two_left(&mut out, op, qa, qb, n);
    out
}

/// Left-multiplies `m` in place by a diagonal operator.
pub fn apply_diag_left(m: &mut CMatrix, diag: &[Complex64]) {
    let dim = diag.len();
    let cols = m.ncols();
    for col in 0..cols {
        let column = &mut m.as_mut_slice()[col * dim..(col + 1) * dim];
        for (x, d) in column.iter_mut().zip(diag) {
            *x *= d;
        }
    }
}
