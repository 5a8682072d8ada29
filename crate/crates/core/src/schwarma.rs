//! Correlated CPTP noise: ARMA outputs scale tangent directions on the
//! Stiefel manifold and the exponential map turns each step into a Kraus set.
//!
//! A tangent `(A, B)` at the base `[U; 0]` generates
//! `blockdiag(U, I) exp([[A, -B^dagger], [B, 0]]) [I; 0]`, whose `N x N`
//! blocks are the Kraus operators. `A` is skew-Hermitian (coherent error),
//! `B` is dissipative.

use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use crate::arma::ArmaModel;
use crate::error::{invalid, Result};
use crate::linalg::{self, identity, pauli_x, pauli_y, pauli_z, CMatrix, I, ONE, ZERO};
use crate::quantum::{KrausSet, StiefelPoint, SuperOperator};

const SKEW_TOL: f64 = 1e-12;

static DAMPING_RANGE_WARNED: AtomicBool = AtomicBool::new(false);

/// Direction `(A, B)` with `A` skew-Hermitian (`N x N`) and `B` of size
/// `(K-1)N x N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    a_block: CMatrix,
    b_block: CMatrix,
}

impl TangentVector {
    pub fn new(a_block: CMatrix, b_block: CMatrix) -> Result<Self> {
        let n = a_block.nrows();
        if !a_block.is_square() || n == 0 {
            return Err(invalid("A block must be square and non-empty"));
        }
        if b_block.ncols() != n || b_block.nrows() % n != 0 {
            return Err(invalid(format!(
                "B block is {}x{}, expected a multiple of {n} rows and {n} columns",
                b_block.nrows(),
                b_block.ncols()
            )));
        }
        let skew = linalg::max_abs_diff(&a_block, &(-a_block.adjoint()));
        if skew > SKEW_TOL * a_block.norm().max(1.0) {
            return Err(invalid(format!("A block is not skew-Hermitian (residual {skew:.3e})")));
        }
        Ok(Self { a_block, b_block })
    }

    /// Coherent direction `A = -i H`.
    pub fn hamiltonian(h: &CMatrix) -> Result<Self> {
        let n = h.nrows();
        Self::new(h * Complex64::new(0.0, -1.0), CMatrix::zeros(0, n))
    }

    /// Purely dissipative direction with the given `B` blocks stacked.
    pub fn dissipative(blocks: &[CMatrix]) -> Result<Self> {
        let n = blocks.first().ok_or_else(|| invalid("need at least one B block"))?.nrows();
        let mut b = CMatrix::zeros(blocks.len() * n, n);
        for (k, blk) in blocks.iter().enumerate() {
            if blk.nrows() != n || blk.ncols() != n {
                return Err(invalid("every B block must be N x N"));
            }
            b.view_mut((k * n, 0), (n, n)).copy_from(blk);
        }
        Self::new(CMatrix::zeros(n, n), b)
    }

    pub fn zero(dim: usize, rank: usize) -> Self {
        Self { a_block: CMatrix::zeros(dim, dim), b_block: CMatrix::zeros((rank - 1) * dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.a_block.nrows()
    }

    /// Kraus rank bound `K`; the stacked height is `K N`.
    pub fn rank(&self) -> usize {
        1 + self.b_block.nrows() / self.dim()
    }

    pub fn a_block(&self) -> &CMatrix {
        &self.a_block
    }

    pub fn b_block(&self) -> &CMatrix {
        &self.b_block
    }

    pub fn has_coherent_part(&self) -> bool {
        self.a_block.iter().any(|z| *z != ZERO)
    }

    /// `y (A, B)`. A complex `y` is only meaningful without a coherent part,
    /// since `y A` would stop being skew-Hermitian.
    pub fn scaled(&self, y: Complex64) -> Result<Self> {
        if y.im != 0.0 && self.has_coherent_part() {
            return Err(invalid("complex scaling of a direction with a Hamiltonian part"));
        }
        Ok(Self { a_block: &self.a_block * y, b_block: &self.b_block * y })
    }

    /// Sum of two directions, padding `B` with zero rows to the larger rank.
    pub fn plus(&self, other: &TangentVector) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(invalid("tangent directions of different dimension"));
        }
        let n = self.dim();
        let rows = self.b_block.nrows().max(other.b_block.nrows());
        let mut b = CMatrix::zeros(rows, n);
        b.view_mut((0, 0), (self.b_block.nrows(), n)).copy_from(&self.b_block);
        let mut ob = b.view_mut((0, 0), (other.b_block.nrows(), n));
        ob += &other.b_block;
        Ok(Self { a_block: &self.a_block + &other.a_block, b_block: b })
    }

    /// `[[A, -B^dagger], [B, 0]]`.
    pub fn generator(&self) -> CMatrix {
        let n = self.dim();
        let kn = n * self.rank();
        let mut g = CMatrix::zeros(kn, kn);
        g.view_mut((0, 0), (n, n)).copy_from(&self.a_block);
        if kn > n {
            g.view_mut((n, 0), (kn - n, n)).copy_from(&self.b_block);
            g.view_mut((0, n), (n, kn - n)).copy_from(&(-self.b_block.adjoint()));
        }
        g
    }
}

/// Exponential map at the base point `[U; 0]`.
pub fn stiefel_exp(base_u: &CMatrix, x: &TangentVector) -> Result<StiefelPoint> {
    let n = x.dim();
    if base_u.nrows() != n || base_u.ncols() != n {
        return Err(invalid(format!("base unitary must be {n}x{n}")));
    }
    let e = linalg::expm(&x.generator());
    let mut m = e.columns(0, n).into_owned();
    let top = base_u * m.rows(0, n);
    m.rows_mut(0, n).copy_from(&top);
    Ok(StiefelPoint::from_parts(m, n))
}

/// `diag(e^{-iy}, e^{iy})`.
pub fn z_dephasing_step(y: f64) -> KrausSet {
    kraus1(linalg::to_dynamic(&linalg::su2_rotation(0.0, 0.0, y)))
}

/// `exp(-i (yx sx + yy sy + yz sz))` in closed form.
pub fn multiaxis_step(yx: f64, yy: f64, yz: f64) -> KrausSet {
    kraus1(linalg::to_dynamic(&linalg::su2_rotation(yx, yy, yz)))
}

/// `{diag(1, cos|y|), sin|y| e^{i arg y} |0><1|}`.
pub fn amplitude_damping_step(y: Complex64) -> KrausSet {
    let g = y.norm();
    if g >= std::f64::consts::FRAC_PI_2 && !DAMPING_RANGE_WARNED.swap(true, Ordering::Relaxed) {
        log::warn!("amplitude-damping step |y| = {g:.4} is outside [0, pi/2); the channel is CPTP but over-rotated");
    }
    let m1 = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, Complex64::new(g.cos(), 0.0)]);
    let phase = if g > 0.0 { y / g } else { ONE };
    let m2 = CMatrix::from_row_slice(2, 2, &[ZERO, phase * g.sin(), ZERO, ZERO]);
    KrausSet::new_unchecked(vec![m1, m2]).expect("valid shape")
}

/// Lowering operator `|0><1|`, the damping direction.
pub fn lowering() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO])
}

/// Four-Kraus Pauli channel from `B = [yx sx; yy sy; yz sz]`.
///
/// `B^dagger B = g^2 I` with `g^2 = sum |y|^2`, so the exponential closes:
/// `M_0 = cos(g) I` and `M_j = y_j sigma_j sin(g)/g`.
pub fn lindblad_depolarizing_step(yx: Complex64, yy: Complex64, yz: Complex64) -> KrausSet {
    let g = (yx.norm_sqr() + yy.norm_sqr() + yz.norm_sqr()).sqrt();
    let s = linalg::sinc(g);
    let ops = vec![
        identity(2) * Complex64::new(g.cos(), 0.0),
        pauli_x() * (yx * s),
        pauli_y() * (yy * s),
        pauli_z() * (yz * s),
    ];
    KrausSet::new_unchecked(ops).expect("valid shape")
}

/// Compacted z-only form `B = yz sz`: two Kraus operators `cos|y| I` and
/// `e^{i arg y} sin|y| sz`.
pub fn lindblad_dephasing_step(yz: Complex64) -> KrausSet {
    let g = yz.norm();
    let s = linalg::sinc(g);
    let ops = vec![identity(2) * Complex64::new(g.cos(), 0.0), pauli_z() * (yz * s)];
    KrausSet::new_unchecked(ops).expect("valid shape")
}

/// `exp(L)` for the Lindbladian with Hamiltonian `h`, jump operators `ops`
/// and rates `|y|^2`, in the column-stacked convention.
pub fn lindblad_liouvillian_step(h: &CMatrix, ops: &[CMatrix], rates: &[f64]) -> Result<SuperOperator> {
    if ops.len() != rates.len() {
        return Err(invalid(format!("{} jump operators but {} rates", ops.len(), rates.len())));
    }
    if let Some(r) = rates.iter().find(|r| !(**r >= 0.0)) {
        return Err(invalid(format!("Lindblad rate {r} is negative")));
    }
    let gen = lindblad_generator(h, ops, rates)?;
    SuperOperator::new(linalg::expm(&gen))
}

/// `-i (I kron H - H^T kron I) + sum r (conj(L) kron L - 1/2 I kron L^dag L - 1/2 (L^dag L)^T kron I)`.
pub fn lindblad_generator(h: &CMatrix, ops: &[CMatrix], rates: &[f64]) -> Result<CMatrix> {
    let n = h.nrows();
    if !h.is_square() || ops.iter().any(|l| l.nrows() != n || l.ncols() != n) {
        return Err(invalid("Hamiltonian and jump operators must share dimension"));
    }
    let id = identity(n);
    let mut gen = (linalg::kron(&id, h) - linalg::kron(&h.transpose(), &id)) * (-I);
    for (l, &r) in ops.iter().zip(rates) {
        let ldl = l.adjoint() * l;
        let d = linalg::kron(&l.map(|z| z.conj()), l)
            - linalg::kron(&id, &ldl) * Complex64::new(0.5, 0.0)
            - linalg::kron(&ldl.transpose(), &id) * Complex64::new(0.5, 0.0);
        gen += d * Complex64::new(r, 0.0);
    }
    Ok(gen)
}

fn kraus1(u: CMatrix) -> KrausSet {
    KrausSet::new_unchecked(vec![u]).expect("valid shape")
}

/// One ARMA stream feeding a direction.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    pub model: ArmaModel,
    /// Standard deviation of the driving inputs.
    pub scale: f64,
    /// Drive with circular complex Gaussians instead of real ones.
    pub complex: bool,
}

impl NoiseSource {
    pub fn real(model: ArmaModel, scale: f64) -> Self {
        Self { model, scale, complex: false }
    }

    pub fn complex(model: ArmaModel, scale: f64) -> Self {
        Self { model, scale, complex: true }
    }

    /// A source that always outputs zero.
    pub fn silent() -> Self {
        Self::real(ArmaModel::white(), 0.0)
    }

    fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Complex64 {
        if self.complex {
            self.model.next_complex(rng, self.scale)
        } else {
            Complex64::new(self.model.next_real(rng, self.scale), 0.0)
        }
    }

    fn reset(&mut self) {
        self.model.reset();
    }
}

/// Ideal unitary that noise is applied around at step `k`.
#[derive(Clone, Default)]
pub enum BaseUnitary {
    #[default]
    Identity,
    Fixed(CMatrix),
    Schedule(Arc<dyn Fn(usize) -> CMatrix + Send + Sync>),
}

impl fmt::Debug for BaseUnitary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => f.write_str("Identity"),
            Self::Fixed(u) => f.debug_tuple("Fixed").field(u).finish(),
            Self::Schedule(_) => f.write_str("Schedule(..)"),
        }
    }
}

impl BaseUnitary {
    fn at(&self, k: usize) -> Option<CMatrix> {
        match self {
            Self::Identity => None,
            Self::Fixed(u) => Some(u.clone()),
            Self::Schedule(f) => Some(f(k)),
        }
    }
}

/// Which closed form a model's step uses.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelFamily {
    /// Sources: `[z]`.
    ZDephasing,
    /// Sources: `[x, y, z]`.
    MultiAxis,
    /// Sources: `[damping]`, complex-driven.
    AmplitudeDamping,
    /// Sources: `[x, y, z]`, four Kraus operators.
    Depolarizing,
    /// Sources: `[z]`, compacted two-Kraus dissipative dephasing.
    DissipativeDephasing,
    /// One source per direction, evaluated with the general exponential.
    Custom(Vec<TangentVector>),
}

impl ChannelFamily {
    fn source_count(&self) -> usize {
        match self {
            Self::ZDephasing | Self::AmplitudeDamping | Self::DissipativeDephasing => 1,
            Self::MultiAxis | Self::Depolarizing => 3,
            Self::Custom(d) => d.len(),
        }
    }

    /// The tangent directions the closed forms correspond to.
    pub fn directions(&self) -> Vec<TangentVector> {
        let ham = |p: CMatrix| TangentVector::hamiltonian(&p).expect("Pauli is Hermitian");
        let pad = |blocks: Vec<CMatrix>| TangentVector::dissipative(&blocks).expect("valid blocks");
        let z2 = || CMatrix::zeros(2, 2);
        match self {
            Self::ZDephasing => vec![ham(pauli_z())],
            Self::MultiAxis => vec![ham(pauli_x()), ham(pauli_y()), ham(pauli_z())],
            Self::AmplitudeDamping => vec![pad(vec![lowering()])],
            Self::Depolarizing => vec![
                pad(vec![pauli_x(), z2(), z2()]),
                pad(vec![z2(), pauli_y(), z2()]),
                pad(vec![z2(), z2(), pauli_z()]),
            ],
            Self::DissipativeDephasing => vec![pad(vec![pauli_z()])],
            Self::Custom(d) => d.clone(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Self::Custom(d) => d[0].dim(),
            _ => 2,
        }
    }
}

/// Stateful SchWARMA noise generator: one ARMA stream per direction.
#[derive(Debug, Clone)]
pub struct SchwarmaModel {
    family: ChannelFamily,
    sources: Vec<NoiseSource>,
    base: BaseUnitary,
    tick: usize,
}

impl SchwarmaModel {
    pub fn new(family: ChannelFamily, sources: Vec<NoiseSource>) -> Result<Self> {
        if sources.len() != family.source_count() {
            return Err(invalid(format!(
                "channel family needs {} noise sources, got {}",
                family.source_count(),
                sources.len()
            )));
        }
        if let ChannelFamily::Custom(dirs) = &family {
            let first = dirs.first().ok_or_else(|| invalid("need at least one direction"))?;
            if dirs.iter().any(|d| d.dim() != first.dim() || d.rank() != first.rank()) {
                return Err(invalid("all directions must share N and K"));
            }
            for (d, s) in dirs.iter().zip(&sources) {
                if s.complex && d.has_coherent_part() {
                    return Err(invalid("complex driving requires a direction without a Hamiltonian part"));
                }
            }
        }
        let coherent = matches!(family, ChannelFamily::ZDephasing | ChannelFamily::MultiAxis);
        if coherent && sources.iter().any(|s| s.complex) {
            return Err(invalid("complex driving requires a direction without a Hamiltonian part"));
        }
        Ok(Self { family, sources, base: BaseUnitary::Identity, tick: 0 })
    }

    pub fn z_dephasing(source: NoiseSource) -> Result<Self> {
        Self::new(ChannelFamily::ZDephasing, vec![source])
    }

    pub fn multiaxis(x: NoiseSource, y: NoiseSource, z: NoiseSource) -> Result<Self> {
        Self::new(ChannelFamily::MultiAxis, vec![x, y, z])
    }

    pub fn amplitude_damping(source: NoiseSource) -> Result<Self> {
        Self::new(ChannelFamily::AmplitudeDamping, vec![source])
    }

    pub fn depolarizing(x: NoiseSource, y: NoiseSource, z: NoiseSource) -> Result<Self> {
        Self::new(ChannelFamily::Depolarizing, vec![x, y, z])
    }

    pub fn dissipative_dephasing(source: NoiseSource) -> Result<Self> {
        Self::new(ChannelFamily::DissipativeDephasing, vec![source])
    }

    /// A model whose every step is the identity channel.
    pub fn noiseless() -> Self {
        Self::z_dephasing(NoiseSource::silent()).expect("valid")
    }

    pub fn with_base(mut self, base: BaseUnitary) -> Self {
        self.base = base;
        self
    }

    pub fn family(&self) -> &ChannelFamily {
        &self.family
    }

    pub fn sources(&self) -> &[NoiseSource] {
        &self.sources
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    pub fn tick(&self) -> usize {
        self.tick
    }

    /// Restarts every ARMA history and the step counter.
    pub fn reset(&mut self) {
        self.sources.iter_mut().for_each(NoiseSource::reset);
        self.tick = 0;
    }

    /// Advances every source one tick and returns the raw outputs.
    pub fn next_values<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<Complex64> {
        self.sources.iter_mut().map(|s| s.next(rng)).collect()
    }

    /// Kraus set for given source outputs at the base unitary of tick `k`.
    pub fn kraus_for(&self, values: &[Complex64], k: usize) -> Result<KrausSet> {
        let local = match &self.family {
            ChannelFamily::ZDephasing => z_dephasing_step(values[0].re),
            ChannelFamily::MultiAxis => multiaxis_step(values[0].re, values[1].re, values[2].re),
            ChannelFamily::AmplitudeDamping => amplitude_damping_step(values[0]),
            ChannelFamily::Depolarizing => lindblad_depolarizing_step(values[0], values[1], values[2]),
            ChannelFamily::DissipativeDephasing => lindblad_dephasing_step(values[0]),
            ChannelFamily::Custom(dirs) => {
                let mut x = TangentVector::zero(dirs[0].dim(), dirs[0].rank());
                for (d, &y) in dirs.iter().zip(values) {
                    x = x.plus(&d.scaled(y)?)?;
                }
                stiefel_exp(&identity(x.dim()), &x)?.to_kraus()
            }
        };
        Ok(match self.base.at(k) {
            None => local,
            Some(u) => {
                let mut ops = local.into_operators();
                ops[0] = &u * &ops[0];
                KrausSet::new_unchecked(ops)?
            }
        })
    }

    /// One SchWARMA step.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<KrausSet> {
        let values = self.next_values(rng);
        let k = self.tick;
        self.tick += 1;
        self.kraus_for(&values, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{apply_channel, is_cptp, DensityMatrix};
    use crate::rng::seeded;
    use rand::Rng;
    use rand_distr::StandardNormal;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn generic(dirs: &[TangentVector], ys: &[Complex64]) -> KrausSet {
        let mut x = TangentVector::zero(2, dirs[0].rank());
        for (d, y) in dirs.iter().zip(ys) {
            x = x.plus(&d.scaled(*y).unwrap()).unwrap();
        }
        stiefel_exp(&identity(2), &x).unwrap().to_kraus()
    }

    fn same_kraus(a: &KrausSet, b: &KrausSet, tol: f64) {
        assert_eq!(a.operators().len(), b.operators().len());
        for (x, y) in a.operators().iter().zip(b.operators()) {
            assert!(linalg::max_abs_diff(x, y) <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn zero_tangent_gives_base_point() {
        let u = linalg::to_dynamic(&linalg::su2_rotation(0.3, -0.2, 0.9));
        let p = stiefel_exp(&u, &TangentVector::zero(2, 3)).unwrap();
        let k = p.to_kraus();
        assert!(linalg::max_abs_diff(&k.operators()[0], &u) < 1e-15);
        assert!(k.operators()[1..].iter().all(|m| m.norm() == 0.0));
        assert_eq!(p.to_kraus_compact().operators().len(), 1);
    }

    #[test]
    fn coherent_tangent_is_matrix_exponential() {
        let h = pauli_x() * c(0.4) + pauli_y() * c(-1.1);
        let x = TangentVector::hamiltonian(&h).unwrap();
        let u = linalg::to_dynamic(&linalg::su2_rotation(0.0, 0.0, 0.5));
        let got = stiefel_exp(&u, &x).unwrap().to_kraus().operators()[0].clone();
        let want = &u * linalg::expm(&(h * (-I)));
        assert!(linalg::max_abs_diff(&got, &want) < 1e-14);
    }

    #[test]
    fn non_skew_a_rejected() {
        assert!(TangentVector::new(identity(2), CMatrix::zeros(0, 2)).is_err());
        assert!(TangentVector::hamiltonian(&pauli_x()).unwrap().scaled(Complex64::new(0.0, 1.0)).is_err());
    }

    #[test]
    fn closed_forms_match_block_exponential() {
        let fam = ChannelFamily::AmplitudeDamping.directions();
        let y = Complex64::from_polar(0.8, 0.6);
        same_kraus(&amplitude_damping_step(y), &generic(&fam, &[y]), 1e-14);

        let fam = ChannelFamily::MultiAxis.directions();
        let ys = [c(0.3), c(-0.7), c(1.9)];
        same_kraus(&multiaxis_step(0.3, -0.7, 1.9), &generic(&fam, &ys), 1e-13);

        let fam = ChannelFamily::Depolarizing.directions();
        let ys = [Complex64::new(0.1, 0.2), Complex64::new(-0.3, 0.05), Complex64::new(0.4, -0.6)];
        same_kraus(&lindblad_depolarizing_step(ys[0], ys[1], ys[2]), &generic(&fam, &ys), 1e-14);

        let fam = ChannelFamily::DissipativeDephasing.directions();
        let y = Complex64::new(0.5, -0.2);
        same_kraus(&lindblad_dephasing_step(y), &generic(&fam, &[y]), 1e-14);
    }

    #[test]
    fn z_dephasing_examples() {
        assert!(linalg::max_abs_diff(&z_dephasing_step(0.0).operators()[0], &identity(2)) < 1e-16);
        let half = &z_dephasing_step(FRAC_PI_2).operators()[0].clone();
        assert!(linalg::max_abs_diff(half, &(pauli_z() * (-I))) < 1e-15);
        let s = z_dephasing_step(PI).to_superoperator();
        assert!(linalg::max_abs_diff(s.matrix(), &identity(4)) < 1e-15);
    }

    #[test]
    fn multiaxis_examples() {
        assert!(linalg::max_abs_diff(&multiaxis_step(0.0, 0.0, 0.0).operators()[0], &identity(2)) < 1e-16);
        let x = &multiaxis_step(FRAC_PI_2, 0.0, 0.0).operators()[0].clone();
        assert!(linalg::max_abs_diff(x, &(pauli_x() * (-I))) < 1e-15);
        same_kraus(&multiaxis_step(0.0, 0.0, 0.37), &z_dephasing_step(0.37), 0.0);
    }

    #[test]
    fn amplitude_damping_examples() {
        let id = amplitude_damping_step(ZERO);
        assert!(linalg::max_abs_diff(id.to_superoperator().matrix(), &identity(4)) < 1e-16);
        let one = DensityMatrix::basis(2, 1);
        let out = apply_channel(&amplitude_damping_step(c(FRAC_PI_2)), &one).unwrap();
        assert!(linalg::max_abs_diff(out.matrix(), DensityMatrix::basis(2, 0).matrix()) < 1e-15);
        let z = amplitude_damping_step(c(PI)).to_superoperator();
        let zz = crate::quantum::SuperOperator::from_unitary(&pauli_z());
        assert!(linalg::max_abs_diff(z.matrix(), zz.matrix()) < 1e-15);
    }

    #[test]
    fn depolarizing_matches_first_order_lindblad() {
        let lam: f64 = 1e-3;
        let y = c(lam.sqrt());
        let s = lindblad_depolarizing_step(y, y, y).to_superoperator();
        let p = lam;
        let pauli_channel = KrausSet::new(vec![
            identity(2) * c((1.0 - 3.0 * p).sqrt()),
            pauli_x() * c(p.sqrt()),
            pauli_y() * c(p.sqrt()),
            pauli_z() * c(p.sqrt()),
        ])
        .unwrap()
        .to_superoperator();
        let diff = linalg::max_abs_diff(s.matrix(), pauli_channel.matrix());
        assert!(diff < 10.0 * lam * lam, "{diff}");
        let zero = lindblad_depolarizing_step(ZERO, ZERO, ZERO);
        assert!(linalg::max_abs_diff(zero.to_superoperator().matrix(), &identity(4)) < 1e-16);
    }

    #[test]
    fn compact_dephasing_scales_coherences() {
        let lam: f64 = 1e-3;
        let s = lindblad_dephasing_step(c(lam.sqrt())).to_superoperator();
        let m = s.matrix();
        // column-stacked index of rho(0,1) is 2
        assert!((m[(2, 2)].re - (-2.0 * lam).exp()).abs() < 4.0 * lam * lam);
        assert!((m[(0, 0)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn liouvillian_examples() {
        let h = pauli_x() * c(0.3) + pauli_z() * c(0.2);
        let s = lindblad_liouvillian_step(&h, &[pauli_z()], &[0.0]).unwrap();
        let u = linalg::expm(&(&h * (-I)));
        let want = crate::quantum::SuperOperator::from_unitary(&u);
        assert!(linalg::max_abs_diff(s.matrix(), want.matrix()) < 1e-13);

        let lam = 0.37;
        let s = lindblad_liouvillian_step(&CMatrix::zeros(2, 2), &[pauli_z()], &[lam]).unwrap();
        let m = s.matrix();
        assert!((m[(2, 2)].re - (-2.0 * lam).exp()).abs() < 1e-14);
        assert!((m[(1, 1)].re - (-2.0 * lam).exp()).abs() < 1e-14);
        assert!((m[(0, 0)].re - 1.0).abs() < 1e-14 && (m[(3, 3)].re - 1.0).abs() < 1e-14);

        let l = lowering();
        let a = lindblad_liouvillian_step(&h, &[l.clone()], &[0.1]).unwrap();
        let b = lindblad_liouvillian_step(&CMatrix::zeros(2, 2), &[l.clone()], &[0.2]).unwrap();
        let b2 = lindblad_liouvillian_step(&CMatrix::zeros(2, 2), &[l.clone()], &[0.1]).unwrap();
        let composed = crate::quantum::compose(&b2, &b2).unwrap();
        assert!(linalg::max_abs_diff(composed.matrix(), b.matrix()) < 1e-13);
        assert!(is_cptp(&a).is_cptp);
        assert!(lindblad_liouvillian_step(&h, &[l], &[-0.1]).is_err());
    }

    #[test]
    fn damping_step_agrees_with_master_equation_to_fourth_order() {
        let err = |y: f64| {
            let s = amplitude_damping_step(c(y)).to_superoperator();
            let l = lindblad_liouvillian_step(&CMatrix::zeros(2, 2), &[lowering()], &[y * y]).unwrap();
            linalg::max_abs_diff(s.matrix(), l.matrix())
        };
        let (e1, e2) = (err(0.1), err(0.05));
        assert!(e1 < 0.1f64.powi(4), "{e1}");
        let ratio = e1 / e2;
        assert!((ratio - 16.0).abs() < 2.0, "ratio {ratio}");
    }

    #[test]
    fn random_steps_are_cptp() {
        let mut rng = seeded(21);
        for _ in 0..50 {
            let y: Vec<Complex64> = (0..3)
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            for k in [
                multiaxis_step(y[0].re, y[1].re, y[2].re),
                amplitude_damping_step(y[0]),
                lindblad_depolarizing_step(y[0], y[1], y[2]),
                lindblad_dephasing_step(y[2]),
            ] {
                assert!(k.tp_residual() < 1e-12);
                assert!(is_cptp(&k.to_superoperator()).is_cptp);
            }
        }
    }

    #[test]
    fn model_step_examples() {
        let mut rng = seeded(1);
        let mut quiet = SchwarmaModel::noiseless()
            .with_base(BaseUnitary::Fixed(pauli_x()));
        let k = quiet.step(&mut rng).unwrap();
        assert_eq!(k.operators()[0], pauli_x());

        // a constant source: white model with a zero-variance sampler is
        // replaced here by driving the closed form directly
        let m = SchwarmaModel::z_dephasing(NoiseSource::silent()).unwrap();
        same_kraus(&m.kraus_for(&[c(0.25)], 0).unwrap(), &z_dephasing_step(0.25), 0.0);

        let template = SchwarmaModel::multiaxis(
            NoiseSource::real(ArmaModel::new(vec![0.5], vec![1.0]).unwrap(), 0.1),
            NoiseSource::real(ArmaModel::white(), 0.1),
            NoiseSource::real(ArmaModel::pure_ma(vec![1.0, 0.5]).unwrap(), 0.1),
        )
        .unwrap();
        let run = |seed| {
            let mut m = template.clone();
            let mut r = seeded(seed);
            (0..20).map(|_| m.step(&mut r).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn complex_driving_restricted_to_dissipative_directions() {
        assert!(SchwarmaModel::z_dephasing(NoiseSource::complex(ArmaModel::white(), 0.1)).is_err());
        assert!(SchwarmaModel::amplitude_damping(NoiseSource::complex(ArmaModel::white(), 0.1)).is_ok());
        let dirs = ChannelFamily::MultiAxis.directions();
        let fam = ChannelFamily::Custom(dirs);
        let srcs = vec![NoiseSource::silent(), NoiseSource::silent(), NoiseSource::complex(ArmaModel::white(), 0.1)];
        assert!(SchwarmaModel::new(fam, srcs).is_err());
    }

    #[test]
    fn custom_family_uses_general_exponential() {
        let fam = ChannelFamily::Custom(ChannelFamily::MultiAxis.directions());
        let m = SchwarmaModel::new(fam, vec![NoiseSource::silent(), NoiseSource::silent(), NoiseSource::silent()]).unwrap();
        let k = m.kraus_for(&[c(0.2), c(0.1), c(-0.3)], 0).unwrap();
        same_kraus(&k, &multiaxis_step(0.2, 0.1, -0.3), 1e-14);
    }
}
