//! Two-state-vector weak values over finite-dimensional state spaces.
//!
//! A weak value of `A` at an intermediate time is
//! `<post| U_bwd^dagger A U_fwd |pre> / <post| U_bwd^dagger U_fwd |pre>`, where
//! `U_fwd` carries the pre-selected state forward to the measurement time and
//! `U_bwd` carries the post-selected state backward to it.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Complex = Complex64;

/// Denominators below this magnitude are reported as [`Error::VanishingOverlap`].
pub const OVERLAP_GUARD: f64 = 1e-300;

const NORM_TOL: f64 = 1e-10;
const UNITARY_TOL: f64 = 1e-9;
const PROJECTOR_TOL: f64 = 1e-12;
const BASIS_TOL: f64 = 1e-10;

/// A ket in a `dim`-dimensional space.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: DVector<Complex>,
}

impl StateVector {
    /// A state with no normalization requirement (intermediate vectors).
    pub fn from_amplitudes(amplitudes: Vec<Complex>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidState { norm_sqr: f64::NAN });
        }
        Ok(StateVector { amplitudes: DVector::from_vec(amplitudes) })
    }

    /// A physical state: norm^2 must equal one to within 1e-10.
    pub fn normalized(amplitudes: Vec<Complex>) -> Result<Self> {
        let s = Self::from_amplitudes(amplitudes)?;
        let n = s.norm_sqr();
        if (n - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState { norm_sqr: n });
        }
        Ok(s)
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[k] = Complex::new(1.0, 0.0);
        StateVector { amplitudes: v }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<Complex> {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &StateVector) -> Result<Complex> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub(crate) fn from_dvector(amplitudes: DVector<Complex>) -> Self {
        StateVector { amplitudes }
    }
}

/// Structural promise attached to an [`Operator`], checked at construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    General,
    Unitary,
    Projector,
}

/// A dense square operator (column-major storage).
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    entries: DMatrix<Complex>,
    kind: OperatorKind,
}

impl Operator {
    pub fn new(entries: DMatrix<Complex>, kind: OperatorKind) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch { expected: entries.nrows(), found: entries.ncols() });
        }
        if entries.nrows() == 0 {
            return Err(Error::DimensionMismatch { expected: 1, found: 0 });
        }
        if entries.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidOperator("non-finite entry".into()));
        }
        let op = Operator { entries, kind };
        match kind {
            OperatorKind::General => {}
            OperatorKind::Unitary => {
                let d = op.unitarity_defect();
                if d >= UNITARY_TOL {
                    return Err(Error::InvalidOperator(format!("||U U^dagger - I||_max = {d:e}")));
                }
            }
            OperatorKind::Projector => {
                let m = &op.entries;
                let idem = max_abs(&(m * m - m));
                let herm = max_abs(&(m.adjoint() - m));
                if idem > PROJECTOR_TOL || herm > PROJECTOR_TOL {
                    return Err(Error::InvalidOperator(format!(
                        "projector defect: |P^2-P| = {idem:e}, |P^dagger-P| = {herm:e}"
                    )));
                }
            }
        }
        Ok(op)
    }

    pub fn general(entries: DMatrix<Complex>) -> Result<Self> {
        Self::new(entries, OperatorKind::General)
    }

    pub fn identity(dim: usize) -> Self {
        Operator { entries: DMatrix::identity(dim, dim), kind: OperatorKind::Unitary }
    }

    /// `|k><k|`
    pub fn basis_projector(dim: usize, k: usize) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        m[(k, k)] = Complex::new(1.0, 0.0);
        Operator { entries: m, kind: OperatorKind::Projector }
    }

    /// `|psi><psi|` for a normalized state.
    pub fn rank_one_projector(psi: &StateVector) -> Result<Self> {
        let v = psi.amplitudes();
        Self::new(v * v.adjoint(), OperatorKind::Projector)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn entries(&self) -> &DMatrix<Complex> {
        &self.entries
    }

    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        max_abs(&(&self.entries * self.entries.adjoint() - DMatrix::identity(n, n)))
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        check_dim(self.dim(), psi.dim())?;
        Ok(StateVector::from_dvector(&self.entries * psi.amplitudes()))
    }

    pub fn adjoint_apply(&self, psi: &StateVector) -> Result<StateVector> {
        check_dim(self.dim(), psi.dim())?;
        Ok(StateVector::from_dvector(self.entries.adjoint() * psi.amplitudes()))
    }

    pub fn compose(&self, right: &Operator) -> Result<Operator> {
        check_dim(self.dim(), right.dim())?;
        let kind = if self.kind == OperatorKind::Unitary && right.kind == OperatorKind::Unitary {
            OperatorKind::Unitary
        } else {
            OperatorKind::General
        };
        Ok(Operator { entries: &self.entries * &right.entries, kind })
    }

    /// `alpha * self + beta * other`, as a general operator.
    pub fn combine(&self, alpha: Complex, other: &Operator, beta: Complex) -> Result<Operator> {
        check_dim(self.dim(), other.dim())?;
        Ok(Operator {
            entries: self.entries.map(|a| a * alpha) + other.entries.map(|b| b * beta),
            kind: OperatorKind::General,
        })
    }
}

fn max_abs(m: &DMatrix<Complex>) -> f64 {
    m.iter().map(|a| a.norm()).fold(0.0, f64::max)
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn guarded_ratio(num: Complex, den: Complex) -> Result<Complex> {
    if !(den.norm() > OVERLAP_GUARD) {
        return Err(Error::VanishingOverlap { overlap: den.norm() });
    }
    Ok(num / den)
}

/// Weak value of `a` given the forward-evolved pre-state `psi` and the
/// backward-evolved post-state `phi`, both at the measurement time.
pub fn weak_value_two_state(phi: &StateVector, a: &Operator, psi: &StateVector) -> Result<Complex> {
    check_dim(phi.dim(), psi.dim())?;
    let a_psi = a.apply(psi)?;
    guarded_ratio(phi.inner(&a_psi)?, phi.inner(psi)?)
}

/// Weak values of every computational-basis projector `|k><k|` at once.
/// They sum to one up to round-off whenever the overlap is non-zero.
pub fn basis_projector_weak_values(phi: &StateVector, psi: &StateVector) -> Result<Vec<Complex>> {
    check_dim(phi.dim(), psi.dim())?;
    let terms: Vec<Complex> = phi
        .amplitudes()
        .iter()
        .zip(psi.amplitudes().iter())
        .map(|(p, q)| p.conj() * q)
        .collect();
    let den: Complex = terms.iter().sum();
    if !(den.norm() > OVERLAP_GUARD) {
        return Err(Error::VanishingOverlap { overlap: den.norm() });
    }
    Ok(terms.into_iter().map(|t| t / den).collect())
}

/// `<post| U_bwd^dagger A U_fwd |pre> / <post| U_bwd^dagger U_fwd |pre>`
pub fn weak_value_general(
    pre: &StateVector,
    post: &StateVector,
    a: &Operator,
    u_fwd: &Operator,
    u_bwd: &Operator,
) -> Result<Complex> {
    let d = pre.dim();
    for found in [post.dim(), a.dim(), u_fwd.dim(), u_bwd.dim()] {
        check_dim(d, found)?;
    }
    let psi = u_fwd.apply(pre)?;
    let phi = u_bwd.apply(post)?;
    weak_value_two_state(&phi, a, &psi)
}

/// `<post| U_total |pre>`; its modulus measures how rare the post-selected
/// sub-ensemble is.
pub fn postselection_amplitude(pre: &StateVector, post: &StateVector, u_total: &Operator) -> Result<Complex> {
    check_dim(pre.dim(), post.dim())?;
    post.inner(&u_total.apply(pre)?)
}

/// Residual of the decomposition
/// `<psi|A|psi> = sum_i |<psi|phi_i>|^2 * <phi_i|A|psi> / <phi_i|psi>`.
///
/// Terms with `|<phi_i|psi>| < OVERLAP_GUARD` are skipped; their exact
/// contribution `<psi|phi_i><phi_i|A|psi>` is added to the residual so that a
/// skipped term can never hide an error.
pub fn ensemble_identity_check(psi: &StateVector, a: &Operator, basis: &[StateVector]) -> Result<f64> {
    let d = psi.dim();
    check_dim(d, a.dim())?;
    if basis.len() != d {
        return Err(Error::IncompleteBasis { deviation: (d as f64 - basis.len() as f64).abs() });
    }
    let mut gram_dev: f64 = 0.0;
    for (i, bi) in basis.iter().enumerate() {
        check_dim(d, bi.dim())?;
        for (j, bj) in basis.iter().enumerate() {
            let g = bi.inner(bj)?;
            let target = if i == j { 1.0 } else { 0.0 };
            gram_dev = gram_dev.max((g - Complex::new(target, 0.0)).norm());
        }
    }
    if gram_dev > BASIS_TOL {
        return Err(Error::IncompleteBasis { deviation: gram_dev });
    }
    let a_psi = a.apply(psi)?;
    let lhs = psi.inner(&a_psi)?;
    let mut rhs = Complex::new(0.0, 0.0);
    let mut skipped = 0.0;
    for phi in basis {
        let overlap = phi.inner(psi)?;
        let a_elem = phi.inner(&a_psi)?;
        if overlap.norm() < OVERLAP_GUARD {
            skipped += (overlap.conj() * a_elem).norm();
            continue;
        }
        rhs += overlap.norm_sqr() * (a_elem / overlap);
    }
    Ok((lhs - rhs).norm() + skipped)
}

/// Random state with i.i.d. complex Gaussian amplitudes, normalized.
pub fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> StateVector {
    let v: Vec<Complex> = (0..dim).map(|_| gaussian_complex(rng)).collect();
    let n = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_dvector(DVector::from_vec(v.into_iter().map(|a| a / n).collect()))
}

/// Haar-ish random unitary from the QR factorization of a Ginibre matrix.
pub fn random_unitary(rng: &mut ChaCha8Rng, dim: usize) -> Operator {
    let g = DMatrix::from_fn(dim, dim, |_, _| gaussian_complex(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    // fix column phases so the distribution does not depend on QR conventions
    let mut q = q;
    for j in 0..dim {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let ph = d / d.norm();
            for i in 0..dim {
                q[(i, j)] *= ph;
            }
        }
    }
    Operator { entries: q, kind: OperatorKind::Unitary }
}

/// Random Hermitian operator.
pub fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> Operator {
    let g = DMatrix::from_fn(dim, dim, |_, _| gaussian_complex(rng));
    let h = (&g + g.adjoint()).map(|a| a * 0.5);
    Operator { entries: h, kind: OperatorKind::General }
}

/// Random (non-Hermitian) operator.
pub fn random_operator(rng: &mut ChaCha8Rng, dim: usize) -> Operator {
    Operator { entries: DMatrix::from_fn(dim, dim, |_, _| gaussian_complex(rng)), kind: OperatorKind::General }
}

/// Columns of `u` as states.
pub fn columns(u: &Operator) -> Vec<StateVector> {
    (0..u.dim()).map(|j| StateVector::from_dvector(u.entries().column(j).into_owned())).collect()
}

fn gaussian_complex(rng: &mut ChaCha8Rng) -> Complex {
    Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Independent dense evaluation of [`weak_value_general`] by explicit index
/// loops over the raw matrices, used as a cross-check oracle.
pub fn weak_value_naive(
    pre: &StateVector,
    post: &StateVector,
    a: &Operator,
    u_fwd: &Operator,
    u_bwd: &Operator,
) -> Result<Complex> {
    let d = pre.dim();
    for found in [post.dim(), a.dim(), u_fwd.dim(), u_bwd.dim()] {
        check_dim(d, found)?;
    }
    let (uf, ub, am) = (u_fwd.entries(), u_bwd.entries(), a.entries());
    let (p, q) = (pre.amplitudes(), post.amplitudes());
    let mut num = Complex::new(0.0, 0.0);
    let mut den = Complex::new(0.0, 0.0);
    for i in 0..d {
        // (U_bwd |post>)_i^*
        let mut bra = Complex::new(0.0, 0.0);
        for k in 0..d {
            bra += ub[(i, k)] * q[k];
        }
        let bra = bra.conj();
        for j in 0..d {
            let mut ket = Complex::new(0.0, 0.0);
            for k in 0..d {
                ket += uf[(j, k)] * p[k];
            }
            num += bra * am[(i, j)] * ket;
            if i == j {
                den += bra * ket;
            }
        }
    }
    if !(den.norm() > OVERLAP_GUARD) {
        return Err(Error::VanishingOverlap { overlap: den.norm() });
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    #[test]
    fn identity_everything_gives_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let psi = random_state(&mut rng, 3);
        let id = Operator::identity(3);
        let w = weak_value_general(&psi, &psi, &id, &id, &id).unwrap();
        assert!((w - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn eigenstate_gives_eigenvalue() {
        let a = Operator::general(DMatrix::from_diagonal(&DVector::from_vec(vec![c(2.0, 0.0), c(-0.5, 0.0)]))).unwrap();
        let e1 = StateVector::basis(2, 1);
        let id = Operator::identity(2);
        let w = weak_value_general(&e1, &e1, &a, &id, &id).unwrap();
        assert!((w - c(-0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn orthogonal_pre_post_is_vanishing_overlap() {
        let id = Operator::identity(2);
        let err = weak_value_general(&StateVector::basis(2, 0), &StateVector::basis(2, 1), &id, &id, &id).unwrap_err();
        assert!(matches!(err, Error::VanishingOverlap { .. }));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let id2 = Operator::identity(2);
        let id3 = Operator::identity(3);
        let s = StateVector::basis(2, 0);
        assert!(matches!(
            weak_value_general(&s, &s, &id3, &id2, &id2),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            postselection_amplitude(&s, &StateVector::basis(3, 0), &id2),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn postselection_certain_and_forbidden() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random_unitary(&mut rng, 4);
        let pre = random_state(&mut rng, 4);
        let evolved = u.apply(&pre).unwrap();
        let a = postselection_amplitude(&pre, &evolved, &u).unwrap();
        assert!((a.norm() - 1.0).abs() < 1e-12);
        // something orthogonal to U|pre>
        let other = random_state(&mut rng, 4);
        let proj = evolved.inner(&other).unwrap();
        let perp: Vec<Complex> = other
            .amplitudes()
            .iter()
            .zip(evolved.amplitudes().iter())
            .map(|(o, e)| o - e * proj)
            .collect();
        let perp = StateVector::from_amplitudes(perp).unwrap();
        assert!(postselection_amplitude(&pre, &perp, &u).unwrap().norm() < 1e-14);
    }

    #[test]
    fn ensemble_identity_with_identity_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = random_state(&mut rng, 5);
        let basis = columns(&random_unitary(&mut rng, 5));
        let r = ensemble_identity_check(&psi, &Operator::identity(5), &basis).unwrap();
        assert!(r < 1e-10);
    }

    #[test]
    fn ensemble_identity_skip_rule() {
        // psi = |0>, basis = computational basis: two overlaps vanish exactly
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_hermitian(&mut rng, 3);
        let psi = StateVector::basis(3, 0);
        let basis: Vec<_> = (0..3).map(|k| StateVector::basis(3, k)).collect();
        let r = ensemble_identity_check(&psi, &a, &basis).unwrap();
        // skipped terms contribute <psi|k><k|A|psi> = 0 since <psi|k> = 0
        assert!(r < 1e-10, "residual {r}");
    }

    #[test]
    fn incomplete_basis_rejected() {
        let psi = StateVector::basis(3, 0);
        let basis = vec![StateVector::basis(3, 0), StateVector::basis(3, 1)];
        assert!(matches!(
            ensemble_identity_check(&psi, &Operator::identity(3), &basis),
            Err(Error::IncompleteBasis { .. })
        ));
        let skewed = vec![StateVector::basis(3, 0), StateVector::basis(3, 1), StateVector::basis(3, 1)];
        assert!(matches!(
            ensemble_identity_check(&psi, &Operator::identity(3), &skewed),
            Err(Error::IncompleteBasis { .. })
        ));
    }

    #[test]
    fn operator_flags_are_validated() {
        let bad = DMatrix::from_element(2, 2, c(1.0, 0.0));
        assert!(Operator::new(bad.clone(), OperatorKind::Unitary).is_err());
        assert!(Operator::new(bad, OperatorKind::Projector).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_unitary(&mut rng, 6);
        assert!(u.unitarity_defect() < 1e-12);
        assert!(Operator::new(u.entries().clone(), OperatorKind::Unitary).is_ok());
        let psi = random_state(&mut rng, 6);
        assert!(Operator::rank_one_projector(&psi).is_ok());
    }

    #[test]
    fn normalized_state_rejects_bad_norm() {
        assert!(StateVector::normalized(vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
        assert!(StateVector::normalized(vec![c(0.6, 0.0), c(0.0, 0.8)]).is_ok());
        assert!(StateVector::from_amplitudes(vec![c(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn basis_projector_family_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let phi = random_state(&mut rng, 7);
        let psi = random_state(&mut rng, 7);
        let ws = basis_projector_weak_values(&phi, &psi).unwrap();
        let s: Complex = ws.iter().sum();
        assert!((s - c(1.0, 0.0)).norm() < 1e-12);
        // agrees with the general routine for one projector
        let w3 = weak_value_two_state(&phi, &Operator::basis_projector(7, 3), &psi).unwrap();
        assert!((w3 - ws[3]).norm() < 1e-12 * w3.norm().max(1.0));
    }
}
