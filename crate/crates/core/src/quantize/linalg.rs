use std::cmp::Ordering;

use nalgebra::linalg::{Schur, SVD};
use nalgebra::ComplexField;
use num_complex::Complex;

use super::{build_weyl_matrix, BasisSpec, OperatorMatrix};
use crate::error::{Error, Result};
use crate::phase_space::Symbol;
use crate::real::Real;
use crate::CMatrix;

/// `(λⱼ, eⱼ, fⱼ)` with `P eⱼ = √λⱼ fⱼ`, `λ` ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularTriple<T: Real> {
    pub lambda: Vec<T>,
    /// Right singular vectors as columns.
    pub e: CMatrix<T>,
    /// Left singular vectors as columns.
    pub f: CMatrix<T>,
}

impl<T: Real> SingularTriple<T> {
    pub fn sigma(&self, j: usize) -> T {
        self.lambda[j].sqrt()
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }
}

fn cmp_complex<T: Real>(a: &Complex<T>, b: &Complex<T>) -> Ordering {
    a.re.partial_cmp(&b.re).unwrap_or(Ordering::Equal).then(a.im.partial_cmp(&b.im).unwrap_or(Ordering::Equal))
}

/// All eigenvalues, sorted by real part then imaginary part.
pub fn eigenvalues_of<T: Real>(m: &CMatrix<T>) -> Result<Vec<Complex<T>>> {
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite("eigenvalue input".into()));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), T::eps(), 200 * n)
        .ok_or_else(|| Error::NoConvergence(format!("Schur iteration on {n}x{n} matrix")))?;
    let ev = schur.eigenvalues().ok_or_else(|| Error::NoConvergence("Schur form not triangular".into()))?;
    let mut v: Vec<Complex<T>> = ev.iter().copied().collect();
    v.sort_by(cmp_complex);
    Ok(v)
}

pub fn eigenvalues<T: Real>(m: &OperatorMatrix<T>) -> Result<Vec<Complex<T>>> {
    eigenvalues_of(&m.entries)
}

/// Eigenvalues with a convergence report against a requantization at `2K`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustedSpectrum<T: Real> {
    pub eigenvalues: Vec<Complex<T>>,
    pub trusted: Vec<bool>,
    /// Distance to the nearest eigenvalue of the doubled matrix.
    pub drift: Vec<T>,
}

impl<T: Real> TrustedSpectrum<T> {
    pub fn trusted_values(&self) -> impl Iterator<Item = Complex<T>> + '_ {
        self.eigenvalues.iter().zip(&self.trusted).filter(|(_, &t)| t).map(|(z, _)| *z)
    }

    pub fn all_trusted(eigenvalues: Vec<Complex<T>>) -> Self {
        let n = eigenvalues.len();
        TrustedSpectrum { eigenvalues, trusted: vec![true; n], drift: vec![T::zero(); n] }
    }
}

/// Marks eigenvalues of `m` that move by more than `rel_tol·max(|λ|, h)` when
/// compared with those of `doubled`.
pub fn trust_spectrum<T: Real>(m: &CMatrix<T>, doubled: &CMatrix<T>, h: T, rel_tol: T) -> Result<TrustedSpectrum<T>> {
    let ev = eigenvalues_of(m)?;
    let ev2 = eigenvalues_of(doubled)?;
    let mut trusted = Vec::with_capacity(ev.len());
    let mut drift = Vec::with_capacity(ev.len());
    for z in &ev {
        let d = ev2.iter().fold(T::inf(), |acc, w| acc.min((*z - *w).modulus()));
        trusted.push(d <= rel_tol * z.modulus().max(h));
        drift.push(d);
    }
    Ok(TrustedSpectrum { eigenvalues: ev, trusted, drift })
}

impl<T: Real> OperatorMatrix<T> {
    /// Eigenvalues of the quantization of `p` with the `K → 2K` trust report.
    pub fn quantized_spectrum(p: &Symbol<T>, basis: BasisSpec<T>, rel_tol: T) -> Result<TrustedSpectrum<T>> {
        let m = build_weyl_matrix(p, basis)?;
        let m2 = build_weyl_matrix(p, basis.doubled())?;
        trust_spectrum(&m.entries, &m2.entries, basis.h, rel_tol)
    }
}

pub fn singular_triples_of<T: Real>(m: &CMatrix<T>) -> Result<SingularTriple<T>> {
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite("SVD input".into()));
    }
    let n = m.nrows().min(m.ncols());
    let svd = SVD::try_new(m.clone(), true, true, T::eps(), 200 * n.max(1))
        .ok_or_else(|| Error::NoConvergence("SVD".into()))?;
    let u = svd.u.ok_or_else(|| Error::NoConvergence("SVD without U".into()))?;
    let v = svd.v_t.ok_or_else(|| Error::NoConvergence("SVD without V".into()))?.adjoint();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap_or(Ordering::Equal));
    let lambda = order.iter().map(|&j| svd.singular_values[j] * svd.singular_values[j]).collect();
    let e = CMatrix::from_fn(v.nrows(), n, |r, c| v[(r, order[c])]);
    let f = CMatrix::from_fn(u.nrows(), n, |r, c| u[(r, order[c])]);
    Ok(SingularTriple { lambda, e, f })
}

pub fn singular_triples<T: Real>(m: &OperatorMatrix<T>) -> Result<SingularTriple<T>> {
    singular_triples_of(&m.entries)
}

/// Residuals of the triple relations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripleCheck<T: Real> {
    /// `max_j ‖M eⱼ − √λⱼ fⱼ‖ / ‖M‖`.
    pub relation: T,
    /// `max(‖E*E − I‖, ‖F*F − I‖)` entrywise.
    pub orthonormality: T,
    pub ascending: bool,
}

pub fn check_triple<T: Real>(m: &CMatrix<T>, t: &SingularTriple<T>) -> TripleCheck<T> {
    let norm = t.lambda.last().map(|l| l.sqrt()).unwrap_or(T::one()).max(T::eps());
    let me = m * &t.e;
    let mut relation = T::zero();
    for j in 0..t.len() {
        let r = (me.column(j) - t.f.column(j) * Complex::new(t.sigma(j), T::zero())).norm();
        relation = relation.max(r / norm);
    }
    let k = t.len();
    let id = CMatrix::<T>::identity(k, k);
    let oe = (t.e.adjoint() * &t.e - &id).iter().fold(T::zero(), |a, z| a.max(z.modulus()));
    let of = (t.f.adjoint() * &t.f - &id).iter().fold(T::zero(), |a, z| a.max(z.modulus()));
    TripleCheck { relation, orthonormality: oe.max(of), ascending: t.lambda.windows(2).all(|w| w[0] <= w[1]) }
}

/// `ln det M`: real part `Σ ln|uᵢᵢ|` over the LU pivots, imaginary part the
/// accumulated phase in `(−π, π]`.
pub fn log_det_of<T: Real>(m: &CMatrix<T>) -> Result<Complex<T>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::InvalidArgument("log_det of a non-square matrix".into()));
    }
    if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NonFinite("log_det input".into()));
    }
    let lu = m.clone().lu();
    let mut re = T::zero();
    let mut phase = T::zero();
    for i in 0..n {
        let u = lu.lu_internal()[(i, i)];
        let a = u.modulus();
        if a == T::zero() {
            return Err(Error::Singular(format!("zero pivot at position {i}")));
        }
        re += a.ln();
        phase += u.argument();
    }
    let sign: T = lu.p().determinant();
    if sign < T::zero() {
        phase += T::pi();
    }
    Ok(Complex::new(re, wrap_phase(phase)))
}

pub fn log_det<T: Real>(m: &OperatorMatrix<T>) -> Result<Complex<T>> {
    log_det_of(&m.entries)
}

pub(crate) fn wrap_phase<T: Real>(phase: T) -> T {
    let two_pi = T::two_pi();
    let mut p = phase - two_pi * (phase / two_pi).round();
    if p <= -T::pi() {
        p += two_pi;
    }
    p
}
