//! Weyl quantization of polynomial symbols in the Hermite basis and the dense
//! spectral kernels built on top of it.

mod banded;
mod linalg;

use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::phase_space::{bump, Monomial, Polynomial, Symbol};
use crate::real::Real;
use crate::CMatrix;
use banded::Banded;

pub use linalg::{
    check_triple, eigenvalues, eigenvalues_of, log_det, log_det_of, singular_triples, singular_triples_of,
    trust_spectrum, SingularTriple, TripleCheck, TrustedSpectrum,
};

/// Default relative drift tolerance for eigenvalue trust under `K → 2K`.
pub const TRUST_TOL: f64 = 1e-6;

/// First `k` Hermite functions of the `h`-scaled harmonic oscillator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisSpec<T: Real> {
    pub h: T,
    pub k: usize,
}

impl<T: Real> BasisSpec<T> {
    pub fn new(h: T, k: usize) -> Result<Self> {
        if k < 4 {
            return invalid("basis truncation K must be at least 4");
        }
        if !(h > T::zero()) {
            return invalid("semiclassical parameter h must be positive");
        }
        Ok(BasisSpec { h, k })
    }

    pub fn doubled(&self) -> Self {
        BasisSpec { h: self.h, k: 2 * self.k }
    }
}

/// `K × K` complex matrix tagged with the basis it lives in.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix<T: Real> {
    pub entries: CMatrix<T>,
    pub basis: BasisSpec<T>,
    pub label: String,
}

impl<T: Real> OperatorMatrix<T> {
    pub fn new(entries: CMatrix<T>, basis: BasisSpec<T>, label: impl Into<String>) -> Result<Self> {
        if entries.nrows() != basis.k || entries.ncols() != basis.k {
            return invalid("matrix dimensions do not match basis.K");
        }
        if entries.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("operator matrix entries".into()));
        }
        Ok(OperatorMatrix { entries, basis, label: label.into() })
    }

    pub fn k(&self) -> usize {
        self.basis.k
    }

    /// `M + c·N`, keeping this matrix's basis and label.
    pub fn plus_scaled(&self, c: Complex<T>, other: &CMatrix<T>) -> Self {
        OperatorMatrix { entries: &self.entries + other * c, basis: self.basis, label: self.label.clone() }
    }

    /// `M − z·I`.
    pub fn shifted(&self, z: Complex<T>) -> Self {
        let mut m = self.clone();
        for j in 0..m.k() {
            m.entries[(j, j)] -= z;
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        OperatorMatrix { entries: self.entries.adjoint(), basis: self.basis, label: format!("{}*", self.label) }
    }
}

const MAX_DEGREE: u32 = 4;
/// Extra rows kept while forming products so the leading block is exact.
const PAD: usize = 4;

/// Exact `h`-Weyl quantization of a polynomial symbol of degree ≤ 4 in the
/// first `K` Hermite functions.
///
/// Mixed monomials use McCoy's form of the symmetric ordering,
/// `Op(x^a ξ^b) = 2^{−a} Σₖ C(a,k) X^{a−k} Ξ^b X^k`, at size `K + 4`, and are
/// truncated afterwards. A deformed symbol `p + s·β(|ρ|/R)` is quantized as
/// `P + s·β(√(2H)/R)` with `H` the oscillator, which is diagonal here.
pub fn build_weyl_matrix<T: Real>(p: &Symbol<T>, basis: BasisSpec<T>) -> Result<OperatorMatrix<T>> {
    if p.dim() != 1 {
        return Err(Error::Unsupported("Weyl quantization is implemented for n = 1".into()));
    }
    if let Some(def) = p.deformation() {
        let mut m = build_weyl_matrix(&def.base, basis)?;
        for k in 0..basis.k {
            let r = (T::from_usize_lossy(2 * k + 1) * basis.h).sqrt();
            m.entries[(k, k)] += def.shift * bump(r / def.radius);
        }
        m.label = p.label().to_string();
        return Ok(m);
    }
    let poly = p.poly().ok_or_else(|| Error::InvalidArgument("symbol has no polynomial coefficients".into()))?;
    quantize_polynomial(poly, basis).and_then(|e| OperatorMatrix::new(e, basis, p.label()))
}

fn quantize_polynomial<T: Real>(poly: &Polynomial<T>, basis: BasisSpec<T>) -> Result<CMatrix<T>> {
    if poly.degree() > MAX_DEGREE {
        return Err(Error::Unsupported(format!("polynomial degree {} exceeds {}", poly.degree(), MAX_DEGREE)));
    }
    let n = basis.k + PAD;
    let s = (basis.h / T::lit(2.0)).sqrt();
    let x = Banded::ladder_position(n, s);
    let xi = Banded::ladder_momentum(n, s);
    let mut xp = vec![Banded::identity(n)];
    let mut xip = vec![Banded::identity(n)];
    for d in 1..=MAX_DEGREE as usize {
        xp.push(xp[d - 1].mul(&x));
        xip.push(xip[d - 1].mul(&xi));
    }
    let mut out = CMatrix::<T>::zeros(basis.k, basis.k);
    for (m, c) in poly.terms() {
        let w = weyl_monomial(m, &xp, &xip);
        for j in 0..basis.k {
            for k in 0..basis.k {
                out[(j, k)] += *c * w.get(j, k);
            }
        }
    }
    Ok(out)
}

/// Hermitian matrix of `Op(x^a ξ^b)` at the padded size.
fn weyl_monomial<T: Real>(m: &Monomial, xp: &[Banded<T>], xip: &[Banded<T>]) -> Banded<T> {
    let (a, b) = (m.x[0] as usize, m.xi[0] as usize);
    let mut acc = Banded::zeros(xp[0].n(), a + b);
    let mut binom = 1u64;
    for k in 0..=a {
        let term = xp[a - k].mul(&xip[b]).mul(&xp[k]);
        acc.add_scaled(&term, T::from_u64(binom).expect("small binomial"));
        binom = binom * (a - k) as u64 / (k + 1) as u64;
    }
    acc.scale(T::lit(0.5).powi(a as i32));
    acc.hermitian_part()
}

/// Entries of the position operator in the Hermite basis, for cross-checks.
pub fn position_matrix<T: Real>(basis: BasisSpec<T>) -> CMatrix<T> {
    let s = (basis.h / T::lit(2.0)).sqrt();
    CMatrix::from_fn(basis.k, basis.k, |j, k| {
        let v = if j == k + 1 {
            s * T::from_usize_lossy(k + 1).sqrt()
        } else if k == j + 1 {
            s * T::from_usize_lossy(k).sqrt()
        } else {
            T::zero()
        };
        Complex::new(v, T::zero())
    })
}

/// Eigenvalues `e^{iπ/4}(k + ½)h`, `k < count`, of the quantized `(ξ² + ix²)/2`.
pub fn rotated_oscillator_levels<T: Real>(h: T, count: usize) -> Vec<Complex<T>> {
    let w = crate::real::cis(T::frac_pi_4());
    (0..count).map(|k| w * ((T::from_usize_lossy(k) + T::lit(0.5)) * h)).collect()
}
