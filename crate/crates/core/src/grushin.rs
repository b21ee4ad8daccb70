//! Grushin (bordered) systems built from singular triples, their closed-form
//! inverses and the determinant identities they satisfy.

use nalgebra::ComplexField;
use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::quantize::{log_det_of, singular_triples_of, SingularTriple};
use crate::real::Real;
use crate::CMatrix;

/// `𝒫 = (P R₋; R₊ 0)` with `N` the number of `λⱼ ≤ α`.
#[derive(Debug, Clone)]
pub struct GrushinSystem<T: Real> {
    pub p: CMatrix<T>,
    pub r_plus: CMatrix<T>,
    pub r_minus: CMatrix<T>,
    pub alpha: T,
    pub n: usize,
    pub triple: SingularTriple<T>,
}

/// Blocks of `ℰ = 𝒫⁻¹ = (E E₊; E₋ E₋₊)`.
#[derive(Debug, Clone)]
pub struct GrushinInverse<T: Real> {
    pub e: CMatrix<T>,
    pub e_plus: CMatrix<T>,
    pub e_minus: CMatrix<T>,
    pub e_mp: CMatrix<T>,
}

const TIE_TOL: f64 = 1e-12;
const INJECTIVE_TOL: f64 = 1e-14;

fn real_c<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

/// Builds the Grushin system of `P` at spectral cutoff `α`.
pub fn assemble_grushin<T: Real>(p: &CMatrix<T>, alpha: T) -> Result<GrushinSystem<T>> {
    if p.nrows() != p.ncols() || p.nrows() == 0 {
        return invalid("Grushin problem needs a nonempty square matrix");
    }
    if !(alpha > T::zero()) {
        return invalid("cutoff alpha must be positive");
    }
    let triple = singular_triples_of(p)?;
    let norm_sq = triple.lambda.last().copied().unwrap_or(T::zero());
    let guard = T::lit(TIE_TOL) * norm_sq;
    if let Some(l) = triple.lambda.iter().find(|&&l| (l - alpha).abs() <= guard) {
        return Err(Error::InvalidArgument(format!(
            "singular value squared {l} ties the cutoff alpha = {alpha}; nudge alpha"
        )));
    }
    let n = small_count(&triple.lambda, alpha);
    let k = p.nrows();
    let sa = real_c(alpha.sqrt());
    let r_plus = CMatrix::from_fn(n, k, |j, c| triple.e[(c, j)].conj() * sa);
    let r_minus = CMatrix::from_fn(k, n, |r, j| triple.f[(r, j)] * sa);
    Ok(GrushinSystem { p: p.clone(), r_plus, r_minus, alpha, n, triple })
}

/// `#{j : λⱼ ≤ α}` for ascending `λ`.
pub fn small_count<T: Real>(lambda: &[T], alpha: T) -> usize {
    lambda.partition_point(|&l| l <= alpha)
}

impl<T: Real> GrushinSystem<T> {
    pub fn k(&self) -> usize {
        self.p.nrows()
    }

    /// The full `(K+N) × (K+N)` matrix.
    pub fn block(&self) -> CMatrix<T> {
        bordered(&self.p, &self.r_plus, &self.r_minus)
    }
}

fn bordered<T: Real>(p: &CMatrix<T>, r_plus: &CMatrix<T>, r_minus: &CMatrix<T>) -> CMatrix<T> {
    let k = p.nrows();
    let n = r_plus.nrows();
    let mut m = CMatrix::<T>::zeros(k + n, k + n);
    m.view_mut((0, 0), (k, k)).copy_from(p);
    m.view_mut((0, k), (k, n)).copy_from(r_minus);
    m.view_mut((k, 0), (n, k)).copy_from(r_plus);
    m
}

/// Closed-form inverse: `E = Σ_{j>N} λⱼ^{−1/2} eⱼfⱼ*`, `E₊ = α^{−1/2}(e₁..e_N)`,
/// `E₋ = α^{−1/2}(f₁..f_N)*`, `E₋₊ = −diag(√λⱼ)/α`.
pub fn invert_grushin<T: Real>(sys: &GrushinSystem<T>) -> Result<GrushinInverse<T>> {
    let k = sys.k();
    let n = sys.n;
    let t = &sys.triple;
    let norm_sq = t.lambda.last().copied().unwrap_or(T::zero());
    if n < k && t.lambda[n] <= T::lit(INJECTIVE_TOL) * norm_sq {
        return Err(Error::Singular("smallest excluded singular value is numerically zero".into()));
    }
    let inv_sa = real_c(T::one() / sys.alpha.sqrt());
    let mut e = CMatrix::<T>::zeros(k, k);
    for j in n..k {
        let w = real_c(T::one() / t.sigma(j));
        e += (t.e.column(j) * w) * t.f.column(j).adjoint();
    }
    let e_plus = t.e.columns(0, n) * inv_sa;
    let e_minus = t.f.columns(0, n).adjoint() * inv_sa;
    let e_mp = CMatrix::from_fn(n, n, |a, b| if a == b { real_c(-t.sigma(a) / sys.alpha) } else { Complex::default() });
    Ok(GrushinInverse { e, e_plus, e_minus, e_mp })
}

impl<T: Real> GrushinInverse<T> {
    pub fn block(&self) -> CMatrix<T> {
        let k = self.e.nrows();
        let n = self.e_mp.nrows();
        let mut m = CMatrix::<T>::zeros(k + n, k + n);
        m.view_mut((0, 0), (k, k)).copy_from(&self.e);
        m.view_mut((0, k), (k, n)).copy_from(&self.e_plus);
        m.view_mut((k, 0), (n, k)).copy_from(&self.e_minus);
        m.view_mut((k, k), (n, n)).copy_from(&self.e_mp);
        m
    }

    /// Operator norms of `E`, `E₊`, `E₋`, `E₋₊`.
    pub fn block_norms(&self) -> Result<[T; 4]> {
        let op = |m: &CMatrix<T>| -> Result<T> {
            if m.is_empty() {
                return Ok(T::zero());
            }
            Ok(singular_triples_of(m)?.lambda.last().map(|l| l.sqrt()).unwrap_or(T::zero()))
        };
        Ok([op(&self.e)?, op(&self.e_plus)?, op(&self.e_minus)?, op(&self.e_mp)?])
    }
}

/// `max |𝒫ℰ − I|` entrywise.
pub fn inverse_residual<T: Real>(sys: &GrushinSystem<T>, inv: &GrushinInverse<T>) -> T {
    let prod = sys.block() * inv.block();
    let id = CMatrix::<T>::identity(prod.nrows(), prod.ncols());
    (prod - id).iter().fold(T::zero(), |a, z| a.max(z.modulus()))
}

/// Log-domain checks of `det P = det 𝒫 · det E₋₊` and of
/// `|det 𝒫| = α^{N/2} Πⱼ max(√α, √λⱼ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Factorization<T: Real> {
    pub n: usize,
    pub log_det_p: T,
    pub log_det_block: T,
    pub log_det_emp: T,
    /// `|ln|det P| − ln|det 𝒫| − ln|det E₋₊||`.
    pub residual: T,
    /// Relative error of the closed form for `|det 𝒫|`.
    pub block_closed_form_error: T,
}

pub fn factorization_residual<T: Real>(p: &CMatrix<T>, alpha: T) -> Result<Factorization<T>> {
    let log_det_p = log_det_of(p)?.re;
    let sys = assemble_grushin(p, alpha)?;
    let log_det_block = log_det_of(&sys.block())?.re;
    let t = &sys.triple;
    let log_det_emp = (0..sys.n).fold(T::zero(), |acc, j| acc + (t.sigma(j) / alpha).ln());
    let half = T::lit(0.5);
    let closed = T::from_usize_lossy(sys.n) * half * alpha.ln()
        + t.lambda.iter().fold(T::zero(), |acc, &l| acc + half * l.max(alpha).ln());
    Ok(Factorization {
        n: sys.n,
        log_det_p,
        log_det_block,
        log_det_emp,
        residual: (log_det_p - log_det_block - log_det_emp).abs(),
        block_closed_form_error: (log_det_block - closed).exp_m1().abs(),
    })
}

/// `E₋₊` of the perturbed system and its comparison with the truncated
/// Neumann series.
#[derive(Debug, Clone)]
pub struct PerturbedEffective<T: Real> {
    pub e_mp_delta: CMatrix<T>,
    /// `‖E₋₊^δ − (E₋₊ − δE₋Q̃E₊ + δ²E₋Q̃EQ̃E₊)‖` (operator norm).
    pub neumann_error: T,
    /// `(α/δ)(E₋₊^δ − E₋₊)`.
    pub q_hat: CMatrix<T>,
    /// `θ = δ‖Q̃‖/√α`.
    pub theta: T,
    pub log_det_p_delta: T,
    pub log_det_block_delta: T,
    pub log_det_emp_delta: T,
}

impl<T: Real> PerturbedEffective<T> {
    /// Majorant `θ³/((1−θ)√α)` of the series tail.
    pub fn neumann_bound(&self, alpha: T) -> T {
        self.theta.powi(3) / ((T::one() - self.theta) * alpha.sqrt())
    }
}

fn op_norm<T: Real>(m: &CMatrix<T>) -> Result<T> {
    if m.is_empty() {
        return Ok(T::zero());
    }
    Ok(singular_triples_of(m)?.lambda.last().map(|l| l.sqrt()).unwrap_or(T::zero()))
}

/// Effective Hamiltonian of `P_δ = P + δQ̃` with the unperturbed borders.
///
/// With this sign, `ℰ_δ = ℰ Σ_m (−δ𝒬ℰ)^m` where `𝒬 = (Q̃ 0; 0 0)`, so
/// `E₋₊^δ = E₋₊ − δE₋Q̃E₊ + δ²E₋Q̃EQ̃E₊ − …`.
pub fn perturbed_effective<T: Real>(sys: &GrushinSystem<T>, q: &CMatrix<T>, delta: T) -> Result<PerturbedEffective<T>> {
    let k = sys.k();
    let n = sys.n;
    if q.nrows() != k || q.ncols() != k {
        return invalid("perturbation must be K x K");
    }
    let theta = delta * op_norm(q)? / sys.alpha.sqrt();
    if !(theta < T::lit(0.5)) {
        return Err(Error::Guard(format!("Neumann margin violated: delta*|Q|/sqrt(alpha) = {theta} >= 0.5")));
    }
    let inv = invert_grushin(sys)?;
    let p_delta = &sys.p + q * real_c(delta);
    let block = bordered(&p_delta, &sys.r_plus, &sys.r_minus);
    let mut rhs = CMatrix::<T>::zeros(k + n, n);
    for j in 0..n {
        rhs[(k + j, j)] = real_c(T::one());
    }
    let lu = block.clone().lu();
    let sol = lu.solve(&rhs).ok_or_else(|| Error::Singular("perturbed Grushin matrix".into()))?;
    let e_mp_delta = sol.rows(k, n).into_owned();
    let dq = q * real_c(delta);
    let first = &inv.e_minus * &dq * &inv.e_plus;
    let second = &inv.e_minus * &dq * &inv.e * &dq * &inv.e_plus;
    let series = &inv.e_mp - first + second;
    let neumann_error = op_norm(&(&e_mp_delta - series))?;
    let q_hat = if delta > T::zero() {
        (&e_mp_delta - &inv.e_mp) * real_c(sys.alpha / delta)
    } else {
        CMatrix::<T>::zeros(n, n)
    };
    let log_det_p_delta = log_det_of(&p_delta)?.re;
    let log_det_block_delta = log_det_of(&block)?.re;
    let log_det_emp_delta = if n > 0 { log_det_of(&e_mp_delta)?.re } else { T::zero() };
    Ok(PerturbedEffective {
        e_mp_delta,
        neumann_error,
        q_hat,
        theta,
        log_det_p_delta,
        log_det_block_delta,
        log_det_emp_delta,
    })
}

fn inverse<T: Real>(m: &CMatrix<T>) -> Result<CMatrix<T>> {
    m.clone().try_inverse().ok_or_else(|| Error::Singular("block inverse".into()))
}

/// `|tr ȦB − (tr Ȧ₂₂A₂₂⁻¹ − tr B₁₁⁻¹Ḃ₁₁)|` at `t₀` for `B = A⁻¹`, with
/// derivatives from central differences of step `fd_step`. The first block
/// has size `n1`.
pub fn trace_formula_check<T: Real, F>(path: F, n1: usize, t0: T, fd_step: T) -> Result<T>
where
    F: Fn(T) -> CMatrix<T>,
{
    let a0 = path(t0);
    let ap = path(t0 + fd_step);
    let am = path(t0 - fd_step);
    let m = a0.nrows();
    if m != a0.ncols() || n1 == 0 || n1 >= m {
        return invalid("block path needs a square matrix with two nonempty blocks");
    }
    let n2 = m - n1;
    let two_h = real_c(T::lit(2.0) * fd_step);
    let a_dot = (&ap - &am) / two_h;
    let b0 = inverse(&a0)?;
    let bp = inverse(&ap)?;
    let bm = inverse(&am)?;
    let lhs = (&a_dot * &b0).trace();
    let a22 = a0.view((n1, n1), (n2, n2)).into_owned();
    let a22_dot = a_dot.view((n1, n1), (n2, n2)).into_owned();
    let b11 = b0.view((0, 0), (n1, n1)).into_owned();
    let b11_dot = (bp.view((0, 0), (n1, n1)) - bm.view((0, 0), (n1, n1))) / two_h;
    let rhs = (&a22_dot * inverse(&a22)?).trace() - (inverse(&b11)? * b11_dot).trace();
    Ok((lhs - rhs).modulus())
}

/// `max |B₂₂ − (A₂₂⁻¹ + B₂₁B₁₁⁻¹B₁₂)|` for `B = A⁻¹`.
pub fn schur_identity_residual<T: Real>(a: &CMatrix<T>, n1: usize) -> Result<T> {
    let m = a.nrows();
    if n1 == 0 || n1 >= m {
        return invalid("need two nonempty blocks");
    }
    let n2 = m - n1;
    let b = inverse(a)?;
    let a22 = a.view((n1, n1), (n2, n2)).into_owned();
    let b11 = b.view((0, 0), (n1, n1)).into_owned();
    let b12 = b.view((0, n1), (n1, n2)).into_owned();
    let b21 = b.view((n1, 0), (n2, n1)).into_owned();
    let b22 = b.view((n1, n1), (n2, n2)).into_owned();
    let rhs = inverse(&a22)? + b21 * inverse(&b11)? * b12;
    Ok((b22 - rhs).iter().fold(T::zero(), |acc, z| acc.max(z.modulus())))
}

/// Membership of `(s, t, r)` in the invertibility set of `(E₋₊ −s; t r)` for
/// scalar `E₋₊`: `{r = 0, st ≠ 0} ∪ {r ≠ 0, −st/r ≠ E₋₊}`.
pub fn in_invertibility_set<T: Real>(e_mp: Complex<T>, s: Complex<T>, t: Complex<T>, r: Complex<T>) -> bool {
    let zero = Complex::default();
    if r == zero {
        s * t != zero
    } else {
        -(s * t) / r != e_mp
    }
}
