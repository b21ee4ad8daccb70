use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::real::Real;

pub type EvalFn<T> = Arc<dyn Fn(&[T], &[T]) -> Complex<T> + Send + Sync>;
pub type GradFn<T> = Arc<dyn Fn(&[T], &[T]) -> (Vec<Complex<T>>, Vec<Complex<T>>) + Send + Sync>;

/// Exponents of `x^a ξ^b` in `n` dimensions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    pub x: Vec<u32>,
    pub xi: Vec<u32>,
}

impl Monomial {
    pub fn new(x: Vec<u32>, xi: Vec<u32>) -> Self {
        Monomial { x, xi }
    }

    pub fn degree(&self) -> u32 {
        self.x.iter().chain(&self.xi).sum()
    }
}

/// Complex polynomial in `(x, ξ) ∈ ℝⁿ × ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T: Real> {
    dim: usize,
    terms: BTreeMap<Monomial, Complex<T>>,
}

impl<T: Real> Polynomial<T> {
    pub fn zero(dim: usize) -> Self {
        Polynomial { dim, terms: BTreeMap::new() }
    }

    /// One-dimensional polynomial from `(a, b, c)` triples meaning `c·x^a ξ^b`.
    pub fn from_terms_1d(terms: &[(u32, u32, Complex<T>)]) -> Self {
        let mut p = Self::zero(1);
        for &(a, b, c) in terms {
            p.add_term(Monomial::new(vec![a], vec![b]), c);
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn add_term(&mut self, m: Monomial, c: Complex<T>) {
        assert!(m.x.len() == self.dim && m.xi.len() == self.dim, "monomial dimension");
        let entry = self.terms.entry(m).or_insert_with(Complex::default);
        *entry += c;
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Complex<T>)> {
        self.terms.iter()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn scaled(&self, s: Complex<T>) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= s;
        }
        out
    }

    pub fn plus(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), *c);
        }
        out
    }

    /// `p − z`.
    pub fn minus_constant(&self, z: Complex<T>) -> Self {
        let mut out = self.clone();
        out.add_term(Monomial::new(vec![0; self.dim], vec![0; self.dim]), -z);
        out
    }

    pub fn eval(&self, x: &[T], xi: &[T]) -> Complex<T> {
        let mut acc = Complex::default();
        for (m, c) in &self.terms {
            let mut v = T::one();
            for (k, &a) in m.x.iter().enumerate() {
                v *= x[k].powi(a as i32);
            }
            for (k, &b) in m.xi.iter().enumerate() {
                v *= xi[k].powi(b as i32);
            }
            acc += c * v;
        }
        acc
    }

    pub fn grad(&self, x: &[T], xi: &[T]) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
        let n = self.dim;
        let mut gx = vec![Complex::default(); n];
        let mut gxi = vec![Complex::default(); n];
        for (m, c) in &self.terms {
            let base = |skip_x: Option<usize>, skip_xi: Option<usize>| {
                let mut v = T::one();
                for (k, &a) in m.x.iter().enumerate() {
                    let e = if skip_x == Some(k) { a as i32 - 1 } else { a as i32 };
                    v *= x[k].powi(e);
                }
                for (k, &b) in m.xi.iter().enumerate() {
                    let e = if skip_xi == Some(k) { b as i32 - 1 } else { b as i32 };
                    v *= xi[k].powi(e);
                }
                v
            };
            for k in 0..n {
                if m.x[k] > 0 {
                    gx[k] += c * (T::from_usize_lossy(m.x[k] as usize) * base(Some(k), None));
                }
                if m.xi[k] > 0 {
                    gxi[k] += c * (T::from_usize_lossy(m.xi[k] as usize) * base(None, Some(k)));
                }
            }
        }
        (gx, gxi)
    }
}

/// `p̃ = p + shift·β(|ρ|/radius)`.
#[derive(Clone)]
pub struct Deformation<T: Real> {
    pub base: Box<Symbol<T>>,
    pub shift: Complex<T>,
    pub radius: T,
}

/// Phase-space function `p(x, ξ)`.
#[derive(Clone)]
pub struct Symbol<T: Real> {
    dim: usize,
    label: String,
    eval: EvalFn<T>,
    grad: Option<GradFn<T>>,
    poly: Option<Polynomial<T>>,
    deformation: Option<Deformation<T>>,
}

impl<T: Real> fmt::Debug for Symbol<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbol")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .field("poly", &self.poly)
            .finish_non_exhaustive()
    }
}

impl<T: Real> Symbol<T> {
    pub fn from_polynomial(poly: Polynomial<T>, label: impl Into<String>) -> Self {
        let dim = poly.dim();
        let pe = poly.clone();
        let pg = poly.clone();
        Symbol {
            dim,
            label: label.into(),
            eval: Arc::new(move |x, xi| pe.eval(x, xi)),
            grad: Some(Arc::new(move |x, xi| pg.grad(x, xi))),
            poly: Some(poly),
            deformation: None,
        }
    }

    /// Arbitrary symbol; the gradient falls back to central differences.
    pub fn custom(dim: usize, label: impl Into<String>, eval: EvalFn<T>, grad: Option<GradFn<T>>) -> Result<Self> {
        if dim == 0 {
            return invalid("symbol dimension must be positive");
        }
        Ok(Symbol { dim, label: label.into(), eval, grad, poly: None, deformation: None })
    }

    /// `(x² + ξ²)/2`.
    pub fn harmonic_oscillator() -> Self {
        let half = Complex::new(T::lit(0.5), T::zero());
        Self::from_polynomial(Polynomial::from_terms_1d(&[(2, 0, half), (0, 2, half)]), "harmonic")
    }

    /// `(ξ² + i x²)/2`.
    pub fn rotated_oscillator() -> Self {
        let half = Complex::new(T::lit(0.5), T::zero());
        let ihalf = Complex::new(T::zero(), T::lit(0.5));
        Self::from_polynomial(Polynomial::from_terms_1d(&[(0, 2, half), (2, 0, ihalf)]), "rotated")
    }

    /// The coordinate function `x`.
    pub fn position() -> Self {
        Self::from_polynomial(Polynomial::from_terms_1d(&[(1, 0, Complex::new(T::one(), T::zero()))]), "x")
    }

    /// `p − z`. Keeps the polynomial form when available.
    pub fn minus(&self, z: Complex<T>) -> Self {
        if let Some(poly) = &self.poly {
            return Self::from_polynomial(poly.minus_constant(z), format!("{} - ({})", self.label, z));
        }
        let f = self.eval.clone();
        let g = self.grad.clone();
        Symbol {
            dim: self.dim,
            label: format!("{} - ({})", self.label, z),
            eval: Arc::new(move |x, xi| f(x, xi) - z),
            grad: g,
            poly: None,
            deformation: self.deformation.clone().map(|mut d| {
                d.base = Box::new(d.base.minus(z));
                d
            }),
        }
    }

    pub(crate) fn with_deformation(base: &Symbol<T>, shift: Complex<T>, radius: T) -> Self {
        let f = base.eval.clone();
        let eval: EvalFn<T> = Arc::new(move |x, xi| {
            let r = norm2(x, xi).sqrt();
            f(x, xi) + shift * bump(r / radius)
        });
        let mut s = Symbol {
            dim: base.dim,
            label: format!("{} deformed", base.label),
            eval,
            grad: None,
            poly: None,
            deformation: Some(Deformation { base: Box::new(base.clone()), shift, radius }),
        };
        let bg = base.grad.clone();
        let fb = base.clone();
        s.grad = Some(Arc::new(move |x, xi| {
            let (mut gx, mut gxi) = match &bg {
                Some(g) => g(x, xi),
                None => fb.fd_grad(x, xi),
            };
            let r = norm2(x, xi).sqrt();
            if r > T::zero() {
                let d = bump_derivative(r / radius) / (radius * r);
                for (g, &v) in gx.iter_mut().zip(x) {
                    *g += shift * (d * v);
                }
                for (g, &v) in gxi.iter_mut().zip(xi) {
                    *g += shift * (d * v);
                }
            }
            (gx, gxi)
        }));
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn poly(&self) -> Option<&Polynomial<T>> {
        self.poly.as_ref()
    }

    pub fn deformation(&self) -> Option<&Deformation<T>> {
        self.deformation.as_ref()
    }

    #[inline]
    pub fn eval(&self, x: &[T], xi: &[T]) -> Complex<T> {
        (self.eval)(x, xi)
    }

    /// Evaluates at `ρ = (x₁..xₙ, ξ₁..ξₙ)`.
    #[inline]
    pub fn eval_rho(&self, rho: &[T]) -> Complex<T> {
        let (x, xi) = rho.split_at(self.dim);
        (self.eval)(x, xi)
    }

    /// Checked evaluation: non-finite values become errors.
    pub fn eval_checked(&self, rho: &[T]) -> Result<Complex<T>> {
        let v = self.eval_rho(rho);
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("symbol {} at {:?}", self.label, rho)))
        }
    }

    /// `(∂ₓp, ∂_ξp)`.
    pub fn grad(&self, x: &[T], xi: &[T]) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
        match &self.grad {
            Some(g) => g(x, xi),
            None => self.fd_grad(x, xi),
        }
    }

    /// Central-difference gradient.
    pub fn fd_grad(&self, x: &[T], xi: &[T]) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
        let step = T::eps().powf(T::lit(1.0 / 3.0));
        let two = T::lit(2.0);
        let mut xs = x.to_vec();
        let mut xis = xi.to_vec();
        let mut gx = Vec::with_capacity(self.dim);
        let mut gxi = Vec::with_capacity(self.dim);
        for k in 0..self.dim {
            let s = step * (T::one() + x[k].abs());
            xs[k] = x[k] + s;
            let fp = self.eval(&xs, xi);
            xs[k] = x[k] - s;
            let fm = self.eval(&xs, xi);
            xs[k] = x[k];
            gx.push((fp - fm) / (two * s));
        }
        for k in 0..self.dim {
            let s = step * (T::one() + xi[k].abs());
            xis[k] = xi[k] + s;
            let fp = self.eval(x, &xis);
            xis[k] = xi[k] - s;
            let fm = self.eval(x, &xis);
            xis[k] = xi[k];
            gxi.push((fp - fm) / (two * s));
        }
        (gx, gxi)
    }
}

fn norm2<T: Real>(x: &[T], xi: &[T]) -> T {
    x.iter().chain(xi).fold(T::zero(), |acc, &v| acc + v * v)
}

fn flat<T: Real>(u: T) -> T {
    if u > T::zero() {
        (-T::one() / u).exp()
    } else {
        T::zero()
    }
}

fn flat_derivative<T: Real>(u: T) -> T {
    if u > T::zero() {
        flat(u) / (u * u)
    } else {
        T::zero()
    }
}

/// Smooth step `β(s) = f(2−s)/(f(2−s)+f(s−1))` with `f(u) = e^{−1/u}` for
/// `u > 0`: exactly 1 on `(−∞, 1]`, exactly 0 on `[2, ∞)`.
pub fn bump<T: Real>(s: T) -> T {
    let two = T::lit(2.0);
    if s <= T::one() {
        return T::one();
    }
    if s >= two {
        return T::zero();
    }
    let a = flat(two - s);
    let b = flat(s - T::one());
    a / (a + b)
}

pub fn bump_derivative<T: Real>(s: T) -> T {
    let two = T::lit(2.0);
    if s <= T::one() || s >= two {
        return T::zero();
    }
    let a = flat(two - s);
    let b = flat(s - T::one());
    let da = -flat_derivative(two - s);
    let db = flat_derivative(s - T::one());
    let d = a + b;
    (da * b - a * db) / (d * d)
}

/// Temperate weight `m` with `m(ρ) ≤ C₀⟨ρ−μ⟩^{N₀} m(μ)`.
#[derive(Clone)]
pub struct OrderFunction<T: Real> {
    eval: Arc<dyn Fn(&[T]) -> T + Send + Sync>,
    pub c0: T,
    pub n0: T,
}

impl<T: Real> OrderFunction<T> {
    pub fn new(eval: Arc<dyn Fn(&[T]) -> T + Send + Sync>, c0: T, n0: T) -> Result<Self> {
        if c0 < T::one() || n0 <= T::zero() {
            return invalid("order function needs C0 >= 1 and N0 > 0");
        }
        Ok(OrderFunction { eval, c0, n0 })
    }

    /// `⟨ρ⟩^s`; Peetre's inequality gives `C₀ = 2^{|s|/2}`, `N₀ = |s|`.
    pub fn japanese_bracket(s: T) -> Self {
        let e = move |rho: &[T]| (T::one() + rho.iter().fold(T::zero(), |a, &v| a + v * v)).powf(s / T::lit(2.0));
        OrderFunction { eval: Arc::new(e), c0: T::lit(2.0).powf(s.abs() / T::lit(2.0)), n0: s.abs() }
    }

    pub fn eval(&self, rho: &[T]) -> T {
        (self.eval)(rho)
    }

    /// Largest value of `m(ρ) / (C₀⟨ρ−μ⟩^{N₀} m(μ))` over the given pairs; the
    /// temperance inequality holds on the sample iff the result is ≤ 1.
    pub fn worst_ratio(&self, pairs: &[(Vec<T>, Vec<T>)]) -> T {
        let mut worst = T::zero();
        for (rho, mu) in pairs {
            let d2 = rho.iter().zip(mu).fold(T::zero(), |a, (&r, &m)| a + (r - m) * (r - m));
            let bracket = (T::one() + d2).sqrt().powf(self.n0);
            let ratio = self.eval(rho) / (self.c0 * bracket * self.eval(mu));
            if ratio > worst {
                worst = ratio;
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::ComplexField;
    use crate::rng::stream_rng;
    use rand::Rng;

    #[test]
    fn polynomial_eval_matches_closed_form() {
        let p = Symbol::<f64>::rotated_oscillator();
        let v = p.eval(&[1.5], &[-0.5]);
        assert_eq!(v, Complex::new(0.125, 1.125));
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = stream_rng(3, 0);
        let p = Symbol::<f64>::rotated_oscillator();
        let omega = crate::phase_space::DomainSpec::disc(Complex::new(1.0, 1.0), 0.4);
        let q = Symbol::with_deformation(&p, Complex::new(3.0, 3.0), 1.2);
        for _ in 0..50 {
            let x = [rng.gen_range(-3.0..3.0)];
            let xi = [rng.gen_range(-3.0..3.0)];
            for s in [&p, &q] {
                let (gx, gxi) = s.grad(&x, &xi);
                let (fx, fxi) = s.fd_grad(&x, &xi);
                assert!((gx[0] - fx[0]).modulus() < 1e-6, "{gx:?} {fx:?}");
                assert!((gxi[0] - fxi[0]).modulus() < 1e-6);
            }
        }
        let _ = omega;
    }

    #[test]
    fn bump_flat_regions_and_symmetry() {
        assert_eq!(bump(0.3_f64), 1.0);
        assert_eq!(bump(1.0_f64), 1.0);
        assert_eq!(bump(2.0_f64), 0.0);
        assert_eq!(bump(7.0_f64), 0.0);
        assert!((bump(1.5_f64) - 0.5).abs() < 1e-15);
        let mut prev = 1.0;
        for k in 0..=1000 {
            let v = bump(1.0 + k as f64 / 1000.0);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn minus_constant_shifts_values() {
        let p = Symbol::<f64>::rotated_oscillator();
        let z = Complex::new(1.0, 1.0);
        let q = p.minus(z);
        assert!(q.poly().is_some());
        assert_eq!(q.eval(&[0.3], &[0.2]), p.eval(&[0.3], &[0.2]) - z);
    }

    #[test]
    fn japanese_bracket_is_temperate() {
        let mut rng = stream_rng(5, 1);
        for s in [0.5, 1.0, 3.0, -2.0] {
            let m = OrderFunction::<f64>::japanese_bracket(s);
            let pairs: Vec<_> = (0..500)
                .map(|_| {
                    let a: Vec<f64> = (0..2).map(|_| rng.gen_range(-20.0..20.0)).collect();
                    let b: Vec<f64> = (0..2).map(|_| rng.gen_range(-20.0..20.0)).collect();
                    (a, b)
                })
                .collect();
            assert!(m.worst_ratio(&pairs) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn custom_symbols_use_finite_differences() {
        let s = Symbol::<f64>::custom(1, "cubic", Arc::new(|x, xi| Complex::new(x[0].powi(3), xi[0])), None).unwrap();
        let (gx, gxi) = s.grad(&[2.0], &[0.0]);
        assert!((gx[0].re - 12.0).abs() < 1e-7);
        assert!((gxi[0].im - 1.0).abs() < 1e-9);
        assert!(s.eval_checked(&[f64::NAN, 0.0]).is_err());
    }
}
