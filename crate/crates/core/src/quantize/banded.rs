use num_complex::Complex;

use crate::real::Real;
#[cfg(test)]
use crate::CMatrix;

/// Square band matrix with half-bandwidth `bw`.
#[derive(Debug, Clone)]
pub(crate) struct Banded<T: Real> {
    n: usize,
    bw: usize,
    d: Vec<Complex<T>>,
}

impl<T: Real> Banded<T> {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Banded { n, bw, d: vec![Complex::default(); n * (2 * bw + 1)] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0);
        for i in 0..n {
            m.d[i] = Complex::new(T::one(), T::zero());
        }
        m
    }

    /// `s(a + a†)`.
    pub fn ladder_position(n: usize, s: T) -> Self {
        let mut m = Self::zeros(n, 1);
        for i in 0..n - 1 {
            let v = Complex::new(s * T::from_usize_lossy(i + 1).sqrt(), T::zero());
            *m.at(i, i + 1) = v;
            *m.at(i + 1, i) = v;
        }
        m
    }

    /// `s(a − a†)/i`.
    pub fn ladder_momentum(n: usize, s: T) -> Self {
        let mut m = Self::zeros(n, 1);
        for i in 0..n - 1 {
            let v = s * T::from_usize_lossy(i + 1).sqrt();
            *m.at(i, i + 1) = Complex::new(T::zero(), -v);
            *m.at(i + 1, i) = Complex::new(T::zero(), v);
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn at(&mut self, i: usize, j: usize) -> &mut Complex<T> {
        let w = 2 * self.bw + 1;
        &mut self.d[i * w + (j + self.bw - i)]
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        if i.abs_diff(j) > self.bw {
            return Complex::default();
        }
        self.d[i * (2 * self.bw + 1) + (j + self.bw - i)]
    }

    pub fn mul(&self, other: &Self) -> Self {
        let bw = self.bw + other.bw;
        let mut out = Self::zeros(self.n, bw);
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            let hi = (i + bw).min(self.n - 1);
            for j in lo..=hi {
                let k_lo = i.saturating_sub(self.bw).max(j.saturating_sub(other.bw));
                let k_hi = (i + self.bw).min(j + other.bw).min(self.n - 1);
                let mut acc = Complex::default();
                for k in k_lo..=k_hi {
                    acc += self.get(i, k) * other.get(k, j);
                }
                *out.at(i, j) = acc;
            }
        }
        out
    }

    pub fn add_scaled(&mut self, other: &Self, c: T) {
        assert!(other.bw <= self.bw);
        for i in 0..self.n {
            let lo = i.saturating_sub(other.bw);
            let hi = (i + other.bw).min(self.n - 1);
            for j in lo..=hi {
                let v = other.get(i, j) * c;
                *self.at(i, j) += v;
            }
        }
    }

    pub fn scale(&mut self, c: T) {
        for v in &mut self.d {
            *v *= c;
        }
    }

    /// `(M + M*)/2`, exactly Hermitian in floating point.
    pub fn hermitian_part(&self) -> Self {
        let mut out = Self::zeros(self.n, self.bw);
        let half = T::lit(0.5);
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            let hi = (i + self.bw).min(self.n - 1);
            for j in lo..=hi {
                *out.at(i, j) = (self.get(i, j) + self.get(j, i).conj()) * half;
            }
        }
        out
    }

    #[cfg(test)]
    pub fn to_dense(&self) -> CMatrix<T> {
        CMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banded_product_matches_dense() {
        let x = Banded::<f64>::ladder_position(9, 0.3);
        let p = Banded::<f64>::ladder_momentum(9, 0.3);
        let prod = x.mul(&p).mul(&x);
        let dense = x.to_dense() * p.to_dense() * x.to_dense();
        assert!((prod.to_dense() - dense).camax() < 1e-15);
    }
}
