//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftPlanner;

/// Real scalar type: `f32` or `f64`.
///
/// Elementary functions come from [`RealField`]; conversions and constants
/// come from `num-traits`. `num_traits::Float` is deliberately not a bound:
/// its method names collide with those of `RealField`.
pub trait Real:
    RealField
    + Copy
    + FromPrimitive
    + ToPrimitive
    + FloatConst
    + Default
    + Display
    + LowerExp
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Machine epsilon.
    fn eps() -> Self;

    /// Positive infinity.
    fn inf() -> Self;

    /// Full linear convolution `a * b` (length `a.len() + b.len() - 1`).
    fn fft_convolve(a: &[Self], b: &[Self]) -> Vec<Self>;

    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn eps() -> Self {
                <$t>::EPSILON
            }

            #[inline]
            fn inf() -> Self {
                <$t>::INFINITY
            }

            fn fft_convolve(a: &[Self], b: &[Self]) -> Vec<Self> {
                if a.is_empty() || b.is_empty() {
                    return Vec::new();
                }
                let out_len = a.len() + b.len() - 1;
                let n = out_len.next_power_of_two();
                let mut planner = FftPlanner::<$t>::new();
                let fwd = planner.plan_fft_forward(n);
                let inv = planner.plan_fft_inverse(n);
                let pad = |v: &[$t]| {
                    let mut buf = vec![Complex::new(0.0, 0.0); n];
                    for (dst, &src) in buf.iter_mut().zip(v) {
                        dst.re = src;
                    }
                    buf
                };
                let mut fa = pad(a);
                let mut fb = pad(b);
                fwd.process(&mut fa);
                fwd.process(&mut fb);
                for (x, y) in fa.iter_mut().zip(&fb) {
                    *x *= *y;
                }
                inv.process(&mut fa);
                let scale = 1.0 / n as $t;
                fa.iter().take(out_len).map(|c| c.re * scale).collect()
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// `e^{iθ}` for a generic scalar.
#[inline]
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// Complex scalar literal.
#[inline]
pub fn c<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::lit(re), T::lit(im))
}
