//! Counter-based random streams.
//!
//! Every random quantity is addressed by `(master_seed, stream, row, column)`,
//! so a matrix entry does not depend on the matrix size, on the order in which
//! entries are generated, or on the thread schedule.

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::real::Real;

const WORDS_PER_ENTRY: u128 = 4;
const ROW_SHIFT: u32 = 34;

/// Generator for the stream `stream` under `master_seed`.
pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a tuple of labels into a single stream identifier.
pub fn derive_stream(labels: &[u64]) -> u64 {
    // SplitMix64 finaliser applied iteratively.
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &l in labels {
        h ^= l.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}

#[inline]
fn unit_open(bits: u64) -> f64 {
    // (0, 1), never 0 so the logarithm below is finite.
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard complex Gaussian from two raw words: `E|z|² = 1`, real and
/// imaginary parts independent `N(0, 1/2)`.
#[inline]
pub fn complex_gaussian_from_bits(a: u64, b: u64) -> Complex<f64> {
    let r = (-unit_open(a).ln()).sqrt();
    let theta = std::f64::consts::TAU * unit_open(b);
    Complex::new(r * theta.cos(), r * theta.sin())
}

/// Draws one standard complex Gaussian from a sequential generator.
pub fn complex_gaussian(rng: &mut impl RngCore) -> Complex<f64> {
    let a = rng.next_u64();
    let b = rng.next_u64();
    complex_gaussian_from_bits(a, b)
}

/// `rows × cols` matrix of i.i.d. standard complex Gaussians, entry `(j, k)`
/// drawn at a fixed counter position of stream `stream`.
pub fn gaussian_matrix<T: Real>(master_seed: u64, stream: u64, rows: usize, cols: usize) -> DMatrix<Complex<T>> {
    let mut rng = stream_rng(master_seed, stream);
    let mut m = DMatrix::<Complex<T>>::zeros(rows, cols);
    for j in 0..rows {
        rng.set_word_pos((j as u128) << ROW_SHIFT);
        for k in 0..cols {
            let z = complex_gaussian(&mut rng);
            m[(j, k)] = Complex::new(T::lit(z.re), T::lit(z.im));
        }
    }
    m
}

/// Position of entry `(j, k)` in its stream, exposed for tests.
pub fn entry_word_pos(j: usize, k: usize) -> u128 {
    ((j as u128) << ROW_SHIFT) + WORDS_PER_ENTRY * k as u128
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leading_block_is_size_independent() {
        let small = gaussian_matrix::<f64>(7, 3, 5, 5);
        let big = gaussian_matrix::<f64>(7, 3, 9, 9);
        assert_eq!(small, big.view((0, 0), (5, 5)).into_owned());
    }

    #[test]
    fn entry_is_addressable() {
        let m = gaussian_matrix::<f64>(11, 2, 4, 6);
        let mut rng = stream_rng(11, 2);
        rng.set_word_pos(entry_word_pos(3, 4));
        let z = complex_gaussian(&mut rng);
        assert_eq!(m[(3, 4)], z);
    }

    #[test]
    fn streams_differ() {
        let a = gaussian_matrix::<f64>(1, 0, 3, 3);
        let b = gaussian_matrix::<f64>(1, 1, 3, 3);
        assert_ne!(a, b);
        assert_ne!(derive_stream(&[1, 2]), derive_stream(&[2, 1]));
    }
}
