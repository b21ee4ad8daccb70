use std::ops::Range;

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;

use super::{DomainSpec, Symbol};
use crate::error::{invalid, Error, Result};
use crate::real::Real;
use crate::rng::stream_rng;
use crate::special::linear_fit;

/// Strata per phase-space axis in the Monte Carlo estimators.
pub const STRATA_PER_AXIS: usize = 8;

/// The truncation box `[−L, L]^{2n}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseBox<T: Real> {
    pub dim: usize,
    pub half_width: T,
}

impl<T: Real> PhaseBox<T> {
    pub fn new(dim: usize, half_width: T) -> Self {
        PhaseBox { dim, half_width }
    }

    pub fn volume(&self) -> T {
        (T::lit(2.0) * self.half_width).powi(2 * self.dim as i32)
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 || !(self.half_width > T::zero()) {
            return invalid("phase-space box has zero volume");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeEstimate<T: Real> {
    pub volume: T,
    pub std_error: T,
}

/// `V_z(t)` on a grid of `t`, with per-point standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeProfile<T: Real> {
    pub z: Complex<T>,
    pub samples: Vec<(T, T)>,
    pub mc_error: Vec<T>,
}

struct Strata<T: Real> {
    dims: usize,
    count: usize,
    per_stratum: usize,
    cell: T,
    lo: T,
}

impl<T: Real> Strata<T> {
    fn new(bx: &PhaseBox<T>, n_samples: usize) -> Result<Self> {
        bx.validate()?;
        if n_samples < 1000 {
            return invalid("Monte Carlo volume needs at least 10^3 samples");
        }
        let dims = 2 * bx.dim;
        let count = STRATA_PER_AXIS.pow(dims as u32);
        Ok(Strata {
            dims,
            count,
            per_stratum: n_samples.div_ceil(count).max(1),
            cell: T::lit(2.0) * bx.half_width / T::from_usize_lossy(STRATA_PER_AXIS),
            lo: -bx.half_width,
        })
    }

    fn weight(&self) -> T {
        self.cell.powi(self.dims as i32)
    }

    /// Fills `rho` with a uniform point of stratum `s`.
    fn sample(&self, s: usize, rng: &mut impl Rng, rho: &mut [T]) {
        let mut idx = s;
        for r in rho.iter_mut() {
            let k = idx % STRATA_PER_AXIS;
            idx /= STRATA_PER_AXIS;
            let u: f64 = rng.gen();
            *r = self.lo + self.cell * (T::from_usize_lossy(k) + T::lit(u));
        }
    }
}

/// Stratified Monte Carlo estimate of `vol{ρ ∈ box : p(ρ) ∈ Γ}`.
pub fn volume_preimage<T: Real>(
    p: &Symbol<T>,
    gamma: &DomainSpec<T>,
    bx: &PhaseBox<T>,
    n_samples: usize,
    seed: u64,
) -> Result<VolumeEstimate<T>> {
    if bx.dim != p.dim() {
        return invalid("box and symbol dimensions differ");
    }
    let st = Strata::new(bx, n_samples)?;
    let hits: Vec<usize> = (0..st.count)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(seed, s as u64);
            let mut rho = vec![T::zero(); st.dims];
            let mut hits = 0;
            for _ in 0..st.per_stratum {
                st.sample(s, &mut rng, &mut rho);
                if gamma.contains(p.eval_checked(&rho)?) {
                    hits += 1;
                }
            }
            Ok(hits)
        })
        .collect::<Result<_>>()?;
    let m = st.per_stratum as f64;
    let w = st.weight().as_f64();
    let mut vol = 0.0;
    let mut var = 0.0;
    for &h in &hits {
        let f = h as f64 / m;
        vol += w * f;
        var += w * w * f * (1.0 - f) / m;
    }
    Ok(VolumeEstimate { volume: T::lit(vol), std_error: T::lit(var.sqrt()) })
}

/// `V_z(t) = vol{ρ : |p(ρ) − z|² ≤ t}` on `t_grid`, all points from one shared
/// sample so the profile is exactly nondecreasing.
pub fn volume_profile<T: Real>(
    p: &Symbol<T>,
    z: Complex<T>,
    t_grid: &[T],
    bx: &PhaseBox<T>,
    n_samples: usize,
    seed: u64,
) -> Result<VolumeProfile<T>> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| !(w[0] < w[1])) || t_grid[0] <= T::zero() {
        return invalid("t grid must be positive and strictly increasing");
    }
    if bx.dim != p.dim() {
        return invalid("box and symbol dimensions differ");
    }
    let st = Strata::new(bx, n_samples)?;
    let counts: Vec<Vec<usize>> = (0..st.count)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(seed, s as u64);
            let mut rho = vec![T::zero(); st.dims];
            let mut d = Vec::with_capacity(st.per_stratum);
            for _ in 0..st.per_stratum {
                st.sample(s, &mut rng, &mut rho);
                d.push((p.eval_checked(&rho)? - z).norm_sqr());
            }
            d.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
            Ok(t_grid.iter().map(|&t| d.partition_point(|&v| v <= t)).collect())
        })
        .collect::<Result<_>>()?;
    let m = st.per_stratum as f64;
    let w = st.weight().as_f64();
    let mut samples = Vec::with_capacity(t_grid.len());
    let mut mc_error = Vec::with_capacity(t_grid.len());
    for (i, &t) in t_grid.iter().enumerate() {
        let mut vol = 0.0;
        let mut var = 0.0;
        for c in &counts {
            let f = c[i] as f64 / m;
            vol += w * f;
            var += w * w * f * (1.0 - f) / m;
        }
        samples.push((t, T::lit(vol)));
        mc_error.push(T::lit(var.sqrt()));
    }
    Ok(VolumeProfile { z, samples, mc_error })
}

/// Least-squares slope of `ln V` against `ln t` over `window`, with the RMS
/// residual of the fit.
pub fn estimate_kappa<T: Real>(profile: &VolumeProfile<T>, window: Range<usize>) -> Result<(T, T)> {
    let end = window.end.min(profile.samples.len());
    let pts: Vec<(T, T)> = profile.samples[window.start.min(end)..end]
        .iter()
        .filter(|(_, v)| *v > T::zero())
        .map(|&(t, v)| (t.ln(), v.ln()))
        .collect();
    if pts.is_empty() {
        return Err(Error::InvalidArgument("level set not resolved: all V = 0 in window".into()));
    }
    if pts.len() < 4 {
        return invalid("need at least four positive volume samples in the fit window");
    }
    let (x, y): (Vec<T>, Vec<T>) = pts.into_iter().unzip();
    let (slope, _, rms) = linear_fit(&x, &y);
    Ok((slope, rms))
}
