use nalgebra::ComplexField;
use num_complex::Complex;

use crate::error::{invalid, Result};
use crate::real::{cis, Real};

/// Geometry of a planar region.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape<T: Real> {
    Disc { center: Complex<T>, radius: T },
    Rect { re: (T, T), im: (T, T) },
    Polygon { vertices: Vec<Complex<T>> },
}

/// Bounded open region `Γ ⊂ ℂ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec<T: Real> {
    shape: Shape<T>,
}

impl<T: Real> DomainSpec<T> {
    pub fn disc(center: Complex<T>, radius: T) -> Self {
        assert!(radius > T::zero(), "disc radius must be positive");
        DomainSpec { shape: Shape::Disc { center, radius } }
    }

    pub fn rect(re: (T, T), im: (T, T)) -> Self {
        assert!(re.0 < re.1 && im.0 < im.1, "empty rectangle");
        DomainSpec { shape: Shape::Rect { re, im } }
    }

    /// Simple polygon; clockwise input is reversed so the boundary is
    /// positively oriented.
    pub fn polygon(mut vertices: Vec<Complex<T>>) -> Result<Self> {
        if vertices.len() < 3 {
            return invalid("polygon needs at least three vertices");
        }
        if signed_area(&vertices) == T::zero() {
            return invalid("degenerate polygon");
        }
        if signed_area(&vertices) < T::zero() {
            vertices.reverse();
        }
        Ok(DomainSpec { shape: Shape::Polygon { vertices } })
    }

    pub fn try_from_shape(shape: Shape<T>) -> Result<Self> {
        match shape {
            Shape::Disc { center, radius } if radius > T::zero() => Ok(Self::disc(center, radius)),
            Shape::Disc { .. } => invalid("disc radius must be positive"),
            Shape::Rect { re, im } if re.0 < re.1 && im.0 < im.1 => Ok(Self::rect(re, im)),
            Shape::Rect { .. } => invalid("rectangle bounds must be increasing"),
            Shape::Polygon { vertices } => Self::polygon(vertices),
        }
    }

    pub fn shape(&self) -> &Shape<T> {
        &self.shape
    }

    pub fn contains(&self, z: Complex<T>) -> bool {
        match &self.shape {
            Shape::Disc { center, radius } => (z - center).modulus() < *radius,
            Shape::Rect { re, im } => re.0 < z.re && z.re < re.1 && im.0 < z.im && z.im < im.1,
            Shape::Polygon { vertices } => winding_number(vertices, z) != 0,
        }
    }

    pub fn area(&self) -> T {
        match &self.shape {
            Shape::Disc { radius, .. } => T::pi() * *radius * *radius,
            Shape::Rect { re, im } => (re.1 - re.0) * (im.1 - im.0),
            Shape::Polygon { vertices } => signed_area(vertices).abs(),
        }
    }

    pub fn perimeter(&self) -> T {
        match &self.shape {
            Shape::Disc { radius, .. } => T::two_pi() * *radius,
            Shape::Rect { re, im } => T::lit(2.0) * ((re.1 - re.0) + (im.1 - im.0)),
            Shape::Polygon { vertices } => edges(vertices).map(|(a, b)| (b - a).modulus()).fold(T::zero(), |s, l| s + l),
        }
    }

    /// Point on `∂Γ` at normalized arc parameter `s ∈ [0, 1)`, positively
    /// oriented.
    pub fn boundary_at(&self, s: T) -> Complex<T> {
        let s = s - s.floor();
        match &self.shape {
            Shape::Disc { center, radius } => center + cis(T::two_pi() * s) * *radius,
            Shape::Rect { re, im } => {
                let corners = [
                    Complex::new(re.0, im.0),
                    Complex::new(re.1, im.0),
                    Complex::new(re.1, im.1),
                    Complex::new(re.0, im.1),
                ];
                along_polyline(&corners, s)
            }
            Shape::Polygon { vertices } => along_polyline(vertices, s),
        }
    }

    /// Closed, positively oriented loop on `∂Γ` with adjacent spacing at most
    /// `spacing`; the first point is not repeated at the end.
    pub fn boundary_points(&self, spacing: T) -> Vec<Complex<T>> {
        let n = self.boundary_count(spacing);
        (0..n).map(|k| self.boundary_at(T::from_usize_lossy(k) / T::from_usize_lossy(n))).collect()
    }

    /// Number of boundary samples [`boundary_points`](Self::boundary_points)
    /// uses for `spacing`.
    pub fn boundary_count(&self, spacing: T) -> usize {
        let n = (self.perimeter() / spacing).ceil().to_usize().unwrap_or(usize::MAX);
        let min = match self.shape {
            Shape::Disc { .. } => 8,
            Shape::Rect { .. } => 4,
            Shape::Polygon { ref vertices } => vertices.len(),
        };
        n.max(min)
    }

    /// Euclidean distance from `z` to `∂Γ`.
    pub fn distance_to_boundary(&self, z: Complex<T>) -> T {
        match &self.shape {
            Shape::Disc { center, radius } => ((z - center).modulus() - *radius).abs(),
            Shape::Rect { re, im } => {
                let c = [
                    Complex::new(re.0, im.0),
                    Complex::new(re.1, im.0),
                    Complex::new(re.1, im.1),
                    Complex::new(re.0, im.1),
                ];
                polyline_distance(&c, z)
            }
            Shape::Polygon { vertices } => polyline_distance(vertices, z),
        }
    }

    /// Distance from `z` to the closure of `Γ`; zero inside.
    pub fn distance_to_closure(&self, z: Complex<T>) -> T {
        if self.contains(z) {
            T::zero()
        } else {
            self.distance_to_boundary(z)
        }
    }

    /// `(re_min, re_max, im_min, im_max)`.
    pub fn bounding_box(&self) -> (T, T, T, T) {
        match &self.shape {
            Shape::Disc { center, radius } => {
                (center.re - *radius, center.re + *radius, center.im - *radius, center.im + *radius)
            }
            Shape::Rect { re, im } => (re.0, re.1, im.0, im.1),
            Shape::Polygon { vertices } => vertices.iter().fold(
                (T::inf(), -T::inf(), T::inf(), -T::inf()),
                |(a, b, c, d), v| (a.min(v.re), b.max(v.re), c.min(v.im), d.max(v.im)),
            ),
        }
    }
}

fn edges<T: Real>(v: &[Complex<T>]) -> impl Iterator<Item = (Complex<T>, Complex<T>)> + '_ {
    (0..v.len()).map(move |k| (v[k], v[(k + 1) % v.len()]))
}

fn signed_area<T: Real>(v: &[Complex<T>]) -> T {
    edges(v).fold(T::zero(), |s, (a, b)| s + (a.re * b.im - b.re * a.im)) / T::lit(2.0)
}

fn along_polyline<T: Real>(v: &[Complex<T>], s: T) -> Complex<T> {
    let lengths: Vec<T> = edges(v).map(|(a, b)| (b - a).modulus()).collect();
    let total = lengths.iter().fold(T::zero(), |a, &b| a + b);
    let mut target = s * total;
    for (k, (a, b)) in edges(v).enumerate() {
        if target <= lengths[k] || k + 1 == v.len() {
            let frac = if lengths[k] > T::zero() { target / lengths[k] } else { T::zero() };
            return a + (b - a) * frac.min(T::one());
        }
        target -= lengths[k];
    }
    unreachable!()
}

fn polyline_distance<T: Real>(v: &[Complex<T>], z: Complex<T>) -> T {
    edges(v)
        .map(|(a, b)| {
            let d = b - a;
            let len2 = d.norm_sqr();
            let t = if len2 > T::zero() { ((z - a) * d.conj()).re / len2 } else { T::zero() };
            let t = t.max(T::zero()).min(T::one());
            (z - (a + d * t)).modulus()
        })
        .fold(T::inf(), |m, d| m.min(d))
}

fn winding_number<T: Real>(v: &[Complex<T>], z: Complex<T>) -> i32 {
    let mut w = 0;
    for (a, b) in edges(v) {
        let cross = (b.re - a.re) * (z.im - a.im) - (z.re - a.re) * (b.im - a.im);
        if a.im <= z.im {
            if b.im > z.im && cross > T::zero() {
                w += 1;
            }
        } else if b.im <= z.im && cross < T::zero() {
            w -= 1;
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn ray_cast(v: &[Complex<f64>], z: Complex<f64>) -> bool {
        let mut inside = false;
        let n = v.len();
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (v[i], v[j]);
            if (a.im > z.im) != (b.im > z.im) && z.re < (b.re - a.re) * (z.im - a.im) / (b.im - a.im) + a.re {
                inside = !inside;
            }
            j = i;
        }
        inside
    }

    #[test]
    fn polygon_contains_agrees_with_ray_casting() {
        let verts = vec![
            Complex::new(0.0, 0.0),
            Complex::new(2.0, 0.2),
            Complex::new(1.2, 0.9),
            Complex::new(2.1, 2.0),
            Complex::new(-0.3, 1.6),
        ];
        let d = DomainSpec::polygon(verts.clone()).unwrap();
        let mut rng = stream_rng(1, 9);
        for _ in 0..1000 {
            let z = Complex::new(rng.gen_range(-1.0..3.0), rng.gen_range(-1.0..3.0));
            assert_eq!(d.contains(z), ray_cast(&verts, z), "{z}");
        }
    }

    #[test]
    fn disc_and_rect_contains_match_shape() {
        let mut rng = stream_rng(2, 9);
        let disc = DomainSpec::disc(Complex::new(0.5, -0.2), 0.7);
        let rect = DomainSpec::rect((0.3, 0.8), (0.05, 0.2));
        let rect_poly = DomainSpec::polygon(vec![
            Complex::new(0.3, 0.05),
            Complex::new(0.8, 0.05),
            Complex::new(0.8, 0.2),
            Complex::new(0.3, 0.2),
        ])
        .unwrap();
        for _ in 0..1000 {
            let z = Complex::new(rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..1.0));
            assert_eq!(disc.contains(z), (z - Complex::new(0.5, -0.2)).modulus() < 0.7);
            assert_eq!(rect.contains(z), rect_poly.contains(z));
        }
    }

    #[test]
    fn boundary_is_closed_positive_and_fine() {
        let shapes = [
            DomainSpec::disc(Complex::new(1.0, 1.0), 0.4),
            DomainSpec::rect((0.3, 0.8), (0.05, 0.2)),
            DomainSpec::polygon(vec![Complex::new(0.0, 0.0), Complex::new(0.0, 1.0), Complex::new(1.0, 0.0)]).unwrap(),
        ];
        for d in shapes {
            let pts = d.boundary_points(0.01);
            let n = pts.len();
            let mut max_gap: f64 = 0.0;
            let mut area2 = 0.0;
            for k in 0..n {
                let (a, b) = (pts[k], pts[(k + 1) % n]);
                max_gap = max_gap.max((b - a).modulus());
                area2 += a.re * b.im - b.re * a.im;
            }
            assert!(max_gap <= 0.01 + 1e-12, "{max_gap}");
            assert!(area2 > 0.0);
            assert!((area2 / 2.0 - d.area()).abs() < 1e-3 * d.area().max(1e-2));
            for z in &pts {
                assert!(d.distance_to_boundary(*z) < 1e-12);
            }
        }
    }

    #[test]
    fn clockwise_polygons_are_reoriented() {
        let d = DomainSpec::polygon(vec![Complex::new(0.0, 0.0), Complex::new(1.0, 0.0), Complex::new(0.0, 1.0)].into_iter().rev().collect()).unwrap();
        assert!((d.area() - 0.5_f64).abs() < 1e-15);
        assert!(d.contains(Complex::new(0.2, 0.2)));
        assert!(DomainSpec::polygon(vec![Complex::new(0.0, 0.0), Complex::new(1.0, 1.0), Complex::new(2.0, 2.0)]).is_err());
    }
}
