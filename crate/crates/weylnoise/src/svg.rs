//! Self-contained SVG scatter plots of eigenvalue clouds.
//!
//! The boundary of `Σ = closure of p(ℝ²ⁿ)` is traced numerically: phase space
//! is sampled on a grid, the values of `p` are rasterized into the plot
//! window, small holes are closed, and the edge of the occupied set is
//! extracted by marching squares.

use std::fmt::Write;

use weylnoise_core::phase_space::{DomainSpec, Shape, Symbol};
use weylnoise_core::Complex;

use crate::record::EigenRow;

const SIZE: f64 = 640.0;
const MARGIN: f64 = 48.0;
const RASTER: usize = 192;
const PHASE_SAMPLES: usize = 1200;

/// Affine map from the complex window to pixel coordinates.
#[derive(Debug, Clone, Copy)]
struct Frame {
    re0: f64,
    im0: f64,
    span: f64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = (f64, f64)>) -> Frame {
        let (mut a, mut b, mut c, mut d) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in points.filter(|(x, y)| x.is_finite() && y.is_finite()) {
            a = a.min(x);
            b = b.max(x);
            c = c.min(y);
            d = d.max(y);
        }
        if !a.is_finite() {
            (a, b, c, d) = (-1.0, 1.0, -1.0, 1.0);
        }
        let span = ((b - a).max(d - c) * 1.1).max(1e-9);
        Frame { re0: (a + b) / 2.0 - span / 2.0, im0: (c + d) / 2.0 - span / 2.0, span }
    }

    fn px(&self, z: Complex<f64>) -> (f64, f64) {
        let scale = (SIZE - 2.0 * MARGIN) / self.span;
        (MARGIN + (z.re - self.re0) * scale, SIZE - MARGIN - (z.im - self.im0) * scale)
    }

    fn contains(&self, z: Complex<f64>) -> bool {
        (self.re0..=self.re0 + self.span).contains(&z.re) && (self.im0..=self.im0 + self.span).contains(&z.im)
    }

    /// Window point at fractional raster coordinates.
    fn at(&self, i: f64, j: f64) -> Complex<f64> {
        let cell = self.span / RASTER as f64;
        Complex::new(self.re0 + i * cell, self.im0 + j * cell)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Cells of the raster hit by `p` on a phase-space grid over `[−L, L]²`,
/// after one closing step.
fn occupancy(p: &Symbol<f64>, half_width: f64, frame: &Frame) -> Vec<bool> {
    let n = RASTER;
    let mut hit = vec![false; n * n];
    let step = 2.0 * half_width / (PHASE_SAMPLES - 1) as f64;
    let cell = frame.span / n as f64;
    for a in 0..PHASE_SAMPLES {
        let x = -half_width + step * a as f64;
        for b in 0..PHASE_SAMPLES {
            let xi = -half_width + step * b as f64;
            let z = p.eval(&[x], &[xi]);
            let i = ((z.re - frame.re0) / cell).floor();
            let j = ((z.im - frame.im0) / cell).floor();
            if i >= 0.0 && j >= 0.0 && i < n as f64 && j < n as f64 {
                hit[j as usize * n + i as usize] = true;
            }
        }
    }
    let dilated = morph(&hit, n, true);
    morph(&dilated, n, false)
}

/// One step of 3×3 dilation (`grow`) or erosion; the border is left as is.
fn morph(grid: &[bool], n: usize, grow: bool) -> Vec<bool> {
    let mut out = grid.to_vec();
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let mut any = false;
            let mut all = true;
            for dj in 0..3 {
                for di in 0..3 {
                    let v = grid[(j + dj - 1) * n + i + di - 1];
                    any |= v;
                    all &= v;
                }
            }
            out[j * n + i] = if grow { any } else { all };
        }
    }
    out
}

/// Marching-squares segments between occupied and empty cell centres.
fn boundary_segments(grid: &[bool], n: usize) -> Vec<((f64, f64), (f64, f64))> {
    let mut segs = Vec::new();
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let c = |di: usize, dj: usize| grid[(j + dj) * n + i + di];
            let (a, b, cc, d) = (c(0, 0), c(1, 0), c(1, 1), c(0, 1));
            let case = (a as u8) | (b as u8) << 1 | (cc as u8) << 2 | (d as u8) << 3;
            let (x, y) = (i as f64 + 0.5, j as f64 + 0.5);
            let bottom = (x + 0.5, y);
            let right = (x + 1.0, y + 0.5);
            let top = (x + 0.5, y + 1.0);
            let left = (x, y + 0.5);
            match case {
                1 | 14 => segs.push((left, bottom)),
                2 | 13 => segs.push((bottom, right)),
                3 | 12 => segs.push((left, right)),
                4 | 11 => segs.push((right, top)),
                6 | 9 => segs.push((bottom, top)),
                7 | 8 => segs.push((left, top)),
                5 => {
                    segs.push((left, top));
                    segs.push((bottom, right));
                }
                10 => {
                    segs.push((left, bottom));
                    segs.push((right, top));
                }
                _ => {}
            }
        }
    }
    segs
}

fn domain_element(g: &DomainSpec<f64>, frame: &Frame) -> String {
    let pts = |v: &[Complex<f64>]| {
        v.iter()
            .map(|&z| {
                let (x, y) = frame.px(z);
                format!("{x:.2},{y:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    match g.shape() {
        Shape::Disc { center, radius } => {
            let (x, y) = frame.px(*center);
            let r = radius * (SIZE - 2.0 * MARGIN) / frame.span;
            format!(r#"<circle class="domain" cx="{x:.2}" cy="{y:.2}" r="{r:.2}"/>"#)
        }
        Shape::Rect { re, im } => {
            let v = [
                Complex::new(re.0, im.0),
                Complex::new(re.1, im.0),
                Complex::new(re.1, im.1),
                Complex::new(re.0, im.1),
            ];
            format!(r#"<polygon class="domain" points="{}"/>"#, pts(&v))
        }
        Shape::Polygon { vertices } => format!(r#"<polygon class="domain" points="{}"/>"#, pts(vertices)),
    }
}

/// Scatter of `rows` with the domains and, for one-dimensional symbols, the
/// traced boundary of `Σ`. Every trusted eigenvalue gets one `class="eig"`
/// marker; untrusted ones inside the window are drawn hollow.
pub fn scatter(
    rows: &[EigenRow],
    domains: &[DomainSpec<f64>],
    symbol: Option<&Symbol<f64>>,
    half_width: f64,
    title: &str,
) -> String {
    let corners = domains.iter().flat_map(|g| {
        let (a, b, c, d) = g.bounding_box();
        [(a, c), (b, d)]
    });
    let trusted = rows.iter().filter(|r| r.trusted).map(|r| (r.re, r.im));
    let frame = Frame::fit(corners.chain(trusted));
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    s.push_str(
        "<style>.eig{fill:#1f5fa8}.untrusted{fill:none;stroke:#999}.domain{fill:none;stroke:#c0392b;stroke-width:1.5}\
         .sigma-boundary{fill:none;stroke:#2e7d32;stroke-width:1.2}.axis{stroke:#bbb}text{font:12px sans-serif}</style>\n",
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{MARGIN}" y="{:.0}">{}</text>"#, MARGIN / 2.0, escape(title));
    let origin = frame.px(Complex::new(0.0, 0.0));
    if frame.contains(Complex::new(0.0, frame.im0)) {
        let _ = writeln!(s, r#"<line class="axis" x1="{0:.2}" y1="{MARGIN}" x2="{0:.2}" y2="{1}"/>"#, origin.0, SIZE - MARGIN);
    }
    if frame.contains(Complex::new(frame.re0, 0.0)) {
        let _ = writeln!(s, r#"<line class="axis" x1="{MARGIN}" y1="{0:.2}" x2="{1}" y2="{0:.2}"/>"#, origin.1, SIZE - MARGIN);
    }
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN}" y="{:.0}">Re [{:.3}, {:.3}]  Im [{:.3}, {:.3}]</text>"#,
        SIZE - MARGIN / 3.0,
        frame.re0,
        frame.re0 + frame.span,
        frame.im0,
        frame.im0 + frame.span
    );
    if let Some(p) = symbol.filter(|p| p.dim() == 1) {
        let grid = occupancy(p, half_width, &frame);
        let mut d = String::new();
        for (a, b) in boundary_segments(&grid, RASTER) {
            let (x0, y0) = frame.px(frame.at(a.0, a.1));
            let (x1, y1) = frame.px(frame.at(b.0, b.1));
            let _ = write!(d, "M{x0:.2} {y0:.2}L{x1:.2} {y1:.2}");
        }
        if !d.is_empty() {
            let _ = writeln!(s, r#"<path class="sigma-boundary" d="{d}"/>"#);
        }
    }
    for g in domains {
        s.push_str(&domain_element(g, &frame));
        s.push('\n');
    }
    for r in rows {
        let z = Complex::new(r.re, r.im);
        if r.trusted {
            let (x, y) = frame.px(z);
            let _ = writeln!(s, r#"<circle class="eig" cx="{x:.2}" cy="{y:.2}" r="2.5"/>"#);
        } else if frame.contains(z) {
            let (x, y) = frame.px(z);
            let _ = writeln!(s, r#"<circle class="untrusted" cx="{x:.2}" cy="{y:.2}" r="2.5"/>"#);
        }
    }
    s.push_str("</svg>\n");
    s
}
