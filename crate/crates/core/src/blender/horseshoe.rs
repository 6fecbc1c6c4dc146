//! Piecewise-affine horseshoe on the unit square with an exact symbolic conjugacy.
//!
//! The unstable direction is `x` and the stable direction is `y`. Rectangle
//! `R_i = [a_i, a_i + 1/μ_uu] × [0, 1]` is mapped by
//! `(x, y) ↦ (μ_uu (x − a_i), μ_ss y + c_i)` onto the horizontal strip
//! `[0, 1] × [c_i, c_i + μ_ss]`, which crosses every rectangle.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::map::SmoothMap;
use crate::skew::ShiftPoint;
use crate::space::{Region, StateSpace};

/// Symbols used to resolve a coordinate from an itinerary; `μ^-40` is far below
/// double precision for any admissible rate.
const RESOLVE_DEPTH: usize = 40;

#[derive(Clone, Serialize)]
pub struct HorseshoeBase {
    pub mu_uu: f64,
    pub mu_ss: f64,
    /// Left edges of the rectangles.
    pub left: Vec<f64>,
    /// Lower edges of the image strips.
    pub lower: Vec<f64>,
    #[serde(skip)]
    map: SmoothMap,
}

impl std::fmt::Debug for HorseshoeBase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HorseshoeBase")
            .field("symbols", &self.left.len())
            .field("mu_uu", &self.mu_uu)
            .field("mu_ss", &self.mu_ss)
            .finish()
    }
}

fn nearest(edges: &[f64], width: f64, v: f64) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, &a) in edges.iter().enumerate() {
        let d = if v < a {
            a - v
        } else if v > a + width {
            v - a - width
        } else {
            0.0
        };
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

impl HorseshoeBase {
    /// Evenly spaced rectangles and image strips with equal gaps.
    pub fn affine(symbols: usize, mu_ss: f64, mu_uu: f64) -> Result<Self> {
        if symbols < 2 {
            return Err(Error::Precondition("a horseshoe needs at least two symbols".into()));
        }
        let spaced = |width: f64| -> Vec<f64> {
            let gap = (1.0 - symbols as f64 * width) / (symbols + 1) as f64;
            (0..symbols).map(|i| gap + i as f64 * (width + gap)).collect()
        };
        HorseshoeBase::new(spaced(1.0 / mu_uu), spaced(mu_ss), mu_ss, mu_uu)
    }

    /// Rectangles with left edges `left` and image strips with lower edges `lower`.
    pub fn new(left: Vec<f64>, lower: Vec<f64>, mu_ss: f64, mu_uu: f64) -> Result<Self> {
        if left.len() != lower.len() || left.len() < 2 {
            return Err(Error::Precondition("need matching edge lists with at least two symbols".into()));
        }
        if !(mu_ss > 0.0 && mu_ss < 1.0 && mu_uu > 1.0) {
            return Err(Error::Precondition(format!("rates μ_ss = {mu_ss}, μ_uu = {mu_uu} are not hyperbolic")));
        }
        let w = 1.0 / mu_uu;
        for (edges, width) in [(&left, w), (&lower, mu_ss)] {
            for (i, &a) in edges.iter().enumerate() {
                if a <= 0.0 || a + width >= 1.0 {
                    return Err(Error::Precondition(format!("piece {i} leaves the unit square")));
                }
                for (j, &b) in edges.iter().enumerate().skip(i + 1) {
                    // Closures must be disjoint, so touching edges count as overlap.
                    if a < b + width && b < a + width || a == b + width || b == a + width {
                        return Err(Error::RectanglesOverlap(i, j));
                    }
                }
            }
        }
        let map = build_map(left.clone(), lower.clone(), mu_ss, mu_uu);
        let base = HorseshoeBase { mu_uu, mu_ss, left, lower, map };
        base.check_crossing()?;
        Ok(base)
    }

    /// Every image `f(R_i)` crosses every `R_j` from side to side; checked on corners.
    fn check_crossing(&self) -> Result<()> {
        for i in 0..self.symbols() {
            let r = self.rectangle(i);
            let corners = [[r.lo[0], r.lo[1]], [r.hi[0], r.lo[1]], [r.lo[0], r.hi[1]], [r.hi[0], r.hi[1]]];
            let img: Vec<Vec<f64>> = corners.iter().map(|c| self.apply(c)).collect();
            let xmin = img.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let xmax = img.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            for j in 0..self.symbols() {
                let t = self.rectangle(j);
                if xmin > t.lo[0] || xmax < t.hi[0] {
                    return Err(Error::Precondition(format!("f(R_{i}) does not cross R_{j}")));
                }
            }
        }
        Ok(())
    }

    pub fn symbols(&self) -> usize {
        self.left.len()
    }

    pub fn space(&self) -> &StateSpace {
        self.map.domain()
    }

    pub fn map(&self) -> &SmoothMap {
        &self.map
    }

    pub fn width(&self) -> f64 {
        1.0 / self.mu_uu
    }

    pub fn rectangle(&self, i: usize) -> Region {
        Region::new(vec![self.left[i], 0.0], vec![self.left[i] + self.width(), 1.0])
    }

    /// `f(R_i)`.
    pub fn image_strip(&self, i: usize) -> Region {
        Region::new(vec![0.0, self.lower[i]], vec![1.0, self.lower[i] + self.mu_ss])
    }

    /// Rectangle containing `p`, if any.
    pub fn label(&self, p: &[f64]) -> Option<usize> {
        (0..self.symbols()).find(|&i| self.rectangle(i).contains(p))
    }

    /// Rectangle nearest to `p` in the unstable coordinate.
    pub fn nearest_label(&self, p: &[f64]) -> usize {
        nearest(&self.left, self.width(), p[0])
    }

    /// Image strip nearest to `p` in the stable coordinate.
    pub fn image_label(&self, p: &[f64]) -> usize {
        nearest(&self.lower, self.mu_ss, p[1])
    }

    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        self.map.apply(p)
    }

    pub fn apply_inverse(&self, p: &[f64]) -> Vec<f64> {
        let j = self.image_label(p);
        vec![p[0] / self.mu_uu + self.left[j], (p[1] - self.lower[j]) / self.mu_ss]
    }

    /// Unstable coordinate of the point with forward itinerary `s_0, s_1, ...`.
    pub fn x_of(&self, future: impl Fn(usize) -> usize) -> f64 {
        let mut x = 0.5;
        for k in (0..RESOLVE_DEPTH).rev() {
            x = self.left[future(k)] + x / self.mu_uu;
        }
        x
    }

    /// Stable coordinate of the point with backward itinerary `s_{-1}, s_{-2}, ...`.
    pub fn y_of(&self, past: impl Fn(usize) -> usize) -> f64 {
        let mut y = 0.5;
        for k in (0..RESOLVE_DEPTH).rev() {
            y = self.lower[past(k)] + self.mu_ss * y;
        }
        y
    }

    /// The point of the maximal invariant set coded by `s`.
    pub fn point_of(&self, s: &ShiftPoint) -> Vec<f64> {
        vec![self.x_of(|k| s.get(k as i64)), self.y_of(|k| s.get(-(k as i64) - 1))]
    }

    /// Fixed point of symbol `i`.
    pub fn fixed_point(&self, i: usize) -> Vec<f64> {
        vec![self.left[i] * self.mu_uu / (self.mu_uu - 1.0), self.lower[i] / (1.0 - self.mu_ss)]
    }

    /// First `n` forward symbols of `p`, or `None` once the orbit leaves the rectangles.
    pub fn itinerary(&self, p: &[f64], n: usize) -> Option<Vec<usize>> {
        let mut q = p.to_vec();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            out.push(self.label(&q)?);
            q = self.apply(&q);
        }
        Some(out)
    }

    /// Sub-rectangle `R_i ∩ f^{-1}(R_j)`, the block of points with `x_0 = i, x_1 = j`.
    pub fn cylinder(&self, i: usize, j: usize) -> Region {
        let lo = self.left[i] + self.left[j] / self.mu_uu;
        Region::new(vec![lo, 0.0], vec![lo + self.width() / self.mu_uu, 1.0])
    }
}

fn build_map(left: Vec<f64>, lower: Vec<f64>, mu_ss: f64, mu_uu: f64) -> SmoothMap {
    let space = StateSpace::cube(2, 0.0, 1.0);
    let w = 1.0 / mu_uu;
    let (l1, d1) = (left.clone(), lower.clone());
    let fwd = move |p: &[f64]| {
        let i = nearest(&l1, w, p[0]);
        vec![mu_uu * (p[0] - l1[i]), mu_ss * p[1] + d1[i]]
    };
    let (l2, d2) = (left, lower);
    let back = move |p: &[f64]| {
        let j = nearest(&d2, mu_ss, p[1]);
        vec![p[0] / mu_uu + l2[j], (p[1] - d2[j]) / mu_ss]
    };
    let symplectic = (mu_uu * mu_ss - 1.0).abs() < 1e-12;
    let inv = SmoothMap::endo("horseshoe⁻¹", space.clone(), back)
        .with_jacobian(move |_| DMatrix::from_row_slice(2, 2, &[1.0 / mu_uu, 0.0, 0.0, 1.0 / mu_ss]))
        .with_bounds(1.0 / mu_uu, 1.0 / mu_ss)
        .with_symplectic(symplectic);
    SmoothMap::endo("horseshoe", space, fwd)
        .with_jacobian(move |_| DMatrix::from_row_slice(2, 2, &[mu_uu, 0.0, 0.0, mu_ss]))
        .with_bounds(mu_ss, mu_uu)
        .with_symplectic(symplectic)
        .with_inverse(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skew::EventuallyPeriodic;

    #[test]
    fn affine_layout_is_valid() {
        let h = HorseshoeBase::affine(3, 0.1, 10.0).unwrap();
        assert_eq!(h.symbols(), 3);
        for i in 0..3 {
            let p = h.fixed_point(i);
            assert_eq!(h.label(&p), Some(i));
            let q = h.apply(&p);
            assert!((q[0] - p[0]).abs() < 1e-14 && (q[1] - p[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn overlap_and_fit_are_rejected() {
        assert!(matches!(HorseshoeBase::new(vec![0.1, 0.15], vec![0.1, 0.5], 0.1, 10.0), Err(Error::RectanglesOverlap(0, 1))));
        assert!(HorseshoeBase::affine(3, 0.1, 2.5).is_err());
    }

    #[test]
    fn coding_matches_itinerary() {
        let h = HorseshoeBase::affine(3, 0.1, 10.0).unwrap();
        let s = ShiftPoint::new(
            EventuallyPeriodic::new(vec![2, 0, 1], vec![1]),
            EventuallyPeriodic::new(vec![0, 2, 2, 1], vec![0]),
            3,
        );
        let p = h.point_of(&s);
        assert_eq!(h.itinerary(&p, 6).unwrap(), vec![2, 0, 2, 2, 1, 0]);
        let back = h.apply_inverse(&p);
        assert_eq!(h.label(&back), Some(0));
        let f = h.apply(&back);
        assert!((f[0] - p[0]).abs() < 1e-12 && (f[1] - p[1]).abs() < 1e-12);
    }

    #[test]
    fn cylinders_nest() {
        let h = HorseshoeBase::affine(3, 0.1, 10.0).unwrap();
        let c = h.cylinder(1, 2);
        let img = Region::new(vec![h.mu_uu * (c.lo[0] - h.left[1]), 0.0], vec![h.mu_uu * (c.hi[0] - h.left[1]), 1.0]);
        assert!((img.lo[0] - h.left[2]).abs() < 1e-14 && (img.hi[0] - h.left[2] - h.width()).abs() < 1e-14);
    }
}
