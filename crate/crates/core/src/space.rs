//! State spaces built from interval and circle factors, with the max-metric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when deciding whether an interval coordinate is inside its factor.
pub const DOMAIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Factor {
    Interval { lo: f64, hi: f64 },
    Circle { period: f64 },
}

impl Factor {
    pub fn interval(lo: f64, hi: f64) -> Self {
        assert!(lo < hi, "interval needs lo < hi, got [{lo}, {hi}]");
        Factor::Interval { lo, hi }
    }

    pub fn circle(period: f64) -> Self {
        assert!(period > 0.0, "circle period must be positive");
        Factor::Circle { period }
    }

    /// Distance between two coordinates of this factor.
    pub fn distance(&self, a: f64, b: f64) -> f64 {
        match *self {
            Factor::Interval { .. } => (a - b).abs(),
            Factor::Circle { period } => {
                let d = (a - b).rem_euclid(period);
                d.min(period - d)
            }
        }
    }

    /// Signed displacement `b - a`, taken in (-period/2, period/2] on circles.
    pub fn displacement(&self, a: f64, b: f64) -> f64 {
        match *self {
            Factor::Interval { .. } => b - a,
            Factor::Circle { period } => {
                let d = (b - a).rem_euclid(period);
                if d > 0.5 * period {
                    d - period
                } else {
                    d
                }
            }
        }
    }

    pub fn reduce(&self, a: f64) -> f64 {
        match *self {
            Factor::Interval { .. } => a,
            Factor::Circle { period } => {
                let r = a.rem_euclid(period);
                // rem_euclid can return `period` for tiny negative inputs.
                if r >= period {
                    0.0
                } else {
                    r
                }
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Factor::Interval { lo, hi } => hi - lo,
            Factor::Circle { period } => 0.5 * period,
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Factor::Interval { lo, hi } => hi - lo,
            Factor::Circle { period } => period,
        }
    }

    pub fn is_circle(&self) -> bool {
        matches!(self, Factor::Circle { .. })
    }
}

/// Product of factors. Points are plain coordinate vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    factors: Vec<Factor>,
}

impl StateSpace {
    pub fn new(factors: Vec<Factor>) -> Self {
        for f in &factors {
            match *f {
                Factor::Interval { lo, hi } => assert!(lo < hi),
                Factor::Circle { period } => assert!(period > 0.0),
            }
        }
        StateSpace { factors }
    }

    /// The cube `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        StateSpace::new(vec![Factor::interval(lo, hi); n])
    }

    pub fn line() -> Self {
        StateSpace::new(vec![Factor::interval(f64::NEG_INFINITY, f64::INFINITY)])
    }

    /// Annulus `[lo, hi] x T` with angle period 1.
    pub fn annulus(lo: f64, hi: f64) -> Self {
        StateSpace::new(vec![Factor::interval(lo, hi), Factor::circle(1.0)])
    }

    pub fn torus(n: usize) -> Self {
        StateSpace::new(vec![Factor::circle(1.0); n])
    }

    pub fn product(&self, other: &StateSpace) -> Self {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        StateSpace { factors }
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, i: usize) -> Factor {
        self.factors[i]
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        self.factors
            .iter()
            .zip(x.iter().zip(y))
            .map(|(f, (a, b))| f.distance(*a, *b))
            .fold(0.0, f64::max)
    }

    pub fn reduce(&self, x: &[f64]) -> Vec<f64> {
        self.factors.iter().zip(x).map(|(f, a)| f.reduce(*a)).collect()
    }

    pub fn reduce_in_place(&self, x: &mut [f64]) {
        for (f, a) in self.factors.iter().zip(x.iter_mut()) {
            *a = f.reduce(*a);
        }
    }

    /// Checks interval coordinates against their bounds (with tolerance) and
    /// reduces circle coordinates.
    pub fn check(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Precondition(format!(
                "point of dimension {} in a space of dimension {}",
                x.len(),
                self.dim()
            )));
        }
        let mut out = Vec::with_capacity(x.len());
        for (i, (f, a)) in self.factors.iter().zip(x).enumerate() {
            match *f {
                Factor::Interval { lo, hi } => {
                    if !(a.is_finite() || lo.is_infinite() || hi.is_infinite())
                        || *a < lo - DOMAIN_TOL
                        || *a > hi + DOMAIN_TOL
                        || a.is_nan()
                    {
                        return Err(Error::PointOutsideDomain { point: x.to_vec(), factor: i });
                    }
                    out.push(*a);
                }
                Factor::Circle { .. } => out.push(f.reduce(*a)),
            }
        }
        Ok(out)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.check(x).is_ok()
    }

    /// Largest distance between two points; infinite for unbounded intervals.
    pub fn diameter(&self) -> f64 {
        self.factors.iter().map(Factor::diameter).fold(0.0, f64::max)
    }

    pub fn volume(&self) -> f64 {
        self.factors.iter().map(Factor::length).product()
    }

    /// Whether `x ± h e_i` stays inside every interval factor.
    pub fn has_margin(&self, x: &[f64], h: f64) -> bool {
        self.factors.iter().zip(x).all(|(f, a)| match *f {
            Factor::Interval { lo, hi } => *a - h >= lo - DOMAIN_TOL && *a + h <= hi + DOMAIN_TOL,
            Factor::Circle { .. } => true,
        })
    }

    /// Uniform random point (interval factors must be bounded).
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.factors
            .iter()
            .map(|f| match *f {
                Factor::Interval { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
                Factor::Circle { period } => period * rng.random::<f64>(),
            })
            .collect()
    }
}

/// Axis-aligned box `[lo_i, hi_i]`; under the max-metric this is also the ball
/// of radius `(hi-lo)/2` when all sides agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        for (a, b) in lo.iter().zip(&hi) {
            assert!(a < b, "region needs lo < hi");
        }
        Region { lo, hi }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Region::new(vec![lo], vec![hi])
    }

    /// Max-metric ball.
    pub fn ball(center: &[f64], radius: f64) -> Self {
        Region::new(
            center.iter().map(|c| c - radius).collect(),
            center.iter().map(|c| c + radius).collect(),
        )
    }

    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        Region::new(vec![lo; n], vec![hi; n])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Half of the longest side.
    pub fn radius(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (b - a)).fold(0.0, f64::max)
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    pub fn contains_open(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *v > *a && *v < *b)
    }

    /// Signed depth of `x` inside the box: positive inside, negative outside.
    pub fn depth(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (a, b))| (v - a).min(b - v))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    /// Intersection with another box, if non-empty.
    pub fn intersect(&self, other: &Region) -> Option<Region> {
        let lo: Vec<f64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        if lo.iter().zip(&hi).all(|(a, b)| a < b) {
            Some(Region { lo, hi })
        } else {
            None
        }
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect()
    }

    /// Centers of a uniform grid with roughly `step` spacing covering the box,
    /// each paired with the half-width of its cell.
    pub fn grid(&self, step: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let counts: Vec<usize> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (((b - a) / step).ceil() as usize).max(1))
            .collect();
        let half: Vec<f64> = self
            .lo
            .iter()
            .zip(&self.hi)
            .zip(&counts)
            .map(|((a, b), n)| 0.5 * (b - a) / *n as f64)
            .collect();
        let total: usize = counts.iter().product();
        let mut pts = Vec::with_capacity(total);
        let mut idx = vec![0usize; counts.len()];
        for _ in 0..total {
            pts.push(
                idx.iter()
                    .enumerate()
                    .map(|(k, i)| self.lo[k] + (2 * i + 1) as f64 * half[k])
                    .collect(),
            );
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < counts[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        (pts, half)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_distance_wraps() {
        let s = StateSpace::annulus(0.0, 1.0);
        assert!((s.distance(&[0.5, 0.95], &[0.5, 0.05]) - 0.1).abs() < 1e-12);
        assert_eq!(s.reduce(&[0.2, 1.25]), vec![0.2, 0.25]);
    }

    #[test]
    fn check_rejects_interval_overflow() {
        let s = StateSpace::cube(1, 0.0, 1.0);
        assert!(matches!(s.check(&[1.1]), Err(Error::PointOutsideDomain { factor: 0, .. })));
        assert!(s.check(&[1.0 + 1e-12]).is_ok());
    }

    #[test]
    fn grid_covers_box() {
        let r = Region::cube(2, 0.0, 1.0);
        let (pts, half) = r.grid(0.25);
        assert_eq!(pts.len(), 16);
        assert!((half[0] - 0.125).abs() < 1e-15);
        assert_eq!(pts[0], vec![0.125, 0.125]);
    }
}
