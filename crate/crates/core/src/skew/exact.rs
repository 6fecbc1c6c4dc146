//! Exact affine fiber maps `y ↦ a y + b` over the rationals.

use num_rational::Ratio;

use super::{FiberFamily, SkewProduct};
use crate::error::{Error, Result};
use crate::map::SmoothMap;
use crate::space::StateSpace;

pub type Q = Ratio<i64>;

#[derive(Debug, Clone, PartialEq)]
pub struct AffineFamily {
    maps: Vec<(Q, Q)>,
}

impl AffineFamily {
    pub fn new(maps: Vec<(Q, Q)>) -> Result<Self> {
        if maps.is_empty() {
            return Err(Error::Precondition("affine family needs at least one map".into()));
        }
        if let Some(i) = maps.iter().position(|(a, _)| *a == Q::from_integer(0)) {
            return Err(Error::NotInvertible(format!("map {i} has zero slope")));
        }
        Ok(AffineFamily { maps })
    }

    /// `y ↦ y/2 + b_i` for each shift given as `(numerator, denominator)`.
    pub fn halving(shifts: &[(i64, i64)]) -> Result<Self> {
        AffineFamily::new(shifts.iter().map(|&(p, q)| (Q::new(1, 2), Q::new(p, q))).collect())
    }

    pub fn maps(&self) -> &[(Q, Q)] {
        &self.maps
    }

    /// Floating version on `space`, with inverses and bounds.
    pub fn to_skew(&self, space: StateSpace) -> Result<SkewProduct> {
        let maps = self
            .maps
            .iter()
            .map(|(a, b)| SmoothMap::affine_1d(space.clone(), to_f64(a), to_f64(b)))
            .collect();
        SkewProduct::new(maps)
    }
}

pub fn to_f64(q: &Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

impl FiberFamily for AffineFamily {
    type Point = Q;

    fn symbols(&self) -> usize {
        self.maps.len()
    }

    fn forward(&self, symbol: usize, y: &Q) -> Q {
        let (a, b) = self.maps[symbol];
        a * y + b
    }

    fn backward(&self, symbol: usize, y: &Q) -> Result<Q> {
        let (a, b) = self.maps[symbol];
        Ok((y - b) / a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skew::{iterate_skew, EventuallyPeriodic, ShiftPoint};

    #[test]
    fn exact_round_trip() {
        let fam = AffineFamily::halving(&[(0, 1), (1, 4), (1, 2)]).unwrap();
        let x = ShiftPoint::new(EventuallyPeriodic::new(vec![2, 0], vec![1]), EventuallyPeriodic::new(vec![0, 2, 1], vec![2, 0]), 3);
        let y = Q::new(3, 7);
        let (x9, y9) = iterate_skew(&fam, &x, &y, 9).unwrap();
        assert_eq!(iterate_skew(&fam, &x9, &y9, -9).unwrap(), (x, y));
    }

    #[test]
    fn zero_slope_rejected() {
        assert!(AffineFamily::new(vec![(Q::from_integer(0), Q::from_integer(1))]).is_err());
    }
}
