//! Fixed points, their spectra, and weak hyperbolicity.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::map::SmoothMap;

/// Moduli closer than this to 1 count as neutral.
pub const NEUTRAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Attracting,
    Repelling,
    Saddle,
    EllipticLike,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointRecord {
    pub point: Vec<f64>,
    pub map_name: String,
    pub residual: f64,
    pub eigen_moduli: Vec<f64>,
    pub classification: Classification,
    /// Infimum of the δ for which the point is δ-weak hyperbolic (saddles only).
    pub delta_weak: Option<f64>,
}

impl FixedPointRecord {
    /// Builds the record at a known fixed point.
    pub fn at(map: &SmoothMap, point: Vec<f64>) -> Result<Self> {
        let fx = map.apply(&point);
        let residual = map.codomain().distance(&fx, &point);
        let jac = map.jacobian_newton(&point);
        let eigen_moduli = moduli(&jac);
        let classification = classify(&jac, &eigen_moduli);
        let delta_weak = match classification {
            Classification::Saddle => Some(weakness(&eigen_moduli)),
            _ => None,
        };
        Ok(FixedPointRecord {
            point,
            map_name: map.name().to_string(),
            residual,
            eigen_moduli,
            classification,
            delta_weak,
        })
    }
}

/// Sorted absolute values of the eigenvalues.
pub fn moduli(jac: &DMatrix<f64>) -> Vec<f64> {
    let mut m: Vec<f64> = if jac.nrows() == 1 {
        vec![jac[(0, 0)].abs()]
    } else {
        jac.clone().complex_eigenvalues().iter().map(|z| z.norm()).collect()
    };
    m.sort_by(|a, b| a.total_cmp(b));
    m
}

/// Smallest singular value, used as the co-norm `m(A)`.
pub fn co_norm(a: &DMatrix<f64>) -> f64 {
    a.clone().singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

fn classify(jac: &DMatrix<f64>, moduli: &[f64]) -> Classification {
    let neutral = moduli.iter().any(|m| (m - 1.0).abs() <= NEUTRAL_TOL);
    if neutral {
        let n = jac.nrows();
        if (jac - DMatrix::<f64>::identity(n, n)).amax() <= NEUTRAL_TOL {
            return Classification::Degenerate;
        }
        return Classification::EllipticLike;
    }
    let below = moduli.iter().filter(|m| **m < 1.0).count();
    if below == moduli.len() {
        Classification::Attracting
    } else if below == 0 {
        Classification::Repelling
    } else {
        Classification::Saddle
    }
}

fn weakness(moduli: &[f64]) -> f64 {
    moduli
        .iter()
        .map(|&m| if m < 1.0 { 1.0 - m } else { 1.0 - 1.0 / m })
        .fold(0.0, f64::max)
}

/// Contraction iteration when the map declares `K < 1`, otherwise damped Newton.
pub fn find_fixed_point(map: &SmoothMap, guess: &[f64], tol: f64, max_iter: usize) -> Result<FixedPointRecord> {
    let space = map.domain();
    let mut x = space.check(guess)?;
    let residual = |x: &[f64]| space.distance(&map.apply(x), x);

    let mut r = residual(&x);
    if r < tol {
        return FixedPointRecord::at(map, x);
    }
    if map.is_contracting() {
        for _ in 0..max_iter {
            x = map.apply(&x);
            r = residual(&x);
            if r < tol {
                return FixedPointRecord::at(map, x);
            }
        }
        return Err(Error::NoConvergence { iterations: max_iter, residual: r });
    }

    let n = x.len();
    for _ in 0..max_iter {
        let fx = map.apply(&x);
        let g: Vec<f64> = (0..n).map(|i| space.factor(i).displacement(x[i], fx[i])).collect();
        let mut jac = map.jacobian_newton(&x);
        for i in 0..n {
            jac[(i, i)] -= 1.0;
        }
        let lu = jac.lu();
        if !lu.is_invertible() {
            return Err(Error::SingularJacobian(x));
        }
        let dx = lu.solve(&DVector::from_vec(g)).ok_or_else(|| Error::SingularJacobian(x.clone()))?;
        let mut step = 1.0;
        loop {
            let cand: Vec<f64> = space.reduce(&(0..n).map(|i| x[i] - step * dx[i]).collect::<Vec<_>>());
            let rc = if space.contains(&cand) { residual(&cand) } else { f64::INFINITY };
            if rc < r || step < 1e-6 {
                if rc.is_finite() {
                    x = cand;
                    r = rc;
                }
                break;
            }
            step *= 0.5;
        }
        if r < tol {
            return FixedPointRecord::at(map, x);
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: r })
}

/// True iff every modulus lies in `(1-δ, 1)` or `(1, 1/(1-δ))`.
pub fn check_weak_hyperbolic(rec: &FixedPointRecord, delta: f64) -> Result<bool> {
    weak_hyperbolic(&rec.eigen_moduli, delta)
}

pub fn weak_hyperbolic(moduli: &[f64], delta: f64) -> Result<bool> {
    if moduli.iter().any(|m| (m - 1.0).abs() <= NEUTRAL_TOL) {
        return Err(Error::NotHyperbolic(moduli.to_vec()));
    }
    let lo = 1.0 - delta;
    Ok(moduli.iter().all(|&m| (m > lo && m < 1.0) || (m > 1.0 && m < 1.0 / lo)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::StateSpace;

    #[test]
    fn affine_contraction_fixed_point() {
        let m = SmoothMap::affine_1d(StateSpace::cube(1, 0.0, 1.0), 0.5, 0.3);
        let rec = find_fixed_point(&m, &[0.0], 1e-12, 200).unwrap();
        assert!((rec.point[0] - 0.6).abs() < 1e-11);
        assert_eq!(rec.eigen_moduli, vec![0.5]);
        assert_eq!(rec.classification, Classification::Attracting);
    }

    #[test]
    fn weak_saddle() {
        let m = SmoothMap::diagonal(StateSpace::cube(2, -1.0, 1.0), &[1.0 / 0.9, 0.9]);
        let rec = find_fixed_point(&m, &[0.2, -0.1], 1e-12, 50).unwrap();
        assert!(rec.point.iter().all(|v| v.abs() < 1e-12));
        assert_eq!(rec.classification, Classification::Saddle);
        assert!(check_weak_hyperbolic(&rec, 0.15).unwrap());
        assert!(!check_weak_hyperbolic(&rec, 0.05).unwrap());
        assert!((rec.delta_weak.unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn weak_bounds_from_moduli() {
        assert!(weak_hyperbolic(&[0.9, 1.0 / 0.9], 0.2).unwrap());
        assert!(!weak_hyperbolic(&[0.7, 1.0 / 0.7], 0.2).unwrap());
        assert!(matches!(weak_hyperbolic(&[1.0, 1.0], 0.2), Err(Error::NotHyperbolic(_))));
    }

    #[test]
    fn identity_is_degenerate() {
        let m = SmoothMap::identity(StateSpace::cube(2, 0.0, 1.0));
        let rec = find_fixed_point(&m, &[0.3, 0.4], 1e-12, 10).unwrap();
        assert_eq!(rec.classification, Classification::Degenerate);
    }

    #[test]
    fn newton_on_nonlinear_map() {
        // x ↦ x² has a repelling fixed point at 1.
        let m = SmoothMap::endo("sq", StateSpace::cube(1, 0.0, 2.0), |x| vec![x[0] * x[0]]);
        let rec = find_fixed_point(&m, &[1.3], 1e-12, 50).unwrap();
        assert!((rec.point[0] - 1.0).abs() < 1e-10);
        assert_eq!(rec.classification, Classification::Repelling);
    }
}
