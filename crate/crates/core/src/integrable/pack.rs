//! Small sets of conjugated twist maps whose IFS fills the annulus.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{action_range, conjugate, TwistMap};
use crate::error::Result;
use crate::map::SmoothMap;

/// Taper width at each end of the action interval.
const TAPER: f64 = 0.25;
/// Shear amplitude of each conjugating map.
const SHEAR: f64 = 0.04;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PackMode {
    /// `dim + 2` generators.
    DimPlusTwo,
    /// Three generators.
    Three,
}

/// Profile on `[lo, hi]` that is 1 in the middle and falls to 0 at both ends as a cubic.
fn taper(lo: f64, hi: f64, i: f64) -> (f64, f64, f64) {
    let c = TAPER * (hi - lo);
    let edge = |u: f64| -> (f64, f64, f64) {
        if u <= 0.0 {
            (0.0, 0.0, 0.0)
        } else if u >= c {
            (1.0, 0.0, 0.0)
        } else {
            let v = 1.0 - u / c;
            (1.0 - v * v * v, 3.0 * v * v / c, -6.0 * v / (c * c))
        }
    };
    let (b0, d0, s0) = edge(i - lo);
    let (b1, d1, s1) = edge(hi - i);
    (b0 * b1, d0 * b1 - b0 * d1, s0 * b1 - 2.0 * d0 * d1 + b0 * s1)
}

/// Exact symplectic shear from the generating function
/// `S(I', θ) = I'θ + ε B(I') sin(2π(θ - α)) / 2π`, where `B` tapers to zero at
/// the ends of the action interval so both boundary circles stay fixed.
pub fn tapered_shear(space: crate::space::StateSpace, eps: f64, alpha: f64) -> SmoothMap {
    let (lo, hi) = action_range(&space);
    let solve_action = move |i: f64, th: f64| -> f64 {
        let c = (TAU * (th - alpha)).cos();
        let mut ip = i;
        for _ in 0..60 {
            let (b, db, _) = taper(lo, hi, ip);
            let g = ip + eps * b * c - i;
            let step = g / (1.0 + eps * db * c);
            ip -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        ip
    };
    let fwd = move |x: &[f64]| -> Vec<f64> {
        let ip = solve_action(x[0], x[1]);
        let (_, db, _) = taper(lo, hi, ip);
        vec![ip, x[1] + eps * db * (TAU * (x[1] - alpha)).sin() / TAU]
    };
    let jac = move |x: &[f64]| -> DMatrix<f64> {
        let ip = solve_action(x[0], x[1]);
        let (b, db, ddb) = taper(lo, hi, ip);
        let (s, c) = (TAU * (x[1] - alpha)).sin_cos();
        let d = 1.0 + eps * db * c;
        let di_di = 1.0 / d;
        let di_dt = TAU * eps * b * s / d;
        let k = eps * ddb * s / TAU;
        DMatrix::from_row_slice(2, 2, &[di_di, di_dt, k * di_di, 1.0 + eps * db * c + k * di_dt])
    };
    let back = move |y: &[f64]| -> Vec<f64> {
        let ip = y[0];
        let (b, db, _) = taper(lo, hi, ip);
        let mut th = y[1];
        for _ in 0..60 {
            let g = th + eps * db * (TAU * (th - alpha)).sin() / TAU - y[1];
            let step = g / (1.0 + eps * db * (TAU * (th - alpha)).cos());
            th -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        vec![ip + eps * b * (TAU * (th - alpha)).cos(), th]
    };
    let inv = SmoothMap::endo(format!("shear[{alpha:.3}]⁻¹"), space.clone(), back).with_symplectic(true);
    SmoothMap::endo(format!("shear[{alpha:.3}]"), space, fwd)
        .with_jacobian(jac)
        .with_symplectic(true)
        .with_inverse(inv)
}

/// `T₁` followed by conjugates `φ_j ∘ T₁ ∘ φ_j^{-1}` by tapered shears with
/// seeded random phases: `dim + 1` of them in [`PackMode::DimPlusTwo`], two in [`PackMode::Three`].
pub fn minimal_generator_pack(t1: &TwistMap, mode: PackMode, seed: u64) -> Result<Vec<SmoothMap>> {
    let extra = match mode {
        PackMode::DimPlusTwo => t1.space().dim() + 1,
        PackMode::Three => 2,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![t1.map.clone()];
    for j in 0..extra {
        let alpha = (j as f64 + rng.random::<f64>()) / extra as f64;
        let phi = tapered_shear(t1.space().clone(), SHEAR, alpha);
        out.push(conjugate(&t1.map, &phi)?.renamed(format!("T1^phi{j}")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrable::linear_twist;
    use crate::map::check_symplectic;
    use crate::space::StateSpace;

    #[test]
    fn counts() {
        let t = linear_twist(StateSpace::annulus(0.0, 1.0));
        assert_eq!(minimal_generator_pack(&t, PackMode::DimPlusTwo, 1).unwrap().len(), 4);
        assert_eq!(minimal_generator_pack(&t, PackMode::Three, 1).unwrap().len(), 3);
    }

    #[test]
    fn shear_is_symplectic_and_invertible() {
        let space = StateSpace::annulus(0.0, 1.0);
        let s = tapered_shear(space.clone(), SHEAR, 0.3);
        let samples: Vec<Vec<f64>> = (0..20).map(|k| vec![0.02 + 0.048 * k as f64, 0.37 * k as f64 % 1.0]).collect();
        assert!(check_symplectic(&s, &samples, 1e-10).unwrap().pass);
        let inv = s.inverse().unwrap();
        for x in &samples {
            let y = inv.apply(&s.apply(x));
            assert!(space.distance(&y, x) < 1e-13);
            let j = s.jacobian_at(x).unwrap();
            let f = s.fd_jacobian(x, 1e-6).unwrap();
            assert!((j - f).amax() < 1e-6);
        }
        assert_eq!(s.apply(&[0.0, 0.4])[0], 0.0);
        assert_eq!(s.apply(&[1.0, 0.4])[0], 1.0);
    }
}
