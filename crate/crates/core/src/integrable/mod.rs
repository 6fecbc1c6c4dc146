//! Twist maps on the annulus `I × T` and their conjugates.
//!
//! Coordinates are `(I, θ)` with `θ` of period 1; trigonometric terms use `2πθ`.

pub mod chain;
pub mod flow;
pub mod pack;

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::map::SmoothMap;
use crate::space::{Factor, StateSpace};

pub use chain::{chain_of_tori_search, rotation_horizon, shadow_chain, ChainLink, CircleTag, ShadowWitness, ToriChain};
pub use flow::{bump_eta, bump_eta_prime, flow_h_epsilon, moved_circle_distance};
pub use pack::{minimal_generator_pack, tapered_shear, PackMode};

use std::f64::consts::TAU;

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `(I, θ) ↦ (I, θ + ω(I))`.
#[derive(Clone)]
pub struct TwistMap {
    pub map: SmoothMap,
    omega: Scalar,
    domega: Scalar,
}

impl std::fmt::Debug for TwistMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TwistMap({})", self.map.name())
    }
}

impl TwistMap {
    pub fn omega(&self, i: f64) -> f64 {
        (self.omega)(i)
    }

    pub fn omega_prime(&self, i: f64) -> f64 {
        (self.domega)(i)
    }

    pub fn space(&self) -> &StateSpace {
        self.map.domain()
    }

    /// Bounds of the action interval.
    pub fn action_range(&self) -> (f64, f64) {
        action_range(self.space())
    }
}

pub(crate) fn action_range(space: &StateSpace) -> (f64, f64) {
    match space.factor(0) {
        Factor::Interval { lo, hi } => (lo, hi),
        Factor::Circle { period } => (0.0, period),
    }
}

fn check_annulus(space: &StateSpace) {
    assert!(
        space.dim() == 2 && !space.factor(0).is_circle() && space.factor(1).is_circle(),
        "twist maps live on an interval times a circle"
    );
}

/// Twist map with frequency `ω` and derivative `ω'`, on the annulus `space`.
pub fn twist_map<W, D>(space: StateSpace, omega: W, domega: D) -> TwistMap
where
    W: Fn(f64) -> f64 + Send + Sync + 'static,
    D: Fn(f64) -> f64 + Send + Sync + 'static,
{
    check_annulus(&space);
    let omega: Scalar = Arc::new(omega);
    let domega: Scalar = Arc::new(domega);
    let (w, dw, wi) = (omega.clone(), domega.clone(), omega.clone());
    let inv = SmoothMap::endo("twist⁻¹", space.clone(), move |x| vec![x[0], x[1] - wi(x[0])]);
    let map = SmoothMap::endo("twist", space, move |x| vec![x[0], x[1] + w(x[0])])
        .with_jacobian(move |x| DMatrix::from_row_slice(2, 2, &[1.0, 0.0, dw(x[0]), 1.0]))
        .with_symplectic(true)
        .with_inverse(inv);
    TwistMap { map, omega, domega }
}

/// `ω(I) = I`.
pub fn linear_twist(space: StateSpace) -> TwistMap {
    twist_map(space, |i| i, |_| 1.0)
}

/// `(I, θ) ↦ (I + ε cos 2πθ, θ)` with its exact inverse. Errors when `|ε|` is
/// at least half the action interval, since then no circle maps inside.
pub fn conjugating_shear(space: StateSpace, eps: f64) -> Result<SmoothMap> {
    check_annulus(&space);
    let (lo, hi) = action_range(&space);
    if 2.0 * eps.abs() >= hi - lo {
        return Err(Error::DomainOverflow(eps));
    }
    let inv = SmoothMap::endo("shear⁻¹", space.clone(), move |x| vec![x[0] - eps * (TAU * x[1]).cos(), x[1]])
        .with_jacobian(move |x| DMatrix::from_row_slice(2, 2, &[1.0, eps * TAU * (TAU * x[1]).sin(), 0.0, 1.0]))
        .with_symplectic(true);
    Ok(SmoothMap::endo("shear", space, move |x| vec![x[0] + eps * (TAU * x[1]).cos(), x[1]])
        .with_jacobian(move |x| DMatrix::from_row_slice(2, 2, &[1.0, -eps * TAU * (TAU * x[1]).sin(), 0.0, 1.0]))
        .with_symplectic(true)
        .with_inverse(inv))
}

/// `φ ∘ f ∘ φ^{-1}`.
pub fn conjugate(f: &SmoothMap, phi: &SmoothMap) -> Result<SmoothMap> {
    let inv = phi.inverse().ok_or_else(|| Error::NotInvertible(phi.name().to_string()))?;
    Ok(SmoothMap::chain(&[inv, f.clone(), phi.clone()]).renamed(format!("{}∘{}∘{}⁻¹", phi.name(), f.name(), phi.name())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::check_symplectic;

    #[test]
    fn linear_twist_example() {
        let t = linear_twist(StateSpace::annulus(0.0, 1.0));
        let y = t.map.apply(&[0.3, 0.1]);
        assert!((y[0] - 0.3).abs() < 1e-15 && (y[1] - 0.4).abs() < 1e-15);
        let samples: Vec<Vec<f64>> = (0..10).map(|k| vec![0.05 + 0.09 * k as f64, 0.1 * k as f64]).collect();
        assert!(check_symplectic(&t.map, &samples, 1e-10).unwrap().pass);
    }

    #[test]
    fn shear_example_and_inverse() {
        let space = StateSpace::annulus(0.0, 1.0);
        let s = conjugating_shear(space.clone(), 0.1).unwrap();
        let y = s.apply(&[0.5, 0.0]);
        assert!((y[0] - 0.6).abs() < 1e-15 && y[1] == 0.0);
        let z = s.inverse().unwrap().apply(&s.apply(&[0.42, 0.3]));
        assert!((z[0] - 0.42).abs() < 1e-14 && (z[1] - 0.3).abs() < 1e-14);
        let id = conjugating_shear(space.clone(), 0.0).unwrap();
        assert_eq!(id.apply(&[0.42, 0.3]), vec![0.42, 0.3]);
        assert!(matches!(conjugating_shear(space, 0.6), Err(Error::DomainOverflow(_))));
    }

    #[test]
    fn conjugate_moves_circles() {
        let space = StateSpace::annulus(0.0, 1.0);
        let t = linear_twist(space.clone());
        let phi = conjugating_shear(space, 0.1).unwrap();
        let t2 = conjugate(&t.map, &phi).unwrap();
        // Points of φ({I = 0.5}) stay on it.
        let p = phi.apply(&[0.5, 0.2]);
        let q = t2.apply(&p);
        let back = phi.inverse().unwrap().apply(&q);
        assert!((back[0] - 0.5).abs() < 1e-14);
        assert!((q[0] - p[0]).abs() > 1e-3);
    }
}
