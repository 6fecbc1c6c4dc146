//! The bump function `η` and the time-τ flow of `h_ε` on the unit disk.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::map::SmoothMap;
use crate::space::StateSpace;

/// `e^4 · exp(-1/(x(1-x)))` on `(0, 1)`, zero elsewhere; peaks at `η(1/2) = 1`.
pub fn bump_eta(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        (4.0 - 1.0 / (x * (1.0 - x))).exp()
    }
}

pub fn bump_eta_prime(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        let u = x * (1.0 - x);
        bump_eta(x) * (1.0 - 2.0 * x) / (u * u)
    }
}

/// Gradient `(∂h/∂r, ∂h/∂θ)` of
/// `h_ε(r, θ) = η(r) r² (sin 2πθ + cos 2πθ · q²) / q` with `q = 1 + ε η(r)`.
fn grad_h(eps: f64, x: &[f64]) -> Vec<f64> {
    let (r, th) = (x[0], x[1]);
    let e = bump_eta(r);
    if e == 0.0 {
        return vec![0.0, 0.0];
    }
    let de = bump_eta_prime(r);
    let q = 1.0 + eps * e;
    let dq = eps * de;
    let (s, c) = (TAU * th).sin_cos();
    let a = e * r * r;
    let da = de * r * r + 2.0 * e * r;
    let shape = s / q + q * c;
    let dshape = -s * dq / (q * q) + dq * c;
    vec![da * shape + a * dshape, a * TAU * (c / q - q * s)]
}

/// Time-`τ` map of the `h_ε` flow on `(r, θ) ∈ [0, 2] × T`, treating `(r, θ)`
/// as a canonical pair. Points with `r ≥ 1` or `r ≤ 0` are returned unchanged.
///
/// `steps = None` uses `max(64, 256|τ|)` implicit midpoint steps. A probe
/// ring is integrated up front so a diverging integrator is reported here.
pub fn flow_h_epsilon(eps: f64, tau: f64, steps: Option<usize>) -> Result<SmoothMap> {
    let steps = steps.unwrap_or_else(|| ((256.0 * tau.abs()).ceil() as usize).max(64));
    if steps == 0 {
        return Err(Error::Precondition("flow needs at least one step".into()));
    }
    let ham = Hamiltonian::new(2, move |x| grad_h(eps, x)).frozen_on(|x| x[0] >= 1.0 || x[0] <= 0.0);
    for k in 0..8 {
        let probe = [0.5, k as f64 / 8.0];
        ham.integrate(&probe, tau, steps)?;
    }
    let space = StateSpace::annulus(0.0, 2.0);
    Ok(ham.flow_map(format!("h_eps[{eps}]^{tau}"), space, tau, steps))
}

/// Two-sided Hausdorff distance (max metric, circle-aware) between the image
/// of `samples` points on `{r = c}` and the circle itself, sampled at the same density.
pub fn moved_circle_distance(map: &SmoothMap, c: f64, samples: usize) -> f64 {
    let space = map.domain();
    let circle: Vec<Vec<f64>> = (0..samples).map(|k| vec![c, k as f64 / samples as f64]).collect();
    let image: Vec<Vec<f64>> = circle.iter().map(|p| map.apply(p)).collect();
    let one_side = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        a.iter()
            .map(|p| b.iter().map(|q| space.distance(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_side(&image, &circle).max(one_side(&circle, &image))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_values() {
        assert_eq!(bump_eta(0.5), 1.0);
        assert_eq!(bump_eta(0.0), 0.0);
        assert_eq!(bump_eta(1.0), 0.0);
        assert_eq!(bump_eta(-0.1), 0.0);
        assert!(bump_eta(0.3) > 0.0);
    }

    #[test]
    fn derivative_matches_differences() {
        for x in [0.2, 0.5, 0.77] {
            let h = 1e-6;
            let fd = (bump_eta(x + h) - bump_eta(x - h)) / (2.0 * h);
            assert!((fd - bump_eta_prime(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn outer_ring_is_fixed_exactly() {
        let f = flow_h_epsilon(0.1, 1.0, None).unwrap();
        assert_eq!(f.apply(&[1.2, 0.3]), vec![1.2, 0.3]);
        assert_eq!(f.apply(&[1.0, 0.7]), vec![1.0, 0.7]);
    }

    #[test]
    fn zero_time_is_identity() {
        let f = flow_h_epsilon(0.1, 0.0, None).unwrap();
        assert_eq!(f.apply(&[0.4, 0.3]), vec![0.4, 0.3]);
    }
}
