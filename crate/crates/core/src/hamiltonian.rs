//! Time-t maps of Hamiltonian flows by the implicit midpoint rule.
//!
//! Coordinates come in interleaved pairs `(a_1, b_1, a_2, b_2, ...)` with
//! `ȧ = -∂H/∂b`, `ḃ = ∂H/∂a`, so `H = a·v - b·u` flows by `+(u, v)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::map::SmoothMap;
use crate::space::StateSpace;

type GradFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type HessFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
type Pred = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX: usize = 60;

#[derive(Clone)]
pub struct Hamiltonian {
    dim: usize,
    grad: GradFn,
    hess: Option<HessFn>,
    /// Points where the field is known to vanish identically along the orbit.
    frozen: Option<Pred>,
}

impl Hamiltonian {
    pub fn new<G>(dim: usize, grad: G) -> Self
    where
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        assert!(dim % 2 == 0, "Hamiltonian systems need an even dimension");
        Hamiltonian { dim, grad: Arc::new(grad), hess: None, frozen: None }
    }

    pub fn with_hessian<H>(mut self, hess: H) -> Self
    where
        H: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.hess = Some(Arc::new(hess));
        self
    }

    /// Declares a region that the flow leaves fixed pointwise.
    pub fn frozen_on<P>(mut self, pred: P) -> Self
    where
        P: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        self.frozen = Some(Arc::new(pred));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn field(&self, x: &[f64]) -> Vec<f64> {
        let g = (self.grad)(x);
        let mut v = vec![0.0; self.dim];
        for k in 0..self.dim / 2 {
            v[2 * k] = -g[2 * k + 1];
            v[2 * k + 1] = g[2 * k];
        }
        v
    }

    /// Symmetrized Hessian; central differences of the gradient when no closed form is given.
    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let h = match &self.hess {
            Some(f) => f(x),
            None => {
                let n = self.dim;
                let step = 1e-6;
                let mut m = DMatrix::zeros(n, n);
                let mut xp = x.to_vec();
                for j in 0..n {
                    xp[j] = x[j] + step;
                    let gp = (self.grad)(&xp);
                    xp[j] = x[j] - step;
                    let gm = (self.grad)(&xp);
                    xp[j] = x[j];
                    for i in 0..n {
                        m[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
                    }
                }
                m
            }
        };
        0.5 * (&h + h.transpose())
    }

    /// `A = J S` with `J` the field matrix and `S` the Hessian.
    fn linear_field(&self, x: &[f64]) -> DMatrix<f64> {
        let s = self.hessian(x);
        let n = self.dim;
        let mut a = DMatrix::zeros(n, n);
        for k in 0..n / 2 {
            for c in 0..n {
                a[(2 * k, c)] = -s[(2 * k + 1, c)];
                a[(2 * k + 1, c)] = s[(2 * k, c)];
            }
        }
        a
    }

    fn is_frozen(&self, x: &[f64]) -> bool {
        self.frozen.as_ref().is_some_and(|p| p(x))
    }

    /// One implicit midpoint step from `x` with step `h`.
    pub fn midpoint_step(&self, x: &[f64], h: f64, step_index: usize) -> Result<Vec<f64>> {
        let n = self.dim;
        let mut y: Vec<f64> = {
            let v = self.field(x);
            x.iter().zip(&v).map(|(a, b)| a + h * b).collect()
        };
        for _ in 0..NEWTON_MAX {
            let m: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
            let v = self.field(&m);
            let g: Vec<f64> = (0..n).map(|i| y[i] - x[i] - h * v[i]).collect();
            let a = self.linear_field(&m);
            let dg = DMatrix::<f64>::identity(n, n) - 0.5 * h * a;
            let dy = dg
                .lu()
                .solve(&DVector::from_vec(g))
                .ok_or(Error::IntegratorDiverged { step: step_index })?;
            let mut size = 0.0f64;
            for i in 0..n {
                y[i] -= dy[i];
                size = size.max(dy[i].abs());
            }
            if !size.is_finite() {
                return Err(Error::IntegratorDiverged { step: step_index });
            }
            let scale = 1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if size <= NEWTON_TOL * scale {
                return Ok(y);
            }
        }
        Err(Error::IntegratorDiverged { step: step_index })
    }

    pub fn integrate(&self, x: &[f64], t: f64, steps: usize) -> Result<Vec<f64>> {
        if t == 0.0 || self.is_frozen(x) {
            return Ok(x.to_vec());
        }
        let h = t / steps as f64;
        let mut y = x.to_vec();
        for k in 0..steps {
            y = self.midpoint_step(&y, h, k)?;
        }
        Ok(y)
    }

    /// Endpoint and exact derivative of the discrete flow.
    pub fn integrate_with_jacobian(&self, x: &[f64], t: f64, steps: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let n = self.dim;
        let mut jac = DMatrix::identity(n, n);
        if t == 0.0 || self.is_frozen(x) {
            return Ok((x.to_vec(), jac));
        }
        let h = t / steps as f64;
        let mut y = x.to_vec();
        for k in 0..steps {
            let next = self.midpoint_step(&y, h, k)?;
            let m: Vec<f64> = y.iter().zip(&next).map(|(a, b)| 0.5 * (a + b)).collect();
            let a = self.linear_field(&m);
            let id = DMatrix::<f64>::identity(n, n);
            let lhs = &id - 0.5 * h * &a;
            let rhs = (&id + 0.5 * h * &a) * &jac;
            jac = lhs.lu().solve(&rhs).ok_or(Error::IntegratorDiverged { step: k })?;
            y = next;
        }
        Ok((y, jac))
    }

    /// The time-`t` map as a [`SmoothMap`] on `space`, with the time-`-t` map as inverse.
    ///
    /// Integration failures surface as NaN coordinates from `apply`; use
    /// [`Hamiltonian::integrate`] directly to get the error.
    pub fn flow_map(&self, name: impl Into<String>, space: StateSpace, t: f64, steps: usize) -> SmoothMap {
        assert_eq!(space.dim(), self.dim);
        let name = name.into();
        let forward = self.build_flow(name.clone(), space.clone(), t, steps);
        let backward = self.build_flow(format!("{name}⁻¹"), space, -t, steps);
        forward.with_inverse(backward)
    }

    fn build_flow(&self, name: String, space: StateSpace, t: f64, steps: usize) -> SmoothMap {
        let n = self.dim;
        let ev = self.clone();
        let jv = self.clone();
        SmoothMap::endo(name, space, move |x| ev.integrate(x, t, steps).unwrap_or_else(|_| vec![f64::NAN; n]))
            .with_jacobian(move |x| {
                jv.integrate_with_jacobian(x, t, steps)
                    .map(|(_, j)| j)
                    .unwrap_or_else(|_| DMatrix::from_element(n, n, f64::NAN))
            })
            .with_symplectic(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::symplectic_residual;

    #[test]
    fn linear_hamiltonian_translates() {
        let (u, v) = (0.3, -0.2);
        let ham = Hamiltonian::new(2, move |_| vec![v, -u]);
        let y = ham.integrate(&[0.1, 0.4], 1.0, 7).unwrap();
        assert!((y[0] - 0.4).abs() < 1e-14 && (y[1] - 0.2).abs() < 1e-14);
    }

    #[test]
    fn pendulum_step_is_symplectic_and_reversible() {
        // H = b²/2 - cos(a) with (a, b) pairs: ȧ = -b, ḃ = sin a.
        let ham = Hamiltonian::new(2, |x| vec![x[0].sin(), x[1]]);
        let (y, j) = ham.integrate_with_jacobian(&[0.7, 0.2], 2.0, 200).unwrap();
        assert!(symplectic_residual(&j) < 1e-12);
        let back = ham.integrate(&y, -2.0, 200).unwrap();
        assert!((back[0] - 0.7).abs() < 1e-12 && (back[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn analytic_derivative_matches_differences() {
        let ham = Hamiltonian::new(2, |x| vec![x[0].sin(), x[1]]);
        let m = ham.flow_map("pend", StateSpace::cube(2, -3.0, 3.0), 1.0, 100);
        let x = [0.4, -0.3];
        let ja = m.jacobian_at(&x).unwrap();
        let jf = m.fd_jacobian(&x, 1e-5).unwrap();
        assert!((ja - jf).amax() < 1e-7);
    }
}
