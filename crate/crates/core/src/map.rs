//! Evaluable maps with optional analytic derivatives and metadata.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::space::StateSpace;

pub type EvalFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type JacFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Optional facts about a map. `contraction_bound` is a lower bound on the
/// expansion factor: `λ d(x,y) <= d(f x, f y)`.
#[derive(Clone, Default)]
pub struct MapMeta {
    pub contraction_bound: Option<f64>,
    pub lipschitz: Option<f64>,
    pub symplectic: Option<bool>,
    pub inverse: Option<Arc<SmoothMap>>,
}

#[derive(Clone)]
pub struct SmoothMap {
    name: String,
    domain: StateSpace,
    codomain: StateSpace,
    eval: EvalFn,
    deriv: Option<JacFn>,
    pub meta: MapMeta,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothMap")
            .field("name", &self.name)
            .field("dim", &self.domain.dim())
            .field("analytic_jacobian", &self.deriv.is_some())
            .field("contraction_bound", &self.meta.contraction_bound)
            .field("lipschitz", &self.meta.lipschitz)
            .field("symplectic", &self.meta.symplectic)
            .field("invertible", &self.meta.inverse.is_some())
            .finish()
    }
}

impl SmoothMap {
    pub fn new<F>(name: impl Into<String>, domain: StateSpace, codomain: StateSpace, eval: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        SmoothMap {
            name: name.into(),
            domain,
            codomain,
            eval: Arc::new(eval),
            deriv: None,
            meta: MapMeta::default(),
        }
    }

    /// Self-map of `space`.
    pub fn endo<F>(name: impl Into<String>, space: StateSpace, eval: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        SmoothMap::new(name, space.clone(), space, eval)
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.deriv = Some(Arc::new(jac));
        self
    }

    pub fn with_bounds(mut self, lambda: f64, lipschitz: f64) -> Self {
        self.meta.contraction_bound = Some(lambda);
        self.meta.lipschitz = Some(lipschitz);
        self
    }

    pub fn with_symplectic(mut self, flag: bool) -> Self {
        self.meta.symplectic = Some(flag);
        self
    }

    pub fn with_inverse(mut self, inv: SmoothMap) -> Self {
        self.meta.inverse = Some(Arc::new(inv));
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &StateSpace {
        &self.domain
    }

    pub fn codomain(&self) -> &StateSpace {
        &self.codomain
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.deriv.is_some()
    }

    pub fn is_contracting(&self) -> bool {
        matches!(self.meta.lipschitz, Some(k) if k < 1.0)
    }

    /// The inverse map, whose own inverse points back at `self`.
    pub fn inverse(&self) -> Option<SmoothMap> {
        let inv = self.meta.inverse.as_ref()?;
        let mut inv = (**inv).clone();
        if inv.meta.inverse.is_none() {
            let mut me = self.clone();
            me.meta.inverse = None;
            inv.meta.inverse = Some(Arc::new(me));
        }
        Some(inv)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let x = self.domain.check(x)?;
        Ok(self.apply(&x))
    }

    /// Evaluation without the domain check; circle coordinates of the result are reduced.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = (self.eval)(x);
        self.codomain.reduce_in_place(&mut y);
        y
    }

    /// Default finite-difference step: `1e-5` times the domain diameter.
    pub fn default_step(&self) -> f64 {
        let d = self.domain.diameter();
        if d.is_finite() {
            1e-5 * d
        } else {
            1e-5
        }
    }

    pub fn jacobian(&self, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
        if let Some(j) = &self.deriv {
            let x = self.domain.check(x)?;
            return Ok(j(&x));
        }
        self.fd_jacobian(x, h)
    }

    pub fn jacobian_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.jacobian(x, self.default_step())
    }

    /// Central differences regardless of an analytic Jacobian being present.
    pub fn fd_jacobian(&self, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
        if h <= 0.0 {
            return Err(Error::Precondition(format!("step must be positive, got {h}")));
        }
        let x = self.domain.check(x)?;
        if !self.domain.has_margin(&x, h) {
            return Err(Error::StepTooLarge { point: x, h });
        }
        let n = self.domain.dim();
        let m = self.codomain.dim();
        let mut jac = DMatrix::zeros(m, n);
        let mut xp = x.clone();
        for j in 0..n {
            xp[j] = x[j] + h;
            let fp = (self.eval)(&xp);
            xp[j] = x[j] - h;
            let fm = (self.eval)(&xp);
            xp[j] = x[j];
            for i in 0..m {
                let diff = self.codomain.factor(i).displacement(fm[i], fp[i]);
                jac[(i, j)] = diff / (2.0 * h);
            }
        }
        Ok(jac)
    }

    /// `outer ∘ inner`.
    pub fn compose(outer: &SmoothMap, inner: &SmoothMap) -> SmoothMap {
        let (fo, fi) = (outer.eval.clone(), inner.eval.clone());
        let mid = inner.codomain.clone();
        let mut map = SmoothMap::new(
            format!("{}∘{}", outer.name, inner.name),
            inner.domain.clone(),
            outer.codomain.clone(),
            move |x| {
                let mut y = fi(x);
                mid.reduce_in_place(&mut y);
                fo(&y)
            },
        );
        if let (Some(jo), Some(ji)) = (outer.deriv.clone(), inner.deriv.clone()) {
            let (fi, mid) = (inner.eval.clone(), inner.codomain.clone());
            map = map.with_jacobian(move |x| {
                let mut y = fi(x);
                mid.reduce_in_place(&mut y);
                jo(&y) * ji(x)
            });
        }
        let mo = &outer.meta;
        let mi = &inner.meta;
        map.meta.contraction_bound = mo.contraction_bound.zip(mi.contraction_bound).map(|(a, b)| a * b);
        map.meta.lipschitz = mo.lipschitz.zip(mi.lipschitz).map(|(a, b)| a * b);
        map.meta.symplectic = match (mo.symplectic, mi.symplectic) {
            (Some(a), Some(b)) => Some(a && b),
            _ => None,
        };
        if let (Some(io), Some(ii)) = (outer.inverse(), inner.inverse()) {
            let mut inv = SmoothMap::compose(&strip_inverse(ii), &strip_inverse(io));
            inv.meta.inverse = None;
            map.meta.inverse = Some(Arc::new(inv));
        }
        map
    }

    /// Chain of maps applied left to right: `maps[0]` first.
    pub fn chain(maps: &[SmoothMap]) -> SmoothMap {
        assert!(!maps.is_empty());
        let mut acc = maps[0].clone();
        for m in &maps[1..] {
            acc = SmoothMap::compose(m, &acc);
        }
        acc
    }

    pub fn identity(space: StateSpace) -> SmoothMap {
        let n = space.dim();
        let base = SmoothMap::endo("id", space, |x| x.to_vec())
            .with_jacobian(move |_| DMatrix::identity(n, n))
            .with_bounds(1.0, 1.0)
            .with_symplectic(n % 2 == 0);
        let inv = base.clone();
        base.with_inverse(inv)
    }

    /// `x ↦ A x + b`, with bounds measured in the max-norm.
    pub fn affine(name: impl Into<String>, space: StateSpace, a: DMatrix<f64>, b: Vec<f64>) -> SmoothMap {
        let n = space.dim();
        assert_eq!(a.nrows(), n);
        assert_eq!(a.ncols(), n);
        assert_eq!(b.len(), n);
        let name = name.into();
        let k = inf_norm(&a);
        let symplectic = n % 2 == 0 && symplectic_residual(&a) < 1e-12;
        let inv = a.clone().try_inverse();
        let lambda = inv.as_ref().map(|ai| 1.0 / inf_norm(ai)).unwrap_or(0.0);
        let av = a.clone();
        let bv = DVector::from_vec(b.clone());
        let aj = a.clone();
        let mut map = SmoothMap::endo(name.clone(), space.clone(), move |x| {
            let y = &av * DVector::from_column_slice(x) + &bv;
            y.as_slice().to_vec()
        })
        .with_jacobian(move |_| aj.clone())
        .with_bounds(lambda, k);
        if n % 2 == 0 {
            map = map.with_symplectic(symplectic);
        }
        if let Some(ai) = inv {
            let c = -(&ai * DVector::from_vec(b));
            let ai2 = ai.clone();
            let mut inv_map = SmoothMap::endo(format!("{name}⁻¹"), space, move |x| {
                let y = &ai * DVector::from_column_slice(x) + &c;
                y.as_slice().to_vec()
            })
            .with_jacobian(move |_| ai2.clone())
            .with_bounds(1.0 / k, 1.0 / lambda);
            if n % 2 == 0 {
                inv_map = inv_map.with_symplectic(symplectic);
            }
            map = map.with_inverse(inv_map);
        }
        map
    }

    /// One-dimensional `y ↦ s y + c`.
    pub fn affine_1d(space: StateSpace, s: f64, c: f64) -> SmoothMap {
        SmoothMap::affine(format!("{s}y{c:+}"), space, DMatrix::from_element(1, 1, s), vec![c])
    }

    /// Diagonal linear map.
    pub fn diagonal(space: StateSpace, diag: &[f64]) -> SmoothMap {
        let n = diag.len();
        SmoothMap::affine(
            format!("diag{diag:?}"),
            space,
            DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
            vec![0.0; n],
        )
    }

    /// Preimage of `y`, via the inverse when present, else Newton from `guess`.
    pub fn preimage(&self, y: &[f64], guess: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        if let Some(inv) = &self.meta.inverse {
            return Ok(inv.apply(y));
        }
        let mut x = self.domain.reduce(guess);
        let n = x.len();
        for it in 0..max_iter {
            let fx = self.apply(&x);
            let r: Vec<f64> = (0..n)
                .map(|i| self.codomain.factor(i).displacement(y[i], fx[i]))
                .collect();
            let res = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if res < tol {
                return Ok(x);
            }
            let j = self.jacobian_newton(&x);
            let dx = j
                .lu()
                .solve(&DVector::from_vec(r))
                .ok_or_else(|| Error::SingularJacobian(x.clone()))?;
            for i in 0..n {
                x[i] -= dx[i];
            }
            self.domain.reduce_in_place(&mut x);
            if it + 1 == max_iter {
                return Err(Error::NoConvergence { iterations: max_iter, residual: res });
            }
        }
        Err(Error::NoConvergence { iterations: max_iter, residual: f64::INFINITY })
    }

    /// Jacobian for internal solvers: analytic if present, else one-sided at the
    /// domain edge so Newton steps never fail on boundary points.
    pub(crate) fn jacobian_newton(&self, x: &[f64]) -> DMatrix<f64> {
        if let Some(j) = &self.deriv {
            return j(x);
        }
        let h = self.default_step();
        if let Ok(j) = self.fd_jacobian(x, h) {
            return j;
        }
        let n = self.domain.dim();
        let m = self.codomain.dim();
        let f0 = (self.eval)(x);
        let mut jac = DMatrix::zeros(m, n);
        let mut xp = x.to_vec();
        for j in 0..n {
            let step = match self.domain.factor(j) {
                crate::space::Factor::Interval { hi, .. } if x[j] + h > hi => -h,
                _ => h,
            };
            xp[j] = x[j] + step;
            let fp = (self.eval)(&xp);
            xp[j] = x[j];
            for i in 0..m {
                jac[(i, j)] = self.codomain.factor(i).displacement(f0[i], fp[i]) / step;
            }
        }
        jac
    }
}

fn strip_inverse(mut m: SmoothMap) -> SmoothMap {
    m.meta.inverse = None;
    m
}

/// Max-norm operator norm (max absolute row sum).
pub fn inf_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Standard form on interleaved pairs `(a_1, b_1, a_2, b_2, ...)`.
pub fn omega(n: usize) -> DMatrix<f64> {
    let mut om = DMatrix::zeros(n, n);
    for k in 0..n / 2 {
        om[(2 * k, 2 * k + 1)] = 1.0;
        om[(2 * k + 1, 2 * k)] = -1.0;
    }
    om
}

/// `‖JᵀΩJ − Ω‖_∞` (entrywise max).
pub fn symplectic_residual(j: &DMatrix<f64>) -> f64 {
    let om = omega(j.nrows());
    (j.transpose() * &om * j - om).amax()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymplecticReport {
    pub max_residual: f64,
    pub pass: bool,
}

pub fn check_symplectic(map: &SmoothMap, samples: &[Vec<f64>], tol: f64) -> Result<SymplecticReport> {
    let n = map.domain().dim();
    if n % 2 != 0 {
        return Err(Error::OddDimension(n));
    }
    let mut worst = 0.0f64;
    for x in samples {
        let j = map.jacobian_at(x)?;
        worst = worst.max(symplectic_residual(&j));
    }
    Ok(SymplecticReport { max_residual: worst, pass: worst < tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn twist() -> SmoothMap {
        SmoothMap::endo("twist", StateSpace::annulus(0.0, 1.0), |x| vec![x[0], x[1] + x[0]])
    }

    #[test]
    fn twist_wraps_angle() {
        let y = twist().evaluate(&[0.5, 0.9]).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-15 && (y[1] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn affine_evaluation() {
        let m = SmoothMap::affine_1d(StateSpace::cube(1, 0.0, 1.0), 0.5, 0.0);
        assert_eq!(m.evaluate(&[0.8]).unwrap(), vec![0.4]);
        let id = SmoothMap::identity(StateSpace::cube(2, 0.0, 1.0));
        assert_eq!(id.evaluate(&[0.3, 0.7]).unwrap(), vec![0.3, 0.7]);
    }

    #[test]
    fn out_of_domain_rejected() {
        let m = SmoothMap::affine_1d(StateSpace::cube(1, 0.0, 1.0), 0.5, 0.0);
        assert!(matches!(m.evaluate(&[1.5]), Err(Error::PointOutsideDomain { .. })));
    }

    #[test]
    fn finite_difference_jacobians() {
        let lin = SmoothMap::endo("lin", StateSpace::cube(2, -1.0, 1.0), |x| vec![2.0 * x[0], 0.5 * x[1]]);
        let j = lin.jacobian(&[0.1, 0.2], 1e-5).unwrap();
        assert!((j.clone() - DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5])).amax() < 1e-9);
        let j = twist().jacobian(&[0.5, 0.5], 1e-5).unwrap();
        assert!((j - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0])).amax() < 1e-8);
    }

    #[test]
    fn shear_jacobian_matches_hand_derivative() {
        let eps = 0.1;
        let shear = SmoothMap::endo("shear", StateSpace::annulus(-1.0, 2.0), move |x| {
            vec![x[0] + eps * (2.0 * PI * x[1]).cos(), x[1]]
        });
        let j = shear.jacobian(&[0.3, 0.25], 1e-5).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, -eps * (2.0 * PI * 0.25).sin() * 2.0 * PI, 0.0, 1.0]);
        assert!((j - expect).amax() < 1e-6);
    }

    #[test]
    fn step_too_large_near_boundary() {
        let m = SmoothMap::endo("x", StateSpace::cube(1, 0.0, 1.0), |x| x.to_vec());
        assert!(matches!(m.fd_jacobian(&[0.0], 1e-3), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn symplectic_checks() {
        let pts = vec![vec![0.2, 0.3], vec![0.7, 0.9]];
        let r = check_symplectic(&twist(), &pts, 1e-10).unwrap();
        assert!(r.pass && r.max_residual < 1e-10);
        let dil = SmoothMap::endo("dil", StateSpace::annulus(0.0, 4.0), |x| vec![2.0 * x[0], x[1]]);
        let r = check_symplectic(&dil, &pts, 1e-8).unwrap();
        assert!(!r.pass && (r.max_residual - 1.0).abs() < 1e-6);
        let odd = SmoothMap::identity(StateSpace::cube(3, 0.0, 1.0));
        assert_eq!(check_symplectic(&odd, &[], 1e-8), Err(Error::OddDimension(3)));
    }

    #[test]
    fn compose_and_inverse() {
        let s = StateSpace::cube(1, -10.0, 10.0);
        let f = SmoothMap::affine_1d(s.clone(), 0.5, 0.3);
        let g = SmoothMap::affine_1d(s, 2.0, -1.0);
        let h = SmoothMap::compose(&f, &g);
        let y = h.evaluate(&[1.0]).unwrap();
        assert!((y[0] - 0.8).abs() < 1e-15);
        let back = h.inverse().unwrap().apply(&y);
        assert!((back[0] - 1.0).abs() < 1e-14);
        assert!((h.meta.lipschitz.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn newton_preimage() {
        let f = SmoothMap::endo("cube", StateSpace::cube(1, -2.0, 2.0), |x| vec![x[0] + x[0].powi(3)]);
        let x = f.preimage(&[2.0], &[0.5], 1e-13, 50).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
    }
}
