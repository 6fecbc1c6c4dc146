//! Compactly supported Hamiltonian maps that translate a box.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::map::SmoothMap;
use crate::space::{Region, StateSpace};

/// Midpoint steps for the collar flow.
const COLLAR_STEPS: usize = 48;

/// `35t⁴ − 84t⁵ + 70t⁶ − 20t⁷`: 0 at 0, 1 at 1, three vanishing derivatives at both ends.
pub(crate) fn smoothstep7(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    if t >= 1.0 {
        return (1.0, 0.0);
    }
    let t3 = t * t * t;
    let v = t3 * t * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)));
    let d = 140.0 * t3 * (1.0 - t).powi(3);
    (v, d)
}

/// Product cut-off equal to 1 on `plateau`, 0 outside `outer`.
#[derive(Debug, Clone)]
pub(crate) struct Cutoff {
    pub(crate) plateau: Region,
    pub(crate) outer: Region,
}

impl Cutoff {
    pub(crate) fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let n = x.len();
        let mut vals = vec![1.0; n];
        let mut ders = vec![0.0; n];
        for k in 0..n {
            let (p_lo, p_hi) = (self.plateau.lo[k], self.plateau.hi[k]);
            let (t, dt) = if x[k] < p_lo {
                let w = p_lo - self.outer.lo[k];
                ((p_lo - x[k]) / w, -1.0 / w)
            } else if x[k] > p_hi {
                let w = self.outer.hi[k] - p_hi;
                ((x[k] - p_hi) / w, 1.0 / w)
            } else {
                (0.0, 0.0)
            };
            let (s, ds) = smoothstep7(t);
            vals[k] = 1.0 - s;
            ders[k] = -ds * dt;
        }
        let rho: f64 = vals.iter().product();
        let grad = (0..n)
            .map(|k| {
                if ders[k] == 0.0 {
                    0.0
                } else {
                    ders[k] * (0..n).filter(|&j| j != k).map(|j| vals[j]).product::<f64>()
                }
            })
            .collect();
        (rho, grad)
    }
}

/// Interleaves `(u, v)` into `(u_1, v_1, u_2, v_2, ...)`.
fn interleave(u: &[f64], v: &[f64]) -> Vec<f64> {
    u.iter().zip(v).flat_map(|(a, b)| [*a, *b]).collect()
}

fn shifted(r: &Region, w: &[f64]) -> Region {
    Region::new(r.lo.iter().zip(w).map(|(a, b)| a + b).collect(), r.hi.iter().zip(w).map(|(a, b)| a + b).collect())
}

fn hull(a: &Region, b: &Region) -> Region {
    Region::new(
        a.lo.iter().zip(&b.lo).map(|(x, y)| x.min(*y)).collect(),
        a.hi.iter().zip(&b.hi).map(|(x, y)| x.max(*y)).collect(),
    )
}

fn strictly_inside(inner: &Region, outer: &Region) -> bool {
    inner.lo.iter().zip(&outer.lo).all(|(a, b)| a > b) && inner.hi.iter().zip(&outer.hi).all(|(a, b)| a < b)
}

/// `ρ(y) (a·v − b·u)` with `ρ` the cut-off between `plateau` and `outer`; its
/// time-`t` flow translates `inner` by `t (u, v)` while the moved box stays in the plateau.
#[derive(Clone)]
pub struct BumpTranslation {
    pub w: Vec<f64>,
    pub inner: Region,
    pub outer: Region,
    cut: Cutoff,
    ham: Hamiltonian,
    /// Largest `|t|` for which `inner ± t w` stays in the plateau.
    t_exact: f64,
}

impl std::fmt::Debug for BumpTranslation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BumpTranslation").field("w", &self.w).field("inner", &self.inner).field("outer", &self.outer).finish()
    }
}

fn linear_part(w: &[f64], x: &[f64]) -> f64 {
    (0..w.len() / 2).map(|k| x[2 * k] * w[2 * k + 1] - x[2 * k + 1] * w[2 * k]).sum()
}

fn bump_gradient(cut: Cutoff, w: Vec<f64>) -> impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static {
    move |x: &[f64]| {
        let (rho, drho) = cut.eval(x);
        let h = linear_part(&w, x);
        let mut g: Vec<f64> = drho.iter().map(|d| d * h).collect();
        for k in 0..w.len() / 2 {
            g[2 * k] += rho * w[2 * k + 1];
            g[2 * k + 1] -= rho * w[2 * k];
        }
        g
    }
}

impl BumpTranslation {
    pub fn new(u: &[f64], v: &[f64], inner: &Region, plateau: &Region, outer: &Region) -> Result<BumpTranslation> {
        let n = 2 * u.len();
        if u.len() != v.len() || inner.dim() != n || plateau.dim() != n || outer.dim() != n {
            return Err(Error::Precondition("translation and regions need matching dimensions".into()));
        }
        if !strictly_inside(plateau, outer) || inner.lo.iter().zip(&plateau.lo).any(|(a, b)| a < b) || inner.hi.iter().zip(&plateau.hi).any(|(a, b)| a > b) {
            return Err(Error::Precondition("need inner ⊂ plateau ⊂⊂ outer".into()));
        }
        let w = interleave(u, v);
        let mut t_exact = f64::INFINITY;
        for k in 0..n {
            if w[k] != 0.0 {
                let room = (inner.lo[k] - plateau.lo[k]).min(plateau.hi[k] - inner.hi[k]);
                t_exact = t_exact.min(room / w[k].abs());
            }
        }
        let cut = Cutoff { plateau: plateau.clone(), outer: outer.clone() };
        let out2 = outer.clone();
        let ham = Hamiltonian::new(n, bump_gradient(cut.clone(), w.clone())).frozen_on(move |x| !out2.contains_open(x));
        Ok(BumpTranslation { w, inner: inner.clone(), outer: outer.clone(), cut, ham, t_exact })
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.cut.eval(y).0 * linear_part(&self.w, y)
    }

    /// Time-`t` map; exact translation on `inner` for `|t| ≤ t_exact`, identity off `outer`.
    pub fn flow(&self, y: &[f64], t: f64) -> Vec<f64> {
        if t == 0.0 || !self.outer.contains_open(y) {
            return y.to_vec();
        }
        if t.abs() <= self.t_exact && self.inner.contains(y) {
            return y.iter().zip(&self.w).map(|(a, b)| a + t * b).collect();
        }
        self.ham.integrate(y, t, COLLAR_STEPS).unwrap_or_else(|_| vec![f64::NAN; y.len()])
    }
}

/// One direction of the bump map: exact translation by `w` on `inner`, identity
/// off `outer`, the time-`t` flow of the cut-off `a·v − b·u` in between.
fn one_way(name: String, space: StateSpace, w: Vec<f64>, inner: Region, outer: Region, ham: Hamiltonian, t: f64) -> SmoothMap {
    let n = w.len();
    let (w1, in1, out1, h1) = (w.clone(), inner.clone(), outer.clone(), ham.clone());
    let eval = move |x: &[f64]| -> Vec<f64> {
        if in1.contains(x) {
            x.iter().zip(&w1).map(|(a, b)| a + b).collect()
        } else if !out1.contains_open(x) {
            x.to_vec()
        } else {
            h1.integrate(x, t, COLLAR_STEPS).unwrap_or_else(|_| vec![f64::NAN; n])
        }
    };
    let jac = move |x: &[f64]| -> DMatrix<f64> {
        if inner.contains(x) || !outer.contains_open(x) {
            DMatrix::identity(n, n)
        } else {
            ham.integrate_with_jacobian(x, t, COLLAR_STEPS)
                .map(|(_, j)| j)
                .unwrap_or_else(|_| DMatrix::from_element(n, n, f64::NAN))
        }
    };
    SmoothMap::endo(name, space, eval).with_jacobian(jac).with_symplectic(true)
}

/// Symplectic map equal to translation by `(u, v)` on `inner` and to the identity
/// outside `outer`, in coordinates `(a_1, b_1, a_2, b_2, ...)`.
///
/// The cut-off is 1 on the box hull of `inner` and `inner + (u, v)`, so orbits
/// starting in `inner` see the constant field for the whole unit time.
pub fn hamiltonian_bump_translation(u: &[f64], v: &[f64], inner: &Region, outer: &Region) -> Result<SmoothMap> {
    let n = 2 * u.len();
    if u.len() != v.len() || inner.dim() != n || outer.dim() != n {
        return Err(Error::Precondition("translation and regions need matching dimensions".into()));
    }
    if !strictly_inside(inner, outer) {
        return Err(Error::Precondition("inner region must lie strictly inside the outer one".into()));
    }
    let w = interleave(u, v);
    let space = StateSpace::new(
        outer.lo.iter().zip(&outer.hi).map(|(a, b)| crate::space::Factor::interval(*a - 1.0, *b + 1.0)).collect(),
    );
    if w.iter().all(|c| *c == 0.0) {
        return Ok(SmoothMap::identity(space).renamed("bump[0]"));
    }
    let moved = shifted(inner, &w);
    let plateau = hull(inner, &moved);
    let norm = w.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if !strictly_inside(&plateau, outer) {
        return Err(Error::VectorTooLarge { norm });
    }
    let grad = bump_gradient(Cutoff { plateau, outer: outer.clone() }, w.clone());
    let out2 = outer.clone();
    let ham = Hamiltonian::new(n, grad).frozen_on(move |x| !out2.contains_open(x));
    let neg: Vec<f64> = w.iter().map(|c| -c).collect();
    let fwd = one_way(format!("bump{w:?}"), space.clone(), w.clone(), inner.clone(), outer.clone(), ham.clone(), 1.0);
    let inv = one_way(format!("bump{w:?}⁻¹"), space, neg, moved, outer.clone(), ham, -1.0);
    Ok(fwd.with_inverse(inv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::check_symplectic;

    #[test]
    fn smoothstep_ends() {
        assert_eq!(smoothstep7(0.0), (0.0, 0.0));
        assert_eq!(smoothstep7(1.0), (1.0, 0.0));
        let (v, _) = smoothstep7(0.5);
        assert!((v - 0.5).abs() < 1e-15);
        let h = 1e-6;
        let fd = (smoothstep7(0.3 + h).0 - smoothstep7(0.3 - h).0) / (2.0 * h);
        assert!((fd - smoothstep7(0.3).1).abs() < 1e-8);
    }

    #[test]
    fn translation_inside_identity_outside() {
        let inner = Region::cube(2, -0.1, 0.1);
        let outer = Region::cube(2, -0.5, 0.5);
        let f = hamiltonian_bump_translation(&[0.05], &[-0.02], &inner, &outer).unwrap();
        assert_eq!(f.apply(&[0.0, 0.0]), vec![0.05, -0.02]);
        assert_eq!(f.apply(&[0.6, 0.1]), vec![0.6, 0.1]);
        let collar = vec![vec![0.3, 0.05], vec![-0.2, 0.35], vec![0.15, -0.12]];
        let rep = check_symplectic(&f, &collar, 1e-8).unwrap();
        assert!(rep.pass, "{rep:?}");
        let g = f.inverse().unwrap();
        for x in &collar {
            let y = g.apply(&f.apply(x));
            assert!((y[0] - x[0]).abs() < 1e-9 && (y[1] - x[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn too_large_and_zero() {
        let inner = Region::cube(2, -0.1, 0.1);
        let outer = Region::cube(2, -0.2, 0.2);
        assert!(matches!(
            hamiltonian_bump_translation(&[0.15], &[0.0], &inner, &outer),
            Err(Error::VectorTooLarge { .. })
        ));
        let id = hamiltonian_bump_translation(&[0.0], &[0.0], &inner, &outer).unwrap();
        assert_eq!(id.apply(&[0.05, 0.01]), vec![0.05, 0.01]);
    }
}
