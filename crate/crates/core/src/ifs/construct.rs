//! Translated copies of one contraction whose images cover a ball and whose
//! fixed points are dense in it.

use serde::Serialize;

use super::Ifs;
use crate::error::{Error, Result};
use crate::map::SmoothMap;
use crate::space::Region;

#[derive(Debug, Clone)]
pub struct TranslationFamily {
    /// `{φ, φ + c_1, …, φ + c_k}` with `k = 2 k₁`.
    pub ifs: Ifs,
    pub k1: usize,
    pub per_axis: usize,
    /// Ball-covering constant realized by the grid: `k₁ (λ/2)^n`.
    pub constant: f64,
    pub lambda: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilySummary {
    pub n: usize,
    pub lambda: f64,
    pub eps: f64,
    pub k1: usize,
    pub k: usize,
    pub constant: f64,
}

impl TranslationFamily {
    pub fn k(&self) -> usize {
        2 * self.k1
    }

    /// `C · 2^{n+1} · λ^{-n}`, which equals `k` by construction.
    pub fn formula_k(&self) -> f64 {
        let n = self.ifs.space().dim() as i32;
        self.constant * 2f64.powi(n + 1) * self.lambda.powi(-n)
    }

    pub fn summary(&self) -> FamilySummary {
        FamilySummary {
            n: self.ifs.space().dim(),
            lambda: self.lambda,
            eps: self.eps,
            k1: self.k1,
            k: self.k(),
            constant: self.constant,
        }
    }
}

/// `x ↦ φ(x) + v`, keeping derivative, bounds and (shifted) inverse.
pub fn translated(phi: &SmoothMap, v: Vec<f64>) -> SmoothMap {
    let f = phi.clone();
    let shift = v.clone();
    let mut g = SmoothMap::endo(format!("{}+c", phi.name()), phi.domain().clone(), move |x| {
        let mut y = f.apply(x);
        for (a, b) in y.iter_mut().zip(&shift) {
            *a += b;
        }
        y
    });
    if phi.has_analytic_jacobian() {
        let f = phi.clone();
        g = g.with_jacobian(move |x| f.jacobian_at(x).expect("jacobian of translated map"));
    }
    g.meta.contraction_bound = phi.meta.contraction_bound;
    g.meta.lipschitz = phi.meta.lipschitz;
    g.meta.symplectic = phi.meta.symplectic;
    if let Some(inv) = phi.inverse() {
        let inv_map = SmoothMap::endo(format!("({}+c)⁻¹", phi.name()), phi.domain().clone(), move |y| {
            let shifted: Vec<f64> = y.iter().zip(&v).map(|(a, b)| a - b).collect();
            inv.apply(&shifted)
        });
        g = g.with_inverse(inv_map);
    }
    g
}

/// Greedy sweep count of max-metric balls of radius `r` covering `[-1, 1]^n`,
/// scaled by `r^n`.
pub fn covering_constant(n: usize, r: f64) -> f64 {
    assert!(r > 0.0 && r < 1.0);
    let mut per_axis = 0usize;
    let mut covered = -1.0;
    while covered < 1.0 {
        per_axis += 1;
        covered += 2.0 * r;
    }
    (per_axis as f64 * r).powi(n as i32)
}

/// Builds `{φ, φ + c_1, …, φ + c_{2k₁}}` on the region `B_ε(0)`.
///
/// The first `k₁` translations are `ε t` for `t` on a cell-centered grid of
/// spacing at most `2λ/7` in the unit cube, so every cell of the ball lies
/// well inside some image. The second `k₁` are `(id − φ)(z)` for `z = ε t` on
/// the same grid, which makes `z` the fixed point of `φ + c`.
pub fn construct_translations(phi: &SmoothMap, lambda: f64, eps: f64) -> Result<TranslationFamily> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::LambdaOutOfRange(lambda));
    }
    if eps <= 0.0 {
        return Err(Error::Precondition(format!("ε must be positive, got {eps}")));
    }
    let n = phi.domain().dim();
    let lip = phi.meta.lipschitz.ok_or(Error::NoMetadata(0))?;
    let per_axis = (7.0 / lambda).ceil() as usize;
    let k1 = per_axis.pow(n as u32);
    let region = Region::cube(n, -eps, eps);
    if !phi.domain().contains(&region.lo) || !phi.domain().contains(&region.hi) {
        return Err(Error::DomainOverflow(eps));
    }

    let grid_point = |mut idx: usize| -> Vec<f64> {
        let mut t = vec![0.0; n];
        for slot in t.iter_mut().rev() {
            let j = idx % per_axis;
            idx /= per_axis;
            *slot = eps * (-1.0 + (2 * j + 1) as f64 / per_axis as f64);
        }
        t
    };

    let mut base = phi.clone();
    base.meta.contraction_bound = Some(lambda);
    let mut gens = vec![base.clone()];
    for i in 0..k1 {
        gens.push(translated(&base, grid_point(i)).renamed(format!("cover{i}")));
    }
    for i in 0..k1 {
        let z = grid_point(i);
        let fz = phi.apply(&z);
        let c: Vec<f64> = z.iter().zip(&fz).map(|(a, b)| a - b).collect();
        gens.push(translated(&base, c).renamed(format!("seed{i}")));
    }

    // Images must stay inside φ's domain: check the corners of each image box.
    let reach = eps * (1.0 + lip) + 1e-12;
    for g in &gens {
        let c0 = g.apply(&vec![0.0; n]);
        let lo: Vec<f64> = c0.iter().map(|v| v - lip * eps).collect();
        let hi: Vec<f64> = c0.iter().map(|v| v + lip * eps).collect();
        if !phi.domain().contains(&lo) || !phi.domain().contains(&hi) {
            return Err(Error::DomainOverflow(reach));
        }
    }

    let mut ifs = Ifs::new(gens, region)?;
    ifs.compute_fixed_points(1e-13)?;
    let constant = k1 as f64 * (lambda / 2.0).powi(n as i32);
    Ok(TranslationFamily { ifs, k1, per_axis, constant, lambda, eps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::{verify_covering, verify_well_distributed};
    use crate::space::StateSpace;

    #[test]
    fn rejects_bad_lambda() {
        let phi = SmoothMap::affine_1d(StateSpace::cube(1, -2.0, 2.0), 0.5, 0.0);
        assert_eq!(construct_translations(&phi, 1.2, 0.5).unwrap_err(), Error::LambdaOutOfRange(1.2));
        assert_eq!(construct_translations(&phi, 0.0, 0.5).unwrap_err(), Error::LambdaOutOfRange(0.0));
    }

    #[test]
    fn domain_overflow_for_large_eps() {
        let phi = SmoothMap::affine_1d(StateSpace::cube(1, -1.0, 1.0), 0.5, 0.0);
        assert!(matches!(construct_translations(&phi, 0.5, 0.9), Err(Error::DomainOverflow(_))));
    }

    #[test]
    fn one_dimensional_half_contraction() {
        let phi = SmoothMap::affine_1d(StateSpace::cube(1, -2.0, 2.0), 0.5, 0.0);
        let fam = construct_translations(&phi, 0.5, 0.5).unwrap();
        assert_eq!(fam.ifs.len(), 2 * fam.k1 + 1);
        assert!((fam.formula_k() - fam.k() as f64).abs() < 1e-9);
        let cert = verify_covering(&fam.ifs, fam.ifs.region(), 0.5 * 0.5 / 8.0).unwrap();
        assert!(cert.robust);
        assert!(verify_well_distributed(&fam.ifs, fam.ifs.region(), cert.d_value).pass);
    }

    #[test]
    fn covering_constant_sweep() {
        assert!((covering_constant(1, 0.25) - 1.0).abs() < 1e-12);
        assert!((covering_constant(2, 0.3) - 1.44).abs() < 1e-12);
    }
}
