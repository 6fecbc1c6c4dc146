//! Horseshoe times fiber maps: the geometric blender model.
//!
//! Product coordinates are `[x, y, s…]` for a center-stable model and
//! `[x, y, s_1, u_1, …, s_n, u_n]` for a double model, so the interleaved
//! symplectic form pairs the base coordinates and each `(s_k, u_k)`.

use nalgebra::DMatrix;

use super::cones::{Cone, ConeField, ConeKind};
use super::horseshoe::HorseshoeBase;
use crate::error::{Error, Result};
use crate::ifs::Ifs;
use crate::map::SmoothMap;
use crate::perturb::perturb_map;
use crate::space::{Factor, Region, StateSpace};

/// Aperture of the default coordinate cones.
pub const DEFAULT_APERTURE: f64 = 0.5;
/// Tolerance for `φ^u ∘ φ^s = id` under the symplectic flag.
const PAIRING_TOL: f64 = 1e-12;

/// One fiber direction as an IFS of contractions with cached fixed points and,
/// when the covering holds, its certificate.
#[derive(Debug, Clone)]
pub struct Side {
    pub ifs: Ifs,
    pub covering_error: Option<Error>,
}

impl Side {
    fn build(gens: Vec<SmoothMap>, region: &Region) -> Result<Side> {
        let mut ifs = Ifs::new(gens, region.clone())?;
        ifs.compute_fixed_points(1e-13)?;
        let step = region.diameter() / 256.0;
        let covering_error = ifs.certify(step).err();
        Ok(Side { ifs, covering_error })
    }

    pub fn certified(&self) -> bool {
        self.ifs.certificate().is_some()
    }

    pub fn fixed_points(&self) -> Vec<Vec<f64>> {
        self.ifs.fixed_point_coords()
    }
}

#[derive(Debug, Clone)]
pub struct GeometricBlenderModel {
    pub base: HorseshoeBase,
    pub fiber_cs: Vec<SmoothMap>,
    pub fiber_cu: Option<Vec<SmoothMap>>,
    pub region_cs: Region,
    pub region_cu: Option<Region>,
    pub symplectic: bool,
    pub cones: ConeField,
    /// `φ^s_i` on `𝒟`.
    pub cs: Side,
    /// `(φ^u_i)^{-1}` on `𝒟₂`.
    pub cu: Option<Side>,
    map: SmoothMap,
}

fn bounds(g: &SmoothMap, i: usize) -> Result<(f64, f64)> {
    match (g.meta.contraction_bound, g.meta.lipschitz) {
        (Some(l), Some(k)) => Ok((l, k)),
        _ => Err(Error::NoMetadata(i)),
    }
}

/// Builds the product model and validates its invariants. With `symplectic`
/// and no `fibers_cu`, the center-unstable fibers are the inverses of the
/// center-stable ones.
pub fn build_geometric_model(
    base: HorseshoeBase,
    fibers_cs: Vec<SmoothMap>,
    fibers_cu: Option<Vec<SmoothMap>>,
    region: Region,
    region_cu: Option<Region>,
    symplectic: bool,
) -> Result<GeometricBlenderModel> {
    let k = base.symbols();
    if fibers_cs.len() != k {
        return Err(Error::Precondition(format!("need {k} center-stable fiber maps, got {}", fibers_cs.len())));
    }
    let fiber_space = fibers_cs[0].domain().clone();
    if region.dim() != fiber_space.dim() {
        return Err(Error::Precondition("fiber region dimension does not match the fiber maps".into()));
    }
    for (i, g) in fibers_cs.iter().enumerate() {
        let (lambda, lip) = bounds(g, i)?;
        if lip >= 1.0 {
            return Err(Error::Precondition(format!("center-stable fiber {i} is not a contraction (K = {lip})")));
        }
        if base.mu_ss >= lambda {
            return Err(Error::DominationViolated { mu_ss: base.mu_ss, lambda });
        }
    }
    let fibers_cu = if symplectic {
        let inverses = fibers_cs
            .iter()
            .map(|g| g.inverse().ok_or_else(|| Error::NotInvertible(g.name().to_string())))
            .collect::<Result<Vec<_>>>()?;
        match fibers_cu {
            None => Some(inverses),
            Some(given) => {
                check_pairing(&fibers_cs, &given, &region)?;
                Some(given)
            }
        }
    } else {
        fibers_cu
    };
    let region_cu = match (&fibers_cu, region_cu) {
        (Some(_), Some(r)) => Some(r),
        (Some(_), None) => Some(region.clone()),
        (None, _) => None,
    };
    let mut cu_side = None;
    if let (Some(cu), Some(r2)) = (&fibers_cu, &region_cu) {
        if cu.len() != k {
            return Err(Error::Precondition(format!("need {k} center-unstable fiber maps, got {}", cu.len())));
        }
        let mut inv = Vec::with_capacity(k);
        for (i, g) in cu.iter().enumerate() {
            let h = g.inverse().ok_or_else(|| Error::NotInvertible(g.name().to_string()))?;
            let (lambda, lip) = bounds(&h, i)?;
            if lip >= 1.0 {
                return Err(Error::Precondition(format!("center-unstable fiber {i} is not expanding")));
            }
            // The strong expansion must beat the fiber expansion 1/λ.
            if 1.0 / base.mu_uu >= lambda {
                return Err(Error::DominationViolated { mu_ss: 1.0 / base.mu_uu, lambda });
            }
            inv.push(h);
        }
        cu_side = Some(Side::build(inv, r2)?);
    }
    let cs_side = Side::build(fibers_cs.clone(), &region)?;
    let n = fiber_space.dim();
    let cones = default_cones(n, fibers_cu.is_some(), DEFAULT_APERTURE);
    let map = product_map(&base, &fibers_cs, fibers_cu.as_deref());
    Ok(GeometricBlenderModel {
        base,
        fiber_cs: fibers_cs,
        fiber_cu: fibers_cu,
        region_cs: region,
        region_cu,
        symplectic,
        cones,
        cs: cs_side,
        cu: cu_side,
        map,
    })
}

fn check_pairing(cs: &[SmoothMap], cu: &[SmoothMap], region: &Region) -> Result<()> {
    let (pts, _) = region.grid(region.diameter() / 8.0);
    for (i, (s, u)) in cs.iter().zip(cu).enumerate() {
        for p in &pts {
            let back = u.apply(&s.apply(p));
            let err = back.iter().zip(p).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            if err > PAIRING_TOL {
                return Err(Error::Precondition(format!("fiber pair {i} does not compose to the identity ({err:e})")));
            }
        }
    }
    Ok(())
}

/// Coordinate index of the `k`-th center-stable and center-unstable fiber coordinate.
pub fn s_index(k: usize, double: bool) -> usize {
    if double {
        2 + 2 * k
    } else {
        2 + k
    }
}

pub fn u_index(k: usize) -> usize {
    3 + 2 * k
}

/// Cones around coordinate axes: `uu` on `x`, `u` on `x` and the `u`-fibers,
/// `ss` on `y`, `s` on `y` and the `s`-fibers.
pub fn default_cones(n: usize, double: bool, aperture: f64) -> ConeField {
    let s_axes: Vec<usize> = std::iter::once(1).chain((0..n).map(|k| s_index(k, double))).collect();
    let u_axes: Vec<usize> = if double {
        std::iter::once(0).chain((0..n).map(u_index)).collect()
    } else {
        vec![0]
    };
    ConeField {
        cones: vec![
            Cone::new("ss", ConeKind::Stable, vec![1], aperture),
            Cone::new("s", ConeKind::Stable, s_axes, aperture),
            Cone::new("u", ConeKind::Unstable, u_axes, aperture),
            Cone::new("uu", ConeKind::Unstable, vec![0], aperture),
        ],
    }
}

fn product_space(base: &HorseshoeBase, cs: &SmoothMap, cu: Option<&SmoothMap>) -> StateSpace {
    let mut f: Vec<Factor> = base.space().factors().to_vec();
    let sf = cs.domain().factors();
    match cu {
        None => f.extend_from_slice(sf),
        Some(u) => {
            for (a, b) in sf.iter().zip(u.domain().factors()) {
                f.push(*a);
                f.push(*b);
            }
        }
    }
    StateSpace::new(f)
}

fn split(p: &[f64], n: usize, double: bool) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let b = p[..2].to_vec();
    let s = (0..n).map(|k| p[s_index(k, double)]).collect();
    let u = if double { (0..n).map(|k| p[u_index(k)]).collect() } else { Vec::new() };
    (b, s, u)
}

fn join(b: &[f64], s: &[f64], u: &[f64]) -> Vec<f64> {
    let double = !u.is_empty();
    let mut out = b.to_vec();
    if double {
        for (a, c) in s.iter().zip(u) {
            out.push(*a);
            out.push(*c);
        }
    } else {
        out.extend_from_slice(s);
    }
    out
}

fn product_map(base: &HorseshoeBase, cs: &[SmoothMap], cu: Option<&[SmoothMap]>) -> SmoothMap {
    let space = product_space(base, &cs[0], cu.map(|u| &u[0]));
    let n = cs[0].domain().dim();
    let double = cu.is_some();
    let cu_vec: Vec<SmoothMap> = cu.map(|u| u.to_vec()).unwrap_or_default();

    let (b1, s1, u1) = (base.clone(), cs.to_vec(), cu_vec.clone());
    let eval = move |p: &[f64]| {
        let (b, s, u) = split(p, n, double);
        let i = b1.nearest_label(&b);
        let fb = b1.apply(&b);
        let fs = s1[i].apply(&s);
        let fu = if double { u1[i].apply(&u) } else { Vec::new() };
        join(&fb, &fs, &fu)
    };
    let (b2, s2, u2) = (base.clone(), cs.to_vec(), cu_vec.clone());
    let dim = space.dim();
    let jac = move |p: &[f64]| {
        let (b, s, u) = split(p, n, double);
        let i = b2.nearest_label(&b);
        let mut j = DMatrix::zeros(dim, dim);
        j[(0, 0)] = b2.mu_uu;
        j[(1, 1)] = b2.mu_ss;
        let js = s2[i].jacobian_newton(&s);
        let ju = if double { Some(u2[i].jacobian_newton(&u)) } else { None };
        for r in 0..n {
            for c in 0..n {
                j[(s_index(r, double), s_index(c, double))] = js[(r, c)];
                if let Some(ju) = &ju {
                    j[(u_index(r), u_index(c))] = ju[(r, c)];
                }
            }
        }
        j
    };
    let base_symp = base.map().meta.symplectic == Some(true);
    let fibers_symp = double && n == 1 || cs.iter().chain(cu_vec.iter()).all(|g| g.meta.symplectic == Some(true));
    let mut map = SmoothMap::endo("F", space.clone(), eval).with_jacobian(jac);
    if dim % 2 == 0 {
        map = map.with_symplectic(base_symp && fibers_symp && double);
    }

    let cs_inv: Option<Vec<SmoothMap>> = cs.iter().map(|g| g.inverse()).collect();
    let cu_inv: Option<Vec<SmoothMap>> = if double { cu_vec.iter().map(|g| g.inverse()).collect() } else { Some(Vec::new()) };
    if let (Some(si), Some(ui)) = (cs_inv, cu_inv) {
        let b3 = base.clone();
        let inv = SmoothMap::endo("F⁻¹", space, move |p: &[f64]| {
            let (b, s, u) = split(p, n, double);
            let j = b3.image_label(&b);
            let pb = b3.apply_inverse(&b);
            let ps = si[j].apply(&s);
            let pu = if double { ui[j].apply(&u) } else { Vec::new() };
            join(&pb, &ps, &pu)
        });
        map = map.with_inverse(inv);
    }
    map
}

impl GeometricBlenderModel {
    pub fn map(&self) -> &SmoothMap {
        &self.map
    }

    pub fn is_double(&self) -> bool {
        self.fiber_cu.is_some()
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_cs[0].domain().dim()
    }

    pub fn split(&self, p: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        split(p, self.fiber_dim(), self.is_double())
    }

    pub fn join(&self, b: &[f64], s: &[f64], u: &[f64]) -> Vec<f64> {
        join(b, s, u)
    }

    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        self.map.apply(p)
    }

    pub fn apply_inverse(&self, p: &[f64]) -> Result<Vec<f64>> {
        let inv = self.map.inverse().ok_or_else(|| Error::NotInvertible("F".into()))?;
        Ok(inv.apply(p))
    }

    /// Same model with replaced fiber maps, re-validated.
    pub fn with_fibers(&self, cs: Vec<SmoothMap>, cu: Option<Vec<SmoothMap>>) -> Result<GeometricBlenderModel> {
        let cu = if self.symplectic { None } else { cu };
        build_geometric_model(self.base.clone(), cs, cu, self.region_cs.clone(), self.region_cu.clone(), self.symplectic)
    }

    /// Fiber maps perturbed by [`perturb_map`] with per-map seeds derived from
    /// `seed`; with the symplectic flag the center-unstable maps stay the inverses.
    pub fn perturbed(&self, eta: f64, seed: u64) -> Result<GeometricBlenderModel> {
        let k = self.base.symbols() as u64;
        let cs: Vec<SmoothMap> = self
            .fiber_cs
            .iter()
            .enumerate()
            .map(|(i, g)| perturb_map(g, eta, seed.wrapping_mul(1000).wrapping_add(i as u64)))
            .collect();
        let cu = self.fiber_cu.as_ref().map(|cu| {
            cu.iter()
                .enumerate()
                .map(|(i, g)| {
                    let s = seed.wrapping_mul(1000).wrapping_add(k + i as u64);
                    // Perturb the contracting inverse so the metadata stays usable.
                    let inv = g.inverse().expect("validated at construction");
                    let p = perturb_map(&inv, eta, s);
                    p.inverse().expect("perturbation keeps the inverse")
                })
                .collect()
        });
        self.with_fibers(cs, cu)
    }

    /// Sample points of `ℬ`: rectangle centers crossed with fiber grid points.
    pub fn region_samples(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        let fiber_pts = |r: &Region| r.grid(r.diameter() / per_axis.max(1) as f64).0;
        let s_pts = fiber_pts(&self.region_cs);
        let u_pts = self.region_cu.as_ref().map(fiber_pts).unwrap_or_else(|| vec![Vec::new()]);
        for i in 0..self.base.symbols() {
            let b = self.base.rectangle(i).center();
            for s in &s_pts {
                for u in &u_pts {
                    out.push(join(&b, s, u));
                }
            }
        }
        out
    }
}
