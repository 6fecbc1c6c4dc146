//! Coordinate cone fields and their invariance under the derivative.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::map::SmoothMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    /// Mapped into itself by `DF`.
    Unstable,
    /// Mapped into itself by `DF^{-1}`.
    Stable,
}

/// `{v : |v_⊥| ≤ aperture · |v_E|}` in the max-norm, with `E` spanned by `axes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub name: String,
    pub kind: ConeKind,
    pub axes: Vec<usize>,
    pub aperture: f64,
}

impl Cone {
    pub fn new(name: impl Into<String>, kind: ConeKind, axes: Vec<usize>, aperture: f64) -> Self {
        Cone { name: name.into(), kind, axes, aperture }
    }

    /// `|v_⊥| / |v_E|`.
    pub fn ratio(&self, v: &[f64]) -> f64 {
        let (mut inside, mut outside) = (0.0f64, 0.0f64);
        for (k, x) in v.iter().enumerate() {
            if self.axes.contains(&k) {
                inside = inside.max(x.abs());
            } else {
                outside = outside.max(x.abs());
            }
        }
        if inside == 0.0 {
            f64::INFINITY
        } else {
            outside / inside
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeField {
    pub cones: Vec<Cone>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeWitness {
    pub cone: String,
    pub sample: usize,
    pub ray: Vec<f64>,
    pub image_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeReport {
    pub pass: bool,
    /// Smallest `aperture − image ratio` over all tested rays.
    pub min_margin: f64,
    pub rays_tested: usize,
    pub witness: Option<ConeWitness>,
}

/// Boundary rays of `cone` in dimension `n`: each axis of `E` paired with each
/// signed complementary axis at full aperture, plus seeded random boundary rays.
fn boundary_rays(cone: &Cone, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let perp: Vec<usize> = (0..n).filter(|k| !cone.axes.contains(k)).collect();
    let a = cone.aperture;
    let mut rays = Vec::new();
    for &e in &cone.axes {
        for &p in &perp {
            for s in [-1.0, 1.0] {
                let mut v = vec![0.0; n];
                v[e] = 1.0;
                v[p] = s * a;
                rays.push(v);
            }
        }
    }
    for _ in 0..16 {
        let mut v = vec![0.0; n];
        for &e in &cone.axes {
            v[e] = rng.random_range(-1.0..1.0);
        }
        let lead = cone.axes[rng.random_range(0..cone.axes.len())];
        v[lead] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        if perp.is_empty() {
            rays.push(v);
            continue;
        }
        for &p in &perp {
            v[p] = a * rng.random_range(-1.0..1.0);
        }
        let hit = perp[rng.random_range(0..perp.len())];
        v[hit] = a * if rng.random::<bool>() { 1.0 } else { -1.0 };
        rays.push(v);
    }
    rays
}

/// Pushes boundary rays of each cone through `DF` (unstable kind) or `DF^{-1}`
/// (stable kind) at every sample and checks they land strictly inside.
pub fn verify_cone_invariance(map: &SmoothMap, cones: &ConeField, samples: &[Vec<f64>]) -> ConeReport {
    let n = map.domain().dim();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0c0e);
    let mut min_margin = f64::INFINITY;
    let mut rays_tested = 0;
    let mut witness: Option<ConeWitness> = None;
    let mut worst = f64::INFINITY;
    for (si, x) in samples.iter().enumerate() {
        let j = map.jacobian_newton(x);
        let jinv = j.clone().try_inverse();
        for cone in &cones.cones {
            let m: Option<&DMatrix<f64>> = match cone.kind {
                ConeKind::Unstable => Some(&j),
                ConeKind::Stable => jinv.as_ref(),
            };
            for ray in boundary_rays(cone, n, &mut rng) {
                rays_tested += 1;
                let ratio = match m {
                    Some(m) => cone.ratio((m * DVector::from_column_slice(&ray)).as_slice()),
                    None => f64::INFINITY,
                };
                let margin = cone.aperture - ratio;
                min_margin = min_margin.min(margin);
                if margin <= 0.0 && margin < worst {
                    worst = margin;
                    witness = Some(ConeWitness { cone: cone.name.clone(), sample: si, ray, image_ratio: ratio });
                }
            }
        }
    }
    ConeReport { pass: witness.is_none() && rays_tested > 0, min_margin, rays_tested, witness }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::StateSpace;

    #[test]
    fn equal_rates_are_not_strict() {
        let f = SmoothMap::diagonal(StateSpace::cube(2, -1.0, 1.0), &[2.0, 2.0]);
        let field = ConeField { cones: vec![Cone::new("uu", ConeKind::Unstable, vec![0], 1.5)] };
        let rep = verify_cone_invariance(&f, &field, &[vec![0.0, 0.0]]);
        assert!(!rep.pass);
        assert_eq!(rep.witness.unwrap().image_ratio, 1.5);
    }

    #[test]
    fn dominated_rates_pass() {
        let f = SmoothMap::diagonal(StateSpace::cube(2, -1.0, 1.0), &[3.0, 0.5]);
        let field = ConeField {
            cones: vec![
                Cone::new("u", ConeKind::Unstable, vec![0], 0.2),
                Cone::new("s", ConeKind::Stable, vec![1], 0.2),
            ],
        };
        let rep = verify_cone_invariance(&f, &field, &[vec![0.1, 0.2]]);
        assert!(rep.pass && rep.min_margin > 0.0);
    }
}
