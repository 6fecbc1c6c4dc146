//! Strip-hitting checks for symbolic blenders.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{enumerate_level, EventuallyPeriodic, ShiftPoint, SkewProduct};
use crate::error::{Error, Result};
use crate::fixed::find_fixed_point;
use crate::ifs::{verify_covering, verify_well_distributed, Word};
use crate::space::Region;

/// Length of the random word prefixing each sampled strip base.
const STRIP_WORD: usize = 12;

#[derive(Debug, Clone)]
pub struct BlenderSearch {
    pub max_depth: usize,
    /// Symbol whose fixed point anchors the unstable set; defaults to the one nearest the region center.
    pub fixed_symbol: Option<usize>,
    /// Covering certificate grid step; defaults to 1/256 of the region diameter.
    pub grid_step: Option<f64>,
}

impl Default for BlenderSearch {
    fn default() -> Self {
        BlenderSearch { max_depth: 10, fixed_symbol: None, grid_step: None }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StripOutcome {
    pub center: Vec<f64>,
    pub radius: f64,
    pub strip_base: ShiftPoint,
    pub hit_depth: Option<usize>,
    pub word: Option<Word>,
    /// Base of a point in both the strip and the hitting leaf.
    pub intersection: Option<ShiftPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SymbolicBlenderReport {
    pub pass: bool,
    pub worst_depth: Option<usize>,
    pub strips: usize,
    pub strips_hit: usize,
    pub covering_ok: bool,
    pub covering_margin: Option<f64>,
    pub well_distributed: Option<bool>,
    pub fixed_symbol: usize,
    pub fixed_point: Vec<f64>,
    /// First strip the unstable set missed.
    pub witness: Option<StripOutcome>,
    pub outcomes: Vec<StripOutcome>,
}

fn sample_strip(rng: &mut ChaCha8Rng, d: usize, region: &Region, eps: f64) -> (ShiftPoint, Vec<f64>) {
    let future: Vec<usize> = (0..STRIP_WORD).map(|_| rng.random_range(0..d)).collect();
    let past: Vec<usize> = (0..STRIP_WORD).map(|_| rng.random_range(0..d)).collect();
    let base = ShiftPoint::new(EventuallyPeriodic::new(past, vec![0]), EventuallyPeriodic::new(future, vec![0]), d);
    let center = region
        .lo
        .iter()
        .zip(&region.hi)
        .map(|(&lo, &hi)| {
            if hi - lo <= 2.0 * eps {
                0.5 * (lo + hi)
            } else {
                rng.random_range(lo + eps..hi - eps)
            }
        })
        .collect();
    (base, center)
}

/// Samples `strip_samples` s-strips `W^s_loc(x) × B_ε(c)` with the ball inside
/// `region`, and searches the strong unstable set of a fixed point for a leaf
/// crossing each of them.
pub fn verify_symbolic_cs_blender(skew: &SkewProduct, region: &Region, eps: f64, strip_samples: usize, seed: u64) -> Result<SymbolicBlenderReport> {
    verify_symbolic_cs_blender_with(skew, region, eps, strip_samples, seed, &BlenderSearch::default())
}

pub fn verify_symbolic_cs_blender_with(
    skew: &SkewProduct,
    region: &Region,
    eps: f64,
    strip_samples: usize,
    seed: u64,
    search: &BlenderSearch,
) -> Result<SymbolicBlenderReport> {
    if eps <= 0.0 {
        return Err(Error::Precondition(format!("strip radius must be positive, got {eps}")));
    }
    let mut ifs = skew.fiber_ifs(region.clone())?;
    let step = search.grid_step.unwrap_or(region.diameter() / 256.0);
    let (covering_ok, covering_margin, d_value) = match verify_covering(&ifs, region, step) {
        Ok(c) => (true, Some(c.margin), Some(c.d_value)),
        Err(Error::Uncovered { .. }) => (false, None, None),
        Err(e) => return Err(e),
    };
    ifs.compute_fixed_points(1e-13)?;
    let well_distributed = d_value.map(|d| verify_well_distributed(&ifs, region, d).pass);

    let center = region.center();
    let fixed = ifs.fixed_point_coords();
    let j = match search.fixed_symbol {
        Some(j) if j < skew.d() => j,
        Some(j) => return Err(Error::Precondition(format!("no symbol {j}"))),
        None => (0..skew.d())
            .min_by(|&a, &b| {
                let da = skew.fiber_space().distance(&fixed[a], &center);
                let db = skew.fiber_space().distance(&fixed[b], &center);
                da.total_cmp(&db)
            })
            .unwrap(),
    };
    let y = find_fixed_point(&skew.fiber_maps()[j], &fixed[j], 1e-14, 200)?.point;
    let x = ShiftPoint::constant(j, skew.d());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outcomes: Vec<StripOutcome> = (0..strip_samples)
        .map(|_| {
            let (strip_base, center) = sample_strip(&mut rng, skew.d(), region, eps);
            StripOutcome { center, radius: eps, strip_base, hit_depth: None, word: None, intersection: None }
        })
        .collect();
    let space = skew.fiber_space();
    let mut open = outcomes.len();
    for n in 0..=search.max_depth {
        if open == 0 {
            break;
        }
        let leaves = enumerate_level(skew, &x, &y, n)?;
        for o in outcomes.iter_mut().filter(|o| o.hit_depth.is_none()) {
            if let Some(leaf) = leaves.iter().find(|l| space.distance(&l.fiber, &o.center) < o.radius) {
                let z = ShiftPoint { left: leaf.base.left.clone(), right: o.strip_base.right.clone(), d: skew.d() };
                debug_assert!(z.same_past(&leaf.base) && z.same_future(&o.strip_base));
                o.hit_depth = Some(n);
                o.word = Some(leaf.word.clone());
                o.intersection = Some(z);
                open -= 1;
            }
        }
    }
    let strips_hit = outcomes.len() - open;
    let worst_depth = outcomes.iter().filter_map(|o| o.hit_depth).max();
    let witness = outcomes.iter().find(|o| o.hit_depth.is_none()).cloned();
    let pass = open == 0;
    outcomes.shrink_to_fit();
    Ok(SymbolicBlenderReport {
        pass,
        worst_depth,
        strips: outcomes.len(),
        strips_hit,
        covering_ok,
        covering_margin,
        well_distributed,
        fixed_symbol: j,
        fixed_point: y,
        witness,
        outcomes,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DoubleBlenderReport {
    pub pass: bool,
    /// Contracting side: strips against the strong unstable set.
    pub cs: SymbolicBlenderReport,
    /// Expanding side, checked through the inverted maps.
    pub cu: SymbolicBlenderReport,
}

pub fn verify_symbolic_double_blender(
    skew: &SkewProduct,
    region_s: &Region,
    region_u: &Region,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<DoubleBlenderReport> {
    let inverted = skew.expanding_inverse_skew()?;
    let cs = verify_symbolic_cs_blender(skew, region_s, eps, samples, seed)?;
    let cu = verify_symbolic_cs_blender(&inverted, region_u, eps, samples, seed)?;
    Ok(DoubleBlenderReport { pass: cs.pass && cu.pass, cs, cu })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::SmoothMap;
    use crate::space::StateSpace;

    fn halving(shifts: &[f64]) -> SkewProduct {
        let space = StateSpace::cube(1, 0.0, 1.0);
        SkewProduct::new(shifts.iter().map(|&c| SmoothMap::affine_1d(space.clone(), 0.5, c)).collect()).unwrap()
    }

    #[test]
    fn triple_hits_every_strip() {
        let rep = verify_symbolic_cs_blender(&halving(&[0.0, 0.25, 0.5]), &Region::interval(0.125, 0.875), 1.0 / 32.0, 100, 7).unwrap();
        assert!(rep.pass && rep.covering_ok);
        assert!(rep.worst_depth.unwrap() <= 8);
        assert_eq!(rep.fixed_point, vec![0.5]);
    }

    #[test]
    fn wide_strips_hit_immediately() {
        let rep = verify_symbolic_cs_blender(&halving(&[0.0, 0.25, 0.5]), &Region::interval(0.125, 0.875), 1.0, 10, 1).unwrap();
        assert!(rep.pass);
        assert!(rep.worst_depth.unwrap() <= 1);
    }

    #[test]
    fn gapped_pair_misses_gap() {
        let rep = verify_symbolic_cs_blender(&halving(&[0.0, 0.6]), &Region::interval(0.0, 1.0), 1.0 / 32.0, 100, 3).unwrap();
        assert!(!rep.covering_ok);
        assert!(!rep.pass);
        let w = rep.witness.unwrap();
        assert!(w.center[0] - w.radius >= 0.5 - 1e-12 && w.center[0] + w.radius <= 0.6 + 1e-12, "{:?}", w.center);
    }

    #[test]
    fn double_needs_expanding_part() {
        let s = halving(&[0.0, 0.25, 0.5]);
        let r = Region::interval(0.125, 0.875);
        assert!(matches!(verify_symbolic_double_blender(&s, &r, &r, 0.05, 5, 0), Err(Error::Precondition(_))));
    }
}
