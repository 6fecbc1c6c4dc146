//! Strips, the geometric covering check and strip-intersection witnesses.
//!
//! An s-strip is `{x = x0} × [0, 1] × B^s(c, r)` (times a fixed center-unstable
//! point in a double model); a u-strip is `[0, 1] × {y = y0} × B^u(c, r)` with
//! `y0` in one image strip. Both are exact product sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::model::{GeometricBlenderModel, Side};
use crate::error::{Error, Result};
use crate::ifs::{analytic_bound, certify_density, forward_orbit, verify_well_distributed, Word};
use crate::space::Region;

/// Cell budget of the enumeration route.
const ENUM_BUDGET: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StripKind {
    S,
    U,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Strip {
    pub kind: StripKind,
    /// Rectangle (s-strip) or image strip (u-strip) holding the base leaf.
    pub piece: usize,
    /// `x0` for an s-strip, `y0` for a u-strip.
    pub leaf: f64,
    pub center: Vec<f64>,
    pub radius: f64,
    /// Fixed coordinates of the other fiber factor in a double model.
    pub other: Vec<f64>,
    /// Cone the strip is tangent to.
    pub tangency: String,
}

impl Strip {
    pub fn new(kind: StripKind, piece: usize, leaf: f64, center: Vec<f64>, radius: f64, other: Vec<f64>) -> Strip {
        let tangency = match kind {
            StripKind::S => "s",
            StripKind::U => "u",
        };
        Strip { kind, piece, leaf, center, radius, other, tangency: tangency.into() }
    }
}

fn side_region(model: &GeometricBlenderModel, kind: StripKind) -> Result<(&Side, &Region)> {
    match kind {
        StripKind::S => Ok((&model.cs, &model.region_cs)),
        StripKind::U => match (&model.cu, &model.region_cu) {
            (Some(s), Some(r)) => Ok((s, r)),
            _ => Err(Error::Precondition("model has no center-unstable side".into())),
        },
    }
}

fn inner_point(rng: &mut ChaCha8Rng, region: &Region, margin: f64) -> Vec<f64> {
    region
        .lo
        .iter()
        .zip(&region.hi)
        .map(|(&lo, &hi)| if hi - lo <= 2.0 * margin { 0.5 * (lo + hi) } else { rng.random_range(lo + margin..hi - margin) })
        .collect()
}

/// Seeded strips with fiber radius in `[r_min, 2 r_min]` and fiber ball inside the region.
pub fn sample_strips(model: &GeometricBlenderModel, kind: StripKind, count: usize, r_min: f64, seed: u64) -> Result<Vec<Strip>> {
    let (_, region) = side_region(model, kind)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = &model.base;
    let other_region = match kind {
        StripKind::S => model.region_cu.clone(),
        StripKind::U => Some(model.region_cs.clone()),
    };
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let piece = rng.random_range(0..base.symbols());
        let leaf = match kind {
            StripKind::S => base.left[piece] + base.width() * rng.random_range(0.0..1.0),
            StripKind::U => base.lower[piece] + base.mu_ss * rng.random_range(0.0..1.0),
        };
        let radius = r_min * rng.random_range(1.0..2.0);
        let center = inner_point(&mut rng, region, radius);
        let other = match (&other_region, model.is_double()) {
            (Some(r), true) => inner_point(&mut rng, r, 0.0),
            _ => Vec::new(),
        };
        out.push(Strip::new(kind, piece, leaf, center, radius, other));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SideCovering {
    pub certified: bool,
    pub margin: Option<f64>,
    pub d_value: Option<f64>,
    pub well_distributed: Option<bool>,
    pub leaves_checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometricCoveringReport {
    pub pass: bool,
    pub cs: SideCovering,
    pub cu: Option<SideCovering>,
    /// How the product check was discharged.
    pub reduction: String,
}

/// Checks every sampled leaf meets some `F(R_i × 𝒟)` by pulling a representative
/// back through `F`, then confirms the fiber certificate and well-distribution.
fn cover_side(model: &GeometricBlenderModel, kind: StripKind, grid_step: f64) -> Result<SideCovering> {
    let (side, region) = side_region(model, kind)?;
    let base = &model.base;
    let inv = model.map().inverse().ok_or_else(|| Error::NotInvertible("F".into()))?;
    let (pts, _) = region.grid(grid_step);
    let mut leaves = 0;
    for j in 0..base.symbols() {
        for s in &pts {
            leaves += 1;
            let hit = (0..base.symbols()).any(|i| match kind {
                StripKind::S => {
                    // ss-leaf of (x in R_j, s): pick its point in f(R_i) and pull back.
                    let b = vec![base.rectangle(j).center()[0], base.lower[i] + 0.5 * base.mu_ss];
                    let u = model.region_cu.as_ref().map(|r| r.center()).filter(|_| model.is_double()).unwrap_or_default();
                    let q = inv.apply(&model.join(&b, s, &u));
                    let (qb, qs, _) = model.split(&q);
                    base.label(&qb) == Some(i) && region.contains(&qs)
                }
                StripKind::U => {
                    // uu-leaf of (y in f(R_j), u): its point in R_i, pushed forward.
                    let b = vec![base.left[i] + 0.5 * base.width(), base.lower[j] + 0.5 * base.mu_ss];
                    let cu = side.ifs.generators();
                    region.contains(&cu[i].apply(s)) && {
                        let u_img = model.fiber_cu.as_ref().expect("double")[i].apply(&cu[i].apply(s));
                        u_img.iter().zip(s).all(|(a, b)| (a - b).abs() < 1e-9) && base.label(&b) == Some(i)
                    }
                }
            });
            if !hit {
                let b = match kind {
                    StripKind::S => base.rectangle(j).center(),
                    StripKind::U => vec![0.5, base.lower[j] + 0.5 * base.mu_ss],
                };
                return Err(Error::Uncovered { center: model.join(&b, s, &[]), cell: Vec::new() });
            }
        }
    }
    let cert = side.ifs.certificate();
    if cert.is_none() {
        if let Some(Error::Uncovered { center, cell }) = &side.covering_error {
            return Err(Error::Uncovered { center: center.clone(), cell: cell.clone() });
        }
    }
    let well = cert.map(|c| verify_well_distributed(&side.ifs, region, c.d_value).pass);
    Ok(SideCovering {
        certified: cert.is_some(),
        margin: cert.map(|c| c.margin),
        d_value: cert.map(|c| c.d_value),
        well_distributed: well,
        leaves_checked: leaves,
    })
}

/// Leaf covering and well-distribution on each fiber side of the model.
pub fn verify_covering_geometric(model: &GeometricBlenderModel, grid_step: f64) -> Result<GeometricCoveringReport> {
    let cs = cover_side(model, StripKind::S, grid_step)?;
    let cu = if model.is_double() { Some(cover_side(model, StripKind::U, grid_step)?) } else { None };
    let pass = cs.certified && cu.as_ref().is_none_or(|s| s.certified);
    Ok(GeometricCoveringReport {
        pass,
        cs,
        cu,
        reduction: "product structure: each leaf meets F(R_i × D) iff its fiber point lies in phi_i(D)".into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// The anchor's fixed fiber point already lies in the ball.
    Fixed,
    /// Backward pulls through the covering certificate.
    Certified,
    /// Forward enumeration of fiber words.
    Enumerated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StripReport {
    pub hit: bool,
    pub depth: usize,
    pub witness_word: Word,
    pub route: Route,
    /// Point in the strip and in the unstable (s-strip) or stable (u-strip) set.
    pub witness_point: Vec<f64>,
    /// Largest one-step residual of the replayed orbit, or distance to the local manifold at its end.
    pub replay_distance: f64,
    pub strip_distance: f64,
    pub anchor: usize,
    pub bound: usize,
}

/// Index of the fixed fiber point nearest the region center.
pub fn default_anchor(model: &GeometricBlenderModel, kind: StripKind) -> Result<usize> {
    let (side, region) = side_region(model, kind)?;
    let c = region.center();
    let space = side.ifs.space();
    let fixed = side.fixed_points();
    Ok((0..fixed.len()).min_by(|&a, &b| space.distance(&fixed[a], &c).total_cmp(&space.distance(&fixed[b], &c))).unwrap_or(0))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn find_word(side: &Side, seed: &[f64], strip: &Strip, depth: usize, eps: f64) -> Result<(Word, Route, usize)> {
    let ifs = &side.ifs;
    let space = ifs.space();
    let kmax = ifs.generators().iter().filter_map(|g| g.meta.lipschitz).fold(0.0f64, f64::max);
    let bound = analytic_bound(ifs.region().diameter(), strip.radius, kmax);
    if space.distance(seed, &strip.center) < strip.radius {
        return Ok((Word::empty(), Route::Fixed, bound));
    }
    if side.certified() {
        return match certify_density(ifs, seed, &strip.center, strip.radius, depth) {
            Ok(w) => Ok((w.word, Route::Certified, w.bound)),
            Err(Error::StepLimit { .. }) => Err(Error::DepthExhausted { depth, bound }),
            Err(e) => Err(e),
        };
    }
    let cell = (eps.min(strip.radius) / 4.0).max(1e-12);
    let reach = forward_orbit(ifs, seed, depth, cell, ENUM_BUDGET)?;
    let best = reach
        .rows()
        .into_iter()
        .filter(|(_, p, _)| space.distance(p, &strip.center) < strip.radius)
        .min_by(|a, b| a.2.len().cmp(&b.2.len()).then(a.2.cmp(&b.2)));
    match best {
        Some((_, _, w)) => Ok((w, Route::Enumerated, bound)),
        None => Err(Error::DepthExhausted { depth, bound }),
    }
}

/// Finds a point of `strip` on the unstable set (s-strip) or stable set
/// (u-strip) of the product fixed point over `anchor`, and replays it.
///
/// The fiber word comes from pulling the strip's ball back through the
/// covering assignment until it holds a fixed fiber point; the base coordinate
/// is read off the symbolic coding, so the replay never amplifies rounding.
pub fn verify_strip_intersection(model: &GeometricBlenderModel, strip: &Strip, anchor: usize, depth: usize, eps: f64) -> Result<StripReport> {
    let (side, _) = side_region(model, strip.kind)?;
    let base = &model.base;
    if anchor >= base.symbols() {
        return Err(Error::Precondition(format!("no symbol {anchor}")));
    }
    let z = side.fixed_points()[anchor].clone();
    let (word, route, bound) = find_word(side, &z, strip, depth, eps)?;
    let w = &word.0;
    let n = w.len();
    let fiber = side.ifs.apply_word(&word, &z);
    let strip_distance = (side.ifs.space().distance(&fiber, &strip.center) - strip.radius).max(0.0);
    let f = model.map();
    let mut replay: f64 = 0.0;

    let witness = match strip.kind {
        StripKind::S => {
            // Past x_{-1}, ..., x_{-n} = w reversed, then the anchor forever.
            let past = |k: usize| if k < n { w[n - 1 - k] } else { anchor };
            let y0 = base.y_of(past);
            let point = model.join(&[strip.leaf, y0], &fiber, &strip.other);
            let mut next = point.clone();
            let cu = model.cu.as_ref().map(|s| s.ifs.generators());
            let (mut x, mut u) = (strip.leaf, strip.other.clone());
            for m in 1..=n + 1 {
                let sym = past(m - 1);
                x = x / base.mu_uu + base.left[sym];
                let y = base.y_of(|k| past(k + m));
                if let Some(g) = cu {
                    u = g[sym].apply(&u);
                }
                let s = if m <= n { side.ifs.apply_word(&Word(w[..n - m].to_vec()), &z) } else { z.clone() };
                let cur = model.join(&[x, y], &s, &u);
                replay = replay.max(dist(&f.apply(&cur), &next));
                next = cur;
            }
            let (b, s, _) = model.split(&next);
            let p = base.fixed_point(anchor);
            let end = if base.label(&b) == Some(anchor) { dist(&[b[1]], &[p[1]]).max(dist(&s, &z)) } else { f64::INFINITY };
            replay = replay.max(end);
            point
        }
        StripKind::U => {
            // Future x_0, ..., x_{n-1} = w reversed, then the anchor forever.
            let future = |k: usize| if k < n { w[n - 1 - k] } else { anchor };
            let x0 = base.x_of(future);
            let point = model.join(&[x0, strip.leaf], &strip.other, &fiber);
            let mut cur = point.clone();
            let (mut y, mut s) = (strip.leaf, strip.other.clone());
            for m in 0..n {
                let sym = future(m);
                y = base.mu_ss * y + base.lower[sym];
                s = model.fiber_cs[sym].apply(&s);
                let x = base.x_of(|k| future(k + m + 1));
                let u = side.ifs.apply_word(&Word(w[..n - m - 1].to_vec()), &z);
                let nxt = model.join(&[x, y], &s, &u);
                replay = replay.max(dist(&f.apply(&cur), &nxt));
                cur = nxt;
            }
            let (b, _, u) = model.split(&cur);
            let p = base.fixed_point(anchor);
            let end = if base.label(&b) == Some(anchor) { dist(&[b[0]], &[p[0]]).max(dist(&u, &z)) } else { f64::INFINITY };
            replay = replay.max(end);
            point
        }
    };
    let hit = replay < eps && strip_distance < eps;
    Ok(StripReport { hit, depth: n, witness_word: word, route, witness_point: witness, replay_distance: replay, strip_distance, anchor, bound })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StripOutcome {
    pub strip: Strip,
    pub report: Option<StripReport>,
    pub error: Option<String>,
}

impl StripOutcome {
    pub fn hit(&self) -> bool {
        self.report.as_ref().is_some_and(|r| r.hit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StripBatch {
    pub pass: bool,
    pub hits: usize,
    pub total: usize,
    pub worst_depth: Option<usize>,
    pub outcomes: Vec<StripOutcome>,
}

/// Runs every strip in parallel; outcomes keep the input order.
pub fn verify_strips(model: &GeometricBlenderModel, strips: &[Strip], anchor: Option<usize>, depth: usize, eps: f64) -> Result<StripBatch> {
    let kinds: Vec<StripKind> = strips.iter().map(|s| s.kind).collect();
    let mut anchors = std::collections::BTreeMap::new();
    for k in kinds {
        if let std::collections::btree_map::Entry::Vacant(e) = anchors.entry(k as u8) {
            e.insert(match anchor {
                Some(a) => a,
                None => default_anchor(model, k)?,
            });
        }
    }
    let outcomes: Vec<StripOutcome> = strips
        .par_iter()
        .map(|s| match verify_strip_intersection(model, s, anchors[&(s.kind as u8)], depth, eps) {
            Ok(r) => StripOutcome { strip: s.clone(), report: Some(r), error: None },
            Err(e) => StripOutcome { strip: s.clone(), report: None, error: Some(e.to_string()) },
        })
        .collect();
    let hits = outcomes.iter().filter(|o| o.hit()).count();
    let worst_depth = outcomes.iter().filter_map(|o| o.report.as_ref().map(|r| r.depth)).max();
    Ok(StripBatch { pass: hits == strips.len() && !strips.is_empty(), hits, total: strips.len(), worst_depth, outcomes })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoubleBlenderReport {
    pub pass: bool,
    /// s-strips against the unstable set.
    pub s_side: StripBatch,
    /// u-strips against the stable set.
    pub u_side: StripBatch,
}

pub fn verify_double_blender(model: &GeometricBlenderModel, strips_s: &[Strip], strips_u: &[Strip], depth: usize, eps: f64) -> Result<DoubleBlenderReport> {
    if !model.is_double() {
        return Err(Error::Precondition("double blender check needs a center-unstable side".into()));
    }
    if strips_s.iter().any(|s| s.kind != StripKind::S) || strips_u.iter().any(|s| s.kind != StripKind::U) {
        return Err(Error::Precondition("strip kinds do not match their side".into()));
    }
    let s_side = verify_strips(model, strips_s, None, depth, eps)?;
    let u_side = verify_strips(model, strips_u, None, depth, eps)?;
    Ok(DoubleBlenderReport { pass: s_side.pass && u_side.pass, s_side, u_side })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blender::{build_geometric_model, HorseshoeBase};
    use crate::map::SmoothMap;
    use crate::space::StateSpace;

    fn model(shifts: &[f64], region: Region, symplectic: bool) -> GeometricBlenderModel {
        scaled(0.5, shifts, region, symplectic)
    }

    fn scaled(scale: f64, shifts: &[f64], region: Region, symplectic: bool) -> GeometricBlenderModel {
        let sp = StateSpace::cube(1, -1.0, 2.0);
        let gens = shifts.iter().map(|c| SmoothMap::affine_1d(sp.clone(), scale, *c)).collect();
        let base = HorseshoeBase::affine(shifts.len(), 0.1, 10.0).unwrap();
        build_geometric_model(base, gens, None, region, None, symplectic).unwrap()
    }

    #[test]
    fn fixed_point_in_ball_hits_at_depth_zero() {
        let m = model(&[0.0, 0.25, 0.5], Region::interval(0.125, 0.875), false);
        let a = default_anchor(&m, StripKind::S).unwrap();
        let z = m.cs.fixed_points()[a].clone();
        let strip = Strip::new(StripKind::S, 0, m.base.left[0] + 0.03, z, 0.05, vec![]);
        let r = verify_strip_intersection(&m, &strip, a, 8, 1e-9).unwrap();
        assert!(r.hit && r.depth == 0 && r.route == Route::Fixed);
    }

    #[test]
    fn triple_strips_hit_and_replay() {
        let m = model(&[0.0, 0.25, 0.5], Region::interval(0.125, 0.875), false);
        let strips = sample_strips(&m, StripKind::S, 40, 1.0 / 32.0, 7).unwrap();
        let b = verify_strips(&m, &strips, None, 8, 1e-9).unwrap();
        assert!(b.pass, "{:?}", b.outcomes.iter().find(|o| !o.hit()));
        assert!(b.worst_depth.unwrap() <= 8);
        for o in &b.outcomes {
            let r = o.report.as_ref().unwrap();
            assert!(r.replay_distance < 1e-9);
            assert_eq!(r.witness_point[0], o.strip.leaf);
        }
    }

    #[test]
    fn gapped_pair_misses() {
        let m = scaled(0.4, &[0.0, 0.6], Region::interval(0.0, 1.0), false);
        assert!(!m.cs.certified());
        assert!(matches!(verify_covering_geometric(&m, 1.0 / 64.0), Err(Error::Uncovered { .. })));
        // Orbits of the fixed point 0 stay on the attractor, which misses (0.4, 0.6).
        let strip = Strip::new(StripKind::S, 0, m.base.left[0], vec![0.5], 0.05, vec![]);
        assert!(matches!(verify_strip_intersection(&m, &strip, 0, 8, 1e-9), Err(Error::DepthExhausted { .. })));
    }

    #[test]
    fn symplectic_double_both_sides() {
        let m = model(&[0.0, 0.25, 0.5], Region::interval(0.125, 0.875), true);
        let cov = verify_covering_geometric(&m, 1.0 / 64.0).unwrap();
        assert!(cov.pass, "{cov:?}");
        let s = sample_strips(&m, StripKind::S, 20, 1.0 / 32.0, 1).unwrap();
        let u = sample_strips(&m, StripKind::U, 20, 1.0 / 32.0, 2).unwrap();
        let rep = verify_double_blender(&m, &s, &u, 10, 1e-9).unwrap();
        assert!(rep.pass, "{:?}", rep.u_side.outcomes.iter().find(|o| !o.hit()));
    }
}
