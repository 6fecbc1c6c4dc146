//! Covering and well-distributed certificates, and the density constructions built on them.

use rayon::prelude::*;
use serde::Serialize;

use super::{Ifs, Word};
use crate::error::{Error, Result};
use crate::space::Region;

/// Slack below which a cell counts as uncovered.
pub const COVER_TOL: f64 = 1e-12;
const FACE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct CoveringCertificate {
    pub region: Region,
    pub grid_step: f64,
    pub counts: Vec<usize>,
    pub half_widths: Vec<f64>,
    /// Generator index per grid cell, in row-major cell order.
    pub assignment: Vec<usize>,
    /// Slack of the assigned generator per cell.
    pub slack: Vec<f64>,
    /// Smallest over cells of the best generator slack.
    pub margin: f64,
    /// Grid lower bound for the largest radius `r` with every `B_r(x)` inside one image.
    pub d_value: f64,
    pub robust: bool,
    pub lambdas: Vec<f64>,
    pub lipschitz: Vec<f64>,
    pub well_distributed: Option<bool>,
}

impl CoveringCertificate {
    pub fn cell_count(&self) -> usize {
        self.assignment.len()
    }

    /// Index of the grid cell containing `x`, if `x` lies in the region.
    pub fn cell_index(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0usize;
        for k in 0..self.counts.len() {
            let lo = self.region.lo[k];
            let w = 2.0 * self.half_widths[k];
            let t = (x[k] - lo) / w;
            if t < -1e-9 || t > self.counts[k] as f64 + 1e-9 {
                return None;
            }
            let c = (t.floor().max(0.0) as usize).min(self.counts[k] - 1);
            idx = idx * self.counts[k] + c;
        }
        Some(idx)
    }

    pub fn cell_center(&self, idx: usize) -> Vec<f64> {
        let mut rem = idx;
        let n = self.counts.len();
        let mut out = vec![0.0; n];
        for k in (0..n).rev() {
            let c = rem % self.counts[k];
            rem /= self.counts[k];
            out[k] = self.region.lo[k] + (2 * c + 1) as f64 * self.half_widths[k];
        }
        out
    }

    pub fn cell_radius(&self) -> f64 {
        self.half_widths.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_lipschitz(&self) -> f64 {
        self.lipschitz.iter().copied().fold(0.0, f64::max)
    }

    pub fn assigned(&self, x: &[f64]) -> Option<usize> {
        self.cell_index(x).map(|i| self.assignment[i])
    }
}

/// Faces of the IFS region whose image under a generator lies on the boundary
/// of the certified region; balls are taken relative to that region, so depth
/// towards such faces is not needed.
fn exterior_faces(ifs: &Ifs, i: usize, target: &Region) -> Vec<[bool; 2]> {
    let region = ifs.region();
    let n = region.dim();
    let g = ifs.generator(i);
    let per_axis = 5usize;
    let mut out = vec![[false; 2]; n];
    for k in 0..n {
        for (side, slot) in out[k].iter_mut().enumerate() {
            let mut samples = Vec::new();
            let others: Vec<usize> = (0..n).filter(|&j| j != k).collect();
            let total = per_axis.pow(others.len() as u32);
            for mut t in 0..total {
                let mut p = vec![0.0; n];
                p[k] = if side == 0 { region.lo[k] } else { region.hi[k] };
                for &j in &others {
                    let s = (t % per_axis) as f64 / (per_axis - 1) as f64;
                    t /= per_axis;
                    p[j] = region.lo[j] + s * (region.hi[j] - region.lo[j]);
                }
                samples.push(g.apply(&p));
            }
            *slot = (0..n).any(|j| {
                samples.iter().all(|y| (y[j] - target.lo[j]).abs() <= FACE_TOL)
                    || samples.iter().all(|y| (y[j] - target.hi[j]).abs() <= FACE_TOL)
            });
        }
    }
    out
}

fn relative_depth(region: &Region, p: &[f64], exterior: &[[bool; 2]]) -> f64 {
    let mut depth = f64::INFINITY;
    for k in 0..p.len() {
        let dl = p[k] - region.lo[k];
        let dh = region.hi[k] - p[k];
        if dl < 0.0 || !exterior[k][0] {
            depth = depth.min(dl);
        }
        if dh < 0.0 || !exterior[k][1] {
            depth = depth.min(dh);
        }
    }
    depth.min(region.diameter())
}

struct GeneratorInfo {
    lambda: f64,
    lipschitz: f64,
    exterior: Vec<[bool; 2]>,
    image_center: Vec<f64>,
}

fn slack(ifs: &Ifs, info: &GeneratorInfo, i: usize, c: &[f64], rad: f64) -> f64 {
    match ifs.inverse_of(i, c) {
        Ok(p) if p.iter().all(|v| v.is_finite()) => {
            info.lambda * relative_depth(ifs.region(), &p, &info.exterior) - rad
        }
        _ => f64::NEG_INFINITY,
    }
}

/// Certifies `region ⊂ ⋃ φ_i(D)` on a grid, where `D` is the IFS region: a cell
/// is assigned to the lowest generator index whose pulled-back cell center is
/// deep enough in `D` that the contraction bound forces the whole cell into the image.
pub fn verify_covering(ifs: &Ifs, region: &Region, grid_step: f64) -> Result<CoveringCertificate> {
    if grid_step <= 0.0 {
        return Err(Error::Precondition("grid step must be positive".into()));
    }
    let mut infos = Vec::with_capacity(ifs.len());
    let dom = ifs.region();
    let rc = dom.center();
    for (i, g) in ifs.generators().iter().enumerate() {
        let (lambda, lipschitz) = match (g.meta.contraction_bound, g.meta.lipschitz) {
            (Some(l), Some(k)) => (l, k),
            _ => return Err(Error::NoMetadata(i)),
        };
        infos.push(GeneratorInfo {
            lambda,
            lipschitz,
            exterior: exterior_faces(ifs, i, region),
            image_center: g.apply(&rc),
        });
    }
    let (centers, half) = region.grid(grid_step);
    let rad = half.iter().copied().fold(0.0, f64::max);
    let reach = dom.radius();

    // Per cell: (assigned index, assigned slack, best slack). The assigned
    // generator is the lowest index within half of the best slack, so the
    // assignment keeps a margin when one exists.
    let per_cell: Vec<(Option<usize>, f64, f64)> = centers
        .par_iter()
        .map(|c| {
            let slacks: Vec<f64> = infos
                .iter()
                .enumerate()
                .map(|(i, info)| {
                    let far = c
                        .iter()
                        .zip(&info.image_center)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    if far > info.lipschitz * reach + rad + 1e-9 {
                        f64::NEG_INFINITY
                    } else {
                        slack(ifs, info, i, c, rad)
                    }
                })
                .collect();
            let mut best = slacks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if best < -COVER_TOL {
                // Recompute without pruning so the witness slack is meaningful.
                for (i, info) in infos.iter().enumerate() {
                    best = best.max(slack(ifs, info, i, c, rad));
                }
                return (None, f64::NEG_INFINITY, best);
            }
            let cut = (0.5 * best).max(-COVER_TOL);
            let i = slacks.iter().position(|s| *s >= cut).unwrap();
            (Some(i), slacks[i], best)
        })
        .collect();

    let mut worst: Option<(usize, f64)> = None;
    for (j, (a, _, best)) in per_cell.iter().enumerate() {
        if a.is_none() && worst.is_none_or(|(_, w)| *best < w) {
            worst = Some((j, *best));
        }
    }
    let counts: Vec<usize> = region
        .lo
        .iter()
        .zip(&region.hi)
        .zip(&half)
        .map(|((a, b), h)| ((b - a) / (2.0 * h)).round() as usize)
        .collect();
    let cell_vec = |j: usize| -> Vec<i64> {
        let mut rem = j;
        let mut v = vec![0i64; counts.len()];
        for k in (0..counts.len()).rev() {
            v[k] = (rem % counts[k]) as i64;
            rem /= counts[k];
        }
        v
    };
    if let Some((j, _)) = worst {
        return Err(Error::Uncovered { center: centers[j].clone(), cell: cell_vec(j) });
    }
    let assignment: Vec<usize> = per_cell.iter().map(|c| c.0.unwrap()).collect();
    let slacks: Vec<f64> = per_cell.iter().map(|c| c.1).collect();
    let d_value = per_cell.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
    let margin = d_value;
    Ok(CoveringCertificate {
        region: region.clone(),
        grid_step,
        counts,
        half_widths: half,
        assignment,
        slack: slacks,
        margin,
        d_value,
        robust: margin > 0.0,
        lambdas: infos.iter().map(|i| i.lambda).collect(),
        lipschitz: infos.iter().map(|i| i.lipschitz).collect(),
        well_distributed: None,
    })
}

/// The covering radius `d`; errors when no positive radius works.
pub fn compute_d(ifs: &Ifs, region: &Region, grid_step: f64) -> Result<f64> {
    let cert = verify_covering(ifs, region, grid_step)?;
    if cert.d_value <= 0.0 {
        let j = (0..cert.cell_count())
            .min_by(|&a, &b| cert.slack[a].total_cmp(&cert.slack[b]))
            .unwrap_or(0);
        let center = cert.cell_center(j);
        let cell = center
            .iter()
            .zip(&cert.region.lo)
            .zip(&cert.half_widths)
            .map(|((c, lo), h)| ((c - lo) / (2.0 * h)).floor() as i64)
            .collect();
        return Err(Error::Uncovered { center, cell });
    }
    Ok(cert.d_value)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WellDistributed {
    pub pass: bool,
    /// A grid center whose ball of diameter `d` misses every fixed point.
    pub witness: Option<Vec<f64>>,
}

/// Every open ball of diameter `d` centered on a `d/8` grid of the region must contain a fixed point.
pub fn verify_well_distributed(ifs: &Ifs, region: &Region, d: f64) -> WellDistributed {
    match ifs.fixed_points() {
        Some(_) => well_distributed_points(&ifs.fixed_point_coords(), region, d),
        None => WellDistributed { pass: false, witness: None },
    }
}

pub fn well_distributed_points(points: &[Vec<f64>], region: &Region, d: f64) -> WellDistributed {
    if points.is_empty() || d <= 0.0 || !d.is_finite() {
        return WellDistributed { pass: false, witness: None };
    }
    let (centers, _) = region.grid(d / 8.0);
    let radius = 0.5 * d;
    let gaps: Vec<f64> = centers
        .par_iter()
        .map(|c| {
            points
                .iter()
                .map(|z| z.iter().zip(c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    // Report the emptiest ball as the witness.
    let mut worst = 0;
    for (j, g) in gaps.iter().enumerate() {
        if *g > gaps[worst] {
            worst = j;
        }
    }
    if gaps[worst] < radius {
        WellDistributed { pass: true, witness: None }
    } else {
        WellDistributed { pass: false, witness: Some(centers[worst].clone()) }
    }
}

fn require_cert(ifs: &Ifs) -> Result<&CoveringCertificate> {
    ifs.certificate()
        .ok_or_else(|| Error::Precondition("no covering certificate; call Ifs::certify first".into()))
}

/// Backward itinerary chosen by the certificate's per-cell assignment.
pub fn backward_itinerary(ifs: &Ifs, x: &[f64], steps: usize) -> Result<Word> {
    let cert = require_cert(ifs)?;
    let mut y = x.to_vec();
    let mut w = Vec::with_capacity(steps);
    for _ in 0..steps {
        let Some(i) = cert.assigned(&y) else {
            return Err(Error::Uncovered { center: y, cell: Vec::new() });
        };
        y = ifs.inverse_of(i, &y)?;
        w.push(i);
    }
    Ok(Word(w))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityWitness {
    pub word: Word,
    /// Number of backward pulls of the target ball.
    pub pulls: usize,
    /// Generator whose fixed point was captured, with the prefix length.
    pub capture: Option<(usize, usize)>,
    /// Analytic step bound for diagnosis.
    pub bound: usize,
    /// Distance from the replayed endpoint to the target center.
    pub final_distance: f64,
}

/// Finds `w` with `d(g_w(seed), center) < radius` by pulling the target ball back
/// until it contains a fixed point, then replaying forward.
pub fn certify_density(ifs: &Ifs, seed: &[f64], center: &[f64], radius: f64, max_steps: usize) -> Result<DensityWitness> {
    let cert = require_cert(ifs)?;
    let fixed = ifs.fixed_point_coords();
    if fixed.is_empty() {
        return Err(Error::Precondition("fixed points not computed".into()));
    }
    let space = ifs.space();
    let region = ifs.region();
    let kmax = cert.max_lipschitz();
    let bound = analytic_bound(region.diameter(), radius, kmax);

    if space.distance(seed, center) < radius {
        return Ok(DensityWitness {
            word: Word::empty(),
            pulls: 0,
            capture: None,
            bound,
            final_distance: space.distance(seed, center),
        });
    }

    let mut y = center.to_vec();
    let mut r = radius;
    let mut pulls: Vec<usize> = Vec::new();
    let mut best: Option<(usize, Vec<usize>, usize, usize)> = None; // (length, pulls, gen, prefix)
    for t in 0..=max_steps {
        for (j, z) in fixed.iter().enumerate() {
            let dz = space.distance(z, &y);
            if dz >= r {
                continue;
            }
            let gap = r - dz;
            let ds = space.distance(seed, z);
            let k = cert.lipschitz[j];
            let m = if ds == 0.0 {
                0
            } else if k <= 0.0 {
                1
            } else {
                let mut m = ((gap / ds).ln() / k.ln()).floor().max(0.0) as usize;
                while k.powi(m as i32) * ds >= gap {
                    m += 1;
                }
                m
            };
            let len = t + m;
            if len <= max_steps && best.as_ref().is_none_or(|b| len < b.0) {
                best = Some((len, pulls.clone(), j, m));
            }
        }
        if best.as_ref().is_some_and(|b| b.0 <= t + 1) || t == max_steps {
            break;
        }
        // Pull back through the generator whose preimage sits deepest in the region.
        let mut choice: Option<(usize, Vec<f64>, f64)> = None;
        for i in 0..ifs.len() {
            let Ok(p) = ifs.inverse_of(i, &y) else { continue };
            let depth = region.depth(&p);
            if choice.as_ref().is_none_or(|c| depth > c.2) {
                choice = Some((i, p, depth));
            }
        }
        let Some((i, p, _)) = choice else { break };
        pulls.push(i);
        y = p;
        r /= cert.lipschitz[i];
    }

    let Some((_, pulled, j, m)) = best else {
        return Err(Error::StepLimit { max_steps, bound });
    };
    let mut word = vec![j; m];
    word.extend(pulled.iter().rev());
    let word = Word(word);
    let end = ifs.apply_word(&word, seed);
    let dist = space.distance(&end, center);
    if dist >= radius {
        return Err(Error::StepLimit { max_steps, bound });
    }
    Ok(DensityWitness { pulls: pulled.len(), word, capture: Some((j, m)), bound, final_distance: dist })
}

/// `⌈log(diam / r) / log(1/K)⌉`, the number of pulls needed to grow a radius-`r`
/// ball to the region's size.
pub fn analytic_bound(diam: f64, r: f64, k: f64) -> usize {
    if r >= diam || k >= 1.0 || k <= 0.0 {
        return 0;
    }
    ((diam / r).ln() / (1.0 / k).ln()).ceil() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::StateSpace;

    fn unit() -> (StateSpace, Region) {
        (StateSpace::cube(1, 0.0, 1.0), Region::interval(0.0, 1.0))
    }

    fn ifs(shifts: &[f64]) -> Ifs {
        let (s, r) = unit();
        Ifs::affine_1d(s, r, 0.5, shifts).unwrap()
    }

    #[test]
    fn dyadic_pair_covers_with_split_at_half() {
        let g = ifs(&[0.0, 0.5]);
        let c = verify_covering(&g, g.region(), 1.0 / 64.0).unwrap();
        assert_eq!(c.assigned(&[0.2]), Some(0));
        assert_eq!(c.assigned(&[0.7]), Some(1));
        assert_eq!(c.assigned(&[0.49]), Some(0));
        assert_eq!(c.assigned(&[0.51]), Some(1));
        assert!(c.margin.abs() < 1e-12);
        assert!(!c.robust);
    }

    #[test]
    fn single_half_map_leaves_top_uncovered() {
        let g = ifs(&[0.0]);
        match verify_covering(&g, g.region(), 1.0 / 64.0) {
            Err(Error::Uncovered { center, .. }) => assert!(center[0] > 0.9),
            other => panic!("expected Uncovered, got {other:?}"),
        }
    }

    #[test]
    fn gapped_pair_reports_gap() {
        let g = ifs(&[0.0, 0.6]);
        match verify_covering(&g, g.region(), 1.0 / 64.0) {
            Err(Error::Uncovered { center, .. }) => assert!(center[0] > 0.5 && center[0] < 0.6),
            other => panic!("expected Uncovered, got {other:?}"),
        }
    }

    #[test]
    fn missing_metadata() {
        let (s, r) = unit();
        let m = crate::map::SmoothMap::endo("half", s, |x| vec![0.5 * x[0]]);
        let g = Ifs::new(vec![m], r).unwrap();
        assert_eq!(verify_covering(&g, g.region(), 0.1).unwrap_err(), Error::NoMetadata(0));
    }

    #[test]
    fn triple_d_is_one_eighth() {
        let g = ifs(&[0.0, 0.25, 0.5]);
        let step = 1.0 / 256.0;
        let d = compute_d(&g, g.region(), step).unwrap();
        assert!((d - 0.125).abs() <= step, "d = {d}");
    }

    #[test]
    fn dyadic_pair_has_no_positive_d() {
        let g = ifs(&[0.0, 0.5]);
        match compute_d(&g, g.region(), 1.0 / 64.0) {
            Err(Error::Uncovered { center, .. }) => assert!((center[0] - 0.5).abs() < 0.05),
            other => panic!("expected Uncovered, got {other:?}"),
        }
    }

    #[test]
    fn single_image_d_is_boundary_distance() {
        // Image of [-1, 1] under y/2 is [-0.5, 0.5]; the region [-0.2, 0.2] sits 0.3 inside it.
        let s = StateSpace::cube(1, -1.0, 1.0);
        let g = Ifs::affine_1d(s, Region::interval(-1.0, 1.0), 0.5, &[0.0]).unwrap();
        let d = compute_d(&g, &Region::interval(-0.2, 0.2), 1.0 / 512.0).unwrap();
        assert!((d - 0.3).abs() < 1e-12, "d = {d}");
    }

    #[test]
    fn well_distributed_examples() {
        let r = Region::interval(0.0, 1.0);
        let pts = vec![vec![0.0], vec![0.5], vec![1.0]];
        let w = well_distributed_points(&pts, &r, 0.125);
        assert!(!w.pass);
        let c = w.witness.unwrap()[0];
        assert!((c - 0.25).abs() < 0.07 || (c - 0.75).abs() < 0.07);
        let dense: Vec<Vec<f64>> = (0..=32).map(|k| vec![k as f64 / 32.0]).collect();
        assert!(well_distributed_points(&dense, &r, 0.125).pass);
        assert!(!well_distributed_points(&[], &r, 0.125).pass);
    }

    #[test]
    fn itinerary_stays_in_region() {
        let mut g = ifs(&[0.0, 0.5]);
        g.certify(1.0 / 64.0).unwrap();
        let w = backward_itinerary(&g, &[0.3], 4).unwrap();
        assert_eq!(w.len(), 4);
        let mut y = vec![0.3];
        for &s in w.symbols() {
            y = g.inverse_of(s, &y).unwrap();
            assert!(g.region().contains(&y));
        }
        assert_eq!(backward_itinerary(&g, &[1.0], 5).unwrap(), Word(vec![1; 5]));
        assert!(backward_itinerary(&g, &[0.3], 0).unwrap().is_empty());
    }

    #[test]
    fn density_needs_certificate() {
        let mut g = ifs(&[0.0, 0.5]);
        g.compute_fixed_points(1e-12).unwrap();
        assert!(matches!(certify_density(&g, &[0.0], &[0.3], 1e-2, 20), Err(Error::Precondition(_))));
    }

    #[test]
    fn dyadic_density_word() {
        let mut g = ifs(&[0.0, 0.5]);
        g.compute_fixed_points(1e-12).unwrap();
        g.certify(1.0 / 64.0).unwrap();
        let r = 2f64.powi(-8);
        let w = certify_density(&g, &[0.0], &[0.3], r, 30).unwrap();
        assert!(w.word.len() <= 9, "{:?}", w);
        assert!((g.apply_word(&w.word, &[0.0])[0] - 0.3).abs() < r);
        let e = certify_density(&g, &[0.0], &[0.001], 0.01, 30).unwrap();
        assert!(e.word.is_empty());
        assert!(matches!(certify_density(&g, &[0.0], &[0.3], 1e-9, 3), Err(Error::StepLimit { .. })));
    }
}
