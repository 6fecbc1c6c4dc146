//! Chains of invariant circles of a twist map `T₁` and its conjugate
//! `T₂ = φ ∘ T₁ ∘ φ^{-1}` by the shear `φ(I, θ) = (I + ε cos 2πθ, θ)`, and
//! orbits of `{T₁, T₂}` that follow them.

use std::collections::VecDeque;
use std::f64::consts::TAU;

use serde::Serialize;

use super::{action_range, TwistMap};
use crate::error::{Error, Result};
use crate::ifs::{Ifs, Word};
use crate::space::Region;

/// Crossings count as transversal when `|a - b| < |ε| (1 - γ)`.
pub const TRANSVERSALITY_GAP: f64 = 0.1;
const REGION_SAMPLES: usize = 64;
const HORIZON_CAP: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum CircleTag {
    /// `{I = c}`, invariant under `T₁`.
    T1,
    /// `φ({I = c})`, invariant under `T₂`.
    T2,
}

impl CircleTag {
    /// Generator index in a `{T₁, T₂}` IFS.
    pub fn generator(self) -> usize {
        match self {
            CircleTag::T1 => 0,
            CircleTag::T2 => 1,
        }
    }

    fn other(self) -> CircleTag {
        match self {
            CircleTag::T1 => CircleTag::T2,
            CircleTag::T2 => CircleTag::T1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainLink {
    pub tag: CircleTag,
    pub level: f64,
    pub rotation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ToriChain {
    pub links: Vec<ChainLink>,
    /// Crossing of link `j` and link `j + 1`.
    pub transitions: Vec<[f64; 2]>,
    /// Angle between the two circles at each crossing, in radians.
    pub angles: Vec<f64>,
    pub start_point: [f64; 2],
    pub end_point: [f64; 2],
    pub shear_eps: f64,
    pub level_grid: f64,
}

impl ToriChain {
    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Level of `p` on the circle family of `tag`.
    pub fn level_of(&self, tag: CircleTag, p: &[f64]) -> f64 {
        level_of(self.shear_eps, tag, p)
    }

    /// Transition points followed by the end point.
    pub fn targets(&self) -> Vec<[f64; 2]> {
        let mut t = self.transitions.clone();
        t.push(self.end_point);
        t
    }
}

fn level_of(eps: f64, tag: CircleTag, p: &[f64]) -> f64 {
    match tag {
        CircleTag::T1 => p[0],
        CircleTag::T2 => p[0] - eps * (TAU * p[1]).cos(),
    }
}

fn circle_point(eps: f64, tag: CircleTag, level: f64, theta: f64) -> [f64; 2] {
    match tag {
        CircleTag::T1 => [level, theta],
        CircleTag::T2 => [level + eps * (TAU * theta).cos(), theta],
    }
}

/// Angle in `[0, 1/2]` where `{I = a}` meets `φ({I = b})`.
fn crossing_angle(eps: f64, a: f64, b: f64) -> Option<f64> {
    if eps == 0.0 {
        return None;
    }
    let c = (a - b) / eps;
    (c.abs() < 1.0).then(|| c.acos() / TAU)
}

fn meets(eps: f64, tag: CircleTag, level: f64, region: &Region) -> Option<[f64; 2]> {
    let (t0, t1) = (region.lo[1], region.hi[1]);
    (0..=REGION_SAMPLES)
        .map(|k| t0 + (t1 - t0) * k as f64 / REGION_SAMPLES as f64)
        .map(|th| circle_point(eps, tag, level, th))
        .find(|p| region.contains(p))
}

/// Breadth-first search over circles `{I = c}` and `φ({I = c})` with `c` on a
/// grid of spacing `level_grid`, joined when they cross transversally, for a
/// shortest chain from a circle meeting `u` to one meeting `v`.
pub fn chain_of_tori_search(t1: &TwistMap, shear_eps: f64, u: &Region, v: &Region, level_grid: f64) -> Result<ToriChain> {
    if level_grid <= 0.0 {
        return Err(Error::Precondition("level grid must be positive".into()));
    }
    let (lo, hi) = action_range(t1.space());
    let eps = shear_eps;
    let mut nodes: Vec<(CircleTag, f64)> = Vec::new();
    let count = ((hi - lo) / level_grid).floor() as usize;
    for tag in [CircleTag::T1, CircleTag::T2] {
        for k in 0..=count {
            let c = lo + k as f64 * level_grid;
            let margin = if tag == CircleTag::T2 { eps.abs() } else { 0.0 };
            if c >= lo + margin && c <= hi - margin {
                nodes.push((tag, c));
            }
        }
    }
    let reach = eps.abs() * (1.0 - TRANSVERSALITY_GAP);
    let n = nodes.len();
    let mut prev: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    let mut start_pts = vec![None; n];
    for (i, &(tag, c)) in nodes.iter().enumerate() {
        if let Some(p) = meets(eps, tag, c, u) {
            seen[i] = true;
            start_pts[i] = Some(p);
            queue.push_back(i);
        }
    }
    let mut found = None;
    while let Some(i) = queue.pop_front() {
        let (tag, c) = nodes[i];
        if let Some(p) = meets(eps, tag, c, v) {
            found = Some((i, p));
            break;
        }
        for (j, &(tag2, c2)) in nodes.iter().enumerate() {
            if !seen[j] && tag2 == tag.other() && (c - c2).abs() < reach {
                seen[j] = true;
                prev[j] = Some(i);
                queue.push_back(j);
            }
        }
    }
    let (last, end_point) = found.ok_or(Error::NoChain)?;
    let mut path = vec![last];
    while let Some(p) = prev[*path.last().unwrap()] {
        path.push(p);
    }
    path.reverse();

    let links: Vec<ChainLink> = path
        .iter()
        .map(|&i| ChainLink { tag: nodes[i].0, level: nodes[i].1, rotation: t1.omega(nodes[i].1) })
        .collect();
    let mut transitions = Vec::new();
    let mut angles = Vec::new();
    for w in links.windows(2) {
        let (a, b) = if w[0].tag == CircleTag::T1 { (w[0].level, w[1].level) } else { (w[1].level, w[0].level) };
        let th = crossing_angle(eps, a, b).expect("linked circles cross");
        transitions.push([a, th]);
        angles.push((TAU * eps * (TAU * th).sin()).abs().atan());
    }
    Ok(ToriChain {
        start_point: start_pts[path[0]].unwrap(),
        end_point,
        links,
        transitions,
        angles,
        shear_eps: eps,
        level_grid,
    })
}

/// Iterates after which a rotation by `alpha` has visited every arc of radius
/// `radius`: `q_k + q_{k-1}` for the first convergent denominator `q_k ≥ 1/radius`.
/// A rational `alpha` returns its period.
pub fn rotation_horizon(alpha: f64, radius: f64) -> usize {
    let target = (1.0 / radius).ceil() as u64;
    let mut x = alpha.rem_euclid(1.0);
    let (mut q_prev, mut q) = (0u64, 1u64);
    loop {
        if x < 1e-12 || x > 1.0 - 1e-12 {
            return q as usize;
        }
        x = 1.0 / x;
        let a = x.floor();
        x -= a;
        let q_next = (a as u64).saturating_mul(q).saturating_add(q_prev);
        if q_next >= target {
            return (q_next.saturating_add(q) as usize).min(HORIZON_CAP);
        }
        if q_next as usize > HORIZON_CAP {
            return HORIZON_CAP;
        }
        q_prev = q;
        q = q_next;
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ShadowWitness {
    pub word: Word,
    /// `(generator, length)` per block.
    pub blocks: Vec<(usize, usize)>,
    /// Distance to each target on arrival.
    pub arrivals: Vec<f64>,
    pub tolerance: f64,
}

impl ShadowWitness {
    /// Replays the word from `start` and checks that the orbit enters the
    /// `tolerance`-ball of each target in order.
    pub fn replay_check(&self, ifs: &Ifs, chain: &ToriChain, start: &[f64]) -> bool {
        let space = ifs.space();
        let targets = chain.targets();
        let mut k = 0;
        let mut p = space.reduce(start);
        let hit = |p: &[f64], k: usize| space.distance(p, &targets[k]) < self.tolerance;
        while k < targets.len() && hit(&p, k) {
            k += 1;
        }
        for &s in self.word.symbols() {
            p = ifs.generator(s).apply(&p);
            while k < targets.len() && hit(&p, k) {
                k += 1;
            }
        }
        k == targets.len()
    }
}

/// A word for the IFS `{T₁, T₂}` (generators 0 and 1) whose orbit from `start`
/// passes within `tol` of each crossing of `chain` and ends within `tol` of
/// the end point in `V`.
///
/// Each block iterates the map of the current circle until the point is near
/// the crossing of its actual invariant curve with the next nominal circle,
/// so level errors do not accumulate along the chain.
pub fn shadow_chain(ifs: &Ifs, chain: &ToriChain, start: &[f64], tol: f64) -> Result<ShadowWitness> {
    let space = ifs.space();
    let eps = chain.shear_eps;
    let first = chain.links.first().ok_or(Error::NoChain)?;
    let mut p = space.reduce(start);
    if (chain.level_of(first.tag, &p) - first.level).abs() >= tol {
        return Err(Error::Precondition("start is not near the first circle".into()));
    }
    let slope = chain
        .transitions
        .iter()
        .zip(chain.links.windows(2))
        .map(|(t, w)| {
            let b = if w[0].tag == CircleTag::T2 { w[0].level } else { w[1].level };
            let c = ((t[0] - b) / eps).clamp(-1.0, 1.0);
            1.0 / (TAU * eps.abs() * (1.0 - c * c).sqrt())
        })
        .fold(1.0, f64::max);
    let spread = 1.0 + TAU * eps.abs();
    let delta = tol / (2.0 * (1.0 + slope * spread));

    let mut word = Vec::new();
    let mut blocks = Vec::new();
    let mut arrivals = Vec::new();
    let targets = chain.targets();
    for (j, link) in chain.links.iter().enumerate() {
        let level = chain.level_of(link.tag, &p);
        let aim: [f64; 2] = if let Some(next) = chain.links.get(j + 1) {
            let (a, b) = if link.tag == CircleTag::T1 { (level, next.level) } else { (next.level, level) };
            let th = crossing_angle(eps, a, b).ok_or(Error::HorizonExhausted { horizon: 0, link: j })?;
            [a, th]
        } else {
            circle_point(eps, link.tag, level, chain.end_point[1])
        };
        let g = ifs.generator(link.tag.generator());
        // θ advances by the rotation number on either family.
        let alpha = g.apply(&aim)[1] - aim[1];
        let horizon = rotation_horizon(alpha, delta / spread);
        let mut n = 0;
        while space.distance(&p, &aim) >= delta {
            if n == horizon {
                return Err(Error::HorizonExhausted { horizon, link: j });
            }
            p = g.apply(&p);
            n += 1;
        }
        word.extend(std::iter::repeat_n(link.tag.generator(), n));
        blocks.push((link.tag.generator(), n));
        arrivals.push(space.distance(&p, &targets[j]));
    }
    Ok(ShadowWitness { word: Word(word), blocks, arrivals, tolerance: tol })
}
