//! Locally constant skew products over the full shift on `d` symbols.
//!
//! `Φ(x, y) = (τx, φ_{x_0}(y))`, optionally with a second fiber
//! `z ↦ ψ_{x_1}(z)` that expands.

pub mod blender;
pub mod exact;
pub mod shift;

use std::collections::BTreeSet;
use std::fmt::Debug;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ifs::{cell_of, forward_orbit, Ifs, ReachSet, Word};
use crate::map::SmoothMap;
use crate::space::{Factor, Region, StateSpace};

pub use blender::{
    verify_symbolic_cs_blender, verify_symbolic_cs_blender_with, verify_symbolic_double_blender, BlenderSearch,
    DoubleBlenderReport, StripOutcome, SymbolicBlenderReport,
};
pub use exact::AffineFamily;
pub use shift::{EventuallyPeriodic, ShiftPoint};

/// Per-symbol fiber maps. Implemented for floating maps and for exact
/// rational affine maps.
pub trait FiberFamily {
    type Point: Clone + PartialEq + Debug;

    fn symbols(&self) -> usize;

    fn forward(&self, symbol: usize, y: &Self::Point) -> Self::Point;

    fn backward(&self, symbol: usize, y: &Self::Point) -> Result<Self::Point>;

    /// Whether a fiber point lies where the maps are defined.
    fn admissible(&self, _y: &Self::Point) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub struct SkewProduct {
    d: usize,
    fiber_space: StateSpace,
    phi: Vec<SmoothMap>,
    psi: Option<Vec<SmoothMap>>,
}

impl SkewProduct {
    pub fn new(phi: Vec<SmoothMap>) -> Result<Self> {
        let first = phi.first().ok_or_else(|| Error::Precondition("skew product needs at least one symbol".into()))?;
        let fiber_space = first.domain().clone();
        if phi.iter().any(|m| m.domain() != &fiber_space) {
            return Err(Error::Precondition("fiber maps must share one space".into()));
        }
        Ok(SkewProduct { d: phi.len(), fiber_space, phi, psi: None })
    }

    /// Adds the expanding part `ψ_1..ψ_d`, read at `x_1`.
    pub fn with_expanding(mut self, psi: Vec<SmoothMap>) -> Result<Self> {
        if psi.len() != self.d {
            return Err(Error::Precondition(format!("expected {} expanding maps, got {}", self.d, psi.len())));
        }
        if psi.iter().any(|m| m.domain() != psi[0].domain()) {
            return Err(Error::Precondition("expanding maps must share one space".into()));
        }
        self.psi = Some(psi);
        Ok(self)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn fiber_space(&self) -> &StateSpace {
        &self.fiber_space
    }

    pub fn fiber_maps(&self) -> &[SmoothMap] {
        &self.phi
    }

    pub fn expanding_maps(&self) -> Option<&[SmoothMap]> {
        self.psi.as_deref()
    }

    /// Same skew product with the contracting maps replaced.
    pub fn with_fiber_maps(&self, phi: Vec<SmoothMap>) -> Result<Self> {
        let mut out = SkewProduct::new(phi)?;
        if out.d != self.d {
            return Err(Error::Precondition("symbol count changed".into()));
        }
        out.psi = self.psi.clone();
        Ok(out)
    }

    /// Uniform contraction bound of the `φ_i`, if all carry metadata.
    pub fn contraction_bound(&self) -> Option<f64> {
        self.phi.iter().map(|m| m.meta.lipschitz).try_fold(0.0f64, |a, k| k.map(|k| a.max(k)))
    }

    /// Bi-Lipschitz constant `L` with `d/L ≤ d(φ(y), φ(y')) ≤ L d`.
    pub fn bi_lipschitz(&self) -> Option<f64> {
        self.phi.iter().try_fold(1.0f64, |a, m| {
            let k = m.meta.lipschitz?;
            let l = m.meta.contraction_bound?;
            (l > 0.0).then(|| a.max(k).max(1.0 / l))
        })
    }

    /// The fiber IFS `{φ_1, …, φ_d}` on `region`.
    pub fn fiber_ifs(&self, region: Region) -> Result<Ifs> {
        Ifs::new(self.phi.clone(), region)
    }

    /// Skew product whose fiber maps are `ψ_i^{-1}`: the stable-side problem
    /// for the expanding part.
    pub fn expanding_inverse_skew(&self) -> Result<SkewProduct> {
        let psi = self.psi.as_ref().ok_or_else(|| Error::Precondition("skew product has no expanding part".into()))?;
        let inv = psi
            .iter()
            .map(|m| m.inverse().ok_or_else(|| Error::NotInvertible(m.name().to_string())))
            .collect::<Result<Vec<_>>>()?;
        SkewProduct::new(inv)
    }

    /// One step of the full map `(x, y, z) ↦ (τx, φ_{x_0}(y), ψ_{x_1}(z))`.
    pub fn step_full(&self, x: &ShiftPoint, y: &[f64], z: &[f64]) -> Result<(ShiftPoint, Vec<f64>, Vec<f64>)> {
        let psi = self.psi.as_ref().ok_or_else(|| Error::Precondition("skew product has no expanding part".into()))?;
        Ok((x.shift(), self.phi[x.get(0)].apply(y), psi[x.get(1)].apply(z)))
    }

    /// The bounding box of the fiber space, used as the IFS region when no other is given.
    pub fn fiber_box(&self) -> Region {
        let (lo, hi) = self
            .fiber_space
            .factors()
            .iter()
            .map(|f| match *f {
                Factor::Interval { lo, hi } => (lo, hi),
                Factor::Circle { period } => (0.0, period),
            })
            .unzip();
        Region::new(lo, hi)
    }
}

impl FiberFamily for SkewProduct {
    type Point = Vec<f64>;

    fn symbols(&self) -> usize {
        self.d
    }

    fn forward(&self, symbol: usize, y: &Vec<f64>) -> Vec<f64> {
        self.phi[symbol].apply(y)
    }

    fn backward(&self, symbol: usize, y: &Vec<f64>) -> Result<Vec<f64>> {
        let m = &self.phi[symbol];
        m.inverse().map(|inv| inv.apply(y)).ok_or_else(|| Error::NotInvertible(m.name().to_string()))
    }

    fn admissible(&self, y: &Vec<f64>) -> bool {
        y.iter().all(|v| v.is_finite()) && self.fiber_space.contains(y)
    }
}

fn check_alphabet<F: FiberFamily>(fam: &F, x: &ShiftPoint) -> Result<()> {
    if x.d != fam.symbols() {
        return Err(Error::Precondition(format!("base has {} symbols, fiber family has {}", x.d, fam.symbols())));
    }
    Ok(())
}

/// `Φ^n(x, y)` for signed `n`, applying `φ_{x_0}` then `φ_{x_1}` and so on,
/// or the inverses `φ^{-1}_{x_{-1}}`, `φ^{-1}_{x_{-2}}`, … for `n < 0`.
pub fn iterate_skew<F: FiberFamily>(fam: &F, x: &ShiftPoint, y: &F::Point, n: i64) -> Result<(ShiftPoint, F::Point)> {
    check_alphabet(fam, x)?;
    let mut x = x.clone();
    let mut y = y.clone();
    if n >= 0 {
        for _ in 0..n {
            y = fam.forward(x.get(0), &y);
            x = x.shift();
        }
    } else {
        for _ in 0..n.unsigned_abs() {
            x = x.unshift();
            y = fam.backward(x.get(0), &y)?;
        }
    }
    Ok((x, y))
}

/// `W^{uu}_loc(x, y)`: every base point agreeing with `x` at indices `≤ 0`, over the single fiber point `y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalUnstable<P> {
    pub past: EventuallyPeriodic,
    pub fiber: P,
}

impl<P: PartialEq> LocalUnstable<P> {
    pub fn contains(&self, z: &ShiftPoint, w: &P) -> bool {
        z.left == self.past && *w == self.fiber
    }

    /// Two local leaves either coincide or are disjoint.
    pub fn is_disjoint(&self, other: &LocalUnstable<P>) -> bool {
        self.past != other.past || self.fiber != other.fiber
    }

    /// Human-readable constraint set.
    pub fn constraint(&self) -> String {
        format!("z_i = x_i for i <= 0, x_0 x_-1 ... = {}", self.past)
    }
}

pub fn local_unstable<P: Clone>(x: &ShiftPoint, y: &P) -> LocalUnstable<P> {
    LocalUnstable { past: x.left.clone(), fiber: y.clone() }
}

/// One local leaf of the strong unstable set: `W^{uu}_loc(base, fiber)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Leaf<P> {
    /// Free symbols `σ`, oldest first; the leaf sits at depth `|σ|`.
    pub word: Word,
    pub fiber: P,
    /// Representative base point: `σ` at indices `-|σ|..-1`, `x_0` at 0, and `x` elsewhere.
    pub base: ShiftPoint,
}

#[derive(Debug, Clone, Serialize)]
pub struct UnstableEnumeration<P> {
    pub base: ShiftPoint,
    pub seed: P,
    pub depth: usize,
    pub leaves: Vec<Leaf<P>>,
}

impl<P> UnstableEnumeration<P> {
    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn at_depth(&self, n: usize) -> impl Iterator<Item = &Leaf<P>> {
        self.leaves.iter().filter(move |l| l.word.len() == n)
    }
}

impl UnstableEnumeration<Vec<f64>> {
    /// Leaf fiber points as an occupancy grid on `space`.
    pub fn projection(&self, space: &StateSpace, eps: f64) -> ReachSet {
        ReachSet::from_words(space, &self.seed, eps, self.leaves.iter().map(|l| (l.fiber.clone(), l.word.clone())))
    }

    pub fn projection_cells(&self, space: &StateSpace, eps: f64) -> BTreeSet<Vec<i64>> {
        self.leaves
            .iter()
            .filter(|l| space.contains(&l.fiber))
            .map(|l| cell_of(space, &l.fiber, eps))
            .collect()
    }
}

fn leaf_base(x: &ShiftPoint, word: &[usize]) -> ShiftPoint {
    let mut left = x.left.clone();
    for _ in 0..=word.len() {
        left.pop_front();
    }
    for &s in word {
        left.push_front(s);
    }
    left.push_front(x.get(0));
    ShiftPoint { left, right: x.right.clone(), d: x.d }
}

/// Leaves at exactly depth `n`: fiber `φ_{σ_n} ∘ … ∘ φ_{σ_1} ∘ φ^{-1}_{x_{-n}} ∘ … ∘ φ^{-1}_{x_{-1}}(y)`.
pub fn enumerate_level<F: FiberFamily>(fam: &F, x: &ShiftPoint, y: &F::Point, n: usize) -> Result<Vec<Leaf<F::Point>>> {
    check_alphabet(fam, x)?;
    let mut pull = y.clone();
    for k in 1..=n {
        pull = fam.backward(x.get(-(k as i64)), &pull)?;
    }
    let mut out = Vec::new();
    if !fam.admissible(&pull) {
        return Ok(out);
    }
    let mut stack: Vec<(Vec<usize>, F::Point)> = vec![(Vec::new(), pull)];
    while let Some((w, p)) = stack.pop() {
        if w.len() == n {
            out.push(Leaf { base: leaf_base(x, &w), word: Word(w), fiber: p });
            continue;
        }
        for s in (0..fam.symbols()).rev() {
            let q = fam.forward(s, &p);
            if fam.admissible(&q) {
                let mut w2 = w.clone();
                w2.push(s);
                stack.push((w2, q));
            }
        }
    }
    Ok(out)
}

/// All leaves of depth `≤ depth`, shallow first and lexicographic within a depth.
pub fn enumerate_unstable<F: FiberFamily>(fam: &F, x: &ShiftPoint, y: &F::Point, depth: usize) -> Result<UnstableEnumeration<F::Point>> {
    let mut leaves = Vec::new();
    for n in 0..=depth {
        leaves.extend(enumerate_level(fam, x, y, n)?);
    }
    Ok(UnstableEnumeration { base: x.clone(), seed: y.clone(), depth, leaves })
}

fn words(d: usize, n: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = d.checked_pow(n as u32).expect("word count overflow");
    (0..total).map(move |mut k| {
        let mut w = vec![0; n];
        for slot in w.iter_mut().rev() {
            *slot = k % d;
            k /= d;
        }
        w
    })
}

/// `Φ^{n+1}(W^{uu}_loc(Φ^{-(n+1)}(x, y)))` at each depth `n`, computed by
/// iterating the skew product on explicit base points. Same leaf order as
/// [`enumerate_unstable`].
pub fn brute_force_unstable<F: FiberFamily>(fam: &F, x: &ShiftPoint, y: &F::Point, depth: usize) -> Result<Vec<Leaf<F::Point>>> {
    let mut out = Vec::new();
    for n in 0..=depth {
        let (xb, yb) = iterate_skew(fam, x, y, -(n as i64 + 1))?;
        for w in words(fam.symbols(), n) {
            let mut right = x.right.clone();
            right.push_front(x.get(0));
            for &s in w.iter().rev() {
                right.push_front(s);
            }
            let z = ShiftPoint { left: xb.left.clone(), right, d: x.d };
            // Walk the orbit so inadmissible intermediate fibers drop the leaf.
            let mut zc = z;
            let mut f = yb.clone();
            let mut ok = true;
            for _ in 0..=n {
                let (z2, f2) = iterate_skew(fam, &zc, &f, 1)?;
                zc = z2;
                f = f2;
                if !fam.admissible(&f) {
                    ok = false;
                    break;
                }
            }
            if ok {
                out.push(Leaf { word: Word(w), fiber: f, base: zc });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Side {
    UnstableOnly,
    OrbitOnly,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProjectionReport {
    pub matched: bool,
    pub unstable_cells: usize,
    pub orbit_cells: usize,
    pub mismatched_cells: Vec<(Vec<i64>, Side)>,
}

/// Compares projected leaf cells with the IFS forward orbit of the enumeration seed at the same depth.
pub fn compare_unstable_projection(en: &UnstableEnumeration<Vec<f64>>, ifs: &Ifs, eps: f64) -> Result<ProjectionReport> {
    let space = ifs.space();
    let ours = en.projection_cells(space, eps);
    let orbit = forward_orbit(ifs, &en.seed, en.depth, eps, usize::MAX)?.cell_set();
    let mut mismatched: Vec<(Vec<i64>, Side)> = ours.difference(&orbit).map(|c| (c.clone(), Side::UnstableOnly)).collect();
    mismatched.extend(orbit.difference(&ours).map(|c| (c.clone(), Side::OrbitOnly)));
    Ok(ProjectionReport {
        matched: mismatched.is_empty(),
        unstable_cells: ours.len(),
        orbit_cells: orbit.len(),
        mismatched_cells: mismatched,
    })
}

/// Fiber residual of `(x, y)` as a fixed point; infinite if the base moves.
pub fn fixed_point_residual(skew: &SkewProduct, x: &ShiftPoint, y: &[f64]) -> Result<f64> {
    let (x1, y1) = iterate_skew(skew, x, &y.to_vec(), 1)?;
    if &x1 != x {
        return Ok(f64::INFINITY);
    }
    Ok(skew.fiber_space().distance(&y1, y))
}

/// For a fixed point `(x, y)`, checks that the projected strong unstable set
/// equals the forward orbit of `y` under the fiber IFS, cell for cell.
pub fn project_unstable_equals_ifs(skew: &SkewProduct, x: &ShiftPoint, y: &[f64], depth: usize, eps: f64) -> Result<ProjectionReport> {
    let res = fixed_point_residual(skew, x, y)?;
    if res > 1e-12 {
        return Err(Error::NotFixedPoint(res));
    }
    let en = enumerate_unstable(skew, x, &y.to_vec(), depth)?;
    let ifs = skew.fiber_ifs(skew.fiber_box())?;
    compare_unstable_projection(&en, &ifs, eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dyadic() -> SkewProduct {
        let space = StateSpace::cube(1, 0.0, 1.0);
        SkewProduct::new(vec![SmoothMap::affine_1d(space.clone(), 0.5, 0.0), SmoothMap::affine_1d(space, 0.5, 0.5)]).unwrap()
    }

    #[test]
    fn two_steps_compose_in_order() {
        let x = ShiftPoint::new(EventuallyPeriodic::constant(0), EventuallyPeriodic::new(vec![1], vec![0]), 2);
        let (_, y) = iterate_skew(&dyadic(), &x, &vec![0.0], 2).unwrap();
        assert_eq!(y, vec![0.5]);
    }

    #[test]
    fn forward_then_back() {
        let x = ShiftPoint::new(EventuallyPeriodic::new(vec![1, 0, 1], vec![0]), EventuallyPeriodic::new(vec![1, 1], vec![0, 1]), 2);
        let s = dyadic();
        let (x5, y5) = iterate_skew(&s, &x, &vec![0.3], 5).unwrap();
        let (x0, y0) = iterate_skew(&s, &x5, &y5, -5).unwrap();
        assert_eq!(x0, x);
        assert!((y0[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn missing_inverse() {
        let space = StateSpace::cube(1, 0.0, 1.0);
        let f = SmoothMap::endo("sq", space, |y| vec![y[0] * y[0] / 2.0]);
        let s = SkewProduct::new(vec![f]).unwrap();
        let err = iterate_skew(&s, &ShiftPoint::constant(0, 1), &vec![0.5], -1).unwrap_err();
        assert!(matches!(err, Error::NotInvertible(_)));
    }

    #[test]
    fn dyadic_depth_three() {
        let en = enumerate_unstable(&dyadic(), &ShiftPoint::constant(0, 2), &vec![0.0], 3).unwrap();
        assert_eq!(en.len(), 1 + 2 + 4 + 8);
        let pts: BTreeSet<i64> = en.leaves.iter().map(|l| (l.fiber[0] * 8.0).round() as i64).collect();
        assert_eq!(pts, (0..8).collect());
        let zero = en.at_depth(0).next().unwrap();
        assert_eq!(zero.fiber, vec![0.0]);
        assert_eq!(zero.base, ShiftPoint::constant(0, 2));
    }

    #[test]
    fn local_leaves() {
        let x = ShiftPoint::new(EventuallyPeriodic::new(vec![1], vec![0]), EventuallyPeriodic::constant(1), 2);
        let y = ShiftPoint::new(EventuallyPeriodic::new(vec![1], vec![0]), EventuallyPeriodic::constant(0), 2);
        let z = ShiftPoint::constant(0, 2);
        let a = local_unstable(&x, &0.2);
        assert_eq!(a, local_unstable(&y, &0.2));
        assert!(a.is_disjoint(&local_unstable(&z, &0.2)));
        assert!(a.contains(&y, &0.2));
    }

    #[test]
    fn projection_matches_orbit() {
        let rep = project_unstable_equals_ifs(&dyadic(), &ShiftPoint::constant(0, 2), &[0.0], 6, 1.0 / 64.0).unwrap();
        assert!(rep.matched, "{rep:?}");
        assert_eq!(rep.unstable_cells, 64);
        let rep0 = project_unstable_equals_ifs(&dyadic(), &ShiftPoint::constant(0, 2), &[0.0], 0, 1.0 / 64.0).unwrap();
        assert!(rep0.matched && rep0.unstable_cells == 1);
    }

    #[test]
    fn not_fixed() {
        let err = project_unstable_equals_ifs(&dyadic(), &ShiftPoint::constant(0, 2), &[0.25], 3, 0.1).unwrap_err();
        assert!(matches!(err, Error::NotFixedPoint(r) if (r - 0.125).abs() < 1e-15));
    }

    #[test]
    fn corrupted_generator_mismatch() {
        let s = dyadic();
        let en = enumerate_unstable(&s, &ShiftPoint::constant(0, 2), &vec![0.0], 4).unwrap();
        let space = s.fiber_space().clone();
        let bad = Ifs::new(
            vec![SmoothMap::affine_1d(space.clone(), 0.5, 0.0), SmoothMap::affine_1d(space, 0.5, 0.45)],
            s.fiber_box(),
        )
        .unwrap();
        let rep = compare_unstable_projection(&en, &bad, 1.0 / 64.0).unwrap();
        assert!(!rep.matched);
        assert!(!rep.mismatched_cells.is_empty());
    }
}
