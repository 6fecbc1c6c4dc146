//! The perturbation family `F_μ = Ψ^{ε(μ)} ∘ (f₁ × f₂) ∘ Φ^{−ε(μ)}` over a
//! horseshoe, and the almost-minimality experiment on a desk-scale instance.
//!
//! Both Hamiltonians depend on a single base coordinate, which makes their
//! product flows explicit: `Φ` has `ρ(x) h(y)` with `ρ` a bump on cylinder
//! columns `𝒜_{*,j}`, so `x` is frozen, `y_b` drifts by `t ρ'(x) h(y)` and the
//! fiber flows for time `t ρ(x)`. `Ψ` has `σ(y_b) h(y)` with `σ` a bump on the
//! image strips `f₁(𝒜_{i,*})`, so `y_b` is frozen and `x` drifts by `−t σ'(y_b) h(y)`.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::bump::{smoothstep7, BumpTranslation};
use super::horseshoe::HorseshoeBase;
use super::model::{build_geometric_model, GeometricBlenderModel};
use crate::error::{Error, Result};
use crate::integrable::{tapered_shear, twist_map, TwistMap};
use crate::map::SmoothMap;
use crate::space::{Region, StateSpace};

/// Flow of `ĥ = rate · I'` where `(I', θ') = ψ^{-1}(I, θ)`: a rigid rotation in
/// sheared coordinates, so its invariant curves are the `ψ`-images of circles.
#[derive(Debug, Clone)]
pub struct ConjugateRotation {
    pub shear: SmoothMap,
    pub rate: f64,
}

impl ConjugateRotation {
    pub fn new(space: StateSpace, amplitude: f64, phase: f64, rate: f64) -> ConjugateRotation {
        ConjugateRotation { shear: tapered_shear(space, amplitude, phase), rate }
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        let inv = self.shear.inverse().expect("tapered shear carries its inverse");
        self.rate * inv.apply(y)[0]
    }

    pub fn flow(&self, y: &[f64], t: f64) -> Vec<f64> {
        if t == 0.0 {
            return y.to_vec();
        }
        let inv = self.shear.inverse().expect("tapered shear carries its inverse");
        let mut z = inv.apply(y);
        z[1] += t * self.rate;
        self.shear.apply(&z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FiberRole {
    Untouched,
    /// Bump translation by `t (u, v)` around the chart center.
    Translation { u: Vec<f64>, v: Vec<f64> },
    /// `sign · ĥ_flow`.
    Integrable { flow: usize, sign: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockGroup {
    BlenderRow,
    BlenderColumn,
    /// `𝒥₁ × 𝒥₁`: integrable flows after `f₂`.
    MinimalityForward,
    /// `𝒥₂ × 𝒥₂`: integrable flows before `f₂`.
    MinimalityBackward,
    /// Outside `𝒥ᵢ × 𝒥ᵢ` but inside the row or column of an integrable flow.
    Extended,
    Untouched,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Block {
    pub i: usize,
    pub j: usize,
    pub core: Region,
    pub enlarged: Region,
    pub group: BlockGroup,
}

/// Roles of the cylinder blocks `𝒜_{ij}` and the fiber chart the bumps live in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockSchedule {
    pub symbols: usize,
    pub l: usize,
    /// Role of `Ψ` on `𝒜_{i,*}`.
    pub row_roles: Vec<FiberRole>,
    /// Role of `Φ` on `𝒜_{*,j}`.
    pub col_roles: Vec<FiberRole>,
    /// `ε(μ) = μ / ζ`.
    pub zeta: f64,
    /// Enlargement of each block as a fraction of the neighbouring gap.
    pub enlarge: f64,
    pub chart_center: Vec<f64>,
    /// Half-width of the box translated exactly.
    pub inner_radius: f64,
    /// Half-width of the bump support.
    pub outer_radius: f64,
}

impl BlockSchedule {
    /// `l` row translations on `𝒜_{i,*}`, `i = 1..l`, `l` column translations
    /// on `𝒜_{*,j}`, `j = l+1..2l`, the flows `+ĥ₁, +ĥ₂` on rows `2l+1, 2l+2` and
    /// `−ĥ₁, −ĥ₂` on columns `2l+3, 2l+4`. Needs `2l + 5` symbols.
    pub fn standard(symbols: usize, rows: Vec<(Vec<f64>, Vec<f64>)>, cols: Vec<(Vec<f64>, Vec<f64>)>, zeta: f64) -> Result<BlockSchedule> {
        let l = rows.len();
        if cols.len() != l {
            return Err(Error::Precondition("row and column translation counts differ".into()));
        }
        if !(zeta > 0.0) {
            return Err(Error::Precondition(format!("ζ must be positive, got {zeta}")));
        }
        let need = 2 * l + 5;
        if symbols < need {
            return Err(Error::ScheduleTooSmall { have: symbols, need });
        }
        let mut row_roles = vec![FiberRole::Untouched; symbols];
        let mut col_roles = vec![FiberRole::Untouched; symbols];
        for (k, (u, v)) in rows.into_iter().enumerate() {
            row_roles[1 + k] = FiberRole::Translation { u, v };
        }
        for (k, (u, v)) in cols.into_iter().enumerate() {
            col_roles[l + 1 + k] = FiberRole::Translation { u, v };
        }
        row_roles[2 * l + 1] = FiberRole::Integrable { flow: 0, sign: 1.0 };
        row_roles[2 * l + 2] = FiberRole::Integrable { flow: 1, sign: 1.0 };
        col_roles[2 * l + 3] = FiberRole::Integrable { flow: 0, sign: -1.0 };
        col_roles[2 * l + 4] = FiberRole::Integrable { flow: 1, sign: -1.0 };
        Ok(BlockSchedule {
            symbols,
            l,
            row_roles,
            col_roles,
            zeta,
            enlarge: 0.4,
            chart_center: vec![0.7, 0.5],
            inner_radius: 0.1,
            outer_radius: 0.25,
        })
    }

    /// `𝒥₁ = {0, 2l+1, 2l+2}`.
    pub fn forward_symbols(&self) -> [usize; 3] {
        [0, 2 * self.l + 1, 2 * self.l + 2]
    }

    /// `𝒥₂ = {0, 2l+3, 2l+4}`.
    pub fn backward_symbols(&self) -> [usize; 3] {
        [0, 2 * self.l + 3, 2 * self.l + 4]
    }

    pub fn eps(&self, mu: f64) -> f64 {
        mu / self.zeta
    }

    fn group(&self, i: usize, j: usize) -> BlockGroup {
        let translates = |r: &FiberRole| matches!(r, FiberRole::Translation { .. });
        if translates(&self.row_roles[i]) {
            BlockGroup::BlenderRow
        } else if translates(&self.col_roles[j]) {
            BlockGroup::BlenderColumn
        } else if self.forward_symbols().contains(&i) && self.forward_symbols().contains(&j) {
            BlockGroup::MinimalityForward
        } else if self.backward_symbols().contains(&i) && self.backward_symbols().contains(&j) {
            BlockGroup::MinimalityBackward
        } else if self.row_roles[i] != FiberRole::Untouched || self.col_roles[j] != FiberRole::Untouched {
            BlockGroup::Extended
        } else {
            BlockGroup::Untouched
        }
    }

    /// All blocks with their cores `R_i ∩ f^{-1}(R_j)` and enlargements;
    /// errors if two enlargements meet.
    pub fn blocks(&self, base: &HorseshoeBase) -> Result<Vec<Block>> {
        if base.symbols() != self.symbols {
            return Err(Error::Precondition(format!("schedule has {} symbols, base has {}", self.symbols, base.symbols())));
        }
        let pad = self.enlarge * rect_gap(base) / base.mu_uu;
        let mut out = Vec::new();
        for i in 0..self.symbols {
            for j in 0..self.symbols {
                let core = base.cylinder(i, j);
                let enlarged = Region::new(vec![core.lo[0] - pad, 0.0], vec![core.hi[0] + pad, 1.0]);
                out.push(Block { i, j, core, enlarged, group: self.group(i, j) });
            }
        }
        let mut xs: Vec<(f64, f64)> = out.iter().map(|b| (b.enlarged.lo[0], b.enlarged.hi[0])).collect();
        xs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (k, w) in xs.windows(2).enumerate() {
            if w[0].1 >= w[1].0 {
                return Err(Error::RectanglesOverlap(k, k + 1));
            }
        }
        for b in &out {
            if !(b.enlarged.lo[0] < b.core.lo[0] && b.core.hi[0] < b.enlarged.hi[0]) {
                return Err(Error::Precondition(format!("block ({}, {}) is not compactly inside its enlargement", b.i, b.j)));
            }
        }
        Ok(out)
    }
}

/// Smallest gap between neighbouring rectangles, and between the outer ones and the square's edge.
fn rect_gap(base: &HorseshoeBase) -> f64 {
    gap_of(&base.left, base.width())
}

fn strip_gap(base: &HorseshoeBase) -> f64 {
    gap_of(&base.lower, base.mu_ss)
}

fn gap_of(edges: &[f64], width: f64) -> f64 {
    let mut e = edges.to_vec();
    e.sort_by(f64::total_cmp);
    let mut g = e[0].min(1.0 - e[e.len() - 1] - width);
    for w in e.windows(2) {
        g = g.min(w[1] - w[0] - width);
    }
    g
}

/// 1 on `[lo, hi]`, 0 outside `[lo − pad, hi + pad]`: value and derivative.
fn bump1(t: f64, lo: f64, hi: f64, pad: f64) -> (f64, f64) {
    if t >= lo && t <= hi {
        (1.0, 0.0)
    } else if t < lo {
        let (s, ds) = smoothstep7((lo - t) / pad);
        (1.0 - s, ds / pad)
    } else {
        let (s, ds) = smoothstep7((t - hi) / pad);
        (1.0 - s, -ds / pad)
    }
}

#[derive(Debug, Clone)]
enum Action {
    None,
    Translate(BumpTranslation),
    Flow(ConjugateRotation, f64),
}

impl Action {
    fn value(&self, y: &[f64]) -> f64 {
        match self {
            Action::None => 0.0,
            Action::Translate(b) => b.value(y),
            Action::Flow(f, sign) => sign * f.value(y),
        }
    }

    fn flow(&self, y: &[f64], t: f64) -> Vec<f64> {
        match self {
            Action::None => y.to_vec(),
            Action::Translate(b) => b.flow(y, t),
            Action::Flow(f, sign) => f.flow(y, sign * t),
        }
    }

    fn active(&self) -> bool {
        !matches!(self, Action::None)
    }
}

/// `F_μ` together with the pieces it was built from.
#[derive(Debug, Clone)]
pub struct FMu {
    pub base: HorseshoeBase,
    pub f2: SmoothMap,
    pub schedule: BlockSchedule,
    pub mu: f64,
    pub eps: f64,
    rows: Vec<Action>,
    cols: Vec<Action>,
    map: SmoothMap,
}

fn actions(roles: &[FiberRole], sched: &BlockSchedule, eps: f64, pack: Option<&[ConjugateRotation]>) -> Result<Vec<Action>> {
    let c = &sched.chart_center;
    let n = c.len();
    let boxed = |r: f64| Region::new(c.iter().map(|v| v - r).collect(), c.iter().map(|v| v + r).collect());
    roles
        .iter()
        .map(|role| match role {
            FiberRole::Untouched => Ok(Action::None),
            FiberRole::Translation { u, v } => {
                if 2 * u.len() != n {
                    return Err(Error::Precondition("translation does not match the fiber dimension".into()));
                }
                let norm = u.iter().chain(v).fold(0.0f64, |m, x| m.max(x.abs())) * eps;
                let plateau = boxed(sched.inner_radius + norm);
                let outer = boxed(sched.outer_radius);
                if plateau.hi.iter().zip(&outer.hi).any(|(p, o)| p >= o) {
                    return Err(Error::VectorTooLarge { norm });
                }
                Ok(Action::Translate(BumpTranslation::new(u, v, &boxed(sched.inner_radius), &plateau, &outer)?))
            }
            FiberRole::Integrable { flow, sign } => {
                let p = pack.ok_or_else(|| Error::Precondition("schedule uses integrable flows but no pack was given".into()))?;
                let f = p.get(*flow).ok_or_else(|| Error::Precondition(format!("pack has no flow {flow}")))?;
                Ok(Action::Flow(f.clone(), *sign))
            }
        })
        .collect()
}

/// Builds `F_μ` on `[0,1]² × N` in coordinates `(x, y_b, fiber…)`. At `μ = 0`
/// the result is `f₁ × f₂` exactly.
pub fn build_f_mu(base: &HorseshoeBase, f2: &SmoothMap, schedule: &BlockSchedule, mu: f64, pack: Option<&[ConjugateRotation]>) -> Result<FMu> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::Precondition(format!("μ must lie in [0, 1], got {mu}")));
    }
    schedule.blocks(base)?;
    let eps = schedule.eps(mu);
    let rows = actions(&schedule.row_roles, schedule, eps, pack)?;
    let cols = actions(&schedule.col_roles, schedule, eps, pack)?;
    let space = base.space().product(f2.domain());

    let (b, g, r, c) = (base.clone(), f2.clone(), rows.clone(), cols.clone());
    let col_pad = schedule.enlarge * rect_gap(base);
    let row_pad = schedule.enlarge * strip_gap(base);
    let fiber_space = f2.domain().clone();
    let eval = move |p: &[f64]| -> Vec<f64> {
        let (mut x, mut yb, mut y) = (p[0], p[1], p[2..].to_vec());
        if eps != 0.0 {
            // Φ^{-ε}: column of x read off the x-coordinate of f₁(x).
            let i = b.nearest_label(&[x, yb]);
            let xi = b.mu_uu * (x - b.left[i]);
            let j = b.nearest_label(&[xi, 0.0]);
            if c[j].active() {
                let (rho, drho) = bump1(xi, b.left[j], b.left[j] + b.width(), col_pad);
                if rho > 0.0 || drho != 0.0 {
                    let t = -eps;
                    let h = c[j].value(&y);
                    yb += t * drho * b.mu_uu * h;
                    y = fiber_space.reduce(&c[j].flow(&y, t * rho));
                }
            }
        }
        let fb = b.apply(&[x, yb]);
        x = fb[0];
        yb = fb[1];
        y = g.apply(&y);
        if eps != 0.0 {
            let i = b.image_label(&[x, yb]);
            if r[i].active() {
                let (sig, dsig) = bump1(yb, b.lower[i], b.lower[i] + b.mu_ss, row_pad);
                if sig > 0.0 || dsig != 0.0 {
                    let t = eps;
                    let h = r[i].value(&y);
                    x -= t * dsig * h;
                    y = fiber_space.reduce(&r[i].flow(&y, t * sig));
                }
            }
        }
        let mut out = vec![x, yb];
        out.extend(y);
        out
    };
    let symplectic = base.map().meta.symplectic == Some(true) && f2.meta.symplectic == Some(true);
    let map = SmoothMap::endo(format!("F_mu[{mu}]"), space, eval).with_symplectic(symplectic);
    Ok(FMu { base: base.clone(), f2: f2.clone(), schedule: schedule.clone(), mu, eps, rows, cols, map })
}

impl FMu {
    pub fn map(&self) -> &SmoothMap {
        &self.map
    }

    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        self.map.apply(p)
    }

    /// `f₁ × f₂`.
    pub fn unperturbed(&self, p: &[f64]) -> Vec<f64> {
        let mut out = self.base.apply(&p[..2]);
        out.extend(self.f2.apply(&p[2..]));
        out
    }

    /// Fiber action on the core of `𝒜_{ij}`: `Ψ_i ∘ f₂ ∘ Φ_j^{-1}`.
    pub fn block_fiber(&self, i: usize, j: usize, y: &[f64]) -> Vec<f64> {
        let sp = self.f2.domain();
        let y1 = sp.reduce(&self.cols[j].flow(y, -self.eps));
        let y2 = self.f2.apply(&y1);
        sp.reduce(&self.rows[i].flow(&y2, self.eps))
    }

    /// Inverse of [`FMu::block_fiber`].
    pub fn block_fiber_inverse(&self, i: usize, j: usize, y: &[f64]) -> Result<Vec<f64>> {
        let sp = self.f2.domain();
        let inv = self.f2.inverse().ok_or_else(|| Error::NotInvertible(self.f2.name().to_string()))?;
        let y1 = sp.reduce(&self.rows[i].flow(y, -self.eps));
        let y2 = inv.apply(&y1);
        Ok(sp.reduce(&self.cols[j].flow(&y2, self.eps)))
    }

    /// `T₁ = f₂` and `T_{k+1} = φ_k^{ε} ∘ f₂` for the flows of the forward rows,
    /// composed directly from the pack rather than through `F_μ`.
    pub fn minimality_maps(&self) -> Vec<SmoothMap> {
        let mut out = vec![self.f2.clone()];
        for &a in &self.schedule.forward_symbols()[1..] {
            let (act, f2, eps) = (self.rows[a].clone(), self.f2.clone(), self.eps);
            let sp = self.f2.domain().clone();
            let sp2 = sp.clone();
            out.push(SmoothMap::endo(format!("T[{a}]"), sp, move |y| sp2.reduce(&act.flow(&f2.apply(y), eps))));
        }
        out
    }

    /// A point in the core of `𝒜_{ij}` away from every collar.
    pub fn block_point(&self, i: usize, j: usize, t: f64) -> Vec<f64> {
        let c = self.base.cylinder(i, j);
        vec![c.lo[0] + t * (c.hi[0] - c.lo[0]), 0.5]
    }
}

/// Feasibility of the weak-contraction power: `(1 − δ)^k > 1/2`, erroring with
/// the largest admissible `k` otherwise.
pub fn check_weak_power(delta: f64, k: u32) -> Result<()> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::Precondition(format!("δ must lie in [0, 1), got {delta}")));
    }
    if (1.0 - delta).powi(k as i32) > 0.5 {
        return Ok(());
    }
    let max_k = if delta == 0.0 { u32::MAX } else { ((0.5f64).ln() / (1.0 - delta).ln()).ceil() as u32 - 1 };
    Err(Error::Precondition(format!("(1-δ)^k > 1/2 fails for δ = {delta}, k = {k}; need k ≤ {max_k}")))
}

/// Parameters of the desk-scale instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeskParams {
    pub l: usize,
    pub mu: f64,
    pub zeta: f64,
    /// Amplitude of the shears conjugating the integrable flows.
    pub shear: f64,
    /// Rotation of each integrable flow at `μ = 1`, in turns.
    pub turn: f64,
    /// Scale of the chart placing the blender fiber box in `N`.
    pub chart_scale: f64,
    pub seed: u64,
}

impl Default for DeskParams {
    fn default() -> Self {
        DeskParams { l: 3, mu: 1.0, zeta: 25.0, shear: 0.08, turn: 0.5, chart_scale: 0.2, seed: 0 }
    }
}

/// `F_μ` over an 11-symbol symplectic horseshoe with fiber the twist
/// `ω(I) = I + 0.3` on `[0,1] × 𝕋`, plus the verified product blender whose
/// fiber box sits around the fixed point `q̂ = (0.7, 0.5)` of the twist.
#[derive(Debug, Clone)]
pub struct DeskModel {
    pub params: DeskParams,
    pub fmu: FMu,
    pub twist: TwistMap,
    pub blender: GeometricBlenderModel,
    /// Fiber box of `ℬ` in `N`.
    pub blender_box: Region,
    /// Compact part `N_c` of the fiber sampled by the experiment.
    pub sample_region: Region,
}

pub fn desk_model(params: &DeskParams) -> Result<DeskModel> {
    let l = params.l;
    let symbols = 2 * l + 5;
    let mu_uu = 3.0 * symbols as f64;
    let base = HorseshoeBase::affine(symbols, 1.0 / mu_uu, mu_uu)?;
    let annulus = StateSpace::annulus(0.0, 1.0);
    let twist = twist_map(annulus.clone(), |i| i + 0.3, |_| 1.0);
    let shifts: Vec<f64> = (0..l).map(|k| if l == 1 { 0.0 } else { -0.25 + 0.5 * k as f64 / (l - 1) as f64 }).collect();
    let unit = params.chart_scale * params.zeta;
    let rows = shifts.iter().map(|c| (vec![c * unit], vec![0.0])).collect();
    let cols = shifts.iter().map(|c| (vec![0.0], vec![c * unit])).collect();
    let schedule = BlockSchedule::standard(symbols, rows, cols, params.zeta)?;

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let rate = params.turn * params.zeta;
    let pack: Vec<ConjugateRotation> = (0..2)
        .map(|k| {
            let phase = (k as f64 + rng.random::<f64>()) / 2.0;
            ConjugateRotation::new(annulus.clone(), params.shear, phase, rate)
        })
        .collect();
    let fmu = build_f_mu(&base, &twist.map, &schedule, params.mu, Some(&pack))?;

    let fiber_base = HorseshoeBase::affine(3, 0.1, 10.0)?;
    let sp = StateSpace::cube(1, -1.0, 2.0);
    let triple = [0.0, 0.25, 0.5].iter().map(|c| SmoothMap::affine_1d(sp.clone(), 0.5, *c)).collect();
    let blender = build_geometric_model(fiber_base, triple, None, Region::interval(0.125, 0.875), None, true)?;
    let c = &schedule.chart_center;
    let k = params.chart_scale;
    let blender_box = Region::new(vec![c[0] - 0.375 * k, c[1] - 0.375 * k], vec![c[0] + 0.375 * k, c[1] + 0.375 * k]);
    let sample_region = Region::new(vec![0.3, 0.0], vec![0.95, 1.0]);
    Ok(DeskModel { params: params.clone(), fmu, twist, blender, blender_box, sample_region })
}

impl DeskModel {
    /// Fiber point of `ℬ`'s box for blender coordinates `(s, u)` of the product model.
    pub fn chart(&self, s: f64, u: f64) -> Vec<f64> {
        let c = &self.fmu.schedule.chart_center;
        let k = self.params.chart_scale;
        vec![c[0] + k * (s - 0.5), c[1] + k * (u - 0.5)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Along `W^{uu}`: blocks `𝒥₁ × 𝒥₁` forward in time.
    Forward,
    /// Along `W^{ss}`: blocks `𝒥₂ × 𝒥₂` backward in time.
    Backward,
}

/// Symbol sequence whose block fiber maps carry `y` into `target`.
///
/// Forward: `x_0 = start`, returned symbols are `x_1, …, x_n` and step `k`
/// applies the fiber of `𝒜_{x_k x_{k+1}}`. Backward: returned symbols are
/// `x_{-1}, …, x_{-n}` and step `k` inverts `𝒜_{x_{-k-1} x_{-k}}`. With
/// `exact`, only hits after exactly `depth` steps count.
pub fn itinerary_search(
    fmu: &FMu,
    dir: Direction,
    y: &[f64],
    start: usize,
    target: &Region,
    depth: usize,
    cell: f64,
    exact: bool,
) -> Option<Vec<usize>> {
    if target.contains(y) && (!exact || depth == 0) {
        return Some(Vec::new());
    }
    let symbols = match dir {
        Direction::Forward => fmu.schedule.forward_symbols(),
        Direction::Backward => fmu.schedule.backward_symbols(),
    };
    let key = |p: &[f64], s: usize, d: usize| -> (Vec<i64>, usize, usize) {
        (p.iter().map(|v| (v / cell).floor() as i64).collect(), s, if exact { d } else { 0 })
    };
    let mut seen: HashSet<(Vec<i64>, usize, usize)> = HashSet::new();
    let mut frontier: Vec<(Vec<f64>, Vec<usize>)> = vec![(y.to_vec(), Vec::new())];
    for level in 1..=depth {
        let mut next = Vec::new();
        for (p, word) in &frontier {
            let last = *word.last().unwrap_or(&start);
            for &s in &symbols {
                let q = match dir {
                    Direction::Forward => fmu.block_fiber(last, s, p),
                    Direction::Backward => match fmu.block_fiber_inverse(s, last, p) {
                        Ok(q) => q,
                        Err(_) => continue,
                    },
                };
                if !q.iter().all(|v| v.is_finite()) || !seen.insert(key(&q, s, level)) {
                    continue;
                }
                let mut w = word.clone();
                w.push(s);
                if target.contains(&q) && (!exact || level == depth) {
                    return Some(w);
                }
                next.push((q, w));
            }
        }
        frontier = next;
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleOutcome {
    pub q: Vec<f64>,
    pub forward: Option<Vec<usize>>,
    pub backward: Option<Vec<usize>>,
    /// Base distance from `p̂` to the leaf point realizing each itinerary.
    pub forward_reach: Option<f64>,
    pub backward_reach: Option<f64>,
}

impl SampleOutcome {
    pub fn connected(&self) -> bool {
        self.forward.is_some() && self.backward.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlmostMinimalityReport {
    pub mu: f64,
    pub samples: usize,
    pub depth: usize,
    /// Largest admissible strong-leaf diameter.
    pub leaf_bound: f64,
    pub blender_pass: bool,
    pub connected_fraction: f64,
    pub forward_fraction: f64,
    pub backward_fraction: f64,
    pub outcomes: Vec<SampleOutcome>,
}

/// Cell size used to prune the itinerary search.
pub const SEARCH_CELL: f64 = 1.0 / 512.0;

/// For each seeded fiber sample `q` over `p̂` (the fixed point of symbol 0),
/// searches itineraries `(…,0,0; a₁,…,a_n, …)` that carry the strong unstable
/// leaf of `(p̂, q)` into `ℬ`, and the mirror itineraries for the strong stable
/// leaf. A leaf counts only if its realizing point is within `leaf_bound` of `p̂`.
pub fn almost_minimality_experiment(desk: &DeskModel, blender_pass: bool, samples: usize, depth: usize, leaf_bound: f64, seed: u64) -> AlmostMinimalityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let qs: Vec<Vec<f64>> = (0..samples).map(|_| desk.sample_region.sample(&mut rng)).collect();
    let base = &desk.fmu.base;
    let p_hat = base.fixed_point(0);
    let outcomes: Vec<SampleOutcome> = qs
        .par_iter()
        .map(|q| {
            let fwd = itinerary_search(&desk.fmu, Direction::Forward, q, 0, &desk.blender_box, depth, SEARCH_CELL, false);
            // The stable segment stays within μ_ss of p̂ only if x_{-1} = 0 as well.
            let bwd = if desk.blender_box.contains(q) {
                Some(Vec::new())
            } else if depth == 0 {
                None
            } else {
                desk.fmu.block_fiber_inverse(0, 0, q).ok().and_then(|y| {
                    itinerary_search(&desk.fmu, Direction::Backward, &y, 0, &desk.blender_box, depth - 1, SEARCH_CELL, false).map(|w| {
                        let mut full = vec![0];
                        full.extend(w);
                        full
                    })
                })
            };
            let forward_reach = fwd.as_ref().map(|w| {
                let future = |k: usize| if k == 0 || k > w.len() { 0 } else { w[k - 1] };
                (base.x_of(future) - p_hat[0]).abs()
            });
            let backward_reach = bwd.as_ref().map(|w| {
                let past = |k: usize| if k < w.len() { w[k] } else { 0 };
                (base.y_of(past) - p_hat[1]).abs()
            });
            let keep = |w: Option<Vec<usize>>, r: Option<f64>| w.filter(|_| r.is_some_and(|r| r <= leaf_bound));
            SampleOutcome {
                q: q.clone(),
                forward: keep(fwd, forward_reach),
                backward: keep(bwd, backward_reach),
                forward_reach,
                backward_reach,
            }
        })
        .collect();
    let frac = |f: &dyn Fn(&SampleOutcome) -> bool| {
        if samples == 0 {
            0.0
        } else {
            outcomes.iter().filter(|o| f(o)).count() as f64 / samples as f64
        }
    };
    let forward_fraction = frac(&|o| o.forward.is_some());
    let backward_fraction = frac(&|o| o.backward.is_some());
    let connected_fraction = if blender_pass { frac(&|o| o.connected()) } else { 0.0 };
    AlmostMinimalityReport {
        mu: desk.fmu.mu,
        samples,
        depth,
        leaf_bound,
        blender_pass,
        connected_fraction,
        forward_fraction,
        backward_fraction,
        outcomes,
    }
}
