//! Pass rates of a blender verifier under seeded perturbations of the fiber maps.

use rayon::prelude::*;
use serde::Serialize;

use super::cones::verify_cone_invariance;
use super::model::GeometricBlenderModel;
use super::strips::{sample_strips, verify_double_blender, verify_strips, Strip, StripKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verifier {
    /// s-strips against the unstable set.
    StripIntersection,
    /// s- and u-strips; needs a double model.
    DoubleBlender,
    /// Cone invariance on the region samples.
    Cones,
}

impl std::str::FromStr for Verifier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strip-intersection" | "strip_intersection" => Ok(Verifier::StripIntersection),
            "double-blender" | "double_blender" => Ok(Verifier::DoubleBlender),
            "cones" => Ok(Verifier::Cones),
            _ => Err(Error::Precondition(format!("unknown verifier '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub verifier: Verifier,
    pub strips: usize,
    pub r_min: f64,
    pub depth: usize,
    pub eps: f64,
    pub cone_samples_per_axis: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { verifier: Verifier::StripIntersection, strips: 20, r_min: 1.0 / 32.0, depth: 10, eps: 1e-9, cone_samples_per_axis: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub eta: f64,
    pub trials: usize,
    pub passes: usize,
    pub pass_rate: f64,
    /// First failure message per row, if any.
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub verifier: Verifier,
    pub rows: Vec<SweepRow>,
}

struct Fixture {
    s: Vec<Strip>,
    u: Vec<Strip>,
}

fn run_once(model: &GeometricBlenderModel, cfg: &SweepConfig, fx: &Fixture) -> Result<(bool, Option<String>)> {
    match cfg.verifier {
        Verifier::StripIntersection => {
            let b = verify_strips(model, &fx.s, None, cfg.depth, cfg.eps)?;
            let msg = (!b.pass).then(|| format!("{} of {} strips hit", b.hits, b.total));
            Ok((b.pass, msg))
        }
        Verifier::DoubleBlender => {
            let r = verify_double_blender(model, &fx.s, &fx.u, cfg.depth, cfg.eps)?;
            let msg = (!r.pass).then(|| format!("s-side {}/{}, u-side {}/{}", r.s_side.hits, r.s_side.total, r.u_side.hits, r.u_side.total));
            Ok((r.pass, msg))
        }
        Verifier::Cones => {
            let r = verify_cone_invariance(model.map(), &model.cones, &model.region_samples(cfg.cone_samples_per_axis));
            let msg = (!r.pass).then(|| format!("cone margin {}", r.min_margin));
            Ok((r.pass, msg))
        }
    }
}

/// For each `η` and trial `t`, perturbs the model with seed `seed + t` (the
/// unperturbed model at `η = 0`) and re-runs the verifier. Strips are sampled
/// once from the unperturbed model so every trial faces the same targets.
pub fn robustness_sweep(model: &GeometricBlenderModel, cfg: &SweepConfig, etas: &[f64], trials: usize, seed: u64) -> Result<SweepTable> {
    if let Some(e) = etas.iter().find(|e| !(**e >= 0.0)) {
        return Err(Error::Precondition(format!("η must be non-negative, got {e}")));
    }
    let s = sample_strips(model, StripKind::S, cfg.strips, cfg.r_min, seed)?;
    let u = if model.is_double() { sample_strips(model, StripKind::U, cfg.strips, cfg.r_min, seed.wrapping_add(1))? } else { Vec::new() };
    let fx = Fixture { s, u };
    let (base_pass, msg) = run_once(model, cfg, &fx)?;
    if !base_pass {
        return Err(Error::Precondition(format!("verifier fails on the unperturbed model: {}", msg.unwrap_or_default())));
    }
    let jobs: Vec<(usize, usize)> = (0..etas.len()).flat_map(|k| (0..trials).map(move |t| (k, t))).collect();
    let results: Vec<(bool, Option<String>)> = jobs
        .par_iter()
        .map(|&(k, t)| {
            let eta = etas[k];
            let perturbed = if eta == 0.0 { Ok(model.clone()) } else { model.perturbed(eta, seed.wrapping_add(t as u64)) };
            match perturbed.and_then(|m| run_once(&m, cfg, &fx)) {
                Ok(r) => r,
                Err(e) => (false, Some(e.to_string())),
            }
        })
        .collect();
    let rows = etas
        .iter()
        .enumerate()
        .map(|(k, &eta)| {
            let chunk = &results[k * trials..(k + 1) * trials];
            let passes = chunk.iter().filter(|r| r.0).count();
            SweepRow {
                eta,
                trials,
                passes,
                pass_rate: if trials == 0 { 1.0 } else { passes as f64 / trials as f64 },
                first_failure: chunk.iter().find_map(|r| r.1.clone()),
            }
        })
        .collect();
    Ok(SweepTable { verifier: cfg.verifier, rows })
}
