use blendlab::blender::{
    almost_minimality_experiment, build_geometric_model, check_weak_power, desk_model, robustness_sweep, sample_strips, verify_cone_invariance,
    verify_covering_geometric, verify_double_blender, verify_strips, BlockGroup, DeskParams, FiberRole, GeometricBlenderModel, HorseshoeBase,
    StripBatch, StripKind, SweepConfig, Verifier,
};
use blendlab::map::check_symplectic;
use blendlab::space::{Region, StateSpace};
use blendlab::SmoothMap;
use serde::{Deserialize, Serialize};

use super::{sample_box, to_json, Ctx};
use crate::config::{at_least, in_open_unit, non_negative, parse_params, positive};
use crate::error::{CliError, Context};
use crate::report::{CheckOutcome, Outcome, PointRow, SweepCsvRow};

/// Affine horseshoe on three symbols times `y ↦ scale·y + shift`.
fn triple_model(scale: f64, shifts: &[f64], region: [f64; 2], symplectic: bool) -> blendlab::Result<GeometricBlenderModel> {
    let sp = StateSpace::cube(1, -1.0, 2.0);
    let gens = shifts.iter().map(|c| SmoothMap::affine_1d(sp.clone(), scale, *c)).collect();
    let base = HorseshoeBase::affine(shifts.len(), 0.1, 10.0)?;
    build_geometric_model(base, gens, None, Region::interval(region[0], region[1]), None, symplectic)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub scale: f64,
    pub shifts: Vec<f64>,
    pub region: [f64; 2],
    /// Strips per direction.
    pub strips: usize,
    /// Smallest strip radius.
    pub r_min: f64,
    pub depth: usize,
    /// Covering grid step.
    pub grid_step: f64,
    /// Region samples per axis for cone and symplectic checks.
    pub samples_per_axis: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            scale: 0.5,
            shifts: vec![0.0, 0.25, 0.5],
            region: [0.125, 0.875],
            strips: 100,
            r_min: 1.0 / 32.0,
            depth: 10,
            grid_step: 1.0 / 64.0,
            samples_per_axis: 4,
        }
    }
}

fn model_params(t: &toml::Table) -> Result<ModelParams, CliError> {
    let p: ModelParams = parse_params(t)?;
    in_open_unit("scale", p.scale)?;
    positive("r_min", p.r_min)?;
    positive("grid_step", p.grid_step)?;
    at_least("shifts", p.shifts.len(), 2)?;
    at_least("strips", p.strips, 1)?;
    at_least("samples_per_axis", p.samples_per_axis, 1)?;
    if p.region[0] >= p.region[1] {
        return Err(CliError::config("params.region", "lower end must be below upper end"));
    }
    Ok(p)
}

fn strip_check(name: &str, b: &StripBatch, depth: usize) -> CheckOutcome {
    CheckOutcome::asserted(name, b.pass)
        .value(b.hits as f64 / b.total.max(1) as f64)
        .threshold("= 1")
        .detail(format!("{} strips, worst depth {:?}, limit {depth}", b.total, b.worst_depth))
        .budget(!b.pass && b.outcomes.iter().all(|o| o.error.is_none()))
}

fn strip_points(series: &str, b: &StripBatch) -> Vec<PointRow> {
    b.outcomes
        .iter()
        .enumerate()
        .map(|(k, o)| {
            let word = o.report.as_ref().map(|r| r.witness_word.0.as_slice());
            PointRow::new(series, k, &[o.strip.leaf, o.strip.center[0]], word)
        })
        .collect()
}

pub mod geometric {
    use super::*;

    pub fn validate(t: &toml::Table) -> Result<serde_json::Value, CliError> {
        model_params(t).map(|p| to_json(&p))
    }

    #[derive(Debug, Serialize)]
    struct Summary {
        covering_margin: Option<f64>,
        d_value: Option<f64>,
        strips_hit: usize,
        worst_depth: Option<usize>,
        cone_margin: f64,
        rays_tested: usize,
    }

    pub fn run(ctx: &Ctx, t: &toml::Table) -> Result<Outcome, CliError> {
        const NAME: &str = "geometric-blender";
        let p = model_params(t)?;
        let m = triple_model(p.scale, &p.shifts, p.region, false).ctx(NAME)?;
        let cov = verify_covering_geometric(&m, p.grid_step).ctx(NAME)?;
        let strips = sample_strips(&m, StripKind::S, p.strips, p.r_min, ctx.seed).ctx(NAME)?;
        let batch = verify_strips(&m, &strips, None, p.depth, 1e-9).ctx(NAME)?;
        let cones = verify_cone_invariance(m.map(), &m.cones, &m.region_samples(p.samples_per_axis));
        let checks = vec![
            CheckOutcome::asserted("covering", cov.pass).value(cov.cs.margin.unwrap_or(f64::NAN)).detail(cov.reduction.clone()),
            CheckOutcome::info("well_distributed", cov.cs.well_distributed == Some(true)),
            strip_check("s_strips", &batch, p.depth),
            CheckOutcome::asserted("cones", cones.pass).value(cones.min_margin).detail(format!("{} rays", cones.rays_tested)),
        ];
        let summary = Summary {
            covering_margin: cov.cs.margin,
            d_value: cov.cs.d_value,
            strips_hit: batch.hits,
            worst_depth: batch.worst_depth,
            cone_margin: cones.min_margin,
            rays_tested: cones.rays_tested,
        };
        Ok(Outcome { params: to_json(&p), checks, summary: to_json(&summary), points: strip_points("s_strip", &batch), sweep: None })
    }
}

pub mod double {
    use super::*;

    pub fn validate(t: &toml::Table) -> Result<serde_json::Value, CliError> {
        model_params(t).map(|p| to_json(&p))
    }

    #[derive(Debug, Serialize)]
    struct Summary {
        s_hits: usize,
        u_hits: usize,
        s_worst_depth: Option<usize>,
        u_worst_depth: Option<usize>,
        symplectic_residual: f64,
    }

    pub fn run(ctx: &Ctx, t: &toml::Table) -> Result<Outcome, CliError> {
        const NAME: &str = "double-blender";
        let p = model_params(t)?;
        let m = triple_model(p.scale, &p.shifts, p.region, true).ctx(NAME)?;
        let s = sample_strips(&m, StripKind::S, p.strips, p.r_min, ctx.seed).ctx(NAME)?;
        let u = sample_strips(&m, StripKind::U, p.strips, p.r_min, ctx.seed.wrapping_add(1)).ctx(NAME)?;
        let rep = verify_double_blender(&m, &s, &u, p.depth, 1e-9).ctx(NAME)?;
        let sym = check_symplectic(m.map(), &m.region_samples(p.samples_per_axis), 1e-8).ctx(NAME)?;
        let checks = vec![
            strip_check("s_strips", &rep.s_side, p.depth),
            strip_check("u_strips", &rep.u_side, p.depth),
            CheckOutcome::asserted("symplectic", sym.pass).value(sym.max_residual).threshold("< 1e-8"),
        ];
        let summary = Summary {
            s_hits: rep.s_side.hits,
            u_hits: rep.u_side.hits,
            s_worst_depth: rep.s_side.worst_depth,
            u_worst_depth: rep.u_side.worst_depth,
            symplectic_residual: sym.max_residual,
        };
        let mut points = strip_points("s_strip", &rep.s_side);
        points.extend(strip_points("u_strip", &rep.u_side));
        Ok(Outcome { params: to_json(&p), checks, summary: to_json(&summary), points, sweep: None })
    }
}

pub mod f_mu {
    use super::*;

    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(default, deny_unknown_fields)]
    pub struct Params {
        /// Blender rows and columns.
        pub l: usize,
        /// Horseshoe symbols; at least `2l + 5`.
        pub symbols: usize,
        pub mu: f64,
        /// `ε = μ / ζ`.
        pub zeta: f64,
        pub shear: f64,
        pub turn: f64,
        pub chart_scale: f64,
        /// Fiber samples for the connection search.
        pub samples: usize,
        pub depth: usize,
        /// Samples of the `μ = 0` product comparison.
        pub product_samples: usize,
        /// Fiber samples per block in the block comparison.
        pub block_samples: usize,
        /// Strips per direction for the embedded blender.
        pub blender_strips: usize,
        /// Weak-hyperbolicity slack and power; must satisfy `(1-δ)^k > 1/2`.
        pub delta: f64,
        pub k: u32,
        pub min_fraction: f64,
    }

    impl Default for Params {
        fn default() -> Self {
            let d = DeskParams::default();
            Params {
                l: d.l,
                symbols: 2 * d.l + 5,
                mu: d.mu,
                zeta: d.zeta,
                shear: d.shear,
                turn: d.turn,
                chart_scale: d.chart_scale,
                samples: 64,
                depth: 12,
                product_samples: 1000,
                block_samples: 8,
                blender_strips: 20,
                delta: 0.01,
                k: 60,
                min_fraction: 0.95,
            }
        }
    }

    fn params(t: &toml::Table) -> Result<Params, CliError> {
        let p: Params = parse_params(t)?;
        at_least("l", p.l, 1)?;
        if p.symbols != 2 * p.l + 5 {
            return Err(CliError::config("params.symbols", format!("the desk model uses exactly 2l + 5 = {} symbols, got {}", 2 * p.l + 5, p.symbols)));
        }
        if !(0.0..=1.0).contains(&p.mu) {
            return Err(CliError::config("params.mu", format!("must lie in [0, 1], got {}", p.mu)));
        }
        positive("zeta", p.zeta)?;
        non_negative("shear", p.shear)?;
        positive("chart_scale", p.chart_scale)?;
        in_open_unit("delta", p.delta)?;
        at_least("samples", p.samples, 1)?;
        at_least("blender_strips", p.blender_strips, 1)?;
        check_weak_power(p.delta, p.k).map_err(|e| CliError::config("params.k", e.to_string()))?;
        Ok(p)
    }

    pub fn validate(t: &toml::Table) -> Result<serde_json::Value, CliError> {
        params(t).map(|p| to_json(&p))
    }

    #[derive(Debug, Serialize)]
    struct Summary {
        eps: f64,
        product_max_error: f64,
        blocks_compared: usize,
        block_mismatches: Vec<(usize, usize)>,
        blender_pass: bool,
        connected_fraction: f64,
        forward_fraction: f64,
        backward_fraction: f64,
        leaf_bound: f64,
    }

    pub fn run(ctx: &Ctx, t: &toml::Table) -> Result<Outcome, CliError> {
        const NAME: &str = "f-mu-minimality";
        let p = params(t)?;
        let desk_params =
            DeskParams { l: p.l, mu: p.mu, zeta: p.zeta, shear: p.shear, turn: p.turn, chart_scale: p.chart_scale, seed: ctx.seed };
        let desk = desk_model(&desk_params).ctx(NAME)?;
        let at_zero = desk_model(&DeskParams { mu: 0.0, ..desk_params.clone() }).ctx(NAME)?;
        let mut rng = ctx.rng(0);

        // μ = 0 against f₁ × f₂, bit for bit.
        let dom = at_zero.fmu.map().domain().clone();
        let mut product_err = 0.0f64;
        let mut product_equal = true;
        for _ in 0..p.product_samples {
            let q = dom.sample(&mut rng);
            let (a, b) = (at_zero.fmu.apply(&q), at_zero.fmu.unperturbed(&q));
            product_equal &= a == b;
            product_err = a.iter().zip(&b).fold(product_err, |m, (x, y)| m.max((x - y).abs()));
        }

        // At μ > 0, every block of 𝒥₁ × 𝒥₁ acts as f₁ on the base and as the
        // composed minimality map on the fiber.
        let fmu = &desk.fmu;
        let t_maps = fmu.minimality_maps();
        let fwd = fmu.schedule.forward_symbols();
        let blocks = fmu.schedule.blocks(&fmu.base).ctx(NAME)?;
        let fiber_region = &desk.sample_region;
        let mut compared = 0;
        let mut mismatches = Vec::new();
        for b in blocks.iter().filter(|b| b.group == BlockGroup::MinimalityForward && fmu.schedule.col_roles[b.j] == FiberRole::Untouched) {
            let k = fwd.iter().position(|&s| s == b.i).expect("forward row");
            let base_pt = fmu.block_point(b.i, b.j, 0.5);
            let mut ok = true;
            for _ in 0..p.block_samples {
                let y = sample_box(&mut rng, &fiber_region.lo, &fiber_region.hi);
                let mut q = base_pt.clone();
                q.extend(&y);
                let img = fmu.apply(&q);
                let mut expect = fmu.base.apply(&base_pt);
                expect.extend(t_maps[k].apply(&y));
                ok &= img == expect;
                compared += 1;
            }
            if !ok {
                mismatches.push((b.i, b.j));
            }
        }

        let bl = &desk.blender;
        let s = sample_strips(bl, StripKind::S, p.blender_strips, 1.0 / 32.0, ctx.seed).ctx(NAME)?;
        let u = sample_strips(bl, StripKind::U, p.blender_strips, 1.0 / 32.0, ctx.seed.wrapping_add(1)).ctx(NAME)?;
        let blender = verify_double_blender(bl, &s, &u, p.depth, 1e-9).ctx(NAME)?;
        let leaf_bound = fmu.base.width();
        let rep = almost_minimality_experiment(&desk, blender.pass, p.samples, p.depth, leaf_bound, ctx.seed.wrapping_add(7));

        let checks = vec![
            CheckOutcome::asserted("product_at_zero", product_equal).value(product_err).detail(format!("{} samples", p.product_samples)),
            CheckOutcome::asserted("forward_blocks_match", compared > 0 && mismatches.is_empty())
                .value(compared as f64)
                .detail("block fiber equals the composed minimality map exactly"),
            CheckOutcome::asserted("blender", blender.pass).detail(format!("{} s- and u-strips", p.blender_strips)),
            CheckOutcome::asserted("connected_fraction", rep.connected_fraction >= p.min_fraction)
                .value(rep.connected_fraction)
                .threshold(format!(">= {}", p.min_fraction))
                .detail(format!("{} samples, depth {}", p.samples, p.depth))
                .budget(rep.connected_fraction < p.min_fraction),
        ];
        let mut points = Vec::new();
        for (k, o) in rep.outcomes.iter().enumerate() {
            let series = match (o.forward.is_some(), o.backward.is_some()) {
                (true, true) => "connected",
                (true, false) => "forward_only",
                (false, true) => "backward_only",
                (false, false) => "unconnected",
            };
            points.push(PointRow::new(series, k, &o.q, o.forward.as_deref()));
        }
        let summary = Summary {
            eps: fmu.eps,
            product_max_error: product_err,
            blocks_compared: compared,
            block_mismatches: mismatches,
            blender_pass: blender.pass,
            connected_fraction: rep.connected_fraction,
            forward_fraction: rep.forward_fraction,
            backward_fraction: rep.backward_fraction,
            leaf_bound,
        };
        Ok(Outcome { params: to_json(&p), checks, summary: to_json(&summary), points, sweep: None })
    }
}

pub mod sweep {
    use super::*;

    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(default, deny_unknown_fields)]
    pub struct Params {
        /// `strip-intersection`, `double-blender` or `cones`.
        pub verifier: String,
        pub etas: Vec<f64>,
        pub trials: usize,
        /// Rows with `η` at most this must pass every trial.
        pub assert_up_to: f64,
        pub strips: usize,
        pub depth: usize,
        pub symplectic: bool,
    }

    impl Default for Params {
        fn default() -> Self {
            Params {
                verifier: "strip-intersection".into(),
                etas: vec![0.0, 0.005, 0.01, 0.02, 0.05],
                trials: 20,
                assert_up_to: 0.01,
                strips: 20,
                depth: 10,
                symplectic: true,
            }
        }
    }

    fn params(t: &toml::Table) -> Result<(Params, Verifier), CliError> {
        let p: Params = parse_params(t)?;
        let v: Verifier = p.verifier.parse().map_err(|e: blendlab::Error| CliError::config("params.verifier", e.to_string()))?;
        if v == Verifier::DoubleBlender && !p.symplectic {
            return Err(CliError::config("params.verifier", "double-blender needs symplectic = true"));
        }
        at_least("etas", p.etas.len(), 1)?;
        at_least("trials", p.trials, 1)?;
        for e in &p.etas {
            non_negative("etas", *e)?;
        }
        Ok((p, v))
    }

    pub fn validate(t: &toml::Table) -> Result<serde_json::Value, CliError> {
        params(t).map(|(p, _)| to_json(&p))
    }

    pub fn run(ctx: &Ctx, t: &toml::Table) -> Result<Outcome, CliError> {
        const NAME: &str = "robustness-sweep";
        let (p, verifier) = params(t)?;
        let d = ModelParams::default();
        let m = triple_model(d.scale, &d.shifts, d.region, p.symplectic).ctx(NAME)?;
        let cfg = SweepConfig { verifier, strips: p.strips, depth: p.depth, ..SweepConfig::default() };
        let table = robustness_sweep(&m, &cfg, &p.etas, p.trials, ctx.seed).ctx(NAME)?;
        let mut checks = Vec::new();
        for r in &table.rows {
            let name = format!("eta_{}", r.eta);
            let c = if r.eta <= p.assert_up_to { CheckOutcome::asserted(name, r.pass_rate == 1.0) } else { CheckOutcome::info(name, r.pass_rate == 1.0) };
            let mut c = c.value(r.pass_rate).threshold("= 1");
            if let Some(f) = &r.first_failure {
                c = c.detail(f.clone());
            }
            checks.push(c);
        }
        let rows = table.rows.iter().map(|r| SweepCsvRow { eta: r.eta, trials: r.trials, passes: r.passes, pass_rate: r.pass_rate }).collect();
        Ok(Outcome { params: to_json(&p), checks, summary: to_json(&table), points: Vec::new(), sweep: Some(rows) })
    }
}
