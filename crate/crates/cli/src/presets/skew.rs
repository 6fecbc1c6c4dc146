use blendlab::perturb::perturb_map;
use blendlab::skew::blender::BlenderSearch;
use blendlab::skew::exact::{to_f64, AffineFamily, Q};
use blendlab::skew::{
    brute_force_unstable, enumerate_unstable, project_unstable_equals_ifs, verify_symbolic_cs_blender_with, EventuallyPeriodic, ShiftPoint,
    SkewProduct,
};
use blendlab::space::{Region, StateSpace};
use blendlab::SmoothMap;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{to_json, Ctx};
use crate::config::{at_least, in_open_unit, non_negative, parse_params, positive};
use crate::error::{CliError, Context};
use crate::report::{CheckOutcome, Outcome, PointRow};

pub mod equivalence {
    use super::*;

    #[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
    #[serde(rename_all = "snake_case")]
    pub enum Model {
        /// `y ↦ y/2`, `y ↦ y/2 + 1/2`.
        Dyadic,
        /// `y ↦ y/2 + {0, 1/4, 1/2}`, an overlapping covering model.
        Triple,
    }

    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(default, deny_unknown_fields)]
    pub struct Params {
        pub model: Model,
        /// Depth of the projection comparison.
        pub depth: usize,
        pub eps: f64,
        /// Depth of the exact leaf-by-leaf comparison against brute force.
        pub exact_depth: usize,
        /// Random eventually periodic base points in the exact comparison.
        pub exact_bases: usize,
    }

    impl Default for Params {
        fn default() -> Self {
            Params { model: Model::Dyadic, depth: 8, eps: 1.0 / 256.0, exact_depth: 6, exact_bases: 3 }
        }
    }

    fn params(t: &toml::Table) -> Result<Params, CliError> {
        let p: Params = parse_params(t)?;
        positive("eps", p.eps)?;
        if p.exact_depth > 10 {
            return Err(CliError::config("params.exact_depth", "brute force grows like d^n; keep it at most 10"));
        }
        Ok(p)
    }

    pub fn validate(t: &toml::Table) -> Result<serde_json::Value, CliError> {
        params(t).map(|p| to_json(&p))
    }

    fn family(m: Model) -> (AffineFamily, usize, Q) {
        match m {
            Model::Dyadic => (AffineFamily::halving(&[(0, 1), (1, 2)]).unwrap(), 0, Q::new(0, 1)),
            Model::Triple => (AffineFamily::halving(&[(0, 1), (1, 4), (1, 2)]).unwrap(), 1, Q::new(1, 2)),
        }
    }

    #[derive(Debug, Serialize)]
    struct Summary {
        symbols: usize,
        /// `(depth, matched, unstable cells, orbit cells)`.
        projection: Vec<(usize, bool, usize, usize)>,
        /// `(base, seed, leaves, equal)`.
        exact: Vec<(String, String, usize, bool)>,
    }

    pub fn run(ctx: &Ctx, t: &toml::Table) -> Result<Outcome, CliError> {
        const NAME: &str = "skew-unstable-equivalence";
        let p = params(t)?;
        let (fam, j, y) = family(p.model);
        let d = fam.maps().len();
        let skew = fam.to_skew(StateSpace::cube(1, 0.0, 1.0)).ctx(NAME)?;
        let x = ShiftPoint::constant(j, d);
        let mut summary = Summary { symbols: d, projection: Vec::new(), exact: Vec::new() };
        for n in 0..=p.depth {
            let r = project_unstable_equals_ifs(&skew, &x, &[to_f64(&y)], n, p.eps).ctx(NAME)?;
            summary.projection.push((n, r.matched, r.unstable_cells, r.orbit_cells));
        }

        let mut rng = ctx.rng(0);
        let mut bases = vec![x.clone()];
        for _ in 0..p.exact_bases {
            let mut tail = |len: usize| (0..len).map(|_| rng.random_range(0..d)).collect::<Vec<_>>();
            let (a, b, c, e) = (tail(3), tail(2), tail(2), tail(1));
            bases.push(ShiftPoint::new(EventuallyPeriodic::new(a, b), EventuallyPeriodic::new(c, e), d));
        }
        for base in &bases {
            for seed in [y, Q::new(3, 11)] {
                let en = enumerate_unstable(&fam, base, &seed, p.exact_depth).ctx(NAME)?;
                let bf = brute_force_unstable(&fam, base, &seed, p.exact_depth).ctx(NAME)?;
                summary.exact.push((base.to_string(), seed.to_string(), en.len(), en.leaves == bf));
            }
        }

        let en = enumerate_unstable(&skew, &x, &vec![to_f64(&y)], p.depth).ctx(NAME)?;
        let points = en
            .at_depth(p.depth)
            .enumerate()
            .map(|(k, l)| PointRow::new("leaf", k, &l.fiber, Some(&l.word.0)))
            .collect();
        let matched = summary.projection.iter().filter(|r| r.1).count();
        let exact_ok = summary.exact.iter().filter(|r| r.3).count();
        let checks = vec![
            CheckOutcome::asserted("projection", matched == summary.projection.len())
                .value(matched as f64)
                .threshold(format!("= {} depths", summary.projection.len()))
                .detail(format!("projected leaf cells equal IFS orbit cells at ε = {}", p.eps)),
            CheckOutcome::asserted("exact_enumeration", exact_ok == summary.exact.len())
                .value(exact_ok as f64)
                .threshold(format!("= {} cases", summary.exact.len()))
                .detail(format!("leaf-for-leaf against brute-force iteration to depth {}", p.exact_depth)),
        ];
        Ok(Outcome { params: to_json(&p), checks, summary: to_json(&summary), points, sweep: None })
    }
}

pub mod blender {
    use super::*;

    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(default, deny_unknown_fields)]
    pub struct Params {
        pub scale: f64,
        pub shifts: Vec<f64>,
        pub region: [f64; 2],
        pub strips: usize,
        /// Fiber radius of each s-strip.
        pub radius: f64,
        pub max_depth: usize,
        /// Perturbation size as a multiple of the covering margin; 0 skips it.
        pub perturb_factor: f64,
        pub perturb_trials: usize,
    }

    impl Default for Params {
        fn default() -> Self {
            Params {
                scale: 0.5,
                shifts: vec![0.0, 0.25, 0.5],
                region: [0.125, 0.875],
                strips: 100,
                radius: 1.0 / 32.0,
                max_depth: 8,
                perturb_factor: 0.3,
                perturb_trials: 1,
            }
        }
    }

    fn params(t: &toml::Table) -> Result<Params, CliError> {
        let p: Params = parse_params(t)?;
        in_open_unit("scale", p.scale)?;
        positive("radius", p.radius)?;
        non_negative("perturb_factor", p.perturb_factor)?;
        at_least("shifts", p.shifts.len(), 2)?;
        at_least("strips", p.strips, 1)?;
        if p.region[0] >= p.region[1] {
            return Err(CliError::config("params.region", "lower end must be below upper end"));
        }
        Ok(p)
    }

    pub fn validate(t: &toml::Table) -> Result<serde_json::Value, CliError> {
        params(t).map(|p| to_json(&p))
    }

    #[derive(Debug, Serialize)]
    struct Summary {
        covering_margin: Option<f64>,
        worst_depth: Option<usize>,
        strips_hit: usize,
        eta: Option<f64>,
        /// `(strips hit, worst depth)` per perturbed trial.
        perturbed: Vec<(usize, Option<usize>)>,
    }

    pub fn run(ctx: &Ctx, t: &toml::Table) -> Result<Outcome, CliError> {
        const NAME: &str = "symbolic-blender";
        let p = params(t)?;
        let space = StateSpace::cube(1, 0.0, 1.0);
        let gens: Vec<SmoothMap> = p.shifts.iter().map(|c| SmoothMap::affine_1d(space.clone(), p.scale, *c)).collect();
        let skew = SkewProduct::new(gens).ctx(NAME)?;
        let region = Region::interval(p.region[0], p.region[1]);
        let search = BlenderSearch { max_depth: p.max_depth, ..BlenderSearch::default() };
        let rep = verify_symbolic_cs_blender_with(&skew, &region, p.radius, p.strips, ctx.seed, &search).ctx(NAME)?;
        let mut summary = Summary { covering_margin: rep.covering_margin, worst_depth: rep.worst_depth, strips_hit: rep.strips_hit, eta: None, perturbed: Vec::new() };
        let mut checks = vec![
            CheckOutcome::asserted("covering", rep.covering_ok).value(rep.covering_margin.unwrap_or(f64::NAN)).detail("value is the covering margin"),
            CheckOutcome::info("well_distributed", rep.well_distributed == Some(true)),
            CheckOutcome::asserted("strips", rep.pass)
                .value(rep.strips_hit as f64 / rep.strips as f64)
                .threshold("= 1")
                .detail(format!("{} s-strips of fiber radius {} within depth {}", rep.strips, p.radius, p.max_depth))
                .budget(!rep.pass),
        ];
        let mut points: Vec<PointRow> = rep
            .outcomes
            .iter()
            .enumerate()
            .map(|(k, o)| PointRow::new(if o.hit_depth.is_some() { "hit" } else { "missed" }, k, &o.center, o.word.as_ref().map(|w| w.0.as_slice())))
            .collect();
        points.push(PointRow::new("fixed_point", rep.fixed_symbol, &rep.fixed_point, None));

        if p.perturb_factor > 0.0 && p.perturb_trials > 0 {
            if let Some(m) = rep.covering_margin {
                let eta = p.perturb_factor * m;
                summary.eta = Some(eta);
                let mut all = true;
                for trial in 0..p.perturb_trials {
                    let seed = ctx.seed.wrapping_mul(1_000_003).wrapping_add(trial as u64);
                    let phi: Vec<SmoothMap> = skew.fiber_maps().iter().enumerate().map(|(i, g)| perturb_map(g, eta, seed * 100 + i as u64)).collect();
                    let perturbed = skew.with_fiber_maps(phi).ctx(NAME)?;
                    let r = verify_symbolic_cs_blender_with(&perturbed, &region, p.radius, p.strips, ctx.seed, &search).ctx(NAME)?;
                    all &= r.pass;
                    summary.perturbed.push((r.strips_hit, r.worst_depth));
                }
                checks.push(
                    CheckOutcome::asserted("perturbed_strips", all)
                        .value(eta)
                        .detail(format!("{} trials at η = {} × covering margin", p.perturb_trials, p.perturb_factor))
                        .budget(!all),
                );
            }
        }
        Ok(Outcome { params: to_json(&p), checks, summary: to_json(&summary), points, sweep: None })
    }
}
