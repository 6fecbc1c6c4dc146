use blendlab::ifs::{certify_density, construct_translations, verify_covering, verify_well_distributed, Ifs};
use blendlab::perturb::perturb_map;
use blendlab::space::{Region, StateSpace};
use blendlab::{Error, SmoothMap};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sample_box, to_json, Ctx};
use crate::config::{at_least, in_open_unit, non_negative, parse_params, positive};
use crate::error::{CliError, Context};
use crate::report::{CheckOutcome, Outcome, PointRow};

/// Covering, well-distribution and density results for one IFS.
#[derive(Debug, Clone, Serialize)]
struct DensityRun {
    covering: bool,
    margin: Option<f64>,
    well_distributed: Option<bool>,
    hits: usize,
    targets: usize,
    /// Longest certified word and twice the analytic bound for it.
    longest_word: usize,
    word_limit: usize,
    budget_exhausted: bool,
    #[serde(skip)]
    points: Vec<PointRow>,
}

impl DensityRun {
    fn words_within_bound(&self) -> bool {
        self.hits > 0 && self.longest_word <= self.word_limit
    }

    fn pass(&self, need_well_distributed: bool) -> bool {
        self.covering
            && (!need_well_distributed || self.well_distributed == Some(true))
            && self.hits == self.targets
            && self.words_within_bound()
    }
}

/// Certifies the covering on `grid_step`, then certifies density from `start`
/// to `targets` seeded targets of radius `radius`.
fn density_run(mut ifs: Ifs, start: &[f64], grid_step: f64, radius: f64, targets: usize, max_steps: usize, ctx: &Ctx, stream: u64) -> Result<DensityRun, Error> {
    let region = ifs.region().clone();
    let mut run = DensityRun {
        covering: false,
        margin: None,
        well_distributed: None,
        hits: 0,
        targets,
        longest_word: 0,
        word_limit: usize::MAX,
        budget_exhausted: false,
        points: Vec::new(),
    };
    let cert = match verify_covering(&ifs, &region, grid_step) {
        Ok(c) => c,
        Err(Error::Uncovered { .. }) => return Ok(run),
        Err(e) => return Err(e),
    };
    run.covering = true;
    run.margin = Some(cert.margin);
    ifs.compute_fixed_points(1e-13)?;
    run.well_distributed = Some(verify_well_distributed(&ifs, &region, cert.d_value).pass);
    ifs.set_certificate(cert);
    let mut rng = ctx.rng(stream);
    let goals: Vec<Vec<f64>> = (0..targets).map(|_| sample_box(&mut rng, &region.lo, &region.hi)).collect();
    for (k, t) in goals.iter().enumerate() {
        match certify_density(&ifs, start, t, radius, max_steps) {
            Ok(w) => {
                run.hits += 1;
                run.longest_word = run.longest_word.max(w.word.len());
                run.word_limit = run.word_limit.min(2 * w.bound.max(1));
                run.points.push(PointRow::new("target", k, t, Some(&w.word.0)));
                run.points.push(PointRow::new("endpoint", k, &ifs.apply_word(&w.word, start), Some(&w.word.0)));
            }
            Err(Error::StepLimit { .. }) => {
                run.budget_exhausted = true;
                run.points.push(PointRow::new("missed", k, t, None));
            }
            Err(e) => return Err(e),
        }
    }
    for (k, z) in ifs.fixed_point_coords().iter().enumerate() {
        run.points.push(PointRow::new("fixed_point", k, z, None));
    }
    Ok(run)
}

fn density_checks(prefix: &str, r: &DensityRun, well_distributed_asserted: bool) -> Vec<CheckOutcome> {
    let wd = r.well_distributed == Some(true);
    let wd_check = if well_distributed_asserted { CheckOutcome::asserted(format!("{prefix}well_distributed"), wd) } else { CheckOutcome::info(format!("{prefix}well_distributed"), wd) };
    let mut covering = CheckOutcome::asserted(format!("{prefix}covering"), r.covering);
    if let Some(m) = r.margin {
        covering = covering.value(m).detail("value is the covering margin");
    }
    vec![
        covering,
        wd_check,
        CheckOutcome::asserted(format!("{prefix}density"), r.covering && r.hits == r.targets)
            .value(r.hits as f64 / r.targets.max(1) as f64)
            .threshold("= 1")
            .budget(r.budget_exhausted),
        CheckOutcome::asserted(format!("{prefix}word_length"), r.words_within_bound())
            .value(r.longest_word as f64)
            .threshold(format!("<= {}", if r.word_limit == usize::MAX { 0 } else { r.word_limit })),
    ]
}

pub mod density {
    use super::*;

    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(default, deny_unknown_fields)]
    pub struct Params {
        /// Contraction ratio shared by the affine generators.
        pub scale: f64,
        pub shifts: Vec<f64>,
        pub region: [f64; 2],
        /// Orbit start.
        pub start: f64,
        /// Target radius.
        pub radius: f64,
        pub targets: usize,
        /// Longest word searched; `--budget` overrides it.
        pub budget: usize,
        pub grid_step: f64,
    }

    impl Default for Params {
        fn default() -> Self {
            Params { scale: 0.5, shifts: vec![0.0, 0.5], region: [0.0, 1.0], start: 0.3, radius: 1.0 / 256.0, targets: 16, budget: 64, grid_step: 1.0 / 256.0 }
        }
    }

    fn params(t: &toml::Table) -> Result<Params, CliError> {
        let p: Params = parse_params(t)?;
        in_open_unit("scale", p.scale)?;
        positive("radius", p.radius)?;
        positive("grid_step", p.grid_step)?;
        at_least("shifts", p.shifts.len(), 1)?;
        at_least("targets", p.targets, 1)?;
        if p.region[0] >= p.region[1] {
            return Err(CliError::config("params.region", "lower end must be below upper end"));
        }
        Ok(p)
    }

    pub fn validate(t: &toml::Table) -> Result<serde_json::Value, CliError> {
        params(t).map(|p| to_json(&p))
    }

    pub fn run(ctx: &Ctx, t: &toml::Table) -> Result<Outcome, CliError> {
        const NAME: &str = "ifs-density";
        let p = params(t)?;
        let (lo, hi) = (p.region[0], p.region[1]);
        let space = StateSpace::cube(1, lo - (hi - lo), hi + (hi - lo));
        let ifs = Ifs::affine_1d(space, Region::interval(lo, hi), p.scale, &p.shifts).ctx(NAME)?;
        let r = density_run(ifs, &[p.start], p.grid_step, p.radius, p.targets, ctx.budget_or(p.budget), ctx, 0).ctx(NAME)?;
        Ok(Outcome {
            params: to_json(&p),
            checks: density_checks("", &r, false),
            summary: to_json(&r),
            points: r.points.clone(),
            sweep: None,
        })
    }
}

pub mod construct {
    use super::*;

    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(default, deny_unknown_fields)]
    pub struct Params {
        /// Dimension of the contraction `x ↦ λx`.
        pub n: usize,
        pub lambda: f64,
        /// Radius of the ball `B_ε(0)` the family covers; perturbations are
        /// absolute, so 1 keeps them relative to the unit ball.
        pub eps: f64,
        /// Target radius for the density certificates.
        pub radius: f64,
        pub targets: usize,
        pub budget: usize,
        /// Perturbation size as a multiple of `λ`; 0 skips the perturbed runs.
        pub perturb_factor: f64,
        pub perturb_trials: usize,
    }

    impl Default for Params {
        fn default() -> Self {
            Params { n: 1, lambda: 0.5, eps: 1.0, radius: 1e-3, targets: 8, budget: 400, perturb_factor: 0.0, perturb_trials: 0 }
        }
    }

    fn params(t: &toml::Table) -> Result<Params, CliError> {
        let p: Params = parse_params(t)?;
        at_least("n", p.n, 1)?;
        in_open_unit("lambda", p.lambda)?;
        positive("eps", p.eps)?;
        positive("radius", p.radius)?;
        at_least("targets", p.targets, 1)?;
        non_negative("perturb_factor", p.perturb_factor)?;
        if p.perturb_factor >= 1.0 {
            return Err(CliError::config("params.perturb_factor", "perturbation must stay below the contraction"));
        }
        Ok(p)
    }

    pub fn validate(t: &toml::Table) -> Result<serde_json::Value, CliError> {
        params(t).map(|p| to_json(&p))
    }

    #[derive(Debug, Serialize)]
    struct Summary {
        k: usize,
        formula_k: f64,
        constant: f64,
        unperturbed: DensityRun,
        perturbed_passes: usize,
        perturbed_trials: usize,
        perturbed_failures: Vec<(usize, DensityRun)>,
    }

    pub fn run(ctx: &Ctx, t: &toml::Table) -> Result<Outcome, CliError> {
        const NAME: &str = "ifs-construct";
        let p = params(t)?;
        let phi = SmoothMap::diagonal(StateSpace::cube(p.n, -4.0 * p.eps, 4.0 * p.eps), &vec![p.lambda; p.n]);
        let fam = construct_translations(&phi, p.lambda, p.eps).ctx(NAME)?;
        let step = p.lambda * p.eps / 8.0;
        let start = vec![0.0; p.n];
        let budget = ctx.budget_or(p.budget);
        let base = density_run(fam.ifs.clone(), &start, step, p.radius, p.targets, budget, ctx, 0).ctx(NAME)?;
        let mut checks = density_checks("", &base, true);
        checks.push(
            CheckOutcome::asserted("generator_count", (fam.formula_k() - fam.k() as f64).abs() < 1e-9)
                .value(fam.k() as f64)
                .detail(format!("C 2^(n+1) λ^(-n) = {}", fam.formula_k())),
        );

        let mut summary = Summary {
            k: fam.k(),
            formula_k: fam.formula_k(),
            constant: fam.constant,
            unperturbed: base.clone(),
            perturbed_passes: 0,
            perturbed_trials: 0,
            perturbed_failures: Vec::new(),
        };
        if p.perturb_factor > 0.0 && p.perturb_trials > 0 {
            let eta = p.perturb_factor * p.lambda;
            let runs: Vec<Result<DensityRun, Error>> = (0..p.perturb_trials)
                .into_par_iter()
                .map(|trial| {
                    let seed = ctx.seed.wrapping_mul(1_000_003).wrapping_add(trial as u64);
                    let ifs = fam.ifs.map_generators(|i, g| perturb_map(g, eta, seed.wrapping_mul(100_000).wrapping_add(i as u64)))?;
                    density_run(ifs, &start, step, p.radius, p.targets, budget, ctx, 1 + trial as u64)
                })
                .collect();
            let mut exhausted = false;
            for (trial, r) in runs.into_iter().enumerate() {
                let r = r.ctx(NAME)?;
                exhausted |= r.budget_exhausted;
                if r.pass(true) {
                    summary.perturbed_passes += 1;
                } else {
                    summary.perturbed_failures.push((trial, r));
                }
            }
            summary.perturbed_trials = p.perturb_trials;
            checks.push(
                CheckOutcome::asserted("perturbed", summary.perturbed_passes == p.perturb_trials)
                    .value(summary.perturbed_passes as f64)
                    .threshold(format!("= {}", p.perturb_trials))
                    .detail(format!("η = {eta}; covering, well-distribution, density and word length per trial"))
                    .budget(exhausted),
            );
        }
        Ok(Outcome { params: to_json(&p), checks, summary: to_json(&summary), points: base.points, sweep: None })
    }
}
