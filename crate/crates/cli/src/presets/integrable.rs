use blendlab::ifs::{minimality_experiment, recurrence_experiment, Ifs};
use blendlab::integrable::{
    chain_of_tori_search, conjugate, conjugating_shear, flow_h_epsilon, linear_twist, minimal_generator_pack, moved_circle_distance, shadow_chain,
    twist_map, PackMode,
};
use blendlab::map::check_symplectic;
use blendlab::space::{Region, StateSpace};
use blendlab::SmoothMap;
use serde::{Deserialize, Serialize};

use super::{sample_box, to_json, Ctx};
use crate::config::{at_least, parse_params, positive};
use crate::error::{CliError, Context};
use crate::report::{CheckOutcome, Outcome, PointRow};

fn unit_box() -> Region {
    Region::new(vec![0.0, 0.0], vec![1.0, 1.0])
}

pub mod transitivity {
    use super::*;

    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(default, deny_unknown_fields)]
    pub struct Params {
        /// Rotation `ω(I) = I + offset`.
        pub offset: f64,
        pub mode: PackMode,
        pub seeds: usize,
        /// Coverage cell size; the grid has `1/eps` cells per axis.
        pub eps: f64,
        /// Cell visits per seed; `--budget` overrides it.
        pub budget: usize,
        /// Exploration runs on cells of size `eps / refine`.
        pub refine: usize,
        pub min_coverage: f64,
        /// Coverage ceiling for the lone twist.
        pub control_max: f64,
    }

    impl Default for Params {
        fn default() -> Self {
            Params { offset: 0.3, mode: PackMode::Three, seeds: 4, eps: 1.0 / 64.0, budget: 1_000_000, refine: 4, min_coverage: 0.99, control_max: 0.05 }
        }
    }

    fn params(t: &toml::Table) -> Result<Params, CliError> {
        let p: Params = parse_params(t)?;
        positive("eps", p.eps)?;
        at_least("seeds", p.seeds, 1)?;
        at_least("budget", p.budget, 1)?;
        at_least("refine", p.refine, 1)?;
        Ok(p)
    }

    pub fn validate(t: &toml::Table) -> Result<serde_json::Value, CliError> {
        params(t).map(|p| to_json(&p))
    }

    #[derive(Debug, Serialize)]
    struct Summary {
        generators: usize,
        total_cells: usize,
        pack_coverage: Vec<f64>,
        pack_visits: Vec<usize>,
        control_coverage: Vec<f64>,
    }

    pub fn run(ctx: &Ctx, t: &toml::Table) -> Result<Outcome, CliError> {
        const NAME: &str = "twist-transitivity";
        let p = params(t)?;
        let off = p.offset;
        let twist = twist_map(StateSpace::annulus(0.0, 1.0), move |i| i + off, |_| 1.0);
        let pack = minimal_generator_pack(&twist, p.mode, ctx.seed).ctx(NAME)?;
        let generators = pack.len();
        let ifs = Ifs::new(pack, unit_box()).ctx(NAME)?;
        let mut rng = ctx.rng(0);
        let seeds: Vec<Vec<f64>> = (0..p.seeds).map(|_| sample_box(&mut rng, &[0.0, 0.0], &[1.0, 1.0])).collect();
        let budget = ctx.budget_or(p.budget);
        let rep = minimality_experiment(&ifs, &seeds, p.eps, budget, p.refine).ctx(NAME)?;
        let single = Ifs::new(vec![twist.map.clone()], unit_box()).ctx(NAME)?;
        let control = minimality_experiment(&single, &seeds, p.eps, budget, p.refine).ctx(NAME)?;
        let checks = vec![
            CheckOutcome::asserted("pack_coverage", rep.min_coverage >= p.min_coverage)
                .value(rep.min_coverage)
                .threshold(format!(">= {}", p.min_coverage))
                .detail(format!("{generators} generators, {} seeds, {budget} visits per seed", p.seeds))
                .budget(rep.min_coverage < p.min_coverage && rep.any_exhausted()),
            CheckOutcome::asserted("single_twist_control", control.min_coverage <= p.control_max)
                .value(control.per_seed_coverage.iter().copied().fold(0.0, f64::max))
                .threshold(format!("<= {}", p.control_max)),
        ];
        let points = seeds.iter().enumerate().map(|(k, s)| PointRow::new("seed", k, s, None)).collect();
        let summary = Summary {
            generators,
            total_cells: rep.total_cells,
            pack_coverage: rep.per_seed_coverage,
            pack_visits: rep.visits,
            control_coverage: control.per_seed_coverage,
        };
        Ok(Outcome { params: to_json(&p), checks, summary: to_json(&summary), points, sweep: None })
    }
}

pub mod chain {
    use super::*;

    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(default, deny_unknown_fields)]
    pub struct Params {
        /// Shear amplitude of the conjugate twist.
        pub eps: f64,
        pub from: f64,
        pub to: f64,
        /// Half-width of the start and end bands.
        pub band: f64,
        pub max_links: usize,
        pub tolerance: f64,
        /// Parameter of the compactly supported flow.
        pub flow_eps: f64,
        pub flow_time: f64,
        /// Level of the circle the flow must move.
        pub moved_level: f64,
        pub flow_samples: usize,
    }

    impl Default for Params {
        fn default() -> Self {
            Params {
                eps: 0.1,
                from: 0.1,
                to: 0.9,
                band: 0.01,
                max_links: 22,
                tolerance: 0.01,
                flow_eps: 0.1,
                flow_time: 1.0,
                moved_level: 0.5,
                flow_samples: 64,
            }
        }
    }

    fn params(t: &toml::Table) -> Result<Params, CliError> {
        let p: Params = parse_params(t)?;
        positive("eps", p.eps)?;
        positive("band", p.band)?;
        positive("tolerance", p.tolerance)?;
        at_least("flow_samples", p.flow_samples, 1)?;
        for (k, v) in [("from", p.from), ("to", p.to), ("moved_level", p.moved_level)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(CliError::config(&format!("params.{k}"), format!("must lie in [0, 1], got {v}")));
            }
        }
        Ok(p)
    }

    pub fn validate(t: &toml::Table) -> Result<serde_json::Value, CliError> {
        params(t).map(|p| to_json(&p))
    }

    #[derive(Debug, Serialize)]
    struct Summary {
        links: usize,
        word_length: usize,
        arrivals: Vec<f64>,
        flow_symplectic_residual: f64,
        flow_identity_samples: usize,
        moved_distance: f64,
    }

    pub fn run(ctx: &Ctx, t: &toml::Table) -> Result<Outcome, CliError> {
        const NAME: &str = "chain-shadow";
        let p = params(t)?;
        let space = StateSpace::annulus(0.0, 1.0);
        let t1 = linear_twist(space.clone());
        let phi = conjugating_shear(space, p.eps).ctx(NAME)?;
        let t2 = conjugate(&t1.map, &phi).ctx(NAME)?;
        let ifs = Ifs::new(vec![t1.map.clone(), t2], unit_box()).ctx(NAME)?;
        let u = Region::new(vec![p.from - p.band, 0.0], vec![p.from + p.band, 1.0]);
        let v = Region::new(vec![p.to - p.band, 0.0], vec![p.to + p.band, 1.0]);
        let chain = chain_of_tori_search(&t1, p.eps, &u, &v, p.eps / (2.0 * 2f64.sqrt())).ctx(NAME)?;
        let w = shadow_chain(&ifs, &chain, &chain.start_point, p.tolerance).ctx(NAME)?;
        let replay = w.replay_check(&ifs, &chain, &chain.start_point);

        let flow = flow_h_epsilon(p.flow_eps, p.flow_time, None).ctx(NAME)?;
        let mut rng = ctx.rng(0);
        let outside: Vec<Vec<f64>> = (0..p.flow_samples).map(|_| sample_box(&mut rng, &[1.0, 0.0], &[2.0, 1.0])).collect();
        let identity = outside.iter().all(|x| flow.apply(x) == *x);
        let inside: Vec<Vec<f64>> = (0..p.flow_samples).map(|_| sample_box(&mut rng, &[0.05, 0.0], &[0.95, 1.0])).collect();
        let sym = check_symplectic(&flow, &inside, 1e-6).ctx(NAME)?;
        let moved = moved_circle_distance(&flow, p.moved_level, p.flow_samples);

        let checks = vec![
            CheckOutcome::asserted("chain_links", chain.len() <= p.max_links).value(chain.len() as f64).threshold(format!("<= {}", p.max_links)),
            CheckOutcome::asserted("shadow_replay", replay).detail(format!("word of length {} within {}", w.word.len(), p.tolerance)),
            CheckOutcome::asserted("flow_identity_outside", identity).detail(format!("{} samples with r >= 1", p.flow_samples)),
            CheckOutcome::asserted("flow_symplectic", sym.pass).value(sym.max_residual).threshold("<= 1e-6"),
            CheckOutcome::asserted("flow_moves_circle", moved > 1e-3).value(moved).threshold("> 1e-3"),
        ];
        let mut points: Vec<PointRow> = chain.targets().iter().enumerate().map(|(k, x)| PointRow::new("target", k, x, None)).collect();
        for (k, l) in chain.links.iter().enumerate() {
            points.push(PointRow::new("link", k, &[l.level, l.rotation], Some(&[l.tag.generator()])));
        }
        let summary = Summary {
            links: chain.len(),
            word_length: w.word.len(),
            arrivals: w.arrivals.clone(),
            flow_symplectic_residual: sym.max_residual,
            flow_identity_samples: p.flow_samples,
            moved_distance: moved,
        };
        Ok(Outcome { params: to_json(&p), checks, summary: to_json(&summary), points, sweep: None })
    }
}

pub mod recurrence {
    use super::*;

    #[derive(Debug, Clone, Serialize, Deserialize)]
    #[serde(default, deny_unknown_fields)]
    pub struct Params {
        pub samples: usize,
        pub eps: f64,
        pub horizon: usize,
        pub min_fraction: f64,
    }

    impl Default for Params {
        fn default() -> Self {
            Params { samples: 200, eps: 0.02, horizon: 500, min_fraction: 0.95 }
        }
    }

    fn params(t: &toml::Table) -> Result<Params, CliError> {
        let p: Params = parse_params(t)?;
        positive("eps", p.eps)?;
        at_least("samples", p.samples, 1)?;
        Ok(p)
    }

    pub fn validate(t: &toml::Table) -> Result<serde_json::Value, CliError> {
        params(t).map(|p| to_json(&p))
    }

    #[derive(Debug, Serialize)]
    struct Summary {
        twist_fraction: f64,
        forward_fraction: f64,
        backward_fraction: f64,
        line_fraction: f64,
    }

    pub fn run(ctx: &Ctx, t: &toml::Table) -> Result<Outcome, CliError> {
        let p = params(t)?;
        let twist = linear_twist(StateSpace::annulus(0.0, 1.0));
        let mut rng = ctx.rng(0);
        let samples: Vec<Vec<f64>> = (0..p.samples).map(|_| sample_box(&mut rng, &[0.0, 0.0], &[1.0, 1.0])).collect();
        let rep = recurrence_experiment(&twist.map, &samples, p.eps, p.horizon);
        let line = SmoothMap::endo("translation", StateSpace::line(), |x| vec![x[0] + 1.0]);
        let line_pts: Vec<Vec<f64>> = samples.iter().map(|s| vec![s[0]]).collect();
        let control = recurrence_experiment(&line, &line_pts, p.eps, p.horizon);
        let checks = vec![
            CheckOutcome::asserted("twist_recurrent", rep.recurrent_fraction >= p.min_fraction)
                .value(rep.recurrent_fraction)
                .threshold(format!(">= {}", p.min_fraction))
                .budget(rep.recurrent_fraction < p.min_fraction),
            CheckOutcome::asserted("line_control", control.recurrent_fraction == 0.0).value(control.recurrent_fraction).threshold("= 0"),
        ];
        let points = samples
            .iter()
            .zip(&rep.returns)
            .enumerate()
            .map(|(k, (s, r))| PointRow::new(if r.0.is_some() && r.1.is_some() { "recurrent" } else { "not_recurrent" }, k, s, None))
            .collect();
        let summary = Summary {
            twist_fraction: rep.recurrent_fraction,
            forward_fraction: rep.forward_fraction,
            backward_fraction: rep.backward_fraction,
            line_fraction: control.recurrent_fraction,
        };
        Ok(Outcome { params: to_json(&p), checks, summary: to_json(&summary), points, sweep: None })
    }
}
