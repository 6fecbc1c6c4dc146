//! The thirteen acceptance criteria, each run through the experiment runner at
//! its stated scale and time limit. Run with `--nocapture` to see one
//! PASS/FAIL line per criterion.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use blendlab_cli::presets::REGISTRY;
use blendlab_cli::{run, ExperimentConfig, Overrides, Report};

fn out_dir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("blendlab-acceptance-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn exec(cfg: &ExperimentConfig, tag: &str) -> Result<Report, String> {
    run(cfg, &Overrides { out_dir: Some(out_dir(tag)), ..Overrides::default() }).map_err(|e| e.to_string())
}

/// Names the failed checks among `names`, or every failed asserted check if `names` is empty.
fn failed(rep: &Report, names: &[&str]) -> Vec<String> {
    let mut out = Vec::new();
    for c in &rep.checks {
        let wanted = if names.is_empty() { c.asserted } else { names.contains(&c.name.as_str()) };
        if wanted && !c.pass {
            out.push(format!("{}:{}/{:?}", rep.experiment, c.name, c.value));
        }
    }
    for n in names {
        if !rep.checks.iter().any(|c| c.name == *n) {
            out.push(format!("{}:{n} missing", rep.experiment));
        }
    }
    out
}

struct Criterion {
    id: u32,
    what: &'static str,
    limit: Option<Duration>,
    body: fn() -> Result<Vec<String>, String>,
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn c1() -> Result<Vec<String>, String> {
    let mut bad = Vec::new();
    for model in ["dyadic", "triple"] {
        let cfg = ExperimentConfig::new("skew-unstable-equivalence").with_param("model", model).with_param("depth", 8).with_param("eps", 1.0 / 256.0);
        bad.extend(failed(&exec(&cfg, "c1")?, &["projection"]));
    }
    Ok(bad)
}

fn c2() -> Result<Vec<String>, String> {
    let mut bad = Vec::new();
    for model in ["dyadic", "triple"] {
        let cfg = ExperimentConfig::new("skew-unstable-equivalence").with_param("model", model).with_param("depth", 0).with_param("exact_depth", 6);
        bad.extend(failed(&exec(&cfg, "c2")?, &["exact_enumeration"]));
    }
    Ok(bad)
}

fn construct_grid(factor: f64, trials: usize, checks: &[&str], tag: &str) -> Result<Vec<String>, String> {
    let mut bad = Vec::new();
    for n in [1, 2] {
        for lambda in [0.3, 0.5, 0.7] {
            let cfg = ExperimentConfig::new("ifs-construct")
                .with_param("n", n)
                .with_param("lambda", lambda)
                .with_param("eps", 1.0)
                .with_param("radius", 1e-3)
                .with_param("perturb_factor", factor)
                .with_param("perturb_trials", trials);
            let rep = exec(&cfg, tag)?;
            bad.extend(failed(&rep, checks).into_iter().map(|f| format!("n={n} λ={lambda} {f}")));
        }
    }
    Ok(bad)
}

fn c3() -> Result<Vec<String>, String> {
    construct_grid(0.0, 0, &["covering", "well_distributed", "density", "word_length", "generator_count"], "c3")
}

fn c4() -> Result<Vec<String>, String> {
    construct_grid(0.05, 20, &["perturbed"], "c4")
}

fn c5() -> Result<Vec<String>, String> {
    let cfg = ExperimentConfig::new("symbolic-blender")
        .with_param("strips", 100)
        .with_param("radius", 1.0 / 32.0)
        .with_param("max_depth", 8)
        .with_param("perturb_factor", 0.3)
        .with_param("perturb_trials", 1);
    Ok(failed(&exec(&cfg, "c5")?, &["strips", "perturbed_strips"]))
}

fn c6() -> Result<Vec<String>, String> {
    let cfg = ExperimentConfig::new("double-blender").with_param("strips", 100);
    Ok(failed(&exec(&cfg, "c6")?, &["s_strips", "u_strips", "symplectic"]))
}

fn c7() -> Result<Vec<String>, String> {
    let cfg = ExperimentConfig::new("f-mu-minimality").with_param("product_samples", 1000).with_param("samples", 1);
    Ok(failed(&exec(&cfg, "c7")?, &["product_at_zero", "forward_blocks_match"]))
}

fn c8() -> Result<Vec<String>, String> {
    let cfg = ExperimentConfig::new("f-mu-minimality").with_param("samples", 64).with_param("depth", 12).with_param("min_fraction", 0.95);
    Ok(failed(&exec(&cfg, "c8")?, &["blender", "connected_fraction"]))
}

fn c9() -> Result<Vec<String>, String> {
    let cfg = ExperimentConfig::new("twist-transitivity")
        .with_param("eps", 1.0 / 64.0)
        .with_param("budget", 1_000_000)
        .with_param("min_coverage", 0.99)
        .with_param("control_max", 0.05);
    Ok(failed(&exec(&cfg, "c9")?, &["pack_coverage", "single_twist_control"]))
}

fn c10() -> Result<Vec<String>, String> {
    let cfg = ExperimentConfig::new("chain-shadow").with_param("eps", 0.1).with_param("from", 0.1).with_param("to", 0.9).with_param("max_links", 22);
    Ok(failed(&exec(&cfg, "c10")?, &["chain_links", "shadow_replay"]))
}

fn c11() -> Result<Vec<String>, String> {
    let cfg = ExperimentConfig::new("chain-shadow").with_param("moved_level", 0.5);
    Ok(failed(&exec(&cfg, "c11")?, &["flow_identity_outside", "flow_symplectic", "flow_moves_circle"]))
}

fn c12() -> Result<Vec<String>, String> {
    let cfg = ExperimentConfig::new("recurrence-fraction").with_param("eps", 0.02).with_param("horizon", 500).with_param("min_fraction", 0.95);
    Ok(failed(&exec(&cfg, "c12")?, &["twist_recurrent", "line_control"]))
}

fn c13() -> Result<Vec<String>, String> {
    let mut bad = Vec::new();
    for p in REGISTRY {
        let cfg = ExperimentConfig::new(p.name).with_seed(11);
        let (a, b) = (exec(&cfg, "c13a")?, exec(&cfg, "c13b")?);
        if a.canonical_json() != b.canonical_json() {
            bad.push(format!("{}: report differs", p.name));
        }
        for f in ["points.csv", "sweep.csv"] {
            let read = |tag: &str| std::fs::read(out_dir(tag).join(p.name).join(f)).ok();
            if read("c13a") != read("c13b") {
                bad.push(format!("{}: {f} differs", p.name));
            }
        }
    }
    Ok(bad)
}

#[test]
fn acceptance() {
    let criteria = [
        Criterion { id: 1, what: "projected unstable sets equal IFS orbit cells", limit: secs(10), body: c1 },
        Criterion { id: 2, what: "unstable enumeration equals brute force", limit: secs(5), body: c2 },
        Criterion { id: 3, what: "translation family covers, is well distributed and dense", limit: secs(60), body: c3 },
        Criterion { id: 4, what: "density checks survive perturbation", limit: secs(120), body: c4 },
        Criterion { id: 5, what: "symbolic blender strips", limit: secs(60), body: c5 },
        Criterion { id: 6, what: "symplectic double blender", limit: secs(120), body: c6 },
        Criterion { id: 7, what: "F_mu product at zero and block behavior", limit: None, body: c7 },
        Criterion { id: 8, what: "almost minimality on the desk model", limit: secs(600), body: c8 },
        Criterion { id: 9, what: "twist IFS transitivity and single-twist control", limit: secs(300), body: c9 },
        Criterion { id: 10, what: "chain of tori and shadowing", limit: secs(60), body: c10 },
        Criterion { id: 11, what: "compactly supported flow", limit: secs(30), body: c11 },
        Criterion { id: 12, what: "recurrence of the twist, none for the translation", limit: secs(10), body: c12 },
        Criterion { id: 13, what: "deterministic re-runs", limit: None, body: c13 },
    ];
    let mut failures = Vec::new();
    println!();
    for c in &criteria {
        let t = Instant::now();
        let result = (c.body)();
        let elapsed = t.elapsed();
        let mut problems = match result {
            Ok(p) => p,
            Err(e) => vec![format!("error: {e}")],
        };
        if let Some(limit) = c.limit {
            if elapsed > limit {
                problems.push(format!("took {:.1} s, limit {} s", elapsed.as_secs_f64(), limit.as_secs()));
            }
        }
        let verdict = if problems.is_empty() { "PASS" } else { "FAIL" };
        println!("criterion {:2} {verdict} {:7.2} s  {}", c.id, elapsed.as_secs_f64(), c.what);
        for p in &problems {
            println!("    {p}");
        }
        if !problems.is_empty() {
            failures.push(c.id);
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
