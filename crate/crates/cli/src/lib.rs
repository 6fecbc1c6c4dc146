//! Experiment runner behind the `blendlab` binary.
//!
//! A run resolves a preset by name, executes it with the configured seed and
//! writes `<out>/<experiment>/report.json`, `points.csv` and, for sweeps,
//! `sweep.csv`.

pub mod config;
pub mod error;
pub mod presets;
pub mod report;

use std::path::PathBuf;
use std::time::Instant;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use report::Report;

/// Output directory when neither the config nor the command line sets one.
pub const DEFAULT_OUT_DIR: &str = "blendlab-out";

/// Command-line settings that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub budget: Option<usize>,
}

/// Runs one experiment and writes its artifacts.
pub fn run(cfg: &ExperimentConfig, ov: &Overrides) -> Result<Report, CliError> {
    let preset = presets::find(&cfg.experiment)?;
    let seed = ov.seed.unwrap_or(cfg.seed);
    let ctx = presets::Ctx { seed, budget: ov.budget };
    let started = Instant::now();
    let outcome = (preset.run)(&ctx, &cfg.params)?;
    let wall_clock_ms = started.elapsed().as_millis();

    let root = ov.out_dir.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let dir = report::ensure_dir(&root.join(preset.name))?;
    let mut artifacts = Vec::new();
    if cfg.output.csv {
        report::write_points(&dir.join("points.csv"), &outcome.points)?;
        artifacts.push("points.csv".to_string());
        if let Some(rows) = &outcome.sweep {
            report::write_sweep(&dir.join("sweep.csv"), rows)?;
            artifacts.push("sweep.csv".to_string());
        }
    }
    if cfg.output.json {
        artifacts.push("report.json".to_string());
    }
    let mut checks = outcome.checks;
    checks.sort_by(|a, b| a.name.cmp(&b.name));
    let pass = checks.iter().all(|c| !c.asserted || c.pass);
    let rep = Report {
        schema: report::SCHEMA_VERSION,
        experiment: preset.name.to_string(),
        seed,
        budget: ov.budget,
        params: outcome.params,
        checks,
        pass,
        summary: outcome.summary,
        artifacts,
        wall_clock_ms,
    };
    if cfg.output.json {
        report::write_json(&dir.join("report.json"), &rep)?;
    }
    Ok(rep)
}

/// Parses and range-checks a config without running it; returns the resolved
/// parameters.
pub fn validate(cfg: &ExperimentConfig) -> Result<serde_json::Value, CliError> {
    let preset = presets::find(&cfg.experiment)?;
    (preset.validate)(&cfg.params)
}
