use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context as _;
use blendlab_cli::{presets, CliError, ExperimentConfig, Overrides};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "blendlab", version, about = "Run blender, IFS and twist-map experiments")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config or by preset name.
    Run {
        /// Config file path, or a preset name to run with defaults.
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "BLENDLAB_OUT_DIR")]
        out_dir: Option<PathBuf>,
        /// Overrides the preset's search budget.
        #[arg(long)]
        budget: Option<usize>,
        /// Print the report JSON to stdout.
        #[arg(long)]
        json: bool,
    },
    /// List presets whose name contains FILTER.
    List { filter: Option<String> },
    /// Check a config and print the resolved parameters.
    Validate { config: String },
}

fn load(arg: &str) -> Result<ExperimentConfig, CliError> {
    let path = PathBuf::from(arg);
    if path.exists() {
        ExperimentConfig::load(&path)
    } else if presets::find(arg).is_ok() {
        Ok(ExperimentConfig::new(arg))
    } else {
        Err(CliError::config("", format!("'{arg}' is neither a readable config file nor a preset name")))
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the worker pool") {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    }
    match cli.command {
        Command::List { filter } => match presets::list(filter.as_deref()) {
            Ok(rows) => {
                let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
                for r in rows {
                    println!("{:width$}  {}", r.name, r.exercises);
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
        Command::Validate { config } => match load(&config).and_then(|c| blendlab_cli::validate(&c)) {
            Ok(params) => {
                println!("{}", serde_json::to_string_pretty(&params).expect("params serialize"));
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Run { config, seed, out_dir, budget, json } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match blendlab_cli::run(&cfg, &Overrides { seed, out_dir, budget }) {
                Ok(rep) => {
                    if json {
                        println!("{}", serde_json::to_string_pretty(&rep).expect("report serializes"));
                    } else {
                        for c in &rep.checks {
                            let tag = match (c.pass, c.asserted) {
                                (true, _) => "ok",
                                (false, true) => "FAIL",
                                (false, false) => "note",
                            };
                            let value = c.value.map(|v| format!(" value={v}")).unwrap_or_default();
                            let thr = c.threshold.as_deref().map(|t| format!(" ({t})")).unwrap_or_default();
                            println!("{tag:4} {}{value}{thr}", c.name);
                        }
                        println!("{}: {} in {} ms", rep.experiment, if rep.pass { "PASS" } else { "FAIL" }, rep.wall_clock_ms);
                    }
                    ExitCode::from(rep.exit_code() as u8)
                }
                Err(e) => fail(e),
            }
        }
    }
}
