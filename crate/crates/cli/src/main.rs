use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use qmpc_cli::config::{self, ScenarioConfig, SCENARIOS};
use qmpc_cli::output::resolve_out_dir;
use qmpc_cli::scenarios::{self, RunContext};

#[derive(Parser)]
#[command(name = "qmpc", about = "Quantum state-preparation MPC scenario runner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its artifacts.
    Run {
        /// Scenario name (see `qmpc list`).
        scenario: String,
        /// Optional TOML config file; defaults come from the scenario.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override single config keys, e.g. `--set detuning=-0.3`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Output directory; falls back to $QMPC_OUT_DIR, then ./qmpc-out.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for scenarios with random elements.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads for sweep cells (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// List available scenarios with their default configs.
    List,
    /// Check that a config file parses and matches its scenario.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            scenario,
            config,
            sets,
            out,
            seed,
            jobs,
        } => {
            if let Some(n) = jobs {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .context("configuring worker threads")?;
            }
            let cfg = config::load(&scenario, config.as_deref(), &sets)?;
            let out_dir = resolve_out_dir(out.as_deref()).join(&scenario);
            let ctx = RunContext {
                out_dir: &out_dir,
                seed,
            };
            let summary = scenarios::run(&scenario, &cfg, &ctx)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            eprintln!("artifacts written to {}", out_dir.display());
        }
        Command::List => {
            for name in SCENARIOS {
                let cfg = config::load(name, None, &[])?;
                println!("{name}");
                println!("{}", indent(&toml_of(&cfg)?));
            }
        }
        Command::Validate { config: path } => {
            let scenario = config::scenario_of_file(&path)?.context(
                "config file must name its scenario, e.g. `scenario = \"qubit_detuning\"`",
            )?;
            config::load(&scenario, Some(&path), &[])?;
            println!("ok: valid config for scenario '{scenario}'");
        }
    }
    Ok(())
}

fn toml_of(cfg: &ScenarioConfig) -> Result<String> {
    Ok(toml::to_string(cfg)?)
}

fn indent(text: &str) -> String {
    text.lines()
        .map(|l| format!("  {l}"))
        .collect::<Vec<_>>()
        .join("\n")
}
