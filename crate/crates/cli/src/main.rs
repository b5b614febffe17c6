use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use singavoid_cli::{batch, server, sweep};
use singavoid_core::config::{parse_scenario, MetricsCompare};
use singavoid_core::{ControllerMode, ScenarioConfig};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "singavoid", version, about = "Admittance control with Type II singularity avoidance, simulated")]
struct Cli {
    #[command(subcommand)]
    command: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Run a scenario to completion and write log, metrics and resolved config.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Pace ticks at the control period.
        #[arg(long)]
        realtime: bool,
    },
    /// Write a minΩ heatmap over a pose grid as CSV.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Grid rows, `coord:min:max:n`.
        #[arg(long, default_value = "psi:-0.6:0.6:61")]
        rows: sweep::Axis,
        /// Grid columns, `coord:min:max:n`.
        #[arg(long, default_value = "z:0.66:0.86:41")]
        cols: sweep::Axis,
    },
    /// Interactive session: telemetry and commands over WebSocket, in real time.
    Serve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        /// Write the session log here when the scenario finishes.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute deviation and effort metrics from a stored JSONL or CSV log.
    Metrics {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, value_enum, default_value_t = Compare::Desired)]
        compare: Compare,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a scenario file.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario JSON; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Conventional,
    Complemented,
}

#[derive(Clone, Copy, ValueEnum)]
enum Compare {
    Desired,
    Measured,
}

fn load(path: Option<&PathBuf>) -> anyhow::Result<ScenarioConfig> {
    match path {
        Some(p) => Ok(parse_scenario(p)?),
        None => Ok(ScenarioConfig::default()),
    }
}

impl ScenarioArgs {
    fn resolve(&self) -> anyhow::Result<ScenarioConfig> {
        let mut cfg = load(self.config.as_ref())?;
        if let Some(m) = self.mode {
            cfg.mode = match m {
                Mode::Conventional => ControllerMode::Conventional,
                Mode::Complemented => ControllerMode::Complemented,
            };
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Verb::Run { scenario, out, realtime } => {
            let cfg = scenario.resolve()?;
            let result = batch::simulate(&cfg, realtime)?;
            let paths = batch::write_outputs(&out, &cfg, &result)?;
            for p in &paths {
                log::info!("wrote {}", p.display());
            }
            println!("{}", serde_json::to_string(&result.metrics)?);
            if let Some(f) = result.fault {
                bail!("run halted by a fault: {f}");
            }
        }
        Verb::Sweep { config, out, rows, cols } => {
            let cfg = load(config.as_ref())?;
            let geometry = cfg.validate()?;
            let cells = sweep::sweep(&geometry, &cfg.start(), &rows, &cols);
            std::fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
            let path = out.join("sweep.csv");
            let file = std::fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
            sweep::write_csv(BufWriter::new(file), &cells)?;
            log::info!("wrote {} ({} x {} grid)", path.display(), rows.n, cols.n);
        }
        Verb::Serve { scenario, port, bind, out } => {
            let cfg = scenario.resolve()?;
            let options = server::ServeOptions {
                realtime: true,
                out,
                ..server::ServeOptions::default()
            };
            server::spawn(cfg, (bind.as_str(), port), options)?.wait();
        }
        Verb::Metrics { log, compare, out } => {
            let compare = match compare {
                Compare::Desired => MetricsCompare::Desired,
                Compare::Measured => MetricsCompare::Measured,
            };
            let report = batch::recompute_metrics(&log, compare)?;
            let text = serde_json::to_string_pretty(&report)?;
            match out {
                Some(p) => std::fs::write(&p, text + "\n").with_context(|| format!("cannot write {}", p.display()))?,
                None => println!("{text}"),
            }
        }
        Verb::Validate { config } => {
            let cfg = parse_scenario(&config)?;
            println!(
                "{}: ok ({}, {} ticks of {} s, seed {})",
                config.display(),
                cfg.mode,
                cfg.tick_count(),
                cfg.control_period,
                cfg.seed
            );
        }
    }
    Ok(())
}
