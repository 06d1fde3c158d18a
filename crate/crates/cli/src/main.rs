use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use wallswarm_cli::commands::{self, Output};
use wallswarm_cli::config::{CliConfig, CONFIG_ENV};
use wallswarm_cli::gateway::{Gateway, ServeConfig};
use wallswarm_core::design::ExportFormat;
use wallswarm_core::scenario::{library, ScenarioScript};
use wallswarm_core::sim::Direction;

#[derive(Parser)]
#[command(name = "wallswarm", version, about = "Table and wall swarm-robot simulator")]
struct Cli {
    /// Master seed; identical seeds give byte-identical output files.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Write the artifact here instead of stdout; the summary then goes to
    /// stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON configuration file.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Attachment geometry and force analysis.
    #[command(subcommand)]
    Design(DesignCmd),
    /// Seeded transition trials with per-cell statistics.
    Experiment(ExperimentArgs),
    /// Runs an application scenario headless and emits its event log.
    Scenario(ScenarioArgs),
    /// Runs the fleet around the circular route until batteries run out.
    Stability(StabilityArgs),
    /// Serves the live world over WebSocket.
    Serve(ServeArgs),
    /// Prints the JSON Schema of a file or wire format.
    Schema {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(commands::SCHEMAS))]
        name: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Svg,
}

impl From<Format> for ExportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ExportFormat::Csv,
            Format::Svg => ExportFormat::Svg,
        }
    }
}

#[derive(Subcommand)]
enum DesignCmd {
    /// Sampled slope curve.
    Profile {
        #[arg(long)]
        n: Option<f64>,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Required push force along each cam.
    Force {
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.3, 2.4])]
        n: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        count: usize,
    },
    /// Exponent sweep minimising the peak push force.
    Optimize {
        #[arg(long, default_value_t = 1.0)]
        lo: f64,
        #[arg(long, default_value_t = 3.0)]
        hi: f64,
        #[arg(long, default_value_t = 0.1)]
        step: f64,
        #[arg(long, default_value_t = 1000)]
        count: usize,
    },
    /// Crest radius of a ramp the robot can cross.
    Ramp {
        /// Robot width, mm.
        #[arg(long, default_value_t = 40.0)]
        w: f64,
        /// Wheel clearance, mm.
        #[arg(long, default_value_t = 0.8)]
        h: f64,
    },
    /// Fabrication export; the format follows the `--out` extension.
    Export {
        #[arg(long)]
        n: Option<f64>,
        #[arg(long, default_value_t = 200)]
        count: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Dir {
    TableToWall,
    WallToTable,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, default_value_t = 100)]
    trials: u32,
    /// Slope exponents; defaults to 1.0, 1.3, 2.4.
    #[arg(long, value_delimiter = ',')]
    n: Vec<f64>,
    /// Directions; defaults to both.
    #[arg(long, value_enum, value_delimiter = ',')]
    direction: Vec<Dir>,
    /// Built-in payload carried by the mover, e.g. rod3 or bolt.
    #[arg(long)]
    payload: Option<String>,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(library::SCENARIOS), required_unless_present = "file")]
    name: Option<String>,
    /// Script file instead of a built-in scenario.
    #[arg(long, conflicts_with = "name")]
    file: Option<PathBuf>,
}

#[derive(Args)]
struct StabilityArgs {
    #[arg(long, default_value_t = 3)]
    table: u32,
    #[arg(long, default_value_t = 3)]
    wall: u32,
    /// Simulated hours before giving up.
    #[arg(long, default_value_t = 2.5)]
    hours: f64,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8765)]
    port: u16,
    /// Broadcast every k ticks of the 60 Hz clock.
    #[arg(long, default_value_t = 3)]
    divisor: u64,
    /// Simulated seconds per wall-clock second.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
}

fn emit(out: Option<&Path>, output: &Output) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, &output.artifact).with_context(|| format!("writing {}", path.display()))?;
            print!("{}", output.summary);
        }
        None => {
            std::io::stdout().write_all(&output.artifact)?;
            eprint!("{}", output.summary);
        }
    }
    Ok(())
}

fn design(cmd: DesignCmd, config: &CliConfig, out: Option<&Path>) -> anyhow::Result<()> {
    let output = match cmd {
        DesignCmd::Profile { n, count, format } => commands::design_profile(config, n, count, format.into())?,
        DesignCmd::Force { n, count } => commands::design_force(config, &n, count)?,
        DesignCmd::Optimize { lo, hi, step, count } => commands::design_optimize(config, lo, hi, step, count)?,
        DesignCmd::Ramp { w, h } => {
            // the radius is the headline, so it always goes to stdout
            let o = commands::design_ramp(w, h)?;
            print!("{}", o.summary);
            if let Some(path) = out {
                std::fs::write(path, &o.artifact)?;
            }
            return Ok(());
        }
        DesignCmd::Export { n, count } => {
            let path = out.context("export needs --out with a .csv or .svg extension")?;
            let format = match path.extension().and_then(|e| e.to_str()) {
                Some("csv") => ExportFormat::Csv,
                Some("svg") => ExportFormat::Svg,
                _ => anyhow::bail!("cannot infer a format from {}", path.display()),
            };
            commands::design_profile(config, n, count, format)?
        }
    };
    emit(out, &output)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let config = CliConfig::load(cli.config.as_deref())?;
    let out = cli.out.as_deref();
    match cli.command {
        Cmd::Design(cmd) => design(cmd, &config, out)?,
        Cmd::Experiment(a) => {
            let directions: Vec<Direction> = a
                .direction
                .iter()
                .map(|d| match d {
                    Dir::TableToWall => Direction::TableToWall,
                    Dir::WallToTable => Direction::WallToTable,
                })
                .collect();
            let payload = a.payload.as_deref().map(commands::payload_named).transpose()?;
            let ec = commands::experiment_config(&config, cli.seed, a.trials, &a.n, &directions, payload);
            emit(out, &commands::experiment(&ec)?.0)?;
        }
        Cmd::Scenario(a) => {
            let script: ScenarioScript = match (&a.name, &a.file) {
                (Some(name), _) => library::scenario(name)?,
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
                }
                (None, None) => unreachable!("clap requires one"),
            };
            let (output, run) = commands::scenario(&config, &script, cli.seed)?;
            emit(out, &output)?;
            if !run.succeeded() {
                return Ok(ExitCode::from(1));
            }
        }
        Cmd::Stability(a) => {
            let (output, report) = commands::stability(&config, cli.seed, a.table, a.wall, a.hours)?;
            emit(out, &output)?;
            if report.transition_failures > 0 || report.collisions > 0 {
                return Ok(ExitCode::from(1));
            }
        }
        Cmd::Schema { name } => {
            let output = Output { artifact: commands::schema(&name)?.into_bytes(), summary: String::new() };
            emit(out, &output)?;
        }
        Cmd::Serve(a) => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let gw = Gateway::bind(
                    &format!("{}:{}", a.host, a.port),
                    ServeConfig { seed: cli.seed, divisor: a.divisor, speed: a.speed },
                )
                .await?;
                eprintln!("listening on ws://{}", gw.local_addr()?);
                gw.run().await
            })?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
