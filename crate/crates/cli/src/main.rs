//! `localsde`: inspect scale transforms, simulate terminal laws, measure
//! weak convergence rates, and compare simulation pipelines for
//! one-dimensional SDEs whose drift is a signed measure acting through
//! local time.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or
//! arguments.

mod builtin;
mod config;
mod experiment;
mod output;

use std::path::PathBuf;
use std::process::exit;

use clap::{Args, Parser, Subcommand};

use config::{Pipeline, Prepared};
use experiment::{CompareArgs, GridSpec, OutOptions, SimulateArgs};
use localsde::sde::EvalSide;

#[derive(Parser)]
#[command(
    name = "localsde",
    version,
    about = "Simulation toolkit for SDEs with measure-valued drift removed by scale transforms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect the scale transforms built from the config's measure
    Transform {
        #[command(subcommand)]
        action: TransformAction,
    },
    /// Draw terminal samples at one step count and write them as CSV
    Simulate {
        #[command(flatten)]
        source: Source,
        /// Euler steps
        #[arg(long)]
        n: usize,
        /// Paths (default: run.m from the config)
        #[arg(long)]
        m: Option<usize>,
        /// Master seed (default: run.seed from the config)
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the step ladder against the reference and fit the weak rate
    Converge {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        common: Common,
    },
    /// Run the config's pipeline and a second one on shared randomness
    Compare {
        #[command(flatten)]
        source: Source,
        /// Pipeline to compare against
        #[arg(long, value_enum)]
        against: Pipeline,
        /// Euler steps (default: the largest run.n_list entry)
        #[arg(long)]
        n: Option<usize>,
        /// Paths per pipeline (default: run.m)
        #[arg(long)]
        m: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Materialize a built-in experiment config and run it
    Example {
        /// One of: example1, example2, skewbm
        id: String,
        /// Weight of the point mass at the origin
        #[arg(long, default_value_t = builtin::DEFAULT_ALPHA)]
        alpha: f64,
        /// Write config.toml only, without running
        #[arg(long)]
        emit_config: bool,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum TransformAction {
    /// Emit piecewise representations (JSON) and a grid tabulation (CSV)
    Inspect {
        #[command(flatten)]
        source: Source,
        /// Tabulation grid as lo:hi:count
        #[arg(long, default_value = "-5:5:201")]
        grid: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Source {
    /// Path to a TOML experiment config
    #[arg(long, conflicts_with = "example", required_unless_present = "example")]
    config: Option<PathBuf>,
    /// Built-in experiment id instead of a config file
    #[arg(long)]
    example: Option<String>,
    /// Atom weight for --example
    #[arg(long, requires = "example")]
    alpha: Option<f64>,
}

#[derive(Args)]
struct Common {
    /// Output directory (default: config output.directory, then
    /// $LOCALSDE_OUT, then ./out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Read coefficients by their left limits at discontinuities
    #[arg(long)]
    left_limits: bool,
}

impl Common {
    fn side(&self) -> EvalSide {
        if self.left_limits {
            EvalSide::Left
        } else {
            EvalSide::Right
        }
    }

    fn out_options(&self, prep: &Prepared) -> OutOptions {
        let dir = self
            .out
            .clone()
            .or_else(|| {
                prep.config
                    .output
                    .as_ref()
                    .and_then(|o| o.directory.as_ref())
                    .map(PathBuf::from)
            })
            .or_else(|| std::env::var_os("LOCALSDE_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        let (csv, json) = prep.formats();
        OutOptions { dir, csv, json }
    }
}

enum AppError {
    Validation(Vec<String>),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for AppError {
    fn from(e: anyhow::Error) -> Self {
        AppError::Runtime(e)
    }
}

fn resolve(source: &Source) -> Result<Prepared, AppError> {
    let prep = match (&source.config, &source.example) {
        (Some(path), None) => config::load(path),
        (None, Some(id)) => builtin::builtin(id, source.alpha.unwrap_or(builtin::DEFAULT_ALPHA))
            .map_err(|e| vec![e])
            .and_then(|c| c.validate()),
        _ => unreachable!("clap enforces exactly one source"),
    }
    .map_err(AppError::Validation)?;
    for warning in &prep.warnings {
        eprintln!("warning: {warning}");
    }
    Ok(prep)
}

fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Transform {
            action:
                TransformAction::Inspect {
                    source,
                    grid,
                    common,
                },
        } => {
            let grid = GridSpec::parse(&grid).map_err(|e| AppError::Validation(vec![e]))?;
            let prep = resolve(&source)?;
            let out = common.out_options(&prep);
            experiment::inspect_transform(&prep, grid, &out)?;
            Ok(())
        }
        Command::Simulate {
            source,
            n,
            m,
            seed,
            common,
        } => {
            if n == 0 {
                return Err(AppError::Validation(vec!["--n must be at least 1".into()]));
            }
            let prep = resolve(&source)?;
            let args = SimulateArgs {
                n,
                m: m.unwrap_or(prep.config.run.m),
                seed: seed.unwrap_or_else(|| prep.seed()),
                side: common.side(),
            };
            if args.m < 2 {
                return Err(AppError::Validation(vec![format!(
                    "--m must be at least 2 (got {})",
                    args.m
                )]));
            }
            let out = common.out_options(&prep);
            experiment::simulate(&prep, &args, &out)?;
            Ok(())
        }
        Command::Converge { source, common } => {
            let prep = resolve(&source)?;
            let out = common.out_options(&prep);
            experiment::run_experiment(&prep, common.side(), &out)?;
            Ok(())
        }
        Command::Compare {
            source,
            against,
            n,
            m,
            common,
        } => {
            let prep = resolve(&source)?;
            let other = config::pipeline_model(&prep.measure, &prep.phi, against)
                .map_err(|e| AppError::Validation(vec![format!("--against ({against}): {e}")]))?;
            let args = CompareArgs {
                against,
                other,
                n: n.unwrap_or_else(|| *prep.config.run.n_list.last().expect("validated")),
                m: m.unwrap_or(prep.config.run.m),
                side: common.side(),
            };
            if args.n == 0 || args.m < 2 {
                return Err(AppError::Validation(vec![
                    "compare needs --n >= 1 and --m >= 2".into(),
                ]));
            }
            let out = common.out_options(&prep);
            experiment::compare_pipelines(&prep, &args, &out)?;
            Ok(())
        }
        Command::Example {
            id,
            alpha,
            emit_config,
            common,
        } => {
            let prep = builtin::builtin(&id, alpha)
                .map_err(|e| vec![e])
                .and_then(|c| c.validate())
                .map_err(AppError::Validation)?;
            let out = common.out_options(&prep);
            if emit_config {
                let path = experiment::write_config_only(&prep, &out)?;
                println!("wrote {}", path.display());
            } else {
                experiment::run_experiment(&prep, common.side(), &out)?;
            }
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(AppError::Validation(errors)) => {
            for e in &errors {
                eprintln!("config error: {e}");
            }
            eprintln!("{} validation failure(s)", errors.len());
            exit(2);
        }
        Err(AppError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            exit(1);
        }
    }
}
