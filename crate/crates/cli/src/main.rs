//! `tfx`: batch driver for the stationary-state solvers.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tfx::gpe::SolverOptions;

use commands::{Context, Outcome, SpectrumRequest};
use config::{Common, FileLayer, GridChoice};
use failure::Failure;

const DEFAULT_SWEEP: &str = "0.05,0.02,0.01,0.005";

#[derive(Parser, Debug)]
#[command(name = "tfx", version, about = "Stationary states of the 1-D Gross-Pitaevskii equation in the Thomas-Fermi limit")]
struct Cli {
    /// Key-value file supplying defaults for any option.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Concurrent sweep legs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Neither read nor write the state cache.
    #[arg(long, global = true)]
    no_cache: bool,
    /// Newton residual tolerance (sup norm).
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct GridArgs {
    #[arg(long, allow_hyphen_values = true)]
    x_max: Option<f64>,
    /// Node count (odd); defaults to the resolution rule.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Positive ground state for one or more eps.
    Ground {
        #[arg(long, allow_hyphen_values = true)]
        eps: Option<String>,
        #[command(flatten)]
        grid: GridArgs,
        /// Fit the P1-P4 rates over the sweep.
        #[arg(long)]
        verify: bool,
    },
    /// m-th excited state seeded by the soliton product.
    Excited {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        eps: Option<String>,
        #[command(flatten)]
        grid: GridArgs,
        /// Soliton positions overriding the equilibrium solve.
        #[arg(long, allow_hyphen_values = true)]
        positions: Option<String>,
    },
    /// Soliton positions from the asymptotic formula, scalar root, U/V refinement and Toda system.
    Equilibrium {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        eps: Option<String>,
    },
    /// Lowest eigenpairs of L0, the multi-well L0, or L_eps.
    Spectrum {
        #[arg(long)]
        op: Option<String>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        z_max: Option<f64>,
        #[arg(long)]
        h_z: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        centers: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        eps: Option<f64>,
        #[arg(long)]
        m: Option<usize>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Rate verification over an eps sweep.
    Converge {
        #[arg(long)]
        claim: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        eps: Option<String>,
        #[arg(long)]
        nodes_per_eps: Option<f64>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Corner-layer Painleve profile.
    Painleve {
        #[arg(long, allow_hyphen_values = true)]
        y_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        y_max: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ground { .. } => "ground",
            Command::Excited { .. } => "excited",
            Command::Equilibrium { .. } => "equilibrium",
            Command::Spectrum { .. } => "spectrum",
            Command::Converge { .. } => "converge",
            Command::Painleve { .. } => "painleve",
        }
    }
}

fn common(cli: &Cli, file: &FileLayer) -> Result<Common, Failure> {
    let out = file.pick(cli.out.clone(), "out", PathBuf::from("out"))?;
    let jobs = file.pick(cli.jobs, "jobs", 1)?;
    if jobs == 0 {
        return Err(Failure::usage("jobs must be at least 1"));
    }
    let cache = file.pick(cli.no_cache.then_some(false), "cache", true)?;
    let mut solver = SolverOptions::default();
    solver.residual_tol = file.pick(cli.tol, "tol", solver.residual_tol)?;
    solver.validate().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(Common { out, jobs, cache, solver })
}

fn grid_choice(file: &FileLayer, g: &GridArgs, nodes_per_eps: Option<f64>) -> Result<GridChoice, Failure> {
    Ok(GridChoice {
        x_max: file.pick(g.x_max, "x_max", 2.0)?,
        n: file.pick_opt(g.n, "n")?,
        nodes_per_eps: file.pick(nodes_per_eps, "nodes_per_eps", 8.0)?,
    })
}

fn run(cli: &Cli) -> Result<(Common, Outcome), Failure> {
    let file = FileLayer::load(cli.config.as_deref())?;
    let common = common(cli, &file)?;
    let ctx = || Context::new(common.clone());
    let outcome = match &cli.command {
        Command::Ground { eps, grid, verify } => {
            let eps = file.pick_list(eps.as_deref(), "eps", "0.05")?;
            let verify = *verify || file.pick(None, "verify", false)?;
            commands::ground(&ctx()?, &eps, grid_choice(&file, grid, None)?, verify)?
        }
        Command::Excited { m, eps, grid, positions } => {
            let m = file.pick(*m, "m", 1)?;
            let eps = file.pick_list(eps.as_deref(), "eps", "0.02")?;
            let positions = file.pick_list_opt(positions.as_deref(), "positions")?;
            commands::excited(&ctx()?, m, &eps, grid_choice(&file, grid, None)?, positions)?
        }
        Command::Equilibrium { m, eps } => {
            let m = file.pick(*m, "m", 2)?;
            let eps = file.pick_list(eps.as_deref(), "eps", DEFAULT_SWEEP)?;
            commands::equilibrium(m, &eps)?
        }
        Command::Spectrum { op, k, z_max, h_z, centers, eps, m, grid } => {
            let op = file.pick(op.clone(), "op", "L0".to_string())?;
            let req = SpectrumRequest {
                op: op.parse().map_err(Failure::usage)?,
                k: file.pick(*k, "k", 4)?,
                z_max: file.pick(*z_max, "z_max", 25.0)?,
                h_z: file.pick(*h_z, "h_z", 0.01)?,
                centers: file.pick_list_opt(centers.as_deref(), "centers")?,
                eps: file.pick(*eps, "eps", 0.02)?,
                m: file.pick(*m, "m", 1)?,
                grid: grid_choice(&file, grid, None)?,
            };
            commands::spectrum(&ctx()?, &req)?
        }
        Command::Converge { claim, eps, nodes_per_eps, grid } => {
            let claim = file.pick(claim.clone(), "claim", "all".to_string())?;
            let eps = file.pick_list(eps.as_deref(), "eps", DEFAULT_SWEEP)?;
            commands::converge(&ctx()?, &claim, &eps, grid_choice(&file, grid, *nodes_per_eps)?)?
        }
        Command::Painleve { y_min, y_max, n } => commands::painleve(
            file.pick(*y_min, "y_min", -15.0)?,
            file.pick(*y_max, "y_max", 20.0)?,
            file.pick(*n, "n", 1751)?,
        )?,
    };
    Ok((common, outcome))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let name = cli.command.name();
    let (common, outcome) = match run(&cli) {
        Ok(r) => r,
        Err(f) => {
            eprintln!("tfx {name}: {f}");
            return f.exit_code();
        }
    };
    for line in &outcome.lines {
        println!("{line}");
    }
    if let Err(f) = commands::collect(&common.out, &outcome.artifacts) {
        eprintln!("tfx {name}: {f}");
        return f.exit_code();
    }
    match outcome.failure {
        None => ExitCode::SUCCESS,
        Some((f, context)) => {
            eprintln!("tfx {name}: {f}");
            if f.wants_diagnostic() {
                let diag = serde_json::json!({ "command": name, "exit_code": f.code(), "failure": f, "context": context });
                let text = format!("{}\n", serde_json::to_string_pretty(&diag).expect("serializable"));
                let path = common.out.join(format!("{name}_failure.json"));
                if let Err(e) = tfx::io::write_text(&path, &text) {
                    eprintln!("tfx {name}: {e}");
                    return ExitCode::from(5);
                }
            }
            f.exit_code()
        }
    }
}
