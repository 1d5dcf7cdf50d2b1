use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use schauder_lab::cli::{emit_plots, run, Command, ExperimentConfig};

/// Numerical laboratory for interior regularity estimates.
#[derive(Parser)]
#[command(name = "schauder-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Solve the Dirichlet problem and measure discretization errors.
    Solve(RunArgs),
    /// Energy inequality ratios and empirical constants.
    Caccioppoli(RunArgs),
    /// Calibrated no-spike check and truncation-energy traces.
    Degiorgi(RunArgs),
    /// Harmonic gate, derivative-energy scans and growth tags.
    Liouville(RunArgs),
    /// Hölder estimate ratios and the radial threshold family.
    Schauder(RunArgs),
    /// Blow-up sequence of the Hölder seminorm argmax.
    Blowup(RunArgs),
    /// Higher-order Hölder estimates by iterated differentiation.
    Bootstrap(RunArgs),
    /// Mollifier contraction and regularized approximation.
    Mollify(RunArgs),
    /// Gnuplot scripts for the tables of a report directory.
    Plots {
        /// Report directory.
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration; missing keys take the command's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Nodes per axis; replaces the resolution list.
    #[arg(long)]
    resolution: Option<usize>,
}

fn configure(command: Command, args: &RunArgs) -> Result<ExperimentConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path).map_err(|e| e.to_string())?;
            if cfg.command != command {
                return Err(format!(
                    "{}: configuration is for `{}`, not `{command}`",
                    path.display(),
                    cfg.command
                ));
            }
            cfg
        }
        None => ExperimentConfig::default_for(command),
    };
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(m) = args.resolution {
        cfg.grid.m = m;
        cfg.params.resolutions.clear();
    }
    let origin = args
        .config
        .as_ref()
        .map_or_else(|| format!("defaults of `{command}`"), |p| p.display().to_string());
    cfg.validate().map_err(|e| format!("{origin}: {e}"))?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::Plots { dir } => {
            return match emit_plots(&dir) {
                Ok(scripts) => {
                    for s in scripts {
                        println!("{}", s.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            };
        }
        Sub::Solve(a) => (Command::Solve, a),
        Sub::Caccioppoli(a) => (Command::Caccioppoli, a),
        Sub::Degiorgi(a) => (Command::Degiorgi, a),
        Sub::Liouville(a) => (Command::Liouville, a),
        Sub::Schauder(a) => (Command::Schauder, a),
        Sub::Blowup(a) => (Command::Blowup, a),
        Sub::Bootstrap(a) => (Command::Bootstrap, a),
        Sub::Mollify(a) => (Command::Mollify, a),
    };
    let cfg = match configure(command, &args) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(outcome) => {
            for v in &outcome.verdicts {
                println!("{}\t{}\t{}", v.status, v.check, v.detail);
            }
            println!("reports written to {}", cfg.out.display());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            let origin = args
                .config
                .as_ref()
                .map_or_else(|| format!("defaults of `{command}`"), |p| p.display().to_string());
            eprintln!("error: {origin}: {e}");
            ExitCode::from(2)
        }
    }
}
