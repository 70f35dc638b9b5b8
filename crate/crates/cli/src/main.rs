use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stochhom_cli::{
    cmd_homogenize, cmd_sample_field, cmd_study, cmd_validate_config, load_config, Overrides,
};
use stochhom_core::config::Config;

#[derive(Parser)]
#[command(name = "stochhom", version, about = "Stochastic homogenization of random anisotropic elastic media")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration (or a manifest produced by an earlier run).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "STOCHHOM_OUT", default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the Monte Carlo loop.
    #[arg(long)]
    threads: Option<usize>,
    /// Elements per axis.
    #[arg(long)]
    mesh: Option<usize>,
    /// Number of realizations.
    #[arg(long)]
    kappa: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Write one realization of the elasticity field on a grid of points.
    SampleField(Common),
    /// Run a Monte Carlo campaign of effective elasticity matrices.
    Homogenize(Common),
    /// Run one campaign per (correlation length, uncertainty) cell.
    Study(Common),
    /// Check a configuration and print the derived parameters.
    ValidateConfig(Common),
}

fn resolve(c: &Common) -> stochhom_cli::Result<Config> {
    let base = match &c.config {
        Some(p) => load_config(p)?,
        None => Config::default(),
    };
    let cfg = Overrides {
        seed: c.seed,
        threads: c.threads,
        mesh: c.mesh,
        kappa: c.kappa,
    }
    .apply(base);
    cfg.derive()?;
    Ok(cfg)
}

fn run(cli: Cli) -> stochhom_cli::Result<()> {
    match cli.command {
        Command::SampleField(c) => {
            let path = cmd_sample_field(&resolve(&c)?, &c.out)?;
            println!("{}", path.display());
        }
        Command::Homogenize(c) => {
            let rep = cmd_homogenize(&resolve(&c)?, &c.out)?;
            println!(
                "{} realizations, {} failed; outputs in {}",
                rep.records.len(),
                rep.failures.len(),
                c.out.display()
            );
        }
        Command::Study(c) => {
            let rows = cmd_study(&resolve(&c)?, &c.out)?;
            println!("{} cells; outputs in {}", rows.len(), c.out.display());
        }
        Command::ValidateConfig(c) => {
            let v = cmd_validate_config(&resolve(&c)?)?;
            println!("{}", serde_json::to_string_pretty(&v).expect("json"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
