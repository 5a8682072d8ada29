//! `schwarma`: experiment runners, model spectra and the invariant suite.

mod config;
mod error;
mod run;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::CliError;
use validate::Fixture;

#[derive(Debug, Parser)]
#[command(name = "schwarma", version, about = "SchWARMA correlated-noise simulations")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding `run.out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Sample count for the chosen experiment.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Noise spectroscopy reconstruction.
    Qns,
    /// Dynamical decoupling fidelity and unitality decay.
    Dd,
    /// Z-check circuit sweep against the Trotter reference.
    Surface,
    /// Landau-Zener sweep, partitioned drive against full Trotter.
    Lz,
    /// Evaluate an ARMA model spectrum.
    Spectrum,
    /// Run the invariant suite.
    Validate {
        /// Flip the AR sign in the reference spectra; the suite must fail.
        #[arg(long, hide = true)]
        inject_sign_error: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Qns => "qns",
            Self::Dd => "dd",
            Self::Surface => "surface",
            Self::Lz => "lz",
            Self::Spectrum => "spectrum",
            Self::Validate { .. } => "validate",
        }
    }
}

fn resolve(global: &GlobalArgs, command: &Command) -> Result<RunConfig, CliError> {
    let mut cfg = match &global.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
            RunConfig::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.run.seed = seed;
    }
    if let Some(out) = &global.out {
        cfg.run.out = out.clone();
    }
    if let Some(n) = global.samples {
        match command {
            Command::Qns => cfg.qns.n_traj = n,
            Command::Dd => cfg.dd.n_samples = n,
            Command::Surface => cfg.surface.n_samples = n,
            Command::Lz => cfg.lz.n_samples = n,
            Command::Spectrum => cfg.spectrum.samples = n,
            Command::Validate { .. } => {}
        }
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli.global, &cli.command)?;
    if cli.global.dry_run {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Threads(e.to_string()))?;
    }
    if let Command::Validate { inject_sign_error } = cli.command {
        let fixture = if inject_sign_error { Fixture::FlippedArSign } else { Fixture::None };
        let checks = validate::run_suite(cfg.run.seed, fixture)?;
        for c in &checks {
            println!("{}", c.line());
        }
        let failed = checks.iter().filter(|c| !c.passed).count();
        println!("{} passed, {failed} failed", checks.len() - failed);
        return if failed == 0 { Ok(()) } else { Err(CliError::Validation { failed, total: checks.len() }) };
    }

    let out = cfg.run.out.clone();
    let name = cli.command.name();
    let value = serde_json::to_value(&cfg).expect("config serializes");
    let meta = schwarma::experiments::write_meta(&out, name, &value, cfg.run.seed)?;
    log::info!("wrote {}", meta.display());
    match cli.command {
        Command::Qns => run::qns(&cfg, &out),
        Command::Dd => run::dd(&cfg, &out),
        Command::Surface => run::surface(&cfg, &out),
        Command::Lz => run::lz(&cfg, &out),
        Command::Spectrum => run::spectrum(&cfg, &out),
        Command::Validate { .. } => unreachable!("handled above"),
    }?;
    println!("{name}: results in {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.kind());
            ExitCode::from(e.exit_code())
        }
    }
}
