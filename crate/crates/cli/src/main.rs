mod commands;
mod config;
mod error;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use config::{Command, KappaConfig, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "cusplab",
    version,
    about = "Corner-cusp experiments for vortex patches"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Solve the effective ODE; writes trajectory.csv and j_integrals.csv.
    Effective(Overrides),
    /// Contour-dynamics run of the corner patch; writes snapshots.csv.
    Euler(Overrides),
    /// Patch diagnostics against the effective model; writes diagnostics.csv.
    Compare(Overrides),
    /// Leading-order velocity residuals; writes decomposition.csv.
    Decomp(Overrides),
    /// Iterated majorants and final bounds; writes bounds.csv.
    Bounds(Overrides),
    /// Measured corner angles against the model; writes collapse.csv.
    Collapse(Overrides),
}

/// Flags override values read from `--config`.
#[derive(clap::Args, Debug)]
struct Overrides {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    b0: Option<f64>,
    #[arg(long)]
    tau_max: Option<f64>,
    #[arg(long)]
    r_outer: Option<f64>,
    #[arg(long)]
    n_nodes: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    snapshot_every: Option<usize>,
    /// Comma-separated probe radii.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    radii: Option<Vec<f64>>,
    #[arg(long)]
    cstar: Option<f64>,
    /// `zero` or `power:SCALE,EXPONENT`.
    #[arg(long)]
    kappa: Option<String>,
    /// Comma-separated radii, `e-L` for r = e^{-L} or plain values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    r_list: Option<Vec<String>>,
    #[arg(long)]
    delta: Option<f64>,
}

impl Sub {
    fn split(self) -> (Command, Overrides) {
        match self {
            Sub::Effective(o) => (Command::Effective, o),
            Sub::Euler(o) => (Command::Euler, o),
            Sub::Compare(o) => (Command::Compare, o),
            Sub::Decomp(o) => (Command::Decomp, o),
            Sub::Bounds(o) => (Command::Bounds, o),
            Sub::Collapse(o) => (Command::Collapse, o),
        }
    }
}

fn resolve(o: Overrides) -> Result<RunConfig, CliError> {
    let mut c = match &o.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            toml::from_str(&text)?
        }
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($flag:ident => $($field:tt)+) => {
            if let Some(v) = o.$flag.clone() {
                c.$($field)+ = v;
            }
        };
    }
    set!(output_dir => output_dir);
    set!(b0 => model.b0);
    set!(tau_max => model.tau_max);
    set!(r_outer => euler.r_outer);
    set!(n_nodes => euler.n_nodes);
    set!(dt => euler.dt);
    set!(t_end => euler.t_end);
    set!(snapshot_every => euler.snapshot_every);
    set!(radii => diagnostics.radii);
    set!(r_list => bounds.r_list);
    set!(delta => bounds.delta);
    if let Some(v) = o.cstar {
        c.diagnostics.cstar = v;
        c.bounds.cstar = v;
    }
    if let Some(k) = &o.kappa {
        c.bounds.kappa = KappaConfig::parse_flag(k)?;
    }
    Ok(c)
}

fn configure_threads() -> Result<usize, CliError> {
    if let Ok(v) = std::env::var("CUSPLAB_THREADS") {
        let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            CliError::Config(format!(
                "CUSPLAB_THREADS must be a positive integer, got `{v}`"
            ))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(rayon::current_num_threads())
}

fn execute(sub: Sub) -> Result<(), CliError> {
    let (cmd, overrides) = sub.split();
    let cfg = resolve(overrides)?;
    cfg.validate(cmd).map_err(|e| match e {
        CliError::Core(c) => CliError::Config(c.to_string()),
        other => other,
    })?;
    let threads = configure_threads()?;

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let config_text = toml::to_string(&cfg).map_err(|e| CliError::Serialize(e.to_string()))?;
    fs::write(dir.join("config.toml"), &config_text)?;
    let digest = Sha256::digest(config_text.as_bytes());
    let hash: String = digest.iter().map(|b| format!("{b:02x}")).collect();

    let start = Instant::now();
    let outcome = commands::run(cmd, &cfg, dir)?;
    let manifest = json!({
        "program": "cusplab",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cmd.name(),
        "config": cfg,
        "config_file": "config.toml",
        "config_sha256": hash,
        "threads": threads,
        "wall_time_seconds": start.elapsed().as_secs_f64(),
        "outputs": outcome.outputs,
        "summary": outcome.summary,
    });
    let text =
        serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Serialize(e.to_string()))?;
    fs::write(dir.join("manifest.json"), text + "\n")?;
    println!(
        "{}: wrote {} to {}",
        cmd.name(),
        outcome.outputs.join(", "),
        dir.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cusplab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
