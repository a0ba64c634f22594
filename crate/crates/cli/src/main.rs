//! `hlmax`: command-line driver for the maximal-operator experiments.
//!
//! Exit codes: 0 when every check passes, 1 on a counterexample or a
//! threshold failure, 2 on a configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hlmax_core::grid::profiles::dump_profiles;
use hlmax_core::harness::{
    run_cover, run_decay, run_field_check, run_geometry_suite, run_maximal, run_split_check, run_tiles, write_csv,
    write_json, Outcome,
};
use hlmax_core::{Error, ExperimentConfig, FieldKind};

#[derive(Parser, Debug)]
#[command(name = "hlmax", version, about = "Maximal averages along vector fields on the torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration; defaults are used for absent keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Grid size as log₂ N.
    #[arg(long, global = true)]
    grid: Option<u32>,
    /// Field family: constant, shear, quadratic, sine, vertical-shear.
    #[arg(long, global = true)]
    field: Option<String>,
    #[arg(long, global = true)]
    eps0: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON report path; printed to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// CSV table path (per-l energies, overlap sweep, tile coefficients).
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "HLMAX_THREADS")]
    threads: Option<usize>,
    /// Writes the Fourier profiles (α, α̂, β, β̃, ψ) as JSON.
    #[arg(long, global = true)]
    dump_profiles: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Unit/cone checks and the sublevel-set fit.
    FieldCheck,
    /// ‖M f‖₂/‖f‖₂ over seeded random inputs.
    Maximal,
    /// Greedy rectangle coverings, exported as JSON.
    Cover,
    /// Spectral identities, wave-packet coefficients and the vanishing check.
    Tiles,
    /// The high-frequency decay experiment.
    Decay,
    /// The high/low split identity.
    SplitCheck,
    /// Overlap sweep and eccentricity checks.
    Geometry,
}

fn config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut c = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(n) = cli.grid {
        c.n_log2 = n;
    }
    if let Some(name) = &cli.field {
        c.field.kind = FieldKind::parse(name).map_err(|e| Error::Config(e.to_string()))?;
        c.field.amplitude = None;
    }
    if let Some(e) = cli.eps0 {
        c.eps0 = e;
    }
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(p) = &cli.out {
        c.output.report = Some(p.clone());
    }
    if let Some(p) = &cli.csv {
        c.output.csv = Some(p.clone());
    }
    if let Some(p) = &cli.dump_profiles {
        c.output.profiles = Some(p.clone());
    }
    c.validate()?;
    Ok(c)
}

fn emit<T: Outcome>(report: &T, path: Option<&Path>) -> Result<bool, Error> {
    match path {
        Some(p) => write_json(p, report)?,
        None => println!("{}", serde_json::to_string_pretty(report)?),
    }
    for f in report.failures() {
        eprintln!("FAIL: {f}");
    }
    Ok(report.passed())
}

fn run(cli: &Cli) -> Result<bool, Error> {
    let c = config(cli)?;
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    if let Some(p) = &c.output.profiles {
        write_json(p, &dump_profiles(1025))?;
    }
    let out = c.output.report.as_deref();
    let csv = c.output.csv.as_deref();
    match cli.command {
        Command::FieldCheck => emit(&run_field_check(&c)?, out),
        Command::Maximal => emit(&run_maximal(&c)?, out),
        Command::Cover => emit(&run_cover(&c)?, out),
        Command::Tiles => {
            let r = run_tiles(&c)?;
            if let (Some(p), Some(e)) = (csv, &r.expansion) {
                e.write_csv(std::fs::File::create(p)?, c.tolerances.sparsity_cutoff)?;
            }
            emit(&r, out)
        }
        Command::Decay => {
            let r = run_decay(&c)?;
            if let Some(p) = csv {
                write_csv(p, &r.rows())?;
            }
            emit(&r, out)
        }
        Command::SplitCheck => emit(&run_split_check(&c)?, out),
        Command::Geometry => {
            let r = run_geometry_suite(&c)?;
            if let Some(p) = csv {
                write_csv(p, &r.rows())?;
            }
            emit(&r, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.is_config() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
