use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use fgrnls::pipeline::{run, spectrum_csv, PipelineConfig, Target};
use fgrnls::resonance::{build_index_sets, check_hypotheses, resonance_budget};
use fgrnls::Error;

#[derive(Parser)]
#[command(name = "fgrnls", version, about = "Normal forms and radiation damping for a forced cubic NLS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Bound-state eigenvalues as CSV.
    Spectrum {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Potential preset, e.g. "poschl_teller a=1.5 kappa2=0.35".
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        half_length: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Hypothesis checks and the resonance catalog.
    ResonanceCheck {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Comma separated eigenvalues; skips the eigensolve.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lambda: Option<Vec<f64>>,
        /// Continuum threshold, required with --lambda.
        #[arg(long)]
        c: Option<f64>,
    },
    /// Birkhoff normal form up to r_max.
    Normalform(ConfigArg),
    /// Fermi golden rule packets, Rayleigh quotients and cancellations.
    Fgr(ConfigArg),
    /// Time integration only.
    Simulate(ConfigArg),
    /// Every stage in order.
    Pipeline(ConfigArg),
}

fn load(arg: &ConfigArg) -> Result<PipelineConfig, Error> {
    match &arg.config {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn run_target(arg: &ConfigArg, target: Target) -> ExitCode {
    let cfg = match load(arg) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let out = run(&cfg, target);
    println!("{}", serde_json::to_string_pretty(&out.manifest["stages"]).unwrap_or_default());
    eprintln!("artifacts in {}", cfg.out_dir().display());
    match &out.error {
        Some(e) => fail(e),
        None => ExitCode::SUCCESS,
    }
}

fn resonance_from_lambda(lambda: &[f64], c: Option<f64>) -> ExitCode {
    let Some(c) = c else {
        return fail(&Error::Config("--c is required with --lambda".into()));
    };
    if lambda.is_empty() || lambda.iter().any(|l| !l.is_finite()) || !c.is_finite() {
        return fail(&Error::Config("eigenvalues and threshold must be finite".into()));
    }
    let budget = match resonance_budget(lambda, c) {
        Ok(b) => b,
        Err(e) => return fail(&e),
    };
    let report = check_hypotheses(lambda, c, &budget, fgrnls::resonance::TOL_RES);
    let catalog = if report.clean() { build_index_sets(lambda, c, &budget).ok() } else { None };
    let out = json!({
        "N": budget.n,
        "budget": budget,
        "hypotheses": report,
        "minimal": catalog.as_ref().map(|c| &c.minimal),
        "shells": catalog.as_ref().map(|c| c.frequencies()),
    });
    println!("{}", serde_json::to_string_pretty(&out).unwrap_or_default());
    if report.clean() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Spectrum { cfg, preset, half_length, points } => {
            let mut c = match load(&cfg) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            if let Some(p) = preset {
                c.model.potential = p;
                c.model.potential_file = None;
            }
            if let Some(l) = half_length {
                c.model.half_length = l;
            }
            if let Some(n) = points {
                c.model.points = n;
            }
            let out = run(&c, Target::Spectrum);
            if let Some(e) = &out.error {
                return fail(e);
            }
            match out.analysis.as_ref().map(|a| spectrum_csv(&a.model)) {
                Some(Ok(text)) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Some(Err(e)) => fail(&e),
                None => ExitCode::from(3),
            }
        }
        Command::ResonanceCheck { cfg, lambda, c } => match lambda {
            Some(l) => resonance_from_lambda(&l, c),
            None => run_target(&cfg, Target::Resonance),
        },
        Command::Normalform(cfg) => run_target(&cfg, Target::NormalForm),
        Command::Fgr(cfg) => run_target(&cfg, Target::Fgr),
        Command::Simulate(cfg) => run_target(&cfg, Target::Simulate),
        Command::Pipeline(cfg) => run_target(&cfg, Target::Pipeline),
    }
}
