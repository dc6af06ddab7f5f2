//! Command-line interface behind the `projint` binary.

use crate::analysis::stability_indicator;
use crate::bench::emit::{emit, render, EmitFormat};
use crate::bench::experiment::{run_experiment, ExperimentId, ExperimentSpec};
use crate::bench::selftest::selftest;
use crate::error::Error;
use crate::micro::MicroConfig;
use crate::model::make_toy_system;
use crate::pi::{PiConfig, Scheme};
use crate::rk::RkTableau;
use crate::Result;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "projint",
    about = "Projective integration benchmarks for stiff slow-fast systems",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a built-in benchmark experiment (err-vs-dt-macro, err-vs-dt-micro,
    /// err-vs-d0, dev-vs-dt-macro, selfdiff-vs-dt)
    Figure {
        id: String,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv or json
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Run an experiment described by a JSON spec file
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Evaluate the stability indicator for a parameter set
    Stability {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        dt_macro: f64,
        #[arg(long)]
        dt_micro: f64,
        /// Microstep allocation base M
        #[arg(long = "M")]
        m: u64,
        /// Initial relaxation length M1 (defaults to M)
        #[arg(long)]
        m_first: Option<u64>,
        /// pi1 or pi2
        #[arg(long, default_value = "pi1")]
        scheme: String,
        /// Microsolver order (1, 2 or 4)
        #[arg(long, default_value_t = 1)]
        micro_order: usize,
    },
    /// Run the quick property suite
    Selftest,
}

/// Entry point used by the binary; returns the process exit code
/// (0 success, 1 configuration error, 2 numerical divergence).
pub fn cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(true) => 2,
        Ok(false) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_divergence() {
                2
            } else {
                1
            }
        }
    }
}

/// Ok(true) signals that some grid point diverged.
fn dispatch(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Figure { id, out, format } => {
            let id: ExperimentId = id.parse()?;
            let spec = ExperimentSpec::for_figure(id);
            run_and_emit(&spec, out, &format)
        }
        Cmd::Run { config, out, format } => {
            let text = std::fs::read_to_string(&config)?;
            let spec: ExperimentSpec =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
            run_and_emit(&spec, out, &format)
        }
        Cmd::Stability {
            alpha,
            eps,
            dt_macro,
            dt_micro,
            m,
            m_first,
            scheme,
            micro_order,
        } => {
            let scheme: Scheme = scheme.parse()?;
            let sys = make_toy_system(alpha, eps)?;
            let cfg = PiConfig::new(
                scheme,
                RkTableau::rk4(),
                dt_macro,
                MicroConfig::new(micro_order, dt_micro)?,
                m_first.unwrap_or(m),
                m,
            )?;
            if let Some(w) = cfg.micro.stability_warning(&sys) {
                eprintln!("warning: {w}");
            }
            let rep = stability_indicator(&sys, &cfg)?;
            let verdict = if rep.is_stable() { "STABLE" } else { "UNSTABLE" };
            match rep.sigma_pi2 {
                Some(s2) => println!(
                    "{verdict} sigma={:.6e} sigma2={:.6e} rho={:.6e} aM={}",
                    rep.sigma, s2, rep.rho, rep.a_m
                ),
                None => println!(
                    "{verdict} sigma={:.6e} rho={:.6e} aM={}",
                    rep.sigma, rep.rho, rep.a_m
                ),
            }
            if rep.extrapolated {
                println!("note: contraction extrapolated to microsolver order {micro_order}");
            }
            Ok(false)
        }
        Cmd::Selftest => {
            if selftest() {
                Ok(false)
            } else {
                Err(Error::Config("selftest failed".into()))
            }
        }
    }
}

fn run_and_emit(spec: &ExperimentSpec, out: Option<PathBuf>, format: &str) -> Result<bool> {
    let format: EmitFormat = format.parse()?;
    let result = run_experiment(spec)?;
    match out {
        Some(path) => emit(&result, format, &path)?,
        None => print!("{}", render(&result, format)?),
    }
    if result.any_diverged() {
        eprintln!("note: some grid points diverged; see the emitted output");
        return Ok(true);
    }
    Ok(false)
}
