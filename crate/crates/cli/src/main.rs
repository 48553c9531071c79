use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sublift_cli::config::{KeyValues, RunConfig, KEYS};
use sublift_cli::experiments::{self, RunError};
use sublift_cli::image::load_image;
use sublift_cli::{bundled_image, defaults, Command};

const USAGE: u8 = 1;
const IO: u8 = 2;
const NOT_CONVERGED: u8 = 3;
const SELFTEST_FAILED: u8 = 4;

/// Sublabel-accurate lifting for Mumford-Shah type problems.
#[derive(Debug, Parser)]
#[command(name = "sublift", version)]
struct Cli {
    command: Command,
    /// Flat `key = value` file; overrides on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Setting overrides as `--key value` pairs.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn settings(cli: &Cli) -> Result<RunConfig, (u8, String)> {
    let mut kv = match &cli.config {
        Some(path) => KeyValues::load(path).map_err(|e| (IO, e.to_string()))?,
        None => KeyValues::default(),
    };
    let mut rest = cli.overrides.iter();
    while let Some(key) = rest.next() {
        let Some(name) = key.strip_prefix("--") else {
            return Err((USAGE, format!("expected --key, found {key:?}")));
        };
        let value = rest.next().ok_or((USAGE, format!("missing value for --{name}")))?;
        kv.set(name, value);
    }
    defaults(cli.command).apply(&kv).map_err(|e| (USAGE, e.to_string()))
}

fn run_error(e: RunError) -> (u8, String) {
    let code = match &e {
        // unreadable and malformed images alike
        RunError::Image(_) | RunError::Write { .. } => IO,
        RunError::Usage(_) | RunError::Solver(_) => USAGE,
    };
    (code, e.to_string())
}

fn finish(converged: bool) -> u8 {
    if converged {
        0
    } else {
        eprintln!("warning: some solves stopped at max_iters before converging");
        NOT_CONVERGED
    }
}

fn execute(cli: &Cli) -> Result<u8, (u8, String)> {
    let cfg = settings(cli)?;
    match cli.command {
        Command::ConvexExact => {
            let image = match &cfg.input {
                Some(path) => load_image(path).map_err(|e| run_error(e.into()))?,
                None => bundled_image(),
            };
            let report = experiments::convex_exact(&cfg, &image).map_err(run_error)?;
            println!("direct energy {:.6}", report.direct_energy);
            println!("{:<9} {:>6} {:>14} {:>12} {:>9} {:>7} {:>8}", "mode", "labels", "energy", "rel. error", "ratio", "iters", "seconds");
            for r in &report.rows {
                println!(
                    "{:<9} {:>6} {:>14.6} {:>12.3e} {:>9.4} {:>7} {:>8.2}",
                    sublift_cli::config::mode_name(r.mode),
                    r.labels,
                    r.energy,
                    r.relative_error,
                    r.energy / report.direct_energy,
                    r.iterations,
                    r.seconds
                );
            }
            Ok(finish(report.converged()))
        }
        Command::Denoise => {
            let report = experiments::denoise(&cfg).map_err(run_error)?;
            for (c, p) in report.input_psnr.iter().enumerate() {
                if let Some(p) = p {
                    println!("input channel {c}: PSNR {p:.2} dB");
                }
            }
            print!("{}", report.csv());
            Ok(finish(report.converged()))
        }
        Command::RampBias => {
            let report = experiments::ramp_bias(&cfg).map_err(run_error)?;
            print!("{}", report.csv());
            Ok(finish(report.converged()))
        }
        Command::Selftest => {
            let reports = experiments::run_selftest();
            print!("{}", experiments::selftest_table(&reports));
            Ok(if reports.iter().all(|r| r.passed()) { 0 } else { SELFTEST_FAILED })
        }
        Command::Info => {
            println!("sublift {}", env!("CARGO_PKG_VERSION"));
            println!("parallel feature: {}", cfg!(feature = "parallel"));
            println!("fault injection: {}", cfg!(feature = "fault-injection"));
            println!("config keys: {}", KEYS.join(", "));
            Ok(0)
        }
    }
}
