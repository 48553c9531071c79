//! Command-line front end: image and config I/O and the experiment runners.

pub mod config;
pub mod experiments;
pub mod image;
pub mod synth;

use config::{ModeChoice, RunConfig};
use image::ImageBuffer;
use sublift_core::solver::SolverConfig;

/// The commands of the `sublift` binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    ConvexExact,
    Denoise,
    RampBias,
    Selftest,
    Info,
}

/// Default settings of a command, before the config file and overrides.
pub fn defaults(command: Command) -> RunConfig {
    let base = RunConfig::default();
    match command {
        Command::ConvexExact => RunConfig {
            labels: vec![2, 3, 5],
            baseline_labels: vec![2, 3, 5, 16],
            eta: "squared".into(),
            eta_weight: 3.0,
            kappa: "infinite".into(),
            ..base
        },
        Command::Denoise => RunConfig {
            labels: vec![2, 4, 6],
            mode: ModeChoice::Both,
            eta: "squared".into(),
            // weak smoothing against a cheap jump: the two-label convex
            // surrogate then blurs edges the finer lifts keep
            eta_weight: 3.0,
            kappa: "constant".into(),
            kappa_weight: 0.2,
            noise_sigma: 0.3,
            seed: 1,
            size: 64,
            solver: SolverConfig {
                max_iters: 5000,
                stop_tol: 1e-5,
                ..SolverConfig::default()
            },
            ..base
        },
        Command::RampBias => RunConfig {
            labels: vec![2, 4],
            mode: ModeChoice::Both,
            eta: "squared".into(),
            // little smoothing, so the label bias of the baseline shows
            eta_weight: 0.002,
            kappa: "constant".into(),
            kappa_weight: 0.5,
            size: 400,
            solver: SolverConfig {
                max_iters: 100_000,
                ..SolverConfig::default()
            },
            ..base
        },
        Command::Selftest | Command::Info => base,
    }
}

/// 64×64 grayscale test image shipped with the binary; equal to
/// [`synth::convex_test_image`].
pub fn bundled_image() -> ImageBuffer {
    image::decode(include_bytes!("../assets/smooth64.pgm")).expect("bundled image is valid")
}
