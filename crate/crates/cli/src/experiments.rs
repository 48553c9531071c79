//! Experiment runners behind the CLI commands.
//!
//! Every runner returns a report and, when given an output directory, writes
//! images and CSV tables there. Reports and CSV files carry no wall-clock data
//! unless timing is requested, so repeated runs produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sublift_core::grid::LabelGrid;
use sublift_core::models::{assemble, DualMode, ModelSpec, RegularizerSpec};
use sublift_core::regularizer::{Eta, Kappa};
use sublift_core::solver::{
    direct_quadratic_solve, infconv_reference_solve, quadratic_energy, run, unlifted_energy, write_diagnostics_csv,
    ChannelSolution, InfconvConfig, SolverConfig,
};
use sublift_core::unaries::UnaryModel;
use sublift_core::verify::{selftest, SuiteReport, SuiteSizes};
use thiserror::Error;

use crate::config::{mode_name, RunConfig};
use crate::image::{load_image, save_image, ImageBuffer, ImageError};
use crate::synth;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("solver: {0}")]
    Solver(String),
}

/// Solves the quadratic-data model of each channel plane.
pub fn solve_planes(
    planes: &[Vec<f64>],
    width: usize,
    height: usize,
    data_weight: f64,
    grid: &LabelGrid,
    reg: &RegularizerSpec,
    mode: DualMode,
    solver: &SolverConfig,
) -> Result<(Vec<ChannelSolution>, Vec<Vec<f64>>, Vec<f64>), RunError> {
    let data: Vec<f64> = planes.concat();
    let spec = ModelSpec::quadratic_data(
        width,
        height,
        planes.len(),
        &data,
        data_weight,
        grid.clone(),
        reg.clone(),
        mode,
    );
    let model = assemble(&spec).map_err(|e| RunError::Usage(e.to_string()))?;
    let sols = run(&model, solver).map_err(|e| RunError::Solver(e.to_string()))?;
    let outputs: Vec<Vec<f64>> = sols.iter().map(|s| s.primal.recover(grid)).collect();
    let energies = outputs
        .iter()
        .zip(&model.channels)
        .map(|(u, m)| unlifted_energy(u, m))
        .collect();
    Ok((sols, outputs, energies))
}

fn ensure_dir(dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|source| RunError::Write {
        path: dir.display().to_string(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), RunError> {
    fs::write(path, text).map_err(|source| RunError::Write {
        path: path.display().to_string(),
        source,
    })
}

fn write_diagnostics(dir: &Path, stem: &str, sols: &[ChannelSolution]) -> Result<Vec<PathBuf>, RunError> {
    let mut paths = Vec::new();
    for (c, sol) in sols.iter().enumerate() {
        let path = dir.join(format!("{stem}_c{c}_diagnostics.csv"));
        let mut bytes = Vec::new();
        write_diagnostics_csv(&sol.history, &mut bytes).expect("writing to memory");
        write_text(&path, std::str::from_utf8(&bytes).expect("ascii"))?;
        paths.push(path);
    }
    Ok(paths)
}

// --- convex-exact -------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexRow {
    pub mode: DualMode,
    pub labels: usize,
    pub energy: f64,
    /// `(E_Q - E_Q(direct)) / E_Q(direct)`.
    pub relative_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexReport {
    pub direct_energy: f64,
    pub rows: Vec<ConvexRow>,
}

impl ConvexReport {
    pub const CSV_HEADER: &'static str = "mode,labels,energy,relative_error,ratio,iterations,converged";

    pub fn csv(&self) -> String {
        let mut s = format!("{}\ndirect,0,{:.9e},0,1,0,true\n", Self::CSV_HEADER, self.direct_energy);
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{:.9e},{:.6e},{:.6},{},{}",
                mode_name(r.mode),
                r.labels,
                r.energy,
                r.relative_error,
                r.energy / self.direct_energy,
                r.iterations,
                r.converged
            )
            .unwrap();
        }
        s
    }

    pub fn converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }
}

/// `Σ w (u - f)² + λ Σ ‖∇u‖²` for the direct solve and each lifted solve.
pub fn convex_exact(cfg: &RunConfig, image: &ImageBuffer) -> Result<ConvexReport, RunError> {
    if image.channels != 1 {
        return Err(RunError::Usage("convex-exact needs a grayscale image".into()));
    }
    let reg = cfg.regularizer().map_err(|e| RunError::Usage(e.to_string()))?;
    let lambda = match (reg.eta, &reg.kappa) {
        (Eta::SquaredNorm { weight }, Kappa::Infinite) => weight,
        _ => return Err(RunError::Usage("convex-exact needs eta = squared and kappa = infinite".into())),
    };
    let w = cfg.data_weight;
    if w <= 0.0 {
        return Err(RunError::Usage("convex-exact needs a positive data weight".into()));
    }
    let (width, height) = (image.width, image.height);
    let f = image.plane(0);
    let energy = |u: &[f64]| w * quadratic_energy(u, &f, width, height, lambda / w);
    let (direct, _) = direct_quadratic_solve(&f, width, height, lambda / w);
    let direct_energy = energy(&direct);
    let out = cfg.output_dir.as_path();
    ensure_dir(out)?;
    save_image(&ImageBuffer::new(width, height, 1, direct)?, &out.join("convex_direct.pgm"))?;

    let mut rows = Vec::new();
    for mode in cfg.mode.modes() {
        let labels = match mode {
            DualMode::PiecewiseLinear => &cfg.labels,
            DualMode::PiecewiseConstant => &cfg.baseline_labels,
        };
        for &ell in labels {
            let grid = cfg.grid(ell).map_err(|e| RunError::Usage(e.to_string()))?;
            let start = Instant::now();
            let (sols, outputs, _) =
                solve_planes(std::slice::from_ref(&f), width, height, w, &grid, &reg, mode, &cfg.solver)?;
            let seconds = start.elapsed().as_secs_f64();
            let e = energy(&outputs[0]);
            let stem = format!("convex_{}_l{ell}", mode_name(mode));
            save_image(&ImageBuffer::new(width, height, 1, outputs[0].clone())?, &out.join(format!("{stem}.pgm")))?;
            write_diagnostics(out, &stem, &sols)?;
            rows.push(ConvexRow {
                mode,
                labels: ell,
                energy: e,
                relative_error: (e - direct_energy) / direct_energy,
                iterations: sols[0].iterations,
                converged: sols[0].converged,
                seconds,
            });
        }
    }
    let report = ConvexReport { direct_energy, rows };
    write_text(&out.join("convex_exact.csv"), &report.csv())?;
    Ok(report)
}

// --- denoise --------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseRow {
    pub mode: DualMode,
    pub labels: usize,
    pub channel: usize,
    /// Against the clean image, when one is known.
    pub psnr: Option<f64>,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseReport {
    pub input_psnr: Vec<Option<f64>>,
    pub rows: Vec<DenoiseRow>,
}

impl DenoiseReport {
    pub const CSV_HEADER: &'static str = "mode,labels,channel,psnr,energy,iterations,converged";

    pub fn csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let psnr = r.psnr.map(|p| format!("{p:.6}")).unwrap_or_default();
            writeln!(
                s,
                "{},{},{},{},{:.9e},{},{}",
                mode_name(r.mode),
                r.labels,
                r.channel,
                psnr,
                r.energy,
                r.iterations,
                r.converged
            )
            .unwrap();
        }
        s
    }

    pub fn psnr(&self, mode: DualMode, labels: usize, channel: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.mode == mode && r.labels == labels && r.channel == channel)
            .and_then(|r| r.psnr)
    }

    pub fn converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }
}

/// Clean and noisy images for `denoise`: the input file (or the phantom) and
/// its seeded noisy version.
pub fn denoise_inputs(cfg: &RunConfig) -> Result<(Option<ImageBuffer>, ImageBuffer), RunError> {
    let clean = match &cfg.input {
        Some(path) => load_image(path)?,
        None => ImageBuffer::from_planes(cfg.size, cfg.size, &synth::phantom(cfg.size, cfg.size))?,
    };
    let truth = match &cfg.truth {
        Some(path) => Some(load_image(path)?),
        None => Some(clean.clone()),
    };
    if cfg.noise_sigma == 0.0 {
        // without noise and without an explicit truth there is nothing to compare against
        let truth = if cfg.truth.is_some() || cfg.input.is_none() { truth } else { None };
        return Ok((truth, clean));
    }
    let noisy = ImageBuffer::new(
        clean.width,
        clean.height,
        clean.channels,
        synth::add_noise(&clean.values, cfg.noise_sigma, cfg.seed),
    )?;
    Ok((truth, noisy))
}

pub fn denoise(cfg: &RunConfig) -> Result<DenoiseReport, RunError> {
    let (truth, noisy) = denoise_inputs(cfg)?;
    if let Some(t) = &truth {
        if (t.width, t.height, t.channels) != (noisy.width, noisy.height, noisy.channels) {
            return Err(RunError::Usage("ground truth and input differ in shape".into()));
        }
    }
    let reg = cfg.regularizer().map_err(|e| RunError::Usage(e.to_string()))?;
    let (width, height) = (noisy.width, noisy.height);
    let planes = noisy.planes();
    let truth_planes = truth.as_ref().map(ImageBuffer::planes);
    let out = cfg.output_dir.as_path();
    ensure_dir(out)?;
    save_image(&noisy, &out.join(format!("denoise_input.{}", ext(&noisy))))?;
    let input_psnr = (0..noisy.channels)
        .map(|c| truth_planes.as_ref().map(|t| synth::psnr(&planes[c], &t[c])))
        .collect();
    let row = cfg.row.unwrap_or(height / 2).min(height - 1);

    let mut rows = Vec::new();
    let mut slice = String::from("x");
    for c in 0..noisy.channels {
        write!(slice, ",input_c{c}").unwrap();
    }
    let mut columns: Vec<Vec<f64>> = (0..noisy.channels).map(|c| planes[c][row * width..(row + 1) * width].to_vec()).collect();
    for mode in cfg.mode.modes() {
        for &ell in &cfg.labels {
            let grid = cfg.grid(ell).map_err(|e| RunError::Usage(e.to_string()))?;
            let (sols, outputs, energies) =
                solve_planes(&planes, width, height, cfg.data_weight, &grid, &reg, mode, &cfg.solver)?;
            let stem = format!("denoise_{}_l{ell}", mode_name(mode));
            let image = ImageBuffer::from_planes(width, height, &outputs)?;
            save_image(&image, &out.join(format!("{stem}.{}", ext(&image))))?;
            write_diagnostics(out, &stem, &sols)?;
            for (c, sol) in sols.iter().enumerate() {
                rows.push(DenoiseRow {
                    mode,
                    labels: ell,
                    channel: c,
                    psnr: truth_planes.as_ref().map(|t| synth::psnr(&outputs[c], &t[c])),
                    energy: energies[c],
                    iterations: sol.iterations,
                    converged: sol.converged,
                });
                write!(slice, ",{}_l{ell}_c{c}", mode_name(mode)).unwrap();
                columns.push(outputs[c][row * width..(row + 1) * width].to_vec());
            }
        }
    }
    slice.push('\n');
    for x in 0..width {
        write!(slice, "{x}").unwrap();
        for col in &columns {
            write!(slice, ",{:.9}", col[x]).unwrap();
        }
        slice.push('\n');
    }
    write_text(&out.join("denoise_row.csv"), &slice)?;
    let report = DenoiseReport { input_psnr, rows };
    write_text(&out.join("denoise.csv"), &report.csv())?;
    Ok(report)
}

fn ext(image: &ImageBuffer) -> &'static str {
    if image.channels == 1 {
        "pgm"
    } else {
        "ppm"
    }
}

// --- ramp-bias ------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct RampRow {
    pub mode: DualMode,
    pub labels: usize,
    /// Fraction of outputs within `h/100` of a label.
    pub bias_score: f64,
    /// Largest `|u - ramp|` relative to the label range.
    pub max_deviation: f64,
    /// Largest `|u - reference|` against the unlifted two-label solve.
    pub reference_deviation: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RampReport {
    pub rows: Vec<RampRow>,
}

impl RampReport {
    pub const CSV_HEADER: &'static str = "mode,labels,bias_score,max_deviation,reference_deviation,iterations,converged";

    pub fn csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            let reference = r.reference_deviation.map(|d| format!("{d:.6e}")).unwrap_or_default();
            writeln!(
                s,
                "{},{},{:.6},{:.6e},{},{},{}",
                mode_name(r.mode),
                r.labels,
                r.bias_score,
                r.max_deviation,
                reference,
                r.iterations,
                r.converged
            )
            .unwrap();
        }
        s
    }

    pub fn row(&self, mode: DualMode, labels: usize) -> Option<&RampRow> {
        self.rows.iter().find(|r| r.mode == mode && r.labels == labels)
    }

    pub fn converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }
}

/// Fraction of `u` within `h/100` of a label of `grid`.
pub fn label_bias_score(u: &[f64], grid: &LabelGrid) -> f64 {
    let tol = grid.h() / 100.0;
    let near = u
        .iter()
        .filter(|&&x| grid.labels().iter().any(|&g| (x - g).abs() <= tol))
        .count();
    near as f64 / u.len() as f64
}

/// Denoises a `size`-sample ramp across the label range in both modes.
pub fn ramp_bias(cfg: &RunConfig) -> Result<RampReport, RunError> {
    let reg = cfg.regularizer().map_err(|e| RunError::Usage(e.to_string()))?;
    let n = cfg.size;
    let clean = synth::ramp(n, cfg.gamma_min, cfg.gamma_max);
    let input = if cfg.noise_sigma > 0.0 {
        synth::add_noise(&clean, cfg.noise_sigma, cfg.seed)
    } else {
        clean.clone()
    };
    let range = cfg.gamma_max - cfg.gamma_min;
    let out = cfg.output_dir.as_path();
    ensure_dir(out)?;
    let mut rows = Vec::new();
    let mut table = String::from("x,ramp,input");
    let mut columns = vec![clean.clone(), input.clone()];
    for mode in cfg.mode.modes() {
        for &ell in &cfg.labels {
            let grid = cfg.grid(ell).map_err(|e| RunError::Usage(e.to_string()))?;
            let (sols, outputs, _) =
                solve_planes(std::slice::from_ref(&input), n, 1, cfg.data_weight, &grid, &reg, mode, &cfg.solver)?;
            let u = &outputs[0];
            let reference_deviation = if ell == 2 && mode == DualMode::PiecewiseLinear {
                let unaries = input.iter().map(|&f| UnaryModel::quadratic(cfg.data_weight, f)).collect();
                let spec = ModelSpec {
                    width: n,
                    height: 1,
                    channels: 1,
                    grid: grid.clone(),
                    unaries,
                    reg: reg.clone(),
                    dual_mode: mode,
                };
                let model = assemble(&spec).map_err(|e| RunError::Usage(e.to_string()))?;
                let reference = infconv_reference_solve(&model.channels[0], &InfconvConfig::default())
                    .map_err(|e| RunError::Solver(e.to_string()))?;
                Some(u.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            } else {
                None
            };
            let stem = format!("ramp_{}_l{ell}", mode_name(mode));
            write_diagnostics(out, &stem, &sols)?;
            write!(table, ",{}_l{ell}", mode_name(mode)).unwrap();
            columns.push(u.clone());
            rows.push(RampRow {
                mode,
                labels: ell,
                bias_score: label_bias_score(u, &grid),
                max_deviation: u.iter().zip(&clean).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / range,
                reference_deviation,
                iterations: sols[0].iterations,
                converged: sols[0].converged,
            });
        }
    }
    table.push('\n');
    for x in 0..n {
        write!(table, "{x}").unwrap();
        for col in &columns {
            write!(table, ",{:.9}", col[x]).unwrap();
        }
        table.push('\n');
    }
    write_text(&out.join("ramp_profile.csv"), &table)?;
    let report = RampReport { rows };
    write_text(&out.join("ramp_bias.csv"), &report.csv())?;
    Ok(report)
}

// --- selftest -------------------------------------------------------------

pub fn run_selftest() -> Vec<SuiteReport> {
    selftest(SuiteSizes::default())
}

pub fn selftest_table(reports: &[SuiteReport]) -> String {
    let mut s = String::new();
    for r in reports {
        writeln!(s, "{r}").unwrap();
    }
    s
}
