//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use sublift_cli::experiments::{convex_exact, denoise, ramp_bias};
use sublift_cli::{bundled_image, defaults, Command};
use sublift_core::models::DualMode;
use sublift_core::verify::{selftest, SuiteReport, SuiteSizes};

struct Outcome {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn report(out: &mut Vec<Outcome>, id: usize, name: &'static str, passed: bool, detail: String) {
    let o = Outcome { id, name, passed, detail };
    println!(
        "criterion {:>2} {:<22} {}  {}",
        o.id,
        o.name,
        if o.passed { "PASS" } else { "FAIL" },
        o.detail
    );
    out.push(o);
}

fn convex(out: &mut Vec<Outcome>) {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = defaults(Command::ConvexExact);
    cfg.output_dir = dir.path().to_path_buf();
    let rep = convex_exact(&cfg, &bundled_image()).expect("convex-exact runs");

    let linear: Vec<_> = rep.rows.iter().filter(|r| r.mode == DualMode::PiecewiseLinear).collect();
    let ok = linear.len() == 3
        && linear.iter().all(|r| r.relative_error.abs() <= 1e-3 && r.seconds <= 120.0);
    let detail = linear
        .iter()
        .map(|r| format!("l={} rel {:.2e} {:.1}s", r.labels, r.relative_error, r.seconds))
        .collect::<Vec<_>>()
        .join(", ");
    report(out, 1, "convex exactness", ok, detail);

    let ratios: Vec<(usize, f64)> = rep
        .rows
        .iter()
        .filter(|r| r.mode == DualMode::PiecewiseConstant)
        .map(|r| (r.labels, r.energy / rep.direct_energy))
        .collect();
    let labels: Vec<usize> = ratios.iter().map(|r| r.0).collect();
    let ok = labels == [2, 3, 5, 16]
        && ratios[0].1 >= 2.0
        && ratios.windows(2).all(|w| w[1].1 < w[0].1);
    let detail = ratios
        .iter()
        .map(|(l, q)| format!("l={l} ratio {q:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    report(out, 2, "baseline label bias", ok, detail);
}

fn suite(out: &mut Vec<Outcome>, id: usize, name: &'static str, reports: &[SuiteReport], suite: &str) {
    let r = reports.iter().find(|r| r.name == suite).expect("suite present");
    report(
        out,
        id,
        name,
        r.passed(),
        format!("{} cases, {} failures, worst {:.2e} (tol {:.0e})", r.cases, r.failures, r.worst, r.tolerance),
    );
}

fn ramp(out: &mut Vec<Outcome>) {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = defaults(Command::RampBias);
    cfg.output_dir = dir.path().to_path_buf();
    let rep = ramp_bias(&cfg).expect("ramp-bias runs");
    let proposed = rep.row(DualMode::PiecewiseLinear, 4).expect("proposed l=4");
    let baseline = rep.row(DualMode::PiecewiseConstant, 4).expect("baseline l=4");
    let ok = proposed.max_deviation <= 0.02 && proposed.bias_score <= 0.2 && baseline.bias_score >= 0.9;
    report(
        out,
        9,
        "sublabel accuracy",
        ok,
        format!(
            "proposed dev {:.3}% bias {:.3}, baseline bias {:.3}",
            100.0 * proposed.max_deviation,
            proposed.bias_score,
            baseline.bias_score
        ),
    );
}

fn denoising(out: &mut Vec<Outcome>) {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = defaults(Command::Denoise);
    cfg.output_dir = dir.path().to_path_buf();
    let rep = denoise(&cfg).expect("denoise runs");
    let psnr = |mode, l, c| rep.psnr(mode, l, c).expect("row present");
    let mut ok = true;
    let mut detail = Vec::new();
    for c in 0..3 {
        let p: Vec<f64> = [2, 4, 6].iter().map(|&l| psnr(DualMode::PiecewiseLinear, l, c)).collect();
        let base = psnr(DualMode::PiecewiseConstant, 2, c);
        ok &= p[0] <= p[1] && p[1] <= p[2] && p[0] >= base + 5.0;
        detail.push(format!("c{c} {:.2}/{:.2}/{:.2} vs {:.2}", p[0], p[1], p[2], base));
    }
    report(out, 10, "denoising trend", ok, detail.join(", "));
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn determinism(out: &mut Vec<Outcome>) {
    let run = || {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = defaults(Command::Denoise);
        cfg.output_dir = dir.path().to_path_buf();
        cfg.size = 24;
        cfg.labels = vec![2, 4];
        cfg.solver.max_iters = 200;
        denoise(&cfg).expect("denoise runs");
        csv_files(dir.path())
    };
    let (a, b) = (run(), run());
    let ok = !a.is_empty() && a == b;
    report(out, 11, "determinism", ok, format!("{} csv files compared byte for byte", a.len()));
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut out = Vec::new();
    convex(&mut out);
    let suites = selftest(SuiteSizes::default());
    suite(&mut out, 3, "jump-set equivalence", &suites, "jump-sets");
    suite(&mut out, 4, "epigraph split", &suites, "split-form");
    suite(&mut out, 5, "tv specialization", &suites, "tv-balls");
    suite(&mut out, 6, "data term duality", &suites, "dataterm");
    suite(&mut out, 7, "two-label infconv", &suites, "two-label");
    suite(&mut out, 8, "projections", &suites, "projections");
    ramp(&mut out);
    denoising(&mut out);
    determinism(&mut out);
    out.sort_by_key(|o| o.id);
    let failed: Vec<String> = out.iter().filter(|o| !o.passed).map(|o| format!("{} ({})", o.id, o.name)).collect();
    println!("acceptance: {}/{} passed in {:.0}s", out.len() - failed.len(), out.len(), start.elapsed().as_secs_f64());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
