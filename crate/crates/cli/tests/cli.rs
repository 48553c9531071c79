use std::fs;
use std::process::Command;

use proptest::prelude::*;
use sublift_cli::config::KeyValues;
use sublift_cli::image::{decode, encode, ImageBuffer};
use sublift_cli::synth::convex_test_image;
use sublift_cli::{bundled_image, defaults};

fn sublift(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sublift")).args(args).output().unwrap()
}

proptest! {
    #[test]
    fn eight_bit_round_trip(w in 1usize..9, h in 1usize..9, rgb in any::<bool>(), seed in any::<u64>()) {
        let channels = if rgb { 3 } else { 1 };
        let n = w * h * channels;
        let values: Vec<f64> = (0..n).map(|i| ((seed.wrapping_mul(i as u64 + 1) >> 11) as f64) / (1u64 << 53) as f64).collect();
        let img = ImageBuffer::new(w, h, channels, values).unwrap();
        let back = decode(&encode(&img)).unwrap();
        prop_assert_eq!((back.width, back.height, back.channels), (w, h, channels));
        for (a, b) in img.values.iter().zip(&back.values) {
            prop_assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }
}

#[test]
fn bundled_image_is_the_generated_one() {
    let img = bundled_image();
    assert_eq!((img.width, img.height, img.channels), (64, 64, 1));
    let expected = convex_test_image();
    for (a, b) in img.values.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn unknown_key_is_a_usage_error() {
    let mut kv = KeyValues::default();
    kv.set("no_such_key", "1");
    assert!(defaults(sublift_cli::Command::Denoise).apply(&kv).is_err());
    let out = sublift(&["info", "--no_such_key", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_command_is_a_usage_error() {
    assert_eq!(sublift(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn missing_input_is_an_io_error() {
    let out = sublift(&["convex-exact", "--input", "/nonexistent/x.pgm"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.pgm");
    fs::write(&path, b"P5\n4 4\n255\n\x00\x01").unwrap();
    let out = sublift(&["convex-exact", "--input", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("truncated"));
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let out = sublift(&[
        "convex-exact",
        "--labels",
        "2",
        "--baseline_labels",
        "2",
        "--max_iters",
        "5",
        "--output_dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(dir.path().join("convex_exact.csv").exists());
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "# small ramp\nsize = 40\nlabels = 2\nmax_iters = 20000\noutput_dir = {}\n",
            dir.path().display()
        ),
    )
    .unwrap();
    let out = sublift(&["ramp-bias", "--config", cfg.to_str().unwrap(), "--mode", "linear"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("ramp_bias.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "{csv}");
    assert!(csv.lines().nth(1).unwrap().starts_with("linear,2,"));
}

#[test]
fn info_lists_keys() {
    let out = sublift(&["info"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("eta_weight") && text.contains("kappa_weight"));
}
