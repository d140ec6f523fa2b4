#![allow(dead_code)]

use std::path::PathBuf;

use bandfit_core::{BoxStats, LayerSummary};

/// Compares `bytes` with `tests/golden/<name>`. Set `BANDFIT_BLESS=1` to rewrite.
pub fn assert_golden(name: &str, bytes: &[u8]) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    if std::env::var_os("BANDFIT_BLESS").is_some() {
        std::fs::write(&path, bytes).unwrap();
        return;
    }
    let want = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}; rerun with BANDFIT_BLESS=1", path.display()));
    assert!(want == bytes, "{} differs from the rendered output", path.display());
}

pub fn summary(name: &str, values: [f64; 5], count: usize, degenerate: usize) -> LayerSummary {
    let [p5, q1, median, q3, p95] = values;
    LayerSummary {
        layer_name: name.into(),
        count,
        degenerate_count: degenerate,
        stats: Some(BoxStats {
            median,
            q1,
            q3,
            p5,
            p95,
        }),
    }
}

use std::f64::consts::PI;

use bandfit::archive::{ArchiveBuilder, TensorArchive};
use bandfit_core::{gabor_kernel, Freq2, GaborParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_truth<R: Rng>(rng: &mut R, k: usize) -> GaborParams {
    let sigma = rng.random_range(1.0..=k as f64 / 2.0);
    let mag = rng.random_range(PI / 8.0..=3.0 * PI / 4.0);
    let angle = rng.random_range(0.0..2.0 * PI);
    let phase = rng.random_range(-PI..PI);
    GaborParams::new(1.0, phase, Freq2::new(mag * angle.cos(), mag * angle.sin()), sigma)
}

/// `layers` tensors `conv{i}.weight` of shape `[filters, 1, k, k]`, each
/// filter a random clean Gabor, with a matching layer manifest.
pub fn synthetic_archive(layers: usize, filters: usize, k: usize, seed: u64) -> TensorArchive {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = ArchiveBuilder::new().model_id("synthetic");
    let mut order = Vec::new();
    for layer in 0..layers {
        let mut data = Vec::with_capacity(filters * k * k);
        for _ in 0..filters {
            let g = gabor_kernel(k, &random_truth(&mut rng, k)).unwrap();
            data.extend(g.values().iter().map(|&v| v as f32));
        }
        let name = format!("conv{}", layer + 1);
        b = b.tensor(&format!("{name}.weight"), &[filters, 1, k, k], &data);
        order.push(name);
    }
    b.layer_order(&order).build()
}

/// Runs the built binary, returning (exit code, stdout, stderr).
pub fn bandfit(args: &[&str]) -> (i32, String, String) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_bandfit"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}
