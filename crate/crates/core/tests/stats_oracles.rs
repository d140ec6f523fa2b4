//! Percentiles, histograms and the calibration curve against independent references.

use bandfit_core::calibration::NORMALIZED_RANGE;
use bandfit_core::stats::{histogram, percentile, LayerSummary};
use bandfit_core::{calibration_curve, Freq2, GaborParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sort-and-interpolate written independently of the library path.
fn percentile_oracle(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = (v.len() - 1) as f64 * p / 100.0;
    let below = rank.floor();
    let i = below as usize;
    let j = (i + 1).min(v.len() - 1);
    v[i] + (rank - below) * (v[j] - v[i])
}

/// Linear scan over every bin.
fn histogram_oracle(values: &[f64], edges: &[f64]) -> (Vec<u64>, u64, u64) {
    let mut counts = vec![0; edges.len() - 1];
    let (mut under, mut over) = (0, 0);
    for &v in values {
        if v < edges[0] {
            under += 1;
            continue;
        }
        match (0..edges.len() - 1).find(|&i| edges[i] <= v && v < edges[i + 1]) {
            Some(i) => counts[i] += 1,
            None => over += 1,
        }
    }
    (counts, under, over)
}

#[test]
fn percentile_matches_oracle_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let values: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..1.0)).collect();
    for p in [5.0, 25.0, 50.0, 75.0, 95.0, 0.0, 100.0, 33.3] {
        assert_eq!(percentile(&values, p).unwrap(), percentile_oracle(&values, p));
    }
}

#[test]
fn layer_summary_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rms: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..0.2f64).powi(2)).collect();
    let s = LayerSummary::from_residuals("conv3", &rms, 0).unwrap().stats.unwrap();
    assert_eq!(s.median, percentile_oracle(&rms, 50.0));
    assert_eq!(s.q1, percentile_oracle(&rms, 25.0));
    assert_eq!(s.q3, percentile_oracle(&rms, 75.0));
    assert_eq!(s.p5, percentile_oracle(&rms, 5.0));
    assert_eq!(s.p95, percentile_oracle(&rms, 95.0));
}

#[test]
fn histogram_matches_oracle_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let values: Vec<f64> = (0..1000).map(|_| rng.random_range(-0.1..1.1)).collect();
    let mut edges: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..1.0)).collect();
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let h = histogram(&values, &edges).unwrap();
    let (counts, under, over) = histogram_oracle(&values, &edges);
    assert_eq!(h.counts, counts);
    assert_eq!((h.underflow, h.overflow), (under, over));
}

#[test]
fn uniform_histogram_within_binomial_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let values: Vec<f64> = (0..10_000).map(|_| rng.random_range(0.0..1.0)).collect();
    let edges: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let h = histogram(&values, &edges).unwrap();
    // Binomial(10000, 0.1): sigma = 30.
    for c in h.counts {
        assert!((c as f64 - 1000.0).abs() <= 5.0 * 30.0, "count {c}");
    }
}

#[test]
fn calibration_tracks_uniform_rms() {
    let truth = GaborParams::new(1.0, 0.0, Freq2::new(0.8, 0.4), 3.0);
    let fractions: Vec<f64> = (0..=20).map(|i| i as f64 / 100.0).collect();
    let curve = calibration_curve(11, &truth, &fractions, 500, 0).unwrap();
    assert_eq!(curve[0].mean_rms, 0.0);
    for w in curve.windows(2) {
        assert!(w[1].mean_rms > w[0].mean_rms);
    }
    for pt in &curve[1..] {
        let expect = pt.noise_fraction * NORMALIZED_RANGE / 3f64.sqrt();
        assert!((pt.mean_rms - expect).abs() <= 0.05 * expect, "{pt:?} vs {expect}");
    }
    let six = curve.iter().find(|p| (p.noise_fraction - 0.06).abs() < 1e-12).unwrap();
    assert!((0.03..=0.08).contains(&six.mean_rms));
}
