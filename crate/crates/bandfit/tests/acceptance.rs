//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test -p bandfit --test acceptance`.

mod common;

use std::f64::consts::PI;
use std::fs;
use std::time::{Duration, Instant};

use bandfit::archive::{ArchiveBuilder, ArchiveError, TensorArchive};
use bandfit::{load_archive, write_archive};
use bandfit_core::gabor::gabor_jacobian;
use bandfit_core::verify::{eigenfunction_suite, wft_shift_suite};
use bandfit_core::{
    calibration_curve, dft2, fit_kernel, gabor_kernel, histogram, idft2, percentile, BoxStats, Complex64,
    ComplexField2, Freq2, GaborParams, LayerSummary,
};
use common::{bandfit, random_truth, synthetic_archive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn eigenfunction() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for n in [8, 16, 32] {
        let s = eigenfunction_suite(n, 20, 1000 + n as u64).unwrap();
        worst = worst.max(s.max_residual);
        cases += s.cases;
    }
    outcome(
        worst < 1e-9,
        format!("{cases} cases, max residual {worst:.2e} (< 1e-9)"),
    )
}

fn wft_shift() -> Outcome {
    let s = wft_shift_suite(32, 20, 77).unwrap();
    outcome(
        s.max_residual < 1e-9 && s.cases == 20,
        format!(
            "{} cases at N=32, max residual {:.2e} (< 1e-9)",
            s.cases, s.max_residual
        ),
    )
}

fn dft_oracle(f: &ComplexField2) -> ComplexField2 {
    let (h, w) = f.dims();
    ComplexField2::from_fn(h, w, |m1, m2| {
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..h {
            for c in 0..w {
                let angle = -2.0 * PI * ((m1 * r) as f64 / h as f64 + (m2 * c) as f64 / w as f64);
                acc += f.at(r, c) * Complex64::new(angle.cos(), angle.sin());
            }
        }
        acc
    })
}

fn dft() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut oracle_err, mut parseval_err, mut trip_err): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for h in 1..=8 {
        for w in 1..=8 {
            let f = ComplexField2::from_fn(h, w, |_, _| {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let spec = dft2(&f);
            oracle_err = oracle_err.max(spec.max_abs_diff(&dft_oracle(&f)).unwrap());
            trip_err = trip_err.max(idft2(&spec).max_abs_diff(&f).unwrap());
            let space: f64 = f.values().iter().map(|z| z.norm_sqr()).sum();
            let freq: f64 = spec.values().iter().map(|z| z.norm_sqr()).sum::<f64>() / (h * w) as f64;
            parseval_err = parseval_err.max((space - freq).abs() / space);
        }
    }
    outcome(
        oracle_err < 1e-10 && parseval_err < 1e-9 && trip_err < 1e-10,
        format!("64 shapes up to 8x8: oracle {oracle_err:.1e}, Parseval {parseval_err:.1e}, round trip {trip_err:.1e}"),
    )
}

fn jacobian() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let k = rng.random_range(2..=11);
        let p = GaborParams::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-PI..PI),
            Freq2::new(rng.random_range(-PI..PI), rng.random_range(-PI..PI)),
            rng.random_range(0.5..6.0),
        );
        let (_, jac) = gabor_jacobian(k, &p).unwrap();
        for i in 0..5 {
            let (mut plus, mut minus) = (p.to_array(), p.to_array());
            plus[i] += h;
            minus[i] -= h;
            let fp = gabor_kernel(k, &GaborParams::from_array(plus)).unwrap();
            let fm = gabor_kernel(k, &GaborParams::from_array(minus)).unwrap();
            let mut num = 0.0;
            let mut den = 0.0;
            for (j, row) in jac.iter().enumerate() {
                let fd = (fp.values()[j] - fm.values()[j]) / (2.0 * h);
                num += (fd - row[i]) * (fd - row[i]);
                den += fd * fd;
            }
            worst = worst.max(num.sqrt() / den.sqrt().max(1e-8));
        }
    }
    outcome(
        worst < 1e-5,
        format!("50 points, worst relative error {worst:.2e} (< 1e-5)"),
    )
}

fn synthetic_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let total = 200;
    let mut ok = 0;
    for _ in 0..total {
        let k = [5, 7, 9, 11][rng.random_range(0..4)];
        let truth = random_truth(&mut rng, k);
        let r = fit_kernel(&gabor_kernel(k, &truth).unwrap()).unwrap();
        // The model is invariant under (u, phi) -> (-u, -phi).
        let u = r.params.u_c;
        let err = Freq2::new(u.u1 - truth.u_c.u1, u.u2 - truth.u_c.u2)
            .norm()
            .min(Freq2::new(u.u1 + truth.u_c.u1, u.u2 + truth.u_c.u2).norm());
        if r.rms < 1e-4 && err < 1e-3 {
            ok += 1;
        }
    }
    outcome(ok * 100 >= 95 * total, format!("{ok}/{total} recovered (>= 95%)"))
}

fn calibration() -> Outcome {
    let truth = GaborParams::new(1.0, -PI / 2.0, Freq2::new(PI / 3.0, 0.0), 3.0);
    let fractions: Vec<f64> = (0..=20).map(|i| f64::from(i) / 100.0).collect();
    let pts = calibration_curve(11, &truth, &fractions, 500, 0).unwrap();
    let monotone = pts.windows(2).all(|w| w[0].mean_rms < w[1].mean_rms);
    let worst = pts
        .iter()
        .skip(1)
        .map(|p| (p.mean_rms / (p.noise_fraction * 2.0 / 3f64.sqrt()) - 1.0).abs())
        .fold(0.0, f64::max);
    let at6 = pts[6].mean_rms;
    outcome(
        monotone && pts[0].mean_rms == 0.0 && worst < 0.05 && (0.03..=0.08).contains(&at6),
        format!(
            "monotone {monotone}, worst deviation {:.2}%, a=0.06 -> {at6:.4} (in [0.03, 0.08])",
            worst * 100.0
        ),
    )
}

fn percentile_oracle(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p / 100.0;
    let i = h.floor() as usize;
    if i + 1 >= v.len() {
        v[v.len() - 1]
    } else {
        v[i] + (h - i as f64) * (v[i + 1] - v[i])
    }
}

fn statistics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let values: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..1.0)).collect();
    let pct_ok = [0.0, 5.0, 25.0, 50.0, 75.0, 95.0, 100.0, 33.3]
        .iter()
        .all(|&p| percentile(&values, p).unwrap().to_bits() == percentile_oracle(&values, p).to_bits());

    let edges: Vec<f64> = (0..=20).map(|i| f64::from(i) * 0.045).collect();
    let h = histogram(&values, &edges).unwrap();
    let mut counts = vec![0u64; edges.len() - 1];
    let (mut under, mut over) = (0u64, 0u64);
    for &v in &values {
        match (0..counts.len()).find(|&i| edges[i] <= v && v < edges[i + 1]) {
            Some(i) => counts[i] += 1,
            None if v < edges[0] => under += 1,
            None => over += 1,
        }
    }
    let hist_ok = h.counts == counts && h.underflow == under && h.overflow == over;

    let mut ordered = true;
    for _ in 0..1000 {
        let n = rng.random_range(1..40);
        let distinct = rng.random_range(1..=n);
        let pool: Vec<f64> = (0..distinct).map(|_| rng.random_range(0.0..0.5)).collect();
        let xs: Vec<f64> = (0..n).map(|_| pool[rng.random_range(0..distinct)]).collect();
        let s = LayerSummary::from_residuals("fuzz", &xs, rng.random_range(0..3)).unwrap();
        let b: BoxStats = s.stats.unwrap();
        ordered &= b.is_ordered() && s.degenerate_count <= s.count;
    }
    outcome(
        pct_ok && hist_ok && ordered,
        format!("percentile exact {pct_ok}, histogram exact {hist_ok}, ordering on 1000 fuzzed summaries {ordered}"),
    )
}

fn end_to_end_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("forty.tensors");
    write_archive(&synthetic_archive(4, 10, 7, 40), &input).unwrap();
    let mut reports = Vec::new();
    for jobs in ["1", "8"] {
        let out = dir.path().join(format!("jobs{jobs}"));
        let (code, _, err) = bandfit(&[
            "fit",
            "--input",
            input.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--jobs",
            jobs,
        ]);
        if code != 0 {
            return outcome(false, format!("fit --jobs {jobs} exited {code}: {err}"));
        }
        reports.push(fs::read(out.join("report.json")).unwrap());
    }
    let slices = serde_json::from_slice::<serde_json::Value>(&reports[0]).unwrap()["slices"]
        .as_array()
        .map_or(0, Vec::len);
    outcome(
        slices == 40 && reports[0] == reports[1],
        format!(
            "{slices} slices, report.json identical under --jobs 1 and 8: {}",
            reports[0] == reports[1]
        ),
    )
}

fn archive_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let data: Vec<f32> = (0..2 * 3 * 5 * 5).map(|_| f32::from_bits(rng.random())).collect();
    let a = ArchiveBuilder::new()
        .tensor("conv.weight", &[2, 3, 5, 5], &data)
        .layer_order(&["conv"])
        .build();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rt.tensors");
    write_archive(&a, &path).unwrap();
    let back = load_archive(&path).unwrap();
    let exact = back
        .tensor_f32("conv.weight")
        .unwrap()
        .iter()
        .zip(&data)
        .all(|(x, y)| x.to_bits() == y.to_bits());

    let frame = |header: &str, payload: usize| {
        let mut b = (header.len() as u64).to_le_bytes().to_vec();
        b.extend_from_slice(header.as_bytes());
        b.extend(std::iter::repeat_n(0u8, payload));
        b
    };
    let parse = matches!(
        TensorArchive::from_bytes(&frame(r#"{"t": {"dtype": "F32",, }}"#, 0)),
        Err(ArchiveError::Parse { .. })
    );
    let dtype = matches!(
        TensorArchive::from_bytes(&frame(r#"{"t":{"dtype":"I8","shape":[4],"data_offsets":[0,4]}}"#, 4)),
        Err(ArchiveError::UnsupportedDtype { .. })
    );
    let truncated = matches!(
        TensorArchive::from_bytes(&frame(r#"{"t":{"dtype":"F32","shape":[4],"data_offsets":[0,16]}}"#, 12)),
        Err(ArchiveError::Truncated { ref what, .. }) if what == "t"
    );
    outcome(
        exact && parse && dtype && truncated,
        format!("bit-exact {exact}; malformed header {parse}, bad dtype {dtype}, truncated payload {truncated}"),
    )
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check, Option<Duration>); 9] = [
        ("eigenfunction identity", eigenfunction, Some(Duration::from_secs(10))),
        ("windowed shift identity", wft_shift, Some(Duration::from_secs(10))),
        ("DFT correctness", dft, None),
        ("Jacobian check", jacobian, None),
        ("synthetic recovery", synthetic_recovery, Some(Duration::from_secs(60))),
        ("noise calibration", calibration, Some(Duration::from_secs(60))),
        ("statistics oracles", statistics, None),
        ("end-to-end determinism", end_to_end_determinism, None),
        ("archive round trip", archive_round_trip, None),
    ];
    let mut failures = 0;
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let o = check();
        let took = start.elapsed();
        let in_time = budget.is_none_or(|b| took < b);
        let pass = o.pass && in_time;
        failures += usize::from(!pass);
        let limit = budget.map_or(String::new(), |b| format!(" (limit {}s)", b.as_secs()));
        println!(
            "{} {name:<25} {:.2}s{limit}  {}",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            o.detail
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
