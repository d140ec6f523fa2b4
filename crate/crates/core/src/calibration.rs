//! RMS residual produced by known amounts of uniform noise on an analytic kernel.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fit::normalize_kernel;
use crate::gabor::{gabor_kernel, GaborParams};

/// Value range of a kernel normalized to unit peak magnitude.
pub const NORMALIZED_RANGE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationPoint {
    pub noise_fraction: f64,
    pub mean_rms: f64,
    pub trials: usize,
}

/// For each noise fraction `a`, the mean over `trials` of the RMS difference
/// between the normalized kernel and a copy corrupted by i.i.d. uniform noise
/// on `[-a R, a R]`.
///
/// Every fraction replays the same seeded noise stream, so the curve is a
/// deterministic, strictly increasing function of `a`.
pub fn calibration_curve(
    k: usize,
    truth: &GaborParams,
    noise_fractions: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<CalibrationPoint>> {
    if trials == 0 {
        return Err(Error::InvalidSize("trials must be positive"));
    }
    if let Some(&a) = noise_fractions.iter().find(|a| !(**a >= 0.0) || !a.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "noise_fraction",
            value: a,
        });
    }
    if let Some(w) = noise_fractions.windows(2).find(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter {
            name: "noise_fraction",
            value: w[1],
        });
    }
    let normalized = normalize_kernel(&gabor_kernel(k, truth)?)?;
    if normalized.degenerate {
        return Err(Error::InvalidParameter {
            name: "amplitude",
            value: truth.amplitude,
        });
    }
    let clean = normalized.kernel.values();

    let mut points = Vec::with_capacity(noise_fractions.len());
    let mut corrupted = alloc::vec![0.0; clean.len()];
    for &fraction in noise_fractions {
        let half_width = fraction * NORMALIZED_RANGE;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut total = 0.0;
        for _ in 0..trials {
            for (c, &v) in corrupted.iter_mut().zip(clean) {
                *c = v + half_width * rng.random_range(-1.0..=1.0);
            }
            let ss: f64 = corrupted.iter().zip(clean).map(|(a, b)| (a - b) * (a - b)).sum();
            total += libm::sqrt(ss / clean.len() as f64);
        }
        points.push(CalibrationPoint {
            noise_fraction: fraction,
            mean_rms: total / trials as f64,
            trials,
        });
    }
    Ok(points)
}
