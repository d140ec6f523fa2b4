//! Multi-start damped Gauss-Newton fitting of the oriented bandpass model to
//! a single square kernel slice.
//!
//! Kernels are first scaled to unit peak magnitude; the reported residual is
//! the RMS pointwise difference on that scale.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{grid_coords, wrap_angle, Field2, Freq2};
use crate::gabor::{gabor_jacobian, gabor_kernel, gaussian_window, GaborParams, N_PARAMS};
use crate::spectral::mtf;

/// Kernels whose peak magnitude does not exceed this are treated as flat.
pub const FLAT_EPSILON: f64 = 1e-8;
pub const SIGMA_MIN: f64 = 0.25;
/// Upper sigma bound, as a multiple of the kernel side.
pub const SIGMA_MAX_PER_SIDE: f64 = 8.0;

pub const MAX_ITERATIONS: usize = 200;
pub const STEP_TOLERANCE: f64 = 1e-10;
pub const RELATIVE_DECREASE_TOLERANCE: f64 = 1e-12;

const SPECTRAL_STARTS: usize = 3;
const FALLBACK_MAGNITUDE: f64 = FRAC_PI_2;
const FALLBACK_ORIENTATIONS: [f64; 4] = [0.0, FRAC_PI_4, FRAC_PI_2, 3.0 * FRAC_PI_4];

const INITIAL_DAMPING: f64 = 1e-3;
const MIN_DAMPING: f64 = 1e-15;
const MAX_DAMPING: f64 = 1e16;

pub fn sigma_bounds(k: usize) -> (f64, f64) {
    (SIGMA_MIN, SIGMA_MAX_PER_SIDE * k as f64)
}

/// A kernel scaled to unit peak magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub kernel: Field2,
    /// Peak magnitude of the raw kernel, or 0 when degenerate.
    pub scale: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitResult {
    pub params: GaborParams,
    /// RMS residual on the normalized kernel scale.
    pub rms: f64,
    pub degenerate: bool,
    pub iterations: usize,
    /// Index of the winning start in [`init_candidates`] order.
    pub init_rank: usize,
    /// Peak magnitude the kernel was divided by (0 when degenerate).
    pub scale: f64,
}

pub fn normalize_kernel(raw: &Field2) -> Result<Normalized> {
    raw.side()?;
    let peak = raw.max_abs();
    if peak > FLAT_EPSILON {
        let inv = 1.0 / peak;
        Ok(Normalized {
            kernel: raw.scaled(inv),
            scale: peak,
            degenerate: false,
        })
    } else {
        Ok(Normalized {
            kernel: raw.clone(),
            scale: 0.0,
            degenerate: true,
        })
    }
}

/// `sqrt(mean((kernel - model)^2))` for a square kernel.
pub fn objective_rms(kernel: &Field2, params: &GaborParams) -> Result<f64> {
    let k = kernel.side()?;
    let model = gabor_kernel(k, params)?;
    Ok(rms_between(kernel.values(), model.values()))
}

fn rms_between(a: &[f64], b: &[f64]) -> f64 {
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    libm::sqrt(ss / a.len() as f64)
}

/// Fourier coefficient `sum f(x) exp(-i u . x)` over centered coordinates.
fn centered_coefficient(kernel: &Field2, u: Freq2) -> Complex64 {
    let k = kernel.width();
    let coords = grid_coords(k).expect("square kernel with positive side");
    coords
        .iter()
        .zip(kernel.values())
        .map(|((x1, x2), &f)| {
            let (s, c) = libm::sincos(u.dot(x1, x2));
            Complex64::new(f * c, -f * s)
        })
        .sum()
}

/// Start whose amplitude and phase come from the kernel's Fourier coefficient at `u`.
fn projected_start(kernel: &Field2, u: Freq2, sigma: f64) -> GaborParams {
    let k = kernel.width();
    let window = gaussian_window(&grid_coords(k).expect("positive side"), sigma, 1.0).expect("sigma within bounds");
    let mass: f64 = window.values().iter().sum();
    let coeff = centered_coefficient(kernel, u);
    // A cosine splits its energy between +u and -u except at DC.
    let factor = if u.u1 == 0.0 && u.u2 == 0.0 { 1.0 } else { 2.0 };
    let amplitude = factor * coeff.norm() / mass;
    let phase = if coeff.norm() > 0.0 { coeff.arg() } else { 0.0 };
    GaborParams::new(amplitude, phase, u, sigma)
}

/// Ordered starting points: the three strongest spectral bins of the
/// `4k`-padded MTF in the upper half-plane, a DC start, then four fixed
/// orientations at `|u| = pi/2`.
pub fn init_candidates(kernel: &Field2) -> Result<Vec<GaborParams>> {
    let k = kernel.side()?;
    let (lo, hi) = sigma_bounds(k);
    let sigma0 = (k as f64 / 2.0).clamp(lo, hi);
    let n = 4 * k;
    let spectrum = mtf(kernel, n)?;

    let signed = |m: usize| -> i64 {
        if 2 * m <= n {
            m as i64
        } else {
            m as i64 - n as i64
        }
    };
    let mut bins: Vec<(f64, i64, i64)> = Vec::new();
    for m1 in 0..n {
        for m2 in 0..n {
            let (s1, s2) = (signed(m1), signed(m2));
            if s2 > 0 || (s2 == 0 && s1 >= 0) {
                bins.push((spectrum.at(m1, m2).norm(), s1, s2));
            }
        }
    }
    // Stable: equal magnitudes keep enumeration order.
    bins.sort_by(|a, b| b.0.total_cmp(&a.0));

    let step = TAU / n as f64;
    let mut starts: Vec<GaborParams> = bins
        .iter()
        .take(SPECTRAL_STARTS)
        .map(|&(_, s1, s2)| {
            let u = Freq2::new(s1 as f64 * step, s2 as f64 * step);
            projected_start(kernel, u, sigma0)
        })
        .collect();
    starts.push(projected_start(kernel, Freq2::ZERO, sigma0));
    for angle in FALLBACK_ORIENTATIONS {
        let (s, c) = libm::sincos(angle);
        let u = Freq2::new(FALLBACK_MAGNITUDE * c, FALLBACK_MAGNITUDE * s);
        starts.push(projected_start(kernel, u, sigma0));
    }
    Ok(starts)
}

type Mat5 = SMatrix<f64, N_PARAMS, N_PARAMS>;
type Vec5 = SVector<f64, N_PARAMS>;

struct Evaluation {
    cost: f64,
    jtj: Mat5,
    gradient: Vec5,
}

fn evaluate(data: &[f64], k: usize, p: &GaborParams) -> Result<Evaluation> {
    let (model, jac) = gabor_jacobian(k, p)?;
    let mut cost = 0.0;
    let mut jtj = Mat5::zeros();
    let mut gradient = Vec5::zeros();
    for ((m, d), row) in model.iter().zip(data).zip(&jac) {
        let r = m - d;
        cost += r * r;
        for i in 0..N_PARAMS {
            gradient[i] += row[i] * r;
            for j in 0..=i {
                jtj[(i, j)] += row[i] * row[j];
            }
        }
    }
    for i in 0..N_PARAMS {
        for j in 0..i {
            jtj[(j, i)] = jtj[(i, j)];
        }
    }
    if !cost.is_finite() {
        return Err(Error::NonFinite("objective"));
    }
    Ok(Evaluation { cost, jtj, gradient })
}

fn cost_at(data: &[f64], k: usize, p: &GaborParams) -> Result<f64> {
    let model = gabor_kernel(k, p)?;
    let cost: f64 = model.values().iter().zip(data).map(|(m, d)| (m - d) * (m - d)).sum();
    if cost.is_finite() {
        Ok(cost)
    } else {
        Err(Error::NonFinite("objective"))
    }
}

/// Levenberg-Marquardt descent from `start`. Returns the refined parameters
/// and the number of accepted steps. The objective never increases; sigma
/// stays inside [`sigma_bounds`].
pub fn refine(kernel: &Field2, start: &GaborParams) -> Result<(GaborParams, usize)> {
    let k = kernel.side()?;
    start.validate()?;
    let (lo, hi) = sigma_bounds(k);
    let data = kernel.values();

    let mut p = start.to_array();
    p[4] = p[4].clamp(lo, hi);
    let mut current = evaluate(data, k, &GaborParams::from_array(p))?;
    let mut damping = INITIAL_DAMPING;
    let mut accepted = 0;

    'outer: while accepted < MAX_ITERATIONS {
        if current.cost == 0.0 {
            break;
        }
        // Freeze sigma when it sits on a bound and descent points outward.
        let mut free = [true; N_PARAMS];
        if (p[4] <= lo && current.gradient[4] > 0.0) || (p[4] >= hi && current.gradient[4] < 0.0) {
            free[4] = false;
        }
        let max_diag = (0..N_PARAMS).fold(0.0f64, |m, i| m.max(current.jtj[(i, i)]));
        let floor = (max_diag * 1e-12).max(f64::MIN_POSITIVE);

        loop {
            let mut system = current.jtj;
            let mut rhs = -current.gradient;
            for i in 0..N_PARAMS {
                if free[i] {
                    system[(i, i)] += damping * current.jtj[(i, i)].max(floor);
                } else {
                    for j in 0..N_PARAMS {
                        system[(i, j)] = 0.0;
                        system[(j, i)] = 0.0;
                    }
                    system[(i, i)] = 1.0;
                    rhs[i] = 0.0;
                }
            }
            let Some(chol) = system.cholesky() else {
                damping *= 10.0;
                if damping > MAX_DAMPING {
                    break 'outer;
                }
                continue;
            };
            let delta = chol.solve(&rhs);

            let mut trial = p;
            for i in 0..N_PARAMS {
                trial[i] += delta[i];
            }
            trial[4] = trial[4].clamp(lo, hi);
            let step_norm = libm::sqrt(
                (0..N_PARAMS)
                    .map(|i| {
                        let d = trial[i] - p[i];
                        d * d
                    })
                    .sum(),
            );
            if !step_norm.is_finite() {
                return Err(Error::NonFinite("step"));
            }
            if step_norm < STEP_TOLERANCE {
                break 'outer;
            }

            let trial_cost = cost_at(data, k, &GaborParams::from_array(trial))?;
            if trial_cost < current.cost {
                let relative = (current.cost - trial_cost) / current.cost;
                p = trial;
                current = evaluate(data, k, &GaborParams::from_array(p))?;
                accepted += 1;
                damping = (damping / 10.0).max(MIN_DAMPING);
                if relative < RELATIVE_DECREASE_TOLERANCE {
                    break 'outer;
                }
                break;
            }
            damping *= 10.0;
            if damping > MAX_DAMPING {
                break 'outer;
            }
        }
    }
    Ok((GaborParams::from_array(p), accepted))
}

/// Canonical representative of the parameters' equivalence class on a
/// side-`k` grid: nonnegative amplitude, `u_c` in the closed upper
/// half-plane with components in `(-pi, pi]`, phase in `(-pi, pi]`.
///
/// Wrapping a frequency component by `2 pi` is exact on integer grids; on
/// half-integer (even side) grids it flips the sign, which the phase absorbs.
pub fn canonicalize(params: &GaborParams, k: usize) -> GaborParams {
    let mut p = *params;
    if p.amplitude < 0.0 {
        p.amplitude = -p.amplitude;
        p.phase += PI;
    }
    let half_integer = k % 2 == 0;
    let wrap = |p: &mut GaborParams| {
        let w1 = wrap_angle(p.u_c.u1);
        let w2 = wrap_angle(p.u_c.u2);
        if half_integer {
            let turns = libm::round((p.u_c.u1 - w1) / TAU) + libm::round((p.u_c.u2 - w2) / TAU);
            p.phase += PI * turns;
        }
        p.u_c = Freq2::new(w1, w2);
    };
    wrap(&mut p);
    if !p.u_c.in_upper_half_plane() {
        p = p.sign_flipped();
    }
    wrap(&mut p);
    p.phase = wrap_angle(p.phase);
    p
}

fn degenerate_result(kernel: &Field2, k: usize, scale: f64) -> Result<FitResult> {
    let (lo, hi) = sigma_bounds(k);
    let params = GaborParams::new(0.0, 0.0, Freq2::ZERO, (k as f64 / 2.0).clamp(lo, hi));
    Ok(FitResult {
        params,
        rms: objective_rms(kernel, &params)?,
        degenerate: true,
        iterations: 0,
        init_rank: 0,
        scale,
    })
}

/// Fits the model to one raw kernel slice. Deterministic in its input.
pub fn fit_kernel(raw: &Field2) -> Result<FitResult> {
    let k = raw.side()?;
    let normalized = normalize_kernel(raw)?;
    if normalized.degenerate || k < 2 {
        return degenerate_result(&normalized.kernel, k, normalized.scale);
    }
    let kernel = &normalized.kernel;
    let data = kernel.values();

    let mut best: Option<(f64, GaborParams, usize, usize)> = None;
    let mut last_error = None;
    for (rank, start) in init_candidates(kernel)?.iter().enumerate() {
        match refine(kernel, start) {
            Ok((params, iterations)) => {
                let cost = cost_at(data, k, &params)?;
                if best.as_ref().is_none_or(|b| cost < b.0) {
                    best = Some((cost, params, iterations, rank));
                }
            }
            Err(e) => last_error = Some(e),
        }
    }
    let Some((_, params, iterations, init_rank)) = best else {
        return Err(last_error.unwrap_or(Error::NonFinite("objective")));
    };
    let params = canonicalize(&params, k);
    Ok(FitResult {
        params,
        rms: objective_rms(kernel, &params)?,
        degenerate: false,
        iterations,
        init_rank,
        scale: normalized.scale,
    })
}
