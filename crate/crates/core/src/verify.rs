//! Randomized checks of the two exact discrete identities: complex
//! exponentials are eigenfunctions of circular convolution, and modulating a
//! window by a bin-aligned exponential shifts its spectrum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::field::{grid_coords, ComplexField2, Field2, Freq2};
use crate::gabor::gaussian_window;
use crate::spectral::{circular_convolve2_complex, eigenfunction_residual_with, mtf, wft_shift_residual};

/// Largest residual seen by a suite, with the case that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOutcome {
    pub n: usize,
    pub cases: usize,
    pub max_residual: f64,
    /// `(case index, m1, m2)` of the worst residual.
    pub worst: (usize, usize, usize),
}

impl SuiteOutcome {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_residual < tolerance
    }
}

/// A random kernel with side in `1..=min(5, n)` and values in `[-1, 1]`.
pub fn random_kernel<R: Rng>(rng: &mut R, n: usize) -> Field2 {
    let k = rng.random_range(1..=n.min(5));
    Field2::from_fn(k, k, |_, _| rng.random_range(-1.0..=1.0))
}

/// Eigenfunction residual over every DFT frequency of an `n x n` grid for
/// `kernels` random kernels, using the supplied convolution.
pub fn eigenfunction_suite_with<C>(n: usize, kernels: usize, seed: u64, convolve: C) -> Result<SuiteOutcome>
where
    C: Fn(&ComplexField2, &ComplexField2) -> Result<ComplexField2>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SuiteOutcome {
        n,
        cases: 0,
        max_residual: 0.0,
        worst: (0, 0, 0),
    };
    for case in 0..kernels {
        let kernel = random_kernel(&mut rng, n);
        let spectrum = mtf(&kernel, n)?;
        for m1 in 0..n {
            for m2 in 0..n {
                let r = eigenfunction_residual_with(&kernel, &spectrum, (m1, m2), n, &convolve)?;
                out.cases += 1;
                if !(r <= out.max_residual) {
                    out.max_residual = r;
                    out.worst = (case, m1, m2);
                }
            }
        }
    }
    Ok(out)
}

pub fn eigenfunction_suite(n: usize, kernels: usize, seed: u64) -> Result<SuiteOutcome> {
    eigenfunction_suite_with(n, kernels, seed, circular_convolve2_complex)
}

/// Shift residual for `cases` random Gaussian windows (side `1..=min(11, n)`,
/// sigma in `[0.5, 4]`) at random bin-aligned center frequencies.
pub fn wft_shift_suite(n: usize, cases: usize, seed: u64) -> Result<SuiteOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SuiteOutcome {
        n,
        cases: 0,
        max_residual: 0.0,
        worst: (0, 0, 0),
    };
    for case in 0..cases {
        let k = rng.random_range(1..=n.min(11));
        let sigma = rng.random_range(0.5..=4.0);
        let window = gaussian_window(&grid_coords(k)?, sigma, 1.0)?;
        let m1 = rng.random_range(0..n);
        let m2 = rng.random_range(0..n);
        let r = wft_shift_residual(&window, Freq2::from_bin(m1 as i64, m2 as i64, n), n)?;
        out.cases += 1;
        if !(r <= out.max_residual) {
            out.max_residual = r;
            out.worst = (case, m1, m2);
        }
    }
    Ok(out)
}
