//! Spectral primitives and oriented-bandpass kernel fitting.
//!
//! Complex exponentials are eigenfunctions of convolution; windowing them
//! gives Gabor-like oriented bandpass filters. This crate provides the
//! discrete machinery to check both facts exactly on periodic grids, and a
//! least-squares fitter that measures how well a learned convolution kernel
//! is captured by the windowed-exponential model.
//!
//! The crate is `no_std` and needs only `alloc`.
#![no_std]
// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod calibration;
pub mod error;
pub mod field;
pub mod fit;
pub mod gabor;
pub mod spectral;
pub mod stats;
pub mod verify;

pub use calibration::{calibration_curve, CalibrationPoint};
pub use error::{Error, Result};
pub use field::{grid_coords, ComplexField2, Coords2, Field2, Freq2};
pub use fit::{fit_kernel, init_candidates, normalize_kernel, objective_rms, refine, FitResult};
pub use gabor::{gabor_kernel, gaussian_window, GaborParams};
pub use spectral::{circular_convolve2, dft2, eigenfunction_residual, idft2, mtf, wft_kernel, wft_shift_residual};
pub use stats::{histogram, layer_summary, percentile, BoxStats, Histogram, LayerSummary};

pub use num_complex::Complex64;
