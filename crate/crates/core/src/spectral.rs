//! Discrete Fourier machinery on periodic `N x N` grids.
//!
//! The forward transform is unnormalized,
//! `F(m1, m2) = sum f(n1, n2) exp(-i 2 pi (m1 n1 / N1 + m2 n2 / N2))`,
//! and the inverse carries the `1 / (N1 N2)` factor. Kernels are placed on a
//! grid with their center sample at the origin (wrapping negative offsets),
//! so a kernel's MTF phase refers to its own centered coordinates.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{grid_coords, ComplexField2, Field2, Freq2};
use crate::gabor::gaussian_window;

/// Bin-alignment tolerance, in bins.
pub const BIN_TOLERANCE: f64 = 1e-9;

/// `exp(sign * i 2 pi j / n)` for `j in 0..n`.
fn twiddles(n: usize, sign: f64) -> Vec<Complex64> {
    (0..n)
        .map(|j| {
            let (s, c) = libm::sincos(TAU * j as f64 / n as f64);
            Complex64::new(c, sign * s)
        })
        .collect()
}

/// One direct DFT along rows then columns. `sign = -1` forward, `+1` inverse.
fn transform(field: &ComplexField2, sign: f64) -> ComplexField2 {
    let (h, w) = field.dims();
    let tw_row = twiddles(h, sign);
    let tw_col = twiddles(w, sign);

    // Along the column (fast) axis.
    let mut tmp = ComplexField2::zeros(h, w);
    {
        let out = tmp.values_mut();
        for r in 0..h {
            for m in 0..w {
                let mut acc = Complex64::new(0.0, 0.0);
                for n in 0..w {
                    acc += field.at(r, n) * tw_col[(m * n) % w];
                }
                out[r * w + m] = acc;
            }
        }
    }
    // Along the row (slow) axis.
    let mut result = ComplexField2::zeros(h, w);
    {
        let out = result.values_mut();
        for m in 0..h {
            for c in 0..w {
                let mut acc = Complex64::new(0.0, 0.0);
                for n in 0..h {
                    acc += tmp.at(n, c) * tw_row[(m * n) % h];
                }
                out[m * w + c] = acc;
            }
        }
    }
    result
}

/// Forward unnormalized 2D DFT.
pub fn dft2(field: &ComplexField2) -> ComplexField2 {
    transform(field, -1.0)
}

/// Inverse 2D DFT, scaled by `1 / (height * width)`.
pub fn idft2(spectrum: &ComplexField2) -> ComplexField2 {
    let mut out = transform(spectrum, 1.0);
    let scale = 1.0 / (spectrum.height() * spectrum.width()) as f64;
    for v in out.values_mut() {
        *v *= scale;
    }
    out
}

/// Grid index of kernel sample `j` of a side-`k` kernel on a length-`n` axis.
#[inline]
fn placement(j: usize, k: usize, n: usize) -> usize {
    (j as i64 - (k / 2) as i64).rem_euclid(n as i64) as usize
}

/// Signed integer offset of kernel sample `j` from the placement origin.
/// Equals the centered coordinate for odd `k`; for even `k` it is the
/// centered coordinate plus one half.
#[inline]
fn placement_offset(j: usize, k: usize) -> f64 {
    j as f64 - (k / 2) as f64
}

/// Zero-pads a complex kernel onto an `n x n` grid with its center sample at the origin.
pub fn embed_kernel_complex(kernel: &ComplexField2, n: usize) -> Result<ComplexField2> {
    let (h, w) = kernel.dims();
    if n == 0 {
        return Err(Error::InvalidSize("grid size must be positive"));
    }
    if h > n || w > n {
        return Err(Error::InvalidSize("kernel larger than grid"));
    }
    let mut out = ComplexField2::zeros(n, n);
    let dst = out.values_mut();
    for r in 0..h {
        for c in 0..w {
            dst[placement(r, h, n) * n + placement(c, w, n)] = kernel.at(r, c);
        }
    }
    Ok(out)
}

/// Real counterpart of [`embed_kernel_complex`].
pub fn embed_kernel(kernel: &Field2, n: usize) -> Result<Field2> {
    Ok(embed_kernel_complex(&kernel.to_complex(), n)?.re())
}

/// Circular convolution `out(n) = sum_a f(n - a mod N) h(a)` of equally sized complex fields.
///
/// Only nonzero taps of `h` are visited, so a zero-padded small kernel costs
/// `O(N^2 k^2)` rather than `O(N^4)`.
pub fn circular_convolve2_complex(f: &ComplexField2, h: &ComplexField2) -> Result<ComplexField2> {
    if f.dims() != h.dims() {
        return Err(Error::ShapeMismatch {
            expected: f.dims(),
            got: h.dims(),
        });
    }
    let (rows, cols) = f.dims();
    let taps: Vec<(usize, usize, Complex64)> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .filter_map(|(r, c)| {
            let v = h.at(r, c);
            (v.re != 0.0 || v.im != 0.0).then_some((r, c, v))
        })
        .collect();
    let mut out = ComplexField2::zeros(rows, cols);
    let dst = out.values_mut();
    for n1 in 0..rows {
        for n2 in 0..cols {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(a1, a2, hv) in &taps {
                let s1 = (n1 + rows - a1) % rows;
                let s2 = (n2 + cols - a2) % cols;
                acc += f.at(s1, s2) * hv;
            }
            dst[n1 * cols + n2] = acc;
        }
    }
    Ok(out)
}

/// Circular convolution of equally sized real fields.
pub fn circular_convolve2(f: &Field2, h: &Field2) -> Result<Field2> {
    Ok(circular_convolve2_complex(&f.to_complex(), &h.to_complex())?.re())
}

/// Frequency response of a real kernel on an `n x n` grid.
pub fn mtf(kernel: &Field2, n: usize) -> Result<ComplexField2> {
    mtf_complex(&kernel.to_complex(), n)
}

/// Frequency response of a complex kernel on an `n x n` grid.
pub fn mtf_complex(kernel: &ComplexField2, n: usize) -> Result<ComplexField2> {
    Ok(dft2(&embed_kernel_complex(kernel, n)?))
}

/// `exp(i 2 pi (m1 n1 + m2 n2) / n)` on an `n x n` grid.
pub fn plane_wave(m1: usize, m2: usize, n: usize) -> ComplexField2 {
    let tw = twiddles(n, 1.0);
    ComplexField2::from_fn(n, n, |n1, n2| tw[(m1 * n1 + m2 * n2) % n])
}

/// Max deviation of `kernel * e_m` from `lambda(m) e_m` for the plane wave at bin `m`.
pub fn eigenfunction_residual(kernel: &Field2, freq_index: (usize, usize), n: usize) -> Result<f64> {
    let spectrum = mtf(kernel, n)?;
    eigenfunction_residual_with(kernel, &spectrum, freq_index, n, circular_convolve2_complex)
}

/// [`eigenfunction_residual`] with a precomputed MTF and a caller-supplied convolution.
pub fn eigenfunction_residual_with<C>(
    kernel: &Field2,
    spectrum: &ComplexField2,
    freq_index: (usize, usize),
    n: usize,
    convolve: C,
) -> Result<f64>
where
    C: Fn(&ComplexField2, &ComplexField2) -> Result<ComplexField2>,
{
    let (m1, m2) = freq_index;
    if m1 >= n || m2 >= n {
        return Err(Error::IndexOutOfRange(m1, m2, n));
    }
    if spectrum.dims() != (n, n) {
        return Err(Error::ShapeMismatch {
            expected: (n, n),
            got: spectrum.dims(),
        });
    }
    let wave = plane_wave(m1, m2, n);
    let h = embed_kernel_complex(&kernel.to_complex(), n)?;
    let response = convolve(&wave, &h)?;
    let lambda = spectrum.at(m1, m2);
    let expected = ComplexField2::from_fn(n, n, |r, c| lambda * wave.at(r, c));
    response.max_abs_diff(&expected)
}

/// Complex pointspread `w(x) exp(i u_c . x)` with a unit Gaussian window.
pub fn wft_kernel(k: usize, window_sigma: f64, u_c: Freq2) -> Result<ComplexField2> {
    let coords = grid_coords(k)?;
    let window = gaussian_window(&coords, window_sigma, 1.0)?;
    let values = coords
        .iter()
        .zip(window.values())
        .map(|((x1, x2), &w)| {
            let (s, c) = libm::sincos(u_c.dot(x1, x2));
            Complex64::new(w * c, w * s)
        })
        .collect();
    ComplexField2::new(k, k, values)
}

/// Max deviation between the MTF of the modulated window `w(x) exp(i u_c . x)`
/// and the window's own MTF circularly shifted to `u_c`.
///
/// The modulation is referenced to the grid placement of the window, which
/// coincides with the centered coordinates for odd sides.
pub fn wft_shift_residual(window: &Field2, u_c: Freq2, n: usize) -> Result<f64> {
    let (b1, b2) = u_c
        .bin(n, BIN_TOLERANCE)
        .ok_or(Error::NotBinAligned(u_c.u1, u_c.u2, n))?;
    let (h, w) = window.dims();
    if h > n || w > n {
        return Err(Error::InvalidSize("kernel larger than grid"));
    }
    let tw = twiddles(n, 1.0);
    let modulated = ComplexField2::from_fn(h, w, |r, c| {
        let p1 = placement_offset(r, h) as i64;
        let p2 = placement_offset(c, w) as i64;
        let phase = (b1 as i64 * p1 + b2 as i64 * p2).rem_euclid(n as i64) as usize;
        tw[phase] * window.at(r, c)
    });
    let shifted_source = mtf(window, n)?;
    let lhs = mtf_complex(&modulated, n)?;
    let rhs = ComplexField2::from_fn(n, n, |m1, m2| shifted_source.at((m1 + n - b1) % n, (m2 + n - b2) % n));
    lhs.max_abs_diff(&rhs)
}
