//! Sampled 2D fields, centered kernel coordinates and frequency vectors.
//!
//! Axis 1 is the row (slow) axis and axis 2 the column (fast) axis. A
//! coordinate pair `(x1, x2)` and a frequency `(u1, u2)` always follow that
//! order, so `u1` oscillates down the rows and `u2` across the columns.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Real samples on a `height x width` grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2 {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl Field2 {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidSize("field dimensions must be positive"));
        }
        if values.len() != height * width {
            return Err(Error::InvalidSize("value count does not match dimensions"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field value"));
        }
        Ok(Self { height, width, values })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "field dimensions must be positive");
        Self {
            height,
            width,
            values: alloc::vec![0.0; height * width],
        }
    }

    /// Builds a field by evaluating `f(row, col)` at every sample.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "field dimensions must be positive");
        let mut values = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self { height, width, values }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn is_square(&self) -> bool {
        self.height == self.width
    }

    /// Side length of a square field.
    pub fn side(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.height)
        } else {
            Err(Error::ShapeMismatch {
                expected: (self.height, self.height),
                got: self.dims(),
            })
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Point reflection `f(x) -> f(-x)` about the field midpoint.
    pub fn point_reflected(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        Self {
            height: self.height,
            width: self.width,
            values,
        }
    }

    pub fn to_complex(&self) -> ComplexField2 {
        ComplexField2 {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

/// Complex samples on a `height x width` grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField2 {
    height: usize,
    width: usize,
    values: Vec<Complex64>,
}

impl ComplexField2 {
    pub fn new(height: usize, width: usize, values: Vec<Complex64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidSize("field dimensions must be positive"));
        }
        if values.len() != height * width {
            return Err(Error::InvalidSize("value count does not match dimensions"));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite("complex field value"));
        }
        Ok(Self { height, width, values })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "field dimensions must be positive");
        Self {
            height,
            width,
            values: alloc::vec![Complex64::new(0.0, 0.0); height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        assert!(height > 0 && width > 0, "field dimensions must be positive");
        let mut values = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                values.push(f(r, c));
            }
        }
        Self { height, width, values }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.values[row * self.width + col]
    }

    pub fn re(&self) -> Field2 {
        Field2 {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|v| v.re).collect(),
        }
    }

    pub fn im(&self) -> Field2 {
        Field2 {
            height: self.height,
            width: self.width,
            values: self.values.iter().map(|v| v.im).collect(),
        }
    }

    /// Largest pointwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.dims() != other.dims() {
            return Err(Error::ShapeMismatch {
                expected: self.dims(),
                got: other.dims(),
            });
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm())))
    }
}

/// Centered sample coordinates of a `k x k` kernel.
///
/// Odd sides give integer coordinates in `[-(k-1)/2, (k-1)/2]`, even sides
/// half-integers symmetric about zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Coords2 {
    axis: Vec<f64>,
}

impl Coords2 {
    pub fn side(&self) -> usize {
        self.axis.len()
    }

    /// Coordinate values along one axis; identical for both axes.
    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn len(&self) -> usize {
        self.axis.len() * self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    /// `(x1, x2)` pairs in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.axis
            .iter()
            .flat_map(move |&x1| self.axis.iter().map(move |&x2| (x1, x2)))
    }
}

pub fn grid_coords(k: usize) -> Result<Coords2> {
    if k == 0 {
        return Err(Error::InvalidSize("kernel side must be at least 1"));
    }
    let mid = (k as f64 - 1.0) / 2.0;
    Ok(Coords2 {
        axis: (0..k).map(|j| j as f64 - mid).collect(),
    })
}

/// A spatial frequency in radians per sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Freq2 {
    pub u1: f64,
    pub u2: f64,
}

impl Freq2 {
    pub const ZERO: Freq2 = Freq2 { u1: 0.0, u2: 0.0 };

    pub const fn new(u1: f64, u2: f64) -> Self {
        Self { u1, u2 }
    }

    /// Frequency of DFT bin `(m1, m2)` on an `n x n` grid, canonicalized.
    pub fn from_bin(m1: i64, m2: i64, n: usize) -> Self {
        let step = TAU / n as f64;
        Self::new(m1 as f64 * step, m2 as f64 * step).canonical()
    }

    /// The bin indices in `[0, n)` this frequency sits on, if it is aligned
    /// to within `tol` bins.
    pub fn bin(&self, n: usize, tol: f64) -> Option<(usize, usize)> {
        let scale = n as f64 / TAU;
        let to_bin = |u: f64| {
            let b = u * scale;
            let r = libm::round(b);
            if (b - r).abs() > tol {
                None
            } else {
                Some((r as i64).rem_euclid(n as i64) as usize)
            }
        };
        Some((to_bin(self.u1)?, to_bin(self.u2)?))
    }

    pub fn norm(&self) -> f64 {
        libm::hypot(self.u1, self.u2)
    }

    pub fn dot(&self, x1: f64, x2: f64) -> f64 {
        self.u1 * x1 + self.u2 * x2
    }

    /// Each component wrapped into `(-pi, pi]`.
    pub fn canonical(&self) -> Self {
        Self::new(wrap_angle(self.u1), wrap_angle(self.u2))
    }

    /// True when the frequency lies in the closed upper half-plane
    /// (`u2 > 0`, or `u2 == 0` and `u1 >= 0`).
    pub fn in_upper_half_plane(&self) -> bool {
        self.u2 > 0.0 || (self.u2 == 0.0 && self.u1 >= 0.0)
    }
}

impl core::ops::Neg for Freq2 {
    type Output = Freq2;

    fn neg(self) -> Freq2 {
        Freq2::new(-self.u1, -self.u2)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x % TAU;
    if y > PI {
        y -= TAU;
    } else if y <= -PI {
        y += TAU;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_odd_even_and_degenerate() {
        assert_eq!(grid_coords(3).unwrap().axis(), &[-1.0, 0.0, 1.0]);
        assert_eq!(grid_coords(1).unwrap().axis(), &[0.0]);
        assert_eq!(grid_coords(2).unwrap().axis(), &[-0.5, 0.5]);
        assert_eq!(
            grid_coords(0),
            Err(Error::InvalidSize("kernel side must be at least 1"))
        );
    }

    #[test]
    fn grid_is_centered_and_row_major() {
        for k in 1..12 {
            let c = grid_coords(k).unwrap();
            let (s1, s2) = c.iter().fold((0.0, 0.0), |(a, b), (x1, x2)| (a + x1, b + x2));
            assert_eq!(s1, 0.0);
            assert_eq!(s2, 0.0);
            assert_eq!(c.len(), k * k);
        }
        let pairs: Vec<_> = grid_coords(2).unwrap().iter().collect();
        assert_eq!(pairs, [(-0.5, -0.5), (-0.5, 0.5), (0.5, -0.5), (0.5, 0.5)]);
    }

    #[test]
    fn field_rejects_bad_input() {
        assert!(Field2::new(2, 2, alloc::vec![0.0; 3]).is_err());
        assert!(Field2::new(0, 2, alloc::vec![]).is_err());
        assert_eq!(
            Field2::new(1, 2, alloc::vec![0.0, f64::NAN]),
            Err(Error::NonFinite("field value"))
        );
        assert!(Field2::new(2, 3, alloc::vec![0.0; 6]).unwrap().side().is_err());
    }

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap_angle(0.25), 0.25);
    }

    #[test]
    fn bins_round_trip() {
        let f = Freq2::from_bin(8, -3, 32);
        assert_eq!(f.bin(32, 1e-9), Some((8, 29)));
        assert_eq!(Freq2::new(0.1, 0.0).bin(32, 1e-9), None);
    }
}
