//! Gaussian windows and the real Gabor-like pointspread model
//! `A * g(x; sigma) * cos(u_c . x + phi)` with `g(x; sigma) = exp(-|x|^2 / sigma^2)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{grid_coords, Coords2, Field2, Freq2};

/// Parameters of the oriented bandpass model.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaborParams {
    pub amplitude: f64,
    /// Radians.
    pub phase: f64,
    /// Center frequency, radians per sample.
    pub u_c: Freq2,
    /// Window width in samples. Note the window divides by `sigma^2`, not `2 sigma^2`.
    pub sigma: f64,
}

/// Number of free model parameters, ordered `(A, phi, u1, u2, sigma)`.
pub const N_PARAMS: usize = 5;

impl GaborParams {
    pub const fn new(amplitude: f64, phase: f64, u_c: Freq2, sigma: f64) -> Self {
        Self {
            amplitude,
            phase,
            u_c,
            sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter {
                name: "sigma",
                value: self.sigma,
            });
        }
        for (name, value) in [
            ("amplitude", self.amplitude),
            ("phase", self.phase),
            ("u1", self.u_c.u1),
            ("u2", self.u_c.u2),
        ] {
            if !value.is_finite() {
                return Err(Error::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; N_PARAMS] {
        [self.amplitude, self.phase, self.u_c.u1, self.u_c.u2, self.sigma]
    }

    pub fn from_array(p: [f64; N_PARAMS]) -> Self {
        Self::new(p[0], p[1], Freq2::new(p[2], p[3]), p[4])
    }

    /// The sign-flipped equivalent `(-u_c, -phi)`, which yields the same kernel.
    pub fn sign_flipped(&self) -> Self {
        Self {
            phase: -self.phase,
            u_c: -self.u_c,
            ..*self
        }
    }
}

/// `kappa * exp(-(x1^2 + x2^2) / sigma^2)` at every coordinate.
pub fn gaussian_window(coords: &Coords2, sigma: f64, kappa: f64) -> Result<Field2> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter {
            name: "sigma",
            value: sigma,
        });
    }
    let inv = 1.0 / (sigma * sigma);
    let values = coords
        .iter()
        .map(|(x1, x2)| kappa * libm::exp(-(x1 * x1 + x2 * x2) * inv))
        .collect();
    let k = coords.side();
    Field2::new(k, k, values)
}

/// The `k x k` real pointspread `A * g(x; sigma) * cos(u_c . x + phi)`.
pub fn gabor_kernel(k: usize, params: &GaborParams) -> Result<Field2> {
    params.validate()?;
    let coords = grid_coords(k)?;
    let window = gaussian_window(&coords, params.sigma, 1.0)?;
    let values = coords
        .iter()
        .zip(window.values())
        .map(|((x1, x2), g)| params.amplitude * g * libm::cos(params.u_c.dot(x1, x2) + params.phase))
        .collect();
    Field2::new(k, k, values)
}

/// Model samples and their analytic partial derivatives with respect to
/// `(A, phi, u1, u2, sigma)`, one row per sample in row-major order.
pub fn gabor_jacobian(k: usize, params: &GaborParams) -> Result<(Vec<f64>, Vec<[f64; N_PARAMS]>)> {
    params.validate()?;
    let coords = grid_coords(k)?;
    let GaborParams {
        amplitude: a,
        phase,
        u_c,
        sigma,
    } = *params;
    let inv = 1.0 / (sigma * sigma);
    let mut model = Vec::with_capacity(k * k);
    let mut jac = Vec::with_capacity(k * k);
    for (x1, x2) in coords.iter() {
        let r2 = x1 * x1 + x2 * x2;
        let g = libm::exp(-r2 * inv);
        let theta = u_c.dot(x1, x2) + phase;
        let (s, c) = libm::sincos(theta);
        let m = a * g * c;
        let dtheta = -a * g * s;
        model.push(m);
        jac.push([g * c, dtheta, dtheta * x1, dtheta * x2, m * 2.0 * r2 * inv / sigma]);
    }
    Ok((model, jac))
}
