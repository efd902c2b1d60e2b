//! Uniform periodic grid, spectral transform and the initial two-component state.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::params::ModelParams;

pub const MIN_POINTS: usize = 1 << 8;
pub const DESK_POINTS: usize = 1 << 14;
pub const PAPER_POINTS: usize = 1 << 17;
pub const DEFAULT_X_MIN: f64 = 0.1;
pub const DEFAULT_X_MAX: f64 = 10.5;

/// Fraction of the domain on each side that counts as "near the edge".
pub const EDGE_FRACTION: f64 = 0.05;

/// Periodic grid on `[x_min, x_max)` in units of x_f.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n_points: usize,
    x_min: f64,
    x_max: f64,
    dx: f64,
    x: Vec<f64>,
    /// Wavenumbers in 1/x_f, in the FFT output order (0, 1, .., N/2−1, −N/2, .., −1)·2π/L.
    k: Vec<f64>,
}

impl Grid {
    pub fn new(n_points: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if !n_points.is_power_of_two() || n_points < MIN_POINTS {
            return Err(Error::Grid(format!(
                "n_points must be a power of two >= {MIN_POINTS}, got {n_points}"
            )));
        }
        if !(x_min > 0.0 && x_max > x_min && x_max.is_finite()) {
            return Err(Error::Grid(format!(
                "need 0 < x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        let length = x_max - x_min;
        let dx = length / n_points as f64;
        let x = (0..n_points).map(|j| x_min + j as f64 * dx).collect();
        let half = n_points / 2;
        let k = (0..n_points)
            .map(|j| {
                let m = if j < half {
                    j as i64
                } else {
                    j as i64 - n_points as i64
                };
                2.0 * PI * m as f64 / length
            })
            .collect();
        Ok(Self {
            n_points,
            x_min,
            x_max,
            dx,
            x,
            k,
        })
    }

    /// The production grid: 2^17 points on [0.1, 10.5].
    pub fn paper_scale() -> Self {
        Self::new(PAPER_POINTS, DEFAULT_X_MIN, DEFAULT_X_MAX).expect("valid constants")
    }

    pub fn desk_scale() -> Self {
        Self::new(DESK_POINTS, DEFAULT_X_MIN, DEFAULT_X_MAX).expect("valid constants")
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn k(&self) -> &[f64] {
        &self.k
    }

    /// Shifted coordinate y = (x − x_f)/x_f at grid point `j`.
    pub fn y(&self, j: usize) -> f64 {
        self.x[j] - 1.0
    }

    /// Number of points in each edge zone.
    pub fn edge_points(&self) -> usize {
        ((EDGE_FRACTION * self.n_points as f64).ceil() as usize).max(1)
    }

    /// Smooth absorbing mask: 1 in the interior, cos^(1/8) ramp to 0 across each edge zone.
    pub fn absorber_mask(&self) -> Vec<f64> {
        let w = self.edge_points();
        (0..self.n_points)
            .map(|j| {
                let d = j.min(self.n_points - 1 - j);
                if d >= w {
                    1.0
                } else {
                    let s = (w - d) as f64 / w as f64;
                    (0.5 * PI * s).cos().max(0.0).powf(0.125)
                }
            })
            .collect()
    }
}

/// Two-component field (Ψ_R, Ψ_G) sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    pub psi_r: Vec<Complex64>,
    pub psi_g: Vec<Complex64>,
}

impl SpinorField {
    pub fn zeros(n: usize) -> Self {
        Self {
            psi_r: vec![Complex64::new(0.0, 0.0); n],
            psi_g: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn len(&self) -> usize {
        self.psi_r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi_r.is_empty()
    }

    /// Discrete ∫(|Ψ_R|² + |Ψ_G|²)dx.
    pub fn norm(&self, grid: &Grid) -> f64 {
        let s: f64 = self
            .psi_r
            .iter()
            .zip(&self.psi_g)
            .map(|(r, g)| r.norm_sqr() + g.norm_sqr())
            .sum();
        s * grid.dx()
    }

    /// L² distance to another field on the same grid.
    pub fn distance(&self, other: &SpinorField, grid: &Grid) -> f64 {
        let s: f64 = self
            .psi_r
            .iter()
            .zip(&other.psi_r)
            .chain(self.psi_g.iter().zip(&other.psi_g))
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        (s * grid.dx()).sqrt()
    }

    /// Norm found in the edge zones of the grid.
    pub fn boundary_leak(&self, grid: &Grid) -> f64 {
        let w = grid.edge_points();
        let n = self.len();
        let dens = |j: usize| self.psi_r[j].norm_sqr() + self.psi_g[j].norm_sqr();
        let s: f64 = (0..w).chain(n - w..n).map(dens).sum();
        s * grid.dx()
    }

    /// CSV export: `x, re_psi_r, im_psi_r, re_psi_g, im_psi_g`.
    pub fn write_csv<W: Write>(&self, grid: &Grid, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,re_psi_r,im_psi_r,re_psi_g,im_psi_g")?;
        for ((x, r), g) in grid.x().iter().zip(&self.psi_r).zip(&self.psi_g) {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                x, r.re, r.im, g.re, g.im
            )?;
        }
        Ok(())
    }
}

/// Gaussian ground-state packet at x_f with σ resolved by the grid, discretely normalised.
pub fn initial_state(grid: &Grid, params: &ModelParams) -> Result<SpinorField> {
    let sigma = params.sigma_ratio;
    if !(grid.dx() < sigma / 4.0) {
        return Err(Error::InitialState(format!(
            "width sigma = {sigma} is not resolved: dx = {:.4e} must be < sigma/4 = {:.4e}",
            grid.dx(),
            sigma / 4.0
        )));
    }
    // |Ψ_G|² relative to its peak at the two domain ends
    let tail = |x: f64| (-(x - 1.0).powi(2) / (sigma * sigma)).exp();
    for edge in [grid.x_min(), grid.x_max()] {
        let rel = tail(edge);
        if rel >= 1e-12 {
            return Err(Error::InitialState(format!(
                "Gaussian tail at x = {edge} is {rel:.3e} of the peak density (limit 1e-12); widen the domain"
            )));
        }
    }
    let amp = (PI * sigma * sigma).powf(-0.25);
    let mut field = SpinorField::zeros(grid.len());
    for (g, &x) in field.psi_g.iter_mut().zip(grid.x()) {
        *g = Complex64::new(
            amp * (-(x - 1.0).powi(2) / (2.0 * sigma * sigma)).exp(),
            0.0,
        );
    }
    let scale = field.norm(grid).sqrt().recip();
    for g in &mut field.psi_g {
        *g *= scale;
    }
    Ok(field)
}

/// Forward and normalised inverse FFT of a fixed length.
#[derive(Clone)]
pub struct SpectralTransform {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    scale: f64,
}

impl SpectralTransform {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); len],
            scale: 1.0 / n as f64,
        }
    }

    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.forward.process_with_scratch(data, &mut self.scratch);
    }

    /// Inverse transform including the 1/N normalisation.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.inverse_unscaled(data);
        for v in data.iter_mut() {
            *v *= self.scale;
        }
    }

    /// Inverse transform without the 1/N factor.
    pub fn inverse_unscaled(&mut self, data: &mut [Complex64]) {
        self.inverse.process_with_scratch(data, &mut self.scratch);
    }

    /// The 1/N factor omitted by [`SpectralTransform::inverse_unscaled`].
    pub fn scale(&self) -> f64 {
        self.scale
    }
}
