//! Perturbative solution of the linearised model in k-space.
//!
//! Around x_f the potential is replaced by −νΔy with y = (x − x_f)/x_f. All quantities
//! use internal units (Ω = 1, x_f = 1), so k is the wavenumber conjugate to y and the
//! x_f prefactor of the k-space overlap is 1.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::observables::CoherenceSeries;
use crate::params::ModelParams;

/// Default validity horizon Ωt ≤ 4π of the first-order-in-t expressions.
pub const DEFAULT_HORIZON: f64 = 4.0 * PI;
pub const QUADRATURE_POINTS: usize = 1 << 12;
/// Half-width of the quadrature window in units of 1/σ.
pub const QUADRATURE_HALF_WIDTH: f64 = 8.0;

/// Ψ̃_G(k, 0) for the normalised Gaussian packet of width σ.
pub fn initial_k_amplitude(k: f64, params: &ModelParams) -> f64 {
    let s = params.sigma_ratio;
    (s * s / PI).powf(0.25) * (-0.5 * k * k * s * s).exp()
}

/// Unperturbed Rabi solution (Ψ̃_R⁰, Ψ̃_G⁰).
pub fn zeroth_order(k: f64, t: f64, params: &ModelParams) -> (Complex64, Complex64) {
    let a = initial_k_amplitude(k, params);
    let free = Complex64::from_polar(a, -params.xi_ratio * k * k * t);
    let (s, c) = t.sin_cos();
    (free * Complex64::new(0.0, -s), free * c)
}

/// First-order amplitudes (Ψ̃_R¹, Ψ̃_G¹) including the zeroth-order part.
pub fn first_order(k: f64, t: f64, params: &ModelParams) -> (Complex64, Complex64) {
    let a = initial_k_amplitude(k, params);
    let free = Complex64::from_polar(a, -params.xi_ratio * k * k * t);
    let (s, c) = t.sin_cos();
    let xi = params.xi_ratio;
    let s2 = params.sigma_ratio * params.sigma_ratio;
    let i = Complex64::i();
    let pre = params.nu as f64 * params.detuning_ratio * k / 2.0;
    // σ²t/x_f² + iξt²
    let drift = Complex64::new(s2 * t, xi * t * t);
    let ryd = -i * s + pre * (xi * s - xi * t * c - i * drift * s);
    let gnd = c - pre * (s2 * s + i * xi * t * s - drift * c);
    (free * ryd, free * gnd)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoherenceMode {
    /// The printed first-order-in-t expressions for Re and Im.
    ClosedForm,
    /// Trapezoid quadrature of the k-space overlap of the first-order amplitudes.
    KIntegral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceValue {
    pub rho: Complex64,
    /// False when a closed-form value lies beyond the short-time horizon.
    pub short_time: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbativeCoherence {
    pub params: ModelParams,
    pub mode: CoherenceMode,
    pub horizon: f64,
}

impl PerturbativeCoherence {
    pub fn new(params: ModelParams, mode: CoherenceMode) -> Self {
        Self {
            params,
            mode,
            horizon: DEFAULT_HORIZON,
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn evaluate(&self, t: f64) -> CoherenceValue {
        match self.mode {
            CoherenceMode::ClosedForm => CoherenceValue {
                rho: coherence_closed_form(t, &self.params),
                short_time: t.abs() <= self.horizon,
            },
            CoherenceMode::KIntegral => CoherenceValue {
                rho: coherence_k_integral(t, &self.params),
                short_time: true,
            },
        }
    }

    /// Trace in the simulator's series schema. Populations are the zeroth-order
    /// Rabi populations and the boundary leak is zero.
    pub fn trace(&self, times: &[f64]) -> CoherenceSeries {
        let mut series = CoherenceSeries::default();
        for &t in times {
            let s = t.sin();
            let pop_r = s * s;
            series.push(t, self.evaluate(t).rho, pop_r, 1.0 - pop_r, 0.0);
        }
        series
    }
}

/// ρ_RG(t) to first order in t.
pub fn coherence_closed_form(t: f64, params: &ModelParams) -> Complex64 {
    let nu = params.nu as f64;
    let d = params.detuning_ratio;
    let s2 = params.sigma_ratio * params.sigma_ratio;
    let xi = params.xi_ratio;
    let (s, c) = t.sin_cos();
    let pre = nu * nu * d * d / 8.0;
    let re = -pre * (xi * s * s - 2.0 * xi * t * s * c);
    let im = s * c - pre * (s2 + xi * xi / s2) * t * s * s;
    Complex64::new(re, im)
}

/// x_f ∫dk Ψ̃_R*(k,t) Ψ̃_G(k,t) with the first-order amplitudes.
pub fn coherence_k_integral(t: f64, params: &ModelParams) -> Complex64 {
    let half = QUADRATURE_HALF_WIDTH / params.sigma_ratio;
    let n = QUADRATURE_POINTS;
    let h = 2.0 * half / (n - 1) as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..n {
        let k = -half + j as f64 * h;
        let (r, g) = first_order(k, t, params);
        let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
        sum += w * r.conj() * g;
    }
    sum * h
}

/// Times t_n with Ωt_n = π/4 + nπ for n = 0..=n_max.
pub fn peak_times(n_max: usize) -> Vec<f64> {
    (0..=n_max).map(|n| PI / 4.0 + n as f64 * PI).collect()
}
