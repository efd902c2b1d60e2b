//! Second-order split-step propagation of the coupled Rydberg/ground equations.
//!
//! One step is e^{−iT δt/2} e^{−iV δt} e^{−iT δt/2}. The kinetic factor is diagonal in
//! k-space and acts identically on both components; the potential factor is an exact
//! 2×2 unitary at every grid point, written with Pauli matrices.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, SpectralTransform, SpinorField};
use crate::observables::{density_snapshot, CoherenceSeries, DensitySnapshot};
use crate::params::ModelParams;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_T_FINAL: f64 = 40.0;
pub const DEFAULT_RECORD_STRIDE: usize = 10;
pub const DEFAULT_SNAPSHOT_STRIDE: usize = 200;
/// Edge-zone norm above which a run is marked degraded.
pub const BOUNDARY_LEAK_LIMIT: f64 = 1e-6;
/// Largest record spacing that still resolves the coherence maxima.
pub const MAX_RECORD_SPACING: f64 = PI / 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorConfig {
    pub dt: f64,
    pub t_final: f64,
    pub record_stride: usize,
    pub absorber_enabled: bool,
    /// Density snapshots every this many records; 0 disables snapshots.
    pub snapshot_stride: usize,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            t_final: DEFAULT_T_FINAL,
            record_stride: DEFAULT_RECORD_STRIDE,
            absorber_enabled: false,
            snapshot_stride: DEFAULT_SNAPSHOT_STRIDE,
        }
    }
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Propagator(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        if !(self.t_final == 0.0 || self.t_final >= self.dt) || !self.t_final.is_finite() {
            return Err(Error::Propagator(format!(
                "t_final must be 0 or >= dt, got {}",
                self.t_final
            )));
        }
        if self.record_stride < 1 {
            return Err(Error::Propagator("record_stride must be >= 1".into()));
        }
        let spacing = self.record_stride as f64 * self.dt;
        if spacing > MAX_RECORD_SPACING * (1.0 + 1e-12) {
            return Err(Error::Propagator(format!(
                "record spacing {spacing} exceeds pi/20 and would under-resolve the Rabi maxima"
            )));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Precomputed split-step propagator for a fixed grid, parameter set and time step.
///
/// `dt` may be negative (backward propagation) or zero (identity).
pub struct Propagator {
    dt: f64,
    kinetic_half: Vec<Complex64>,
    kinetic_full: Vec<Complex64>,
    pot_rr: Vec<Complex64>,
    pot_rg: Vec<Complex64>,
    pot_gg: Vec<Complex64>,
    mask: Option<Vec<f64>>,
    transform: SpectralTransform,
}

impl Propagator {
    pub fn new(grid: &Grid, params: &ModelParams, dt: f64) -> Self {
        // phases carry the 1/N of the inverse transform
        let scale = 1.0 / grid.len() as f64;
        let kinetic = |tau: f64| -> Vec<Complex64> {
            grid.k()
                .iter()
                .map(|&k| Complex64::from_polar(scale, -params.xi_ratio * k * k * tau))
                .collect()
        };
        let n = grid.len();
        let mut pot_rr = Vec::with_capacity(n);
        let mut pot_rg = Vec::with_capacity(n);
        let mut pot_gg = Vec::with_capacity(n);
        for &x in grid.x() {
            let (rr, rg, gg) = potential_matrix(params.potential_unchecked(x), dt);
            pot_rr.push(rr);
            pot_rg.push(rg);
            pot_gg.push(gg);
        }
        Self {
            dt,
            kinetic_half: kinetic(0.5 * dt),
            kinetic_full: kinetic(dt),
            pot_rr,
            pot_rg,
            pot_gg,
            mask: None,
            transform: SpectralTransform::new(n),
        }
    }

    /// Multiplies the field by the absorbing mask after every full step.
    pub fn with_absorber(mut self, grid: &Grid) -> Self {
        self.mask = Some(grid.absorber_mask());
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn kinetic(&mut self, field: &mut SpinorField, full: bool) {
        let phase = if full {
            &self.kinetic_full
        } else {
            &self.kinetic_half
        };
        for comp in [&mut field.psi_r, &mut field.psi_g] {
            self.transform.forward(comp);
            for (v, p) in comp.iter_mut().zip(phase) {
                *v *= p;
            }
            self.transform.inverse_unscaled(comp);
        }
    }

    fn potential(&self, field: &mut SpinorField) {
        for j in 0..field.len() {
            let r = field.psi_r[j];
            let g = field.psi_g[j];
            field.psi_r[j] = self.pot_rr[j] * r + self.pot_rg[j] * g;
            field.psi_g[j] = self.pot_gg[j] * g + self.pot_rg[j] * r;
        }
    }

    fn apply_mask(&self, field: &mut SpinorField) {
        if let Some(mask) = &self.mask {
            for ((r, g), &m) in field.psi_r.iter_mut().zip(field.psi_g.iter_mut()).zip(mask) {
                *r *= m;
                *g *= m;
            }
        }
    }

    /// One full Strang step.
    pub fn step(&mut self, field: &mut SpinorField) {
        self.kinetic(field, false);
        self.potential(field);
        self.kinetic(field, false);
        self.apply_mask(field);
    }

    /// `n` Strang steps with adjacent kinetic half-steps fused into full steps.
    pub fn advance(&mut self, field: &mut SpinorField, n: usize) {
        if n == 0 {
            return;
        }
        if self.mask.is_some() {
            for _ in 0..n {
                self.step(field);
            }
            return;
        }
        self.kinetic(field, false);
        for i in 0..n {
            self.potential(field);
            if i + 1 < n {
                self.kinetic(field, true);
            }
        }
        self.kinetic(field, false);
    }
}

/// Entries (rr, rg = gr, gg) of e^{−iVδt} for V = [[U, Ω], [Ω, 0]] with Ω = 1.
pub fn potential_matrix(u: f64, dt: f64) -> (Complex64, Complex64, Complex64) {
    let phi = 0.5 * u * dt;
    let omega = (0.25 * u * u + 1.0).sqrt();
    let (s, c) = (omega * dt).sin_cos();
    let e = Complex64::from_polar(1.0, -phi);
    let i = Complex64::i();
    let rr = e * (c - i * s * (u / (2.0 * omega)));
    let gg = e * (c + i * s * (u / (2.0 * omega)));
    let rg = -i * e * (s / omega);
    (rr, rg, gg)
}

/// Applies e^{−iT dt/2} to both components.
pub fn kinetic_half_step(
    field: &SpinorField,
    grid: &Grid,
    params: &ModelParams,
    dt: f64,
) -> SpinorField {
    let mut out = field.clone();
    let mut transform = SpectralTransform::new(grid.len());
    for comp in [&mut out.psi_r, &mut out.psi_g] {
        transform.forward(comp);
        for (v, &k) in comp.iter_mut().zip(grid.k()) {
            *v *= Complex64::from_polar(1.0, -params.xi_ratio * k * k * 0.5 * dt);
        }
        transform.inverse(comp);
    }
    out
}

/// Applies the exact local unitary e^{−iV dt} at every grid point.
pub fn potential_step(
    field: &SpinorField,
    grid: &Grid,
    params: &ModelParams,
    dt: f64,
) -> SpinorField {
    let mut out = field.clone();
    for (j, &x) in grid.x().iter().enumerate() {
        let (rr, rg, gg) = potential_matrix(params.potential_unchecked(x), dt);
        let (r, g) = (field.psi_r[j], field.psi_g[j]);
        out.psi_r[j] = rr * r + rg * g;
        out.psi_g[j] = gg * g + rg * r;
    }
    out
}

/// One second-order step e^{−iT dt/2} e^{−iV dt} e^{−iT dt/2}.
pub fn step(field: &SpinorField, grid: &Grid, params: &ModelParams, dt: f64) -> SpinorField {
    let half = kinetic_half_step(field, grid, params, dt);
    let pot = potential_step(&half, grid, params, dt);
    kinetic_half_step(&pot, grid, params, dt)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: CoherenceSeries,
    pub snapshots: Vec<DensitySnapshot>,
    pub final_field: SpinorField,
    pub max_boundary_leak: f64,
    /// Edge-zone norm exceeded [`BOUNDARY_LEAK_LIMIT`] at some record.
    pub degraded: bool,
}

/// Propagates `initial` over `[0, t_final]`, recording every `record_stride` steps.
pub fn run(
    initial: &SpinorField,
    grid: &Grid,
    params: &ModelParams,
    config: &PropagatorConfig,
) -> Result<RunOutput> {
    config.validate()?;
    if initial.len() != grid.len() {
        return Err(Error::Propagator(format!(
            "field has {} points, grid has {}",
            initial.len(),
            grid.len()
        )));
    }
    let mut propagator = Propagator::new(grid, params, config.dt);
    if config.absorber_enabled {
        propagator = propagator.with_absorber(grid);
    }
    let mut field = initial.clone();
    let mut series = CoherenceSeries::default();
    let mut snapshots = Vec::new();
    let n_steps = config.n_steps();
    let mut done = 0usize;
    let mut record_index = 0usize;
    loop {
        let t = done as f64 * config.dt;
        series.record(t, &field, grid);
        if config.snapshot_stride > 0 && record_index.is_multiple_of(config.snapshot_stride) {
            snapshots.push(density_snapshot(&field, grid, t));
        }
        record_index += 1;
        if done == n_steps {
            break;
        }
        let block = config.record_stride.min(n_steps - done);
        propagator.advance(&mut field, block);
        done += block;
    }
    let max_boundary_leak = series.max_boundary_leak();
    Ok(RunOutput {
        series,
        snapshots,
        final_field: field,
        max_boundary_leak,
        degraded: max_boundary_leak > BOUNDARY_LEAK_LIMIT,
    })
}
