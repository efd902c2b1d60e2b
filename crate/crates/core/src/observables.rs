//! Observables of a [`SpinorField`] and their time series.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Grid, SpinorField};

/// ρ_RG = ∫dx Ψ_R*(x) Ψ_G(x), as a uniform Riemann sum.
pub fn coherence(field: &SpinorField, grid: &Grid) -> Complex64 {
    let s: Complex64 = field
        .psi_r
        .iter()
        .zip(&field.psi_g)
        .map(|(r, g)| r.conj() * g)
        .sum();
    s * grid.dx()
}

/// (∫|Ψ_R|²dx, ∫|Ψ_G|²dx).
pub fn populations(field: &SpinorField, grid: &Grid) -> (f64, f64) {
    let r: f64 = field.psi_r.iter().map(|v| v.norm_sqr()).sum();
    let g: f64 = field.psi_g.iter().map(|v| v.norm_sqr()).sum();
    (r * grid.dx(), g * grid.dx())
}

/// Density-weighted mean position of one component, `None` when it carries no weight.
pub fn center_of_mass(component: &[Complex64], grid: &Grid) -> Option<f64> {
    let (w, m) = component
        .iter()
        .zip(grid.x())
        .fold((0.0, 0.0), |(w, m), (v, &x)| {
            (w + v.norm_sqr(), m + v.norm_sqr() * x)
        });
    (w > 0.0).then(|| m / w)
}

/// Space-resolved densities at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySnapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub dens_g: Vec<f64>,
    pub dens_r: Vec<f64>,
}

impl DensitySnapshot {
    /// Integrated density of both components.
    pub fn total(&self, dx: f64) -> f64 {
        (self.dens_g.iter().sum::<f64>() + self.dens_r.iter().sum::<f64>()) * dx
    }

    pub fn center_of_mass_r(&self) -> Option<f64> {
        weighted_mean(&self.x, &self.dens_r)
    }

    pub fn center_of_mass_g(&self) -> Option<f64> {
        weighted_mean(&self.x, &self.dens_g)
    }
}

fn weighted_mean(x: &[f64], w: &[f64]) -> Option<f64> {
    let total: f64 = w.iter().sum();
    (total > 0.0).then(|| x.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / total)
}

pub fn density_snapshot(field: &SpinorField, grid: &Grid, t: f64) -> DensitySnapshot {
    DensitySnapshot {
        t,
        x: grid.x().to_vec(),
        dens_g: field.psi_g.iter().map(|v| v.norm_sqr()).collect(),
        dens_r: field.psi_r.iter().map(|v| v.norm_sqr()).collect(),
    }
}

/// Snapshot CSV `t, x, dens_g, dens_r`, keeping every `x_stride`-th grid point.
pub fn write_snapshots_csv<W: Write>(
    snapshots: &[DensitySnapshot],
    x_stride: usize,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "t,x,dens_g,dens_r")?;
    let stride = x_stride.max(1);
    for snap in snapshots {
        for j in (0..snap.x.len()).step_by(stride) {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                snap.t, snap.x[j], snap.dens_g[j], snap.dens_r[j]
            )?;
        }
    }
    Ok(())
}

pub const SERIES_HEADER: &str =
    "t,re_rho_rg,im_rho_rg,abs_rho_rg,pop_r,pop_g,norm_total,boundary_leak";

/// Time-stamped record of ρ_RG(t) and the component norms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CoherenceSeries {
    pub times: Vec<f64>,
    pub rho_rg: Vec<Complex64>,
    pub pop_r: Vec<f64>,
    pub pop_g: Vec<f64>,
    pub norm_total: Vec<f64>,
    pub boundary_leak: Vec<f64>,
}

impl CoherenceSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Records the observables of `field` at time `t`.
    pub fn record(&mut self, t: f64, field: &SpinorField, grid: &Grid) {
        let (r, g) = populations(field, grid);
        self.push(t, coherence(field, grid), r, g, field.boundary_leak(grid));
    }

    pub fn push(&mut self, t: f64, rho: Complex64, pop_r: f64, pop_g: f64, leak: f64) {
        debug_assert!(self.times.last().is_none_or(|&last| t > last));
        self.times.push(t);
        self.rho_rg.push(rho);
        self.pop_r.push(pop_r);
        self.pop_g.push(pop_g);
        self.norm_total.push(pop_r + pop_g);
        self.boundary_leak.push(leak);
    }

    pub fn abs_rho(&self) -> Vec<f64> {
        self.rho_rg.iter().map(|c| c.norm()).collect()
    }

    pub fn max_boundary_leak(&self) -> f64 {
        self.boundary_leak.iter().copied().fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{SERIES_HEADER}")?;
        for i in 0..self.len() {
            let rho = self.rho_rg[i];
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[i],
                rho.re,
                rho.im,
                rho.norm(),
                self.pop_r[i],
                self.pop_g[i],
                self.norm_total[i],
                self.boundary_leak[i]
            )?;
        }
        Ok(())
    }

    /// Reads the series CSV schema written by [`CoherenceSeries::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Config("empty series file".into()))??;
        if header.trim() != SERIES_HEADER {
            return Err(Error::Config(format!(
                "unexpected series header `{header}`"
            )));
        }
        let mut series = Self::default();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("series row {}: {e}", n + 2)))?;
            if v.len() != 8 {
                return Err(Error::Config(format!(
                    "series row {} has {} columns",
                    n + 2,
                    v.len()
                )));
            }
            series.times.push(v[0]);
            series.rho_rg.push(Complex64::new(v[1], v[2]));
            series.pop_r.push(v[4]);
            series.pop_g.push(v[5]);
            series.norm_total.push(v[6]);
            series.boundary_leak.push(v[7]);
        }
        Ok(series)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{initial_state, SpectralTransform};
    use crate::params::ModelParams;
    use proptest::prelude::*;

    fn setup() -> (Grid, SpinorField) {
        let g = Grid::new(1 << 12, 0.1, 10.5).unwrap();
        let f = initial_state(&g, &ModelParams::new(1.32, 0.05, 1.25e-3)).unwrap();
        (g, f)
    }

    #[test]
    fn initial_state_observables() {
        let (g, f) = setup();
        assert_eq!(coherence(&f, &g), Complex64::new(0.0, 0.0));
        let (r, p) = populations(&f, &g);
        assert_eq!(r, 0.0);
        assert!((p - 1.0).abs() < 1e-14);
        let snap = density_snapshot(&f, &g, 0.0);
        assert!(snap.dens_r.iter().all(|&d| d == 0.0));
        assert!((snap.total(g.dx()) - f.norm(&g)).abs() < 1e-15);
        assert!(snap.center_of_mass_r().is_none());
    }

    #[test]
    fn disjoint_supports_have_zero_coherence() {
        let g = Grid::new(1 << 8, 0.1, 10.5).unwrap();
        let mut f = SpinorField::zeros(g.len());
        for j in 0..100 {
            f.psi_r[j] = Complex64::new(1.0, 0.5);
        }
        for j in 150..200 {
            f.psi_g[j] = Complex64::new(0.3, -1.0);
        }
        assert_eq!(coherence(&f, &g), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn parseval() {
        let (g, mut f) = setup();
        for (j, r) in f.psi_r.iter_mut().enumerate() {
            *r = f.psi_g[j] * Complex64::from_polar(0.6, 40.0 * g.x()[j]);
        }
        let (r, p) = populations(&f, &g);
        let mut t = SpectralTransform::new(g.len());
        let mut kr = f.psi_r.clone();
        let mut kg = f.psi_g.clone();
        t.forward(&mut kr);
        t.forward(&mut kg);
        // unnormalised DFT: Σ|X_k|² = N Σ|x_j|²
        let scale = g.dx() / g.len() as f64;
        let rk: f64 = kr.iter().map(|v| v.norm_sqr()).sum::<f64>() * scale;
        let gk: f64 = kg.iter().map(|v| v.norm_sqr()).sum::<f64>() * scale;
        assert!((r - rk).abs() < 1e-12);
        assert!((p - gk).abs() < 1e-12);
    }

    #[test]
    fn series_csv_round_trip() {
        let mut s = CoherenceSeries::default();
        s.push(0.0, Complex64::new(0.0, 0.0), 0.0, 1.0, 0.0);
        s.push(0.1, Complex64::new(-1e-3, 0.1), 0.01, 0.99, 1e-20);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = CoherenceSeries::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, s);
        assert!(CoherenceSeries::read_csv("t,x\n".as_bytes()).is_err());
    }

    fn arb_field() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
        proptest::collection::vec(
            (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
            256,
        )
    }

    proptest! {
        #[test]
        fn cauchy_schwarz_and_conjugate_symmetry(vals in arb_field()) {
            let g = Grid::new(256, 0.1, 10.5).unwrap();
            let mut f = SpinorField::zeros(256);
            for (j, (a, b, c, d)) in vals.into_iter().enumerate() {
                f.psi_r[j] = Complex64::new(a, b);
                f.psi_g[j] = Complex64::new(c, d);
            }
            let rho = coherence(&f, &g);
            let (r, p) = populations(&f, &g);
            prop_assert!(rho.norm() <= (r * p).sqrt() * (1.0 + 1e-12));
            prop_assert!(rho.norm() <= 0.5 * (r + p) * (1.0 + 1e-12));
            let swapped = SpinorField { psi_r: f.psi_g.clone(), psi_g: f.psi_r.clone() };
            let rho_s = coherence(&swapped, &g);
            prop_assert!((rho_s - rho.conj()).norm() <= 1e-12 * (1.0 + rho.norm()));
        }
    }
}
