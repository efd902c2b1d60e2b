//! Subcommand implementations behind the `rydberg-dephasing` binary.
//!
//! Every run writes into its own directory; nothing time- or host-dependent is
//! written, so repeated runs of one config produce identical bytes.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::analytic::{CoherenceMode, PerturbativeCoherence};
use crate::config::{RunConfig, SweepSpec};
use crate::error::{Error, Result};
use crate::evolution::{run, RunOutput, BOUNDARY_LEAK_LIMIT};
use crate::fitting::{
    fit_series, FitResult, EXPONENTIAL_R2, FIT_HEADER, FLOOR_FACTOR, FLOOR_TAIL_FRACTION,
};
use crate::grid::initial_state;
use crate::observables::{write_snapshots_csv, CoherenceSeries};
use crate::params::dephasing_rate;

pub const MANIFEST: &str = "manifest";
pub const SERIES_CSV: &str = "series.csv";
pub const SNAPSHOTS_CSV: &str = "snapshots.csv";
pub const FIT_CSV: &str = "fit.csv";
pub const PEAKS_CSV: &str = "peaks.csv";
pub const FINAL_FIELD_CSV: &str = "final_field.csv";
pub const ANALYTIC_CSV: &str = "analytic.csv";
pub const OVERLAY_CSV: &str = "overlay.csv";
pub const SWEEP_CSV: &str = "sweep.csv";

pub const OVERLAY_HEADER: &str =
    "t,re_rho_numeric,im_rho_numeric,re_rho_analytic,im_rho_analytic,dev_re,dev_im,short_time";
pub const SWEEP_HEADER: &str =
    "detuning_ratio,xi_ratio,gamma_numeric,gamma_analytic,rel_deviation,\
exponential_flag,r_squared,n_peaks,degraded,status,config_hash";

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn mode_name(mode: CoherenceMode) -> &'static str {
    match mode {
        CoherenceMode::ClosedForm => "closed_form",
        CoherenceMode::KIntegral => "k_integral",
    }
}

/// `key=value` provenance shared by every run directory.
struct Manifest {
    lines: Vec<(String, String)>,
}

impl Manifest {
    fn new(command: &str, cfg: &RunConfig) -> Self {
        let mut lines = vec![
            ("command".to_string(), command.to_string()),
            ("version".into(), env!("CARGO_PKG_VERSION").to_string()),
            ("config_hash".into(), cfg.config_hash()),
        ];
        lines.extend(cfg.canonical_lines());
        let mut m = Self { lines };
        for (i, w) in cfg
            .params
            .validity_warnings(cfg.propagator.t_final)
            .iter()
            .enumerate()
        {
            m.push(&format!("warning.{i}"), w);
        }
        m
    }

    fn push(&mut self, key: &str, value: impl ToString) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let mut out = create(dir, MANIFEST)?;
        for (k, v) in &self.lines {
            writeln!(out, "{k}={v}")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Builds the grid and initial state and propagates.
pub fn run_numeric(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let psi0 = initial_state(&grid, &cfg.params)?;
    run(&psi0, &grid, &cfg.params, &cfg.propagator)
}

#[derive(Debug)]
pub struct SimulateOutcome {
    pub output: RunOutput,
    pub fit: Result<FitResult>,
}

/// Runs one simulation and writes series, snapshots, fit, peaks, final field and manifest.
pub fn simulate(cfg: &RunConfig, out_dir: &Path) -> Result<SimulateOutcome> {
    let output = run_numeric(cfg)?;
    fs::create_dir_all(out_dir)?;
    let grid = cfg.grid()?;

    let mut w = create(out_dir, SERIES_CSV)?;
    output.series.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(out_dir, SNAPSHOTS_CSV)?;
    write_snapshots_csv(&output.snapshots, cfg.snapshot_x_stride, &mut w)?;
    w.flush()?;
    let mut w = create(out_dir, FINAL_FIELD_CSV)?;
    output.final_field.write_csv(&grid, &mut w)?;
    w.flush()?;

    let fit = fit_series(&output.series);
    let mut manifest = Manifest::new("simulate", cfg);
    manifest.push("fit.floor_rule", format!(
        "peaks cut at first maximum below {FLOOR_FACTOR} x mean |rho_rg| over final {FLOOR_TAIL_FRACTION} of series"
    ));
    manifest.push("fit.exponential_r2", EXPONENTIAL_R2);
    let mut w = create(out_dir, FIT_CSV)?;
    let mut p = create(out_dir, PEAKS_CSV)?;
    match &fit {
        Ok(f) => {
            f.write_csv(&mut w)?;
            f.write_peaks_csv(&mut p)?;
            manifest.push("fit.status", "ok");
        }
        Err(e) => {
            writeln!(w, "{FIT_HEADER}")?;
            writeln!(p, "t,value")?;
            manifest.push("fit.status", format!("unavailable: {e}"));
        }
    }
    w.flush()?;
    p.flush()?;
    manifest.push(
        "max_boundary_leak",
        format!("{:e}", output.max_boundary_leak),
    );
    manifest.push("boundary_leak_limit", format!("{BOUNDARY_LEAK_LIMIT:e}"));
    manifest.push("degraded", output.degraded);
    manifest.write(out_dir)?;
    Ok(SimulateOutcome { output, fit })
}

fn analytic_for(cfg: &RunConfig) -> PerturbativeCoherence {
    PerturbativeCoherence::new(cfg.params, cfg.analytic_mode).with_horizon(cfg.horizon)
}

fn uniform_times(t_final: f64, dt: f64) -> Vec<f64> {
    let n = (t_final / dt + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    if t_final - times[n] > 1e-9 * dt {
        times.push(t_final);
    }
    times
}

/// Analytic γ⊥/Ω and the perturbative trace over `[0, t_final]`.
pub fn analytic(cfg: &RunConfig) -> (f64, CoherenceSeries) {
    let dt = cfg
        .analytic_dt
        .unwrap_or(cfg.propagator.dt * cfg.propagator.record_stride as f64);
    let trace = analytic_for(cfg).trace(&uniform_times(cfg.propagator.t_final, dt));
    (dephasing_rate(&cfg.params), trace)
}

pub fn write_analytic(cfg: &RunConfig, out_dir: &Path) -> Result<(f64, CoherenceSeries)> {
    cfg.validate()?;
    let (gamma, trace) = analytic(cfg);
    fs::create_dir_all(out_dir)?;
    let mut w = create(out_dir, ANALYTIC_CSV)?;
    trace.write_csv(&mut w)?;
    w.flush()?;
    let mut manifest = Manifest::new("analytic", cfg);
    manifest.push("gamma_analytic", format!("{gamma:e}"));
    manifest.push("analytic_mode", mode_name(cfg.analytic_mode));
    manifest.push("horizon", format!("{:?}", cfg.horizon));
    manifest.write(out_dir)?;
    Ok((gamma, trace))
}

/// Linear interpolation of `(xs, ys)` at `x`; `xs` ascending.
fn interpolate(xs: &[f64], ys: &[Complex64], x: f64) -> Complex64 {
    let j = xs.partition_point(|&v| v <= x);
    if j == 0 {
        return ys[0];
    }
    if j >= xs.len() {
        return ys[xs.len() - 1];
    }
    let (x0, x1) = (xs[j - 1], xs[j]);
    let w = (x - x0) / (x1 - x0);
    ys[j - 1] * (1.0 - w) + ys[j] * w
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlayRow {
    pub t: f64,
    pub numeric: Complex64,
    pub analytic: Complex64,
    pub short_time: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub rows: Vec<OverlayRow>,
    pub window: f64,
    pub max_dev_re: f64,
    pub max_dev_im: f64,
    /// Analytic trace was computed on its own grid and interpolated onto the numeric one.
    pub resampled: bool,
}

impl CompareReport {
    pub fn max_deviation(&self) -> f64 {
        self.max_dev_re.max(self.max_dev_im)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{OVERLAY_HEADER}")?;
        for r in &self.rows {
            let d = r.numeric - r.analytic;
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.t,
                r.numeric.re,
                r.numeric.im,
                r.analytic.re,
                r.analytic.im,
                d.re,
                d.im,
                r.short_time
            )?;
        }
        Ok(())
    }
}

/// Overlays the analytic trace on a numeric series and measures the deviation on `[0, window]`.
pub fn compare_series(cfg: &RunConfig, numeric: &CoherenceSeries) -> CompareReport {
    let model = analytic_for(cfg);
    let (values, resampled): (Vec<(Complex64, bool)>, bool) = match cfg.analytic_dt {
        Some(dt) => {
            let t_end = numeric.times.last().copied().unwrap_or(0.0);
            let times = uniform_times(t_end, dt);
            let rho: Vec<Complex64> = times.iter().map(|&t| model.evaluate(t).rho).collect();
            let vals = numeric
                .times
                .iter()
                .map(|&t| (interpolate(&times, &rho, t), model.evaluate(t).short_time))
                .collect();
            (vals, true)
        }
        None => {
            let vals = numeric
                .times
                .iter()
                .map(|&t| {
                    let v = model.evaluate(t);
                    (v.rho, v.short_time)
                })
                .collect();
            (vals, false)
        }
    };
    let mut report = CompareReport {
        rows: Vec::with_capacity(numeric.len()),
        window: cfg.compare_window,
        max_dev_re: 0.0,
        max_dev_im: 0.0,
        resampled,
    };
    for (i, &t) in numeric.times.iter().enumerate() {
        let (a, short_time) = values[i];
        let n = numeric.rho_rg[i];
        if t <= cfg.compare_window * (1.0 + 1e-12) {
            report.max_dev_re = report.max_dev_re.max((n.re - a.re).abs());
            report.max_dev_im = report.max_dev_im.max((n.im - a.im).abs());
        }
        report.rows.push(OverlayRow {
            t,
            numeric: n,
            analytic: a,
            short_time,
        });
    }
    report
}

pub fn compare(cfg: &RunConfig, out_dir: &Path) -> Result<CompareReport> {
    let output = run_numeric(cfg)?;
    let report = compare_series(cfg, &output.series);
    fs::create_dir_all(out_dir)?;
    let mut w = create(out_dir, OVERLAY_CSV)?;
    report.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(out_dir, SERIES_CSV)?;
    output.series.write_csv(&mut w)?;
    w.flush()?;
    let mut manifest = Manifest::new("compare", cfg);
    manifest.push("analytic_mode", mode_name(cfg.analytic_mode));
    manifest.push("horizon", format!("{:?}", cfg.horizon));
    manifest.push("compare_window", format!("{:?}", report.window));
    manifest.push(
        "analytic_grid",
        match cfg.analytic_dt {
            Some(dt) => format!("dt={dt:?}; linearly interpolated onto numeric times"),
            None => "numeric times".to_string(),
        },
    );
    manifest.push("max_dev_re", format!("{:e}", report.max_dev_re));
    manifest.push("max_dev_im", format!("{:e}", report.max_dev_im));
    manifest.push("max_deviation", format!("{:e}", report.max_deviation()));
    manifest.push("degraded", output.degraded);
    manifest.write(out_dir)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub detuning_ratio: f64,
    pub xi_ratio: f64,
    pub gamma_analytic: f64,
    pub config_hash: String,
    pub outcome: std::result::Result<JobResult, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobResult {
    pub gamma_numeric: f64,
    pub r_squared: f64,
    pub exponential_flag: bool,
    pub n_peaks: usize,
    pub degraded: bool,
}

impl SweepRow {
    pub fn rel_deviation(&self) -> Option<f64> {
        let j = self.outcome.as_ref().ok()?;
        Some((j.gamma_numeric - self.gamma_analytic) / self.gamma_analytic)
    }

    fn csv_line(&self) -> String {
        let status = match &self.outcome {
            Ok(_) => "ok".to_string(),
            Err(e) => format!("error: {}", e.replace([',', '\n', '\r'], ";")),
        };
        let (g, r2, flag, n, degraded) = match &self.outcome {
            Ok(j) => (
                format!("{:.16e}", j.gamma_numeric),
                format!("{:.16e}", j.r_squared),
                j.exponential_flag.to_string(),
                j.n_peaks.to_string(),
                j.degraded.to_string(),
            ),
            Err(_) => Default::default(),
        };
        let dev = self
            .rel_deviation()
            .map_or(String::new(), |d| format!("{d:.16e}"));
        format!(
            "{:?},{:?},{g},{:.16e},{dev},{flag},{r2},{n},{degraded},{status},{}",
            self.detuning_ratio, self.xi_ratio, self.gamma_analytic, self.config_hash
        )
    }
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.csv_line())?;
    }
    Ok(())
}

pub fn job_dir(out_dir: &Path, cfg: &RunConfig) -> PathBuf {
    out_dir.join(format!("job_{}", cfg.config_hash()))
}

fn sweep_job(cfg: &RunConfig, out_dir: &Path) -> SweepRow {
    let outcome = simulate(cfg, &job_dir(out_dir, cfg))
        .and_then(|s| {
            let fit = s.fit?;
            Ok(JobResult {
                gamma_numeric: fit.gamma_perp,
                r_squared: fit.r_squared,
                exponential_flag: fit.exponential_flag,
                n_peaks: fit.n_peaks,
                degraded: s.output.degraded,
            })
        })
        .map_err(|e| e.to_string());
    SweepRow {
        detuning_ratio: cfg.params.detuning_ratio,
        xi_ratio: cfg.params.xi_ratio,
        gamma_analytic: dephasing_rate(&cfg.params),
        config_hash: cfg.config_hash(),
        outcome,
    }
}

/// Runs every job of `spec` on `workers` threads; rows come back in job order.
pub fn sweep(spec: &SweepSpec, out_dir: &Path, workers: usize) -> Result<Vec<SweepRow>> {
    fs::create_dir_all(out_dir)?;
    let jobs = spec.jobs();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    let rows: Vec<SweepRow> =
        pool.install(|| jobs.par_iter().map(|cfg| sweep_job(cfg, out_dir)).collect());
    let mut w = create(out_dir, SWEEP_CSV)?;
    write_sweep_csv(&rows, &mut w)?;
    w.flush()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ModelParams;

    #[test]
    fn interpolation_is_linear_and_clamped() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [
            Complex64::new(0.0, 1.0),
            Complex64::new(2.0, 3.0),
            Complex64::new(4.0, -1.0),
        ];
        assert_eq!(interpolate(&xs, &ys, 0.5), Complex64::new(1.0, 2.0));
        assert_eq!(interpolate(&xs, &ys, 1.0), ys[1]);
        assert_eq!(interpolate(&xs, &ys, -1.0), ys[0]);
        assert_eq!(interpolate(&xs, &ys, 5.0), ys[2]);
    }

    #[test]
    fn uniform_times_cover_the_end() {
        assert_eq!(uniform_times(1.0, 0.25), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let t = uniform_times(1.0, 0.3);
        assert_eq!(t.len(), 5);
        assert_eq!(*t.last().unwrap(), 1.0);
        assert_eq!(uniform_times(0.0, 0.1), vec![0.0]);
    }

    #[test]
    fn self_comparison_has_zero_deviation() {
        let cfg = RunConfig::new(ModelParams::new(1.32, 0.05, 1.25e-3));
        let (_, trace) = analytic(&cfg);
        let report = compare_series(&cfg, &trace);
        assert_eq!(report.max_deviation(), 0.0);
        assert!(!report.resampled);
    }

    #[test]
    fn resampled_comparison_is_close() {
        let mut cfg = RunConfig::new(ModelParams::new(1.32, 0.05, 1.25e-3));
        let (_, trace) = analytic(&cfg);
        cfg.analytic_dt = Some(1e-3);
        let report = compare_series(&cfg, &trace);
        assert!(report.resampled);
        assert!(report.max_deviation() < 1e-6, "{}", report.max_deviation());
    }

    #[test]
    fn failed_row_keeps_columns() {
        let row = SweepRow {
            detuning_ratio: 1.0,
            xi_ratio: 1e-3,
            gamma_analytic: 0.01,
            config_hash: "abc".into(),
            outcome: Err("bad, worse\nworst".into()),
        };
        let line = row.csv_line();
        assert_eq!(line.split(',').count(), SWEEP_HEADER.split(',').count());
        assert!(line.contains("error: bad; worse;worst"));
    }
}
