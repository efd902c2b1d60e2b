//! Flat `key = value` configuration files for single runs and sweeps.
//!
//! Blank lines and `#` comments are ignored. Unknown or repeated keys are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::analytic::{CoherenceMode, DEFAULT_HORIZON};
use crate::error::{Error, Result};
use crate::evolution::PropagatorConfig;
use crate::grid::{Grid, DEFAULT_X_MAX, DEFAULT_X_MIN, DESK_POINTS, PAPER_POINTS};
use crate::params::{ModelParams, DEFAULT_NU};

pub const DEFAULT_COMPARE_WINDOW: f64 = 3.0;
pub const DEFAULT_SNAPSHOT_X_STRIDE: usize = 16;

const MODEL_KEYS: &[&str] = &[
    "detuning_ratio",
    "nu",
    "sigma_ratio",
    "xi_ratio",
    "c_nu",
    "rabi",
    "free_rabi",
];
const RUN_KEYS: &[&str] = &[
    "n_points",
    "x_min",
    "x_max",
    "dt",
    "t_final",
    "record_stride",
    "absorber",
    "snapshot_stride",
    "snapshot_x_stride",
    "horizon",
    "compare_window",
    "analytic_dt",
    "analytic_mode",
];
const SWEEP_KEYS: &[&str] = &["detuning_ratios", "xi_ratios", "workers"];

/// Raw parsed key/value pairs with their line numbers.
#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {line_no}: expected `key = value`, got `{line}`"
                ))
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::Config(format!("line {line_no}: empty key")));
            }
            if entries
                .insert(key.clone(), (line_no, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::Config(format!(
                    "line {line_no}: key `{key}` given twice"
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn check_known(&self, allowed: &[&[&str]]) -> Result<()> {
        for (key, (line, _)) in &self.entries {
            if !allowed.iter().any(|set| set.contains(&key.as_str())) {
                return Err(Error::Config(format!("line {line}: unknown key `{key}`")));
            }
        }
        Ok(())
    }

    fn raw(&self, key: &str) -> Option<&(usize, String)> {
        self.entries.get(key)
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|e| {
                Error::Config(format!("line {line}: bad value `{v}` for `{key}`: {e}"))
            }),
        }
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?
            .ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    fn list(&self, key: &str) -> Result<Vec<f64>> {
        let (line, v) = self
            .raw(key)
            .ok_or_else(|| Error::MissingKey(key.to_string()))?;
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map_err(|e| {
                    Error::Config(format!(
                        "line {line}: bad list entry `{s}` for `{key}`: {e}"
                    ))
                })
            })
            .collect()
    }
}

/// Everything needed for one simulation or comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub n_points: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub propagator: PropagatorConfig,
    pub snapshot_x_stride: usize,
    pub horizon: f64,
    pub compare_window: f64,
    /// Spacing of the analytic trace; `None` evaluates on the numeric time grid.
    pub analytic_dt: Option<f64>,
    pub analytic_mode: CoherenceMode,
}

impl RunConfig {
    pub fn new(params: ModelParams) -> Self {
        Self {
            params,
            n_points: DESK_POINTS,
            x_min: DEFAULT_X_MIN,
            x_max: DEFAULT_X_MAX,
            propagator: PropagatorConfig::default(),
            snapshot_x_stride: DEFAULT_SNAPSHOT_X_STRIDE,
            horizon: DEFAULT_HORIZON,
            compare_window: DEFAULT_COMPARE_WINDOW,
            analytic_dt: None,
            analytic_mode: CoherenceMode::ClosedForm,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        kv.check_known(&[MODEL_KEYS, RUN_KEYS])?;
        Self::from_key_values(&kv, None)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let kv = KeyValues::read(path)?;
        kv.check_known(&[MODEL_KEYS, RUN_KEYS])?;
        Self::from_key_values(&kv, None)
    }

    /// `sweep_point` supplies (Δ/Ω, ξ/Ω) for sweep jobs, making those keys optional.
    fn from_key_values(kv: &KeyValues, sweep_point: Option<(f64, f64)>) -> Result<Self> {
        let (detuning_ratio, xi_ratio) = match sweep_point {
            Some(p) => p,
            None => (kv.require("detuning_ratio")?, kv.require("xi_ratio")?),
        };
        let mut params = ModelParams::new(detuning_ratio, kv.require("sigma_ratio")?, xi_ratio);
        params.nu = kv.get("nu")?.unwrap_or(DEFAULT_NU);
        params.c_nu = kv.get("c_nu")?;
        params.rabi = kv.get("rabi")?.unwrap_or(1.0);
        params.free_rabi = kv.get("free_rabi")?.unwrap_or(false);
        let mut cfg = Self::new(params);
        if let Some(n) = kv.get("n_points")? {
            cfg.n_points = n;
        }
        if let Some(v) = kv.get("x_min")? {
            cfg.x_min = v;
        }
        if let Some(v) = kv.get("x_max")? {
            cfg.x_max = v;
        }
        let p = &mut cfg.propagator;
        if let Some(v) = kv.get("dt")? {
            p.dt = v;
        }
        if let Some(v) = kv.get("t_final")? {
            p.t_final = v;
        }
        if let Some(v) = kv.get("record_stride")? {
            p.record_stride = v;
        }
        if let Some(v) = kv.get("absorber")? {
            p.absorber_enabled = v;
        }
        if let Some(v) = kv.get("snapshot_stride")? {
            p.snapshot_stride = v;
        }
        if let Some(v) = kv.get("snapshot_x_stride")? {
            cfg.snapshot_x_stride = v;
        }
        if let Some(v) = kv.get("horizon")? {
            cfg.horizon = v;
        }
        if let Some(v) = kv.get("compare_window")? {
            cfg.compare_window = v;
        }
        cfg.analytic_dt = kv.get("analytic_dt")?;
        if let Some(mode) = kv.get::<String>("analytic_mode")? {
            cfg.analytic_mode = match mode.as_str() {
                "closed_form" => CoherenceMode::ClosedForm,
                "k_integral" => CoherenceMode::KIntegral,
                other => {
                    return Err(Error::Config(format!(
                        "analytic_mode must be closed_form or k_integral, got `{other}`"
                    )))
                }
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate_for_run()?;
        self.propagator.validate()?;
        Grid::new(self.n_points, self.x_min, self.x_max)?;
        if let Some(dt) = self.analytic_dt {
            if !(dt > 0.0) {
                return Err(Error::Config(format!("analytic_dt must be > 0, got {dt}")));
            }
        }
        Ok(())
    }

    /// Switches to the 2^17-point production grid.
    pub fn paper_scale(mut self) -> Self {
        self.n_points = PAPER_POINTS;
        self
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n_points, self.x_min, self.x_max)
    }

    /// Canonical `key=value` lines describing the physics and numerics of the run.
    pub fn canonical_lines(&self) -> Vec<(String, String)> {
        let p = &self.params;
        let q = &self.propagator;
        let mut out = vec![
            (
                "detuning_ratio".to_string(),
                format!("{:?}", p.detuning_ratio),
            ),
            ("nu".into(), p.nu.to_string()),
            ("sigma_ratio".into(), format!("{:?}", p.sigma_ratio)),
            ("xi_ratio".into(), format!("{:?}", p.xi_ratio)),
            ("rabi".into(), format!("{:?}", p.rabi)),
            ("free_rabi".into(), p.free_rabi.to_string()),
        ];
        if let Some(c) = p.c_nu {
            out.push(("c_nu".into(), format!("{c:?}")));
        }
        out.extend([
            ("n_points".to_string(), self.n_points.to_string()),
            ("x_min".into(), format!("{:?}", self.x_min)),
            ("x_max".into(), format!("{:?}", self.x_max)),
            ("dt".into(), format!("{:?}", q.dt)),
            ("t_final".into(), format!("{:?}", q.t_final)),
            ("record_stride".into(), q.record_stride.to_string()),
            ("absorber".into(), q.absorber_enabled.to_string()),
        ]);
        out
    }

    /// Hex SHA-256 (first 16 digits) of the canonical description.
    pub fn config_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in self.canonical_lines() {
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        digest.iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub detuning_ratios: Vec<f64>,
    pub xi_ratios: Vec<f64>,
    /// Template for every job; its Δ/Ω and ξ/Ω are overwritten per job.
    pub template: RunConfig,
    pub workers: usize,
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        Self::from_key_values(&kv)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_key_values(&KeyValues::read(path)?)
    }

    fn from_key_values(kv: &KeyValues) -> Result<Self> {
        kv.check_known(&[MODEL_KEYS, RUN_KEYS, SWEEP_KEYS])?;
        for key in ["detuning_ratio", "xi_ratio"] {
            if kv.raw(key).is_some() {
                return Err(Error::Config(format!(
                    "`{key}` is set per job in a sweep; use `{key}s` instead"
                )));
            }
        }
        let detuning_ratios = kv.list("detuning_ratios")?;
        let xi_ratios = kv.list("xi_ratios")?;
        // template validated with a representative point
        let template = RunConfig::from_key_values(kv, Some((1.0, 1e-3)))?;
        let workers = kv.get("workers")?.unwrap_or(1usize).max(1);
        let spec = Self {
            detuning_ratios,
            xi_ratios,
            template,
            workers,
        };
        let mut hashes = std::collections::BTreeSet::new();
        for job in spec.jobs() {
            job.validate()?;
            if !hashes.insert(job.config_hash()) {
                return Err(Error::Config(format!(
                    "duplicate sweep point detuning_ratio={}, xi_ratio={}",
                    job.params.detuning_ratio, job.params.xi_ratio
                )));
            }
        }
        Ok(spec)
    }

    /// Cartesian product ordered by (ξ/Ω, Δ/Ω) as listed.
    pub fn jobs(&self) -> Vec<RunConfig> {
        let mut jobs = Vec::with_capacity(self.detuning_ratios.len() * self.xi_ratios.len());
        for &xi in &self.xi_ratios {
            for &d in &self.detuning_ratios {
                let mut job = self.template.clone();
                job.params.detuning_ratio = d;
                job.params.xi_ratio = xi;
                jobs.push(job);
            }
        }
        jobs
    }
}
