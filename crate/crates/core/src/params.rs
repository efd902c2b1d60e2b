//! Dimensionless model parameters and closed-form derived quantities.
//!
//! Internal units: time in 1/Ω, length in x_f, energy in Ω (ħ = 1).

use crate::error::{Error, Result};

/// Width ratio above which the perturbative picture σ ≪ x_f is considered doubtful.
pub const SIGMA_WARN_RATIO: f64 = 0.2;

/// Default potential exponent (van-der-Waals, same Rydberg state on both atoms).
pub const DEFAULT_NU: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Dimensional Rabi frequency. Only used to convert `c_nu` into a length; internally Ω = 1.
    pub rabi: f64,
    /// Δ/Ω.
    pub detuning_ratio: f64,
    /// Potential exponent ν.
    pub nu: u32,
    /// σ/x_f.
    pub sigma_ratio: f64,
    /// ξ/Ω with ξ = 1/(2 m x_f²).
    pub xi_ratio: f64,
    /// Raw potential coefficient in the same units as `rabi`.
    pub c_nu: Option<f64>,
    /// Coupling-only test mode: the Rydberg potential is switched off.
    pub free_rabi: bool,
}

impl ModelParams {
    pub fn new(detuning_ratio: f64, sigma_ratio: f64, xi_ratio: f64) -> Self {
        Self {
            rabi: 1.0,
            detuning_ratio,
            nu: DEFAULT_NU,
            sigma_ratio,
            xi_ratio,
            c_nu: None,
            free_rabi: false,
        }
    }

    pub fn with_nu(mut self, nu: u32) -> Self {
        self.nu = nu;
        self
    }

    pub fn with_free_rabi(mut self, free_rabi: bool) -> Self {
        self.free_rabi = free_rabi;
        self
    }

    /// Type invariants shared by every use of the parameters.
    pub fn validate(&self) -> Result<()> {
        if self.nu < 1 {
            return Err(Error::Domain("nu must be >= 1".into()));
        }
        if !(self.sigma_ratio > 0.0 && self.sigma_ratio < 1.0) {
            return Err(Error::Domain(format!(
                "sigma_ratio must lie in (0, 1), got {}",
                self.sigma_ratio
            )));
        }
        if !(self.xi_ratio.is_finite() && self.xi_ratio >= 0.0) {
            return Err(Error::Domain(format!(
                "xi_ratio must be finite and non-negative, got {}",
                self.xi_ratio
            )));
        }
        if !self.detuning_ratio.is_finite() {
            return Err(Error::Domain("detuning_ratio must be finite".into()));
        }
        if !(self.rabi.is_finite() && self.rabi > 0.0) {
            return Err(Error::Domain("rabi must be positive".into()));
        }
        if let Some(c) = self.c_nu {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Domain(format!("c_nu must be positive, got {c}")));
            }
        }
        Ok(())
    }

    /// Stricter checks for a propagation in the facilitation regime.
    pub fn validate_for_run(&self) -> Result<()> {
        self.validate()?;
        if !(self.xi_ratio > 0.0) {
            return Err(Error::Domain(
                "xi_ratio must be > 0 for a simulation".into(),
            ));
        }
        if !self.free_rabi && !(self.detuning_ratio > 0.0) {
            return Err(Error::Domain(format!(
                "detuning_ratio must be > 0 outside free-Rabi mode (x_f is undefined otherwise), got {}",
                self.detuning_ratio
            )));
        }
        Ok(())
    }

    /// Rydberg-state potential U_ν(x)/Ω at `x` (units of x_f), without domain checks.
    #[inline]
    pub fn potential_unchecked(&self, x: f64) -> f64 {
        if self.free_rabi {
            0.0
        } else {
            self.detuning_ratio * (x.powi(-(self.nu as i32)) - 1.0)
        }
    }

    /// Facilitation distance in dimensional units, when `c_nu` is given.
    pub fn facilitation_distance(&self) -> Option<Result<f64>> {
        self.c_nu
            .map(|c| facilitation_distance(c, self.detuning_ratio * self.rabi, self.nu))
    }

    /// Width of a free Gaussian packet at time `t` (units of x_f).
    pub fn free_width(&self, t: f64) -> f64 {
        let s2 = self.sigma_ratio * self.sigma_ratio;
        self.sigma_ratio * (1.0 + (2.0 * self.xi_ratio * t / s2).powi(2)).sqrt()
    }

    /// Heuristic validity warnings for the perturbative comparison over `[0, t_final]`.
    pub fn validity_warnings(&self, t_final: f64) -> Vec<String> {
        let mut out = Vec::new();
        if self.sigma_ratio > SIGMA_WARN_RATIO {
            out.push(format!(
                "sigma_ratio = {} exceeds {SIGMA_WARN_RATIO}; sigma << x_f is doubtful",
                self.sigma_ratio
            ));
        }
        if !self.free_rabi {
            // |y| << |Ω/(νΔ)| with the packet width as the scale of |y|
            let spread = self.free_width(t_final);
            let bound = 1.0 / (self.nu as f64 * self.detuning_ratio.abs());
            if spread >= bound {
                out.push(format!(
                    "linearisation bound |y| << 1/(nu*Delta/Omega) = {bound:.4} is violated: packet width reaches {spread:.4} by t = {t_final}"
                ));
            }
        }
        out
    }
}

/// x_f = (c_ν/Δ)^(1/ν) for dimensional inputs.
pub fn facilitation_distance(c_nu: f64, detuning: f64, nu: u32) -> Result<f64> {
    if !(c_nu > 0.0) || !c_nu.is_finite() {
        return Err(Error::Domain(format!("c_nu must be positive, got {c_nu}")));
    }
    if !(detuning > 0.0) || !detuning.is_finite() {
        return Err(Error::Domain(format!(
            "detuning must be positive, got {detuning}"
        )));
    }
    if nu < 1 {
        return Err(Error::Domain("nu must be >= 1".into()));
    }
    Ok((c_nu / detuning).powf(1.0 / nu as f64))
}

/// Dimensional potential c_ν/x^ν − Δ.
pub fn dimensional_potential(x: f64, c_nu: f64, detuning: f64, nu: u32) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("x must be positive, got {x}")));
    }
    Ok(c_nu / x.powi(nu as i32) - detuning)
}

/// U_ν(x)/Ω = (Δ/Ω)·((x_f/x)^ν − 1) with `x` in units of x_f.
pub fn potential(x: f64, params: &ModelParams) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!(
            "potential evaluated at x = {x}; the vdW singularity at the origin is excluded"
        )));
    }
    Ok(params.potential_unchecked(x))
}

/// Short-time dephasing rate γ⊥/Ω of the linearised model.
pub fn dephasing_rate(params: &ModelParams) -> f64 {
    let nu = params.nu as f64;
    let d = params.detuning_ratio;
    let s = params.sigma_ratio;
    let xi = params.xi_ratio;
    nu * nu / 8.0 * d * d * s * s * (1.0 + (xi / (s * s)).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn facilitation_distance_examples() {
        assert_eq!(facilitation_distance(1.0, 1.0, 6).unwrap(), 1.0);
        assert_relative_eq!(
            facilitation_distance(64.0, 1.0, 6).unwrap(),
            2.0,
            epsilon = 1e-15
        );
        assert!(facilitation_distance(-1.0, 1.0, 6).is_err());
        assert!(facilitation_distance(1.0, 0.0, 6).is_err());
        assert!(facilitation_distance(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn potential_examples() {
        let p = ModelParams::new(1.32, 0.05, 1.25e-3);
        assert_eq!(potential(1.0, &p).unwrap(), 0.0);
        assert_relative_eq!(potential(1e6, &p).unwrap(), -1.32, epsilon = 1e-12);
        assert_relative_eq!(potential(0.5, &p).unwrap(), 83.16, epsilon = 1e-12);
        assert!(potential(0.0, &p).is_err());
        assert!(potential(-1.0, &p).is_err());
        let free = p.with_free_rabi(true);
        assert_eq!(potential(0.5, &free).unwrap(), 0.0);
    }

    #[test]
    fn dephasing_rate_examples() {
        assert_eq!(dephasing_rate(&ModelParams::new(0.0, 0.05, 1.25e-3)), 0.0);
        assert_relative_eq!(
            dephasing_rate(&ModelParams::new(1.0, 0.05, 0.0)),
            0.01125,
            max_relative = 1e-14
        );
        // 4.5 * 1.7424 * 0.0025 * (1 + 160000 * 1.5625e-6)
        assert_relative_eq!(
            dephasing_rate(&ModelParams::new(1.32, 0.05, 1.25e-3)),
            0.0245025,
            max_relative = 1e-12
        );
    }

    #[test]
    fn validation() {
        assert!(ModelParams::new(1.0, 0.05, 1e-3).validate_for_run().is_ok());
        assert!(ModelParams::new(0.0, 0.05, 1e-3)
            .validate_for_run()
            .is_err());
        assert!(ModelParams::new(0.0, 0.05, 1e-3)
            .with_free_rabi(true)
            .validate_for_run()
            .is_ok());
        assert!(ModelParams::new(1.0, 1.5, 1e-3).validate().is_err());
        assert!(ModelParams::new(1.0, 0.05, 1e-3)
            .with_nu(0)
            .validate()
            .is_err());
    }

    #[test]
    fn warnings() {
        let p = ModelParams::new(1.0, 0.3, 1e-6);
        assert!(p
            .validity_warnings(1.0)
            .iter()
            .any(|w| w.contains("sigma_ratio")));
        let p = ModelParams::new(1.0, 0.01, 1e-7);
        assert!(p.validity_warnings(1.0).is_empty());
        let p = ModelParams::new(30.0, 0.05, 1e-5);
        assert!(!p.validity_warnings(1.0).is_empty());
    }

    #[test]
    fn infinite_mass_limit() {
        let p = ModelParams::new(2.0, 0.05, 0.0);
        assert_relative_eq!(
            dephasing_rate(&p),
            36.0 / 8.0 * 4.0 * 0.0025,
            max_relative = 1e-14
        );
    }

    proptest! {
        #[test]
        fn potential_vanishes_at_facilitation_distance(
            c in 1e-3f64..1e6, d in 1e-3f64..1e3, nu in 1u32..12
        ) {
            let xf = facilitation_distance(c, d, nu).unwrap();
            let v = dimensional_potential(xf, c, d, nu).unwrap();
            prop_assert!(v.abs() <= 1e-12 * d, "residual {v} for x_f = {xf}");
        }

        #[test]
        fn rate_is_even_in_detuning(d in -10.0f64..10.0, s in 0.01f64..0.5, xi in 0.0f64..1e-2) {
            let a = dephasing_rate(&ModelParams::new(d, s, xi));
            let b = dephasing_rate(&ModelParams::new(-d, s, xi));
            prop_assert_eq!(a, b);
        }

        #[test]
        fn rate_is_monotone(d in 0.01f64..10.0, s in 0.01f64..0.5, xi in 1e-6f64..1e-2, nu in 1u32..11) {
            let base = ModelParams::new(d, s, xi).with_nu(nu);
            let r = dephasing_rate(&base);
            prop_assert!(dephasing_rate(&ModelParams::new(d * 1.01, s, xi).with_nu(nu)) > r);
            prop_assert!(dephasing_rate(&base.with_nu(nu + 1)) > r);
        }
    }
}
