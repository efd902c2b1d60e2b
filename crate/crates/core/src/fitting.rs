//! Dephasing-rate extraction from the maxima of |ρ_RG|(t).

use std::io::Write;

use crate::error::{Error, Result};
use crate::observables::CoherenceSeries;

/// r² threshold separating exponential decays from "hollow" ones.
pub const EXPONENTIAL_R2: f64 = 0.99;
/// Peaks below this multiple of the late-time mean of |ρ_RG| are treated as plateau.
pub const FLOOR_FACTOR: f64 = 1.05;
/// Fraction of the series, counted from its end, that defines the plateau level.
pub const FLOOR_TAIL_FRACTION: f64 = 0.1;
pub const MIN_PEAKS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
    /// Plateau threshold that terminated the peak list.
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub gamma_perp: f64,
    /// Fitted value of the envelope at t = 0.
    pub amplitude: f64,
    pub r_squared: f64,
    /// False marks a "hollow" point whose decay is not a clean exponential.
    pub exponential_flag: bool,
    pub peaks: Vec<Peak>,
    pub n_peaks: usize,
    pub floor_used: Option<f64>,
}

/// Vertex of the parabola through three points, falling back to the middle one.
fn parabola_vertex(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> (f64, f64) {
    let (t0, v0) = p0;
    let (t1, v1) = p1;
    let (t2, v2) = p2;
    // divided differences around t1
    let d01 = (v1 - v0) / (t1 - t0);
    let d12 = (v2 - v1) / (t2 - t1);
    let curv = (d12 - d01) / (t2 - t0);
    if !(curv < 0.0) {
        return p1;
    }
    // v(t) = v1 + b (t − t1) + curv (t − t1)²
    let b = d01 + curv * (t1 - t0);
    let tv = t1 - b / (2.0 * curv);
    let tv = tv.clamp(t0, t2);
    (tv, v1 + b * (tv - t1) + curv * (tv - t1).powi(2))
}

/// Local maxima of |ρ_RG|, refined by quadratic interpolation and cut at the plateau floor.
pub fn find_peaks(series: &CoherenceSeries) -> Result<PeakSet> {
    let v = series.abs_rho();
    let t = &series.times;
    let n = v.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "series has only {n} samples"
        )));
    }
    let tail = ((FLOOR_TAIL_FRACTION * n as f64).ceil() as usize).clamp(1, n);
    let floor = FLOOR_FACTOR * v[n - tail..].iter().sum::<f64>() / tail as f64;
    let mut peaks = Vec::new();
    for i in 1..n - 1 {
        if v[i] > v[i - 1] && v[i] >= v[i + 1] {
            let (tp, vp) =
                parabola_vertex((t[i - 1], v[i - 1]), (t[i], v[i]), (t[i + 1], v[i + 1]));
            if vp < floor {
                break;
            }
            peaks.push(Peak { t: tp, value: vp });
        }
    }
    if peaks.len() < MIN_PEAKS {
        return Err(Error::InsufficientData(format!(
            "found {} maxima above the floor {floor:.4e}; at least {MIN_PEAKS} are needed",
            peaks.len()
        )));
    }
    Ok(PeakSet { peaks, floor })
}

/// Least-squares fit of ln(value) = ln(amplitude) − γ t.
pub fn fit_exponential(peaks: &[Peak]) -> Result<FitResult> {
    if peaks.len() < MIN_PEAKS {
        return Err(Error::InsufficientData(format!(
            "{} peaks given, at least {MIN_PEAKS} needed",
            peaks.len()
        )));
    }
    if let Some(p) = peaks.iter().find(|p| !(p.value > 0.0)) {
        return Err(Error::Domain(format!(
            "peak value {} at t = {} is not positive",
            p.value, p.t
        )));
    }
    let n = peaks.len() as f64;
    let ys: Vec<f64> = peaks.iter().map(|p| p.value.ln()).collect();
    let mt = peaks.iter().map(|p| p.t).sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let stt: f64 = peaks.iter().map(|p| (p.t - mt).powi(2)).sum();
    if !(stt > 0.0) {
        return Err(Error::InsufficientData("all peaks share one time".into()));
    }
    let sty: f64 = peaks
        .iter()
        .zip(&ys)
        .map(|(p, y)| (p.t - mt) * (y - my))
        .sum();
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = peaks
        .iter()
        .zip(&ys)
        .map(|(p, y)| (y - intercept - slope * p.t).powi(2))
        .sum();
    // zero variance in ln(value): a flat envelope is a perfect zero-slope fit
    let r_squared = if ss_tot <= f64::EPSILON * my.abs().max(1.0) * n {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(FitResult {
        gamma_perp: -slope,
        amplitude: intercept.exp(),
        r_squared,
        exponential_flag: r_squared >= EXPONENTIAL_R2,
        peaks: peaks.to_vec(),
        n_peaks: peaks.len(),
        floor_used: None,
    })
}

/// Peak search followed by the exponential fit.
pub fn fit_series(series: &CoherenceSeries) -> Result<FitResult> {
    let set = find_peaks(series)?;
    let mut fit = fit_exponential(&set.peaks)?;
    fit.floor_used = Some(set.floor);
    Ok(fit)
}

pub const FIT_HEADER: &str = "gamma_perp,amplitude,r_squared,exponential_flag,n_peaks,floor_used";

impl FitResult {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{FIT_HEADER}")?;
        let floor = self
            .floor_used
            .map_or(String::new(), |f| format!("{f:.16e}"));
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{},{},{}",
            self.gamma_perp,
            self.amplitude,
            self.r_squared,
            self.exponential_flag,
            self.n_peaks,
            floor
        )
    }

    pub fn write_peaks_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,value")?;
        for p in &self.peaks {
            writeln!(out, "{:.16e},{:.16e}", p.t, p.value)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn series_from(f: impl Fn(f64) -> f64, dt: f64, t_end: f64) -> CoherenceSeries {
        let mut s = CoherenceSeries::default();
        let n = (t_end / dt).round() as usize;
        for i in 0..=n {
            let t = i as f64 * dt;
            s.push(t, Complex64::new(0.0, f(t)), 0.5, 0.5, 0.0);
        }
        s
    }

    #[test]
    fn free_rabi_peaks() {
        let s = series_from(|t| t.sin() * t.cos(), 0.01, 20.0);
        let set = find_peaks(&s).unwrap();
        assert_eq!(set.peaks.len(), 13);
        for (n, p) in set.peaks.iter().enumerate() {
            let want = PI / 4.0 + n as f64 * PI / 2.0;
            assert!((p.t - want).abs() < 1e-4, "peak {n} at {}", p.t);
            assert!((p.value - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_series_has_no_peaks() {
        let s = series_from(|_| 0.3, 0.01, 10.0);
        assert!(matches!(find_peaks(&s), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn sinusoid_peak_positions() {
        let h = PI / 50.0;
        // offset the phase so that maxima fall between samples
        let s = series_from(|t| 0.8 * (t + 0.37 * h).sin().abs(), h, 30.0);
        let set = find_peaks(&s).unwrap();
        for p in &set.peaks {
            let n = ((p.t + 0.37 * h - PI / 2.0) / PI).round();
            let want = PI / 2.0 + n * PI - 0.37 * h;
            assert!((p.t - want).abs() < 1e-4, "{} vs {want}", p.t);
        }
    }

    #[test]
    fn plateau_cuts_peak_list() {
        // decaying oscillation that settles onto a constant offset
        let s = series_from(
            |t| 0.1 + 0.4 * (-0.5 * t).exp() * (2.0 * t).sin().abs(),
            0.01,
            40.0,
        );
        let set = find_peaks(&s).unwrap();
        assert!(set.peaks.iter().all(|p| p.value >= set.floor));
        assert!(set.peaks.len() < 25);
    }

    #[test]
    fn exact_exponential() {
        let peaks: Vec<Peak> = (1..=10)
            .map(|i| Peak {
                t: i as f64,
                value: 0.5 * (-0.1 * i as f64).exp(),
            })
            .collect();
        let fit = fit_exponential(&peaks).unwrap();
        assert!((fit.gamma_perp - 0.1).abs() < 1e-10);
        assert!((fit.amplitude - 0.5).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit.exponential_flag);
        assert_eq!(fit.n_peaks, 10);
    }

    #[test]
    fn constant_peaks() {
        let peaks: Vec<Peak> = (0..5)
            .map(|i| Peak {
                t: i as f64,
                value: 0.5,
            })
            .collect();
        let fit = fit_exponential(&peaks).unwrap();
        assert_eq!(fit.gamma_perp, 0.0);
        assert_eq!(fit.r_squared, 1.0);
        assert!(fit.exponential_flag);
    }

    #[test]
    fn fit_errors() {
        let two = [Peak { t: 0.0, value: 1.0 }, Peak { t: 1.0, value: 0.5 }];
        assert!(matches!(
            fit_exponential(&two),
            Err(Error::InsufficientData(_))
        ));
        let bad = [
            Peak { t: 0.0, value: 1.0 },
            Peak { t: 1.0, value: 0.0 },
            Peak { t: 2.0, value: 0.5 },
        ];
        assert!(matches!(fit_exponential(&bad), Err(Error::Domain(_))));
    }

    #[test]
    fn power_law_decay_is_hollow() {
        let peaks: Vec<Peak> = (0..40)
            .map(|i| {
                let t = 0.8 + i as f64;
                Peak {
                    t,
                    value: 0.5 * (1.0 + (0.1 * t).powi(2)).powf(-0.25),
                }
            })
            .collect();
        assert!(!fit_exponential(&peaks).unwrap().exponential_flag);
    }

    #[test]
    fn csv_reports() {
        let peaks: Vec<Peak> = (1..=4)
            .map(|i| Peak {
                t: i as f64,
                value: (-0.2 * i as f64).exp(),
            })
            .collect();
        let fit = fit_exponential(&peaks).unwrap();
        let mut buf = Vec::new();
        fit.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(FIT_HEADER));
        assert!(text.lines().nth(1).unwrap().contains(",true,4,"));
        let mut buf = Vec::new();
        fit.write_peaks_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 5);
    }

    proptest! {
        #[test]
        fn rescaling_and_time_shift_invariance(
            gamma in 0.001f64..0.5, scale in 0.01f64..100.0, shift in -50.0f64..50.0,
            noise in proptest::collection::vec(-1e-3f64..1e-3, 12)
        ) {
            let peaks: Vec<Peak> = noise
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    let t = 0.8 + 1.6 * i as f64;
                    Peak { t, value: 0.5 * (-gamma * t).exp() * (1.0 + e) }
                })
                .collect();
            let base = fit_exponential(&peaks).unwrap();
            let scaled: Vec<Peak> = peaks.iter().map(|p| Peak { t: p.t, value: p.value * scale }).collect();
            let shifted: Vec<Peak> = peaks.iter().map(|p| Peak { t: p.t + shift, value: p.value }).collect();
            let a = fit_exponential(&scaled).unwrap();
            let b = fit_exponential(&shifted).unwrap();
            prop_assert!((a.gamma_perp - base.gamma_perp).abs() <= 1e-9 * (1.0 + base.gamma_perp.abs()));
            prop_assert!((a.amplitude / base.amplitude / scale - 1.0).abs() < 1e-9);
            prop_assert!((b.gamma_perp - base.gamma_perp).abs() <= 1e-9 * (1.0 + base.gamma_perp.abs()));
        }
    }
}
