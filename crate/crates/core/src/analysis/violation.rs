//! Test of the classical bound Γ(δ) ≤ Γ(0) on scans or correlation maps.

use std::fmt::Write as _;

use thiserror::Error;

use super::fit::fit_fringe_points;
use crate::montecarlo::ScanResult;
use crate::wave::CorrelationMap;

pub const DEFAULT_THRESHOLD: f64 = 3.0;

/// Half-width of the central region used for maps, metres.
pub const CENTRAL_HALF_WIDTH: f64 = 1.5e-3;

/// Rows with |x₁ − x₂| below this are counted as δ = 0, metres.
const SAME_POSITION: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ViolationError {
    #[error("no δ = 0 (x1 = x2) sample in the data")]
    MissingZeroDelta,
    #[error("no δ ≠ 0 sample in the data")]
    MissingOffZero,
    #[error("no input data")]
    Empty,
}

/// Value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationReport {
    pub gamma_zero: Estimate,
    pub gamma_delta_max: Estimate,
    /// Separation x₁ − x₂ at which `gamma_delta_max` was taken.
    pub delta_max: f64,
    pub significance: f64,
    pub threshold: f64,
    pub violated: bool,
}

impl ViolationReport {
    fn new(gamma_zero: Estimate, gamma_delta_max: Estimate, delta_max: f64, threshold: f64) -> Self {
        let significance = significance(&gamma_zero, &gamma_delta_max);
        Self {
            gamma_zero,
            gamma_delta_max,
            delta_max,
            significance,
            threshold,
            violated: significance > threshold,
        }
    }

    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "gamma_zero = {}", self.gamma_zero.value);
        let _ = writeln!(s, "gamma_zero_stderr = {}", self.gamma_zero.stderr);
        let _ = writeln!(s, "gamma_delta_max = {}", self.gamma_delta_max.value);
        let _ = writeln!(s, "gamma_delta_max_stderr = {}", self.gamma_delta_max.stderr);
        let _ = writeln!(s, "delta_max = {}", self.delta_max);
        let _ = writeln!(s, "significance = {}", self.significance);
        let _ = writeln!(s, "threshold = {}", self.threshold);
        let _ = writeln!(s, "violated = {}", self.violated);
        s
    }

    /// One machine-readable line.
    pub fn verdict_line(&self) -> String {
        format!(
            "verdict violated={} significance={} threshold={}",
            self.violated, self.significance, self.threshold
        )
    }
}

/// `(Γδ − Γ0)/√(se₀² + se_δ²)`. With zero combined error the excess is
/// reported as +∞ when strictly positive and 0 otherwise.
pub fn significance(zero: &Estimate, off: &Estimate) -> f64 {
    let excess = off.value - zero.value;
    let se = zero.stderr.hypot(off.stderr);
    if se > 0.0 {
        return excess / se;
    }
    let scale = zero.value.abs().max(off.value.abs());
    if excess > 1e-12 * scale {
        f64::INFINITY
    } else {
        0.0
    }
}

pub enum ViolationInput<'a> {
    /// Counting scans; `period` seeds the fringe fits that locate maxima.
    Scans { scans: &'a [ScanResult], period: f64 },
    Map(&'a CorrelationMap),
}

pub fn schwarz_report(input: ViolationInput<'_>, threshold: f64) -> Result<ViolationReport, ViolationError> {
    match input {
        ViolationInput::Scans { scans, period } => scan_report(scans, period, threshold),
        ViolationInput::Map(map) => map_report(map, threshold),
    }
}

/// Γ(0) pools every x₁ = x₂ row (as a rate, expressed per the first scan's
/// dwell). Γ(δ_max) is the highest raw count among the rows nearest the
/// fitted fringe maxima; without a usable fit, the highest off-zero count.
fn scan_report(scans: &[ScanResult], period: f64, threshold: f64) -> Result<ViolationReport, ViolationError> {
    let reference = scans.first().ok_or(ViolationError::Empty)?.dwell_time();
    let (mut zero_counts, mut zero_time) = (0.0, 0.0);
    for scan in scans {
        for r in scan.rows() {
            if (r.x1 - r.x2).abs() <= SAME_POSITION {
                zero_counts += r.coincidences as f64;
                zero_time += scan.dwell_time();
            }
        }
    }
    if zero_time == 0.0 {
        return Err(ViolationError::MissingZeroDelta);
    }

    // (count, dwell, delta) of candidate bins
    let mut fitted: Vec<(f64, f64, f64)> = Vec::new();
    let mut any_off: Vec<(f64, f64, f64)> = Vec::new();
    for scan in scans {
        let rows = scan.rows();
        let xs = scan.scanned();
        let off: Vec<usize> = (0..rows.len())
            .filter(|&i| (rows[i].x1 - rows[i].x2).abs() > SAME_POSITION)
            .collect();
        let bin = |i: usize| (rows[i].coincidences as f64, scan.dwell_time(), rows[i].x1 - rows[i].x2);
        any_off.extend(off.iter().map(|&i| bin(i)));
        if off.is_empty() {
            continue;
        }
        let Ok(fit) = fit_fringe_points(&xs, &scan.coincidences(), period) else {
            continue;
        };
        if !fit.period_identifiable || fit.amplitude <= 0.0 {
            continue;
        }
        let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        for peak in fit.maxima_in(lo, hi) {
            let nearest = off
                .iter()
                .copied()
                .min_by(|&a, &b| (xs[a] - peak).abs().total_cmp(&(xs[b] - peak).abs()));
            if let Some(i) = nearest {
                fitted.push(bin(i));
            }
        }
    }
    let candidates = if fitted.is_empty() { &any_off } else { &fitted };
    let &(count, dwell, delta) = candidates
        .iter()
        .max_by(|a, b| (a.0 / a.1).total_cmp(&(b.0 / b.1)))
        .ok_or(ViolationError::MissingOffZero)?;

    let zero = Estimate {
        value: zero_counts / zero_time * reference,
        stderr: zero_counts.sqrt() / zero_time * reference,
    };
    let off = Estimate {
        value: count / dwell * reference,
        stderr: count.sqrt() / dwell * reference,
    };
    Ok(ViolationReport::new(zero, off, delta, threshold))
}

/// Homogenizes over the central region by cyclic lags,
/// `Γ̄(ℓ) = mean_j Γ(x_j, x_{(j+ℓ) mod n})`, and compares the largest
/// off-zero lag with ℓ = 0. The lag standard error is the mean per-cell
/// standard error.
fn map_report(map: &CorrelationMap, threshold: f64) -> Result<ViolationReport, ViolationError> {
    let xs = map.grid().points();
    let idx: Vec<usize> = (0..xs.len())
        .filter(|&i| xs[i].abs() <= CENTRAL_HALF_WIDTH * (1.0 + 1e-9))
        .collect();
    let n = idx.len();
    if n == 0 {
        return Err(ViolationError::MissingZeroDelta);
    }
    if n < 2 {
        return Err(ViolationError::MissingOffZero);
    }
    let v = map.values();
    let se = map.stderr();
    let lag = |l: usize| {
        let (mut sum, mut err) = (0.0, 0.0);
        for j in 0..n {
            let cell = [idx[j], idx[(j + l) % n]];
            sum += v[cell];
            err += se.map_or(0.0, |s| s[cell]);
        }
        Estimate {
            value: sum / n as f64,
            stderr: err / n as f64,
        }
    };
    let zero = lag(0);
    let (best, off) = (1..n)
        .map(|l| (l, lag(l)))
        .max_by(|a, b| a.1.value.total_cmp(&b.1.value))
        .expect("n ≥ 2");
    let shift = if best <= n / 2 { best as f64 } else { best as f64 - n as f64 };
    Ok(ViolationReport::new(zero, off, -shift * map.grid().step(), threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Grid1D;
    use crate::montecarlo::{ScanMode, ScanRow};

    fn scan(mode: ScanMode, counts: impl Fn(f64) -> u64) -> ScanResult {
        let rows = crate::montecarlo::figure_positions()
            .into_iter()
            .map(|p| {
                let (x1, x2) = mode.detectors(p, 0.0);
                ScanRow {
                    x1,
                    x2,
                    singles1: 1000,
                    singles2: 1000,
                    coincidences: counts(p),
                }
            })
            .collect();
        ScanResult::from_rows(mode, 0.0, 1000.0, 1, rows).unwrap()
    }

    #[test]
    fn constant_scan_not_violated() {
        let s = [scan(ScanMode::Scan1Fix2, |_| 100)];
        let r = schwarz_report(ViolationInput::Scans { scans: &s, period: 1.2285e-3 }, 3.0).unwrap();
        assert!(r.significance.abs() < 1e-12);
        assert!(!r.violated);
    }

    #[test]
    fn antibunched_scan_violated() {
        let s = [scan(ScanMode::Scan1Fix2, |x| {
            (20.0 + 240.0 * (1.0 - (std::f64::consts::TAU * x / 1.2285e-3).cos())).round() as u64
        })];
        let r = schwarz_report(ViolationInput::Scans { scans: &s, period: 1.2285e-3 }, 3.0).unwrap();
        assert_eq!(r.gamma_zero.value, 20.0);
        assert!(r.gamma_delta_max.value > 490.0);
        assert!(r.significance > 5.0 && r.violated);
        assert!((r.delta_max.abs() - 0.6e-3).abs() < 0.06e-3);
    }

    #[test]
    fn missing_zero_delta() {
        let rows: Vec<ScanRow> = (1..=10)
            .map(|i| ScanRow {
                x1: i as f64 * 1e-4,
                x2: 0.0,
                singles1: 0,
                singles2: 0,
                coincidences: 5,
            })
            .collect();
        let s = [ScanResult::from_rows(ScanMode::Scan1Fix2, 0.0, 1.0, 0, rows).unwrap()];
        let r = schwarz_report(ViolationInput::Scans { scans: &s, period: 1.2285e-3 }, 3.0);
        assert_eq!(r, Err(ViolationError::MissingZeroDelta));
        let joint = [scan(ScanMode::JointEqual, |_| 7)];
        let r = schwarz_report(ViolationInput::Scans { scans: &joint, period: 1.2285e-3 }, 3.0);
        assert_eq!(r, Err(ViolationError::MissingOffZero));
        assert_eq!(
            schwarz_report(ViolationInput::Scans { scans: &[], period: 1.0 }, 3.0),
            Err(ViolationError::Empty)
        );
    }

    #[test]
    fn deterministic_maps() {
        let grid = Grid1D::new(-1.6e-3, 1.6e-3, 161).unwrap();
        let anti = CorrelationMap::from_fn(grid, |a, b| 1.0 - (std::f64::consts::TAU * (b - a) / 1.2285e-3).cos()).unwrap();
        let r = schwarz_report(ViolationInput::Map(&anti), 3.0).unwrap();
        assert!(r.violated && r.significance.is_infinite());
        let bunched = CorrelationMap::from_fn(grid, |a, b| 1.0 + (std::f64::consts::TAU * (b - a) / 1.2285e-3).cos()).unwrap();
        let r = schwarz_report(ViolationInput::Map(&bunched), 3.0).unwrap();
        assert!(!r.violated);
        assert_eq!(r.significance, 0.0);
        let flat = CorrelationMap::from_fn(grid, |_, _| 2.0).unwrap();
        assert_eq!(schwarz_report(ViolationInput::Map(&flat), 3.0).unwrap().significance, 0.0);
    }

    #[test]
    fn serializes() {
        let r = ViolationReport::new(
            Estimate { value: 20.0, stderr: 4.0 },
            Estimate { value: 500.0, stderr: 22.0 },
            0.6e-3,
            3.0,
        );
        let kv = r.to_key_value();
        assert!(kv.contains("violated = true"));
        assert!(r.verdict_line().starts_with("verdict violated=true"));
    }
}
