//! Weighted Levenberg–Marquardt fit of `B + A[1 − cos(2π(x − x₀)/Λ)]`.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use nalgebra::{Matrix4, Vector4};
use thiserror::Error;

use crate::geometry::ExperimentGeometry;
use crate::montecarlo::ScanResult;

pub const MIN_POINTS: usize = 8;
pub const MAX_ITERATIONS: usize = 500;
const TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least {MIN_POINTS} points, got {0}")]
    TooFewPoints(usize),
    #[error("x and y lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("scan spans {span:e} m, less than one fringe period ({period:e} m)")]
    InsufficientSpan { span: f64, period: f64 },
    #[error("non-finite input value")]
    NonFinite,
    #[error("fit did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("normal equations are singular")]
    Singular,
}

/// Standard errors of the four fitted parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamErrors {
    pub background: f64,
    pub amplitude: f64,
    pub period: f64,
    pub phase_center: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub background: f64,
    pub amplitude: f64,
    pub period: f64,
    /// Position of the fringe minimum nearest the lowest data point.
    pub phase_center: f64,
    pub uncertainties: ParamErrors,
    pub chi_square: f64,
    pub dof: usize,
    pub visibility: f64,
    pub iterations: usize,
    /// False when the data carry no fringe (constant counts), in which case
    /// `period` and `phase_center` echo the initial guess.
    pub period_identifiable: bool,
}

impl FitResult {
    pub fn model(&self, x: f64) -> f64 {
        self.background + self.amplitude * (1.0 - (TAU * (x - self.phase_center) / self.period).cos())
    }

    /// Positions of fringe maxima within `[lo, hi]`.
    pub fn maxima_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let first = ((lo - self.phase_center) / self.period - 0.5).ceil() as i64;
        let last = ((hi - self.phase_center) / self.period - 0.5).floor() as i64;
        (first..=last)
            .map(|m| self.phase_center + (m as f64 + 0.5) * self.period)
            .collect()
    }

    /// `key = value` lines, stable across runs.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let u = &self.uncertainties;
        let rows: [(&str, f64); 10] = [
            ("background", self.background),
            ("background_stderr", u.background),
            ("amplitude", self.amplitude),
            ("amplitude_stderr", u.amplitude),
            ("period", self.period),
            ("period_stderr", u.period),
            ("phase_center", self.phase_center),
            ("phase_center_stderr", u.phase_center),
            ("chi_square", self.chi_square),
            ("visibility", self.visibility),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "dof = {}", self.dof);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "period_identifiable = {}", self.period_identifiable);
        if !self.period_identifiable {
            let _ = writeln!(s, "note = unidentifiable period (no fringe in the data)");
        }
        s
    }
}

/// A/(A+B) clipped to [0, 1].
pub fn visibility(fit: &FitResult) -> f64 {
    visibility_of(fit.amplitude, fit.background)
}

pub(crate) fn visibility_of(amplitude: f64, background: f64) -> f64 {
    let total = amplitude + background;
    if amplitude <= 0.0 || total <= 0.0 {
        return 0.0;
    }
    (amplitude / total).clamp(0.0, 1.0)
}

/// Fits coincidences against the scanned coordinate, starting from the
/// geometric fringe period.
pub fn fit_fringe(scan: &ScanResult, g: &ExperimentGeometry) -> Result<FitResult, FitError> {
    fit_fringe_points(&scan.scanned(), &scan.coincidences(), g.fringe_period())
}

/// Weighted least squares with weights `1/max(y, 1)`.
///
/// Internally x is measured in units of `initial_period`, so all four
/// parameters are of order one or of order the counts.
pub fn fit_fringe_points(x: &[f64], y: &[f64], initial_period: f64) -> Result<FitResult, FitError> {
    if x.len() != y.len() {
        return Err(FitError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < MIN_POINTS {
        return Err(FitError::TooFewPoints(x.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) || !(initial_period > 0.0 && initial_period.is_finite()) {
        return Err(FitError::NonFinite);
    }
    let (xmin, xmax) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if xmax - xmin < initial_period {
        return Err(FitError::InsufficientSpan {
            span: xmax - xmin,
            period: initial_period,
        });
    }

    let scale = initial_period;
    let u: Vec<f64> = x.iter().map(|v| v / scale).collect();
    let w: Vec<f64> = y.iter().map(|v| 1.0 / v.max(1.0)).collect();
    let (ymin, ymax) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let argmin = (0..y.len()).fold(0, |best, i| if y[i] < y[best] { i } else { best });

    if ymax - ymin <= 1e-12 * ymax.abs().max(1.0) {
        return Ok(constant_fit(x, y, &w, initial_period, x[argmin]));
    }

    let size = Vector4::new(ymax.abs(), ymax.abs(), 1.0, 1.0);
    let mut p = Vector4::new(ymin, 0.5 * (ymax - ymin), 1.0, u[argmin]);
    // Marquardt scaling with gain-ratio damping updates (Nielsen)
    let mut lambda = 1e-3;
    let mut nu = 2.0;
    let mut state = evaluate(&p, &u, y, &w);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS && !converged {
        iterations += 1;
        let (jtj, jtr, chi2) = state;
        let mut damped = jtj;
        for i in 0..4 {
            damped[(i, i)] += lambda * jtj[(i, i)].max(1e-300);
        }
        let Some(step) = damped.cholesky().map(|c| c.solve(&jtr)) else {
            lambda *= nu;
            nu *= 2.0;
            continue;
        };
        let small = (0..4).all(|i| step[i].abs() <= TOLERANCE * (p[i].abs() + size[i]));
        let trial = p + step;
        let next = evaluate(&trial, &u, y, &w);
        let predicted = 2.0 * step.dot(&jtr) - (step.transpose() * jtj * step)[(0, 0)];
        let gain = if predicted > 0.0 { (chi2 - next.2) / predicted } else { -1.0 };
        if next.2 <= chi2 && (gain > 0.0 || small) {
            p = trial;
            state = next;
            lambda *= (1.0 - (2.0 * gain - 1.0).powi(3)).max(1.0 / 3.0);
            nu = 2.0;
        } else {
            lambda *= nu;
            nu *= 2.0;
        }
        // a negligible proposed step means the minimum is reached to rounding
        converged = small;
        if lambda > 1e16 {
            break;
        }
    }
    if !converged {
        return Err(FitError::NoConvergence(iterations));
    }
    if p[2] <= 0.0 {
        return Err(FitError::Singular);
    }

    // canonical form: A ≥ 0, x₀ the minimum nearest the lowest point
    if p[1] < 0.0 {
        p[3] += 0.5 * p[2];
        p[0] += 2.0 * p[1];
        p[1] = -p[1];
    }
    p[3] += p[2] * ((u[argmin] - p[3]) / p[2]).round();

    let (jtj, _, chi2) = evaluate(&p, &u, y, &w);
    let cov = jtj.try_inverse().ok_or(FitError::Singular)?;
    let dof = x.len() - 4;
    let birge = (chi2 / dof as f64).max(1.0).sqrt();
    let se = |i: usize| cov[(i, i)].max(0.0).sqrt() * birge;

    Ok(FitResult {
        background: p[0],
        amplitude: p[1],
        period: p[2] * scale,
        phase_center: p[3] * scale,
        uncertainties: ParamErrors {
            background: se(0),
            amplitude: se(1),
            period: se(2) * scale,
            phase_center: se(3) * scale,
        },
        chi_square: chi2,
        dof,
        visibility: visibility_of(p[1], p[0]),
        iterations,
        period_identifiable: true,
    })
}

/// Returns (JᵀWJ, JᵀW r, χ²) at `p`.
fn evaluate(p: &Vector4<f64>, u: &[f64], y: &[f64], w: &[f64]) -> (Matrix4<f64>, Vector4<f64>, f64) {
    let (b, a, l, u0) = (p[0], p[1], p[2], p[3]);
    let mut jtj = Matrix4::zeros();
    let mut jtr = Vector4::zeros();
    let mut chi2 = 0.0;
    for i in 0..u.len() {
        let theta = TAU * (u[i] - u0) / l;
        let (s, c) = theta.sin_cos();
        let f = b + a * (1.0 - c);
        let r = y[i] - f;
        let j = Vector4::new(1.0, 1.0 - c, -a * s * theta / l, -a * s * 2.0 * PI / l);
        jtj += w[i] * j * j.transpose();
        jtr += w[i] * r * j;
        chi2 += w[i] * r * r;
    }
    (jtj, jtr, chi2)
}

fn constant_fit(x: &[f64], y: &[f64], w: &[f64], period: f64, x_low: f64) -> FitResult {
    let wsum: f64 = w.iter().sum();
    let b = y.iter().zip(w).map(|(v, wi)| v * wi).sum::<f64>() / wsum;
    let chi2 = y.iter().zip(w).map(|(v, wi)| wi * (v - b).powi(2)).sum();
    FitResult {
        background: b,
        amplitude: 0.0,
        period,
        phase_center: x_low,
        uncertainties: ParamErrors {
            background: (1.0 / wsum).sqrt(),
            amplitude: f64::INFINITY,
            period: f64::INFINITY,
            phase_center: f64::INFINITY,
        },
        chi_square: chi2,
        dof: x.len() - 4,
        visibility: 0.0,
        iterations: 0,
        period_identifiable: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(b: f64, a: f64, period: f64, x0: f64) -> (Vec<f64>, Vec<f64>) {
        let x: Vec<f64> = (-30..=30).map(|i| i as f64 * 50e-6).collect();
        let y = x.iter().map(|&v| b + a * (1.0 - (TAU * (v - x0) / period).cos())).collect();
        (x, y)
    }

    #[test]
    fn recovers_noiseless_parameters() {
        for &(b, a, period, x0) in &[
            (20.0, 240.0, 1.2285e-3, 0.0),
            (5.0, 100.0, 1.30e-3, -0.55e-3),
            (50.0, 10.0, 1.15e-3, 0.21e-3),
        ] {
            let (x, y) = synth(b, a, period, x0);
            let fit = fit_fringe_points(&x, &y, 1.2285e-3).unwrap();
            assert!((fit.background - b).abs() <= 1e-6 * b, "{fit:?}");
            assert!((fit.amplitude - a).abs() <= 1e-6 * a);
            assert!((fit.period - period).abs() <= 1e-6 * period);
            // any minimum of the fringe is a valid phase centre
            let turns = (fit.phase_center - x0) / period;
            assert!((turns - turns.round()).abs() <= 1e-6, "{fit:?} {x0}");
            assert!(fit.chi_square < 1e-12);
        }
    }

    #[test]
    fn negative_amplitude_is_canonicalized() {
        // 300 − 140(1 − cos) has a minimum half a period away from the peak
        let (x, y) = synth(300.0, -140.0, 1.2285e-3, 0.0);
        let fit = fit_fringe_points(&x, &y, 1.2285e-3).unwrap();
        assert!(fit.amplitude > 0.0);
        assert!((fit.background - 20.0).abs() < 1e-5);
        assert!((fit.phase_center.abs() - 0.61425e-3).abs() < 1e-9);
    }

    #[test]
    fn constant_data_is_flagged() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 1e-4).collect();
        let y = vec![37.0; 20];
        let fit = fit_fringe_points(&x, &y, 1.2285e-3).unwrap();
        assert_eq!(fit.amplitude, 0.0);
        assert_eq!(fit.background, 37.0);
        assert!(!fit.period_identifiable);
        assert_eq!(visibility(&fit), 0.0);
        assert!(fit.to_key_value().contains("unidentifiable period"));
    }

    #[test]
    fn preconditions() {
        let x: Vec<f64> = (0..5).map(|i| i as f64).collect();
        assert_eq!(fit_fringe_points(&x, &x, 1.0), Err(FitError::TooFewPoints(5)));
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 1e-5).collect();
        assert!(matches!(
            fit_fringe_points(&x, &x, 1.2285e-3),
            Err(FitError::InsufficientSpan { .. })
        ));
        assert_eq!(fit_fringe_points(&x, &x[..9], 1.0), Err(FitError::LengthMismatch(10, 9)));
    }

    #[test]
    fn scale_invariance() {
        let (x, y) = synth(20.0, 240.0, 1.2285e-3, 0.1e-3);
        let noisy: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + ((i * 7919) % 13) as f64 - 6.0).collect();
        let a = fit_fringe_points(&x, &noisy, 1.2285e-3).unwrap();
        let scaled: Vec<f64> = noisy.iter().map(|v| v * 3.0).collect();
        let b = fit_fringe_points(&x, &scaled, 1.2285e-3).unwrap();
        assert!((b.background - 3.0 * a.background).abs() < 1e-6 * b.background.abs().max(1.0));
        assert!((b.amplitude - 3.0 * a.amplitude).abs() < 1e-6 * b.amplitude);
        assert!((b.period - a.period).abs() < 1e-9 * a.period);
        assert!((b.phase_center - a.phase_center).abs() < 1e-9 * a.period);
    }

    #[test]
    fn visibility_limits() {
        let (x, y) = synth(0.0, 100.0, 1.2285e-3, 0.0);
        let fit = fit_fringe_points(&x, &y, 1.2285e-3).unwrap();
        assert!((visibility(&fit) - 1.0).abs() < 1e-9);
        let mut f = fit;
        f.amplitude = 0.0;
        assert_eq!(visibility(&f), 0.0);
    }

    #[test]
    fn maxima_listing() {
        let (x, y) = synth(10.0, 100.0, 1.2285e-3, 0.0);
        let fit = fit_fringe_points(&x, &y, 1.2285e-3).unwrap();
        let m = fit.maxima_in(-1.5e-3, 1.5e-3);
        assert_eq!(m.len(), 2);
        assert!((m[0] + 0.61425e-3).abs() < 1e-9 && (m[1] - 0.61425e-3).abs() < 1e-9);
    }
}
