//! Fringe visibility at a known period.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};

/// Linear least-squares fit of `c₀ + c₁cos(2πx/Λ) + c₂sin(2πx/Λ)` at the
/// fixed period Λ. Returns `hypot(c₁, c₂)/c₀` clipped to [0, 1], which is
/// A/(A+B) for data of the form `B + A[1 − cos]`.
pub fn fixed_period_visibility(x: &[f64], y: &[f64], period: f64) -> Option<f64> {
    if x.len() != y.len() || x.len() < 3 || !(period > 0.0) {
        return None;
    }
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for (&xi, &yi) in x.iter().zip(y) {
        let (s, c) = (TAU * xi / period).sin_cos();
        let row = Vector3::new(1.0, c, s);
        ata += row * row.transpose();
        aty += row * yi;
    }
    let coef = ata.cholesky()?.solve(&aty);
    if coef[0] <= 0.0 {
        return Some(0.0);
    }
    Some((coef[1].hypot(coef[2]) / coef[0]).clamp(0.0, 1.0))
}

/// First-harmonic content of uniformly sampled data,
/// `2|Σ y e^{−2πix/Λ}| / Σ y`.
///
/// Unlike [`fixed_period_visibility`] this does not leak a smooth envelope
/// into the harmonic when the window spans many periods.
pub fn harmonic_visibility(x: &[f64], y: &[f64], period: f64) -> Option<f64> {
    if x.len() != y.len() || x.is_empty() || !(period > 0.0) {
        return None;
    }
    let total: f64 = y.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let (re, im) = x.iter().zip(y).fold((0.0, 0.0), |(re, im), (&xi, &yi)| {
        let (s, c) = (TAU * xi / period).sin_cos();
        (re + yi * c, im - yi * s)
    });
    Some((2.0 * re.hypot(im) / total).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: i32, step: f64) -> Vec<f64> {
        (-n..=n).map(|i| i as f64 * step).collect()
    }

    #[test]
    fn fixed_period_recovers_visibility() {
        let x = grid(30, 50e-6);
        let period = 1.2285e-3;
        for (b, a) in [(0.0, 1.0), (10.0, 30.0), (5.0, 0.0)] {
            let y: Vec<f64> = x.iter().map(|&v| b + a * (1.0 - (TAU * (v - 0.2e-3) / period).cos())).collect();
            let vis = fixed_period_visibility(&x, &y, period).unwrap();
            let expected: f64 = if a + b > 0.0 { a / (a + b) } else { 0.0 };
            assert!((vis - expected).abs() < 1e-9, "{vis} vs {expected}");
        }
    }

    #[test]
    fn harmonic_on_whole_periods() {
        let period = 1.0;
        let x: Vec<f64> = (0..400).map(|i| i as f64 * 0.01).collect();
        let y: Vec<f64> = x.iter().map(|&v| 2.0 + 0.5 * (TAU * v).cos()).collect();
        let vis = harmonic_visibility(&x, &y, period).unwrap();
        assert!((vis - 0.25).abs() < 1e-9);
        let flat = vec![1.0; x.len()];
        assert!(harmonic_visibility(&x, &flat, period).unwrap() < 1e-12);
        assert!(harmonic_visibility(&x, &vec![0.0; x.len()], period).is_none());
    }
}
