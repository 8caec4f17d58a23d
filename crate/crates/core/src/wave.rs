//! Numerical biphoton model: aperture sampling, Fresnel propagation of the
//! position-correlated photon pair, fourth-order correlation maps and the
//! finite detector window.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{ExperimentGeometry, Grid1D, GridError};
use crate::textio::{self, DataFileError};

/// Largest |x|/z accepted as paraxial.
pub const PARAXIAL_LIMIT: f64 = 0.05;

/// Largest kernel phase advance per aperture sample, in radians.
pub const MAX_PHASE_INCREMENT: f64 = PI / 8.0;

/// ξ ∈ [-0.8, 0.8] mm, 2001 samples (0.8 µm step).
pub fn default_aperture_grid() -> Grid1D {
    Grid1D::new(-0.8e-3, 0.8e-3, 2001).expect("static grid")
}

/// x ∈ [-1.6, 1.6] mm, 321 samples (10 µm step).
pub fn default_detector_grid() -> Grid1D {
    Grid1D::new(-1.6e-3, 1.6e-3, 321).expect("static grid")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WaveError {
    #[error("aperture grid step {step:e} m exceeds slit_width/20 = {limit:e} m")]
    GridTooCoarse { step: f64, limit: f64 },
    #[error("aperture grid [{min:e}, {max:e}] m does not span ±(d+a) = ±{required:e} m")]
    GridTooNarrow { min: f64, max: f64, required: f64 },
    #[error("detector grid reaches |x|/z = {ratio:.4}, beyond the paraxial limit {PARAXIAL_LIMIT}")]
    NotParaxial { ratio: f64 },
    #[error("kernel phase advances {increment:.3} rad per aperture sample (limit π/8); the quadrature does not converge")]
    Undersampled { increment: f64 },
    #[error("map grid step {step:e} m is coarser than the detector window {window:e} m")]
    WindowTooNarrow { step: f64, window: f64 },
    #[error("map values must be finite and non-negative")]
    InvalidValue,
    #[error("matrix of shape {rows}x{cols} does not match a grid of {samples} samples")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        samples: usize,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Sampled double-slit transmission.
///
/// Each sample is the fraction of its grid cell covered by a clear aperture,
/// so `|t|` is 1 inside a slit, 0 on the obstacle, and fractional only in the
/// cells straddling a slit edge.
#[derive(Debug, Clone)]
pub struct ApertureFunction {
    grid: Grid1D,
    amplitude: Vec<Complex64>,
    branch_phase: f64,
    /// Clear intervals, lower slit first.
    slits: [(f64, f64); 2],
}

impl ApertureFunction {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn amplitude(&self) -> &[Complex64] {
        &self.amplitude
    }

    /// Relative phase between the "photon 1 through the upper slit" and
    /// "photon 1 through the lower slit" branches.
    pub fn branch_phase(&self) -> f64 {
        self.branch_phase
    }

    /// Transmission of the sample nearest `xi`.
    pub fn transmission_at(&self, xi: f64) -> Complex64 {
        self.amplitude[self.grid.nearest_index(xi)]
    }

    /// ∫|t(ξ)| dξ.
    pub fn support_measure(&self) -> f64 {
        self.amplitude.iter().map(|t| t.norm()).sum::<f64>() * self.grid.step()
    }

    /// Cell coverage at an arbitrary centre, using this aperture's step.
    fn coverage(&self, centre: f64) -> f64 {
        coverage(&self.slits, centre, self.grid.step())
    }

    /// Indices of samples with non-zero transmission.
    fn support(&self) -> Vec<usize> {
        (0..self.amplitude.len())
            .filter(|&i| self.amplitude[i].norm() > 0.0)
            .collect()
    }
}

fn coverage(slits: &[(f64, f64); 2], centre: f64, step: f64) -> f64 {
    let half = 0.5 * step;
    let lo = centre - half;
    let hi = centre + half;
    let covered: f64 = slits
        .iter()
        .map(|&(a, b)| (hi.min(b) - lo.max(a)).max(0.0))
        .sum();
    (covered / step).clamp(0.0, 1.0)
}

fn check_aperture_grid(g: &ExperimentGeometry, grid: &Grid1D) -> Result<(), WaveError> {
    let limit = g.slit_width() / 20.0;
    if grid.step() > limit * (1.0 + 1e-9) {
        return Err(WaveError::GridTooCoarse {
            step: grid.step(),
            limit,
        });
    }
    let required = g.slit_separation() + g.slit_width();
    if grid.min() > -required || grid.max() < required {
        return Err(WaveError::GridTooNarrow {
            min: grid.min(),
            max: grid.max(),
            required,
        });
    }
    Ok(())
}

pub(crate) fn check_paraxial(g: &ExperimentGeometry, out: &Grid1D) -> Result<(), WaveError> {
    let ratio = out.min().abs().max(out.max().abs()) / g.slit_to_detector();
    if ratio > PARAXIAL_LIMIT {
        return Err(WaveError::NotParaxial { ratio });
    }
    Ok(())
}

/// Two clear intervals of width `slit_width` centred at ±`slit_separation`/2.
pub fn build_aperture(g: &ExperimentGeometry, grid: &Grid1D) -> Result<ApertureFunction, WaveError> {
    check_aperture_grid(g, grid)?;
    let centre = 0.5 * g.slit_separation();
    let half = 0.5 * g.slit_width();
    // Lower slit written as the exact negation of the upper one, so that
    // t(-ξ) == t(ξ) bit for bit on symmetric grids.
    let slits = [(-(centre + half), -(centre - half)), (centre - half, centre + half)];
    let step = grid.step();
    let amplitude = (0..grid.len())
        .map(|i| Complex64::new(coverage(&slits, grid.point(i), step), 0.0))
        .collect();
    Ok(ApertureFunction {
        grid: *grid,
        amplitude,
        branch_phase: g.waveplate_phase(),
        slits,
    })
}

/// Two-photon amplitude Ψ(x₁, x₂) on a square detector grid.
#[derive(Debug, Clone)]
pub struct BiphotonAmplitude {
    grid: Grid1D,
    values: Array2<Complex64>,
}

impl BiphotonAmplitude {
    pub fn new(grid: Grid1D, values: Array2<Complex64>) -> Result<Self, WaveError> {
        check_shape(&grid, values.dim())?;
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }
}

fn check_shape(grid: &Grid1D, (rows, cols): (usize, usize)) -> Result<(), WaveError> {
    if rows != grid.len() || cols != grid.len() {
        return Err(WaveError::ShapeMismatch {
            rows,
            cols,
            samples: grid.len(),
        });
    }
    Ok(())
}

/// Propagates the position-correlated pair from the slit plane to the
/// detector plane with the paraxial Fresnel kernel.
///
/// For an ideally focused pump (ξ₁ + ξ₂ = 0) this is the single integral
///
/// `Ψ(x₁,x₂) ∝ ∫ t(ξ) t(-ξ) B(ξ) exp[ik((x₁-ξ)² + (x₂+ξ)²)/(2z)] dξ`
///
/// with `B = 1` for ξ > 0 and `e^{iφ}` for ξ < 0. A non-zero pump
/// correlation width replaces the constraint by a Gaussian kernel over
/// ξ₁ + ξ₂. The result is scaled so that max |Ψ|² = 1.
pub fn propagate_biphoton(
    ap: &ApertureFunction,
    g: &ExperimentGeometry,
    out: &Grid1D,
) -> Result<BiphotonAmplitude, WaveError> {
    check_aperture_grid(g, &ap.grid)?;
    check_paraxial(g, out)?;

    let coef = g.wavenumber() / (2.0 * g.slit_to_detector());
    let xi_max = ap.grid.min().abs().max(ap.grid.max().abs());
    let x_max = out.min().abs().max(out.max().abs());
    let increment = 2.0 * coef * 2.0 * (xi_max + x_max) * ap.grid.step();
    if increment > MAX_PHASE_INCREMENT {
        return Err(WaveError::Undersampled { increment });
    }

    let mut values = if g.pump_correlation_width() == 0.0 {
        focused_pair(ap, coef, out)
    } else {
        correlated_pair(ap, coef, g.pump_correlation_width(), out)
    };

    let peak = values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    if peak > 0.0 {
        let scale = 1.0 / peak.sqrt();
        values.mapv_inplace(|v| v * scale);
    }
    Ok(BiphotonAmplitude { grid: *out, values })
}

fn branch_factor(xi: f64, branch: Complex64) -> Complex64 {
    if xi < 0.0 {
        branch
    } else {
        Complex64::new(1.0, 0.0)
    }
}

/// Single-integral form. The exponent is split as
/// `coef(x₁² + x₂²) + 2coef ξ² + 2coef ξ (x₂ - x₁)`.
fn focused_pair(ap: &ApertureFunction, coef: f64, out: &Grid1D) -> Array2<Complex64> {
    let step = ap.grid.step();
    let branch = Complex64::from_polar(1.0, ap.branch_phase);
    // (weight · e^{2i coef ξ²}, 2 coef ξ) for each contributing sample
    let terms: Vec<(Complex64, f64)> = ap
        .support()
        .into_iter()
        .filter_map(|i| {
            let xi = ap.grid.point(i);
            let pair = ap.amplitude[i].re * ap.coverage(-xi);
            (pair > 0.0).then(|| {
                let w = branch_factor(xi, branch) * (pair * step);
                (w * Complex64::cis(2.0 * coef * xi * xi), 2.0 * coef * xi)
            })
        })
        .collect();

    let xs = out.points();
    let n = xs.len();
    let rows: Vec<Vec<Complex64>> = xs
        .par_iter()
        .map(|&x1| {
            xs.iter()
                .map(|&x2| {
                    let delta = x2 - x1;
                    let sum = terms
                        .iter()
                        .fold(Complex64::new(0.0, 0.0), |acc, &(a, b)| acc + a * Complex64::cis(b * delta));
                    sum * Complex64::cis(coef * (x1 * x1 + x2 * x2))
                })
                .collect()
        })
        .collect();
    Array2::from_shape_vec((n, n), rows.into_iter().flatten().collect()).expect("square")
}

/// Double-integral form for a finitely focused pump. The ξ₂ kernel is a
/// Gaussian in ξ₁ + ξ₂ normalized to unit sum on the grid, so it collapses
/// onto the focused form as the width goes to zero.
fn correlated_pair(ap: &ApertureFunction, coef: f64, width: f64, out: &Grid1D) -> Array2<Complex64> {
    let step = ap.grid.step();
    let branch = Complex64::from_polar(1.0, ap.branch_phase);
    let support = ap.support();
    let all: Vec<f64> = ap.grid.points();
    let xs = out.points();
    let m = support.len();
    let n = xs.len();

    let kernel = |s: f64| (-0.5 * (s / width).powi(2)).exp();
    let mut pair = Array2::<Complex64>::zeros((m, m));
    for (r, &i) in support.iter().enumerate() {
        let xi1 = all[i];
        let norm: f64 = all.iter().map(|&xi2| kernel(xi1 + xi2)).sum();
        let lead = branch_factor(xi1, branch) * (ap.amplitude[i].re * step / norm);
        for (c, &j) in support.iter().enumerate() {
            pair[[r, c]] = lead * (ap.amplitude[j].re * kernel(xi1 + all[j]));
        }
    }

    let propagator = Array2::from_shape_fn((n, m), |(xi, s)| {
        let d = xs[xi] - all[support[s]];
        Complex64::cis(coef * d * d)
    });
    // Ψ = P · K · Pᵀ
    let right = pair.dot(&propagator.t());
    propagator.dot(&right)
}

/// Non-negative Γ(x₁, x₂) samples, optionally with Monte Carlo standard
/// errors of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMap {
    grid: Grid1D,
    values: Array2<f64>,
    stderr: Option<Array2<f64>>,
}

impl CorrelationMap {
    pub fn new(grid: Grid1D, values: Array2<f64>, stderr: Option<Array2<f64>>) -> Result<Self, WaveError> {
        check_shape(&grid, values.dim())?;
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(WaveError::InvalidValue);
        }
        if let Some(se) = &stderr {
            check_shape(&grid, se.dim())?;
            if se.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(WaveError::InvalidValue);
            }
        }
        Ok(Self { grid, values, stderr })
    }

    /// Samples `f(x₁, x₂)` on the grid.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64, f64) -> f64) -> Result<Self, WaveError> {
        let xs = grid.points();
        let values = Array2::from_shape_fn((xs.len(), xs.len()), |(i, j)| f(xs[i], xs[j]));
        Self::new(grid, values, None)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn stderr(&self) -> Option<&Array2<f64>> {
        self.stderr.as_ref()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.values.diag().to_vec()
    }

    /// Largest |Γ(i,j) − Γ(j,i)| relative to the map maximum.
    pub fn exchange_asymmetry(&self) -> f64 {
        let max = self.max_value();
        if max == 0.0 {
            return 0.0;
        }
        let diff = (&self.values - &self.values.t()).mapv(f64::abs);
        diff.iter().copied().fold(0.0, f64::max) / max
    }

    /// Copy scaled so the maximum is 1 (stderr scaled alike). A zero map is
    /// returned unchanged.
    pub fn normalized(&self) -> Self {
        let max = self.max_value();
        if max == 0.0 {
            return self.clone();
        }
        Self {
            grid: self.grid,
            values: &self.values / max,
            stderr: self.stderr.as_ref().map(|se| se / max),
        }
    }

    /// Bilinear interpolation; `None` outside the grid.
    pub fn interpolate(&self, x1: f64, x2: f64) -> Option<f64> {
        if !(self.grid.contains(x1) && self.grid.contains(x2)) {
            return None;
        }
        let last = self.grid.len() - 1;
        let locate = |x: f64| {
            let f = self.grid.fractional_index(x).clamp(0.0, last as f64);
            let i = (f.floor() as usize).min(last - 1);
            (i, f - i as f64)
        };
        let (i, fi) = locate(x1);
        let (j, fj) = locate(x2);
        let v = &self.values;
        Some(
            (1.0 - fi) * (1.0 - fj) * v[[i, j]]
                + fi * (1.0 - fj) * v[[i + 1, j]]
                + (1.0 - fi) * fj * v[[i, j + 1]]
                + fi * fj * v[[i + 1, j + 1]],
        )
    }

    /// Comma-separated form: comment line, a header row `x1\x2,<x₂ grid>`,
    /// then one row per x₁ (x₁ value followed by the Γ row).
    pub fn to_csv(&self, annotations: &[(&str, String)]) -> String {
        write_matrix(&self.grid, &self.values, "correlation_map", annotations)
    }

    /// Same layout for the standard-error matrix, if present.
    pub fn stderr_to_csv(&self) -> Option<String> {
        self.stderr
            .as_ref()
            .map(|se| write_matrix(&self.grid, se, "correlation_map_stderr", &[]))
    }

    /// Reads [`to_csv`](Self::to_csv) output. Returns the map and the
    /// comment-line annotations.
    pub fn from_csv(text: &str) -> Result<(Self, Vec<(String, String)>), DataFileError> {
        let (grid, values, comment) = read_matrix(text, "correlation_map")?;
        let map = Self::new(grid, values, None).map_err(|e| DataFileError::Invalid {
            line: 0,
            message: e.to_string(),
        })?;
        Ok((map, comment))
    }

    /// Attaches a standard-error matrix read from
    /// [`stderr_to_csv`](Self::stderr_to_csv) output.
    pub fn with_stderr_csv(self, text: &str) -> Result<Self, DataFileError> {
        let (grid, se, _) = read_matrix(text, "correlation_map_stderr")?;
        if grid.len() != self.grid.len() {
            return Err(DataFileError::Invalid {
                line: 2,
                message: "stderr grid differs from map grid".into(),
            });
        }
        Self::new(self.grid, self.values, Some(se)).map_err(|e| DataFileError::Invalid {
            line: 0,
            message: e.to_string(),
        })
    }
}

fn write_matrix(grid: &Grid1D, m: &Array2<f64>, kind: &str, annotations: &[(&str, String)]) -> String {
    let xs = grid.points();
    let mut out = textio::comment_line(kind, annotations);
    out.push('\n');
    out.push_str("x1\\x2");
    for x in &xs {
        out.push(',');
        out.push_str(&x.to_string());
    }
    out.push('\n');
    for (x1, row) in xs.iter().zip(m.axis_iter(Axis(0))) {
        out.push_str(&x1.to_string());
        for v in row {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

type Matrix = (Grid1D, Array2<f64>, Vec<(String, String)>);

fn read_matrix(text: &str, kind: &'static str) -> Result<Matrix, DataFileError> {
    let lines = textio::split(text, kind)?;
    let (hline, header) = lines.header;
    let cells: Vec<&str> = header.split(',').collect();
    if cells.len() < 3 {
        return Err(DataFileError::MissingHeader { line: hline });
    }
    let xs = cells[1..]
        .iter()
        .map(|c| textio::parse_f64(hline, c))
        .collect::<Result<Vec<_>, _>>()?;
    let n = xs.len();
    let grid = Grid1D::new(xs[0], xs[n - 1], n).map_err(|e| DataFileError::Invalid {
        line: hline,
        message: e.to_string(),
    })?;
    let tol = 1e-6 * grid.step();
    if xs.iter().enumerate().any(|(i, x)| (x - grid.point(i)).abs() > tol) {
        return Err(DataFileError::Invalid {
            line: hline,
            message: "header is not a uniform grid".into(),
        });
    }
    if lines.rows.len() != n {
        return Err(DataFileError::Invalid {
            line: lines.rows.last().map_or(hline, |r| r.0),
            message: format!("expected {n} rows, found {}", lines.rows.len()),
        });
    }
    let mut values = Array2::zeros((n, n));
    for (i, &(line, row)) in lines.rows.iter().enumerate() {
        let f = textio::fields(line, row, n + 1)?;
        let x1 = textio::parse_f64(line, f[0])?;
        if (x1 - grid.point(i)).abs() > tol {
            return Err(DataFileError::Invalid {
                line,
                message: format!("row coordinate {x1} does not match the header grid"),
            });
        }
        for j in 0..n {
            values[[i, j]] = textio::parse_f64(line, f[j + 1])?;
        }
    }
    Ok((grid, values, lines.comment))
}

/// Γ = |Ψ|².
pub fn gamma_from_amplitude(psi: &BiphotonAmplitude) -> CorrelationMap {
    CorrelationMap {
        grid: psi.grid,
        values: psi.values.mapv(|v| v.norm_sqr()),
        stderr: None,
    }
}

/// Row sums of Γ times the grid step: the singles profile at x₁ with the
/// second detector integrated over the grid.
pub fn marginal_intensity(gamma: &CorrelationMap) -> Vec<f64> {
    let step = gamma.grid.step();
    gamma
        .values
        .axis_iter(Axis(0))
        .map(|row| row.sum() * step)
        .collect()
}

/// Normalized weights of a rectangular window of `width` over cells of
/// `step`, indexed by offset −J..=J.
fn window_weights(width: f64, step: f64) -> Vec<f64> {
    let half = 0.5 * width;
    let reach = (half / step - 0.5).ceil().max(0.0) as i64;
    (-reach..=reach)
        .map(|j| {
            let c = j as f64 * step;
            let lo = (c - 0.5 * step).max(-half);
            let hi = (c + 0.5 * step).min(half);
            (hi - lo).max(0.0) / width
        })
        .collect()
}

/// Applies the 1-D window along one axis; cells beyond the grid edge are
/// dropped and the remaining weights renormalized.
fn convolve_axis(m: &Array2<f64>, weights: &[f64], axis: Axis) -> Array2<f64> {
    let reach = (weights.len() / 2) as i64;
    let n = m.len_of(axis) as i64;
    let mut out = Array2::zeros(m.dim());
    for (src, mut dst) in m.lanes(axis).into_iter().zip(out.lanes_mut(axis)) {
        for i in 0..n {
            let mut acc = 0.0;
            let mut wsum = 0.0;
            for (k, w) in weights.iter().enumerate() {
                let j = i + k as i64 - reach;
                if (0..n).contains(&j) {
                    acc += w * src[j as usize];
                    wsum += w;
                }
            }
            dst[i as usize] = if wsum > 0.0 { acc / wsum } else { 0.0 };
        }
    }
    out
}

/// Averages Γ over the detector entrance slits: a separable rectangular
/// window of width Δx in both x₁ and x₂. The resolving time and slit height
/// only rescale the map, which is renormalized to max 1.
pub fn detector_convolve(gamma: &CorrelationMap, g: &ExperimentGeometry) -> Result<CorrelationMap, WaveError> {
    let step = gamma.grid.step();
    let window = g.detector_slit_width();
    if step > window * (1.0 + 1e-9) {
        return Err(WaveError::WindowTooNarrow { step, window });
    }
    let w = window_weights(window, step);
    let values = convolve_axis(&convolve_axis(&gamma.values, &w, Axis(0)), &w, Axis(1));
    let stderr = gamma.stderr.as_ref().map(|se| {
        let w2: Vec<f64> = w.iter().map(|x| x * x).collect();
        let var = se.mapv(|s| s * s);
        convolve_axis(&convolve_axis(&var, &w2, Axis(0)), &w2, Axis(1)).mapv(f64::sqrt)
    });
    Ok(CorrelationMap {
        grid: gamma.grid,
        values,
        stderr,
    }
    .normalized())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{coincidence_rate_ideal, sinc};
    use crate::geometry::default_geometry;

    fn small_detector_grid() -> Grid1D {
        Grid1D::new(-1.6e-3, 1.6e-3, 81).unwrap()
    }

    #[test]
    fn aperture_support_and_samples() {
        let g = default_geometry();
        let ap = build_aperture(&g, &default_aperture_grid()).unwrap();
        let step = ap.grid().step();
        assert!((ap.support_measure() - 2.0 * g.slit_width()).abs() < step);
        assert_eq!(ap.transmission_at(0.0).norm(), 0.0);
        assert_eq!(ap.transmission_at(0.5 * g.slit_separation()).norm(), 1.0);
        assert_eq!(ap.transmission_at(-0.5 * g.slit_separation()).norm(), 1.0);
        assert!(ap.amplitude().iter().all(|t| (0.0..=1.0).contains(&t.norm())));
        assert_eq!(ap.branch_phase(), g.waveplate_phase());
        let a = ap.amplitude();
        for i in 0..a.len() {
            assert_eq!(a[i], a[a.len() - 1 - i]);
        }
    }

    #[test]
    fn aperture_grid_preconditions() {
        let g = default_geometry();
        let coarse = Grid1D::new(-0.8e-3, 0.8e-3, 101).unwrap();
        assert!(matches!(build_aperture(&g, &coarse), Err(WaveError::GridTooCoarse { .. })));
        let narrow = Grid1D::new(-0.5e-3, 0.5e-3, 2001).unwrap();
        assert!(matches!(build_aperture(&g, &narrow), Err(WaveError::GridTooNarrow { .. })));
    }

    #[test]
    fn paraxial_guard() {
        let g = default_geometry();
        let ap = build_aperture(&g, &default_aperture_grid()).unwrap();
        let wide = Grid1D::new(-0.1, 0.1, 11).unwrap();
        assert!(matches!(propagate_biphoton(&ap, &g, &wide), Err(WaveError::NotParaxial { .. })));
    }

    #[test]
    fn antibunched_diagonal_vanishes() {
        let g = default_geometry();
        let ap = build_aperture(&g, &default_aperture_grid()).unwrap();
        let out = small_detector_grid();
        let psi = propagate_biphoton(&ap, &g, &out).unwrap();
        for (i, x) in out.points().into_iter().enumerate() {
            if x.abs() <= 1.5e-3 {
                assert!(psi.values()[[i, i]].norm_sqr() <= 1e-3);
            }
        }
    }

    #[test]
    fn control_diagonal_holds_maximum() {
        let g = default_geometry().with_waveplate_phase(0.0);
        let ap = build_aperture(&g, &default_aperture_grid()).unwrap();
        let out = small_detector_grid();
        let gamma = gamma_from_amplitude(&propagate_biphoton(&ap, &g, &out).unwrap());
        let diag_max = gamma.diagonal().into_iter().fold(0.0, f64::max);
        assert!((diag_max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exchange_sign() {
        for phase in [0.0, PI] {
            let g = default_geometry().with_waveplate_phase(phase);
            let ap = build_aperture(&g, &default_aperture_grid()).unwrap();
            let psi = propagate_biphoton(&ap, &g, &small_detector_grid()).unwrap();
            let v = psi.values();
            let sign = Complex64::from_polar(1.0, phase);
            let worst = v
                .indexed_iter()
                .map(|((i, j), &a)| (v[[j, i]] - sign * a).norm())
                .fold(0.0, f64::max);
            // max |Ψ| is 1 after normalization
            assert!(worst <= 1e-10, "phase {phase}: {worst}");
        }
    }

    #[test]
    fn gamma_is_modulus_squared() {
        let grid = Grid1D::new(-1.0, 1.0, 3).unwrap();
        let zero = BiphotonAmplitude::new(grid, Array2::zeros((3, 3))).unwrap();
        assert!(gamma_from_amplitude(&zero).values().iter().all(|&v| v == 0.0));
        let vals = Array2::from_shape_fn((3, 3), |(i, j)| Complex64::new((i + j) as f64, i as f64 - j as f64));
        let gamma = gamma_from_amplitude(&BiphotonAmplitude::new(grid, vals).unwrap());
        assert!(gamma.values().iter().all(|&v| v >= 0.0));
        assert_eq!(gamma.exchange_asymmetry(), 0.0);
        assert_eq!(gamma.values()[[2, 0]], 8.0);
    }

    #[test]
    fn antibunched_diagonal_below_half_period_values() {
        let g = default_geometry();
        let ap = build_aperture(&g, &default_aperture_grid()).unwrap();
        let out = default_detector_grid();
        let gamma = gamma_from_amplitude(&propagate_biphoton(&ap, &g, &out).unwrap());
        let half = 0.5 * g.fringe_period();
        let xs = out.points();
        let mut min_off = f64::INFINITY;
        let mut max_diag: f64 = 0.0;
        for &x in xs.iter().filter(|x| x.abs() <= 1.0e-3) {
            for s in [-half, half] {
                if let Some(v) = gamma.interpolate(x, x + s) {
                    min_off = min_off.min(v);
                }
            }
            max_diag = max_diag.max(gamma.interpolate(x, x).unwrap());
        }
        assert!(max_diag < min_off, "{max_diag} vs {min_off}");
    }

    #[test]
    fn marginal_basics() {
        let grid = Grid1D::new(-1.0, 1.0, 21).unwrap();
        let flat = CorrelationMap::from_fn(grid, |_, _| 2.0).unwrap();
        let m = marginal_intensity(&flat);
        assert!(m.iter().all(|&v| (v - m[0]).abs() < 1e-12));
        let sym = CorrelationMap::from_fn(grid, |a, b| (a - b).powi(2) + a * a * b * b).unwrap();
        let m = marginal_intensity(&sym);
        for i in 0..21 {
            assert!((m[i] - m[20 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn window_identity_limit() {
        let g = default_geometry();
        let out = default_detector_grid();
        let mut p = g.params();
        p.detector_slit_width = out.step();
        let g1 = ExperimentGeometry::new(p).unwrap();
        let ideal = CorrelationMap::from_fn(out, |a, b| coincidence_rate_ideal(a, b, &g) + 0.1 * (a * 1e3 + 2.0)).unwrap();
        let ideal = ideal.normalized();
        let conv = detector_convolve(&ideal, &g1).unwrap();
        let worst = (&conv.values - &ideal.values).mapv(f64::abs).iter().copied().fold(0.0, f64::max);
        assert!(worst <= 1e-12, "{worst}");
    }

    #[test]
    fn window_reduces_fringe_visibility() {
        // 1 − cos(2πΔ/Λ) averaged over two independent windows of width Δx
        // keeps its mean and scales the cosine by sinc²(πΔx/Λ).
        let g = default_geometry();
        let out = default_detector_grid();
        let ideal = CorrelationMap::from_fn(out, |a, b| coincidence_rate_ideal(a, b, &g)).unwrap();
        let conv = detector_convolve(&ideal, &g).unwrap();
        let factor = sinc(PI * g.detector_slit_width() / g.fringe_period()).powi(2);
        let xs = out.points();
        let expected_diag = (1.0 - factor) / (1.0 + factor);
        for (i, x) in xs.iter().enumerate() {
            if x.abs() <= 1.2e-3 {
                let d = conv.values()[[i, i]];
                assert!(d > 0.0);
                assert!((d - expected_diag).abs() < 2e-3 * expected_diag.max(1.0), "{d} vs {expected_diag}");
            }
        }
        assert!(conv.exchange_asymmetry() < 1e-12);
    }

    #[test]
    fn window_must_cover_a_cell() {
        let g = default_geometry();
        let coarse = Grid1D::new(-1.6e-3, 1.6e-3, 9).unwrap();
        let map = CorrelationMap::from_fn(coarse, |_, _| 1.0).unwrap();
        assert!(matches!(detector_convolve(&map, &g), Err(WaveError::WindowTooNarrow { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let grid = Grid1D::new(-1.6e-3, 1.6e-3, 5).unwrap();
        let map = CorrelationMap::from_fn(grid, |a, b| 1.0 + (a * 1e3) * (b * 1e3) / 3.0).unwrap();
        let text = map.to_csv(&[("source", "test".into())]);
        let (back, comment) = CorrelationMap::from_csv(&text).unwrap();
        assert_eq!(back, map);
        assert_eq!(comment, vec![("source".to_string(), "test".to_string())]);

        let truncated: String = text.lines().take(4).collect::<Vec<_>>().join("\n");
        assert!(CorrelationMap::from_csv(&truncated).is_err());
    }

    #[test]
    fn rejects_negative_values() {
        let grid = Grid1D::new(0.0, 1.0, 2).unwrap();
        let bad = Array2::from_elem((2, 2), -1.0);
        assert_eq!(CorrelationMap::new(grid, bad, None), Err(WaveError::InvalidValue));
        assert!(matches!(
            CorrelationMap::new(grid, Array2::zeros((3, 2)), None),
            Err(WaveError::ShapeMismatch { .. })
        ));
    }
}
