//! Physical parameters of the double-slit coincidence setup and the
//! discretization grids used by the numerical modules.
//!
//! All quantities are SI base units: lengths in metres, times in seconds,
//! angles in radians.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use thiserror::Error;
use toml::Spanned;

/// Config keys, in serialization order.
pub const CONFIG_KEYS: [&str; 9] = [
    "wavelength",
    "slit_width",
    "slit_separation",
    "slit_to_detector",
    "detector_slit_width",
    "detector_slit_height",
    "coincidence_window",
    "waveplate_phase",
    "pump_correlation_width",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("`{field}` must be strictly positive and finite (got {value})")]
    NotPositive { field: &'static str, value: f64 },
    #[error("`pump_correlation_width` must be non-negative and finite (got {0})")]
    NegativePumpWidth(f64),
    #[error("slit_separation ({separation}) must exceed slit_width ({width}); slits would overlap")]
    SlitsOverlap { separation: f64, width: f64 },
    #[error("`waveplate_phase` must lie in [0, 2π) (got {0})")]
    PhaseOutOfRange(f64),
}

impl GeometryError {
    /// Config key the violated invariant is attached to.
    pub fn field(&self) -> &'static str {
        match self {
            GeometryError::NotPositive { field, .. } => field,
            GeometryError::NegativePumpWidth(_) => "pump_correlation_width",
            GeometryError::SlitsOverlap { .. } => "slit_separation",
            GeometryError::PhaseOutOfRange(_) => "waveplate_phase",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("unknown key `{key}` (line {line})")]
    UnknownKey { key: String, line: usize },
    #[error("key `{key}` (line {line}) must be a number")]
    NotANumber { key: String, line: usize },
    #[error("invalid geometry (line {line}): {source}")]
    Invariant {
        line: usize,
        #[source]
        source: GeometryError,
    },
}

impl ConfigError {
    /// 1-based line the error points at, when known.
    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::UnknownKey { line, .. }
            | ConfigError::NotANumber { line, .. }
            | ConfigError::Invariant { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// Plain parameter bundle; validated into an [`ExperimentGeometry`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryParams {
    pub wavelength: f64,
    pub slit_width: f64,
    pub slit_separation: f64,
    pub slit_to_detector: f64,
    pub detector_slit_width: f64,
    pub detector_slit_height: f64,
    pub coincidence_window: f64,
    pub waveplate_phase: f64,
    pub pump_correlation_width: f64,
}

impl GeometryParams {
    fn get(&self, key: &str) -> f64 {
        match key {
            "wavelength" => self.wavelength,
            "slit_width" => self.slit_width,
            "slit_separation" => self.slit_separation,
            "slit_to_detector" => self.slit_to_detector,
            "detector_slit_width" => self.detector_slit_width,
            "detector_slit_height" => self.detector_slit_height,
            "coincidence_window" => self.coincidence_window,
            "waveplate_phase" => self.waveplate_phase,
            "pump_correlation_width" => self.pump_correlation_width,
            _ => unreachable!("not a config key: {key}"),
        }
    }

    fn set(&mut self, key: &str, value: f64) {
        let slot = match key {
            "wavelength" => &mut self.wavelength,
            "slit_width" => &mut self.slit_width,
            "slit_separation" => &mut self.slit_separation,
            "slit_to_detector" => &mut self.slit_to_detector,
            "detector_slit_width" => &mut self.detector_slit_width,
            "detector_slit_height" => &mut self.detector_slit_height,
            "coincidence_window" => &mut self.coincidence_window,
            "waveplate_phase" => &mut self.waveplate_phase,
            "pump_correlation_width" => &mut self.pump_correlation_width,
            _ => unreachable!("not a config key: {key}"),
        };
        *slot = value;
    }
}

/// Validated, immutable setup description.
///
/// The model is one-dimensional in the transverse `x` direction; the slit
/// heights only enter as metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentGeometry {
    p: GeometryParams,
}

impl ExperimentGeometry {
    pub fn new(p: GeometryParams) -> Result<Self, GeometryError> {
        let positive = [
            ("wavelength", p.wavelength),
            ("slit_width", p.slit_width),
            ("slit_separation", p.slit_separation),
            ("slit_to_detector", p.slit_to_detector),
            ("detector_slit_width", p.detector_slit_width),
            ("detector_slit_height", p.detector_slit_height),
            ("coincidence_window", p.coincidence_window),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(GeometryError::NotPositive { field, value });
            }
        }
        if !(p.pump_correlation_width.is_finite() && p.pump_correlation_width >= 0.0) {
            return Err(GeometryError::NegativePumpWidth(p.pump_correlation_width));
        }
        if p.slit_separation <= p.slit_width {
            return Err(GeometryError::SlitsOverlap {
                separation: p.slit_separation,
                width: p.slit_width,
            });
        }
        if !(p.waveplate_phase >= 0.0 && p.waveplate_phase < TAU) {
            return Err(GeometryError::PhaseOutOfRange(p.waveplate_phase));
        }
        Ok(Self { p })
    }

    pub fn params(&self) -> GeometryParams {
        self.p
    }

    /// Copy with a different branch phase; `phase` is wrapped into [0, 2π).
    pub fn with_waveplate_phase(&self, phase: f64) -> Self {
        let mut p = self.p;
        p.waveplate_phase = phase.rem_euclid(TAU);
        Self { p }
    }

    pub fn wavelength(&self) -> f64 {
        self.p.wavelength
    }
    pub fn slit_width(&self) -> f64 {
        self.p.slit_width
    }
    pub fn slit_separation(&self) -> f64 {
        self.p.slit_separation
    }
    pub fn slit_to_detector(&self) -> f64 {
        self.p.slit_to_detector
    }
    pub fn detector_slit_width(&self) -> f64 {
        self.p.detector_slit_width
    }
    pub fn detector_slit_height(&self) -> f64 {
        self.p.detector_slit_height
    }
    pub fn coincidence_window(&self) -> f64 {
        self.p.coincidence_window
    }
    pub fn waveplate_phase(&self) -> f64 {
        self.p.waveplate_phase
    }
    pub fn pump_correlation_width(&self) -> f64 {
        self.p.pump_correlation_width
    }

    /// k = 2π/λ.
    pub fn wavenumber(&self) -> f64 {
        TAU / self.p.wavelength
    }

    /// Coincidence fringe period λz/d.
    pub fn fringe_period(&self) -> f64 {
        self.p.wavelength * self.p.slit_to_detector / self.p.slit_separation
    }

    /// Flat `key = value` document that [`load_config`] reads back bit-exactly.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for key in CONFIG_KEYS {
            // `{:?}` always carries a decimal point or exponent, so every
            // value stays a TOML float.
            let _ = writeln!(out, "{key} = {:?}", self.p.get(key));
        }
        out
    }
}

impl Default for ExperimentGeometry {
    fn default() -> Self {
        default_geometry()
    }
}

/// The published setup: 702 nm light, two 0.20 mm slits on 0.40 mm centres,
/// 70 cm to the detectors, 0.20 mm × 3 mm detector slits, 10 ns coincidence
/// window, π waveplate phase and an ideally focused pump.
pub fn default_geometry() -> ExperimentGeometry {
    ExperimentGeometry::new(GeometryParams {
        wavelength: 702e-9,
        slit_width: 0.20e-3,
        slit_separation: 0.40e-3,
        slit_to_detector: 0.70,
        detector_slit_width: 0.20e-3,
        detector_slit_height: 3e-3,
        coincidence_window: 10e-9,
        waveplate_phase: PI,
        pump_correlation_width: 0.0,
    })
    .expect("published geometry is valid")
}

pub fn fringe_period(g: &ExperimentGeometry) -> f64 {
    g.fringe_period()
}

/// Parses a flat key-value document (TOML syntax) into a validated geometry.
/// Every key in [`CONFIG_KEYS`] is required; anything else is rejected.
pub fn load_config(text: &str) -> Result<ExperimentGeometry, ConfigError> {
    let table: BTreeMap<String, Spanned<toml::Value>> =
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let line_of = |offset: usize| text[..offset.min(text.len())].matches('\n').count() + 1;

    for (key, value) in &table {
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey {
                key: key.clone(),
                line: line_of(value.span().start),
            });
        }
    }

    let mut params = GeometryParams {
        wavelength: 0.0,
        slit_width: 0.0,
        slit_separation: 0.0,
        slit_to_detector: 0.0,
        detector_slit_width: 0.0,
        detector_slit_height: 0.0,
        coincidence_window: 0.0,
        waveplate_phase: 0.0,
        pump_correlation_width: 0.0,
    };
    let mut lines = BTreeMap::new();
    for key in CONFIG_KEYS {
        let spanned = table.get(key).ok_or(ConfigError::MissingKey(key))?;
        let line = line_of(spanned.span().start);
        let value = match spanned.get_ref() {
            toml::Value::Float(v) => *v,
            toml::Value::Integer(v) => *v as f64,
            _ => {
                return Err(ConfigError::NotANumber {
                    key: key.to_string(),
                    line,
                })
            }
        };
        params.set(key, value);
        lines.insert(key, line);
    }

    ExperimentGeometry::new(params).map_err(|source| ConfigError::Invariant {
        line: lines[source.field()],
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid bounds must be finite with min < max (got [{min}, {max}])")]
    BadBounds { min: f64, max: f64 },
    #[error("grid needs at least 2 samples (got {0})")]
    TooFewSamples(usize),
}

/// Uniform sampling of a transverse axis, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    min: f64,
    max: f64,
    samples: usize,
}

impl Grid1D {
    pub fn new(min: f64, max: f64, samples: usize) -> Result<Self, GridError> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(GridError::BadBounds { min, max });
        }
        if samples < 2 {
            return Err(GridError::TooFewSamples(samples));
        }
        Ok(Self { min, max, samples })
    }

    pub fn min(&self) -> f64 {
        self.min
    }
    pub fn max(&self) -> f64 {
        self.max
    }
    pub fn samples(&self) -> usize {
        self.samples
    }
    pub fn len(&self) -> usize {
        self.samples
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / (self.samples - 1) as f64
    }

    /// i-th sample. Written as a weighted mean of the endpoints so that a
    /// grid symmetric about zero yields exactly negated pairs.
    pub fn point(&self, i: usize) -> f64 {
        let n = (self.samples - 1) as f64;
        let i = i as f64;
        (self.min * (n - i) + self.max * i) / n
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.samples).map(|i| self.point(i)).collect()
    }

    /// Tolerance-aware containment (half a ppm of a step).
    pub fn contains(&self, x: f64) -> bool {
        let tol = 5e-7 * self.step();
        x >= self.min - tol && x <= self.max + tol
    }

    /// Nearest sample index, clamped to the grid.
    pub fn nearest_index(&self, x: f64) -> usize {
        let f = ((x - self.min) / self.step()).round();
        f.clamp(0.0, (self.samples - 1) as f64) as usize
    }

    /// Fractional index `(x - min)/step`, unclamped.
    pub fn fractional_index(&self, x: f64) -> f64 {
        (x - self.min) / self.step()
    }

    /// Same span, `samples` doubled in resolution (2n-1 samples, step halved).
    pub fn refined(&self) -> Self {
        Self {
            samples: 2 * self.samples - 1,
            ..*self
        }
    }
}
