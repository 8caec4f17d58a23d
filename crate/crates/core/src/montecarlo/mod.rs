//! Seeded synthetic counting data and classical field ensembles.

mod classical;
mod poisson;
mod scan;

pub use classical::{
    classical_aperture_grid, classical_detector_grid, classical_gamma, classical_moments, ClassicalEnsembleSpec,
    ClassicalMoments, EnsembleKind, DEFAULT_COHERENCE_LENGTH,
};
pub use poisson::{poisson, standard_normal, uniform, NORMAL_THRESHOLD};
pub use scan::{
    expected_rates, figure_positions, simulate_scan, ExpectedRate, RateModel, ScanMode, ScanPlan, ScanResult, ScanRow,
};

use thiserror::Error;

use crate::wave::WaveError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonteCarloError {
    #[error("`{field}` must be non-negative and finite (got {value})")]
    NegativeRate { field: &'static str, value: f64 },
    #[error("dwell time must be positive and finite (got {0})")]
    BadDwell(f64),
    #[error("scan positions must be finite and strictly monotone")]
    NotMonotone,
    #[error("unknown scan mode `{0}`")]
    UnknownMode(String),
    #[error("unknown ensemble kind `{0}` (expected coherent, thermal or phase_diffused)")]
    UnknownKind(String),
    #[error("detector position ({x1:e}, {x2:e}) m lies outside the correlation map grid")]
    OutsideGrid { x1: f64, x2: f64 },
    #[error("got {found} rate rows for {expected} scan positions")]
    RateCount { expected: usize, found: usize },
    #[error("ensemble needs at least one sample")]
    ZeroSamples,
    #[error("thermal coherence length must be positive (got {0})")]
    BadCoherenceLength(f64),
    #[error("mean intensity must be positive (got {0})")]
    BadMeanIntensity(f64),
    #[error(transparent)]
    Wave(#[from] WaveError),
}
