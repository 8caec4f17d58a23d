//! End-to-end pipelines: geometry → biphoton map → detector window →
//! counting scans, and geometry → classical ensemble map.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::analysis::{FitError, ViolationError};
use crate::analytic::singles_envelope;
use crate::geometry::{ExperimentGeometry, Grid1D};
use crate::montecarlo::{
    classical_aperture_grid, classical_detector_grid, classical_moments, expected_rates, simulate_scan,
    ClassicalEnsembleSpec, ClassicalMoments, MonteCarloError, RateModel, ScanPlan, ScanResult,
};
use crate::wave::{
    build_aperture, default_aperture_grid, default_detector_grid, detector_convolve, gamma_from_amplitude,
    propagate_biphoton, CorrelationMap, WaveError,
};

/// Dwell time of the figure scans, seconds.
pub const FIGURE_DWELL: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Wave(#[from] WaveError),
    #[error(transparent)]
    MonteCarlo(#[from] MonteCarloError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Violation(#[from] ViolationError),
}

/// The four published scan protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Figure {
    Fig4,
    Fig5,
    Fig6,
    Fig7,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::Fig4, Figure::Fig5, Figure::Fig6, Figure::Fig7];

    pub fn as_str(self) -> &'static str {
        match self {
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
        }
    }

    pub fn plan(self, seed: u64, dwell_time: f64) -> Result<ScanPlan, MonteCarloError> {
        match self {
            Figure::Fig4 => ScanPlan::fig4(seed, dwell_time),
            Figure::Fig5 => ScanPlan::fig5(seed, dwell_time),
            Figure::Fig6 => ScanPlan::fig6(seed, dwell_time),
            Figure::Fig7 => ScanPlan::fig7(seed, dwell_time),
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Figure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Figure::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown figure `{s}`"))
    }
}

/// |Ψ|² on `out`, using the default aperture sampling.
pub fn ideal_map(g: &ExperimentGeometry, out: &Grid1D) -> Result<CorrelationMap, WaveError> {
    let ap = build_aperture(g, &default_aperture_grid())?;
    Ok(gamma_from_amplitude(&propagate_biphoton(&ap, g, out)?))
}

/// |Ψ|² averaged over the detector entrance slits, on the default detector
/// grid. This is the map the counting scans sample.
pub fn detected_map(g: &ExperimentGeometry) -> Result<CorrelationMap, WaveError> {
    detector_convolve(&ideal_map(g, &default_detector_grid())?, g)
}

/// Seeded counting scan of `map` with singles following the two-slit
/// envelope.
pub fn scan_map(
    plan: &ScanPlan,
    map: &CorrelationMap,
    g: &ExperimentGeometry,
    rm: &RateModel,
) -> Result<ScanResult, MonteCarloError> {
    let rates = expected_rates(plan, map, |x| singles_envelope(x, g), rm)?;
    simulate_scan(plan, &rates)
}

/// Classical ensemble moments on the classical default grids.
pub fn classical_map(spec: &ClassicalEnsembleSpec, g: &ExperimentGeometry) -> Result<ClassicalMoments, MonteCarloError> {
    let ap = build_aperture(g, &classical_aperture_grid())?;
    classical_moments(spec, &ap, g, &classical_detector_grid())
}
