//! Simulation and analysis of transverse spatial antibunching behind a
//! birefringent double slit.
//!
//! * [`geometry`]: setup parameters, config files, sampling grids.
//! * [`analytic`]: closed-form coincidence fringe and singles envelope.
//! * [`wave`]: numerical biphoton propagation and correlation maps.
//! * [`montecarlo`]: seeded counting scans and classical field ensembles.
//! * [`analysis`]: fringe fits, visibility, Schwarz-bound reports.
//! * [`experiment`]: the figure pipelines built from the above.

pub mod analysis;
pub mod analytic;
pub mod experiment;
pub mod geometry;
pub mod montecarlo;
pub mod textio;
pub mod wave;

pub use analysis::{
    fit_fringe, schwarz_report, visibility, Estimate, FitError, FitResult, ViolationError, ViolationInput,
    ViolationReport,
};
pub use analytic::{coincidence_rate_ideal, singles_envelope};
pub use experiment::{ExperimentError, Figure};
pub use geometry::{
    default_geometry, fringe_period, load_config, ConfigError, ExperimentGeometry, GeometryError, GeometryParams,
    Grid1D,
};
pub use montecarlo::{
    classical_gamma, expected_rates, simulate_scan, ClassicalEnsembleSpec, EnsembleKind, MonteCarloError, RateModel,
    ScanMode, ScanPlan, ScanResult,
};
pub use textio::DataFileError;
pub use wave::{
    build_aperture, detector_convolve, gamma_from_amplitude, marginal_intensity, propagate_biphoton, ApertureFunction,
    BiphotonAmplitude, CorrelationMap, WaveError,
};
