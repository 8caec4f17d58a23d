//! Fringe fitting, visibility, and the Schwarz-bound violation report.

mod fit;
mod violation;
mod visibility;

pub use fit::{fit_fringe, fit_fringe_points, visibility, FitError, FitResult, ParamErrors, MAX_ITERATIONS, MIN_POINTS};
pub use violation::{
    schwarz_report, significance, Estimate, ViolationError, ViolationInput, ViolationReport, CENTRAL_HALF_WIDTH,
    DEFAULT_THRESHOLD,
};
pub use visibility::{fixed_period_visibility, harmonic_visibility};
