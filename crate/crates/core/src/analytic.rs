//! Closed-form ideal patterns: the point-detector coincidence fringe and the
//! fringeless singles envelope.

use std::f64::consts::{PI, TAU};

use crate::geometry::ExperimentGeometry;

/// Ideal point-detector coincidence rate, dimensionless in [0, 2] with unit
/// mean over a period:
///
/// `1 - cos(2πd(x2 - x1)/(λz) + (π - φ))`
///
/// With φ = π this is the antibunched pattern, zero at `x1 == x2`; φ = 0
/// gives the bunched control `1 + cos(...)`.
pub fn coincidence_rate_ideal(x1: f64, x2: f64, g: &ExperimentGeometry) -> f64 {
    let arg = TAU * (x2 - x1) / g.fringe_period();
    1.0 - (arg + (PI - g.waveplate_phase())).cos()
}

/// `sin(u)/u` with the removable singularity filled in.
pub fn sinc(u: f64) -> f64 {
    if u.abs() < 1e-8 {
        1.0 - u * u / 6.0
    } else {
        u.sin() / u
    }
}

/// Singles profile: incoherent sum of the two single-slit Fraunhofer
/// envelopes, `½ sinc²(πa·u₁/λ) + ½ sinc²(πa·u₂/λ)`, where `uᵢ` is the
/// direction sine from the centre of slit i to `x` at distance z.
pub fn singles_envelope(x: f64, g: &ExperimentGeometry) -> f64 {
    let half_sep = 0.5 * g.slit_separation();
    let z = g.slit_to_detector();
    let scale = PI * g.slit_width() / g.wavelength();
    let lobe = |centre: f64| {
        let dx = x - centre;
        let u = dx / dx.hypot(z);
        sinc(scale * u).powi(2)
    };
    0.5 * lobe(half_sep) + 0.5 * lobe(-half_sep)
}
