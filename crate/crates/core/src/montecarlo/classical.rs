//! Classical stochastic-field ensembles: the fourth-order correlation any
//! classical source produces behind the same double slit.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::poisson::{standard_normal, uniform};
use super::MonteCarloError;
use crate::geometry::{ExperimentGeometry, Grid1D};
use crate::wave::{check_paraxial, ApertureFunction, CorrelationMap};

/// Thermal transverse coherence length used when none is given, metres.
pub const DEFAULT_COHERENCE_LENGTH: f64 = 20e-6;

/// Realizations per accumulation chunk.
const CHUNK: usize = 64;

/// Chunks evaluated concurrently before being folded in.
const BATCH: usize = 32;

/// ξ ∈ [-0.8, 0.8] mm with 161 samples (10 µm step).
pub fn classical_aperture_grid() -> Grid1D {
    Grid1D::new(-0.8e-3, 0.8e-3, 161).expect("static grid")
}

/// x ∈ [-1.6, 1.6] mm with 161 samples (20 µm step).
pub fn classical_detector_grid() -> Grid1D {
    Grid1D::new(-1.6e-3, 1.6e-3, 161).expect("static grid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnsembleKind {
    /// Deterministic plane wave.
    Coherent,
    /// Circular complex Gaussian field with Gaussian transverse correlation.
    Thermal,
    /// Plane wave with an independent uniform random phase on each slit.
    PhaseDiffused,
}

impl EnsembleKind {
    pub const ALL: [EnsembleKind; 3] = [EnsembleKind::Coherent, EnsembleKind::Thermal, EnsembleKind::PhaseDiffused];

    pub fn as_str(self) -> &'static str {
        match self {
            EnsembleKind::Coherent => "coherent",
            EnsembleKind::Thermal => "thermal",
            EnsembleKind::PhaseDiffused => "phase_diffused",
        }
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnsembleKind {
    type Err = MonteCarloError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EnsembleKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| MonteCarloError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalEnsembleSpec {
    pub kind: EnsembleKind,
    /// ⟨|𝒱|²⟩ on the aperture plane.
    pub mean_intensity: f64,
    /// Thermal kind only.
    pub transverse_coherence_length: f64,
    pub samples: usize,
    pub seed: u64,
}

impl ClassicalEnsembleSpec {
    /// Unit mean intensity and the default coherence length.
    pub fn new(kind: EnsembleKind, samples: usize, seed: u64) -> Self {
        Self {
            kind,
            mean_intensity: 1.0,
            transverse_coherence_length: DEFAULT_COHERENCE_LENGTH,
            samples,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), MonteCarloError> {
        if self.samples == 0 {
            return Err(MonteCarloError::ZeroSamples);
        }
        if !(self.mean_intensity > 0.0 && self.mean_intensity.is_finite()) {
            return Err(MonteCarloError::BadMeanIntensity(self.mean_intensity));
        }
        let l = self.transverse_coherence_length;
        if self.kind == EnsembleKind::Thermal && !(l > 0.0 && l.is_finite()) {
            return Err(MonteCarloError::BadCoherenceLength(l));
        }
        Ok(())
    }
}

/// Ensemble averages over the detector grid.
#[derive(Debug, Clone)]
pub struct ClassicalMoments {
    /// ⟨I(x₁) I(x₂)⟩ with per-cell standard errors.
    pub gamma: CorrelationMap,
    /// ⟨I(x)⟩.
    pub mean_intensity: Vec<f64>,
    /// Realizations actually averaged (1 for the coherent kind).
    pub realizations: usize,
}

/// Fixed pieces shared by every realization.
struct Sampler {
    kind: EnsembleKind,
    amplitude: f64,
    /// Clear-aperture samples: transmission, and whether on the lower slit.
    transmission: Vec<f64>,
    lower: Vec<bool>,
    /// Fresnel kernel, detector × aperture support.
    propagator: Array2<Complex64>,
    /// Thermal smoothing, support × full aperture grid; rows have unit norm.
    smoothing: Option<Array2<Complex64>>,
    noise_len: usize,
    branch: Complex64,
}

impl Sampler {
    fn new(spec: &ClassicalEnsembleSpec, ap: &ApertureFunction, g: &ExperimentGeometry, out: &Grid1D) -> Self {
        let grid = ap.grid();
        let h = grid.step();
        let all = grid.points();
        let support: Vec<usize> = (0..all.len()).filter(|&i| ap.amplitude()[i].norm() > 0.0).collect();
        let coef = g.wavenumber() / (2.0 * g.slit_to_detector());
        let xs = out.points();
        let propagator = Array2::from_shape_fn((xs.len(), support.len()), |(i, s)| {
            let d = xs[i] - all[support[s]];
            Complex64::cis(coef * d * d) * h
        });
        let smoothing = (spec.kind == EnsembleKind::Thermal).then(|| {
            let l = spec.transverse_coherence_length;
            let mut k = Array2::from_shape_fn((support.len(), all.len()), |(s, j)| {
                let d = all[support[s]] - all[j];
                (-(d / l).powi(2)).exp()
            });
            for mut row in k.rows_mut() {
                let norm = row.dot(&row).sqrt();
                row /= norm;
            }
            k.mapv(|w| Complex64::new(w, 0.0))
        });
        Self {
            kind: spec.kind,
            amplitude: spec.mean_intensity.sqrt(),
            transmission: support.iter().map(|&i| ap.amplitude()[i].norm()).collect(),
            lower: support.iter().map(|&i| all[i] < 0.0).collect(),
            propagator,
            smoothing,
            noise_len: all.len(),
            branch: Complex64::from_polar(1.0, g.waveplate_phase()),
        }
    }

    /// Aperture-plane field 𝒱·t for realization `index`.
    fn field(&self, seed: u64, index: u64) -> Array1<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let m = self.transmission.len();
        let v: Array1<Complex64> = match self.kind {
            EnsembleKind::Coherent => (0..m)
                .map(|s| if self.lower[s] { self.branch } else { Complex64::new(1.0, 0.0) })
                .collect(),
            EnsembleKind::PhaseDiffused => {
                let upper = Complex64::cis(std::f64::consts::TAU * uniform(&mut rng));
                let lower = Complex64::cis(std::f64::consts::TAU * uniform(&mut rng));
                (0..m).map(|s| if self.lower[s] { lower } else { upper }).collect()
            }
            EnsembleKind::Thermal => {
                let scale = std::f64::consts::FRAC_1_SQRT_2;
                let noise: Array1<Complex64> = (0..self.noise_len)
                    .map(|_| {
                        let re = standard_normal(&mut rng);
                        let im = standard_normal(&mut rng);
                        Complex64::new(re, im) * scale
                    })
                    .collect();
                let k = self.smoothing.as_ref().expect("thermal smoothing");
                k.dot(&noise)
            }
        };
        Array1::from_iter(
            v.iter()
                .zip(&self.transmission)
                .map(|(&vi, &t)| vi * (t * self.amplitude)),
        )
    }

    fn intensity(&self, seed: u64, index: u64) -> Array1<f64> {
        self.propagator.dot(&self.field(seed, index)).mapv(|u| u.norm_sqr())
    }
}

/// Running mean and sum of squared deviations.
#[derive(Clone)]
struct Accumulator {
    count: usize,
    mean_i: Array1<f64>,
    mean: Array2<f64>,
    m2: Array2<f64>,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Self {
            count: 0,
            mean_i: Array1::zeros(n),
            mean: Array2::zeros((n, n)),
            m2: Array2::zeros((n, n)),
        }
    }

    fn push(&mut self, intensity: &Array1<f64>) {
        self.count += 1;
        let inv = 1.0 / self.count as f64;
        self.mean_i.zip_mut_with(intensity, |m, &v| *m += (v - *m) * inv);
        let n = intensity.len();
        let mean = self.mean.as_slice_mut().expect("standard layout");
        let m2 = self.m2.as_slice_mut().expect("standard layout");
        for (i, &a) in intensity.iter().enumerate() {
            let row = i * n..(i + 1) * n;
            for ((mean, m2), &b) in mean[row.clone()].iter_mut().zip(&mut m2[row]).zip(intensity) {
                let v = a * b;
                let delta = v - *mean;
                *mean += delta * inv;
                *m2 += delta * (v - *mean);
            }
        }
    }

    /// Chan et al. pairwise combination; `other` follows `self` in order.
    fn merge(&mut self, other: &Accumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        let f = nb / n;
        let g = na * nb / n;
        self.mean_i.zip_mut_with(&other.mean_i, |a, &b| *a += (b - *a) * f);
        ndarray::Zip::from(&mut self.mean)
            .and(&mut self.m2)
            .and(&other.mean)
            .and(&other.m2)
            .for_each(|ma, m2a, &mb, &m2b| {
                let delta = mb - *ma;
                *ma += delta * f;
                *m2a += m2b + delta * delta * g;
            });
        self.count += other.count;
    }
}

/// Monte Carlo moments of the classical field ensemble behind the aperture.
///
/// Realization `i` draws from ChaCha8 seeded with `spec.seed` on stream `i`,
/// so results do not depend on the number of worker threads. Realizations
/// are accumulated in fixed chunks of 64 which are merged in index order.
pub fn classical_moments(
    spec: &ClassicalEnsembleSpec,
    ap: &ApertureFunction,
    g: &ExperimentGeometry,
    out: &Grid1D,
) -> Result<ClassicalMoments, MonteCarloError> {
    spec.validate()?;
    check_paraxial(g, out)?;
    let sampler = Sampler::new(spec, ap, g, out);
    let n = out.len();
    let realizations = if spec.kind == EnsembleKind::Coherent { 1 } else { spec.samples };

    let chunks: Vec<(usize, usize)> = (0..realizations)
        .step_by(CHUNK)
        .map(|start| (start, (start + CHUNK).min(realizations)))
        .collect();
    let mut total = Accumulator::new(n);
    for batch in chunks.chunks(BATCH) {
        let partial: Vec<Accumulator> = batch
            .par_iter()
            .map(|&(start, end)| {
                let mut acc = Accumulator::new(n);
                for index in start..end {
                    acc.push(&sampler.intensity(spec.seed, index as u64));
                }
                acc
            })
            .collect();
        for acc in &partial {
            total.merge(acc);
        }
    }

    let count = total.count as f64;
    let stderr = if total.count > 1 {
        total.m2.mapv(|m2| (m2.max(0.0) / (count - 1.0) / count).sqrt())
    } else {
        Array2::zeros((n, n))
    };
    let gamma = CorrelationMap::new(*out, total.mean.mapv(|v| v.max(0.0)), Some(stderr))?;
    Ok(ClassicalMoments {
        gamma,
        mean_intensity: total.mean_i.to_vec(),
        realizations: total.count,
    })
}

/// Ensemble-averaged ⟨I(x₁) I(x₂)⟩ with per-cell standard errors.
pub fn classical_gamma(
    spec: &ClassicalEnsembleSpec,
    ap: &ApertureFunction,
    g: &ExperimentGeometry,
    out: &Grid1D,
) -> Result<CorrelationMap, MonteCarloError> {
    Ok(classical_moments(spec, ap, g, out)?.gamma)
}
