//! Detector scan protocols and their simulated counting records.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::poisson::poisson;
use super::MonteCarloError;
use crate::textio::{self, DataFileError};
use crate::wave::CorrelationMap;

/// Count-rate scale factors that turn normalized patterns into rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateModel {
    /// Coincidences per second at the fringe maximum.
    pub peak_coincidence_rate: f64,
    /// Singles per second of detector 1 at the envelope peak.
    pub singles_rate_1: f64,
    /// Singles per second of detector 2 at the envelope peak.
    pub singles_rate_2: f64,
    /// Resolving time of the coincidence circuit, seconds.
    pub accidental_window: f64,
}

impl RateModel {
    pub fn validate(&self) -> Result<(), MonteCarloError> {
        let all = [
            ("peak_coincidence_rate", self.peak_coincidence_rate),
            ("singles_rate_1", self.singles_rate_1),
            ("singles_rate_2", self.singles_rate_2),
            ("accidental_window", self.accidental_window),
        ];
        for (field, value) in all {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(MonteCarloError::NegativeRate { field, value });
            }
        }
        Ok(())
    }
}

impl Default for RateModel {
    /// About 500 coincidences at a fringe maximum in a 1000 s dwell.
    fn default() -> Self {
        Self {
            peak_coincidence_rate: 0.5,
            singles_rate_1: 1000.0,
            singles_rate_2: 800.0,
            accidental_window: 10e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScanMode {
    /// Detector 1 scanned, detector 2 held at `fixed_position`.
    Scan1Fix2,
    /// Detector 2 scanned, detector 1 held at `fixed_position`.
    Scan2Fix1,
    /// Both detectors moved together, x₁ = x₂.
    JointEqual,
    /// As `Scan1Fix2`, with detector 2 held off axis.
    Scan1Fix2Offset,
}

impl ScanMode {
    pub const ALL: [ScanMode; 4] = [
        ScanMode::Scan1Fix2,
        ScanMode::Scan2Fix1,
        ScanMode::JointEqual,
        ScanMode::Scan1Fix2Offset,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScanMode::Scan1Fix2 => "scan1_fix2",
            ScanMode::Scan2Fix1 => "scan2_fix1",
            ScanMode::JointEqual => "joint_equal",
            ScanMode::Scan1Fix2Offset => "scan1_fix2_offset",
        }
    }

    /// Detector positions (x₁, x₂) for a scan coordinate.
    pub fn detectors(self, position: f64, fixed: f64) -> (f64, f64) {
        match self {
            ScanMode::Scan1Fix2 | ScanMode::Scan1Fix2Offset => (position, fixed),
            ScanMode::Scan2Fix1 => (fixed, position),
            ScanMode::JointEqual => (position, position),
        }
    }

    /// The scanned coordinate of a row.
    pub fn scanned(self, x1: f64, x2: f64) -> f64 {
        match self {
            ScanMode::Scan2Fix1 => x2,
            _ => x1,
        }
    }
}

impl fmt::Display for ScanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScanMode {
    type Err = MonteCarloError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScanMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| MonteCarloError::UnknownMode(s.to_string()))
    }
}

/// The default figure scan: −1.5 mm to 1.5 mm in 0.05 mm steps.
pub fn figure_positions() -> Vec<f64> {
    (-30..=30).map(|i| (i * 50) as f64 * 1e-6).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPlan {
    mode: ScanMode,
    fixed_position: f64,
    positions: Vec<f64>,
    dwell_time: f64,
    seed: u64,
}

impl ScanPlan {
    pub fn new(
        mode: ScanMode,
        fixed_position: f64,
        positions: Vec<f64>,
        dwell_time: f64,
        seed: u64,
    ) -> Result<Self, MonteCarloError> {
        if !(dwell_time > 0.0 && dwell_time.is_finite()) {
            return Err(MonteCarloError::BadDwell(dwell_time));
        }
        if positions.is_empty() || positions.iter().any(|p| !p.is_finite()) || !fixed_position.is_finite() {
            return Err(MonteCarloError::NotMonotone);
        }
        let up = positions.windows(2).all(|w| w[1] > w[0]);
        let down = positions.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(MonteCarloError::NotMonotone);
        }
        Ok(Self {
            mode,
            fixed_position,
            positions,
            dwell_time,
            seed,
        })
    }

    /// Detector 1 scanned, detector 2 at x₂ = 0.
    pub fn fig4(seed: u64, dwell_time: f64) -> Result<Self, MonteCarloError> {
        Self::new(ScanMode::Scan1Fix2, 0.0, figure_positions(), dwell_time, seed)
    }

    /// Detector 2 scanned, detector 1 at x₁ = 0.
    pub fn fig5(seed: u64, dwell_time: f64) -> Result<Self, MonteCarloError> {
        Self::new(ScanMode::Scan2Fix1, 0.0, figure_positions(), dwell_time, seed)
    }

    /// Both detectors together.
    pub fn fig6(seed: u64, dwell_time: f64) -> Result<Self, MonteCarloError> {
        Self::new(ScanMode::JointEqual, 0.0, figure_positions(), dwell_time, seed)
    }

    /// Detector 1 scanned, detector 2 at x₂ = −0.55 mm.
    pub fn fig7(seed: u64, dwell_time: f64) -> Result<Self, MonteCarloError> {
        Self::new(ScanMode::Scan1Fix2Offset, -0.55e-3, figure_positions(), dwell_time, seed)
    }

    pub fn mode(&self) -> ScanMode {
        self.mode
    }

    pub fn fixed_position(&self) -> f64 {
        self.fixed_position
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn dwell_time(&self) -> f64 {
        self.dwell_time
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// (x₁, x₂) for every position.
    pub fn detector_pairs(&self) -> Vec<(f64, f64)> {
        self.positions
            .iter()
            .map(|&p| self.mode.detectors(p, self.fixed_position))
            .collect()
    }
}

/// Mean rates at one scan position, counts per second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedRate {
    pub x1: f64,
    pub x2: f64,
    pub singles1: f64,
    pub singles2: f64,
    pub coincidence: f64,
}

/// Turns a correlation map and a singles profile into mean rates.
///
/// Coincidences are `peak · Γ(x₁,x₂)/Γ_max` plus accidentals
/// `singles1 · singles2 · Δτ`; singles are `rateᵢ · envelope(xᵢ)`.
pub fn expected_rates(
    plan: &ScanPlan,
    gamma: &CorrelationMap,
    envelope: impl Fn(f64) -> f64,
    rm: &RateModel,
) -> Result<Vec<ExpectedRate>, MonteCarloError> {
    rm.validate()?;
    let max = gamma.max_value();
    plan.detector_pairs()
        .into_iter()
        .map(|(x1, x2)| {
            let v = gamma
                .interpolate(x1, x2)
                .ok_or(MonteCarloError::OutsideGrid { x1, x2 })?;
            let shape = if max > 0.0 { v / max } else { 0.0 };
            let singles1 = rm.singles_rate_1 * envelope(x1);
            let singles2 = rm.singles_rate_2 * envelope(x2);
            let accidental = singles1 * singles2 * rm.accidental_window;
            Ok(ExpectedRate {
                x1,
                x2,
                singles1,
                singles2,
                coincidence: rm.peak_coincidence_rate * shape + accidental,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub x1: f64,
    pub x2: f64,
    pub singles1: u64,
    pub singles2: u64,
    pub coincidences: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    plan: ScanPlan,
    rows: Vec<ScanRow>,
}

/// Draws independent Poisson counts with mean `rate · dwell_time` for each
/// position. One ChaCha8 stream seeded from the plan is consumed in row
/// order, singles 1, singles 2, coincidences.
pub fn simulate_scan(plan: &ScanPlan, rates: &[ExpectedRate]) -> Result<ScanResult, MonteCarloError> {
    if rates.len() != plan.positions.len() {
        return Err(MonteCarloError::RateCount {
            expected: plan.positions.len(),
            found: rates.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let t = plan.dwell_time;
    let rows = rates
        .iter()
        .map(|r| ScanRow {
            x1: r.x1,
            x2: r.x2,
            singles1: poisson(&mut rng, r.singles1 * t),
            singles2: poisson(&mut rng, r.singles2 * t),
            coincidences: poisson(&mut rng, r.coincidence * t),
        })
        .collect();
    Ok(ScanResult {
        plan: plan.clone(),
        rows,
    })
}

const SCAN_HEADER: &str = "x1,x2,singles1,singles2,coincidences";

impl ScanResult {
    /// Assembles a result from recorded rows; positions are taken from the
    /// scanned coordinate of each row.
    pub fn from_rows(
        mode: ScanMode,
        fixed_position: f64,
        dwell_time: f64,
        seed: u64,
        rows: Vec<ScanRow>,
    ) -> Result<Self, MonteCarloError> {
        let positions = rows.iter().map(|r| mode.scanned(r.x1, r.x2)).collect();
        let plan = ScanPlan::new(mode, fixed_position, positions, dwell_time, seed)?;
        Ok(Self { plan, rows })
    }

    pub fn plan(&self) -> &ScanPlan {
        &self.plan
    }

    pub fn rows(&self) -> &[ScanRow] {
        &self.rows
    }

    pub fn dwell_time(&self) -> f64 {
        self.plan.dwell_time
    }

    pub fn mode(&self) -> ScanMode {
        self.plan.mode
    }

    /// Scanned coordinate of each row.
    pub fn scanned(&self) -> Vec<f64> {
        self.rows.iter().map(|r| self.plan.mode.scanned(r.x1, r.x2)).collect()
    }

    pub fn coincidences(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.coincidences as f64).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = textio::comment_line(
            "scan",
            &[
                ("mode", self.plan.mode.to_string()),
                ("seed", self.plan.seed.to_string()),
                ("dwell_time", self.plan.dwell_time.to_string()),
                ("fixed_position", self.plan.fixed_position.to_string()),
            ],
        );
        out.push('\n');
        out.push_str(SCAN_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.x1, r.x2, r.singles1, r.singles2, r.coincidences
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, DataFileError> {
        let lines = textio::split(text, "scan")?;
        let (hline, header) = lines.header;
        if header.replace(' ', "") != SCAN_HEADER {
            return Err(DataFileError::MissingHeader { line: hline });
        }
        let need = |key: &'static str| {
            textio::annotation(&lines.comment, key).ok_or(DataFileError::Invalid {
                line: 1,
                message: format!("comment line lacks `{key}=`"),
            })
        };
        let mode: ScanMode = need("mode")?.parse().map_err(|e: MonteCarloError| DataFileError::Invalid {
            line: 1,
            message: e.to_string(),
        })?;
        let seed = textio::parse_u64(1, need("seed")?)?;
        let dwell = textio::parse_f64(1, need("dwell_time")?)?;
        let fixed = textio::parse_f64(1, need("fixed_position")?)?;

        let mut rows = Vec::with_capacity(lines.rows.len());
        for &(line, row) in &lines.rows {
            let f = textio::fields(line, row, 5)?;
            rows.push(ScanRow {
                x1: textio::parse_f64(line, f[0])?,
                x2: textio::parse_f64(line, f[1])?,
                singles1: textio::parse_u64(line, f[2])?,
                singles2: textio::parse_u64(line, f[3])?,
                coincidences: textio::parse_u64(line, f[4])?,
            });
        }
        if rows.is_empty() {
            return Err(DataFileError::NoRows);
        }
        let last = lines.rows.last().map_or(hline, |r| r.0);
        Self::from_rows(mode, fixed, dwell, seed, rows).map_err(|e| DataFileError::Invalid {
            line: last,
            message: e.to_string(),
        })
    }
}
