//! Correlation-driven link scheduling.
//!
//! Dense in-package deployments cannot afford per-decision waveform
//! simulation, so scheduling runs on a closed-form surrogate: each pair of
//! candidate links is reduced to one pre-characterized cross-correlation
//! number (the look-up table from [`crate::chan::correlation_matrix`]), and
//! predicted SINR, SINR-target power allocation, and greedy link selection
//! all work from that table.
//!
//! The surrogate deliberately keeps only the *peak* cross-correlation per
//! interferer — one LUT entry instead of a full equivalent channel — which
//! makes it optimistic; cross-validation against the waveform engine bounds
//! the gap (see the module tests).

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

use crate::dsp;
use crate::modem::ModulationScheme;

#[derive(Debug, Error)]
pub enum SchedError {
    #[error("invalid scheduler input: {0}")]
    InvalidInput(String),
    #[error("invalid subset: {0}")]
    InvalidSubset(String),
    #[error("invalid powers: {0}")]
    InvalidPowers(String),
    #[error("correlation table csv: {0}")]
    LutCsv(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One link competing for air time: endpoints plus the rate it would run at
/// if selected (no adaptive modulation — the rate is part of the candidate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateLink {
    pub tx: usize,
    pub rx: usize,
    pub scheme: ModulationScheme,
    pub symbol_rate: f64,
}

impl CandidateLink {
    /// Information rate if scheduled: `symbol_rate · log2(order)`.
    pub fn rate_bps(&self) -> f64 {
        self.symbol_rate * self.scheme.bits_per_symbol() as f64
    }
}

/// Everything the scheduler knows about the package, pre-characterized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerInput {
    pub candidates: Vec<CandidateLink>,
    /// Pairwise channel cross-correlations χ ∈ [0, 1], one row/column per
    /// candidate: symmetric, unit diagonal.
    pub lut: Vec<Vec<f64>>,
    /// Per-candidate channel gain ‖h‖₂² (linear).
    pub gains: Vec<f64>,
    /// Receiver noise power in mW.
    pub noise_mw: f64,
    pub p_min_dbm: f64,
    pub p_max_dbm: f64,
    /// Acceptance threshold for a scheduled link's predicted SINR.
    pub sinr_target_db: f64,
}

const LUT_TOL: f64 = 1e-9;

impl SchedulerInput {
    pub fn validate(&self) -> Result<(), SchedError> {
        let bad = |m: String| Err(SchedError::InvalidInput(m));
        let n = self.candidates.len();
        if n == 0 {
            return bad("no candidate links".into());
        }
        for (i, c) in self.candidates.iter().enumerate() {
            if c.tx == c.rx {
                return bad(format!("candidate {i}: tx and rx are both node {}", c.tx));
            }
            if !(c.symbol_rate.is_finite() && c.symbol_rate > 0.0) {
                return bad(format!(
                    "candidate {i}: symbol_rate must be > 0, got {}",
                    c.symbol_rate
                ));
            }
            c.scheme
                .validate()
                .map_err(|e| SchedError::InvalidInput(format!("candidate {i}: {e}")))?;
        }
        if self.lut.len() != n || self.lut.iter().any(|row| row.len() != n) {
            return bad(format!("correlation table must be {n}x{n}"));
        }
        for i in 0..n {
            if (self.lut[i][i] - 1.0).abs() > LUT_TOL {
                return bad(format!(
                    "correlation table diagonal must be 1, got {} at {i}",
                    self.lut[i][i]
                ));
            }
            for j in 0..n {
                let v = self.lut[i][j];
                if !v.is_finite() || v < -LUT_TOL || v > 1.0 + LUT_TOL {
                    return bad(format!("correlation {i},{j} must be in [0, 1], got {v}"));
                }
                if (v - self.lut[j][i]).abs() > LUT_TOL {
                    return bad(format!(
                        "correlation table must be symmetric: ({i},{j}) {v} vs ({j},{i}) {}",
                        self.lut[j][i]
                    ));
                }
            }
        }
        if self.gains.len() != n {
            return bad(format!("need {n} gains, got {}", self.gains.len()));
        }
        if let Some(g) = self.gains.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return bad(format!("gains must be finite and > 0, got {g}"));
        }
        if !(self.noise_mw.is_finite() && self.noise_mw >= 0.0) {
            return bad(format!("noise_mw must be >= 0, got {}", self.noise_mw));
        }
        if !(self.p_min_dbm.is_finite() && self.p_max_dbm.is_finite()) {
            return bad("power bounds must be finite".into());
        }
        if self.p_min_dbm > self.p_max_dbm {
            return bad(format!(
                "p_min_dbm {} exceeds p_max_dbm {}",
                self.p_min_dbm, self.p_max_dbm
            ));
        }
        if !self.sinr_target_db.is_finite() {
            return bad(format!("sinr_target_db must be finite, got {}", self.sinr_target_db));
        }
        Ok(())
    }

    fn check_subset(&self, subset: &[usize]) -> Result<(), SchedError> {
        if subset.is_empty() {
            return Err(SchedError::InvalidSubset("empty subset".into()));
        }
        let n = self.candidates.len();
        let mut seen = vec![false; n];
        for &i in subset {
            if i >= n {
                return Err(SchedError::InvalidSubset(format!(
                    "candidate index {i} out of range ({n} candidates)"
                )));
            }
            if seen[i] {
                return Err(SchedError::InvalidSubset(format!(
                    "candidate index {i} listed twice"
                )));
            }
            seen[i] = true;
        }
        Ok(())
    }
}

/// Closed-form SINR surrogate for `subset` transmitting at `powers_mw`
/// (aligned with `subset`, within the input's bounds): for link i,
/// `SINR_i = P_i·g_i / (Σ_{j≠i} P_j·g_j·χ²_ij + N)`. Returns linear ratios.
pub fn predict_sinr(
    input: &SchedulerInput,
    subset: &[usize],
    powers_mw: &[f64],
) -> Result<Vec<f64>, SchedError> {
    input.validate()?;
    input.check_subset(subset)?;
    if powers_mw.len() != subset.len() {
        return Err(SchedError::InvalidPowers(format!(
            "{} powers for {} links",
            powers_mw.len(),
            subset.len()
        )));
    }
    let lo = dsp::dbm_to_mw(input.p_min_dbm);
    let hi = dsp::dbm_to_mw(input.p_max_dbm);
    for &p in powers_mw {
        if !p.is_finite() || p < lo * (1.0 - 1e-9) || p > hi * (1.0 + 1e-9) {
            return Err(SchedError::InvalidPowers(format!(
                "power {p} mW outside [{lo}, {hi}] mW"
            )));
        }
    }
    Ok(subset
        .iter()
        .enumerate()
        .map(|(a, &i)| {
            let mut denom = input.noise_mw;
            for (b, &j) in subset.iter().enumerate() {
                if b != a {
                    denom += powers_mw[b] * input.gains[j] * input.lut[i][j] * input.lut[i][j];
                }
            }
            powers_mw[a] * input.gains[i] / denom
        })
        .collect())
}

/// Verdict of [`allocate_power`]. Infeasibility is an answer, not an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AllocationOutcome {
    Feasible {
        /// Per-subset-entry transmit power, mW.
        powers_mw: Vec<f64>,
        /// Predicted linear SINR at those powers.
        sinrs: Vec<f64>,
    },
    Infeasible {
        /// Candidate indices whose SINR target cannot be met.
        violated: Vec<usize>,
    },
}

impl AllocationOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, AllocationOutcome::Feasible { .. })
    }
}

const ALLOC_MAX_ITER: usize = 1000;
const ALLOC_REL_TOL: f64 = 1e-6;
/// Feasibility slack: a link is "violated" when its SINR lands more than
/// 10⁻⁴ dB short of the target (2.3·10⁻⁵ relative). The iteration's own
/// stopping rule leaves converged solutions within ~10⁻⁶–10⁻⁵ of the fixed
/// point, comfortably inside; power-railed infeasible links miss by far
/// more.
const SINR_SLACK_REL: f64 = 2.303e-5;

/// SINR-target power allocation over `subset`: the synchronous fixed-point
/// iteration `P_i ← target·(N + Σ_{j≠i} P_j·g_j·χ²_ij)/g_i`, clamped to the
/// power bounds, starting from everyone at the lower bound. Converges to the
/// minimal feasible power vector whenever one exists (the update is a
/// standard interference-function iteration); links still short of the
/// target on exit make the subset infeasible.
pub fn allocate_power(
    input: &SchedulerInput,
    subset: &[usize],
) -> Result<AllocationOutcome, SchedError> {
    input.validate()?;
    input.check_subset(subset)?;
    let target = dsp::db_to_linear(input.sinr_target_db);
    let lo = dsp::dbm_to_mw(input.p_min_dbm);
    let hi = dsp::dbm_to_mw(input.p_max_dbm);
    let mut powers = vec![lo; subset.len()];
    for _ in 0..ALLOC_MAX_ITER {
        let mut max_rel = 0.0f64;
        let next: Vec<f64> = subset
            .iter()
            .enumerate()
            .map(|(a, &i)| {
                let mut interference = input.noise_mw;
                for (b, &j) in subset.iter().enumerate() {
                    if b != a {
                        interference += powers[b] * input.gains[j] * input.lut[i][j] * input.lut[i][j];
                    }
                }
                (target * interference / input.gains[i]).clamp(lo, hi)
            })
            .collect();
        for (old, new) in powers.iter().zip(&next) {
            max_rel = max_rel.max((old - new).abs() / new.max(f64::MIN_POSITIVE));
        }
        powers = next;
        if max_rel <= ALLOC_REL_TOL {
            break;
        }
    }
    let sinrs = predict_sinr(input, subset, &powers)?;
    let violated: Vec<usize> = subset
        .iter()
        .zip(&sinrs)
        .filter(|(_, &s)| s < target * (1.0 - SINR_SLACK_REL))
        .map(|(&i, _)| i)
        .collect();
    if violated.is_empty() {
        Ok(AllocationOutcome::Feasible { powers_mw: powers, sinrs })
    } else {
        Ok(AllocationOutcome::Infeasible { violated })
    }
}

/// A scheduling decision: which candidates transmit, at what power, with
/// what predicted SINR, and the aggregate information rate they carry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Selected candidate indices, ascending.
    pub selected: Vec<usize>,
    /// Allocated transmit power per selected link, dBm.
    pub powers_dbm: Vec<f64>,
    /// Predicted SINR per selected link, dB.
    pub sinrs_db: Vec<f64>,
    pub aggregate_rate_bps: f64,
}

impl Schedule {
    pub fn empty() -> Self {
        Self {
            selected: Vec::new(),
            powers_dbm: Vec::new(),
            sinrs_db: Vec::new(),
            aggregate_rate_bps: 0.0,
        }
    }
}

/// Greedy link selection: starting from the empty set, repeatedly add the
/// feasible candidate with the highest information rate (ties to the lowest
/// index), until no remaining candidate keeps [`allocate_power`] feasible.
/// Returns the empty schedule when no single link is feasible.
pub fn select_links(input: &SchedulerInput) -> Result<Schedule, SchedError> {
    input.validate()?;
    let n = input.candidates.len();
    let mut selected: Vec<usize> = Vec::new();
    let mut last_alloc: Option<(Vec<f64>, Vec<f64>)> = None;
    loop {
        let mut best: Option<(usize, f64, Vec<usize>, Vec<f64>, Vec<f64>)> = None;
        for c in 0..n {
            if selected.contains(&c) {
                continue;
            }
            let mut trial = selected.clone();
            trial.push(c);
            trial.sort_unstable();
            if let AllocationOutcome::Feasible { powers_mw, sinrs } =
                allocate_power(input, &trial)?
            {
                let rate = input.candidates[c].rate_bps();
                // Strict > on an ascending scan keeps the lowest index on ties.
                if best.as_ref().is_none_or(|(_, r, _, _, _)| rate > *r) {
                    best = Some((c, rate, trial, powers_mw, sinrs));
                }
            }
        }
        match best {
            None => break,
            Some((_, _, trial, powers, sinrs)) => {
                selected = trial;
                last_alloc = Some((powers, sinrs));
            }
        }
    }
    match last_alloc {
        None => Ok(Schedule::empty()),
        Some((powers_mw, sinrs)) => Ok(Schedule {
            aggregate_rate_bps: selected
                .iter()
                .map(|&i| input.candidates[i].rate_bps())
                .sum(),
            powers_dbm: powers_mw.iter().map(|&p| dsp::mw_to_dbm(p)).collect(),
            sinrs_db: sinrs.iter().map(|&s| dsp::linear_to_db(s)).collect(),
            selected,
        }),
    }
}

/// Serialize a correlation table as headerless CSV (one matrix row per
/// line, shortest round-trip float formatting).
pub fn lut_to_csv(lut: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in lut {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Parse a headerless CSV correlation table; must be square and numeric.
pub fn lut_from_csv(text: &str) -> Result<Vec<Vec<f64>>, SchedError> {
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| SchedError::LutCsv(format!("line {}: {e}", ln + 1)))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(SchedError::LutCsv("no rows".into()));
    }
    let n = rows.len();
    if let Some(row) = rows.iter().find(|r| r.len() != n) {
        return Err(SchedError::LutCsv(format!(
            "table must be square: {n} rows but a row has {} columns",
            row.len()
        )));
    }
    Ok(rows)
}

pub fn save_lut(lut: &[Vec<f64>], path: &Path) -> Result<(), SchedError> {
    Ok(std::fs::write(path, lut_to_csv(lut))?)
}

pub fn load_lut(path: &Path) -> Result<Vec<Vec<f64>>, SchedError> {
    lut_from_csv(&std::fs::read_to_string(path)?)
}
