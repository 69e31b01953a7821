//! Time-reversal precoding.
//!
//! A TR filter is the conjugated, time-reversed copy of a channel impulse
//! response, normalised to unit energy: `g[n] = conj(h[L−1−n]) / ‖h‖₂`.
//! Sending `x ⊛ g` through `h` concentrates the equivalent response
//! `q = g ⊛ h` into a peak of height exactly `‖h‖₂` at index `L−1` (the
//! autocorrelation maximum); against any other channel the peak is bounded by
//! Cauchy–Schwarz. Unit-energy normalisation keeps the transmit power budget
//! identical with and without precoding, so error-rate comparisons are fair.
//!
//! [`degrade_filter`] models hardware-constrained filters: energy-ordered tap
//! truncation, uniform per-component quantisation, and tap-rate reduction
//! (decimation with zero-order-hold re-expansion), with re-normalisation
//! after the fact.

use crate::chan::{ChanError, ChannelImpulseResponse};
use crate::dsp;
use crate::modem::Waveform;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrError {
    #[error("sample intervals differ: {a:e} s vs {b:e} s")]
    SampleIntervalMismatch { a: f64, b: f64 },
    #[error("degradation annihilates the filter (all taps zero)")]
    Annihilated,
    #[error("invalid degradation: {0}")]
    InvalidDegradation(String),
    #[error("degenerate result: {0}")]
    Degenerate(#[from] ChanError),
}

/// How the filter taps are scaled. Only unit-energy normalisation is
/// supported: it fixes the transmit power budget independent of the channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterNormalization {
    UnitEnergy,
}

/// Unit-energy time-reversal precoding filter.
#[derive(Debug, Clone, PartialEq)]
pub struct TrFilter {
    taps: Vec<Complex64>,
    sample_interval: f64,
    source: String,
    normalization: FilterNormalization,
}

impl TrFilter {
    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    pub fn sample_interval(&self) -> f64 {
        self.sample_interval
    }

    /// Identifier of the channel the filter was built from (e.g. `"3->7"`).
    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn normalization(&self) -> FilterNormalization {
        self.normalization
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    /// Always false: built from a CIR with at least one sample.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn energy(&self) -> f64 {
        dsp::energy(&self.taps)
    }

    /// Attach a channel identifier (builder style).
    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    /// Export the tap sequence in the same shape as a CIR (tap index → time
    /// starting at 0), e.g. for handing the coefficients to hardware via the
    /// CIR CSV format.
    pub fn to_cir(&self) -> ChannelImpulseResponse {
        ChannelImpulseResponse::new(self.taps.clone(), self.sample_interval, 0.0)
            .expect("unit-energy filter is always a valid impulse response")
    }
}

/// Build the TR filter of a channel: `g[n] = conj(h[L−1−n]) / ‖h‖₂`.
///
/// Infallible: the CIR type guarantees positive finite energy.
pub fn build_tr_filter(cir: &ChannelImpulseResponse) -> TrFilter {
    let norm = cir.energy().sqrt();
    let taps: Vec<Complex64> = cir
        .samples()
        .iter()
        .rev()
        .map(|s| s.conj() / norm)
        .collect();
    TrFilter {
        taps,
        sample_interval: cir.sample_interval(),
        source: "cir".into(),
        normalization: FilterNormalization::UnitEnergy,
    }
}

/// Hardware-constraint model for a TR filter.
///
/// Fields compose in the listed order: truncation, then quantisation, then
/// tap-rate reduction, then one final re-normalisation to unit energy.
///
/// Note the uniform quantiser's level grid (2^bits levels spanning
/// [−M, +M] per real/imaginary component) contains no zero level, so
/// combining truncation with quantisation re-energises zeroed taps to the
/// nearest grid level; the knobs are meant to be studied one at a time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterDegradation {
    /// Keep only this many largest-magnitude taps (others zeroed).
    /// `None` keeps all.
    pub keep_taps: Option<usize>,
    /// Quantise each real/imaginary component to 2^quant_bits uniform levels
    /// spanning ±(largest component magnitude). `None` disables.
    pub quant_bits: Option<u32>,
    /// Clock the filter this many times slower: keep every n-th tap and hold
    /// it over the gap (zero-order hold). 1 disables.
    pub downsample_factor: usize,
}

impl FilterDegradation {
    /// The no-op degradation.
    pub fn none() -> Self {
        Self {
            keep_taps: None,
            quant_bits: None,
            downsample_factor: 1,
        }
    }

    pub fn is_noop(&self) -> bool {
        self.keep_taps.is_none() && self.quant_bits.is_none() && self.downsample_factor <= 1
    }

    pub fn validate(&self) -> Result<(), TrError> {
        if let Some(k) = self.keep_taps {
            if k < 1 {
                return Err(TrError::InvalidDegradation("keep_taps must be >= 1".into()));
            }
        }
        if let Some(b) = self.quant_bits {
            if !(1..=52).contains(&b) {
                return Err(TrError::InvalidDegradation(format!(
                    "quant_bits must be in 1..=52, got {b}"
                )));
            }
        }
        if self.downsample_factor < 1 {
            return Err(TrError::InvalidDegradation(
                "downsample_factor must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

impl Default for FilterDegradation {
    /// The no-op degradation (downsample factor 1, nothing truncated or
    /// quantised) — also what omitted JSON fields deserialise to.
    fn default() -> Self {
        Self::none()
    }
}

/// Apply a degradation descriptor, returning a re-normalised filter.
pub fn degrade_filter(g: &TrFilter, d: &FilterDegradation) -> Result<TrFilter, TrError> {
    d.validate()?;
    if d.is_noop() {
        return Ok(g.clone());
    }
    let mut taps = g.taps.clone();

    if let Some(keep) = d.keep_taps {
        if keep < taps.len() {
            let mut order: Vec<usize> = (0..taps.len()).collect();
            order.sort_by(|&a, &b| {
                taps[b]
                    .norm_sqr()
                    .partial_cmp(&taps[a].norm_sqr())
                    .expect("finite taps")
                    .then(a.cmp(&b))
            });
            for &i in &order[keep..] {
                taps[i] = Complex64::new(0.0, 0.0);
            }
        }
    }

    if let Some(bits) = d.quant_bits {
        let m = taps
            .iter()
            .map(|t| t.re.abs().max(t.im.abs()))
            .fold(0.0f64, f64::max);
        if m > 0.0 {
            let levels = (1u64 << bits) as f64;
            let step = 2.0 * m / (levels - 1.0);
            let q = |v: f64| -> f64 {
                let idx = ((v + m) / step).round().clamp(0.0, levels - 1.0);
                -m + idx * step
            };
            for t in &mut taps {
                *t = Complex64::new(q(t.re), q(t.im));
            }
        }
    }

    if d.downsample_factor > 1 {
        let f = d.downsample_factor;
        // In-place zero-order hold: indices that are multiples of f are the
        // kept samples and are never overwritten before being read.
        for n in 0..taps.len() {
            taps[n] = taps[(n / f) * f];
        }
    }

    let energy = dsp::energy(&taps);
    if energy <= 0.0 {
        return Err(TrError::Annihilated);
    }
    let scale = 1.0 / energy.sqrt();
    for t in &mut taps {
        *t *= scale;
    }
    Ok(TrFilter {
        taps,
        sample_interval: g.sample_interval,
        source: g.source.clone(),
        normalization: FilterNormalization::UnitEnergy,
    })
}

/// Precode a waveform: linear convolution with the filter taps.
/// Output length = input length + tap count − 1 (empty stays empty).
pub fn apply_precoding(x: &Waveform, g: &TrFilter) -> Result<Waveform, TrError> {
    let (a, b) = (x.sample_interval, g.sample_interval);
    if (a - b).abs() > 1e-9 * a.max(b) {
        return Err(TrError::SampleIntervalMismatch { a, b });
    }
    Ok(Waveform {
        samples: dsp::convolve(&x.samples, &g.taps),
        sample_interval: x.sample_interval,
    })
}

/// The equivalent channel `q = g ⊛ h` seen by a precoded stream.
///
/// When `h` is the filter's own source channel, `q[L−1] = ‖h‖₂` exactly and
/// is the global magnitude peak. The result inherits `h`'s start delay (the
/// filter is causal and timing bookkeeping stays with the channel).
pub fn equivalent_channel(
    g: &TrFilter,
    h: &ChannelImpulseResponse,
) -> Result<ChannelImpulseResponse, TrError> {
    let (a, b) = (g.sample_interval, h.sample_interval());
    if (a - b).abs() > 1e-9 * a.max(b) {
        return Err(TrError::SampleIntervalMismatch { a, b });
    }
    let q = dsp::convolve(&g.taps, h.samples());
    Ok(ChannelImpulseResponse::new(
        q,
        h.sample_interval(),
        h.start_delay(),
    )?)
}
