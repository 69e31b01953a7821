//! Modulation and detection.
//!
//! Three waveform families share one descriptor type:
//!
//! * **2-ASK** with a configurable low/high amplitude ratio — bit 1 maps to
//!   amplitude 1.0, bit 0 to `ratio`.
//! * **M-PSK** with Gray-coded unit-magnitude phases.
//! * **OFDM** carrying Gray-coded PSK on `subcarriers` tones: each block is a
//!   unitary inverse DFT of the tone symbols, sent chip by chip (every chip
//!   held `samples_per_symbol` samples) behind a cyclic prefix.
//!
//! Symbols use rectangular pulses: the symbol value drives the first
//! `pulse_width` samples of the period (default: the whole period) and the
//! remainder is silent. Narrow pulses trade mean radiated power for
//! inter-symbol-interference headroom at a fixed symbol rate.
//!
//! Detection offers an energy detector (per-symbol window energy against a
//! pilot-trained midpoint threshold), a coherent slicer (derotate by a known
//! equivalent-channel gain, minimum-distance decision), and a matched-filter
//! front end followed by the coherent slicer. OFDM has its own demodulator
//! with exact chip-level per-subcarrier equalisation.

use crate::chan::ChannelImpulseResponse;
use crate::dsp;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModemError {
    #[error("invalid modulation scheme: {0}")]
    InvalidScheme(String),
    #[error("bit count {got} is not a multiple of {expected_multiple}")]
    BitCount { expected_multiple: usize, got: usize },
    #[error("bits must be 0 or 1, got {value} at index {index}")]
    InvalidBit { index: usize, value: u8 },
    #[error("invalid detector configuration: {0}")]
    InvalidDetector(String),
    #[error("detector requires a channel reference: {0}")]
    MissingReference(String),
    #[error("received waveform too short: need at least {needed} samples, got {got}")]
    ShortWaveform { needed: usize, got: usize },
    #[error("OFDM cyclic prefix is unresolved; set it explicitly or derive it from the channel length")]
    UnresolvedCyclicPrefix,
    #[error("sample intervals differ: {a:e} s vs {b:e} s")]
    SampleIntervalMismatch { a: f64, b: f64 },
    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),
}

/// Modulation family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModKind {
    Ask,
    Psk,
    Ofdm,
}

/// Complete description of a modulation format.
///
/// JSON shape matches the experiment config file, e.g.
/// `{"kind":"ask","order":2,"ratio":0.5,"sps":4}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationScheme {
    pub kind: ModKind,
    /// Constellation size; power of two ≥ 2 (ASK is limited to order 2, the
    /// only case the low/high level mapping defines).
    pub order: usize,
    /// ASK low/high amplitude ratio in (0, 1). ASK only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    /// Number of OFDM tones (≥ 2). OFDM only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcarriers: Option<usize>,
    /// Cyclic prefix length in chips. OFDM only; `None` means "derive from
    /// the channel" via [`resolve_ofdm_cyclic_prefix`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cyclic_prefix: Option<usize>,
    /// Samples per symbol period (per chip for OFDM), ≥ 1.
    #[serde(rename = "sps")]
    pub samples_per_symbol: usize,
    /// Driven samples at the start of each symbol period (1 ..= sps);
    /// `None` drives the whole period. Single-carrier kinds only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse_width: Option<usize>,
}

impl ModulationScheme {
    pub fn ask(ratio: f64, samples_per_symbol: usize) -> Self {
        Self {
            kind: ModKind::Ask,
            order: 2,
            ratio: Some(ratio),
            subcarriers: None,
            cyclic_prefix: None,
            samples_per_symbol,
            pulse_width: None,
        }
    }

    pub fn psk(order: usize, samples_per_symbol: usize) -> Self {
        Self {
            kind: ModKind::Psk,
            order,
            ratio: None,
            subcarriers: None,
            cyclic_prefix: None,
            samples_per_symbol,
            pulse_width: None,
        }
    }

    pub fn ofdm(order: usize, subcarriers: usize, samples_per_symbol: usize) -> Self {
        Self {
            kind: ModKind::Ofdm,
            order,
            ratio: None,
            subcarriers: Some(subcarriers),
            cyclic_prefix: None,
            samples_per_symbol,
            pulse_width: None,
        }
    }

    /// Builder-style pulse-width override (single-carrier kinds).
    pub fn with_pulse_width(mut self, width: usize) -> Self {
        self.pulse_width = Some(width);
        self
    }

    /// Builder-style explicit cyclic prefix (OFDM).
    pub fn with_cyclic_prefix(mut self, chips: usize) -> Self {
        self.cyclic_prefix = Some(chips);
        self
    }

    pub fn validate(&self) -> Result<(), ModemError> {
        let bad = |m: String| Err(ModemError::InvalidScheme(m));
        if self.order < 2 || !self.order.is_power_of_two() {
            return bad(format!("order must be a power of two >= 2, got {}", self.order));
        }
        if self.samples_per_symbol < 1 {
            return bad("samples_per_symbol must be >= 1".into());
        }
        if let Some(w) = self.pulse_width {
            if self.kind == ModKind::Ofdm {
                return bad("pulse_width does not apply to ofdm (chips fill the period)".into());
            }
            if w < 1 || w > self.samples_per_symbol {
                return bad(format!(
                    "pulse_width must be in 1..={}, got {w}",
                    self.samples_per_symbol
                ));
            }
        }
        match self.kind {
            ModKind::Ask => {
                if self.order != 2 {
                    return bad(format!(
                        "ask supports only order 2 (two-level mapping), got {}",
                        self.order
                    ));
                }
                match self.ratio {
                    Some(r) if r > 0.0 && r < 1.0 => {}
                    Some(r) => return bad(format!("ratio must be in (0, 1), got {r}")),
                    None => return bad("ask requires ratio".into()),
                }
                if self.subcarriers.is_some() || self.cyclic_prefix.is_some() {
                    return bad("subcarriers/cyclic_prefix are only valid for ofdm".into());
                }
            }
            ModKind::Psk => {
                if self.ratio.is_some() {
                    return bad("ratio is only valid for ask".into());
                }
                if self.subcarriers.is_some() || self.cyclic_prefix.is_some() {
                    return bad("subcarriers/cyclic_prefix are only valid for ofdm".into());
                }
            }
            ModKind::Ofdm => {
                if self.ratio.is_some() {
                    return bad("ratio is only valid for ask".into());
                }
                match self.subcarriers {
                    Some(n) if n >= 2 => {}
                    Some(n) => return bad(format!("subcarriers must be >= 2, got {n}")),
                    None => return bad("ofdm requires subcarriers".into()),
                }
            }
        }
        Ok(())
    }

    /// log2(order): bits carried per symbol (per tone for OFDM).
    pub fn bits_per_symbol(&self) -> usize {
        self.order.trailing_zeros() as usize
    }

    /// Bits consumed per modulation unit: one symbol, or one OFDM block.
    pub fn bits_per_block(&self) -> usize {
        match self.kind {
            ModKind::Ofdm => self.subcarriers.unwrap_or(0) * self.bits_per_symbol(),
            _ => self.bits_per_symbol(),
        }
    }

    /// Driven samples per symbol period after defaulting.
    pub fn effective_pulse_width(&self) -> usize {
        self.pulse_width.unwrap_or(self.samples_per_symbol)
    }

    /// Nominal mean symbol power (|sample|² averaged over driven samples for
    /// an equiprobable symbol stream): PSK/OFDM 1.0, 2-ASK (1+r²)/2.
    pub fn nominal_symbol_power(&self) -> f64 {
        match self.kind {
            ModKind::Ask => {
                let r = self.ratio.unwrap_or(0.5);
                (1.0 + r * r) / 2.0
            }
            _ => 1.0,
        }
    }

    /// Mean transmit power of a long random stream relative to an always-on
    /// unit-power carrier: symbol power × duty factor of the pulse.
    pub fn mean_stream_power(&self) -> f64 {
        let duty = match self.kind {
            ModKind::Ofdm => 1.0,
            _ => self.effective_pulse_width() as f64 / self.samples_per_symbol as f64,
        };
        self.nominal_symbol_power() * duty
    }
}

/// Cyclic-prefix sizing rule: cover the channel memory,
/// `min(channel_length − 1, sps·subcarriers/2)` samples, rounded up to whole
/// chips. An explicit `scheme.cyclic_prefix` takes precedence at call sites.
pub fn resolve_ofdm_cyclic_prefix(scheme: &ModulationScheme, channel_len: usize) -> usize {
    let sps = scheme.samples_per_symbol;
    let n = scheme.subcarriers.unwrap_or(2);
    let cap = sps * n / 2;
    let want = channel_len.saturating_sub(1).min(cap);
    want.div_ceil(sps)
}

/// Sampled complex-baseband waveform. `|sample|²` is instantaneous power in
/// milliwatts under the simulator's power convention.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<Complex64>,
    pub sample_interval: f64,
}

impl Waveform {
    /// Validating constructor for externally-sourced sample buffers.
    pub fn new(samples: Vec<Complex64>, sample_interval: f64) -> Result<Self, ModemError> {
        if !(sample_interval.is_finite() && sample_interval > 0.0) {
            return Err(ModemError::InvalidWaveform(format!(
                "sample_interval must be finite and > 0, got {sample_interval}"
            )));
        }
        if let Some(i) = samples.iter().position(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(ModemError::InvalidWaveform(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(Self {
            samples,
            sample_interval,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean of |sample|² (0 for an empty waveform).
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            dsp::energy(&self.samples) / self.samples.len() as f64
        }
    }
}

/// Gray code of `k`.
fn gray(k: u32) -> u32 {
    k ^ (k >> 1)
}

/// Inverse Gray code: `gray_inverse(gray(k)) == k`.
fn gray_inverse(g: u32) -> u32 {
    let mut k = g;
    let mut shift = g >> 1;
    while shift > 0 {
        k ^= shift;
        shift >>= 1;
    }
    k
}

fn bits_to_index(bits: &[u8]) -> u32 {
    bits.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32)
}

fn push_index_bits(out: &mut Vec<u8>, v: u32, width: usize) {
    for i in (0..width).rev() {
        out.push(((v >> i) & 1) as u8);
    }
}

/// Constellation point for the PSK symbol whose *bit pattern* is `v`:
/// the point index is `gray_inverse(v)` so phase-adjacent points differ in
/// exactly one bit.
fn psk_point(v: u32, order: usize) -> Complex64 {
    let k = gray_inverse(v) as f64;
    Complex64::from_polar(1.0, 2.0 * PI * k / order as f64)
}

/// Slice a derotated sample to the nearest PSK point, returning its bits.
fn psk_slice(z: Complex64, order: usize, out: &mut Vec<u8>) {
    let m = order as f64;
    let sector = z.arg() * m / (2.0 * PI);
    let k = (sector.round() as i64).rem_euclid(order as i64) as u32;
    push_index_bits(out, gray(k), order.trailing_zeros() as usize);
}

fn validate_bits(bits: &[u8]) -> Result<(), ModemError> {
    for (index, &value) in bits.iter().enumerate() {
        if value > 1 {
            return Err(ModemError::InvalidBit { index, value });
        }
    }
    Ok(())
}

/// Per-symbol complex values for a single-carrier scheme (pulse shaping not
/// yet applied).
fn symbol_values(bits: &[u8], scheme: &ModulationScheme) -> Vec<Complex64> {
    let bps = scheme.bits_per_symbol();
    bits.chunks(bps)
        .map(|chunk| match scheme.kind {
            ModKind::Ask => {
                let r = scheme.ratio.expect("validated");
                if chunk[0] == 1 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(r, 0.0)
                }
            }
            ModKind::Psk => psk_point(bits_to_index(chunk), scheme.order),
            ModKind::Ofdm => unreachable!("ofdm handled separately"),
        })
        .collect()
}

/// Modulate a bit sequence to a baseband waveform at the given sample
/// interval.
///
/// Bit count must be a multiple of [`ModulationScheme::bits_per_block`]
/// (log2(order), or subcarriers·log2(order) for OFDM); an empty bit sequence
/// yields an empty waveform. For OFDM the cyclic prefix must be resolved
/// (see [`resolve_ofdm_cyclic_prefix`]).
pub fn modulate(
    bits: &[u8],
    scheme: &ModulationScheme,
    sample_interval: f64,
) -> Result<Waveform, ModemError> {
    scheme.validate()?;
    validate_bits(bits)?;
    if !(sample_interval.is_finite() && sample_interval > 0.0) {
        return Err(ModemError::InvalidWaveform(format!(
            "sample_interval must be finite and > 0, got {sample_interval}"
        )));
    }
    let block = scheme.bits_per_block();
    if bits.len() % block != 0 {
        return Err(ModemError::BitCount {
            expected_multiple: block,
            got: bits.len(),
        });
    }
    if bits.is_empty() {
        return Ok(Waveform {
            samples: Vec::new(),
            sample_interval,
        });
    }
    let sps = scheme.samples_per_symbol;
    let samples = match scheme.kind {
        ModKind::Ask | ModKind::Psk => {
            let width = scheme.effective_pulse_width();
            let values = symbol_values(bits, scheme);
            let mut samples = vec![Complex64::new(0.0, 0.0); values.len() * sps];
            for (s, v) in values.iter().enumerate() {
                for w in 0..width {
                    samples[s * sps + w] = *v;
                }
            }
            samples
        }
        ModKind::Ofdm => {
            let n = scheme.subcarriers.expect("validated");
            let cp = scheme
                .cyclic_prefix
                .ok_or(ModemError::UnresolvedCyclicPrefix)?;
            let bps = scheme.bits_per_symbol();
            let scale = 1.0 / (n as f64).sqrt();
            let mut samples = Vec::with_capacity(bits.len() / block * (n + cp) * sps);
            for block_bits in bits.chunks(block) {
                let mut tones: Vec<Complex64> = block_bits
                    .chunks(bps)
                    .map(|chunk| psk_point(bits_to_index(chunk), scheme.order))
                    .collect();
                dsp::fft_in_place(&mut tones, true);
                let chips: Vec<Complex64> = tones.iter().map(|c| c * scale).collect();
                // Cyclic prefix: copy of the block tail, then the block.
                for &chip in chips[n - cp.min(n)..].iter().chain(chips.iter()) {
                    for _ in 0..sps {
                        samples.push(chip);
                    }
                }
            }
            // A cyclic prefix longer than one block repeats the block; reject
            // instead (it would break the prefix-copy semantics above).
            if cp > n {
                return Err(ModemError::InvalidScheme(format!(
                    "cyclic_prefix ({cp} chips) exceeds the block length ({n} tones)"
                )));
            }
            samples
        }
    };
    Ok(Waveform {
        samples,
        sample_interval,
    })
}

/// Detector family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    /// Per-symbol window energy against a pilot-trained midpoint threshold.
    Energy,
    /// Derotate by a known equivalent-channel gain, minimum-distance slice.
    Coherent,
    /// Correlate with the time-reversed conjugate channel reference first,
    /// then slice coherently.
    MatchedFilterCoherent,
}

/// Detector settings for one link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    /// Threshold-training prefix length in symbols (alternating levels, see
    /// [`pilot_bits`]). The energy detector requires at least 16.
    pub pilot_symbols: usize,
    /// Symbol-timing sample index within the (detection-domain) equivalent
    /// channel: symbol k is read at `sampling_offset + k·sps`, and its energy
    /// window is the following symbol period.
    pub sampling_offset: usize,
}

impl DetectorConfig {
    /// Energy detector with the default 128-symbol training prefix.
    pub fn energy() -> Self {
        Self {
            kind: DetectorKind::Energy,
            pilot_symbols: 128,
            sampling_offset: 0,
        }
    }

    pub fn coherent() -> Self {
        Self {
            kind: DetectorKind::Coherent,
            pilot_symbols: 0,
            sampling_offset: 0,
        }
    }

    pub fn matched_filter() -> Self {
        Self {
            kind: DetectorKind::MatchedFilterCoherent,
            pilot_symbols: 0,
            sampling_offset: 0,
        }
    }

    pub fn with_sampling_offset(mut self, offset: usize) -> Self {
        self.sampling_offset = offset;
        self
    }

    pub fn validate(&self, scheme: &ModulationScheme) -> Result<(), ModemError> {
        if scheme.kind == ModKind::Ofdm {
            return Err(ModemError::InvalidDetector(
                "ofdm uses ofdm_demodulate, not detect".into(),
            ));
        }
        if self.kind == DetectorKind::Energy {
            if self.pilot_symbols < 16 {
                return Err(ModemError::InvalidDetector(format!(
                    "energy detection needs pilot_symbols >= 16, got {}",
                    self.pilot_symbols
                )));
            }
            if scheme.kind != ModKind::Ask {
                return Err(ModemError::InvalidDetector(
                    "energy detection distinguishes amplitude levels only; use ask".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Training prefix bit pattern: symbol s carries all-ones bits when s is
/// even, all-zeros when odd (alternating the two extreme levels/phases).
/// Transmitter and detector must both use this pattern.
pub fn pilot_bits(scheme: &ModulationScheme, pilot_symbols: usize) -> Vec<u8> {
    let bps = scheme.bits_per_symbol();
    let mut bits = Vec::with_capacity(pilot_symbols * bps);
    for s in 0..pilot_symbols {
        let b = if s % 2 == 0 { 1u8 } else { 0u8 };
        bits.extend(std::iter::repeat(b).take(bps));
    }
    bits
}

/// Channel knowledge handed to [`detect`].
#[derive(Debug, Clone, Copy)]
pub enum ChannelReference<'a> {
    /// Complex gain of the equivalent channel at the sampling instant
    /// (already including transmit amplitude scaling) — for coherent slicing.
    Gain(Complex64),
    /// Amplitude-scaled equivalent response the transmitted stream actually
    /// passed through — for the matched-filter front end, which derives its
    /// own post-filter gain from it.
    Response(&'a [Complex64]),
}

/// Detect data bits from a received single-carrier waveform.
///
/// Symbol k occupies the window starting at
/// `sampling_offset + k·sps`; the first `pilot_symbols` symbols are the
/// training prefix from [`pilot_bits`] and are consumed, not returned. The
/// number of symbols sliced is however many complete windows fit — callers
/// that convolved with a channel should trim or ignore the tail.
pub fn detect(
    received: &Waveform,
    scheme: &ModulationScheme,
    det: &DetectorConfig,
    reference: Option<ChannelReference<'_>>,
) -> Result<Vec<u8>, ModemError> {
    scheme.validate()?;
    det.validate(scheme)?;
    match det.kind {
        DetectorKind::Energy => detect_energy(received, scheme, det),
        DetectorKind::Coherent => {
            let gain = match reference {
                Some(ChannelReference::Gain(g)) => g,
                Some(ChannelReference::Response(_)) => {
                    return Err(ModemError::MissingReference(
                        "coherent detection needs the sampling-instant gain, not a response".into(),
                    ))
                }
                None => {
                    return Err(ModemError::MissingReference(
                        "coherent detection needs the equivalent-channel gain".into(),
                    ))
                }
            };
            detect_coherent_at(&received.samples, scheme, det, gain)
        }
        DetectorKind::MatchedFilterCoherent => {
            let response = match reference {
                Some(ChannelReference::Response(r)) if !r.is_empty() => r,
                _ => {
                    return Err(ModemError::MissingReference(
                        "matched-filter detection needs the equivalent channel response".into(),
                    ))
                }
            };
            // Unit-energy matched filter: conj-reversed response. Filtering
            // shifts the peak; the caller's sampling_offset refers to the
            // post-filter domain (argmax of the filtered equivalent channel).
            let norm = dsp::energy(response).sqrt();
            let mf: Vec<Complex64> = response.iter().rev().map(|s| s.conj() / norm).collect();
            let filtered = dsp::convolve(&received.samples, &mf);
            let eq_mf = dsp::convolve(response, &mf);
            let width = scheme.effective_pulse_width();
            let summed = dsp::sliding_sum(&eq_mf, width);
            let gain = summed
                .get(det.sampling_offset)
                .copied()
                .ok_or(ModemError::ShortWaveform {
                    needed: det.sampling_offset + 1,
                    got: summed.len(),
                })?;
            detect_coherent_at(&filtered, scheme, det, gain)
        }
    }
}

/// Complete `sps`-wide windows `[off + k·sps, off + (k+1)·sps)` in `len`.
fn windows_available(
    len: usize,
    det: &DetectorConfig,
    sps: usize,
) -> Result<usize, ModemError> {
    let off = det.sampling_offset;
    if len < off + sps {
        return Err(ModemError::ShortWaveform {
            needed: off + sps,
            got: len,
        });
    }
    Ok((len - off) / sps)
}

/// Sampling instants `off + k·sps` that lie inside `len`.
fn instants_available(
    len: usize,
    det: &DetectorConfig,
    sps: usize,
) -> Result<usize, ModemError> {
    let off = det.sampling_offset;
    if len <= off {
        return Err(ModemError::ShortWaveform {
            needed: off + 1,
            got: len,
        });
    }
    Ok((len - off - 1) / sps + 1)
}

fn detect_energy(
    received: &Waveform,
    scheme: &ModulationScheme,
    det: &DetectorConfig,
) -> Result<Vec<u8>, ModemError> {
    let sps = scheme.samples_per_symbol;
    let total = windows_available(received.len(), det, sps)?;
    if total < det.pilot_symbols {
        return Err(ModemError::ShortWaveform {
            needed: det.sampling_offset + det.pilot_symbols * sps,
            got: received.len(),
        });
    }
    let window_energy = |k: usize| -> f64 {
        let start = det.sampling_offset + k * sps;
        dsp::energy(&received.samples[start..start + sps])
    };
    // Pilot-trained midpoint threshold: symbol s of the prefix is the high
    // level for even s (see pilot_bits).
    let (mut hi, mut lo, mut nh, mut nl) = (0.0f64, 0.0f64, 0usize, 0usize);
    for s in 0..det.pilot_symbols {
        let e = window_energy(s);
        if s % 2 == 0 {
            hi += e;
            nh += 1;
        } else {
            lo += e;
            nl += 1;
        }
    }
    let threshold = 0.5 * (hi / nh.max(1) as f64 + lo / nl.max(1) as f64);
    let mut bits = Vec::with_capacity(total - det.pilot_symbols);
    for k in det.pilot_symbols..total {
        bits.push(u8::from(window_energy(k) > threshold));
    }
    Ok(bits)
}

fn detect_coherent_at(
    samples: &[Complex64],
    scheme: &ModulationScheme,
    det: &DetectorConfig,
    gain: Complex64,
) -> Result<Vec<u8>, ModemError> {
    if gain.norm_sqr() <= 0.0 || !gain.re.is_finite() || !gain.im.is_finite() {
        return Err(ModemError::MissingReference(format!(
            "reference gain must be finite and nonzero, got {gain}"
        )));
    }
    let sps = scheme.samples_per_symbol;
    let total = instants_available(samples.len(), det, sps)?;
    if total < det.pilot_symbols {
        return Err(ModemError::ShortWaveform {
            needed: det.sampling_offset + det.pilot_symbols * sps,
            got: samples.len(),
        });
    }
    let bps = scheme.bits_per_symbol();
    let mut bits = Vec::with_capacity((total - det.pilot_symbols) * bps);
    for k in det.pilot_symbols..total {
        let z = samples[det.sampling_offset + k * sps] / gain;
        match scheme.kind {
            ModKind::Ask => {
                let r = scheme.ratio.expect("validated");
                let d_hi = (z - Complex64::new(1.0, 0.0)).norm_sqr();
                let d_lo = (z - Complex64::new(r, 0.0)).norm_sqr();
                bits.push(u8::from(d_hi <= d_lo));
            }
            ModKind::Psk => psk_slice(z, scheme.order, &mut bits),
            ModKind::Ofdm => unreachable!("rejected by validate"),
        }
    }
    Ok(bits)
}

/// Demodulate OFDM with exact chip-level per-subcarrier equalisation.
///
/// The chip-rate aggregate channel is `G[j] = Σ_{u ∈ [j·sps, (j+1)·sps)}
/// h[u]` (each chip is held for `sps` samples and each chip instant is read
/// at the last sample of its slot, so the received chip stream is exactly the
/// transmitted chip stream convolved with `G`). When the cyclic prefix covers
/// `len(G) − 1` chips, dividing each tone by the DFT of `G` is exact;
/// anything shorter leaks inter-block interference and produces an error
/// floor. Complete blocks are demodulated; trailing samples (e.g. the channel
/// tail) are ignored, but at least one complete block must be present.
pub fn ofdm_demodulate(
    received: &Waveform,
    scheme: &ModulationScheme,
    channel: &ChannelImpulseResponse,
) -> Result<Vec<u8>, ModemError> {
    scheme.validate()?;
    if scheme.kind != ModKind::Ofdm {
        return Err(ModemError::InvalidScheme(
            "ofdm_demodulate requires an ofdm scheme".into(),
        ));
    }
    let (da, db) = (received.sample_interval, channel.sample_interval());
    if (da - db).abs() > 1e-9 * da.max(db) {
        return Err(ModemError::SampleIntervalMismatch { a: da, b: db });
    }
    let n = scheme.subcarriers.expect("validated");
    let cp = scheme
        .cyclic_prefix
        .ok_or(ModemError::UnresolvedCyclicPrefix)?;
    let sps = scheme.samples_per_symbol;
    let delta = sps - 1;

    // Chip-rate aggregate channel: chunk sums of h.
    let h = channel.samples();
    let g: Vec<Complex64> = h
        .chunks(sps)
        .map(|chunk| chunk.iter().sum::<Complex64>())
        .collect();
    // Tone response: DFT of G aliased into N bins (exact when len(G) ≤ N and
    // the prefix covers the memory; the alias fold is what a length-N
    // equaliser can see either way).
    let mut tone_gain = vec![Complex64::new(0.0, 0.0); n];
    for (j, &gj) in g.iter().enumerate() {
        tone_gain[j % n] += gj;
    }
    dsp::fft_in_place(&mut tone_gain, false);

    let len = received.len();
    let n_chips = if len > delta { (len - delta - 1) / sps + 1 } else { 0 };
    let block_chips = n + cp;
    let blocks = n_chips / block_chips;
    if blocks == 0 {
        return Err(ModemError::ShortWaveform {
            needed: delta + (block_chips - 1) * sps + 1,
            got: len,
        });
    }

    let scale = 1.0 / (n as f64).sqrt();
    let bps = scheme.bits_per_symbol();
    let mut bits = Vec::with_capacity(blocks * n * bps);
    let mut window = vec![Complex64::new(0.0, 0.0); n];
    for b in 0..blocks {
        let first_chip = b * block_chips + cp;
        for (i, w) in window.iter_mut().enumerate() {
            *w = received.samples[(first_chip + i) * sps + delta];
        }
        dsp::fft_in_place(&mut window, false);
        for k in 0..n {
            let y = window[k] * scale;
            let s = if tone_gain[k].norm_sqr() > 0.0 {
                y / tone_gain[k]
            } else {
                Complex64::new(0.0, 0.0)
            };
            psk_slice(s, scheme.order, &mut bits);
        }
    }
    Ok(bits)
}
