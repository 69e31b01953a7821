//! Monte Carlo link engine.
//!
//! Simulates one or more concurrent point-to-point streams through a
//! [`ChannelMatrix`]: modulate → optional time-reversal precoding → scale to
//! transmit power → superpose every transmitter's contribution at each
//! receiver → add thermal noise → detect → count bit errors. Alongside the
//! error counts it accumulates a signal/ISI/CCI/noise power decomposition at
//! the sampling instants, and [`measure_sinr`] computes the same
//! decomposition deterministically from the equivalent channels alone.
//!
//! Conventions and stated assumptions (the paper-gap choices are spelled out
//! here because every result depends on them):
//!
//! * **Power.** `|sample|²` is instantaneous power in milliwatts. A link's
//!   amplitude scale is set so that the long-run mean power of its modulated
//!   stream (duty factor included, precoding filter unit-energy) equals
//!   `tx_power_dbm`.
//! * **Noise.** Thermal floor `psd_dbm_per_hz` (default −174) plus receiver
//!   noise figure (default 10 dB), integrated over `bandwidth_hz` (default
//!   the simulation bandwidth `1/sample_interval`).
//! * **Stopping rule.** A link stops accumulating once it has both
//!   `min_bits` bits and `max_errors` errors, or at the hard cap of 10⁷
//!   bits; a reported BER of 0 means no errors were observed before the
//!   stop. Accumulation freezes per link at trial granularity, in trial
//!   order, so results do not depend on scheduling.
//! * **Symbol timing.** The receiver knows the pre-characterized equivalent
//!   channel (static package). Coherent slicing samples at the peak of the
//!   pulse-width-summed equivalent channel; energy detection integrates the
//!   symbol-period window capturing the most equivalent-channel energy. With
//!   time reversal off the equivalent channel is the raw (causal) CIR, so
//!   both reduce to the strongest-tap rule; with it on, the window straddles
//!   the autocorrelation peak.
//! * **Reproducibility.** Every random quantity comes from a ChaCha8 stream
//!   keyed by `(master seed, purpose, link, trial)`, so any trial can be
//!   generated independently and in parallel; aggregation folds trials in
//!   index order. Identical inputs and seed give bit-identical results at
//!   any worker count.

use crate::chan::{ChanError, ChannelImpulseResponse, ChannelMatrix};
use crate::dsp;
use crate::modem::{
    self, ChannelReference, DetectorConfig, DetectorKind, ModKind, ModemError, ModulationScheme,
    Waveform,
};
use crate::tr::{build_tr_filter, degrade_filter, FilterDegradation, TrError};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard cap on accumulated data bits per link; links that reach it stop even
/// if they have not logged `max_errors` errors.
pub const MAX_BITS_CAP: u64 = 10_000_000;

/// Smallest acceptable `min_bits`: below this, binomial confidence intervals
/// on the BERs of interest are too loose to mean anything.
pub const MIN_BITS_FLOOR: u64 = 10_000;

/// Data symbols (OFDM: chips) per Monte Carlo trial for the slowest link in
/// the set; faster links fit proportionally more symbols into the shared
/// trial window so concurrent streams stay time-aligned.
const TRIAL_SYMBOLS: usize = 2048;

/// Relative tolerance for the symbol-rate ↔ sample-grid consistency check.
const RATE_GRID_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum NetsimError {
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("invalid link set: {0}")]
    InvalidLinkSet(String),
    #[error("link {index}: {message}")]
    InvalidLink { index: usize, message: String },
    #[error(
        "symbol rate {rate:e} Bd is off the sample grid; nearest representable rate is {nearest:e} Bd"
    )]
    RateOffGrid { rate: f64, nearest: f64 },
    #[error("min_bits must be at least 10000, got {0}")]
    MinBitsTooSmall(u64),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("SINR decomposition unsupported: {0}")]
    UnsupportedSinr(String),
    #[error(transparent)]
    Channel(#[from] ChanError),
    #[error(transparent)]
    Modem(#[from] ModemError),
    #[error(transparent)]
    Precoding(#[from] TrError),
}

/// Additive receiver noise description. All-dB fields; conversion to linear
/// milliwatts happens once, inside [`NoiseModel::power_mw`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    pub psd_dbm_per_hz: f64,
    pub noise_figure_db: f64,
    /// Integration bandwidth; `None` means the simulation bandwidth
    /// `1/sample_interval`.
    pub bandwidth_hz: Option<f64>,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            psd_dbm_per_hz: -174.0,
            noise_figure_db: 10.0,
            bandwidth_hz: None,
        }
    }
}

impl NoiseModel {
    /// Noiseless receiver (−∞ dBm/Hz floor).
    pub fn off() -> Self {
        Self {
            psd_dbm_per_hz: f64::NEG_INFINITY,
            noise_figure_db: 0.0,
            bandwidth_hz: None,
        }
    }

    pub fn validate(&self) -> Result<(), NetsimError> {
        if self.psd_dbm_per_hz.is_nan() || self.psd_dbm_per_hz == f64::INFINITY {
            return Err(NetsimError::InvalidNoise(format!(
                "psd_dbm_per_hz must be finite or -inf, got {}",
                self.psd_dbm_per_hz
            )));
        }
        if !self.noise_figure_db.is_finite() {
            return Err(NetsimError::InvalidNoise(format!(
                "noise_figure_db must be finite, got {}",
                self.noise_figure_db
            )));
        }
        match self.bandwidth_hz {
            None => Ok(()),
            Some(b) if b.is_finite() && b > 0.0 => Ok(()),
            Some(b) => Err(NetsimError::InvalidNoise(format!(
                "bandwidth_hz must be > 0, got {b}"
            ))),
        }
    }

    /// Total noise power in linear milliwatts at the given sample interval.
    pub fn power_mw(&self, sample_interval: f64) -> f64 {
        let bw = self.bandwidth_hz.unwrap_or(1.0 / sample_interval);
        dsp::dbm_to_mw(self.psd_dbm_per_hz + self.noise_figure_db) * bw
    }
}

/// Add circularly-symmetric complex Gaussian noise of the model's power to a
/// waveform. Deterministic per seed.
pub fn add_awgn(x: &Waveform, noise: &NoiseModel, seed: u64) -> Result<Waveform, NetsimError> {
    noise.validate()?;
    let sigma_sq = noise.power_mw(x.sample_interval);
    if sigma_sq == 0.0 {
        return Ok(x.clone());
    }
    let scale = (sigma_sq / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = x
        .samples
        .iter()
        .map(|s| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            s + Complex64::new(scale * re, scale * im)
        })
        .collect();
    Ok(Waveform {
        samples,
        sample_interval: x.sample_interval,
    })
}

/// Receiver front-end selection for a link. `Auto` picks the energy detector
/// for ASK and coherent slicing otherwise; OFDM links always use the
/// built-in per-subcarrier equalising demodulator and require `Auto`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DetectorChoice {
    #[default]
    Auto,
    Energy,
    Coherent,
    MatchedFilter,
}

/// One directed stream: transmitter node, receiver node, and the full
/// transmit/receive chain description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub tx: usize,
    pub rx: usize,
    pub tx_power_dbm: f64,
    /// Symbols per second; must satisfy
    /// `symbol_rate · samples_per_symbol · sample_interval = 1` within 10⁻⁶
    /// relative (rates snap to the sample grid).
    pub symbol_rate: f64,
    pub scheme: ModulationScheme,
    #[serde(default)]
    pub use_tr: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degradation: Option<FilterDegradation>,
    #[serde(default)]
    pub detector: DetectorChoice,
    /// Training-prefix length override (symbols); defaults to the detector's
    /// own default (128 for energy detection, none otherwise).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pilot_symbols: Option<usize>,
}

/// Concurrency pattern of a link set: distinct transmitters each serving
/// their own receiver (`multi_tx`), one transmitter sending superimposed
/// per-receiver streams (`scatter`), or any mixture (`combined`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcurrencyMode {
    MultiTx,
    Scatter,
    Combined,
}

/// A set of simultaneously active links sharing the channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSet {
    pub links: Vec<LinkConfig>,
    pub mode: ConcurrencyMode,
}

impl LinkSet {
    pub fn single(link: LinkConfig) -> Self {
        Self {
            links: vec![link],
            mode: ConcurrencyMode::MultiTx,
        }
    }

    /// Structural validation against a channel matrix: entries present,
    /// schemes and detectors coherent, rates on the sample grid, and the
    /// mode's topology invariants (shared transmitter in scatter mode,
    /// distinct transmitters in multi-tx mode, globally distinct receivers,
    /// no node both transmitting and receiving).
    pub fn validate(&self, channels: &ChannelMatrix) -> Result<(), NetsimError> {
        if self.links.is_empty() {
            return Err(NetsimError::InvalidLinkSet("no links".into()));
        }
        if self.links.len() > (1 << 14) {
            return Err(NetsimError::InvalidLinkSet(format!(
                "at most {} links per set, got {}",
                1 << 14,
                self.links.len()
            )));
        }
        let dt = channels.sample_interval().ok_or_else(|| {
            NetsimError::InvalidLinkSet("channel matrix has no entries".into())
        })?;
        let bad_link = |index: usize, message: String| NetsimError::InvalidLink { index, message };
        for (i, link) in self.links.iter().enumerate() {
            channels.require(link.tx, link.rx)?;
            link.scheme
                .validate()
                .map_err(|e| bad_link(i, e.to_string()))?;
            if !link.tx_power_dbm.is_finite() {
                return Err(bad_link(
                    i,
                    format!("tx_power_dbm must be finite, got {}", link.tx_power_dbm),
                ));
            }
            if !(link.symbol_rate.is_finite() && link.symbol_rate > 0.0) {
                return Err(bad_link(
                    i,
                    format!("symbol_rate must be > 0, got {}", link.symbol_rate),
                ));
            }
            let period = link.scheme.samples_per_symbol as f64 * dt;
            if (link.symbol_rate * period - 1.0).abs() > RATE_GRID_TOL {
                return Err(NetsimError::RateOffGrid {
                    rate: link.symbol_rate,
                    nearest: 1.0 / period,
                });
            }
            if link.scheme.kind == ModKind::Ofdm {
                if link.detector != DetectorChoice::Auto {
                    return Err(bad_link(
                        i,
                        "ofdm links use the built-in equalising demodulator; set detector to auto"
                            .into(),
                    ));
                }
            } else {
                resolve_detector(link)
                    .validate(&link.scheme)
                    .map_err(|e| bad_link(i, e.to_string()))?;
            }
        }
        match self.mode {
            ConcurrencyMode::Scatter => {
                let tx0 = self.links[0].tx;
                if self.links.iter().any(|l| l.tx != tx0) {
                    return Err(NetsimError::InvalidLinkSet(
                        "scatter mode requires every stream to share one transmitter".into(),
                    ));
                }
            }
            ConcurrencyMode::MultiTx => {
                let mut txs: Vec<usize> = self.links.iter().map(|l| l.tx).collect();
                txs.sort_unstable();
                txs.dedup();
                if txs.len() != self.links.len() {
                    return Err(NetsimError::InvalidLinkSet(
                        "multi_tx mode requires distinct transmitters (use scatter or combined to share one)"
                            .into(),
                    ));
                }
            }
            ConcurrencyMode::Combined => {}
        }
        let mut rxs: Vec<usize> = self.links.iter().map(|l| l.rx).collect();
        rxs.sort_unstable();
        rxs.dedup();
        if rxs.len() != self.links.len() {
            return Err(NetsimError::InvalidLinkSet(
                "receivers must be distinct (one stream per receiver)".into(),
            ));
        }
        for link in &self.links {
            if self.links.iter().any(|other| other.tx == link.rx) {
                return Err(NetsimError::InvalidLinkSet(format!(
                    "node {} both transmits and receives (half-duplex nodes only)",
                    link.rx
                )));
            }
        }
        Ok(())
    }
}

/// Integer samples-per-symbol for a symbol rate on the sample grid.
pub fn sps_for_rate(symbol_rate: f64, sample_interval: f64) -> Result<usize, NetsimError> {
    if !(symbol_rate.is_finite() && symbol_rate > 0.0) {
        return Err(NetsimError::InvalidLinkSet(format!(
            "symbol_rate must be > 0, got {symbol_rate}"
        )));
    }
    let ideal = 1.0 / (symbol_rate * sample_interval);
    let sps = ideal.round().max(1.0) as usize;
    let achieved = symbol_rate * sps as f64 * sample_interval;
    if (achieved - 1.0).abs() > RATE_GRID_TOL {
        return Err(NetsimError::RateOffGrid {
            rate: symbol_rate,
            nearest: 1.0 / (sps as f64 * sample_interval),
        });
    }
    Ok(sps)
}

/// Mean power decomposition at the sampling instants, in linear milliwatts.
///
/// `signal` is the current symbol through the sampling-point gain of the
/// link's own equivalent channel, `isi` the residual of the own stream,
/// `cci` every other stream, `noise` the additive noise, `total` the
/// composite received power measured independently. Components are raw
/// second moments: for zero-mean constellations (PSK, OFDM) they sum to the
/// total in expectation; 2-ASK carries a DC component whose cross terms are
/// attributed to no component and appear as a (sign-indefinite) difference
/// between `total` and the component sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct SinrBreakdown {
    pub signal_mw: f64,
    pub isi_mw: f64,
    pub cci_mw: f64,
    pub noise_mw: f64,
    pub total_mw: f64,
}

impl SinrBreakdown {
    pub fn sinr_linear(&self) -> f64 {
        self.signal_mw / (self.isi_mw + self.cci_mw + self.noise_mw)
    }

    pub fn sinr_db(&self) -> f64 {
        dsp::linear_to_db(self.sinr_linear())
    }

    /// `signal/(ISI+CCI)`: the SINR ceiling approached as transmit powers
    /// grow uniformly and interference drowns the noise floor.
    pub fn interference_ceiling_db(&self) -> f64 {
        dsp::linear_to_db(self.signal_mw / (self.isi_mw + self.cci_mw))
    }

    pub fn component_sum_mw(&self) -> f64 {
        self.signal_mw + self.isi_mw + self.cci_mw + self.noise_mw
    }
}

/// Per-link outcome of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkResult {
    pub tx: usize,
    pub rx: usize,
    /// Data bits compared (pilots excluded).
    pub bits: u64,
    pub errors: u64,
    /// `errors/bits`; 0 means no errors observed before the stopping rule
    /// ended accumulation.
    pub ber: f64,
    /// 95% Wilson-score confidence half-width on `ber`.
    pub ber_ci95: f64,
    pub sinr: SinrBreakdown,
    pub sinr_db: f64,
    /// Information rate of this link in bits/second (OFDM: net of the cyclic
    /// prefix).
    pub data_rate_bps: f64,
}

/// Outcome of [`simulate_link`] / [`simulate_concurrent`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub links: Vec<LinkResult>,
    pub aggregate_rate_bps: f64,
    pub seed: u64,
    pub total_bits: u64,
}

fn wilson_half_width(errors: u64, bits: u64) -> f64 {
    if bits == 0 {
        return 0.0;
    }
    let z = 1.959963984540054_f64;
    let n = bits as f64;
    let p = errors as f64 / n;
    (z / (1.0 + z * z / n)) * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt()
}

fn gcd(a: usize, b: usize) -> usize {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Mean, variance, and second moment of one constellation symbol (OFDM:
/// one chip, which is zero-mean unit-power for any PSK tone loading).
fn symbol_stats(scheme: &ModulationScheme) -> (f64, f64, f64) {
    match scheme.kind {
        ModKind::Ask => {
            let r = scheme.ratio.unwrap_or(0.5);
            let mu = (1.0 + r) / 2.0;
            let m2 = (1.0 + r * r) / 2.0;
            (mu, m2 - mu * mu, m2)
        }
        ModKind::Psk | ModKind::Ofdm => (0.0, 1.0, 1.0),
    }
}

fn resolve_detector(link: &LinkConfig) -> DetectorConfig {
    let base = match (link.detector, link.scheme.kind) {
        (DetectorChoice::Auto, ModKind::Ask) => DetectorConfig::energy(),
        (DetectorChoice::Auto, _) => DetectorConfig::coherent(),
        (DetectorChoice::Energy, _) => DetectorConfig::energy(),
        (DetectorChoice::Coherent, _) => DetectorConfig::coherent(),
        (DetectorChoice::MatchedFilter, _) => DetectorConfig::matched_filter(),
    };
    DetectorConfig {
        pilot_symbols: link.pilot_symbols.unwrap_or(base.pilot_symbols),
        ..base
    }
}

/// Fully resolved per-link simulation plan (transmit chain + receive chain +
/// every cross-channel this receiver sees).
struct LinkPlan {
    tx: usize,
    rx: usize,
    scheme: ModulationScheme,
    amp: f64,
    pilot_symbols: usize,
    /// Symbols (OFDM: chips) transmitted per trial.
    units: usize,
    data_bits: usize,
    x_len: usize,
    sps: usize,
    duty: usize,
    det: DetectorConfig,
    /// Raw-domain kernel from each stream j to this receiver:
    /// `conv(precode_j, h(tx_j → rx_i))`, unscaled.
    kernels: Vec<Vec<Complex64>>,
    /// Own equivalent channel scaled by this link's amplitude — the
    /// matched-filter reference and the OFDM equaliser channel.
    response_scaled: Vec<Complex64>,
    mf: Option<Vec<Complex64>>,
    ofdm_cir: Option<ChannelImpulseResponse>,
    /// Coherent slicing gain at the sampling instant (amplitude included).
    gain: Complex64,
    /// Pulse-summed detection-domain gain at the sampling instant, without
    /// the amplitude factor.
    c0_unscaled: Complex64,
    off: usize,
    data_rate_bps: f64,
    rx_len: usize,
}

fn build_plans(
    channels: &ChannelMatrix,
    set: &LinkSet,
    noise: &NoiseModel,
    powers_override: Option<&[f64]>,
) -> Result<(Vec<LinkPlan>, f64, f64), NetsimError> {
    set.validate(channels)?;
    noise.validate()?;
    if let Some(p) = powers_override {
        if p.len() != set.links.len() {
            return Err(NetsimError::InvalidLinkSet(format!(
                "expected one tx power per link ({}), got {}",
                set.links.len(),
                p.len()
            )));
        }
        if let Some(bad) = p.iter().find(|v| !v.is_finite()) {
            return Err(NetsimError::InvalidLinkSet(format!(
                "tx power override must be finite, got {bad}"
            )));
        }
    }
    let dt = channels.sample_interval().expect("validated non-empty");
    let sigma_sq = noise.power_mw(dt);
    let n = set.links.len();
    let sps_max = set
        .links
        .iter()
        .map(|l| l.scheme.samples_per_symbol)
        .max()
        .expect("non-empty");
    let trial_span = TRIAL_SYMBOLS * sps_max;

    // Pass 1: transmit chains.
    let mut precodes: Vec<Option<Vec<Complex64>>> = Vec::with_capacity(n);
    for link in &set.links {
        if link.use_tr {
            let h = channels.require(link.tx, link.rx)?;
            let g = build_tr_filter(h);
            let g = match &link.degradation {
                Some(d) => degrade_filter(&g, d)?,
                None => g,
            };
            precodes.push(Some(g.taps().to_vec()));
        } else {
            precodes.push(None);
        }
    }

    // Pass 2: per-link plans with every cross-kernel resolved.
    let mut partial: Vec<LinkPlan> = Vec::with_capacity(n);
    for (i, link) in set.links.iter().enumerate() {
        let mut scheme = link.scheme;
        let sps = scheme.samples_per_symbol;
        let mut kernels: Vec<Vec<Complex64>> = Vec::with_capacity(n);
        for (j, other) in set.links.iter().enumerate() {
            let h = channels.require(other.tx, link.rx)?;
            kernels.push(match &precodes[j] {
                Some(g) => dsp::convolve(g, h.samples()),
                None => h.samples().to_vec(),
            });
        }
        if scheme.kind == ModKind::Ofdm && scheme.cyclic_prefix.is_none() {
            scheme.cyclic_prefix = Some(modem::resolve_ofdm_cyclic_prefix(
                &scheme,
                kernels[i].len(),
            ));
        }
        let bad_link = |message: String| NetsimError::InvalidLink { index: i, message };
        let det_base = resolve_detector(link);
        let pilot_symbols = if scheme.kind == ModKind::Ofdm {
            0
        } else {
            det_base.pilot_symbols
        };
        let bps = scheme.bits_per_symbol();
        let (units, data_bits) = match scheme.kind {
            ModKind::Ofdm => {
                let tones = scheme.subcarriers.expect("validated");
                let block_chips = tones + scheme.cyclic_prefix.expect("resolved");
                let blocks = (trial_span / sps) / block_chips;
                if blocks == 0 {
                    return Err(bad_link(format!(
                        "one OFDM block ({block_chips} chips) does not fit the trial window"
                    )));
                }
                (blocks * block_chips, blocks * tones * bps)
            }
            _ => {
                let total = trial_span / sps;
                if total <= pilot_symbols {
                    return Err(bad_link(format!(
                        "the {pilot_symbols}-symbol training prefix consumes the whole trial window ({total} symbols)"
                    )));
                }
                (total, (total - pilot_symbols) * bps)
            }
        };
        let power_dbm = powers_override
            .map(|p| p[i])
            .unwrap_or(link.tx_power_dbm);
        let amp = (dsp::dbm_to_mw(power_dbm) / scheme.mean_stream_power()).sqrt();
        let duty = if scheme.kind == ModKind::Ofdm {
            sps
        } else {
            scheme.effective_pulse_width()
        };
        let own_raw = &kernels[i];
        let response_scaled: Vec<Complex64> = own_raw.iter().map(|s| s * amp).collect();
        let mf: Option<Vec<Complex64>> = if det_base.kind == DetectorKind::MatchedFilterCoherent {
            let norm = dsp::energy(own_raw).sqrt();
            Some(own_raw.iter().rev().map(|s| s.conj() / norm).collect())
        } else {
            None
        };
        let det_eq: Vec<Complex64> = match &mf {
            Some(m) => dsp::convolve(own_raw, m),
            None => own_raw.clone(),
        };
        // Timing from the pre-characterized equivalent channel: coherent
        // slicing samples at the peak of the pulse-summed symbol response
        // ẽ; energy detection integrates the symbol-period window capturing
        // the most |ẽ|² (receiver-optimal placement — for a causal raw
        // channel this starts near the strongest tap, for a TR
        // autocorrelation it sits on the focused lobe). The SINR bookkeeping
        // instant is the pulse-summed peak in both cases.
        let summed = dsp::sliding_sum(&det_eq, duty);
        let off = dsp::peak_index(&summed).expect("non-degenerate channel");
        let off_detect = if det_base.kind == DetectorKind::Energy {
            let profile: Vec<f64> = summed.iter().map(|s| s.norm_sqr()).collect();
            max_energy_window_start(&profile, sps)
        } else {
            off
        };
        let c0_unscaled = summed[off];
        let gain = c0_unscaled * amp;
        let det = DetectorConfig {
            sampling_offset: off_detect,
            ..det_base
        };
        let ofdm_cir = if scheme.kind == ModKind::Ofdm {
            Some(ChannelImpulseResponse::new(
                response_scaled.clone(),
                dt,
                0.0,
            )?)
        } else {
            None
        };
        let data_rate_bps = match scheme.kind {
            ModKind::Ofdm => {
                let tones = scheme.subcarriers.expect("validated") as f64;
                let cp = scheme.cyclic_prefix.expect("resolved") as f64;
                link.symbol_rate * tones * bps as f64 / (tones + cp)
            }
            _ => link.symbol_rate * bps as f64,
        };
        partial.push(LinkPlan {
            tx: link.tx,
            rx: link.rx,
            scheme,
            amp,
            pilot_symbols,
            units,
            data_bits,
            x_len: units * sps,
            sps,
            duty,
            det,
            kernels,
            response_scaled,
            mf,
            ofdm_cir,
            gain,
            c0_unscaled,
            off,
            data_rate_bps,
            rx_len: 0,
        });
    }

    // Received length per victim: longest stream contribution, padded so the
    // final symbol's window and sampling instant always exist.
    let x_lens: Vec<usize> = partial.iter().map(|p| p.x_len).collect();
    for plan in partial.iter_mut() {
        let longest = plan
            .kernels
            .iter()
            .zip(&x_lens)
            .map(|(k, xl)| xl + k.len() - 1)
            .max()
            .expect("non-empty");
        plan.rx_len = longest + plan.sps + plan.duty;
    }
    Ok((partial, dt, sigma_sq))
}

/// Start index of the `width`-sample window holding the largest sum of
/// `values` (first such window on ties). Windows may run past the end; the
/// tail is treated as zero.
fn max_energy_window_start(values: &[f64], width: usize) -> usize {
    let n = values.len();
    let mut cur: f64 = values.iter().take(width.min(n)).sum();
    let mut best = cur;
    let mut best_start = 0;
    for start in 1..n {
        cur -= values[start - 1];
        if start + width - 1 < n {
            cur += values[start + width - 1];
        }
        if cur > best {
            best = cur;
            best_start = start;
        }
    }
    best_start
}

fn substream_rng(master: u64, purpose: u8, link: usize, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    let stream = ((purpose as u64) << 62)
        | (((link as u64) & 0x3FFF) << 48)
        | (trial & 0x0000_FFFF_FFFF_FFFF);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, Default)]
struct TrialLink {
    bits: u64,
    errors: u64,
    sig: f64,
    isi: f64,
    cci: f64,
    noise: f64,
    total: f64,
    instants: u64,
}

fn run_trial(
    plans: &[LinkPlan],
    dt: f64,
    sigma_sq: f64,
    master: u64,
    trial: u64,
) -> Result<Vec<TrialLink>, NetsimError> {
    let n = plans.len();
    let zero = Complex64::new(0.0, 0.0);

    // Transmit side: independent data per stream, shared trial window.
    let mut xs: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut datas: Vec<Vec<u8>> = Vec::with_capacity(n);
    for (j, plan) in plans.iter().enumerate() {
        let mut rng = substream_rng(master, 0, j, trial);
        let data: Vec<u8> = (0..plan.data_bits).map(|_| rng.gen_range(0..=1u8)).collect();
        let mut bits = modem::pilot_bits(&plan.scheme, plan.pilot_symbols);
        bits.extend_from_slice(&data);
        let w = modem::modulate(&bits, &plan.scheme, dt)?;
        xs.push(w.samples.iter().map(|s| s * plan.amp).collect());
        datas.push(data);
    }

    let mut out = Vec::with_capacity(n);
    for (i, plan) in plans.iter().enumerate() {
        let len = plan.rx_len;
        let mut own = dsp::convolve(&xs[i], &plan.kernels[i]);
        own.resize(len, zero);
        let mut cci = vec![zero; len];
        for (j, x) in xs.iter().enumerate() {
            if j == i {
                continue;
            }
            for (slot, v) in cci.iter_mut().zip(dsp::convolve(x, &plan.kernels[j])) {
                *slot += v;
            }
        }
        let noise: Vec<Complex64> = if sigma_sq > 0.0 {
            let scale = (sigma_sq / 2.0).sqrt();
            let mut rng = substream_rng(master, 1, i, trial);
            (0..len)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(scale * re, scale * im)
                })
                .collect()
        } else {
            vec![zero; len]
        };
        let y_raw: Vec<Complex64> = (0..len).map(|t| own[t] + cci[t] + noise[t]).collect();
        let received = Waveform {
            samples: y_raw,
            sample_interval: dt,
        };
        let got = match plan.scheme.kind {
            ModKind::Ofdm => modem::ofdm_demodulate(
                &received,
                &plan.scheme,
                plan.ofdm_cir.as_ref().expect("ofdm plan"),
            )?,
            _ => {
                let reference = match plan.det.kind {
                    DetectorKind::Energy => None,
                    DetectorKind::Coherent => Some(ChannelReference::Gain(plan.gain)),
                    DetectorKind::MatchedFilterCoherent => {
                        Some(ChannelReference::Response(&plan.response_scaled))
                    }
                };
                modem::detect(&received, &plan.scheme, &plan.det, reference)?
            }
        };
        let data = &datas[i];
        let compared = data.len().min(got.len());
        debug_assert_eq!(compared, data.len(), "padded trial must cover all data");
        let errors = got[..compared]
            .iter()
            .zip(&data[..compared])
            .filter(|(a, b)| a != b)
            .count() as u64;

        // Component decomposition at the sampling instants, in the
        // detection domain (post matched filter when one is used).
        let (own_det, cci_det, noise_det) = match &plan.mf {
            Some(m) => (
                dsp::convolve(&own, m),
                dsp::convolve(&cci, m),
                dsp::convolve(&noise, m),
            ),
            None => (own, cci, noise),
        };
        let mut tl = TrialLink::default();
        tl.bits = compared as u64;
        tl.errors = errors;
        for k in plan.pilot_symbols..plan.units {
            let t = plan.off + k * plan.sps;
            let s_val = xs[i][k * plan.sps];
            let sig = s_val * plan.c0_unscaled;
            let own_t = own_det[t];
            let isi = own_t - sig;
            let cc = cci_det[t];
            let nz = noise_det[t];
            tl.sig += sig.norm_sqr();
            tl.isi += isi.norm_sqr();
            tl.cci += cc.norm_sqr();
            tl.noise += nz.norm_sqr();
            tl.total += (own_t + cc + nz).norm_sqr();
            tl.instants += 1;
        }
        out.push(tl);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default)]
struct LinkAccum {
    bits: u64,
    errors: u64,
    sig: f64,
    isi: f64,
    cci: f64,
    noise: f64,
    total: f64,
    instants: u64,
    frozen: bool,
}

/// Simulate one link in isolation. Equivalent to [`simulate_concurrent`]
/// with a singleton set.
pub fn simulate_link(
    channels: &ChannelMatrix,
    link: &LinkConfig,
    noise: &NoiseModel,
    min_bits: u64,
    max_errors: u64,
    seed: u64,
) -> Result<SimResult, NetsimError> {
    simulate_concurrent(
        channels,
        &LinkSet::single(link.clone()),
        noise,
        min_bits,
        max_errors,
        seed,
    )
}

/// Simulate every link in the set concurrently: each receiver's input is the
/// superposition of all transmitters' contributions through their respective
/// CIRs plus noise. Per-link accumulation follows the stopping rule
/// documented at module level. Deterministic for fixed inputs and seed at
/// any worker count.
pub fn simulate_concurrent(
    channels: &ChannelMatrix,
    set: &LinkSet,
    noise: &NoiseModel,
    min_bits: u64,
    max_errors: u64,
    seed: u64,
) -> Result<SimResult, NetsimError> {
    if min_bits < MIN_BITS_FLOOR {
        return Err(NetsimError::MinBitsTooSmall(min_bits));
    }
    let (plans, dt, sigma_sq) = build_plans(channels, set, noise, None)?;
    let n = plans.len();
    let mut acc = vec![LinkAccum::default(); n];
    let trials_cap = plans
        .iter()
        .map(|p| MAX_BITS_CAP.div_ceil(p.data_bits as u64))
        .max()
        .expect("non-empty");
    let first_wave = plans
        .iter()
        .map(|p| min_bits.div_ceil(p.data_bits as u64))
        .max()
        .expect("non-empty")
        .max(1);

    let mut done: u64 = 0;
    let mut wave = first_wave.min(trials_cap);
    while wave > 0 {
        let outcomes: Vec<Vec<TrialLink>> = (done..done + wave)
            .into_par_iter()
            .map(|t| run_trial(&plans, dt, sigma_sq, seed, t))
            .collect::<Result<_, _>>()?;
        for trial_links in &outcomes {
            for (a, tl) in acc.iter_mut().zip(trial_links) {
                if a.frozen {
                    continue;
                }
                a.bits += tl.bits;
                a.errors += tl.errors;
                a.sig += tl.sig;
                a.isi += tl.isi;
                a.cci += tl.cci;
                a.noise += tl.noise;
                a.total += tl.total;
                a.instants += tl.instants;
                if (a.bits >= min_bits && a.errors >= max_errors) || a.bits >= MAX_BITS_CAP {
                    a.frozen = true;
                }
            }
        }
        done += wave;
        if acc.iter().all(|a| a.frozen) {
            break;
        }
        wave = done.min(trials_cap.saturating_sub(done));
    }

    let links = plans
        .iter()
        .zip(&acc)
        .map(|(plan, a)| {
            let inst = a.instants.max(1) as f64;
            let sinr = SinrBreakdown {
                signal_mw: a.sig / inst,
                isi_mw: a.isi / inst,
                cci_mw: a.cci / inst,
                noise_mw: a.noise / inst,
                total_mw: a.total / inst,
            };
            LinkResult {
                tx: plan.tx,
                rx: plan.rx,
                bits: a.bits,
                errors: a.errors,
                ber: a.errors as f64 / a.bits.max(1) as f64,
                ber_ci95: wilson_half_width(a.errors, a.bits),
                sinr_db: sinr.sinr_db(),
                sinr,
                data_rate_bps: plan.data_rate_bps,
            }
        })
        .collect::<Vec<_>>();
    Ok(SimResult {
        aggregate_rate_bps: links.iter().map(|l| l.data_rate_bps).sum(),
        total_bits: links.iter().map(|l| l.bits).sum(),
        links,
        seed,
    })
}

/// Deterministic signal/ISI/CCI/noise decomposition for one victim link —
/// no Monte Carlo, computed from exact second moments of the equivalent
/// channels at the victim's sampling instants.
///
/// `tx_powers_dbm` overrides every link's configured power (one entry per
/// link), which makes power sweeps cheap. OFDM victims are not supported:
/// their equaliser absorbs ISI per subcarrier, so a pre-equalisation scalar
/// SINR would misstate the link; the Monte Carlo engine still reports the
/// chip-level decomposition for them.
pub fn measure_sinr(
    channels: &ChannelMatrix,
    set: &LinkSet,
    link_index: usize,
    tx_powers_dbm: &[f64],
    noise: &NoiseModel,
) -> Result<SinrBreakdown, NetsimError> {
    if link_index >= set.links.len() {
        return Err(NetsimError::InvalidLinkSet(format!(
            "link index {link_index} out of range ({} links)",
            set.links.len()
        )));
    }
    let (plans, _dt, sigma_sq) = build_plans(channels, set, noise, Some(tx_powers_dbm))?;
    let victim = &plans[link_index];
    if victim.scheme.kind == ModKind::Ofdm {
        return Err(NetsimError::UnsupportedSinr(
            "OFDM victims equalise per subcarrier; use the Monte Carlo engine's chip-level breakdown"
                .into(),
        ));
    }
    let to_det = |raw: &[Complex64]| -> Vec<Complex64> {
        match &victim.mf {
            Some(m) => dsp::convolve(raw, m),
            None => raw.to_vec(),
        }
    };

    // Own stream: signal at the sampling tap, ISI over the rest of its
    // symbol-spaced comb.
    let (mu_v, var_v, m2_v) = symbol_stats(&victim.scheme);
    let e_own = dsp::sliding_sum(&to_det(&victim.kernels[link_index]), victim.duty);
    let off = victim.off;
    let amp2_v = victim.amp * victim.amp;
    let signal = m2_v * amp2_v * e_own[off].norm_sqr();
    let mut isi_abs2 = 0.0;
    let mut isi_sum = Complex64::new(0.0, 0.0);
    let mut u = off % victim.sps;
    while u < e_own.len() {
        if u != off {
            isi_abs2 += e_own[u].norm_sqr();
            isi_sum += e_own[u];
        }
        u += victim.sps;
    }
    let isi = amp2_v * (var_v * isi_abs2 + mu_v * mu_v * isi_sum.norm_sqr());

    // Cross streams: average the comb second moment over the victim-instant
    // residues each interferer's symbol grid can land on.
    let mut cci = 0.0;
    for (j, plan_j) in plans.iter().enumerate() {
        if j == link_index {
            continue;
        }
        let (mu_j, var_j, _) = symbol_stats(&plan_j.scheme);
        let e_j = dsp::sliding_sum(&to_det(&victim.kernels[j]), plan_j.duty);
        let g = gcd(victim.sps, plan_j.sps);
        let mut acc = 0.0;
        let mut r = off % g;
        while r < plan_j.sps {
            let mut abs2 = 0.0;
            let mut sum = Complex64::new(0.0, 0.0);
            let mut u = r;
            while u < e_j.len() {
                abs2 += e_j[u].norm_sqr();
                sum += e_j[u];
                u += plan_j.sps;
            }
            acc += var_j * abs2 + mu_j * mu_j * sum.norm_sqr();
            r += g;
        }
        cci += plan_j.amp * plan_j.amp * acc * g as f64 / plan_j.sps as f64;
    }

    let noise_mw = sigma_sq;
    Ok(SinrBreakdown {
        signal_mw: signal,
        isi_mw: isi,
        cci_mw: cci,
        noise_mw,
        total_mw: signal + isi + cci + noise_mw,
    })
}
