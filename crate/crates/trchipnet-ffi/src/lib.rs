//! C ABI for the trchipnet link-level simulator.
//!
//! Conventions:
//! - Opaque handles (`trc_cir`, `trc_filter`) are created and destroyed by
//!   this library only; pass them back to the matching `*_free` exactly once.
//! - Every fallible call returns a [`trc_status`]; `TRC_OK` is zero. On
//!   failure, [`trc_last_error_message`] returns a thread-local,
//!   NUL-terminated description valid until the next call on the same
//!   thread. On success the message is reset to the empty string.
//! - Pointer arguments must be valid for the duration of the call; NULL
//!   where a value is required yields `TRC_NULL_ARG` and no other effect.
//! - A panic inside the library is caught at the boundary and reported as
//!   `TRC_INTERNAL`; it never unwinds into the caller.

#![allow(non_camel_case_types)]
#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::OnceLock;

use trchipnet::chan::{
    self, ChanError, ChannelImpulseResponse, ChannelMatrix, ReverbChannelParams,
};
use trchipnet::modem::ModulationScheme;
use trchipnet::netsim::{
    self, DetectorChoice, LinkConfig, NetsimError, NoiseModel, SinrBreakdown,
};
use trchipnet::tr::{self, FilterDegradation, TrError, TrFilter};

/// Status code returned by every fallible API call; `TRC_OK` is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum trc_status {
    /// Success.
    TRC_OK = 0,
    /// A required pointer argument was NULL.
    TRC_NULL_ARG = 1,
    /// Arguments were structurally valid but semantically rejected.
    TRC_INVALID = 2,
    /// The operating system reported an I/O failure.
    TRC_IO = 3,
    /// A file or string could not be decoded.
    TRC_PARSE = 4,
    /// The request is outside this build's supported surface.
    TRC_UNSUPPORTED = 5,
    /// Internal invariant violation (caught panic); please report.
    TRC_INTERNAL = 6,
}

use trc_status::*;

/// Opaque sampled channel impulse response.
pub struct trc_cir {
    inner: ChannelImpulseResponse,
}

/// Opaque precoding filter.
pub struct trc_filter {
    inner: TrFilter,
}

/// Synthetic reverberant-channel parameters (all SI units).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct trc_reverb_params {
    /// First-arrival delay in seconds.
    pub propagation_delay_s: f64,
    /// Exponential power-decay constant in seconds.
    pub decay_constant_s: f64,
    /// Poisson multipath arrival rate in arrivals/second.
    pub tap_rate_hz: f64,
    /// Rician K factor (0 = fully diffuse; INFINITY = pure line of sight).
    pub rician_k: f64,
    /// Response length in seconds.
    pub duration_s: f64,
    /// Total path gain in dB (negative for loss).
    pub path_gain_db: f64,
    /// Output sample interval in seconds.
    pub sample_interval_s: f64,
}

/// Additive receiver noise description.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct trc_noise_params {
    /// One-sided PSD in dBm/Hz (-INFINITY switches noise off).
    pub psd_dbm_per_hz: f64,
    /// Receiver noise figure in dB.
    pub noise_figure_db: f64,
    /// Integration bandwidth in Hz; zero or negative means the full
    /// simulation bandwidth 1/sample_interval.
    pub bandwidth_hz: f64,
}

/// Modulation family of a link.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum trc_modulation {
    /// 2-level amplitude shift keying; `ask_ratio` sets the low level.
    TRC_MOD_ASK = 0,
    /// Phase shift keying of order `order` (power of two).
    TRC_MOD_PSK = 1,
    /// OFDM with `order`-PSK subcarriers.
    TRC_MOD_OFDM = 2,
}

/// Receiver selection for a link.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum trc_detector {
    /// Pick the modulation's natural receiver.
    TRC_DET_AUTO = 0,
    /// Non-coherent per-symbol energy windowing (ASK only).
    TRC_DET_ENERGY = 1,
    /// Coherent sampling at the equivalent-channel peak.
    TRC_DET_COHERENT = 2,
    /// Channel-matched filter in front of coherent sampling.
    TRC_DET_MATCHED_FILTER = 3,
}

/// Full description of one simulated link over a given channel.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct trc_link_params {
    /// Average transmit power in dBm.
    pub tx_power_dbm: f64,
    /// Symbol rate in baud; must land on the channel's sample grid
    /// (rate × samples/symbol × sample_interval = 1 within 1e-6).
    pub symbol_rate_bd: f64,
    pub modulation: trc_modulation,
    /// Constellation order for PSK/OFDM (power of two); ignored for ASK.
    pub order: u32,
    /// Low/high amplitude ratio in [0, 1) for ASK; ignored otherwise.
    pub ask_ratio: f64,
    /// Subcarrier count for OFDM (power of two); ignored otherwise.
    pub subcarriers: u32,
    /// OFDM cyclic prefix in subcarrier chips; 0 sizes it automatically
    /// from the equivalent channel. Ignored for ASK/PSK.
    pub cyclic_prefix_chips: u32,
    /// Driven samples per symbol period (1 = impulse-like); 0 drives the
    /// full symbol period.
    pub pulse_width: u32,
    /// Non-zero applies time-reversal precoding at the transmitter.
    pub use_tr: bool,
    pub detector: trc_detector,
    /// Precoding-filter truncation: keep only this many strongest taps;
    /// 0 keeps all taps.
    pub keep_taps: usize,
    /// Uniform tap quantization bits; 0 leaves taps unquantized.
    pub quant_bits: u32,
    /// Zero-order-hold factor on the precoding filter; 0 or 1 leaves the
    /// filter at full resolution.
    pub downsample_factor: usize,
}

/// Per-link outcome of a Monte Carlo run.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct trc_link_result {
    /// Data bits compared (pilots excluded).
    pub bits: u64,
    /// Bit errors observed.
    pub errors: u64,
    /// errors/bits.
    pub ber: f64,
    /// 95% Wilson-score half-width on `ber`.
    pub ber_ci95: f64,
    /// Measured signal/(ISI+CCI+noise) at the sampling instants, in dB.
    pub sinr_db: f64,
    /// Signal power at the sampling instants, mW.
    pub signal_mw: f64,
    /// Own-stream inter-symbol interference power, mW.
    pub isi_mw: f64,
    /// Other-stream co-channel interference power, mW.
    pub cci_mw: f64,
    /// Noise power, mW.
    pub noise_mw: f64,
    /// Information rate in bits/second.
    pub data_rate_bps: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn ok() -> trc_status {
    set_last_error("");
    TRC_OK
}

fn fail(status: trc_status, message: impl AsRef<str>) -> trc_status {
    set_last_error(message.as_ref());
    status
}

/// Run a fallible body behind the unwind boundary.
fn guarded(body: impl FnOnce() -> trc_status) -> trc_status {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            fail(TRC_INTERNAL, format!("internal panic: {msg}"))
        }
    }
}

fn chan_status(e: &ChanError) -> trc_status {
    match e {
        ChanError::Io { .. } => TRC_IO,
        ChanError::BadHeader { .. }
        | ChanError::MalformedRow { .. }
        | ChanError::NonUniformSpacing { .. }
        | ChanError::ZeroEnergy { .. }
        | ChanError::TooFewRows { .. }
        | ChanError::BadManifest { .. } => TRC_PARSE,
        _ => TRC_INVALID,
    }
}

fn tr_status(_e: &TrError) -> trc_status {
    TRC_INVALID
}

fn netsim_status(e: &NetsimError) -> trc_status {
    match e {
        NetsimError::UnsupportedSinr(_) => TRC_UNSUPPORTED,
        NetsimError::Channel(inner) => chan_status(inner),
        NetsimError::Precoding(inner) => tr_status(inner),
        _ => TRC_INVALID,
    }
}

unsafe fn str_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, trc_status> {
    if ptr.is_null() {
        return Err(fail(TRC_NULL_ARG, format!("argument `{name}` is NULL")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(TRC_PARSE, format!("argument `{name}` is not valid UTF-8")))
}

fn params_of(c: &trc_reverb_params) -> ReverbChannelParams {
    ReverbChannelParams {
        propagation_delay: c.propagation_delay_s,
        decay_constant: c.decay_constant_s,
        tap_rate: c.tap_rate_hz,
        rician_k: c.rician_k,
        duration: c.duration_s,
        path_gain_db: c.path_gain_db,
        sample_interval: c.sample_interval_s,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn trc_version() -> *const c_char {
    static VERSION: OnceLock<CString> = OnceLock::new();
    VERSION
        .get_or_init(|| CString::new(trchipnet::VERSION).expect("version has no NUL"))
        .as_ptr()
}

/// Message describing this thread's most recent failure; empty after a
/// success. Valid until the next trchipnet call on the same thread.
#[no_mangle]
pub extern "C" fn trc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Fill `out` with a named parameter preset ("inter-chip" or "intra-chip").
#[no_mangle]
pub unsafe extern "C" fn trc_reverb_params_preset(
    name: *const c_char,
    out: *mut trc_reverb_params,
) -> trc_status {
    guarded(|| {
        if out.is_null() {
            return fail(TRC_NULL_ARG, "argument `out` is NULL");
        }
        let name = match str_arg(name, "name") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match ReverbChannelParams::preset(name) {
            Some(p) => {
                *out = trc_reverb_params {
                    propagation_delay_s: p.propagation_delay,
                    decay_constant_s: p.decay_constant,
                    tap_rate_hz: p.tap_rate,
                    rician_k: p.rician_k,
                    duration_s: p.duration,
                    path_gain_db: p.path_gain_db,
                    sample_interval_s: p.sample_interval,
                };
                ok()
            }
            None => fail(
                TRC_INVALID,
                format!("unknown preset `{name}` (expected `inter-chip` or `intra-chip`)"),
            ),
        }
    })
}

/// Draw one synthetic reverberant channel; the handle must be released with
/// `trc_cir_free`.
#[no_mangle]
pub unsafe extern "C" fn trc_cir_generate(
    params: *const trc_reverb_params,
    seed: u64,
    out: *mut *mut trc_cir,
) -> trc_status {
    guarded(|| {
        if params.is_null() {
            return fail(TRC_NULL_ARG, "argument `params` is NULL");
        }
        if out.is_null() {
            return fail(TRC_NULL_ARG, "argument `out` is NULL");
        }
        match chan::generate_reverberant_cir(&params_of(&*params), seed) {
            Ok(cir) => {
                *out = Box::into_raw(Box::new(trc_cir { inner: cir }));
                ok()
            }
            Err(e) => fail(chan_status(&e), e.to_string()),
        }
    })
}

/// Load an impulse response from a `time_s,real,imag` CSV file.
#[no_mangle]
pub unsafe extern "C" fn trc_cir_load(path: *const c_char, out: *mut *mut trc_cir) -> trc_status {
    guarded(|| {
        if out.is_null() {
            return fail(TRC_NULL_ARG, "argument `out` is NULL");
        }
        let path = match str_arg(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match chan::load_cir(Path::new(path)) {
            Ok(cir) => {
                *out = Box::into_raw(Box::new(trc_cir { inner: cir }));
                ok()
            }
            Err(e) => fail(chan_status(&e), e.to_string()),
        }
    })
}

/// Write an impulse response as a `time_s,real,imag` CSV file.
#[no_mangle]
pub unsafe extern "C" fn trc_cir_save(cir: *const trc_cir, path: *const c_char) -> trc_status {
    guarded(|| {
        if cir.is_null() {
            return fail(TRC_NULL_ARG, "argument `cir` is NULL");
        }
        let path = match str_arg(path, "path") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match chan::save_cir(&(*cir).inner, Path::new(path)) {
            Ok(()) => ok(),
            Err(e) => fail(chan_status(&e), e.to_string()),
        }
    })
}

/// Release a channel handle; NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn trc_cir_free(cir: *mut trc_cir) {
    if !cir.is_null() {
        drop(Box::from_raw(cir));
    }
}

/// Number of samples; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn trc_cir_len(cir: *const trc_cir) -> usize {
    if cir.is_null() {
        0
    } else {
        (*cir).inner.len()
    }
}

/// Sample interval in seconds; NaN for NULL.
#[no_mangle]
pub unsafe extern "C" fn trc_cir_sample_interval(cir: *const trc_cir) -> f64 {
    if cir.is_null() {
        f64::NAN
    } else {
        (*cir).inner.sample_interval()
    }
}

/// Delay of the first sample in seconds; NaN for NULL.
#[no_mangle]
pub unsafe extern "C" fn trc_cir_start_delay(cir: *const trc_cir) -> f64 {
    if cir.is_null() {
        f64::NAN
    } else {
        (*cir).inner.start_delay()
    }
}

/// Total energy Σ|h[n]|²; NaN for NULL.
#[no_mangle]
pub unsafe extern "C" fn trc_cir_energy(cir: *const trc_cir) -> f64 {
    if cir.is_null() {
        f64::NAN
    } else {
        (*cir).inner.energy()
    }
}

/// Power-weighted RMS delay spread in seconds; NaN for NULL.
#[no_mangle]
pub unsafe extern "C" fn trc_cir_rms_delay_spread(cir: *const trc_cir) -> f64 {
    if cir.is_null() {
        f64::NAN
    } else {
        chan::rms_delay_spread(&(*cir).inner)
    }
}

/// Copy the complex samples into caller-owned buffers of exactly
/// `trc_cir_len` elements each.
#[no_mangle]
pub unsafe extern "C" fn trc_cir_samples(
    cir: *const trc_cir,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> trc_status {
    guarded(|| {
        if cir.is_null() {
            return fail(TRC_NULL_ARG, "argument `cir` is NULL");
        }
        if re.is_null() || im.is_null() {
            return fail(TRC_NULL_ARG, "sample buffers must not be NULL");
        }
        let samples = (*cir).inner.samples();
        if len != samples.len() {
            return fail(
                TRC_INVALID,
                format!("buffer holds {len} samples, response has {}", samples.len()),
            );
        }
        let re = std::slice::from_raw_parts_mut(re, len);
        let im = std::slice::from_raw_parts_mut(im, len);
        for (i, s) in samples.iter().enumerate() {
            re[i] = s.re;
            im[i] = s.im;
        }
        ok()
    })
}

/// Peak normalized cross-correlation of two responses, in [0, 1].
#[no_mangle]
pub unsafe extern "C" fn trc_channel_correlation(
    a: *const trc_cir,
    b: *const trc_cir,
    out: *mut f64,
) -> trc_status {
    guarded(|| {
        if a.is_null() || b.is_null() {
            return fail(TRC_NULL_ARG, "arguments `a` and `b` must not be NULL");
        }
        if out.is_null() {
            return fail(TRC_NULL_ARG, "argument `out` is NULL");
        }
        match chan::channel_correlation(&(*a).inner, &(*b).inner) {
            Ok(chi) => {
                *out = chi;
                ok()
            }
            Err(e) => fail(chan_status(&e), e.to_string()),
        }
    })
}

/// Build the unit-energy time-reversal precoding filter for a channel; the
/// handle must be released with `trc_filter_free`.
#[no_mangle]
pub unsafe extern "C" fn trc_filter_build(
    cir: *const trc_cir,
    out: *mut *mut trc_filter,
) -> trc_status {
    guarded(|| {
        if cir.is_null() {
            return fail(TRC_NULL_ARG, "argument `cir` is NULL");
        }
        if out.is_null() {
            return fail(TRC_NULL_ARG, "argument `out` is NULL");
        }
        let filter = tr::build_tr_filter(&(*cir).inner);
        *out = Box::into_raw(Box::new(trc_filter { inner: filter }));
        ok()
    })
}

/// Produce a hardware-constrained copy of a filter: keep only the
/// `keep_taps` strongest taps (0 = all), quantize taps to `quant_bits`
/// (0 = none) and hold each tap for `downsample_factor` samples (0 or 1 =
/// full resolution). The result is re-normalized to unit energy.
#[no_mangle]
pub unsafe extern "C" fn trc_filter_degrade(
    filter: *const trc_filter,
    keep_taps: usize,
    quant_bits: u32,
    downsample_factor: usize,
    out: *mut *mut trc_filter,
) -> trc_status {
    guarded(|| {
        if filter.is_null() {
            return fail(TRC_NULL_ARG, "argument `filter` is NULL");
        }
        if out.is_null() {
            return fail(TRC_NULL_ARG, "argument `out` is NULL");
        }
        let degradation = FilterDegradation {
            keep_taps: (keep_taps > 0).then_some(keep_taps),
            quant_bits: (quant_bits > 0).then_some(quant_bits),
            downsample_factor: downsample_factor.max(1),
        };
        match tr::degrade_filter(&(*filter).inner, &degradation) {
            Ok(g) => {
                *out = Box::into_raw(Box::new(trc_filter { inner: g }));
                ok()
            }
            Err(e) => fail(tr_status(&e), e.to_string()),
        }
    })
}

/// Release a filter handle; NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn trc_filter_free(filter: *mut trc_filter) {
    if !filter.is_null() {
        drop(Box::from_raw(filter));
    }
}

/// Number of filter taps; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn trc_filter_len(filter: *const trc_filter) -> usize {
    if filter.is_null() {
        0
    } else {
        (*filter).inner.len()
    }
}

/// Convolve a precoding filter with a channel into the equivalent channel
/// seen by the receiver; the handle must be released with `trc_cir_free`.
#[no_mangle]
pub unsafe extern "C" fn trc_equivalent_channel(
    filter: *const trc_filter,
    cir: *const trc_cir,
    out: *mut *mut trc_cir,
) -> trc_status {
    guarded(|| {
        if filter.is_null() || cir.is_null() {
            return fail(TRC_NULL_ARG, "arguments `filter` and `cir` must not be NULL");
        }
        if out.is_null() {
            return fail(TRC_NULL_ARG, "argument `out` is NULL");
        }
        match tr::equivalent_channel(&(*filter).inner, &(*cir).inner) {
            Ok(q) => {
                *out = Box::into_raw(Box::new(trc_cir { inner: q }));
                ok()
            }
            Err(e) => fail(tr_status(&e), e.to_string()),
        }
    })
}

fn scheme_of(link: &trc_link_params, sps: usize) -> ModulationScheme {
    let mut scheme = match link.modulation {
        trc_modulation::TRC_MOD_ASK => ModulationScheme::ask(link.ask_ratio, sps),
        trc_modulation::TRC_MOD_PSK => ModulationScheme::psk(link.order as usize, sps),
        trc_modulation::TRC_MOD_OFDM => {
            ModulationScheme::ofdm(link.order as usize, link.subcarriers as usize, sps)
        }
    };
    if link.pulse_width > 0 {
        scheme = scheme.with_pulse_width(link.pulse_width as usize);
    }
    if link.modulation == trc_modulation::TRC_MOD_OFDM && link.cyclic_prefix_chips > 0 {
        scheme = scheme.with_cyclic_prefix(link.cyclic_prefix_chips as usize);
    }
    scheme
}

/// Monte Carlo bit-error simulation of one link over the given channel.
///
/// `noise` may be NULL for the default thermal model (−174 dBm/Hz + 10 dB
/// noise figure over the full simulation bandwidth). `min_bits` must be at
/// least 10000; `max_errors` = 0 stops exactly at `min_bits`, otherwise
/// accumulation continues until `max_errors` errors (or the 1e7-bit cap).
/// Deterministic for fixed inputs and `seed`.
#[no_mangle]
pub unsafe extern "C" fn trc_simulate_link(
    cir: *const trc_cir,
    link: *const trc_link_params,
    noise: *const trc_noise_params,
    min_bits: u64,
    max_errors: u64,
    seed: u64,
    out: *mut trc_link_result,
) -> trc_status {
    guarded(|| {
        if cir.is_null() {
            return fail(TRC_NULL_ARG, "argument `cir` is NULL");
        }
        if link.is_null() {
            return fail(TRC_NULL_ARG, "argument `link` is NULL");
        }
        if out.is_null() {
            return fail(TRC_NULL_ARG, "argument `out` is NULL");
        }
        let link = &*link;
        let h = &(*cir).inner;

        let sps = match netsim::sps_for_rate(link.symbol_rate_bd, h.sample_interval()) {
            Ok(sps) => sps,
            Err(e) => return fail(netsim_status(&e), e.to_string()),
        };
        let degradation = if link.keep_taps == 0
            && link.quant_bits == 0
            && link.downsample_factor <= 1
        {
            None
        } else {
            Some(FilterDegradation {
                keep_taps: (link.keep_taps > 0).then_some(link.keep_taps),
                quant_bits: (link.quant_bits > 0).then_some(link.quant_bits),
                downsample_factor: link.downsample_factor.max(1),
            })
        };
        let config = LinkConfig {
            tx: 0,
            rx: 1,
            tx_power_dbm: link.tx_power_dbm,
            symbol_rate: link.symbol_rate_bd,
            scheme: scheme_of(link, sps),
            use_tr: link.use_tr,
            degradation,
            detector: match link.detector {
                trc_detector::TRC_DET_AUTO => DetectorChoice::Auto,
                trc_detector::TRC_DET_ENERGY => DetectorChoice::Energy,
                trc_detector::TRC_DET_COHERENT => DetectorChoice::Coherent,
                trc_detector::TRC_DET_MATCHED_FILTER => DetectorChoice::MatchedFilter,
            },
            pilot_symbols: None,
        };
        let noise_model = if noise.is_null() {
            NoiseModel::default()
        } else {
            let n = &*noise;
            NoiseModel {
                psd_dbm_per_hz: n.psd_dbm_per_hz,
                noise_figure_db: n.noise_figure_db,
                bandwidth_hz: (n.bandwidth_hz > 0.0).then_some(n.bandwidth_hz),
            }
        };

        let mut channels = match ChannelMatrix::new(2, true) {
            Ok(m) => m,
            Err(e) => return fail(chan_status(&e), e.to_string()),
        };
        if let Err(e) = channels.insert(0, 1, h.clone()) {
            return fail(chan_status(&e), e.to_string());
        }

        match netsim::simulate_link(&channels, &config, &noise_model, min_bits, max_errors, seed)
        {
            Ok(result) => {
                let r = &result.links[0];
                let SinrBreakdown {
                    signal_mw,
                    isi_mw,
                    cci_mw,
                    noise_mw,
                    ..
                } = r.sinr;
                *out = trc_link_result {
                    bits: r.bits,
                    errors: r.errors,
                    ber: r.ber,
                    ber_ci95: r.ber_ci95,
                    sinr_db: r.sinr_db,
                    signal_mw,
                    isi_mw,
                    cci_mw,
                    noise_mw,
                    data_rate_bps: r.data_rate_bps,
                };
                ok()
            }
            Err(e) => fail(netsim_status(&e), e.to_string()),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn preset(name: &str) -> trc_reverb_params {
        let cname = CString::new(name).unwrap();
        let mut params = trc_reverb_params {
            propagation_delay_s: 0.0,
            decay_constant_s: 0.0,
            tap_rate_hz: 0.0,
            rician_k: 0.0,
            duration_s: 0.0,
            path_gain_db: 0.0,
            sample_interval_s: 0.0,
        };
        let status = unsafe { trc_reverb_params_preset(cname.as_ptr(), &mut params) };
        assert_eq!(status, TRC_OK);
        params
    }

    fn last_error() -> String {
        unsafe {
            CStr::from_ptr(trc_last_error_message())
                .to_str()
                .unwrap()
                .to_string()
        }
    }

    fn generate(params: &trc_reverb_params, seed: u64) -> *mut trc_cir {
        let mut cir = ptr::null_mut();
        let status = unsafe { trc_cir_generate(params, seed, &mut cir) };
        assert_eq!(status, TRC_OK, "{}", last_error());
        assert!(!cir.is_null());
        cir
    }

    #[test]
    fn version_matches_the_library() {
        let v = unsafe { CStr::from_ptr(trc_version()) }.to_str().unwrap();
        assert_eq!(v, trchipnet::VERSION);
    }

    #[test]
    fn null_arguments_are_rejected_with_a_message() {
        let mut out = ptr::null_mut();
        let status = unsafe { trc_cir_generate(ptr::null(), 0, &mut out) };
        assert_eq!(status, TRC_NULL_ARG);
        assert!(last_error().contains("params"), "got: {}", last_error());

        let params = preset("inter-chip");
        let status = unsafe { trc_cir_generate(&params, 0, ptr::null_mut()) };
        assert_eq!(status, TRC_NULL_ARG);

        unsafe {
            assert_eq!(trc_cir_len(ptr::null()), 0);
            assert!(trc_cir_energy(ptr::null()).is_nan());
            trc_cir_free(ptr::null_mut());
            trc_filter_free(ptr::null_mut());
        }
    }

    #[test]
    fn unknown_preset_is_invalid_and_success_clears_the_message() {
        let cname = CString::new("warp-core").unwrap();
        let mut params = preset("intra-chip");
        let status = unsafe { trc_reverb_params_preset(cname.as_ptr(), &mut params) };
        assert_eq!(status, TRC_INVALID);
        assert!(last_error().contains("warp-core"));

        let _ = preset("inter-chip");
        assert!(last_error().is_empty(), "success must clear the message");
    }

    #[test]
    fn generate_inspect_and_sample_copy_roundtrip() {
        let params = preset("inter-chip");
        let cir = generate(&params, 7);
        unsafe {
            let len = trc_cir_len(cir);
            assert!(len > 0);
            assert_eq!(trc_cir_sample_interval(cir), params.sample_interval_s);
            assert!(trc_cir_energy(cir) > 0.0);
            assert!(trc_cir_rms_delay_spread(cir) > 0.0);

            let mut re = vec![0.0; len];
            let mut im = vec![0.0; len];
            // Wrong-sized buffer is rejected before any write.
            assert_eq!(
                trc_cir_samples(cir, re.as_mut_ptr(), im.as_mut_ptr(), len - 1),
                TRC_INVALID
            );
            assert_eq!(trc_cir_samples(cir, re.as_mut_ptr(), im.as_mut_ptr(), len), TRC_OK);
            let energy: f64 = re.iter().zip(&im).map(|(r, i)| r * r + i * i).sum();
            assert!((energy / trc_cir_energy(cir) - 1.0).abs() < 1e-12);
            trc_cir_free(cir);
        }
    }

    #[test]
    fn filter_equivalent_channel_peaks_at_the_channel_norm() {
        let params = preset("inter-chip");
        let cir = generate(&params, 11);
        unsafe {
            let mut filter = ptr::null_mut();
            assert_eq!(trc_filter_build(cir, &mut filter), TRC_OK);
            assert_eq!(trc_filter_len(filter), trc_cir_len(cir));

            let mut q = ptr::null_mut();
            assert_eq!(trc_equivalent_channel(filter, cir, &mut q), TRC_OK);
            let qlen = trc_cir_len(q);
            assert_eq!(qlen, 2 * trc_cir_len(cir) - 1);

            let mut re = vec![0.0; qlen];
            let mut im = vec![0.0; qlen];
            assert_eq!(trc_cir_samples(q, re.as_mut_ptr(), im.as_mut_ptr(), qlen), TRC_OK);
            let peak_idx = (0..qlen)
                .max_by(|&a, &b| {
                    (re[a] * re[a] + im[a] * im[a]).total_cmp(&(re[b] * re[b] + im[b] * im[b]))
                })
                .unwrap();
            assert_eq!(peak_idx, trc_cir_len(cir) - 1);
            let peak = (re[peak_idx] * re[peak_idx] + im[peak_idx] * im[peak_idx]).sqrt();
            let norm = trc_cir_energy(cir).sqrt();
            assert!((peak / norm - 1.0).abs() < 1e-9);

            trc_cir_free(q);
            trc_filter_free(filter);
            trc_cir_free(cir);
        }
    }

    #[test]
    fn degraded_filter_loses_peak_gain() {
        let params = preset("inter-chip");
        let cir = generate(&params, 3);
        unsafe {
            let mut filter = ptr::null_mut();
            assert_eq!(trc_filter_build(cir, &mut filter), TRC_OK);
            let mut coarse = ptr::null_mut();
            assert_eq!(trc_filter_degrade(filter, 0, 0, 8, &mut coarse), TRC_OK);

            let peak_of = |g: *const trc_filter| {
                let mut q = ptr::null_mut();
                assert_eq!(trc_equivalent_channel(g, cir, &mut q), TRC_OK);
                let qlen = trc_cir_len(q);
                let mut re = vec![0.0; qlen];
                let mut im = vec![0.0; qlen];
                assert_eq!(trc_cir_samples(q, re.as_mut_ptr(), im.as_mut_ptr(), qlen), TRC_OK);
                let idx = trc_cir_len(cir) - 1;
                let peak = (re[idx] * re[idx] + im[idx] * im[idx]).sqrt();
                trc_cir_free(q);
                peak
            };
            assert!(peak_of(coarse) < peak_of(filter));

            trc_filter_free(coarse);
            trc_filter_free(filter);
            trc_cir_free(cir);
        }
    }

    #[test]
    fn save_and_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cir.csv");
        let cpath = CString::new(path.to_str().unwrap()).unwrap();
        let params = preset("intra-chip");
        let cir = generate(&params, 5);
        unsafe {
            assert_eq!(trc_cir_save(cir, cpath.as_ptr()), TRC_OK);
            let mut loaded = ptr::null_mut();
            assert_eq!(trc_cir_load(cpath.as_ptr(), &mut loaded), TRC_OK);
            assert_eq!(trc_cir_len(loaded), trc_cir_len(cir));
            assert!(
                (trc_cir_energy(loaded) / trc_cir_energy(cir) - 1.0).abs() < 1e-9,
                "energy must survive the text roundtrip"
            );
            trc_cir_free(loaded);
            trc_cir_free(cir);

            let missing = CString::new(dir.path().join("absent.csv").to_str().unwrap()).unwrap();
            let mut out = ptr::null_mut();
            assert_eq!(trc_cir_load(missing.as_ptr(), &mut out), TRC_IO);
            assert!(!last_error().is_empty());
        }
    }

    #[test]
    fn correlation_is_one_for_identical_channels() {
        let params = preset("inter-chip");
        let a = generate(&params, 21);
        let b = generate(&params, 22);
        unsafe {
            let mut chi = -1.0;
            assert_eq!(trc_channel_correlation(a, a, &mut chi), TRC_OK);
            assert!((chi - 1.0).abs() < 1e-9);
            assert_eq!(trc_channel_correlation(a, b, &mut chi), TRC_OK);
            assert!((0.0..=1.0).contains(&chi));
            trc_cir_free(a);
            trc_cir_free(b);
        }
    }

    #[test]
    fn simulate_link_runs_and_validates() {
        let params = preset("inter-chip");
        let cir = generate(&params, 9);
        let link = trc_link_params {
            tx_power_dbm: 5.0,
            symbol_rate_bd: 1e10,
            modulation: trc_modulation::TRC_MOD_PSK,
            order: 2,
            ask_ratio: 0.0,
            subcarriers: 0,
            cyclic_prefix_chips: 0,
            pulse_width: 1,
            use_tr: true,
            detector: trc_detector::TRC_DET_COHERENT,
            keep_taps: 0,
            quant_bits: 0,
            downsample_factor: 0,
        };
        let mut out = trc_link_result {
            bits: 0,
            errors: 0,
            ber: 0.0,
            ber_ci95: 0.0,
            sinr_db: 0.0,
            signal_mw: 0.0,
            isi_mw: 0.0,
            cci_mw: 0.0,
            noise_mw: 0.0,
            data_rate_bps: 0.0,
        };
        unsafe {
            let status =
                trc_simulate_link(cir, &link, ptr::null(), 10_000, 0, 42, &mut out);
            assert_eq!(status, TRC_OK, "{}", last_error());
            assert!(out.bits >= 10_000);
            assert!(out.errors <= out.bits);
            assert!(out.sinr_db.is_finite());
            assert!(out.signal_mw > 0.0);
            assert!(out.noise_mw > 0.0);
            assert_eq!(out.data_rate_bps, 1e10);

            // Determinism across repeated calls.
            let mut again = out;
            let status =
                trc_simulate_link(cir, &link, ptr::null(), 10_000, 0, 42, &mut again);
            assert_eq!(status, TRC_OK);
            assert_eq!(out.bits, again.bits);
            assert_eq!(out.errors, again.errors);
            assert_eq!(out.ber, again.ber);
            assert_eq!(out.sinr_db, again.sinr_db);

            // Off-grid symbol rate names the nearest representable rate.
            let mut bad = link;
            bad.symbol_rate_bd = 3e10;
            let status = trc_simulate_link(cir, &bad, ptr::null(), 10_000, 0, 1, &mut out);
            assert_eq!(status, TRC_INVALID);
            assert!(last_error().contains("nearest"), "got: {}", last_error());

            // PSK order must be a power of two.
            let mut odd = link;
            odd.order = 3;
            let status = trc_simulate_link(cir, &odd, ptr::null(), 10_000, 0, 1, &mut out);
            assert_eq!(status, TRC_INVALID);

            // min_bits below the floor is rejected.
            let status = trc_simulate_link(cir, &link, ptr::null(), 100, 0, 1, &mut out);
            assert_eq!(status, TRC_INVALID);
            assert!(last_error().contains("10000"), "got: {}", last_error());

            trc_cir_free(cir);
        }
    }

    #[test]
    fn generated_header_declares_the_full_surface() {
        let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("include")
            .join("trchipnet.h");
        let text = std::fs::read_to_string(&header).expect("build script writes the header");
        for symbol in [
            "TRCHIPNET_H",
            "typedef enum trc_status",
            "typedef struct trc_cir trc_cir",
            "typedef struct trc_filter trc_filter",
            "trc_version",
            "trc_last_error_message",
            "trc_reverb_params_preset",
            "trc_cir_generate",
            "trc_cir_samples",
            "trc_channel_correlation",
            "trc_filter_build",
            "trc_filter_degrade",
            "trc_equivalent_channel",
            "trc_simulate_link",
        ] {
            assert!(text.contains(symbol), "header must declare {symbol}");
        }
    }

    #[test]
    fn generated_header_is_valid_c() {
        let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("include")
            .join("trchipnet.h");
        let out = std::process::Command::new("clang")
            .args(["-std=c99", "-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
            .arg(&header)
            .output()
            .expect("clang is available in this environment");
        assert!(
            out.status.success(),
            "clang rejected the header:\n{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}
