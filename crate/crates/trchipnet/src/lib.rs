//! Link-level simulator for time-reversal (TR) precoded wireless links inside
//! multi-chip computing packages.
//!
//! The crate is organised bottom-up:
//!
//! * [`dsp`] — small complex-valued signal-processing kernels (convolution,
//!   energy, peak search, dB helpers) shared by everything above.
//! * [`chan`] — synthetic reverberant channel impulse responses (CIRs) for
//!   the in-package propagation environment, channel matrices over node sets,
//!   delay-spread / correlation metrics, and CSV persistence.
//! * [`tr`] — time-reversal prefilter construction, controlled filter
//!   degradation (truncation / quantisation / decimation), precoding, and the
//!   equivalent (filter ⊛ channel) response.
//! * [`modem`] — ASK / PSK / OFDM modulation, pulse shaping, and the energy,
//!   coherent and matched-filter detectors.
//! * [`netsim`] — the Monte-Carlo link engine: waveform-level simulation of
//!   one link or several concurrent streams, additive noise, stopping rules,
//!   BER/SINR bookkeeping, and a deterministic SINR predictor.
//! * [`sweeps`] — parameter sweeps (symbol rate, transmit power, aggregate
//!   rate, modulation order) built on top of the engine.
//! * [`sched`] — correlation-driven power allocation and greedy link
//!   selection for spatial-multiplexing schedules.
//! * [`config`] / [`runner`] — JSON experiment descriptions, validation with
//!   JSON-path diagnostics, and the batch runner used by the CLI.
//!
//! Conventions used throughout:
//!
//! * Discrete time only: every waveform / CIR carries its sample interval in
//!   seconds and operations refuse to mix mismatched intervals.
//! * Linear power is in milliwatts; `|sample|²` of a waveform is interpreted
//!   directly as instantaneous power in mW. Decibel quantities are explicit
//!   (`_db` / `_dbm` suffixes).
//! * All randomness flows from caller-supplied `u64` seeds through
//!   counter-mode ChaCha streams, so every result is reproducible bit-for-bit
//!   regardless of thread count.

pub mod chan;
pub mod config;
pub mod dsp;
pub mod modem;
pub mod netsim;
pub mod runner;
pub mod sched;
pub mod sweeps;
pub mod tr;

/// Crate version string (also exported through the C ABI).
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
