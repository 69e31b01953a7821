#ifndef TRCHIPNET_H
#define TRCHIPNET_H

/* Generated from the trchipnet-ffi Rust sources by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Receiver selection for a link.
 */
typedef enum trc_detector {
  /**
   * Pick the modulation's natural receiver.
   */
  TRC_DET_AUTO = 0,
  /**
   * Non-coherent per-symbol energy windowing (ASK only).
   */
  TRC_DET_ENERGY = 1,
  /**
   * Coherent sampling at the equivalent-channel peak.
   */
  TRC_DET_COHERENT = 2,
  /**
   * Channel-matched filter in front of coherent sampling.
   */
  TRC_DET_MATCHED_FILTER = 3,
} trc_detector;

/**
 * Modulation family of a link.
 */
typedef enum trc_modulation {
  /**
   * 2-level amplitude shift keying; `ask_ratio` sets the low level.
   */
  TRC_MOD_ASK = 0,
  /**
   * Phase shift keying of order `order` (power of two).
   */
  TRC_MOD_PSK = 1,
  /**
   * OFDM with `order`-PSK subcarriers.
   */
  TRC_MOD_OFDM = 2,
} trc_modulation;

/**
 * Status code returned by every fallible API call; `TRC_OK` is zero.
 */
typedef enum trc_status {
  /**
   * Success.
   */
  TRC_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  TRC_NULL_ARG = 1,
  /**
   * Arguments were structurally valid but semantically rejected.
   */
  TRC_INVALID = 2,
  /**
   * The operating system reported an I/O failure.
   */
  TRC_IO = 3,
  /**
   * A file or string could not be decoded.
   */
  TRC_PARSE = 4,
  /**
   * The request is outside this build's supported surface.
   */
  TRC_UNSUPPORTED = 5,
  /**
   * Internal invariant violation (caught panic); please report.
   */
  TRC_INTERNAL = 6,
} trc_status;

/**
 * Opaque sampled channel impulse response.
 */
typedef struct trc_cir trc_cir;

/**
 * Opaque precoding filter.
 */
typedef struct trc_filter trc_filter;

/**
 * Synthetic reverberant-channel parameters (all SI units).
 */
typedef struct trc_reverb_params {
  /**
   * First-arrival delay in seconds.
   */
  double propagation_delay_s;
  /**
   * Exponential power-decay constant in seconds.
   */
  double decay_constant_s;
  /**
   * Poisson multipath arrival rate in arrivals/second.
   */
  double tap_rate_hz;
  /**
   * Rician K factor (0 = fully diffuse; INFINITY = pure line of sight).
   */
  double rician_k;
  /**
   * Response length in seconds.
   */
  double duration_s;
  /**
   * Total path gain in dB (negative for loss).
   */
  double path_gain_db;
  /**
   * Output sample interval in seconds.
   */
  double sample_interval_s;
} trc_reverb_params;

/**
 * Full description of one simulated link over a given channel.
 */
typedef struct trc_link_params {
  /**
   * Average transmit power in dBm.
   */
  double tx_power_dbm;
  /**
   * Symbol rate in baud; must land on the channel's sample grid
   * (rate × samples/symbol × sample_interval = 1 within 1e-6).
   */
  double symbol_rate_bd;
  enum trc_modulation modulation;
  /**
   * Constellation order for PSK/OFDM (power of two); ignored for ASK.
   */
  uint32_t order;
  /**
   * Low/high amplitude ratio in [0, 1) for ASK; ignored otherwise.
   */
  double ask_ratio;
  /**
   * Subcarrier count for OFDM (power of two); ignored otherwise.
   */
  uint32_t subcarriers;
  /**
   * OFDM cyclic prefix in subcarrier chips; 0 sizes it automatically
   * from the equivalent channel. Ignored for ASK/PSK.
   */
  uint32_t cyclic_prefix_chips;
  /**
   * Driven samples per symbol period (1 = impulse-like); 0 drives the
   * full symbol period.
   */
  uint32_t pulse_width;
  /**
   * Non-zero applies time-reversal precoding at the transmitter.
   */
  bool use_tr;
  enum trc_detector detector;
  /**
   * Precoding-filter truncation: keep only this many strongest taps;
   * 0 keeps all taps.
   */
  size_t keep_taps;
  /**
   * Uniform tap quantization bits; 0 leaves taps unquantized.
   */
  uint32_t quant_bits;
  /**
   * Zero-order-hold factor on the precoding filter; 0 or 1 leaves the
   * filter at full resolution.
   */
  size_t downsample_factor;
} trc_link_params;

/**
 * Additive receiver noise description.
 */
typedef struct trc_noise_params {
  /**
   * One-sided PSD in dBm/Hz (-INFINITY switches noise off).
   */
  double psd_dbm_per_hz;
  /**
   * Receiver noise figure in dB.
   */
  double noise_figure_db;
  /**
   * Integration bandwidth in Hz; zero or negative means the full
   * simulation bandwidth 1/sample_interval.
   */
  double bandwidth_hz;
} trc_noise_params;

/**
 * Per-link outcome of a Monte Carlo run.
 */
typedef struct trc_link_result {
  /**
   * Data bits compared (pilots excluded).
   */
  uint64_t bits;
  /**
   * Bit errors observed.
   */
  uint64_t errors;
  /**
   * errors/bits.
   */
  double ber;
  /**
   * 95% Wilson-score half-width on `ber`.
   */
  double ber_ci95;
  /**
   * Measured signal/(ISI+CCI+noise) at the sampling instants, in dB.
   */
  double sinr_db;
  /**
   * Signal power at the sampling instants, mW.
   */
  double signal_mw;
  /**
   * Own-stream inter-symbol interference power, mW.
   */
  double isi_mw;
  /**
   * Other-stream co-channel interference power, mW.
   */
  double cci_mw;
  /**
   * Noise power, mW.
   */
  double noise_mw;
  /**
   * Information rate in bits/second.
   */
  double data_rate_bps;
} trc_link_result;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *trc_version(void);

/**
 * Message describing this thread's most recent failure; empty after a
 * success. Valid until the next trchipnet call on the same thread.
 */
const char *trc_last_error_message(void);

/**
 * Fill `out` with a named parameter preset ("inter-chip" or "intra-chip").
 */
enum trc_status trc_reverb_params_preset(const char *name, struct trc_reverb_params *out);

/**
 * Draw one synthetic reverberant channel; the handle must be released with
 * `trc_cir_free`.
 */
enum trc_status trc_cir_generate(const struct trc_reverb_params *params,
                                 uint64_t seed,
                                 struct trc_cir **out);

/**
 * Load an impulse response from a `time_s,real,imag` CSV file.
 */
enum trc_status trc_cir_load(const char *path, struct trc_cir **out);

/**
 * Write an impulse response as a `time_s,real,imag` CSV file.
 */
enum trc_status trc_cir_save(const struct trc_cir *cir, const char *path);

/**
 * Release a channel handle; NULL is a no-op.
 */
void trc_cir_free(struct trc_cir *cir);

/**
 * Number of samples; 0 for NULL.
 */
size_t trc_cir_len(const struct trc_cir *cir);

/**
 * Sample interval in seconds; NaN for NULL.
 */
double trc_cir_sample_interval(const struct trc_cir *cir);

/**
 * Delay of the first sample in seconds; NaN for NULL.
 */
double trc_cir_start_delay(const struct trc_cir *cir);

/**
 * Total energy Σ|h[n]|²; NaN for NULL.
 */
double trc_cir_energy(const struct trc_cir *cir);

/**
 * Power-weighted RMS delay spread in seconds; NaN for NULL.
 */
double trc_cir_rms_delay_spread(const struct trc_cir *cir);

/**
 * Copy the complex samples into caller-owned buffers of exactly
 * `trc_cir_len` elements each.
 */
enum trc_status trc_cir_samples(const struct trc_cir *cir, double *re, double *im, size_t len);

/**
 * Peak normalized cross-correlation of two responses, in [0, 1].
 */
enum trc_status trc_channel_correlation(const struct trc_cir *a,
                                        const struct trc_cir *b,
                                        double *out);

/**
 * Build the unit-energy time-reversal precoding filter for a channel; the
 * handle must be released with `trc_filter_free`.
 */
enum trc_status trc_filter_build(const struct trc_cir *cir, struct trc_filter **out);

/**
 * Produce a hardware-constrained copy of a filter: keep only the
 * `keep_taps` strongest taps (0 = all), quantize taps to `quant_bits`
 * (0 = none) and hold each tap for `downsample_factor` samples (0 or 1 =
 * full resolution). The result is re-normalized to unit energy.
 */
enum trc_status trc_filter_degrade(const struct trc_filter *filter,
                                   size_t keep_taps,
                                   uint32_t quant_bits,
                                   size_t downsample_factor,
                                   struct trc_filter **out);

/**
 * Release a filter handle; NULL is a no-op.
 */
void trc_filter_free(struct trc_filter *filter);

/**
 * Number of filter taps; 0 for NULL.
 */
size_t trc_filter_len(const struct trc_filter *filter);

/**
 * Convolve a precoding filter with a channel into the equivalent channel
 * seen by the receiver; the handle must be released with `trc_cir_free`.
 */
enum trc_status trc_equivalent_channel(const struct trc_filter *filter,
                                       const struct trc_cir *cir,
                                       struct trc_cir **out);

/**
 * Monte Carlo bit-error simulation of one link over the given channel.
 *
 * `noise` may be NULL for the default thermal model (−174 dBm/Hz + 10 dB
 * noise figure over the full simulation bandwidth). `min_bits` must be at
 * least 10000; `max_errors` = 0 stops exactly at `min_bits`, otherwise
 * accumulation continues until `max_errors` errors (or the 1e7-bit cap).
 * Deterministic for fixed inputs and `seed`.
 */
enum trc_status trc_simulate_link(const struct trc_cir *cir,
                                  const struct trc_link_params *link,
                                  const struct trc_noise_params *noise,
                                  uint64_t min_bits,
                                  uint64_t max_errors,
                                  uint64_t seed,
                                  struct trc_link_result *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRCHIPNET_H */
