//! Acceptance gate: one test per release criterion, each printing a single
//! `ACCEPTANCE <n> <slug>: PASS/FAIL — <detail>` line before asserting, so a
//! `--nocapture` run reads as a checklist. Criteria marked FAIL here are
//! deliberate: the test states the claim exactly as specified and is left
//! red rather than weakened (see the assertion message for the analysis
//! pointer).
//!
//! Run with:
//!   cargo test --test acceptance -- --nocapture --test-threads=1

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::ThreadPoolBuilder;
use statrs::function::erf::erfc;

use trchipnet::chan::{
    generate_reverberant_cir, rms_delay_spread, ChannelImpulseResponse, ChannelMatrix,
    ReverbChannelParams,
};
use trchipnet::dsp;
use trchipnet::modem::ModulationScheme;
use trchipnet::netsim::{
    self, measure_sinr, simulate_concurrent, simulate_link, ConcurrencyMode, DetectorChoice,
    LinkConfig, LinkSet, NoiseModel,
};
use trchipnet::sched::{
    allocate_power, predict_sinr, select_links, AllocationOutcome, CandidateLink, SchedulerInput,
};
use trchipnet::sweeps::{first_rate_exceeding, sweep_aggregate, sweep_modulation_order};
use trchipnet::tr::{build_tr_filter, equivalent_channel, FilterDegradation};

const DT: f64 = 5e-12;

fn verdict(n: u32, slug: &str, pass: bool, detail: &str) -> bool {
    println!(
        "ACCEPTANCE {n} {slug}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Random-but-valid reverberant channel parameters on the 5 ps grid.
fn random_params(rng: &mut ChaCha8Rng, max_decay: f64) -> ReverbChannelParams {
    let decay_constant = rng.gen_range(5e-11..max_decay);
    let propagation_delay = rng.gen_range(0.0..2e-10);
    ReverbChannelParams {
        propagation_delay,
        decay_constant,
        tap_rate: rng.gen_range(5e11..2e12),
        rician_k: rng.gen_range(0.0..10.0),
        duration: propagation_delay + decay_constant * rng.gen_range(2.0..4.0),
        path_gain_db: rng.gen_range(-45.0..-20.0),
        sample_interval: DT,
    }
}

fn flat_matrix() -> ChannelMatrix {
    let mut m = ChannelMatrix::new(2, true).unwrap();
    m.insert(0, 1, ChannelImpulseResponse::new(vec![c(1.0, 0.0)], DT, 0.0).unwrap())
        .unwrap();
    m
}

fn noise_of_power(sigma_sq_mw: f64, dt: f64) -> NoiseModel {
    NoiseModel {
        psd_dbm_per_hz: dsp::mw_to_dbm(sigma_sq_mw * dt),
        noise_figure_db: 0.0,
        bandwidth_hz: None,
    }
}

fn preset_matrix(nodes: usize, seed: u64) -> ChannelMatrix {
    ChannelMatrix::generate(nodes, &ReverbChannelParams::inter_chip(), seed, true).unwrap()
}

fn impulse_ask_link(tx: usize, rx: usize, rate: f64, sps: usize, use_tr: bool) -> LinkConfig {
    LinkConfig {
        tx,
        rx,
        tx_power_dbm: 10.0,
        symbol_rate: rate,
        scheme: ModulationScheme::ask(0.5, sps).with_pulse_width(1),
        use_tr,
        degradation: None,
        detector: DetectorChoice::Energy,
        pilot_symbols: None,
    }
}

/// Criterion 1 — on 1000 randomly parameterized channels the precoded
/// equivalent channel must peak exactly at index L−1 with value ‖h‖₂
/// (relative error < 1e-9).
#[test]
fn a01_autocorrelation_peak_identity() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA1);
    let draws = 1000usize;
    let mut worst_rel = 0.0f64;
    let mut peak_misses = 0usize;
    for i in 0..draws {
        let params = random_params(&mut rng, 8e-10);
        let h = generate_reverberant_cir(&params, 0xBEEF + i as u64).unwrap();
        let g = build_tr_filter(&h);
        let q = equivalent_channel(&g, &h).unwrap();
        let l = h.len();
        if dsp::peak_index(q.samples()) != Some(l - 1) {
            peak_misses += 1;
            continue;
        }
        let norm_h = h.energy().sqrt();
        let rel = (q.samples()[l - 1].norm() - norm_h).abs() / norm_h;
        worst_rel = worst_rel.max(rel);
    }
    let elapsed = t0.elapsed();
    let pass = peak_misses == 0 && worst_rel < 1e-9 && elapsed.as_secs_f64() < 5.0;
    let detail = format!(
        "{draws} draws, peak at L-1 on all but {peak_misses}, worst relative \
         peak error {worst_rel:.2e} (< 1e-9), {elapsed:.2?} (< 5 s)"
    );
    assert!(verdict(1, "autocorrelation-peak-identity", pass, &detail), "{detail}");
}

/// Criterion 2 — on 500 draws of the 0.5 ns-decay preset the precoded
/// equivalent channel's RMS delay spread must be below the raw CIR's in at
/// least 95% of draws, with the median reduction factor reported.
///
/// Left red deliberately: the second-moment delay spread of the full
/// two-sided equivalent channel does not contract for these channels — the
/// focusing shows up only after thresholding away the low-power tails
/// (reported alongside). The claim is asserted exactly as stated rather
/// than substituting the thresholded metric that would pass.
#[test]
fn a02_temporal_focusing() {
    let t0 = Instant::now();
    let params = ReverbChannelParams::inter_chip();
    let draws = 500u64;
    let mut wins = 0u64;
    let mut ratios = Vec::with_capacity(draws as usize);
    let mut thresholded_ratios = Vec::with_capacity(draws as usize);
    for seed in 0..draws {
        let h = generate_reverberant_cir(&params, seed).unwrap();
        let g = build_tr_filter(&h);
        let q = equivalent_channel(&g, &h).unwrap();
        let raw = rms_delay_spread(&h);
        let eq = rms_delay_spread(&q);
        if eq < raw {
            wins += 1;
        }
        ratios.push(raw / eq);
        let raw_t = thresholded_spread(h.samples(), h.sample_interval(), -25.0);
        let eq_t = thresholded_spread(q.samples(), q.sample_interval(), -25.0);
        thresholded_ratios.push(raw_t / eq_t);
    }
    ratios.sort_by(|a, b| a.total_cmp(b));
    thresholded_ratios.sort_by(|a, b| a.total_cmp(b));
    let median = ratios[ratios.len() / 2];
    let median_t = thresholded_ratios[thresholded_ratios.len() / 2];
    let frac = wins as f64 / draws as f64;
    let elapsed = t0.elapsed();
    let pass = frac >= 0.95 && elapsed.as_secs_f64() < 30.0;
    let detail = format!(
        "spread shrank on {wins}/{draws} draws ({:.1}% vs >= 95%), median raw/equalized \
         spread ratio {median:.3}; with tails below -25 dB of peak excluded the median \
         ratio is {median_t:.2}, {elapsed:.2?} (< 30 s)",
        100.0 * frac
    );
    assert!(
        verdict(2, "temporal-focusing", pass, &detail),
        "full-support second-moment spread does not contract (median ratio {median:.3}); \
         the focusing is real but lives above the -25 dB floor (median thresholded ratio \
         {median_t:.2}) — kept red instead of switching metric: {detail}"
    );
}

/// Power-weighted RMS time spread over samples within `floor_db` of the peak
/// power; the shift-invariant diagnostic behind the criterion-2 report line.
fn thresholded_spread(samples: &[Complex64], dt: f64, floor_db: f64) -> f64 {
    let peak = samples.iter().map(|s| s.norm_sqr()).fold(0.0, f64::max);
    let floor = peak * dsp::db_to_linear(floor_db);
    let (mut p_sum, mut t_sum) = (0.0f64, 0.0f64);
    for (n, s) in samples.iter().enumerate() {
        let p = s.norm_sqr();
        if p >= floor {
            p_sum += p;
            t_sum += p * n as f64 * dt;
        }
    }
    let mean = t_sum / p_sum;
    let mut var = 0.0f64;
    for (n, s) in samples.iter().enumerate() {
        let p = s.norm_sqr();
        if p >= floor {
            var += p * (n as f64 * dt - mean).powi(2);
        }
    }
    (var / p_sum).sqrt()
}

/// Criterion 3 — coherent BPSK over a flat AWGN channel must match the
/// textbook Q(√(2·SNR_b)) at 0, 4 and 8 dB inside 99% binomial confidence
/// intervals, with at least 1e5 bits per point.
#[test]
fn a03_ber_calibration_oracle() {
    let t0 = Instant::now();
    let channels = flat_matrix();
    let rate = 1.0 / DT;
    let link = LinkConfig {
        tx: 0,
        rx: 1,
        tx_power_dbm: 0.0,
        symbol_rate: rate,
        scheme: ModulationScheme::psk(2, 1),
        use_tr: false,
        degradation: None,
        detector: DetectorChoice::Coherent,
        pilot_symbols: None,
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for (snr_db, min_bits) in [(0.0f64, 100_000u64), (4.0, 100_000), (8.0, 1_000_000)] {
        let snr = dsp::db_to_linear(snr_db);
        let noise = noise_of_power(1.0 / snr, DT);
        let r = simulate_link(&channels, &link, &noise, min_bits, 0, 7).unwrap();
        let lr = &r.links[0];
        let p = 0.5 * erfc(snr.sqrt());
        let ci99 = 2.5758 * (p * (1.0 - p) / lr.bits as f64).sqrt();
        let ok = lr.bits >= 100_000 && (lr.ber - p).abs() <= ci99;
        pass &= ok;
        parts.push(format!(
            "{snr_db} dB: {:.3e} vs Q {:.3e} ± {:.1e} over {} bits{}",
            lr.ber,
            p,
            ci99,
            lr.bits,
            if ok { "" } else { " [MISS]" }
        ));
    }
    let elapsed = t0.elapsed();
    pass &= elapsed.as_secs_f64() < 60.0;
    let detail = format!("{}, {elapsed:.2?} (< 1 min)", parts.join("; "));
    assert!(verdict(3, "ber-calibration-oracle", pass, &detail), "{detail}");
}

/// Criterion 4 — on a fixed 20-seed dense-multipath ensemble at 10 dBm,
/// plain 2-ASK must fail (BER > 1e-3) at 10 GBd while the precoded link
/// stays under 1e-3 at five times that rate, on at least 80% of seeds.
#[test]
fn a04_isi_mitigation_trend() {
    let t0 = Instant::now();
    let params = ReverbChannelParams {
        propagation_delay: 0.0,
        decay_constant: 0.5e-9,
        tap_rate: 2e12,
        rician_k: 0.0,
        duration: 2e-9,
        path_gain_db: -25.0,
        sample_interval: 0.25e-12,
    };
    let noise = NoiseModel::default();
    let sps10 = netsim::sps_for_rate(1e10, params.sample_interval).unwrap();
    let sps50 = netsim::sps_for_rate(5e10, params.sample_interval).unwrap();
    let seeds = 20u64;
    let mut successes = 0u64;
    let mut plain_bers = Vec::new();
    let mut tr_bers = Vec::new();
    for seed in 0..seeds {
        let channels = ChannelMatrix::generate(2, &params, seed, true).unwrap();
        let plain = simulate_link(
            &channels,
            &impulse_ask_link(0, 1, 1e10, sps10, false),
            &noise,
            50_000,
            0,
            seed,
        )
        .unwrap();
        let tr = simulate_link(
            &channels,
            &impulse_ask_link(0, 1, 5e10, sps50, true),
            &noise,
            50_000,
            0,
            seed,
        )
        .unwrap();
        let p = plain.links[0].ber;
        let q = tr.links[0].ber;
        plain_bers.push(p);
        tr_bers.push(q);
        if p > 1e-3 && q < 1e-3 {
            successes += 1;
        }
    }
    let worst_plain = plain_bers.iter().cloned().fold(f64::INFINITY, f64::min);
    let worst_tr = tr_bers.iter().cloned().fold(0.0, f64::max);
    let elapsed = t0.elapsed();
    let pass = successes >= 16 && elapsed.as_secs_f64() < 600.0;
    let detail = format!(
        "{successes}/{seeds} seeds with plain@10GBd > 1e-3 and precoded@50GBd < 1e-3 \
         (>= 16 required); plain BER >= {worst_plain:.2e}, precoded BER <= {worst_tr:.2e}, \
         {elapsed:.2?} (< 10 min)"
    );
    assert!(verdict(4, "isi-mitigation-trend", pass, &detail), "{detail}");
}

/// Criterion 5 — two concurrent same-direction links: precoding must win the
/// measured SINR on every draw of a 20-seed ensemble; the deterministic
/// decomposition must agree with Monte Carlo within 0.5 dB; and at +60 dB
/// transmit power the SINR must sit within 0.1 dB of its analytic
/// interference-only ceiling.
#[test]
fn a05_cci_mitigation_trend() {
    let t0 = Instant::now();
    let params = ReverbChannelParams::inter_chip();
    let noise = NoiseModel::default();
    let mut pass = true;
    let mut min_gain = f64::INFINITY;
    let mut max_mc_det_gap = 0.0f64;
    let mut max_ceiling_gap = 0.0f64;
    for seed in 100..120u64 {
        let channels = ChannelMatrix::generate(4, &params, seed, true).unwrap();
        let mut sinr_by_arm = [0.0f64; 2];
        for (arm, use_tr) in [false, true].into_iter().enumerate() {
            let links: Vec<LinkConfig> = (0..2)
                .map(|i| LinkConfig {
                    tx: i,
                    rx: 2 + i,
                    tx_power_dbm: 0.0,
                    symbol_rate: 1e10,
                    scheme: ModulationScheme::psk(4, 20).with_pulse_width(1),
                    use_tr,
                    degradation: None,
                    detector: DetectorChoice::Coherent,
                    pilot_symbols: None,
                })
                .collect();
            let set = LinkSet {
                links,
                mode: ConcurrencyMode::MultiTx,
            };
            let mc = simulate_concurrent(&channels, &set, &noise, 20_000, 0, seed).unwrap();
            let det = measure_sinr(&channels, &set, 0, &[0.0, 0.0], &noise).unwrap();
            let det60 = measure_sinr(&channels, &set, 0, &[60.0, 60.0], &noise).unwrap();
            sinr_by_arm[arm] = mc.links[0].sinr_db;
            max_mc_det_gap = max_mc_det_gap.max((mc.links[0].sinr_db - det.sinr_db()).abs());
            max_ceiling_gap =
                max_ceiling_gap.max((det60.sinr_db() - det60.interference_ceiling_db()).abs());
        }
        min_gain = min_gain.min(sinr_by_arm[1] - sinr_by_arm[0]);
    }
    pass &= min_gain > 0.0;
    pass &= max_mc_det_gap <= 0.5;
    pass &= max_ceiling_gap <= 0.1;
    let elapsed = t0.elapsed();
    pass &= elapsed.as_secs_f64() < 300.0;
    let detail = format!(
        "precoded SINR beat plain on all 20 seeds (min gain {min_gain:.2} dB); \
         |Monte-Carlo - deterministic| <= {max_mc_det_gap:.3} dB (<= 0.5); \
         |SINR@+60dBm - interference ceiling| <= {max_ceiling_gap:.4} dB (<= 0.1); \
         {elapsed:.2?} (< 5 min)"
    );
    assert!(verdict(5, "cci-mitigation-trend", pass, &detail), "{detail}");
}

/// Criterion 6 — the symbol rate at which the worst link first crosses
/// BER 1e-3 must be non-increasing in the number of concurrent links
/// (1, 2, 3) on a fixed channel draw, and the 3-link set must actually
/// cross inside the swept grid.
#[test]
fn a06_multi_link_rate_ordering() {
    let t0 = Instant::now();
    let channels = preset_matrix(6, 47);
    let links: Vec<LinkConfig> = (0..3)
        .map(|i| impulse_ask_link(i, 3 + i, 1e10, 20, true))
        .collect();
    let rates = [1e10, 2e10, 5e10];
    let rows = sweep_aggregate(
        &channels,
        &links,
        ConcurrencyMode::MultiTx,
        &NoiseModel::off(),
        &rates,
        10_000,
        0,
        11,
    )
    .unwrap();
    let threshold =
        |n: usize| first_rate_exceeding(&rows, n, 1e-3).unwrap_or(f64::INFINITY);
    let th: Vec<f64> = (1..=3).map(threshold).collect();
    let ordered = th[1] <= th[0] && th[2] <= th[1];
    let witnessed = th[2].is_finite();
    let elapsed = t0.elapsed();
    let pass = ordered && witnessed && elapsed.as_secs_f64() < 900.0;
    let detail = format!(
        "first rate with worst-link BER > 1e-3: 1 link {:e}, 2 links {:e}, 3 links {:e} Bd \
         (non-increasing, finite at 3 links), {elapsed:.2?} (< 15 min)",
        th[0], th[1], th[2]
    );
    assert!(verdict(6, "multi-link-rate-ordering", pass, &detail), "{detail}");
}

/// Criterion 7 — for every PSK order in {2, 4, 8, 16}, the precoded arm's
/// maximum aggregate rate at BER < 1e-3 must be at least the plain arm's.
/// Dense diffuse channels (low cross-correlation) keep the comparison
/// non-vacuous: the precoded arm actually reaches feasible rates at the
/// lower orders instead of both arms flat-lining at zero.
#[test]
fn a07_modulation_order_sweep() {
    let t0 = Instant::now();
    let params = ReverbChannelParams {
        propagation_delay: 0.0,
        decay_constant: 0.5e-9,
        tap_rate: 2e12,
        rician_k: 0.0,
        duration: 3e-9,
        path_gain_db: -30.0,
        sample_interval: DT,
    };
    let channels = ChannelMatrix::generate(4, &params, 48, true).unwrap();
    let links: Vec<LinkConfig> = (0..2)
        .map(|i| {
            let mut l = impulse_ask_link(i, 2 + i, 1e10, 20, true);
            l.scheme = ModulationScheme::psk(2, 20).with_pulse_width(1);
            l.detector = DetectorChoice::Auto;
            l
        })
        .collect();
    let (_points, summaries) = sweep_modulation_order(
        &channels,
        &links,
        ConcurrencyMode::MultiTx,
        &NoiseModel::default(),
        &[2, 4, 8, 16],
        &[1e10, 2e10, 5e10],
        1e-3,
        10_000,
        0,
        13,
    )
    .unwrap();
    let mut pass = summaries.len() == 4;
    let mut parts = Vec::new();
    for s in &summaries {
        let ok = s.plain_max_bps <= s.precoded_max_bps;
        pass &= ok;
        parts.push(format!(
            "{}-PSK plain {:.0e} <= precoded {:.0e} bps{}",
            s.order,
            s.plain_max_bps,
            s.precoded_max_bps,
            if ok { "" } else { " [VIOLATED]" }
        ));
    }
    // The ordering must be witnessed, not vacuous: the precoded arm has to
    // reach a feasible rate for at least the two lowest orders.
    let witnessed = summaries
        .iter()
        .filter(|s| s.precoded_max_bps > 0.0)
        .count()
        >= 2;
    pass &= witnessed;
    let elapsed = t0.elapsed();
    pass &= elapsed.as_secs_f64() < 900.0;
    let detail = format!(
        "{}; non-vacuous (>= 2 orders with feasible precoded rate): {witnessed}, \
         {elapsed:.2?} (< 15 min)",
        parts.join("; ")
    );
    assert!(verdict(7, "modulation-order-sweep", pass, &detail), "{detail}");
}

/// Criterion 8 — transmit-side precoding and receive-side matched filtering
/// are the same LTI system: on 100 random channel/stream pairs the two
/// orderings must produce sample-identical noiseless outputs (identical bit
/// decisions, waveforms within 1e-10 relative — the two bracketings round
/// differently in floating point, so exact bitwise equality is not the
/// meaningful reading).
#[test]
fn a08_lti_equivalence() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA8);
    let pairs = 100usize;
    let sps = 4usize;
    let symbols = 256usize;
    let mut worst_rel = 0.0f64;
    let mut decision_mismatches = 0usize;
    for i in 0..pairs {
        let params = random_params(&mut rng, 3e-10);
        let h = generate_reverberant_cir(&params, 0xCAFE + i as u64).unwrap();
        let g = build_tr_filter(&h);
        let mut x = vec![c(0.0, 0.0); symbols * sps];
        let bits: Vec<bool> = (0..symbols).map(|_| rng.gen()).collect();
        for (k, &b) in bits.iter().enumerate() {
            x[k * sps] = c(if b { 1.0 } else { -1.0 }, 0.0);
        }
        let tx_precoded = dsp::convolve(&dsp::convolve(&x, g.taps()), h.samples());
        let rx_filtered = dsp::convolve(&dsp::convolve(&x, h.samples()), g.taps());
        assert_eq!(tx_precoded.len(), rx_filtered.len());
        let peak = tx_precoded.iter().map(|s| s.norm()).fold(0.0, f64::max);
        let max_diff = tx_precoded
            .iter()
            .zip(&rx_filtered)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        worst_rel = worst_rel.max(max_diff / peak);
        let delay = h.len() - 1;
        for k in 0..symbols {
            let idx = k * sps + delay;
            if (tx_precoded[idx].re > 0.0) != (rx_filtered[idx].re > 0.0) {
                decision_mismatches += 1;
            }
        }
    }
    let elapsed = t0.elapsed();
    let pass =
        decision_mismatches == 0 && worst_rel <= 1e-10 && elapsed.as_secs_f64() < 10.0;
    let detail = format!(
        "{pairs} pairs x {symbols} symbols: {decision_mismatches} decision mismatches, \
         worst relative sample deviation {worst_rel:.2e} (<= 1e-10), {elapsed:.2?} (< 10 s)"
    );
    assert!(verdict(8, "lti-equivalence", pass, &detail), "{detail}");
}

/// Criterion 9 — scheduler against ground truth: greedy selections on 50
/// random instances (n <= 6) must be feasible and never beat the exhaustive
/// optimum; the two-link power allocation must hit the hand-solved fixed
/// point P = 0.2 mW to 1e-6; and the χ² = 0.1 variant must be flagged
/// infeasible.
#[test]
fn a09_scheduler_oracle() {
    let t0 = Instant::now();
    let mut pass = true;
    let mut matched = 0usize;
    let mut worst_ratio = 1.0f64;
    let instances = 50u64;
    for seed in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let n = rng.gen_range(2..=6usize);
        let mut lut = vec![vec![0.0; n]; n];
        for i in 0..n {
            lut[i][i] = 1.0;
            for j in (i + 1)..n {
                let chi: f64 = rng.gen_range(0.0..0.6);
                lut[i][j] = chi;
                lut[j][i] = chi;
            }
        }
        let input = SchedulerInput {
            candidates: (0..n)
                .map(|i| CandidateLink {
                    tx: i,
                    rx: n + i,
                    scheme: ModulationScheme::psk(2, 4),
                    symbol_rate: 1e9 * rng.gen_range(1..=8) as f64,
                })
                .collect(),
            lut,
            gains: (0..n).map(|_| rng.gen_range(0.1..10.0)).collect(),
            noise_mw: rng.gen_range(1e-4..1e-2),
            p_min_dbm: -30.0,
            p_max_dbm: 20.0,
            sinr_target_db: rng.gen_range(3.0..12.0),
        };
        let schedule = select_links(&input).unwrap();
        if !schedule.selected.is_empty() {
            let powers_mw: Vec<f64> =
                schedule.powers_dbm.iter().map(|&p| dsp::dbm_to_mw(p)).collect();
            let sinrs = predict_sinr(&input, &schedule.selected, &powers_mw).unwrap();
            pass &= sinrs
                .iter()
                .all(|s| dsp::linear_to_db(*s) >= input.sinr_target_db - 1e-4);
        }
        let mut best_rate = 0.0f64;
        for mask in 1u32..(1 << n) {
            let subset: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            if allocate_power(&input, &subset).unwrap().is_feasible() {
                let rate: f64 = subset.iter().map(|&i| input.candidates[i].rate_bps()).sum();
                best_rate = best_rate.max(rate);
            }
        }
        pass &= schedule.aggregate_rate_bps <= best_rate + 1e-6;
        if best_rate > 0.0 {
            pass &= !schedule.selected.is_empty();
            let ratio = schedule.aggregate_rate_bps / best_rate;
            worst_ratio = worst_ratio.min(ratio);
            if ratio >= 1.0 - 1e-9 {
                matched += 1;
            }
        } else {
            pass &= schedule.selected.is_empty();
            matched += 1;
        }
    }

    // Hand-solved two-link fixed point: P = target·(N + χ²·g·P)/g with
    // g = 1, N = 0.01 mW, target 10 dB (linear 10), χ² = 0.05:
    // P = 10·(0.01 + 0.05·P)  ⇒  P = 0.2 mW on both links.
    let two_link = |chi_sq: f64| SchedulerInput {
        candidates: (0..2)
            .map(|i| CandidateLink {
                tx: i,
                rx: 2 + i,
                scheme: ModulationScheme::psk(2, 4),
                symbol_rate: 1e9,
            })
            .collect(),
        lut: vec![vec![1.0, chi_sq.sqrt()], vec![chi_sq.sqrt(), 1.0]],
        gains: vec![1.0, 1.0],
        noise_mw: 0.01,
        p_min_dbm: -30.0,
        p_max_dbm: 20.0,
        sinr_target_db: 10.0,
    };
    let fixed_point_err = match allocate_power(&two_link(0.05), &[0, 1]).unwrap() {
        AllocationOutcome::Feasible { powers_mw, .. } => powers_mw
            .iter()
            .map(|p| (p - 0.2).abs())
            .fold(0.0, f64::max),
        AllocationOutcome::Infeasible { .. } => f64::INFINITY,
    };
    pass &= fixed_point_err <= 1e-6;
    // χ² = 0.1 puts the interference feedback gain at target·χ²·g = 1:
    // the fixed-point iteration diverges and the subset must be rejected.
    let infeasible_flagged = !allocate_power(&two_link(0.1), &[0, 1]).unwrap().is_feasible();
    pass &= infeasible_flagged;

    let elapsed = t0.elapsed();
    pass &= elapsed.as_secs_f64() < 60.0;
    let detail = format!(
        "greedy feasible and <= exhaustive optimum on {instances}/{instances} instances, \
         matched the optimum on {matched} (worst rate ratio {worst_ratio:.3}); \
         two-link fixed point off by {fixed_point_err:.1e} mW (<= 1e-6); \
         χ²=0.1 flagged infeasible: {infeasible_flagged}; {elapsed:.2?} (< 1 min)"
    );
    assert!(verdict(9, "scheduler-oracle", pass, &detail), "{detail}");
}

/// Criterion 10 — coarser precoding filters must hurt monotonically: over a
/// fixed 100-channel ensemble, the mean equivalent-channel peak falls and
/// the pooled BER rises as the filter's hold factor grows through and past
/// the 4-samples-per-symbol ratio.
#[test]
fn a10_degradation_monotonicity() {
    let t0 = Instant::now();
    let params = ReverbChannelParams {
        propagation_delay: 0.0,
        decay_constant: 0.5e-9,
        tap_rate: 2e12,
        rician_k: 0.0,
        duration: 3e-9,
        path_gain_db: -30.0,
        sample_interval: DT,
    };
    let noise = NoiseModel::default();
    let factors = [1usize, 4, 8, 16, 32];
    let n_chan = 100u64;
    let mut mean_peaks = Vec::with_capacity(factors.len());
    let mut pooled_bers = Vec::with_capacity(factors.len());
    for &f in &factors {
        let degradation = FilterDegradation {
            keep_taps: None,
            quant_bits: None,
            downsample_factor: f,
        };
        let mut peak_sum = 0.0f64;
        let mut errors = 0u64;
        let mut bits = 0u64;
        for seed in 0..n_chan {
            let channels = ChannelMatrix::generate(2, &params, seed, true).unwrap();
            let h = channels.require(0, 1).unwrap();
            let g = build_tr_filter(h);
            let gd = trchipnet::tr::degrade_filter(&g, &degradation).unwrap();
            let q = equivalent_channel(&gd, h).unwrap();
            peak_sum += q.samples()[h.len() - 1].norm() / h.energy().sqrt();
            let link = LinkConfig {
                tx: 0,
                rx: 1,
                tx_power_dbm: 0.0,
                symbol_rate: 5e10,
                scheme: ModulationScheme::psk(2, 4).with_pulse_width(1),
                use_tr: true,
                degradation: Some(degradation.clone()),
                detector: DetectorChoice::Coherent,
                pilot_symbols: None,
            };
            let r = simulate_link(&channels, &link, &noise, 10_000, 0, seed).unwrap();
            errors += r.links[0].errors;
            bits += r.links[0].bits;
        }
        mean_peaks.push(peak_sum / n_chan as f64);
        pooled_bers.push(errors as f64 / bits as f64);
    }
    let peaks_decreasing = mean_peaks.windows(2).all(|w| w[1] < w[0]);
    let bers_increasing = pooled_bers.windows(2).all(|w| w[1] > w[0]);
    let elapsed = t0.elapsed();
    let pass = peaks_decreasing && bers_increasing && elapsed.as_secs_f64() < 300.0;
    let peaks: Vec<String> = mean_peaks.iter().map(|p| format!("{p:.4}")).collect();
    let bers: Vec<String> = pooled_bers.iter().map(|b| format!("{b:.3e}")).collect();
    let detail = format!(
        "hold factors {factors:?} at 4 samples/symbol: mean peak ratio [{}] strictly \
         decreasing = {peaks_decreasing}, pooled BER [{}] strictly increasing = \
         {bers_increasing}, {elapsed:.2?} (< 5 min)",
        peaks.join(", "),
        bers.join(", ")
    );
    assert!(verdict(10, "degradation-monotonicity", pass, &detail), "{detail}");
}

/// Criterion 11 — seeded runs must serialize byte-identically across repeats
/// and across worker-thread counts, and a reciprocal channel must give
/// identical link statistics in both directions.
#[test]
fn a11_determinism_and_reciprocity() {
    let t0 = Instant::now();
    let channels = preset_matrix(4, 7);
    let links: Vec<LinkConfig> = (0..2)
        .map(|i| LinkConfig {
            tx: i,
            rx: 2 + i,
            tx_power_dbm: 0.0,
            symbol_rate: 1e10,
            scheme: ModulationScheme::psk(4, 20).with_pulse_width(1),
            use_tr: true,
            degradation: None,
            detector: DetectorChoice::Coherent,
            pilot_symbols: None,
        })
        .collect();
    let set = LinkSet {
        links,
        mode: ConcurrencyMode::MultiTx,
    };
    let noise = NoiseModel::default();
    let run = |threads: usize| {
        ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_concurrent(&channels, &set, &noise, 20_000, 0, 5).unwrap())
    };
    let r1 = run(1);
    let r1_again = run(1);
    let r4 = run(4);
    let b1 = serde_json::to_vec(&r1).unwrap();
    let repeat_identical = b1 == serde_json::to_vec(&r1_again).unwrap();
    let threads_identical = b1 == serde_json::to_vec(&r4).unwrap();

    let two = preset_matrix(2, 9);
    assert!(two.reciprocal());
    let dir = |tx: usize, rx: usize| {
        let link = LinkConfig {
            tx,
            rx,
            tx_power_dbm: 5.0,
            symbol_rate: 1e10,
            scheme: ModulationScheme::ask(0.5, 20).with_pulse_width(1),
            use_tr: true,
            degradation: None,
            detector: DetectorChoice::Energy,
            pilot_symbols: None,
        };
        simulate_link(&two, &link, &noise, 20_000, 0, 3).unwrap()
    };
    let fwd = dir(0, 1);
    let rev = dir(1, 0);
    let f = &fwd.links[0];
    let r = &rev.links[0];
    let reciprocal_identical = f.bits == r.bits
        && f.errors == r.errors
        && f.ber == r.ber
        && f.sinr_db == r.sinr_db
        && f.sinr == r.sinr;

    let elapsed = t0.elapsed();
    let pass = repeat_identical
        && threads_identical
        && reciprocal_identical
        && elapsed.as_secs_f64() < 60.0;
    let detail = format!(
        "repeat run byte-identical: {repeat_identical}; 1-thread vs 4-thread \
         byte-identical: {threads_identical}; 0->1 vs 1->0 identical \
         bits/errors/BER/SINR: {reciprocal_identical} (BER {:.3e}, SINR {:.2} dB), \
         {elapsed:.2?} (< 1 min)",
        f.ber, f.sinr_db
    );
    assert!(verdict(11, "determinism-and-reciprocity", pass, &detail), "{detail}");
}
