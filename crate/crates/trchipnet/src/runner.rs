//! Experiment execution: takes a validated [`ExperimentConfig`], runs the
//! named experiment, and writes the result files.
//!
//! Every run writes `run_manifest.json` — tool version plus the fully
//! resolved config (defaults materialized, CLI overrides applied) — so any
//! output directory is self-describing and bit-identically re-runnable.
//!
//! CSV dialect: RFC 4180 (CRLF row terminators, quoting only where needed),
//! mandatory header row, `.` decimal separator, floats in scientific
//! notation. Row order follows grid order, never completion order.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::chan::{self, ChanError, ChannelMatrix};
use crate::config::{ExperimentConfig, ExperimentKind, Violation};
use crate::netsim::{
    simulate_concurrent, simulate_link, LinkResult, LinkSet, NetsimError, SimResult,
};
use crate::sched::{self, SchedError};
use crate::sweeps;
use crate::tr::{self, TrError};
use crate::dsp;

/// Failures during execution. `Config` means the input was rejected before
/// anything ran; everything else is a runtime failure.
#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("invalid configuration ({} violation{})", .0.len(), if .0.len() == 1 { "" } else { "s" })]
    Config(Vec<Violation>),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("channel: {0}")]
    Chan(#[from] ChanError),
    #[error("simulation: {0}")]
    Netsim(#[from] NetsimError),
    #[error("precoder: {0}")]
    Tr(#[from] TrError),
    #[error("scheduler: {0}")]
    Sched(#[from] SchedError),
}

/// What a run produced: the output directory and the files written into it
/// (directory-relative names, in the order they were written).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
}

/// Execute `config`. `base_dir` anchors relative paths inside the config
/// (normally the config file's directory); all outputs land in `out_dir`,
/// which is created if missing.
pub fn run(
    config: &ExperimentConfig,
    base_dir: &Path,
    out_dir: &Path,
) -> Result<RunOutcome, RunnerError> {
    let prepared = config.prepare(base_dir).map_err(RunnerError::Config)?;
    fs::create_dir_all(out_dir)?;

    let mut outcome = RunOutcome {
        out_dir: out_dir.to_path_buf(),
        files: Vec::new(),
    };
    write_manifest(config, out_dir, &mut outcome)?;

    let channels = &prepared.channels;
    match config.experiment {
        ExperimentKind::Characterize => characterize(channels, out_dir, &mut outcome)?,
        ExperimentKind::SimLink | ExperimentKind::SimMulti => {
            sim(config, channels, out_dir, &mut outcome)?
        }
        ExperimentKind::SweepRate => sweep_rate(config, channels, out_dir, &mut outcome)?,
        ExperimentKind::SweepPower => sweep_power(config, channels, out_dir, &mut outcome)?,
        ExperimentKind::SweepAggregate => {
            sweep_aggregate(config, channels, out_dir, &mut outcome)?
        }
        ExperimentKind::SweepOrder => sweep_order(config, channels, out_dir, &mut outcome)?,
        ExperimentKind::DegradationStudy => {
            degradation_study(config, channels, out_dir, &mut outcome)?
        }
        ExperimentKind::Schedule => {
            let input = prepared
                .scheduler
                .as_ref()
                .expect("prepare builds the scheduler input for schedule runs");
            schedule(input, out_dir, &mut outcome)?
        }
    }
    Ok(outcome)
}

/// `run_manifest.json`: tool version + resolved config.
fn write_manifest(
    config: &ExperimentConfig,
    out_dir: &Path,
    outcome: &mut RunOutcome,
) -> Result<(), RunnerError> {
    let manifest = json!({
        "version": crate::VERSION,
        "config": config.to_resolved_json(),
    });
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(out_dir.join("run_manifest.json"), text)?;
    outcome.files.push("run_manifest.json".into());
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, RunnerError> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_path(path)?)
}

/// Floats in scientific notation with a `.` separator; integers as-is.
fn f(x: f64) -> String {
    format!("{x:e}")
}

/// Column headers shared by every per-link measurement row.
const LINK_METRIC_HEADERS: [&str; 10] = [
    "bits",
    "errors",
    "ber",
    "ber_ci95",
    "sinr_db",
    "signal_dbm",
    "isi_dbm",
    "cci_dbm",
    "noise_dbm",
    "data_rate_bps",
];

fn link_metric_fields(r: &LinkResult) -> [String; 10] {
    [
        r.bits.to_string(),
        r.errors.to_string(),
        f(r.ber),
        f(r.ber_ci95),
        f(r.sinr_db),
        f(dsp::mw_to_dbm(r.sinr.signal_mw)),
        f(dsp::mw_to_dbm(r.sinr.isi_mw)),
        f(dsp::mw_to_dbm(r.sinr.cci_mw)),
        f(dsp::mw_to_dbm(r.sinr.noise_mw)),
        f(r.data_rate_bps),
    ]
}

/// `characterize.csv` (per-pair statistics) + `correlation.csv` (the full
/// pair-by-pair correlation table, peak cross-correlation of the CIRs).
fn characterize(
    channels: &ChannelMatrix,
    out_dir: &Path,
    outcome: &mut RunOutcome,
) -> Result<(), RunnerError> {
    let mut keys: Vec<(usize, usize)> = channels.keys().collect();
    keys.sort_unstable();

    let mut w = csv_writer(&out_dir.join("characterize.csv"))?;
    w.write_record([
        "tx",
        "rx",
        "taps",
        "sample_interval_s",
        "start_delay_s",
        "energy",
        "rms_delay_spread_s",
    ])?;
    for &(tx, rx) in &keys {
        let cir = channels.require(tx, rx)?;
        w.write_record([
            tx.to_string(),
            rx.to_string(),
            cir.len().to_string(),
            f(cir.sample_interval()),
            f(cir.start_delay()),
            f(cir.energy()),
            f(chan::rms_delay_spread(cir)),
        ])?;
    }
    w.flush()?;
    outcome.files.push("characterize.csv".into());

    let mut w = csv_writer(&out_dir.join("correlation.csv"))?;
    let label = |&(tx, rx): &(usize, usize)| format!("{tx}->{rx}");
    let mut header = vec!["pair".to_string()];
    header.extend(keys.iter().map(label));
    w.write_record(&header)?;
    for a in &keys {
        let cir_a = channels.require(a.0, a.1)?;
        let mut row = vec![label(a)];
        for b in &keys {
            let cir_b = channels.require(b.0, b.1)?;
            row.push(f(chan::channel_correlation(cir_a, cir_b)?));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    outcome.files.push("correlation.csv".into());
    Ok(())
}

/// `results.csv` for `sim-link` / `sim-multi`: one row per link.
fn sim(
    config: &ExperimentConfig,
    channels: &ChannelMatrix,
    out_dir: &Path,
    outcome: &mut RunOutcome,
) -> Result<(), RunnerError> {
    let (set, result) = match config.experiment {
        ExperimentKind::SimLink => {
            let link = config.link.clone().expect("prepare checked the link block");
            let result = simulate_link(
                channels,
                &link,
                &config.noise,
                config.min_bits,
                config.max_errors,
                config.seed,
            )?;
            (LinkSet::single(link), result)
        }
        _ => {
            let set = LinkSet {
                links: config.links.clone().expect("prepare checked the links block"),
                mode: config.mode.expect("prepare checked the mode block"),
            };
            let result = simulate_concurrent(
                channels,
                &set,
                &config.noise,
                config.min_bits,
                config.max_errors,
                config.seed,
            )?;
            (set, result)
        }
    };

    let mut w = csv_writer(&out_dir.join("results.csv"))?;
    let mut header = vec!["link", "tx", "rx", "symbol_rate_bd"];
    header.extend(LINK_METRIC_HEADERS);
    header.extend(["aggregate_rate_bps", "seed"]);
    w.write_record(&header)?;
    for (i, r) in result.links.iter().enumerate() {
        let mut row = vec![
            i.to_string(),
            r.tx.to_string(),
            r.rx.to_string(),
            f(set.links[i].symbol_rate),
        ];
        row.extend(link_metric_fields(r));
        row.push(f(result.aggregate_rate_bps));
        row.push(result.seed.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    outcome.files.push("results.csv".into());
    Ok(())
}

/// `sweep_rate.csv`: one row per symbol-rate grid point (single link).
fn sweep_rate(
    config: &ExperimentConfig,
    channels: &ChannelMatrix,
    out_dir: &Path,
    outcome: &mut RunOutcome,
) -> Result<(), RunnerError> {
    let link = config.link.as_ref().expect("prepare checked the link block");
    let rates = config.rates.as_ref().expect("prepare checked the rates block");
    let points = sweeps::sweep_symbol_rate(
        channels,
        link,
        &config.noise,
        rates,
        config.min_bits,
        config.max_errors,
        config.seed,
    )?;

    let mut w = csv_writer(&out_dir.join("sweep_rate.csv"))?;
    let mut header = vec!["symbol_rate_bd", "tx", "rx"];
    header.extend(LINK_METRIC_HEADERS);
    header.push("seed");
    w.write_record(&header)?;
    for p in &points {
        let r = &p.result.links[0];
        let mut row = vec![f(p.symbol_rate), r.tx.to_string(), r.rx.to_string()];
        row.extend(link_metric_fields(r));
        row.push(p.result.seed.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    outcome.files.push("sweep_rate.csv".into());
    Ok(())
}

/// `sweep_power.csv`: one row per (power grid point, link), with the
/// deterministic SINR prediction alongside the measurement (empty where the
/// predictor declines the link).
fn sweep_power(
    config: &ExperimentConfig,
    channels: &ChannelMatrix,
    out_dir: &Path,
    outcome: &mut RunOutcome,
) -> Result<(), RunnerError> {
    let set = LinkSet {
        links: config.links.clone().expect("prepare checked the links block"),
        mode: config.mode.expect("prepare checked the mode block"),
    };
    let powers = config
        .powers_dbm
        .as_ref()
        .expect("prepare checked the powers_dbm block");
    let points = sweeps::sweep_power(
        channels,
        &set,
        &config.noise,
        powers,
        config.min_bits,
        config.max_errors,
        config.seed,
    )?;

    let mut w = csv_writer(&out_dir.join("sweep_power.csv"))?;
    let mut header = vec!["tx_power_dbm", "link", "tx", "rx"];
    header.extend(LINK_METRIC_HEADERS);
    header.extend(["predicted_sinr_db", "seed"]);
    w.write_record(&header)?;
    for p in &points {
        for (i, r) in p.result.links.iter().enumerate() {
            let mut row = vec![
                f(p.tx_power_dbm),
                i.to_string(),
                r.tx.to_string(),
                r.rx.to_string(),
            ];
            row.extend(link_metric_fields(r));
            row.push(match &p.predicted[i] {
                Some(b) => f(b.sinr_db()),
                None => String::new(),
            });
            row.push(p.result.seed.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    outcome.files.push("sweep_power.csv".into());
    Ok(())
}

/// `sweep_aggregate.csv`: one row per (link-count, symbol-rate, link).
fn sweep_aggregate(
    config: &ExperimentConfig,
    channels: &ChannelMatrix,
    out_dir: &Path,
    outcome: &mut RunOutcome,
) -> Result<(), RunnerError> {
    let links = config.links.as_ref().expect("prepare checked the links block");
    let mode = config.mode.expect("prepare checked the mode block");
    let rates = config.rates.as_ref().expect("prepare checked the rates block");
    let points = sweeps::sweep_aggregate(
        channels,
        links,
        mode,
        &config.noise,
        rates,
        config.min_bits,
        config.max_errors,
        config.seed,
    )?;

    let mut w = csv_writer(&out_dir.join("sweep_aggregate.csv"))?;
    let mut header = vec!["link_count", "symbol_rate_bd", "link", "tx", "rx"];
    header.extend(LINK_METRIC_HEADERS);
    header.extend(["aggregate_rate_bps", "worst_ber", "seed"]);
    w.write_record(&header)?;
    for p in &points {
        for (i, r) in p.result.links.iter().enumerate() {
            let mut row = vec![
                p.link_count.to_string(),
                f(p.symbol_rate),
                i.to_string(),
                r.tx.to_string(),
                r.rx.to_string(),
            ];
            row.extend(link_metric_fields(r));
            row.push(f(p.aggregate_rate_bps));
            row.push(f(p.worst_ber));
            row.push(p.result.seed.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    outcome.files.push("sweep_aggregate.csv".into());
    Ok(())
}

/// `sweep_order.csv` (grid detail) + `summary.csv` (max feasible aggregate
/// rate per order, plain vs precoded).
fn sweep_order(
    config: &ExperimentConfig,
    channels: &ChannelMatrix,
    out_dir: &Path,
    outcome: &mut RunOutcome,
) -> Result<(), RunnerError> {
    let links = config.links.as_ref().expect("prepare checked the links block");
    let mode = config.mode.expect("prepare checked the mode block");
    let rates = config.rates.as_ref().expect("prepare checked the rates block");
    let orders = config.orders.as_ref().expect("prepare checked the orders block");
    let (points, summaries) = sweeps::sweep_modulation_order(
        channels,
        links,
        mode,
        &config.noise,
        orders,
        rates,
        config.ber_target,
        config.min_bits,
        config.max_errors,
        config.seed,
    )?;

    let mut w = csv_writer(&out_dir.join("sweep_order.csv"))?;
    w.write_record([
        "order",
        "precoded",
        "symbol_rate_bd",
        "aggregate_rate_bps",
        "worst_ber",
        "seed",
    ])?;
    for p in &points {
        w.write_record([
            p.order.to_string(),
            p.precoded.to_string(),
            f(p.symbol_rate),
            f(p.aggregate_rate_bps),
            f(p.worst_ber),
            p.result.seed.to_string(),
        ])?;
    }
    w.flush()?;
    outcome.files.push("sweep_order.csv".into());

    let mut w = csv_writer(&out_dir.join("summary.csv"))?;
    w.write_record(["order", "plain_max_bps", "precoded_max_bps"])?;
    for s in &summaries {
        w.write_record([s.order.to_string(), f(s.plain_max_bps), f(s.precoded_max_bps)])?;
    }
    w.flush()?;
    outcome.files.push("summary.csv".into());
    Ok(())
}

/// `degradation.csv`: one row per degradation variant — the equivalent
/// channel's focusing-peak ratio (degraded precoder vs ideal ‖h‖₂) plus the
/// link's Monte Carlo measurement under that variant.
fn degradation_study(
    config: &ExperimentConfig,
    channels: &ChannelMatrix,
    out_dir: &Path,
    outcome: &mut RunOutcome,
) -> Result<(), RunnerError> {
    let base = config.link.as_ref().expect("prepare checked the link block");
    let variants = config
        .degradation_variants
        .as_ref()
        .expect("prepare checked the degradation_variants block");

    let h = channels.require(base.tx, base.rx)?;
    let ideal_peak = h.energy().sqrt();
    let g = tr::build_tr_filter(h);

    let mut w = csv_writer(&out_dir.join("degradation.csv"))?;
    let mut header = vec![
        "variant",
        "keep_taps",
        "quant_bits",
        "downsample_factor",
        "peak_ratio",
    ];
    header.extend(LINK_METRIC_HEADERS);
    header.push("seed");
    w.write_record(&header)?;

    for (vi, d) in variants.iter().enumerate() {
        let gd = tr::degrade_filter(&g, d)?;
        let q = tr::equivalent_channel(&gd, h)?;
        let peak = q.samples()[h.len() - 1].norm();

        let mut link = base.clone();
        link.degradation = Some(*d);
        let result = simulate_link(
            channels,
            &link,
            &config.noise,
            config.min_bits,
            config.max_errors,
            config.seed,
        )?;
        let r = &result.links[0];

        let mut row = vec![
            vi.to_string(),
            d.keep_taps.map(|k| k.to_string()).unwrap_or_default(),
            d.quant_bits.map(|b| b.to_string()).unwrap_or_default(),
            d.downsample_factor.to_string(),
            f(peak / ideal_peak),
        ];
        row.extend(link_metric_fields(r));
        row.push(result.seed.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    outcome.files.push("degradation.csv".into());
    Ok(())
}

/// `schedule.json` (the decision) + `lut.csv` (the correlation table used).
fn schedule(
    input: &sched::SchedulerInput,
    out_dir: &Path,
    outcome: &mut RunOutcome,
) -> Result<(), RunnerError> {
    let decision = sched::select_links(input)?;
    let mut text = serde_json::to_string_pretty(&decision).expect("schedule serializes");
    text.push('\n');
    fs::write(out_dir.join("schedule.json"), text)?;
    outcome.files.push("schedule.json".into());

    sched::save_lut(&input.lut, &out_dir.join("lut.csv"))?;
    outcome.files.push("lut.csv".into());
    Ok(())
}

/// Expose the single-link result for downstream checks without re-parsing
/// the CSV (test and FFI convenience).
pub fn run_single(
    config: &ExperimentConfig,
    base_dir: &Path,
) -> Result<SimResult, RunnerError> {
    let prepared = config.prepare(base_dir).map_err(RunnerError::Config)?;
    let link = config
        .link
        .clone()
        .ok_or_else(|| RunnerError::Config(vec![Violation {
            path: "link".into(),
            message: "run_single needs a single-link experiment".into(),
        }]))?;
    Ok(simulate_link(
        &prepared.channels,
        &link,
        &config.noise,
        config.min_bits,
        config.max_errors,
        config.seed,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;
    use tempfile::TempDir;

    fn run_cfg(text: &str, tag: &str) -> (TempDir, RunOutcome) {
        let cfg = ExperimentConfig::parse_str(text).expect("config parses");
        let dir = TempDir::new().expect("tempdir");
        let out = dir.path().join(tag);
        let outcome = run(&cfg, dir.path(), &out).expect("run succeeds");
        (dir, outcome)
    }

    fn read(outcome: &RunOutcome, name: &str) -> String {
        std::fs::read_to_string(outcome.out_dir.join(name)).expect("output file exists")
    }

    #[test]
    fn characterize_writes_stats_and_correlation_consistent_with_direct_calls() {
        let text = r#"{
            "schema": 1,
            "experiment": "characterize",
            "channel": {"generate": {"preset": "intra-chip", "nodes": 3}},
            "seed": 5
        }"#;
        let (_dir, outcome) = run_cfg(text, "char");
        assert_eq!(
            outcome.files,
            vec!["run_manifest.json", "characterize.csv", "correlation.csv"]
        );

        let stats = read(&outcome, "characterize.csv");
        let mut lines = stats.lines();
        assert_eq!(
            lines.next().unwrap(),
            "tx,rx,taps,sample_interval_s,start_delay_s,energy,rms_delay_spread_s"
        );
        // 3 nodes, reciprocal (the default): one entry per unordered pair
        assert_eq!(stats.lines().count(), 1 + 3);
        assert!(stats.contains("\r\n"), "CSV rows must be CRLF-terminated");

        // cross-check one row against direct channel-module calls
        let cfg = ExperimentConfig::parse_str(text).unwrap();
        let prepared = cfg.prepare(Path::new(".")).unwrap();
        let cir = prepared.channels.require(0, 1).unwrap();
        let row = stats
            .lines()
            .find(|l| l.starts_with("0,1,"))
            .expect("row for pair (0,1)");
        assert!(row.contains(&format!("{:e}", cir.energy())), "row: {row}");
        assert!(
            row.contains(&format!("{:e}", chan::rms_delay_spread(cir))),
            "row: {row}"
        );

        let corr = read(&outcome, "correlation.csv");
        let mut corr_lines = corr.lines();
        assert_eq!(corr_lines.next().unwrap(), "pair,0->1,0->2,1->2");
        let first: Vec<&str> = corr_lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "0->1");
        let diag: f64 = first[1].parse().unwrap();
        assert!((diag - 1.0).abs() < 1e-9, "self-correlation {diag}");
        let cross: f64 = first[2].parse().unwrap();
        let direct = chan::channel_correlation(
            prepared.channels.require(0, 1).unwrap(),
            prepared.channels.require(0, 2).unwrap(),
        )
        .unwrap();
        assert_eq!(cross, direct, "CSV must match the direct call exactly");
    }

    #[test]
    fn sim_link_on_a_clean_channel_writes_one_zero_ber_row() {
        // intra-chip K=3 still has ISI, so use a TR width-1 link at modest
        // rate and strong power: errors are astronomically unlikely.
        let text = r#"{
            "schema": 1,
            "experiment": "sim-link",
            "channel": {"generate": {"preset": "intra-chip", "nodes": 2}},
            "seed": 9,
            "min_bits": 10000,
            "max_errors": 0,
            "link": {
                "tx": 0, "rx": 1, "tx_power_dbm": 10.0, "symbol_rate": 1e9,
                "scheme": {"kind": "psk", "order": 2, "sps": 200, "pulse_width": 1},
                "use_tr": true
            }
        }"#;
        let (_dir, outcome) = run_cfg(text, "simlink");
        let body = read(&outcome, "results.csv");
        let mut lines = body.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("link,tx,rx,symbol_rate_bd,bits,errors,ber,"));
        let row = lines.next().unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[0], "0");
        assert_eq!(fields[1], "0");
        assert_eq!(fields[2], "1");
        assert_eq!(fields[5], "0", "errors: {row}");
        assert_eq!(fields[6], "0e0", "ber: {row}");
        assert!(lines.next().is_none(), "exactly one data row");

        let manifest = read(&outcome, "run_manifest.json");
        let value: serde_json::Value = serde_json::from_str(&manifest).unwrap();
        assert_eq!(value["version"], crate::VERSION);
        assert_eq!(value["config"]["seed"], 9);
        assert_eq!(value["config"]["ber_target"], 1e-3); // defaults materialized
    }

    #[test]
    fn reruns_are_byte_identical() {
        let text = r#"{
            "schema": 1,
            "experiment": "sweep-rate",
            "channel": {"generate": {"preset": "intra-chip", "nodes": 2}},
            "seed": 21,
            "min_bits": 10000,
            "max_errors": 0,
            "rates": [5e9, 1e10],
            "link": {
                "tx": 0, "rx": 1, "tx_power_dbm": 0.0, "symbol_rate": 5e9,
                "scheme": {"kind": "ask", "order": 2, "ratio": 0.5, "sps": 40, "pulse_width": 1},
                "use_tr": true
            }
        }"#;
        let (_dir1, first) = run_cfg(text, "a");
        let (_dir2, second) = run_cfg(text, "b");
        for name in ["run_manifest.json", "sweep_rate.csv"] {
            assert_eq!(read(&first, name), read(&second, name), "{name} differs");
        }
    }

    #[test]
    fn schedule_writes_decision_and_lut() {
        let text = r#"{
            "schema": 1,
            "experiment": "schedule",
            "channel": {"generate": {"preset": "intra-chip", "nodes": 6}},
            "seed": 11,
            "scheduler": {
                "candidates": [
                    {"tx": 0, "rx": 3, "scheme": {"kind": "psk", "order": 2, "sps": 20},
                     "symbol_rate": 1e10},
                    {"tx": 1, "rx": 4, "scheme": {"kind": "psk", "order": 4, "sps": 20},
                     "symbol_rate": 1e10}
                ],
                "p_min_dbm": -10.0,
                "p_max_dbm": 20.0,
                "sinr_target_db": 3.0
            }
        }"#;
        let (_dir, outcome) = run_cfg(text, "sched");
        let decision: sched::Schedule =
            serde_json::from_str(&read(&outcome, "schedule.json")).expect("valid JSON");
        assert!(!decision.selected.is_empty(), "something should be schedulable");
        for s in &decision.sinrs_db {
            assert!(*s >= 3.0 - 1e-3, "scheduled SINR {s} under target");
        }
        let lut = sched::lut_from_csv(&read(&outcome, "lut.csv")).expect("round-trips");
        assert_eq!(lut.len(), 2);
    }

    #[test]
    fn invalid_config_is_rejected_before_any_file_is_written() {
        let text = r#"{
            "schema": 1,
            "experiment": "sim-link",
            "channel": {"generate": {"preset": "intra-chip", "nodes": 2}},
            "seed": 1,
            "link": {
                "tx": 0, "rx": 5, "tx_power_dbm": 0.0, "symbol_rate": 1e10,
                "scheme": {"kind": "psk", "order": 2, "sps": 20},
                "use_tr": true
            }
        }"#;
        let cfg = ExperimentConfig::parse_str(text).unwrap();
        let dir = TempDir::new().unwrap();
        let out = dir.path().join("never");
        let err = run(&cfg, dir.path(), &out).unwrap_err();
        match err {
            RunnerError::Config(violations) => assert!(!violations.is_empty()),
            other => panic!("expected Config rejection, got {other}"),
        }
        assert!(!out.exists(), "no output directory on config rejection");
    }

    #[test]
    fn degradation_study_reports_peak_ratio_one_for_the_noop_variant() {
        let text = r#"{
            "schema": 1,
            "experiment": "degradation-study",
            "channel": {"generate": {"preset": "intra-chip", "nodes": 2}},
            "seed": 13,
            "min_bits": 10000,
            "max_errors": 0,
            "link": {
                "tx": 0, "rx": 1, "tx_power_dbm": 10.0, "symbol_rate": 1e10,
                "scheme": {"kind": "ask", "order": 2, "ratio": 0.5, "sps": 20, "pulse_width": 1},
                "use_tr": true
            },
            "degradation_variants": [
                {"downsample_factor": 1},
                {"downsample_factor": 8}
            ]
        }"#;
        let (_dir, outcome) = run_cfg(text, "deg");
        let body = read(&outcome, "degradation.csv");
        let rows: Vec<&str> = body.lines().skip(1).collect();
        assert_eq!(rows.len(), 2);
        let noop: Vec<&str> = rows[0].split(',').collect();
        let coarse: Vec<&str> = rows[1].split(',').collect();
        // header: variant,keep_taps,quant_bits,downsample_factor,peak_ratio,...
        let noop_ratio: f64 = noop[4].parse().unwrap();
        let coarse_ratio: f64 = coarse[4].parse().unwrap();
        assert!((noop_ratio - 1.0).abs() < 1e-12, "noop ratio {noop_ratio}");
        assert!(
            coarse_ratio < noop_ratio,
            "coarser clock must lower the focusing peak: {coarse_ratio} vs {noop_ratio}"
        );
    }
}
