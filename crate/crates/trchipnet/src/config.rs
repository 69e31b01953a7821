//! Experiment configuration: a versioned JSON schema, parse errors that name
//! the offending field by JSON path, and full cross-field validation.
//!
//! The central design rule is that [`ExperimentConfig::validate`] and the
//! runner share one code path, [`ExperimentConfig::prepare`]: `validate`
//! reports whatever `prepare` rejects, and the runner executes whatever
//! `prepare` accepts. The two can therefore never drift apart.
//!
//! All dB/dBm quantities stay in decibels inside the config; conversion to
//! linear units happens once, at the point of use.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chan::{self, ChannelMatrix, ReverbChannelParams};
use crate::netsim::{self, ConcurrencyMode, LinkConfig, LinkSet, NoiseModel};
use crate::sched::{CandidateLink, SchedulerInput};

/// Version of the config schema this build reads. Configs must carry a
/// matching `schema` field so stale files fail loudly instead of silently
/// reinterpreting fields.
pub const SCHEMA_VERSION: u32 = 1;

/// Errors reading or parsing a config file. Semantic problems are not
/// errors — they come back as [`Violation`] lists from [`ExperimentConfig::validate`].
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error at `{pointer}`: {message}")]
    Parse { pointer: String, message: String },
}

/// One semantic problem in a config: a JSON-style path to the offending
/// field plus a human-readable explanation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Which experiment the runner executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Per-pair channel statistics (delay spread, energy) + correlation table.
    Characterize,
    /// One link, one Monte Carlo BER/SINR measurement.
    SimLink,
    /// A set of concurrent links, one joint measurement.
    SimMulti,
    /// BER/SINR of one link across a symbol-rate grid.
    SweepRate,
    /// Measured and predicted SINR of a link set across a transmit-power grid.
    SweepPower,
    /// Aggregate rate and worst-link BER for growing link-count prefixes.
    SweepAggregate,
    /// Max aggregate rate under a BER target per PSK order, precoded vs plain.
    SweepOrder,
    /// Equivalent-channel peak and BER across precoder degradation variants.
    DegradationStudy,
    /// Correlation-LUT scheduling: greedy selection + power allocation.
    Schedule,
}

impl ExperimentKind {
    /// Kebab-case name, as written in config files.
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Characterize => "characterize",
            ExperimentKind::SimLink => "sim-link",
            ExperimentKind::SimMulti => "sim-multi",
            ExperimentKind::SweepRate => "sweep-rate",
            ExperimentKind::SweepPower => "sweep-power",
            ExperimentKind::SweepAggregate => "sweep-aggregate",
            ExperimentKind::SweepOrder => "sweep-order",
            ExperimentKind::DegradationStudy => "degradation-study",
            ExperimentKind::Schedule => "schedule",
        }
    }
}

/// Where the channel matrix comes from: synthesized from a named preset or
/// loaded from a previously saved manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSource {
    Generate {
        /// Preset name: `inter-chip` or `intra-chip`.
        preset: String,
        /// Number of nodes in the package.
        nodes: usize,
        /// Channel-draw seed; defaults to the master seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        /// Model A→B and B→A as the same medium (h(A→B) = h(B→A)).
        #[serde(default = "default_true")]
        reciprocal: bool,
    },
    Manifest {
        /// Path to a `channels.json` manifest, relative to the config file.
        path: PathBuf,
    },
}

fn default_true() -> bool {
    true
}

/// Scheduling problem statement for the `schedule` experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerSpec {
    /// Links competing for air time.
    pub candidates: Vec<CandidateLink>,
    /// Optional pre-computed correlation LUT (CSV matrix, candidates ×
    /// candidates). When absent the LUT is built from the channel matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lut_csv: Option<PathBuf>,
    /// Per-node transmit power bounds, dBm.
    pub p_min_dbm: f64,
    pub p_max_dbm: f64,
    /// Required per-link SINR, dB. No default: it is a policy choice.
    pub sinr_target_db: f64,
}

/// A complete experiment description. Unknown keys are rejected; optional
/// blocks are only legal for the experiment kinds that consume them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must equal [`SCHEMA_VERSION`].
    pub schema: u32,
    pub experiment: ExperimentKind,
    pub channel: ChannelSource,
    /// Master seed. Channel generation (unless overridden) and every Monte
    /// Carlo stream derive from it; same config + same seed ⇒ identical output.
    pub seed: u64,
    #[serde(default)]
    pub noise: NoiseModel,
    /// Single-link experiments (`sim-link`, `sweep-rate`, `degradation-study`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkConfig>,
    /// Multi-link experiments (`sim-multi`, `sweep-power`, `sweep-aggregate`,
    /// `sweep-order`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub links: Option<Vec<LinkConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ConcurrencyMode>,
    /// Symbol-rate grid (symbols/s), strictly increasing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<f64>>,
    /// Transmit-power grid (dBm), strictly increasing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub powers_dbm: Option<Vec<f64>>,
    /// PSK orders for `sweep-order`, strictly increasing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orders: Option<Vec<usize>>,
    /// BER threshold used by `sweep-aggregate` headroom and `sweep-order`.
    #[serde(default = "default_ber_target")]
    pub ber_target: f64,
    /// Minimum Monte Carlo bits per measurement.
    #[serde(default = "default_min_bits")]
    pub min_bits: u64,
    /// Early-stop error count (0 = always run exactly `min_bits`).
    #[serde(default = "default_max_errors")]
    pub max_errors: u64,
    /// Precoder-degradation grid for `degradation-study`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degradation_variants: Option<Vec<crate::tr::FilterDegradation>>,
    /// Problem statement for `schedule`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheduler: Option<SchedulerSpec>,
    /// Output directory; the CLI `--output` flag overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_ber_target() -> f64 {
    1e-3
}
fn default_min_bits() -> u64 {
    100_000
}
fn default_max_errors() -> u64 {
    100
}

/// Everything `prepare` builds that the runner reuses: the channel matrix
/// and, for `schedule`, the fully assembled scheduler input.
#[derive(Debug)]
pub struct Prepared {
    pub channels: ChannelMatrix,
    pub scheduler: Option<SchedulerInput>,
}

impl ExperimentConfig {
    /// Read + parse a config file. Parse failures name the offending field
    /// by JSON path. `base_dir` for relative paths is the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_str(&text)
    }

    /// Parse a config from a JSON string.
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|err| ConfigError::Parse {
            pointer: err.path().to_string(),
            message: err.inner().to_string(),
        })
    }

    /// Serialize with defaults materialized (what the run manifest embeds).
    pub fn to_resolved_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serialization is infallible")
    }

    /// Full semantic validation without executing. Returns every violation
    /// found; an empty list means the runner will accept the config.
    pub fn validate(&self, base_dir: &Path) -> Vec<Violation> {
        match self.prepare(base_dir) {
            Ok(_) => Vec::new(),
            Err(violations) => violations,
        }
    }

    /// Shared front half of validation and execution: check everything,
    /// build the channel matrix (and scheduler input where relevant).
    ///
    /// Collects as many violations as it can rather than stopping at the
    /// first, but checks that depend on a valid channel are skipped when the
    /// channel itself is bad.
    pub fn prepare(&self, base_dir: &Path) -> Result<Prepared, Vec<Violation>> {
        let mut v: Vec<Violation> = Vec::new();

        if self.schema != SCHEMA_VERSION {
            v.push(Violation::new(
                "schema",
                format!("unsupported schema version {}; this build reads {}", self.schema, SCHEMA_VERSION),
            ));
        }
        if let Err(e) = self.noise.validate() {
            v.push(Violation::new("noise", e.to_string()));
        }
        if !(self.ber_target.is_finite() && self.ber_target > 0.0 && self.ber_target <= 0.5) {
            v.push(Violation::new(
                "ber_target",
                format!("must be in (0, 0.5], got {}", self.ber_target),
            ));
        }
        if self.min_bits < netsim::MIN_BITS_FLOOR {
            v.push(Violation::new(
                "min_bits",
                format!("must be at least {}, got {}", netsim::MIN_BITS_FLOOR, self.min_bits),
            ));
        }

        self.check_block_usage(&mut v);

        let channels = match self.build_channels(base_dir) {
            Ok(m) => Some(m),
            Err(violation) => {
                v.push(violation);
                None
            }
        };

        if let Some(channels) = &channels {
            self.check_experiment(channels, base_dir, &mut v);
        }

        if !v.is_empty() {
            return Err(v);
        }
        let channels = channels.expect("no violations implies the channel built");
        let scheduler = match self.experiment {
            ExperimentKind::Schedule => Some(
                self.build_scheduler_input(&channels, base_dir)
                    .expect("no violations implies the scheduler input builds"),
            ),
            _ => None,
        };
        Ok(Prepared { channels, scheduler })
    }

    /// Reject optional blocks the named experiment does not consume, and
    /// require the ones it does.
    fn check_block_usage(&self, v: &mut Vec<Violation>) {
        use ExperimentKind::*;
        let kind = self.experiment;
        let need = |used: bool, present: bool, path: &str, v: &mut Vec<Violation>| {
            if used && !present {
                v.push(Violation::new(
                    path,
                    format!("required by experiment `{}` but missing", kind.name()),
                ));
            } else if !used && present {
                v.push(Violation::new(
                    path,
                    format!("not used by experiment `{}`; remove it", kind.name()),
                ));
            }
        };
        let uses_link = matches!(kind, SimLink | SweepRate | DegradationStudy);
        let uses_links = matches!(kind, SimMulti | SweepPower | SweepAggregate | SweepOrder);
        let uses_rates = matches!(kind, SweepRate | SweepAggregate | SweepOrder);
        let uses_powers = matches!(kind, SweepPower);
        let uses_orders = matches!(kind, SweepOrder);
        let uses_degr = matches!(kind, DegradationStudy);
        let uses_sched = matches!(kind, Schedule);
        need(uses_link, self.link.is_some(), "link", v);
        need(uses_links, self.links.is_some(), "links", v);
        need(uses_links, self.mode.is_some(), "mode", v);
        need(uses_rates, self.rates.is_some(), "rates", v);
        need(uses_powers, self.powers_dbm.is_some(), "powers_dbm", v);
        need(uses_orders, self.orders.is_some(), "orders", v);
        need(uses_degr, self.degradation_variants.is_some(), "degradation_variants", v);
        need(uses_sched, self.scheduler.is_some(), "scheduler", v);
    }

    /// Build (or load) the channel matrix named by the `channel` block.
    fn build_channels(&self, base_dir: &Path) -> Result<ChannelMatrix, Violation> {
        match &self.channel {
            ChannelSource::Generate {
                preset,
                nodes,
                seed,
                reciprocal,
            } => {
                let params = ReverbChannelParams::preset(preset).ok_or_else(|| {
                    Violation::new(
                        "channel.generate.preset",
                        format!("unknown preset `{preset}`; valid: inter-chip, intra-chip"),
                    )
                })?;
                if *nodes < 2 {
                    return Err(Violation::new(
                        "channel.generate.nodes",
                        format!("a package needs at least 2 nodes, got {nodes}"),
                    ));
                }
                let seed = seed.unwrap_or(self.seed);
                ChannelMatrix::generate(*nodes, &params, seed, *reciprocal)
                    .map_err(|e| Violation::new("channel.generate", e.to_string()))
            }
            ChannelSource::Manifest { path } => {
                let full = resolve_path(base_dir, path);
                ChannelMatrix::load_manifest(&full).map_err(|e| {
                    Violation::new(
                        "channel.manifest.path",
                        format!("{}: {e}", full.display()),
                    )
                })
            }
        }
    }

    /// Per-experiment cross-field checks (requires a valid channel matrix).
    fn check_experiment(&self, channels: &ChannelMatrix, base_dir: &Path, v: &mut Vec<Violation>) {
        use ExperimentKind::*;
        match self.experiment {
            Characterize => {}
            SimLink => {
                if let Some(link) = &self.link {
                    check_link(link, channels, "link", v);
                }
            }
            SweepRate => {
                if let Some(link) = &self.link {
                    check_link(link, channels, "link", v);
                }
                self.check_rate_grid(channels, v);
            }
            DegradationStudy => {
                if let Some(link) = &self.link {
                    check_link(link, channels, "link", v);
                }
                if let Some(variants) = &self.degradation_variants {
                    if variants.is_empty() {
                        v.push(Violation::new("degradation_variants", "must not be empty"));
                    }
                    for (i, d) in variants.iter().enumerate() {
                        if let Err(e) = d.validate() {
                            v.push(Violation::new(format!("degradation_variants[{i}]"), e.to_string()));
                        }
                    }
                }
            }
            SimMulti => self.check_link_set(channels, v),
            SweepPower => {
                self.check_link_set(channels, v);
                if let Some(powers) = &self.powers_dbm {
                    check_grid(powers, "powers_dbm", v);
                }
            }
            SweepAggregate => {
                self.check_link_set(channels, v);
                self.check_rate_grid(channels, v);
            }
            SweepOrder => {
                self.check_link_set(channels, v);
                self.check_rate_grid(channels, v);
                if let Some(orders) = &self.orders {
                    if orders.is_empty() {
                        v.push(Violation::new("orders", "must not be empty"));
                    }
                    for (i, &order) in orders.iter().enumerate() {
                        let probe = crate::modem::ModulationScheme::psk(order, 2);
                        if let Err(e) = probe.validate() {
                            v.push(Violation::new(format!("orders[{i}]"), e.to_string()));
                        }
                    }
                    if orders.windows(2).any(|w| w[0] >= w[1]) {
                        v.push(Violation::new("orders", "must be strictly increasing"));
                    }
                }
            }
            Schedule => {
                if let Some(_spec) = &self.scheduler {
                    if let Err(mut errs) = self.build_scheduler_input(channels, base_dir) {
                        v.append(&mut errs);
                    }
                }
            }
        }
    }

    /// Validate `links` + `mode` as a LinkSet: each link individually (for
    /// per-index violation paths), then the joint invariants.
    fn check_link_set(&self, channels: &ChannelMatrix, v: &mut Vec<Violation>) {
        let (Some(links), Some(mode)) = (&self.links, &self.mode) else {
            return; // missing blocks already reported by check_block_usage
        };
        if links.is_empty() {
            v.push(Violation::new("links", "must contain at least one link"));
            return;
        }
        let before = v.len();
        for (i, link) in links.iter().enumerate() {
            check_link(link, channels, &format!("links[{i}]"), v);
        }
        if v.len() == before {
            let set = LinkSet {
                links: links.clone(),
                mode: *mode,
            };
            if let Err(e) = set.validate(channels) {
                v.push(Violation::new("links", e.to_string()));
            }
        }
    }

    /// Rate grids must be clean axes and every rate must sit on the channel
    /// sample grid (the violation names the nearest valid rate).
    fn check_rate_grid(&self, channels: &ChannelMatrix, v: &mut Vec<Violation>) {
        let Some(rates) = &self.rates else { return };
        check_grid(rates, "rates", v);
        let Some(dt) = channels.sample_interval() else {
            return;
        };
        for (i, &rate) in rates.iter().enumerate() {
            if !(rate.is_finite() && rate > 0.0) {
                continue; // already reported by check_grid
            }
            if let Err(e) = netsim::sps_for_rate(rate, dt) {
                v.push(Violation::new(format!("rates[{i}]"), e.to_string()));
            }
        }
    }

    /// Assemble the `schedule` experiment's [`SchedulerInput`]: gains from
    /// the channel matrix, LUT from CSV or from channel cross-correlations,
    /// noise power from the noise model at the channel bandwidth.
    fn build_scheduler_input(
        &self,
        channels: &ChannelMatrix,
        base_dir: &Path,
    ) -> Result<SchedulerInput, Vec<Violation>> {
        let spec = self
            .scheduler
            .as_ref()
            .expect("caller checks the scheduler block exists");
        let mut v: Vec<Violation> = Vec::new();

        if spec.candidates.is_empty() {
            v.push(Violation::new("scheduler.candidates", "must not be empty"));
            return Err(v);
        }
        let nodes = channels.node_count();
        for (i, c) in spec.candidates.iter().enumerate() {
            let path = format!("scheduler.candidates[{i}]");
            if c.tx == c.rx {
                v.push(Violation::new(&path, format!("tx and rx must differ, both are {}", c.tx)));
            }
            if c.tx >= nodes || c.rx >= nodes {
                v.push(Violation::new(
                    &path,
                    format!("endpoints ({}, {}) outside the {nodes}-node package", c.tx, c.rx),
                ));
            }
            if let Err(e) = c.scheme.validate() {
                v.push(Violation::new(format!("{path}.scheme"), e.to_string()));
            }
            if !(c.symbol_rate.is_finite() && c.symbol_rate > 0.0) {
                v.push(Violation::new(
                    format!("{path}.symbol_rate"),
                    format!("must be > 0, got {}", c.symbol_rate),
                ));
            }
        }
        if !v.is_empty() {
            return Err(v);
        }

        let mut gains = Vec::with_capacity(spec.candidates.len());
        for (i, c) in spec.candidates.iter().enumerate() {
            match channels.require(c.tx, c.rx) {
                Ok(cir) => gains.push(cir.energy()),
                Err(e) => {
                    v.push(Violation::new(
                        format!("scheduler.candidates[{i}]"),
                        e.to_string(),
                    ));
                }
            }
        }
        if !v.is_empty() {
            return Err(v);
        }

        let lut = match &spec.lut_csv {
            Some(path) => {
                let full = resolve_path(base_dir, path);
                match crate::sched::load_lut(&full) {
                    Ok(lut) => {
                        if lut.len() != spec.candidates.len() {
                            v.push(Violation::new(
                                "scheduler.lut_csv",
                                format!(
                                    "LUT is {}×{} but there are {} candidates",
                                    lut.len(),
                                    lut.len(),
                                    spec.candidates.len()
                                ),
                            ));
                            return Err(v);
                        }
                        lut
                    }
                    Err(e) => {
                        v.push(Violation::new(
                            "scheduler.lut_csv",
                            format!("{}: {e}", full.display()),
                        ));
                        return Err(v);
                    }
                }
            }
            None => {
                let pairs: Vec<(usize, usize)> =
                    spec.candidates.iter().map(|c| (c.tx, c.rx)).collect();
                match chan::correlation_matrix(channels, &pairs) {
                    Ok(lut) => lut,
                    Err(e) => {
                        v.push(Violation::new(
                            "scheduler.candidates",
                            format!(
                                "cannot build the correlation LUT from the channel matrix \
                                 ({e}); supply scheduler.lut_csv instead"
                            ),
                        ));
                        return Err(v);
                    }
                }
            }
        };

        let dt = channels
            .sample_interval()
            .expect("a validated channel matrix has entries");
        let input = SchedulerInput {
            candidates: spec.candidates.clone(),
            lut,
            gains,
            noise_mw: self.noise.power_mw(dt),
            p_min_dbm: spec.p_min_dbm,
            p_max_dbm: spec.p_max_dbm,
            sinr_target_db: spec.sinr_target_db,
        };
        if let Err(e) = input.validate() {
            v.push(Violation::new("scheduler", e.to_string()));
            return Err(v);
        }
        Ok(input)
    }
}

/// Resolve a possibly relative config path against the config's directory.
pub fn resolve_path(base_dir: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base_dir.join(path)
    }
}

/// Validate one link against the channel matrix, attributing violations to
/// `path`. Reuses the engine's own `LinkSet` validation so a config the
/// validator accepts is exactly a config the engine accepts.
fn check_link(link: &LinkConfig, channels: &ChannelMatrix, path: &str, v: &mut Vec<Violation>) {
    let set = LinkSet::single(link.clone());
    if let Err(e) = set.validate(channels) {
        v.push(Violation::new(path, e.to_string()));
    }
}

/// Common sweep-axis sanity: non-empty, finite, strictly increasing.
fn check_grid(grid: &[f64], path: &str, v: &mut Vec<Violation>) {
    if grid.is_empty() {
        v.push(Violation::new(path, "must not be empty"));
        return;
    }
    for (i, &x) in grid.iter().enumerate() {
        if !x.is_finite() {
            v.push(Violation::new(format!("{path}[{i}]"), format!("must be finite, got {x}")));
        }
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        v.push(Violation::new(path, "must be strictly increasing"));
    }
}
