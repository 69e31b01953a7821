//! Reverberant in-package channel model.
//!
//! A channel is a sampled complex-baseband impulse response (CIR). Synthetic
//! CIRs are drawn from a Poisson-tap model: a deterministic first arrival at
//! the propagation delay `t0` carrying the Rician fraction `K/(K+1)` of the
//! nominal energy, followed by Poisson-timed diffuse taps with
//! circularly-symmetric complex Gaussian amplitudes whose expected power
//! decays as `exp(−(t−t0)/τ)`. Expected total energy equals
//! `10^(path_gain_db/10)`; the diffuse part is scaled in expectation, so the
//! realised energy fluctuates slightly around the nominal value (and is exact
//! in the LOS-only limit).
//!
//! The module also provides the channel metrics used upstream — RMS delay
//! spread and peak cross-correlation — plus CSV persistence for single CIRs
//! and JSON-manifest persistence for whole channel matrices.

use crate::dsp;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Errors from channel construction, generation, metrics and persistence.
#[derive(Debug, Error)]
pub enum ChanError {
    #[error("invalid channel parameters: {0}")]
    InvalidParams(String),
    #[error("invalid impulse response: {0}")]
    InvalidCir(String),
    #[error("generated channel is identically zero for these parameters and seed")]
    DegenerateChannel,
    #[error("{path}: expected header `time_s,real,imag`")]
    BadHeader { path: String },
    #[error("{path}:{line}: malformed row: {detail}")]
    MalformedRow {
        path: String,
        line: usize,
        detail: String,
    },
    #[error("{path}:{line}: non-uniform sample spacing (expected {expected:e} s, got {got:e} s)")]
    NonUniformSpacing {
        path: String,
        line: usize,
        expected: f64,
        got: f64,
    },
    #[error("{path}:{line}: impulse response has zero energy")]
    ZeroEnergy { path: String, line: usize },
    #[error("{path}:{line}: at least two data rows are required to infer the sample interval")]
    TooFewRows { path: String, line: usize },
    #[error("sample intervals differ: {a:e} s vs {b:e} s")]
    SampleIntervalMismatch { a: f64, b: f64 },
    #[error("channel matrix has no entry for link {tx}->{rx}")]
    MissingEntry { tx: usize, rx: usize },
    #[error("node id {id} out of range for a {count}-node matrix")]
    NodeOutOfRange { id: usize, count: usize },
    #[error("link transmitter and receiver must differ (got node {0} for both)")]
    SelfLink(usize),
    #[error("reciprocal matrix entries {a}->{b} and {b}->{a} differ")]
    ReciprocalMismatch { a: usize, b: usize },
    #[error("invalid channel manifest {path}: {detail}")]
    BadManifest { path: String, detail: String },
    #[error("invalid link list: {0}")]
    InvalidLinkList(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> ChanError {
    ChanError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Sampled complex-baseband channel impulse response.
///
/// `samples[n]` is the voltage gain at time `start_delay + n·sample_interval`
/// (seconds, relative to transmission). Immutable after construction; all
/// invariants (uniform positive spacing, finite samples, positive energy) are
/// enforced by [`ChannelImpulseResponse::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelImpulseResponse {
    samples: Vec<Complex64>,
    sample_interval: f64,
    start_delay: f64,
}

impl ChannelImpulseResponse {
    pub fn new(
        samples: Vec<Complex64>,
        sample_interval: f64,
        start_delay: f64,
    ) -> Result<Self, ChanError> {
        if samples.is_empty() {
            return Err(ChanError::InvalidCir("no samples".into()));
        }
        if !(sample_interval.is_finite() && sample_interval > 0.0) {
            return Err(ChanError::InvalidCir(format!(
                "sample_interval must be finite and > 0, got {sample_interval}"
            )));
        }
        if !(start_delay.is_finite() && start_delay >= 0.0) {
            return Err(ChanError::InvalidCir(format!(
                "start_delay must be finite and >= 0, got {start_delay}"
            )));
        }
        if let Some(idx) = samples.iter().position(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(ChanError::InvalidCir(format!(
                "non-finite sample at index {idx}"
            )));
        }
        let energy = dsp::energy(&samples);
        if !(energy.is_finite() && energy > 0.0) {
            return Err(ChanError::InvalidCir(format!(
                "energy must be finite and > 0, got {energy}"
            )));
        }
        Ok(Self {
            samples,
            sample_interval,
            start_delay,
        })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn sample_interval(&self) -> f64 {
        self.sample_interval
    }

    pub fn start_delay(&self) -> f64 {
        self.start_delay
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false: construction requires at least one sample.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Σ|h[n]|², the total power gain of the response.
    pub fn energy(&self) -> f64 {
        dsp::energy(&self.samples)
    }

    /// Absolute time of sample `n` in seconds.
    pub fn time_at(&self, n: usize) -> f64 {
        self.start_delay + n as f64 * self.sample_interval
    }
}

/// Parameters of the synthetic reverberant channel family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReverbChannelParams {
    /// First-arrival time t0, seconds.
    pub propagation_delay: f64,
    /// τ of the exponential power-decay envelope, seconds.
    pub decay_constant: f64,
    /// Poisson multipath arrival density, arrivals/second.
    pub tap_rate: f64,
    /// Power ratio K of the deterministic first tap to the diffuse sum
    /// (K = 0: fully diffuse; K → ∞: LOS only).
    pub rician_k: f64,
    /// Total CIR truncation length measured from transmission, seconds.
    pub duration: f64,
    /// Overall energy scaling: nominal energy is 10^(path_gain_db/10).
    pub path_gain_db: f64,
    /// Output sampling interval, seconds.
    pub sample_interval: f64,
}

impl ReverbChannelParams {
    /// Chip-to-chip paths across the package: long reverberation tail.
    /// Calibration values, not measured ground truth.
    pub fn inter_chip() -> Self {
        Self {
            propagation_delay: 5e-11,
            decay_constant: 5e-10,
            tap_rate: 2e12,
            rician_k: 1.0,
            duration: 5e-11 + 6.0 * 5e-10,
            path_gain_db: -40.0,
            sample_interval: 5e-12,
        }
    }

    /// Paths within one chip: lossy silicon shortens the reverberation and
    /// strengthens the direct ray. Calibration values, not ground truth.
    pub fn intra_chip() -> Self {
        Self {
            propagation_delay: 2e-11,
            decay_constant: 1.5e-10,
            tap_rate: 2e12,
            rician_k: 3.0,
            duration: 2e-11 + 6.0 * 1.5e-10,
            path_gain_db: -35.0,
            sample_interval: 5e-12,
        }
    }

    /// Preset lookup by name (`inter-chip` / `intra-chip`).
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "inter-chip" => Some(Self::inter_chip()),
            "intra-chip" => Some(Self::intra_chip()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), ChanError> {
        let bad = |msg: String| Err(ChanError::InvalidParams(msg));
        if !(self.decay_constant.is_finite() && self.decay_constant > 0.0) {
            return bad(format!("decay_constant must be > 0, got {}", self.decay_constant));
        }
        if !(self.tap_rate.is_finite() && self.tap_rate > 0.0) {
            return bad(format!("tap_rate must be > 0, got {}", self.tap_rate));
        }
        if !(self.propagation_delay.is_finite() && self.propagation_delay >= 0.0) {
            return bad(format!(
                "propagation_delay must be >= 0, got {}",
                self.propagation_delay
            ));
        }
        if !(self.duration.is_finite() && self.duration >= self.propagation_delay) {
            return bad(format!(
                "duration ({}) must be >= propagation_delay ({})",
                self.duration, self.propagation_delay
            ));
        }
        if self.rician_k.is_nan() || self.rician_k < 0.0 {
            return bad(format!("rician_k must be >= 0, got {}", self.rician_k));
        }
        if !self.path_gain_db.is_finite() {
            return bad(format!("path_gain_db must be finite, got {}", self.path_gain_db));
        }
        if !(self.sample_interval.is_finite() && self.sample_interval > 0.0) {
            return bad(format!(
                "sample_interval must be > 0, got {}",
                self.sample_interval
            ));
        }
        Ok(())
    }
}

/// Draw one synthetic reverberant CIR. Pure function of `(params, seed)`.
///
/// The deterministic first tap lands in the sample bin containing `t0` with
/// amplitude `sqrt(E·K/(K+1))` (real, zero phase — absolute carrier phase is
/// immaterial at complex baseband). Diffuse arrivals are Poisson with rate
/// `tap_rate` on `(t0, duration)`; each contributes a complex Gaussian
/// amplitude with variance `σ0²·exp(−(t−t0)/τ)` where `σ0²` is chosen so the
/// *expected* diffuse energy inside the truncation window is `E/(K+1)`.
pub fn generate_reverberant_cir(
    params: &ReverbChannelParams,
    seed: u64,
) -> Result<ChannelImpulseResponse, ChanError> {
    params.validate()?;
    let dt = params.sample_interval;
    let n = ((params.duration / dt).round() as usize).max(1);
    let mut samples = vec![Complex64::new(0.0, 0.0); n];

    let nominal_energy = dsp::db_to_linear(params.path_gain_db);
    let k = params.rician_k;
    let los_fraction = if k.is_infinite() { 1.0 } else { k / (k + 1.0) };
    let t0 = params.propagation_delay;
    let los_bin = (((t0 / dt).round() as usize).max(0)).min(n - 1);
    samples[los_bin] += Complex64::new((nominal_energy * los_fraction).sqrt(), 0.0);

    let diffuse_energy = nominal_energy * (1.0 - los_fraction);
    let span = params.duration - t0;
    if diffuse_energy > 0.0 && span > 0.0 {
        let tau = params.decay_constant;
        // E[Σ σ²(t_i)] over Poisson arrivals = rate·σ0²·τ·(1 − e^(−span/τ)).
        let sigma0_sq =
            diffuse_energy / (params.tap_rate * tau * (1.0 - (-span / tau).exp()));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inter_arrival = Exp::new(params.tap_rate)
            .map_err(|e| ChanError::InvalidParams(format!("tap_rate: {e}")))?;
        let mut t = t0;
        loop {
            t += inter_arrival.sample(&mut rng);
            if t >= params.duration {
                break;
            }
            let var = sigma0_sq * (-(t - t0) / tau).exp();
            let scale = (var / 2.0).sqrt();
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            let bin = ((t / dt).floor() as usize).min(n - 1);
            samples[bin] += Complex64::new(scale * re, scale * im);
        }
    }

    if dsp::energy(&samples) <= 0.0 {
        return Err(ChanError::DegenerateChannel);
    }
    ChannelImpulseResponse::new(samples, dt, 0.0)
}

/// Power-weighted RMS spread of arrival times:
/// `sqrt(Σ|h[n]|²·(t_n − t̄)² / Σ|h[n]|²)` with `t̄` the power-weighted mean.
pub fn rms_delay_spread(cir: &ChannelImpulseResponse) -> f64 {
    let total: f64 = cir.energy();
    let mean: f64 = cir
        .samples()
        .iter()
        .enumerate()
        .map(|(n, s)| s.norm_sqr() * cir.time_at(n))
        .sum::<f64>()
        / total;
    let var: f64 = cir
        .samples()
        .iter()
        .enumerate()
        .map(|(n, s)| {
            let d = cir.time_at(n) - mean;
            s.norm_sqr() * d * d
        })
        .sum::<f64>()
        / total;
    var.max(0.0).sqrt()
}

/// Peak normalised cross-correlation magnitude between two CIRs:
/// `max_k |Σ_n a[n]·conj(b[n+k])| / (‖a‖₂·‖b‖₂)`, in `[0, 1]`.
///
/// This equals the peak magnitude of the cross-equivalent channel obtained by
/// sending through `b` a stream precoded with the unit-energy time-reversal
/// filter built from `a` (with `b` normalised to unit energy too). Start
/// delays are ignored — the maximum runs over all integer lags.
pub fn channel_correlation(
    a: &ChannelImpulseResponse,
    b: &ChannelImpulseResponse,
) -> Result<f64, ChanError> {
    let (da, db) = (a.sample_interval(), b.sample_interval());
    if (da - db).abs() > 1e-9 * da.max(db) {
        return Err(ChanError::SampleIntervalMismatch { a: da, b: db });
    }
    // conj-reverse a, then linear convolution with b spans every lag of
    // Σ_n a[n]·conj(b[n+k]) (up to an overall conjugate, which |·| ignores).
    let rev: Vec<Complex64> = a.samples().iter().rev().map(|s| s.conj()).collect();
    let cross = dsp::convolve(&rev, b.samples());
    let peak = cross.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    let denom = (a.energy() * b.energy()).sqrt();
    Ok((peak / denom).min(1.0))
}

/// Set of CIRs between the nodes of one package.
///
/// Entries are keyed `(tx, rx)` with `tx ≠ rx`. When `reciprocal` is set, a
/// missing direction is served from its mirror entry, and inserting both
/// directions with different samples is rejected.
#[derive(Debug, Clone)]
pub struct ChannelMatrix {
    node_count: usize,
    reciprocal: bool,
    entries: BTreeMap<(usize, usize), ChannelImpulseResponse>,
}

impl ChannelMatrix {
    pub fn new(node_count: usize, reciprocal: bool) -> Result<Self, ChanError> {
        if node_count < 2 {
            return Err(ChanError::InvalidParams(format!(
                "a channel matrix needs at least 2 nodes, got {node_count}"
            )));
        }
        Ok(Self {
            node_count,
            reciprocal,
            entries: BTreeMap::new(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn reciprocal(&self) -> bool {
        self.reciprocal
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    /// Sample interval shared by every stored entry (`None` while empty).
    pub fn sample_interval(&self) -> Option<f64> {
        self.entries.values().next().map(|c| c.sample_interval())
    }

    /// Stored keys in deterministic (sorted) order.
    pub fn keys(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries.keys().copied()
    }

    pub fn insert(
        &mut self,
        tx: usize,
        rx: usize,
        cir: ChannelImpulseResponse,
    ) -> Result<(), ChanError> {
        if tx == rx {
            return Err(ChanError::SelfLink(tx));
        }
        for id in [tx, rx] {
            if id >= self.node_count {
                return Err(ChanError::NodeOutOfRange {
                    id,
                    count: self.node_count,
                });
            }
        }
        if let Some(dt) = self.sample_interval() {
            let d = cir.sample_interval();
            if (d - dt).abs() > 1e-9 * dt.max(d) {
                return Err(ChanError::SampleIntervalMismatch { a: dt, b: d });
            }
        }
        if self.reciprocal {
            if let Some(mirror) = self.entries.get(&(rx, tx)) {
                if *mirror != cir {
                    return Err(ChanError::ReciprocalMismatch { a: tx, b: rx });
                }
            }
        }
        self.entries.insert((tx, rx), cir);
        Ok(())
    }

    /// Stored entry, falling back to the mirror direction when reciprocal.
    pub fn get(&self, tx: usize, rx: usize) -> Option<&ChannelImpulseResponse> {
        self.entries.get(&(tx, rx)).or_else(|| {
            if self.reciprocal {
                self.entries.get(&(rx, tx))
            } else {
                None
            }
        })
    }

    /// Like [`ChannelMatrix::get`] but with a descriptive error.
    pub fn require(&self, tx: usize, rx: usize) -> Result<&ChannelImpulseResponse, ChanError> {
        self.get(tx, rx).ok_or(ChanError::MissingEntry { tx, rx })
    }

    /// Generate every pair's CIR from one master seed. With `reciprocal` only
    /// the `tx < rx` half is drawn (the mirror is implicit); otherwise both
    /// directions are drawn independently. Each pair uses a sub-seed derived
    /// from `(seed, tx, rx)`, so any one entry is reproducible in isolation.
    pub fn generate(
        node_count: usize,
        params: &ReverbChannelParams,
        seed: u64,
        reciprocal: bool,
    ) -> Result<Self, ChanError> {
        params.validate()?;
        let mut m = Self::new(node_count, reciprocal)?;
        for tx in 0..node_count {
            for rx in 0..node_count {
                if tx == rx || (reciprocal && tx > rx) {
                    continue;
                }
                let cir = generate_reverberant_cir(params, link_channel_seed(seed, tx, rx))?;
                m.insert(tx, rx, cir)?;
            }
        }
        Ok(m)
    }

    /// Write every stored CIR as `cir_<tx>_<rx>.csv` plus a `channels.json`
    /// manifest into `dir`; returns the manifest path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf, ChanError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut manifest = serde_json::Map::new();
        manifest.insert("reciprocal".into(), serde_json::Value::Bool(self.reciprocal));
        for ((tx, rx), cir) in &self.entries {
            let name = format!("cir_{tx}_{rx}.csv");
            save_cir(cir, &dir.join(&name))?;
            manifest.insert(format!("{tx}-{rx}"), serde_json::Value::String(name));
        }
        let path = dir.join("channels.json");
        let body = serde_json::to_string_pretty(&serde_json::Value::Object(manifest))
            .expect("manifest serialisation cannot fail");
        std::fs::write(&path, body + "\n").map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    /// Load a matrix from a `channels.json` manifest (CIR paths are resolved
    /// relative to the manifest's directory).
    pub fn load_manifest(path: &Path) -> Result<Self, ChanError> {
        let bad = |detail: String| ChanError::BadManifest {
            path: path.display().to_string(),
            detail,
        };
        let body = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&body).map_err(|e| bad(format!("invalid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| bad("top level must be a JSON object".into()))?;
        let reciprocal = obj
            .get("reciprocal")
            .ok_or_else(|| bad("missing required key \"reciprocal\"".into()))?
            .as_bool()
            .ok_or_else(|| bad("\"reciprocal\" must be a boolean".into()))?;

        let mut links: Vec<(usize, usize, PathBuf)> = Vec::new();
        let base = path.parent().unwrap_or(Path::new("."));
        for (key, val) in obj {
            if key == "reciprocal" {
                continue;
            }
            let (tx, rx) = key
                .split_once('-')
                .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
                .ok_or_else(|| bad(format!("key {key:?} is not of the form \"tx-rx\"")))?;
            let rel = val
                .as_str()
                .ok_or_else(|| bad(format!("value for {key:?} must be a file path string")))?;
            links.push((tx, rx, base.join(rel)));
        }
        if links.is_empty() {
            return Err(bad("manifest lists no channel entries".into()));
        }
        let node_count = links
            .iter()
            .map(|l| l.0.max(l.1) + 1)
            .max()
            .unwrap()
            .max(2);
        let mut m = Self::new(node_count, reciprocal)?;
        for (tx, rx, file) in links {
            let cir = load_cir(&file)?;
            m.insert(tx, rx, cir)?;
        }
        Ok(m)
    }
}

/// Deterministic per-pair sub-seed for matrix generation.
fn link_channel_seed(master: u64, tx: usize, rx: usize) -> u64 {
    let pair = ((tx as u64) << 32) | rx as u64;
    splitmix64(master ^ splitmix64(pair.wrapping_add(1)))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Pairwise-correlation matrix over a list of `(tx, rx)` links.
///
/// Entry `(i, j)` for `i ≠ j` correlates link `i`'s own channel (its
/// precoding-filter source `h(tx_i → rx_i)`) with the channel its stream
/// takes toward link `j`'s receiver (`h(tx_i → rx_j)`). The two directed
/// values are folded into one symmetric entry by taking the larger
/// (conservative for interference prediction); the diagonal is 1.
pub fn correlation_matrix(
    channels: &ChannelMatrix,
    links: &[(usize, usize)],
) -> Result<Vec<Vec<f64>>, ChanError> {
    if links.is_empty() {
        return Err(ChanError::InvalidLinkList("empty link list".into()));
    }
    for &(tx, rx) in links {
        if tx == rx {
            return Err(ChanError::SelfLink(tx));
        }
    }
    let n = links.len();
    let mut raw = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        let (tx_i, rx_i) = links[i];
        let own = channels.require(tx_i, rx_i)?;
        for j in 0..n {
            if i == j {
                continue;
            }
            let (_, rx_j) = links[j];
            if tx_i == rx_j {
                return Err(ChanError::MissingEntry { tx: tx_i, rx: rx_j });
            }
            let victim = channels.require(tx_i, rx_j)?;
            raw[i][j] = channel_correlation(own, victim)?;
        }
    }
    let mut out = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        out[i][i] = 1.0;
        for j in (i + 1)..n {
            let v = raw[i][j].max(raw[j][i]);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    Ok(out)
}

/// Write one CIR in the CSV interchange format (`time_s,real,imag` header,
/// one row per sample). Values use shortest round-trip float formatting.
pub fn save_cir(cir: &ChannelImpulseResponse, path: &Path) -> Result<(), ChanError> {
    let mut out = String::from("time_s,real,imag\n");
    for (n, s) in cir.samples().iter().enumerate() {
        use std::fmt::Write as _;
        writeln!(out, "{:e},{:e},{:e}", cir.time_at(n), s.re, s.im).expect("string write");
    }
    let mut f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Read one CIR from the CSV interchange format, verifying uniform time
/// spacing (1e-6 relative) and the impulse-response invariants. Errors carry
/// the 1-based line number (the header is line 1).
pub fn load_cir(path: &Path) -> Result<ChannelImpulseResponse, ChanError> {
    let p = path.display().to_string();
    let body = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = body.lines();
    let header = lines
        .next()
        .map(|l| l.trim_start_matches('\u{feff}').trim())
        .unwrap_or("");
    if header != "time_s,real,imag" {
        return Err(ChanError::BadHeader { path: p });
    }

    let mut times: Vec<f64> = Vec::new();
    let mut samples: Vec<Complex64> = Vec::new();
    for (idx, raw) in lines.enumerate() {
        let line = idx + 2;
        let row = raw.trim();
        if row.is_empty() {
            continue;
        }
        let cols: Vec<&str> = row.split(',').collect();
        if cols.len() != 3 {
            return Err(ChanError::MalformedRow {
                path: p,
                line,
                detail: format!("expected 3 comma-separated values, found {}", cols.len()),
            });
        }
        let mut vals = [0.0f64; 3];
        for (k, c) in cols.iter().enumerate() {
            vals[k] = c.trim().parse::<f64>().map_err(|_| ChanError::MalformedRow {
                path: p.clone(),
                line,
                detail: format!("cannot parse {:?} as a number", c.trim()),
            })?;
            if !vals[k].is_finite() {
                return Err(ChanError::MalformedRow {
                    path: p,
                    line,
                    detail: format!("non-finite value {:?}", c.trim()),
                });
            }
        }
        if vals[0] < 0.0 {
            return Err(ChanError::MalformedRow {
                path: p,
                line,
                detail: format!("negative sample time {}", vals[0]),
            });
        }
        times.push(vals[0]);
        samples.push(Complex64::new(vals[1], vals[2]));
    }

    if samples.is_empty() {
        return Err(ChanError::TooFewRows { path: p, line: 2 });
    }
    if dsp::energy(&samples) <= 0.0 {
        return Err(ChanError::ZeroEnergy {
            path: p,
            line: samples.len() + 1,
        });
    }
    if samples.len() == 1 {
        return Err(ChanError::TooFewRows { path: p, line: 2 });
    }

    for w in times.windows(2).enumerate() {
        let (i, pair) = w;
        if pair[1] <= pair[0] {
            return Err(ChanError::MalformedRow {
                path: p,
                line: i + 3,
                detail: "sample times must be strictly increasing".into(),
            });
        }
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    for (i, pair) in times.windows(2).enumerate() {
        let got = pair[1] - pair[0];
        if (got - dt).abs() > 1e-6 * dt {
            return Err(ChanError::NonUniformSpacing {
                path: p,
                line: i + 3,
                expected: dt,
                got,
            });
        }
    }
    ChannelImpulseResponse::new(samples, dt, times[0])
}
