//! Parameter sweeps layered on the Monte Carlo engine.
//!
//! Four recurring experiment shapes: BER versus symbol rate for one link
//! ([`sweep_symbol_rate`]), measured and predicted SINR versus a uniform
//! transmit power ([`sweep_power`]), BER versus per-link rate as concurrent
//! links are added one at a time ([`sweep_aggregate`]), and the largest
//! aggregate bit rate that stays under a BER target per PSK order, with and
//! without precoding ([`sweep_modulation_order`]).
//!
//! Sweep axes must be strictly increasing and, for symbol rates, land on the
//! channel's sample grid (rates and `samples_per_symbol` are rewritten
//! together so `rate · sps · sample_interval = 1` keeps holding). Every grid
//! point runs the full engine with the same master seed, so any two points
//! differ only in the swept parameter — common random numbers, not fresh
//! draws per point.

use serde::{Deserialize, Serialize};

use crate::chan::ChannelMatrix;
use crate::modem::{ModKind, ModulationScheme};
use crate::netsim::{
    measure_sinr, simulate_concurrent, sps_for_rate, ConcurrencyMode, LinkConfig, LinkSet,
    NetsimError, NoiseModel, SimResult, SinrBreakdown,
};

/// One row of [`sweep_symbol_rate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub symbol_rate: f64,
    pub result: SimResult,
}

/// One row of [`sweep_power`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    /// Power applied uniformly to every link at this grid point.
    pub tx_power_dbm: f64,
    pub result: SimResult,
    /// Deterministic per-link decomposition from [`measure_sinr`]; `None`
    /// where the predictor declines the link (OFDM victims).
    pub predicted: Vec<Option<SinrBreakdown>>,
}

/// One row of [`sweep_aggregate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatePoint {
    /// How many links of the template were active (a prefix of the list).
    pub link_count: usize,
    /// Per-link symbol rate at this grid point.
    pub symbol_rate: f64,
    /// Sum of the active links' information rates.
    pub aggregate_rate_bps: f64,
    /// Largest per-link BER in the set — the binding link.
    pub worst_ber: f64,
    pub result: SimResult,
}

/// One row of [`sweep_modulation_order`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderPoint {
    /// PSK constellation size at this grid point.
    pub order: usize,
    /// Whether every link ran with time-reversal precoding.
    pub precoded: bool,
    pub symbol_rate: f64,
    pub aggregate_rate_bps: f64,
    pub worst_ber: f64,
    pub result: SimResult,
}

/// Per-order summary of [`sweep_modulation_order`]: the largest aggregate
/// bit rate whose worst-link BER stayed under the target, 0.0 when no grid
/// point qualified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderSummary {
    pub order: usize,
    pub plain_max_bps: f64,
    pub precoded_max_bps: f64,
}

fn validate_axis(axis: &[f64], name: &str) -> Result<(), NetsimError> {
    if axis.is_empty() {
        return Err(NetsimError::InvalidSweep(format!("{name} axis is empty")));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(NetsimError::InvalidSweep(format!(
            "{name} axis contains a non-finite value"
        )));
    }
    if axis.windows(2).any(|w| w[0] >= w[1]) {
        return Err(NetsimError::InvalidSweep(format!(
            "{name} axis must be strictly increasing"
        )));
    }
    Ok(())
}

fn sample_interval(channels: &ChannelMatrix) -> Result<f64, NetsimError> {
    channels
        .sample_interval()
        .ok_or_else(|| NetsimError::InvalidLinkSet("channel matrix has no entries".into()))
}

/// Re-target a link at a new symbol rate: `symbol_rate` and the scheme's
/// `samples_per_symbol` move together so the rate stays on the sample grid.
/// A configured pulse width survives, clamped to the new (possibly shorter)
/// symbol period.
fn link_at_rate(base: &LinkConfig, rate: f64, dt: f64) -> Result<LinkConfig, NetsimError> {
    let sps = sps_for_rate(rate, dt)?;
    let mut link = base.clone();
    link.symbol_rate = rate;
    link.scheme.samples_per_symbol = sps;
    link.scheme.pulse_width = base.scheme.pulse_width.map(|w| w.min(sps));
    Ok(link)
}

/// BER of one link across a swept symbol-rate axis. Each grid point is the
/// template link re-targeted at that rate and simulated in isolation.
pub fn sweep_symbol_rate(
    channels: &ChannelMatrix,
    base: &LinkConfig,
    noise: &NoiseModel,
    rates: &[f64],
    min_bits: u64,
    max_errors: u64,
    seed: u64,
) -> Result<Vec<RatePoint>, NetsimError> {
    validate_axis(rates, "symbol_rate")?;
    let dt = sample_interval(channels)?;
    rates
        .iter()
        .map(|&rate| {
            let link = link_at_rate(base, rate, dt)?;
            let result = simulate_concurrent(
                channels,
                &LinkSet::single(link),
                noise,
                min_bits,
                max_errors,
                seed,
            )?;
            Ok(RatePoint {
                symbol_rate: rate,
                result,
            })
        })
        .collect()
}

/// Measured and predicted SINR across a transmit-power axis applied
/// uniformly to every link of the set.
pub fn sweep_power(
    channels: &ChannelMatrix,
    set: &LinkSet,
    noise: &NoiseModel,
    powers_dbm: &[f64],
    min_bits: u64,
    max_errors: u64,
    seed: u64,
) -> Result<Vec<PowerPoint>, NetsimError> {
    validate_axis(powers_dbm, "tx_power_dbm")?;
    powers_dbm
        .iter()
        .map(|&p| {
            let mut at_power = set.clone();
            for link in &mut at_power.links {
                link.tx_power_dbm = p;
            }
            let result = simulate_concurrent(channels, &at_power, noise, min_bits, max_errors, seed)?;
            let powers = vec![p; at_power.links.len()];
            let predicted = (0..at_power.links.len())
                .map(|i| match measure_sinr(channels, &at_power, i, &powers, noise) {
                    Ok(b) => Ok(Some(b)),
                    Err(NetsimError::UnsupportedSinr(_)) => Ok(None),
                    Err(e) => Err(e),
                })
                .collect::<Result<Vec<_>, NetsimError>>()?;
            Ok(PowerPoint {
                tx_power_dbm: p,
                result,
                predicted,
            })
        })
        .collect()
}

/// BER versus per-link symbol rate as concurrent links are switched on one
/// at a time: link counts 1..=n over prefixes of `links`, each count swept
/// across the whole rate axis. Rows are ordered (link count, rate).
pub fn sweep_aggregate(
    channels: &ChannelMatrix,
    links: &[LinkConfig],
    mode: ConcurrencyMode,
    noise: &NoiseModel,
    rates: &[f64],
    min_bits: u64,
    max_errors: u64,
    seed: u64,
) -> Result<Vec<AggregatePoint>, NetsimError> {
    validate_axis(rates, "symbol_rate")?;
    if links.is_empty() {
        return Err(NetsimError::InvalidSweep("no template links".into()));
    }
    let dt = sample_interval(channels)?;
    let mut points = Vec::with_capacity(links.len() * rates.len());
    for count in 1..=links.len() {
        for &rate in rates {
            let active = links[..count]
                .iter()
                .map(|l| link_at_rate(l, rate, dt))
                .collect::<Result<Vec<_>, _>>()?;
            let set = LinkSet { links: active, mode };
            let result = simulate_concurrent(channels, &set, noise, min_bits, max_errors, seed)?;
            points.push(AggregatePoint {
                link_count: count,
                symbol_rate: rate,
                aggregate_rate_bps: result.aggregate_rate_bps,
                worst_ber: worst_ber(&result),
                result,
            });
        }
    }
    Ok(points)
}

/// Largest feasible aggregate rate per PSK order, plain versus precoded.
///
/// Every link of the template is re-mapped to PSK of the given order (pulse
/// width and pilot override survive; the detector returns to automatic
/// selection so each arm gets its natural receiver), swept across the rate
/// axis in both precoding arms. Feasibility at a grid point means every
/// link's BER stays strictly under `ber_target`.
pub fn sweep_modulation_order(
    channels: &ChannelMatrix,
    links: &[LinkConfig],
    mode: ConcurrencyMode,
    noise: &NoiseModel,
    orders: &[usize],
    rates: &[f64],
    ber_target: f64,
    min_bits: u64,
    max_errors: u64,
    seed: u64,
) -> Result<(Vec<OrderPoint>, Vec<OrderSummary>), NetsimError> {
    validate_axis(rates, "symbol_rate")?;
    if links.is_empty() {
        return Err(NetsimError::InvalidSweep("no template links".into()));
    }
    if orders.is_empty() {
        return Err(NetsimError::InvalidSweep("order axis is empty".into()));
    }
    if orders.windows(2).any(|w| w[0] >= w[1]) {
        return Err(NetsimError::InvalidSweep(
            "order axis must be strictly increasing".into(),
        ));
    }
    if !(ber_target > 0.0 && ber_target < 1.0) {
        return Err(NetsimError::InvalidSweep(format!(
            "ber_target must be in (0, 1), got {ber_target}"
        )));
    }
    let dt = sample_interval(channels)?;
    let mut points = Vec::new();
    let mut summaries = Vec::with_capacity(orders.len());
    for &order in orders {
        let mut max_bps = [0.0_f64; 2]; // [plain, precoded]
        for (arm, precoded) in [(0, false), (1, true)] {
            for &rate in rates {
                let active = links
                    .iter()
                    .map(|l| {
                        let mut link = link_at_rate(l, rate, dt)?;
                        link.scheme = as_psk(&link.scheme, order);
                        link.use_tr = precoded;
                        link.detector = crate::netsim::DetectorChoice::Auto;
                        Ok(link)
                    })
                    .collect::<Result<Vec<_>, NetsimError>>()?;
                let set = LinkSet { links: active, mode };
                let result =
                    simulate_concurrent(channels, &set, noise, min_bits, max_errors, seed)?;
                let worst = worst_ber(&result);
                if worst < ber_target {
                    max_bps[arm] = max_bps[arm].max(result.aggregate_rate_bps);
                }
                points.push(OrderPoint {
                    order,
                    precoded,
                    symbol_rate: rate,
                    aggregate_rate_bps: result.aggregate_rate_bps,
                    worst_ber: worst,
                    result,
                });
            }
        }
        summaries.push(OrderSummary {
            order,
            plain_max_bps: max_bps[0],
            precoded_max_bps: max_bps[1],
        });
    }
    Ok((points, summaries))
}

/// Smallest swept rate at which the worst link of an n-link set exceeded the
/// BER threshold; `None` when every grid point stayed at or under it.
pub fn first_rate_exceeding(
    points: &[AggregatePoint],
    link_count: usize,
    ber_threshold: f64,
) -> Option<f64> {
    points
        .iter()
        .filter(|p| p.link_count == link_count && p.worst_ber > ber_threshold)
        .map(|p| p.symbol_rate)
        .fold(None, |best, r| match best {
            Some(b) if b <= r => Some(b),
            _ => Some(r),
        })
}

fn worst_ber(result: &SimResult) -> f64 {
    result.links.iter().map(|l| l.ber).fold(0.0, f64::max)
}

/// PSK scheme of the given order inheriting the template's symbol period and
/// pulse width (constellation-specific fields are dropped).
fn as_psk(template: &ModulationScheme, order: usize) -> ModulationScheme {
    let mut scheme = ModulationScheme::psk(order, template.samples_per_symbol);
    if template.kind != ModKind::Ofdm {
        scheme.pulse_width = template.pulse_width;
    }
    scheme
}
