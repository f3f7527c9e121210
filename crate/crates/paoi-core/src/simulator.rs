//! Event-driven simulation of the periodic status-update system.
//!
//! All sources generate an update simultaneously every `b` time units. Each
//! source owns a one-slot queue: a fresh update replaces a waiting one but
//! never interrupts the update being transmitted. Whenever the transmitter
//! is free and at least one queue is occupied, it picks queue i with
//! probability proportional to the scheduling weight of i among the
//! occupied queues, and serves it for an independently drawn service time.
//!
//! Each departure yields a record decomposing the update's timeline
//! (generation S, waiting W, service V, departure D = S + W + V) plus the
//! transmitter's busy/idle split between this update's service start and
//! the previous one's, which feeds the waiting-time recursion
//!
//! ```text
//!   W(k) = W(k-1) + T(k-1) + N(k-1) - (I(k-1) + 1) b
//! ```
//!
//! checked by [`wait_recursion_residual`] and streamed during every run.
//! Peak age is measured per received update as A(k) = D(k) - S(k-1).

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::model::{SystemConfig, WeightVector};

/// One peak-age observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PAoISample {
    pub source: usize,
    /// A(k) = D(k) - S(k-1); always exceeds one generation period.
    pub value: f64,
}

/// Timeline decomposition of one received update, written at departure.
///
/// The interval fields `busy`, `idle` and `preempted` describe the window
/// from the service start of this source's previous received update to the
/// service start of this one; `busy_since_arrival` covers the shorter
/// window from this update's generation to its service start. All four are
/// zero on a source's first received update, which has no such window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketRecord {
    pub source: usize,
    /// 1-based index among this source's received updates.
    pub k: usize,
    /// Generation time S(k).
    pub gen_time: f64,
    /// Waiting time W(k) from generation to service start.
    pub wait: f64,
    /// Service duration V(k).
    pub service: f64,
    /// Departure time, exactly gen_time + wait + service.
    pub depart: f64,
    /// Preempted (replaced while waiting) packets of this source in the
    /// inter-start window, I(k-1).
    pub preempted: usize,
    /// Transmitter busy time in the inter-start window, T(k-1).
    pub busy: f64,
    /// Transmitter idle time in the inter-start window, N(k-1).
    pub idle: f64,
    /// Transmitter busy time between this update's arrival and its service
    /// start, T'(k-1).
    pub busy_since_arrival: f64,
    /// Peak age A(k) = depart - previous gen_time; absent on k = 1.
    pub paoi: Option<f64>,
}

/// Sampling-period regime a configuration is asserted to satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Every batch of n updates finishes before the next generation epoch;
    /// peak age obeys A(k) <= b + T'(k-1) + V(k).
    Long,
    /// The transmitter never idles once warmed up; peak age obeys
    /// A(k) <= b + T(k-1) + V(k).
    Short,
}

/// Run controls beyond the system description itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimOptions {
    /// Retained peak-age samples per source; the run ends when every source
    /// has this many.
    pub target_samples: usize,
    /// Received updates per source discarded before retention starts, so
    /// the empty-system start does not tint the statistics.
    pub warmup_updates: usize,
    /// Cap on retained records per source; `None` keeps them all. Only
    /// retention is affected, never the dynamics or the streamed checks.
    pub record_cap: Option<usize>,
}

impl SimOptions {
    pub fn new(target_samples: usize) -> Self {
        SimOptions {
            target_samples,
            warmup_updates: 10,
            record_cap: None,
        }
    }
}

/// Everything a finished run exposes.
#[derive(Debug, Clone)]
pub struct SimulationRun {
    /// Peak-age samples per source, exactly `target_samples` each.
    pub samples: Vec<Vec<PAoISample>>,
    /// Departure records per source (post-warmup, possibly capped).
    pub records: Vec<Vec<PacketRecord>>,
    /// Largest waiting-time recursion residual seen across every
    /// consecutive update pair of every source, capped records or not.
    pub max_wait_residual: f64,
    /// Generation epochs elapsed.
    pub epochs: usize,
    /// Updates enqueued per source.
    pub generated: Vec<usize>,
    /// Updates replaced while waiting, per source.
    pub preempted: Vec<usize>,
    /// Updates fully served per source.
    pub received: Vec<usize>,
    /// Services granted per source (equals received at the end of a run).
    pub grants: Vec<usize>,
    /// Total services started.
    pub services_started: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    /// The run request is structurally invalid.
    Config { detail: String },
    /// An estimator was handed no data.
    EmptyInput,
    /// A record-level check needs more consecutive records than given.
    InsufficientRecords { have: usize },
    /// The event log contradicts the asserted sampling-period regime.
    RegimeViolated {
        source: usize,
        k: usize,
        detail: String,
    },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Config { detail } => write!(f, "invalid simulation request: {detail}"),
            SimError::EmptyInput => write!(f, "no samples given"),
            SimError::InsufficientRecords { have } => {
                write!(f, "need at least 2 consecutive records, got {have}")
            }
            SimError::RegimeViolated { source, k, detail } => {
                write!(f, "regime assumption broken at source {source}, update {k}: {detail}")
            }
        }
    }
}

impl std::error::Error for SimError {}

#[derive(Debug, Clone, Copy)]
struct QueuedPacket {
    gen_time: f64,
    /// Transmitter busy-time total at the moment this packet arrived.
    busy_at_arrival: f64,
}

#[derive(Debug, Clone, Copy)]
struct InService {
    source: usize,
    gen_time: f64,
    wait: f64,
    service: f64,
    start: f64,
    depart: f64,
    preempted: usize,
    busy: f64,
    idle: f64,
    busy_since_arrival: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct SourceState {
    queued: Option<QueuedPacket>,
    /// Service-start time of the most recent received update.
    last_start: Option<f64>,
    /// Transmitter busy-time total at `last_start`.
    busy_at_last_start: f64,
    /// Replacements since `last_start`.
    preempts_since_start: usize,
    /// W(k-1), for the streamed recursion check.
    prev_wait: f64,
    /// S(k-1), for peak age.
    prev_gen: Option<f64>,
    received: usize,
    generated: usize,
    preempted: usize,
}

/// Simulates the system until every source holds `target_samples` peak-age
/// samples (after warmup). Deterministic given the config seed.
pub fn run_simulation(
    config: &SystemConfig,
    weights: &WeightVector,
    opts: &SimOptions,
) -> Result<SimulationRun, SimError> {
    config.validate().map_err(|e| SimError::Config {
        detail: e.to_string(),
    })?;
    if weights.len() != config.n {
        return Err(SimError::Config {
            detail: format!("{} weights for {} sources", weights.len(), config.n),
        });
    }
    if opts.target_samples == 0 {
        return Err(SimError::Config {
            detail: "target_samples must be positive".to_string(),
        });
    }

    let n = config.n;
    let b = config.b;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut sources: Vec<SourceState> = vec![SourceState::default(); n];
    let mut samples: Vec<Vec<PAoISample>> = vec![Vec::new(); n];
    let mut records: Vec<Vec<PacketRecord>> = vec![Vec::new(); n];
    let mut grants = vec![0usize; n];
    let mut services_started = 0usize;
    let mut max_wait_residual = 0.0f64;

    // Transmitter timeline: completed busy time, plus the open interval.
    let mut cum_busy = 0.0f64;
    let mut in_service: Option<InService> = None;
    let mut epoch = 0usize;
    let mut done_sources = 0usize;

    // Busy-time total B(t); only ever queried at t >= start of the open
    // service interval.
    let busy_at = |cum: f64, current: &Option<InService>, t: f64| -> f64 {
        match current {
            Some(s) => cum + (t - s.start),
            None => cum,
        }
    };

    while done_sources < n {
        let t_arrival = epoch as f64 * b;
        let depart_first = match &in_service {
            Some(s) => s.depart < t_arrival,
            None => false,
        };

        let now = if depart_first {
            // Departure: finalize the record for the served update.
            let s = in_service.take().unwrap();
            cum_busy += s.depart - s.start;
            finish_departure(
                &s,
                b,
                opts,
                &mut sources[s.source],
                &mut samples[s.source],
                &mut records[s.source],
                &mut max_wait_residual,
                &mut done_sources,
            );
            s.depart
        } else {
            // Generation epoch: all sources enqueue atomically, replacing
            // waiting packets, before any same-instant departure or
            // scheduling decision is looked at.
            let b_now = busy_at(cum_busy, &in_service, t_arrival);
            for state in sources.iter_mut() {
                state.generated += 1;
                if state.queued.is_some() {
                    state.preempted += 1;
                    state.preempts_since_start += 1;
                }
                state.queued = Some(QueuedPacket {
                    gen_time: t_arrival,
                    busy_at_arrival: b_now,
                });
            }
            epoch += 1;
            // A departure at exactly the epoch instant happens after the
            // arrivals, so the follow-up scheduling sees the fresh queues.
            if let Some(s) = &in_service {
                if s.depart == t_arrival {
                    let s = in_service.take().unwrap();
                    cum_busy += s.depart - s.start;
                    finish_departure(
                        &s,
                        b,
                        opts,
                        &mut sources[s.source],
                        &mut samples[s.source],
                        &mut records[s.source],
                        &mut max_wait_residual,
                        &mut done_sources,
                    );
                }
            }
            t_arrival
        };

        // Scheduling: the transmitter, when free, picks one occupied queue
        // with probability proportional to its weight. Skipped once every
        // source is done, so each grant in the run has a matching departure.
        if in_service.is_none() && done_sources < n {
            let total: f64 = sources
                .iter()
                .enumerate()
                .filter(|(_, s)| s.queued.is_some())
                .map(|(i, _)| weights.get(i))
                .sum();
            if total > 0.0 {
                let mut pick = rng.gen::<f64>() * total;
                let mut chosen = None;
                for (i, s) in sources.iter().enumerate() {
                    if s.queued.is_some() {
                        pick -= weights.get(i);
                        if pick <= 0.0 {
                            chosen = Some(i);
                            break;
                        }
                    }
                }
                // Guard against pick landing exactly on the total after
                // rounding: fall back to the last occupied queue.
                let chosen = chosen.unwrap_or_else(|| {
                    sources
                        .iter()
                        .enumerate()
                        .rev()
                        .find(|(_, s)| s.queued.is_some())
                        .map(|(i, _)| i)
                        .unwrap()
                });

                let state = &mut sources[chosen];
                let pkt = state.queued.take().unwrap();
                let service = config.service.sample(&mut rng);
                let wait = now - pkt.gen_time;
                // Departure is defined as S + W + V with this exact
                // association so the record identity holds bit for bit.
                let depart = pkt.gen_time + wait + service;
                let busy_now = cum_busy;
                let (busy, idle, preempted) = match state.last_start {
                    Some(prev_start) => (
                        busy_now - state.busy_at_last_start,
                        (now - prev_start) - (busy_now - state.busy_at_last_start),
                        state.preempts_since_start,
                    ),
                    None => (0.0, 0.0, 0),
                };
                state.last_start = Some(now);
                state.busy_at_last_start = busy_now;
                state.preempts_since_start = 0;
                grants[chosen] += 1;
                services_started += 1;
                in_service = Some(InService {
                    source: chosen,
                    gen_time: pkt.gen_time,
                    wait,
                    service,
                    start: now,
                    depart,
                    preempted,
                    busy,
                    idle,
                    busy_since_arrival: busy_now - pkt.busy_at_arrival,
                });
            }
        }
    }

    Ok(SimulationRun {
        samples,
        records,
        max_wait_residual,
        epochs: epoch,
        generated: sources.iter().map(|s| s.generated).collect(),
        preempted: sources.iter().map(|s| s.preempted).collect(),
        received: sources.iter().map(|s| s.received).collect(),
        grants,
        services_started,
    })
}

/// Departure bookkeeping shared by the two event branches: assembles the
/// record, streams the recursion residual, and applies retention rules.
#[allow(clippy::too_many_arguments)]
fn finish_departure(
    s: &InService,
    b: f64,
    opts: &SimOptions,
    state: &mut SourceState,
    samples: &mut Vec<PAoISample>,
    records: &mut Vec<PacketRecord>,
    max_wait_residual: &mut f64,
    done_sources: &mut usize,
) {
    state.received += 1;
    let k = state.received;
    let paoi = state.prev_gen.map(|prev| s.depart - prev);

    if k >= 2 {
        let predicted =
            state.prev_wait + s.busy + s.idle - (s.preempted as f64 + 1.0) * b;
        let residual = (s.wait - predicted).abs();
        if residual > *max_wait_residual {
            *max_wait_residual = residual;
        }
    }
    state.prev_wait = s.wait;
    state.prev_gen = Some(s.gen_time);

    if k > opts.warmup_updates {
        if records.len() < opts.record_cap.unwrap_or(usize::MAX) {
            records.push(PacketRecord {
                source: s.source,
                k,
                gen_time: s.gen_time,
                wait: s.wait,
                service: s.service,
                depart: s.depart,
                preempted: s.preempted,
                busy: s.busy,
                idle: s.idle,
                busy_since_arrival: s.busy_since_arrival,
                paoi,
            });
        }
        if let Some(a) = paoi {
            if samples.len() < opts.target_samples {
                samples.push(PAoISample {
                    source: s.source,
                    value: a,
                });
                if samples.len() == opts.target_samples {
                    *done_sources += 1;
                }
            }
        }
    }
}

/// Child seed for stream `stream` of a base seed. Splitmix-style finalizer,
/// so neighboring streams land far apart in ChaCha seed space.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(stream.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Empirical violation probability with a normal-approximation confidence
/// halfwidth: p = fraction of samples at or above x, half = 1.96 sqrt(p(1-p)/m).
pub fn estimate_violation(samples: &[PAoISample], x: f64) -> Result<(f64, f64), SimError> {
    if samples.is_empty() {
        return Err(SimError::EmptyInput);
    }
    let m = samples.len() as f64;
    let hits = samples.iter().filter(|s| s.value >= x).count() as f64;
    let p = hits / m;
    let half = 1.96 * (p * (1.0 - p) / m).sqrt();
    Ok((p, half))
}

/// Largest absolute residual of the waiting-time recursion over consecutive
/// received updates of one source. A correct event log yields zero up to
/// floating-point accumulation.
pub fn wait_recursion_residual(records: &[PacketRecord], b: f64) -> Result<f64, SimError> {
    if records.len() < 2 {
        return Err(SimError::InsufficientRecords {
            have: records.len(),
        });
    }
    let mut max = 0.0f64;
    for pair in records.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        let predicted = prev.wait + cur.busy + cur.idle - (cur.preempted as f64 + 1.0) * b;
        let residual = (cur.wait - predicted).abs();
        if residual > max {
            max = residual;
        }
    }
    Ok(max)
}

/// Verifies the asserted regime from one source's consecutive records and
/// returns the minimum slack of the matching peak-age bound:
/// b + T' + V - A in the long regime, b + T + V - A in the short one.
/// The asserted property is checked first; a violating record is reported
/// rather than folded into the slack.
pub fn regime_bound_check(
    records: &[PacketRecord],
    b: f64,
    regime: Regime,
) -> Result<f64, SimError> {
    if records.is_empty() {
        return Err(SimError::InsufficientRecords { have: 0 });
    }
    for (pos, r) in records.iter().enumerate() {
        match regime {
            Regime::Long => {
                // Each batch done before the next epoch means every update
                // departs within one period of its generation and nothing
                // is ever replaced.
                if r.depart > r.gen_time + b + 1e-9 {
                    return Err(SimError::RegimeViolated {
                        source: r.source,
                        k: r.k,
                        detail: format!(
                            "departure {:.6} exceeds generation {:.6} plus the period",
                            r.depart, r.gen_time
                        ),
                    });
                }
                if r.preempted != 0 {
                    return Err(SimError::RegimeViolated {
                        source: r.source,
                        k: r.k,
                        detail: format!("{} packets were replaced while waiting", r.preempted),
                    });
                }
            }
            Regime::Short => {
                // Never-idle transmitter: no idle time inside any
                // inter-start window. The first record's window reaches
                // back before the retained horizon, so it is not judged.
                if pos > 0 && r.idle > 1e-9 {
                    return Err(SimError::RegimeViolated {
                        source: r.source,
                        k: r.k,
                        detail: format!("transmitter idled for {:.6}", r.idle),
                    });
                }
            }
        }
    }
    let mut min_slack = f64::INFINITY;
    for r in records {
        if let Some(a) = r.paoi {
            let bound = match regime {
                Regime::Long => b + r.busy_since_arrival + r.service,
                Regime::Short => b + r.busy + r.service,
            };
            let slack = bound - a;
            if slack < min_slack {
                min_slack = slack;
            }
        }
    }
    if min_slack == f64::INFINITY {
        return Err(SimError::InsufficientRecords {
            have: records.len(),
        });
    }
    Ok(min_slack)
}
