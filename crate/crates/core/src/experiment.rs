//! Replicated runs and parameter sweeps.
//!
//! Runs are independent pure functions of their [`SimConfig`], so replication
//! and sweep points are mapped in parallel when the `parallel` feature is on.
//! Results are always gathered in input order.

use serde::{Deserialize, Serialize};

use crate::analytic::{self, InterTxInputs};
use crate::error::{Error, Result};
use crate::metrics;
use crate::sim::{self, Protocol, SimConfig, WARMUP_SLOTS};
use crate::stats::Estimate;
use crate::types::{AlohaParams, ChannelTrace, CsmaMode, CsmaParams, EventKind, Tick};

/// How independent runs are scheduled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Falls back to sequential when built without the `parallel` feature.
    #[default]
    Parallel,
}

fn map_in_order<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Seeds `base, base + 1, ...`.
pub fn seeds(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_add(i)).collect()
}

/// Measurements of one run after warm-up removal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub psi: Option<f64>,
    pub user_means: Vec<Option<f64>>,
    pub p_ni0: Option<f64>,
    pub e_ni: Option<f64>,
    pub throughput: f64,
    /// Per user: collisions it took part in over its transmission attempts.
    pub collision_probability: Vec<Option<f64>>,
    pub cycle_samples: usize,
}

/// Per-user collisions over attempts (successes plus collisions).
pub fn attempt_collision_probability(trace: &ChannelTrace) -> Vec<Option<f64>> {
    let n = trace.user_count();
    let mut successes = vec![0u64; n];
    let mut collisions = vec![0u64; n];
    for e in trace.events() {
        let bucket = match e.kind {
            EventKind::Success => &mut successes,
            EventKind::Collision => &mut collisions,
            EventKind::Idle => continue,
        };
        for u in e.users.iter() {
            bucket[u] += 1;
        }
    }
    successes
        .iter()
        .zip(&collisions)
        .map(|(&s, &c)| (s + c > 0).then(|| c as f64 / (s + c) as f64))
        .collect()
}

pub fn summarize(trace: &ChannelTrace, seed: u64) -> Result<RunSummary> {
    let trace = trace.since(WARMUP_SLOTS);
    let cct = metrics::channel_cycle_time(&trace)?;
    let itx = metrics::inter_transmission_report(&trace);
    Ok(RunSummary {
        seed,
        psi: cct.psi,
        user_means: cct.per_user.iter().map(|u| u.mean).collect(),
        p_ni0: itx.p0(),
        e_ni: itx.mean,
        throughput: metrics::throughput(&trace),
        collision_probability: attempt_collision_probability(&trace),
        cycle_samples: cct.per_user.iter().map(|u| u.samples.len()).sum(),
    })
}

pub fn run_once(config: &SimConfig) -> Result<RunSummary> {
    let trace = sim::simulate(config)?;
    summarize(&trace, config.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub runs: Vec<RunSummary>,
    /// Across-seed estimate over the runs where Ψ is defined.
    pub psi: Option<Estimate>,
    pub p_ni0: Option<Estimate>,
    pub e_ni: Option<Estimate>,
}

impl Replication {
    fn from_runs(runs: Vec<RunSummary>) -> Self {
        let collect = |f: fn(&RunSummary) -> Option<f64>| {
            Estimate::from_samples(&runs.iter().filter_map(f).collect::<Vec<_>>())
        };
        Replication {
            psi: collect(|r| r.psi),
            p_ni0: collect(|r| r.p_ni0),
            e_ni: collect(|r| r.e_ni),
            runs,
        }
    }

    /// Mean over runs of a per-user collision probability.
    pub fn collision_probability(&self, user: usize) -> Option<f64> {
        Estimate::from_samples(
            &self
                .runs
                .iter()
                .filter_map(|r| r.collision_probability.get(user).copied().flatten())
                .collect::<Vec<_>>(),
        )
        .map(|e| e.mean)
    }
}

/// Runs `config` once per seed.
pub fn replicate(config: &SimConfig, seeds: &[u64], exec: Execution) -> Result<Replication> {
    config.validate()?;
    let runs = map_in_order(seeds, exec, |&s| run_once(&config.with_seed(s)));
    Ok(Replication::from_runs(runs.into_iter().collect::<Result<_>>()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepProtocol {
    Aloha,
    CsmaRtsCts,
    CsmaBasic,
    Tdma,
}

impl SweepProtocol {
    pub const ALL: [SweepProtocol; 4] = [
        SweepProtocol::Aloha,
        SweepProtocol::CsmaRtsCts,
        SweepProtocol::CsmaBasic,
        SweepProtocol::Tdma,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SweepProtocol::Aloha => "aloha",
            SweepProtocol::CsmaRtsCts => "csma-rtscts",
            SweepProtocol::CsmaBasic => "csma-basic",
            SweepProtocol::Tdma => "tdma",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.label() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Packet length in slots; Aloha uses it as its slot length.
    PacketLength(Vec<Tick>),
    /// Aloha transmit probability: `p_a = p_b = p`, or every `(p_a, p_b)`
    /// pair when `grid` is set.
    TransmitProbability { values: Vec<f64>, grid: bool },
    /// CSMA/CA minimum contention window.
    ContentionWindow(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub protocols: Vec<SweepProtocol>,
    /// CSMA/CA parameters; the swept field is overridden per point.
    pub csma: CsmaParams,
    /// Aloha transmit probability on the packet-length axis.
    pub aloha_p: f64,
    pub inputs: InterTxInputs,
    pub horizon: Tick,
    pub base_seed: u64,
    pub repetitions: usize,
}

/// One CSV row: `x,protocol,psi_analytic_slots,psi_sim_mean_slots,psi_sim_ci95`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub x: String,
    pub protocol: String,
    pub psi_analytic_slots: Option<f64>,
    pub psi_sim_mean_slots: Option<f64>,
    pub psi_sim_ci95: Option<f64>,
}

struct SweepPoint {
    x: String,
    protocol: SweepProtocol,
    analytic: Option<f64>,
    config: SimConfig,
}

fn fmt_prob(p: f64) -> String {
    format!("{p}")
}

impl SweepSpec {
    fn points(&self) -> Result<Vec<SweepPoint>> {
        let mut out = Vec::new();
        let mut push = |x: String, protocol: SweepProtocol, sim_protocol: Protocol| -> Result<()> {
            let analytic = match &sim_protocol {
                Protocol::Aloha(p) => analytic::aloha_cct(p).ok().map(|c| c.psi_slots),
                Protocol::Csma { params, mode } => {
                    Some(analytic::csma_cct(params, *mode, self.inputs)?.psi_slots)
                }
                Protocol::Tdma { packet_lengths } => {
                    Some(analytic::tdma_cct(packet_lengths)?.psi_slots)
                }
            };
            let config = SimConfig::new(self.base_seed, self.horizon, sim_protocol);
            config.validate()?;
            out.push(SweepPoint {
                x,
                protocol,
                analytic,
                config,
            });
            Ok(())
        };
        match &self.axis {
            SweepAxis::PacketLength(lengths) => {
                for &pkt in lengths {
                    for &proto in &self.protocols {
                        let csma = CsmaParams {
                            l_pkt: pkt,
                            ..self.csma
                        };
                        let sim_protocol = match proto {
                            SweepProtocol::Aloha => {
                                Protocol::Aloha(AlohaParams::new(self.aloha_p, self.aloha_p, pkt)?)
                            }
                            SweepProtocol::CsmaRtsCts => Protocol::Csma {
                                params: csma,
                                mode: CsmaMode::RtsCts,
                            },
                            SweepProtocol::CsmaBasic => Protocol::Csma {
                                params: csma,
                                mode: CsmaMode::Basic,
                            },
                            SweepProtocol::Tdma => Protocol::Tdma {
                                packet_lengths: vec![pkt, pkt],
                            },
                        };
                        push(pkt.to_string(), proto, sim_protocol)?;
                    }
                }
            }
            SweepAxis::TransmitProbability { values, grid } => {
                if self.protocols.iter().any(|p| *p != SweepProtocol::Aloha) {
                    return Err(Error::InvalidParam(
                        "the transmit-probability axis only applies to aloha".into(),
                    ));
                }
                let pairs: Vec<(f64, f64)> = if *grid {
                    values
                        .iter()
                        .flat_map(|&a| values.iter().map(move |&b| (a, b)))
                        .collect()
                } else {
                    values.iter().map(|&p| (p, p)).collect()
                };
                for (a, b) in pairs {
                    let x = if *grid {
                        format!("{}/{}", fmt_prob(a), fmt_prob(b))
                    } else {
                        fmt_prob(a)
                    };
                    let params = AlohaParams::new(a, b, Tick(1))?;
                    push(x, SweepProtocol::Aloha, Protocol::Aloha(params))?;
                }
            }
            SweepAxis::ContentionWindow(windows) => {
                for &cw in windows {
                    for &proto in &self.protocols {
                        let params = CsmaParams {
                            cw_min: cw,
                            ..self.csma
                        };
                        let mode = match proto {
                            SweepProtocol::CsmaRtsCts => CsmaMode::RtsCts,
                            SweepProtocol::CsmaBasic => CsmaMode::Basic,
                            other => {
                                return Err(Error::InvalidParam(format!(
                                    "the contention-window axis does not apply to {}",
                                    other.label()
                                )))
                            }
                        };
                        push(cw.to_string(), proto, Protocol::Csma { params, mode })?;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Evaluates every axis point for every protocol, analytically and by
/// simulation over `repetitions` seeds.
pub fn sweep(spec: &SweepSpec, exec: Execution) -> Result<Vec<SweepRow>> {
    if spec.repetitions == 0 {
        return Err(Error::InvalidParam("repetitions must be at least 1".into()));
    }
    if spec.protocols.is_empty() {
        return Err(Error::Empty("protocols"));
    }
    let points = spec.points()?;
    let seeds = seeds(spec.base_seed, spec.repetitions);
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    let results = map_in_order(&jobs, exec, |&(p, s)| {
        run_once(&points[p].config.with_seed(s))
    });
    let mut runs = results.into_iter();
    points
        .iter()
        .map(|point| {
            let group: Vec<RunSummary> = runs
                .by_ref()
                .take(seeds.len())
                .collect::<Result<_>>()?;
            let rep = Replication::from_runs(group);
            Ok(SweepRow {
                x: point.x.clone(),
                protocol: point.protocol.label().to_string(),
                psi_analytic_slots: point.analytic,
                psi_sim_mean_slots: rep.psi.map(|e| e.mean),
                psi_sim_ci95: rep.psi.and_then(|e| e.ci95),
            })
        })
        .collect()
}
