//! Seeded, slot-granular simulators producing [`ChannelTrace`]s.
//!
//! Each user draws from its own ChaCha8 stream (`seed`, stream = user index),
//! so a run is a pure function of its [`SimConfig`].
//!
//! CSMA/CA timing, per contention round:
//!
//! * both users sense DIFS, then count down one per idle slot;
//! * the user whose counter expires first transmits from the next slot on; if
//!   both expire together the round is a collision;
//! * the loser still decrements during the winner's first busy slot, then
//!   stays frozen for the rest of the exchange (`l_nav` with RTS/CTS,
//!   `l_tran - 1` without);
//! * after a collision both users advance their backoff stage (capped at
//!   beta) and redraw; after a success only the winner resets and redraws.

use std::fmt::Write as _;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{
    AlohaParams, ChannelEvent, ChannelTrace, CsmaMode, CsmaParams, Tick, UserSet,
};

/// Slots discarded at the start of a run before measuring.
pub const WARMUP_SLOTS: Tick = Tick(1_000);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Protocol {
    Aloha(AlohaParams),
    Csma { params: CsmaParams, mode: CsmaMode },
    Tdma { packet_lengths: Vec<Tick> },
}

impl Protocol {
    pub fn label(&self) -> &'static str {
        match self {
            Protocol::Aloha(_) => "aloha",
            Protocol::Csma { mode, .. } => mode.label(),
            Protocol::Tdma { .. } => "tdma",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub horizon: Tick,
    pub users: Vec<String>,
    pub protocol: Protocol,
}

/// `A`, `B`, `C`, ...
pub fn default_users(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            let c = (b'A' + (i % 26) as u8) as char;
            if i < 26 {
                c.to_string()
            } else {
                format!("{c}{}", i / 26)
            }
        })
        .collect()
}

impl SimConfig {
    pub fn new(seed: u64, horizon: Tick, protocol: Protocol) -> Self {
        let n = match &protocol {
            Protocol::Tdma { packet_lengths } => packet_lengths.len(),
            _ => 2,
        };
        SimConfig {
            seed,
            horizon,
            users: default_users(n),
            protocol,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SimConfig {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon.0 < 1 {
            return Err(Error::InvalidParam("horizon must be at least one slot".into()));
        }
        ChannelTrace::new(self.users.clone(), vec![], Tick(0))?;
        let expected = match &self.protocol {
            Protocol::Aloha(p) => {
                p.validate()?;
                2
            }
            Protocol::Csma { params, .. } => {
                params.validate()?;
                2
            }
            Protocol::Tdma { packet_lengths } => {
                if packet_lengths.is_empty() {
                    return Err(Error::Empty("packet_lengths"));
                }
                if packet_lengths.iter().any(|l| l.0 == 0) {
                    return Err(Error::InvalidParam("packet lengths must be positive".into()));
                }
                packet_lengths.len()
            }
        };
        if self.users.len() != expected {
            return Err(Error::InvalidParam(format!(
                "{} needs {expected} users, got {}",
                self.protocol.label(),
                self.users.len()
            )));
        }
        Ok(())
    }
}

fn user_rng(seed: u64, user: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(user as u64);
    rng
}

/// Runs whichever protocol `config` names.
pub fn simulate(config: &SimConfig) -> Result<ChannelTrace> {
    match &config.protocol {
        Protocol::Aloha(_) => simulate_aloha(config),
        Protocol::Csma { .. } => simulate_csma(config),
        Protocol::Tdma { .. } => simulate_tdma(config),
    }
}

/// Saturated two-user slotted Aloha. Consecutive idle slots are merged into
/// one idle event.
pub fn simulate_aloha(config: &SimConfig) -> Result<ChannelTrace> {
    config.validate()?;
    let Protocol::Aloha(params) = config.protocol else {
        return Err(Error::InvalidParam("not an Aloha configuration".into()));
    };
    let mut rngs = [user_rng(config.seed, 0), user_rng(config.seed, 1)];
    let slot = params.slot;
    let slots = config.horizon.0 / slot.0;
    let mut events = Vec::with_capacity(slots as usize);
    let mut idle_since: Option<Tick> = None;
    let mut t = Tick(0);
    for _ in 0..slots {
        let a = rngs[0].random_bool(params.p_a);
        let b = rngs[1].random_bool(params.p_b);
        let end = t + slot;
        if !a && !b {
            idle_since.get_or_insert(t);
        } else {
            if let Some(s) = idle_since.take() {
                events.push(ChannelEvent::idle(s, t));
            }
            events.push(match (a, b) {
                (true, false) => ChannelEvent::success(t, end, 0),
                (false, true) => ChannelEvent::success(t, end, 1),
                _ => ChannelEvent::collision(t, end, UserSet::from_indices([0, 1])),
            });
        }
        t = end;
    }
    if let Some(s) = idle_since {
        events.push(ChannelEvent::idle(s, t));
    }
    Ok(
        ChannelTrace::from_parts_unchecked(config.users.clone(), events, config.horizon)
            .with_slots_per_unit(Some(slot.0)),
    )
}

/// Round-robin TDMA: back-to-back successes in user order. A packet that would
/// run past the horizon is dropped.
pub fn simulate_tdma(config: &SimConfig) -> Result<ChannelTrace> {
    config.validate()?;
    let Protocol::Tdma { packet_lengths } = &config.protocol else {
        return Err(Error::InvalidParam("not a TDMA configuration".into()));
    };
    let mut events = Vec::new();
    let mut t = Tick(0);
    'outer: loop {
        for (user, &len) in packet_lengths.iter().enumerate() {
            if t + len > config.horizon {
                break 'outer;
            }
            events.push(ChannelEvent::success(t, t + len, user));
            t += len;
        }
    }
    Ok(ChannelTrace::from_parts_unchecked(
        config.users.clone(),
        events,
        config.horizon,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Difs,
    Contention,
    Nav,
    Rcts,
    Tran,
}

/// Per-user CSMA/CA state between contention rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsmaUserState {
    /// Phase the user ended the last round in.
    pub phase: Phase,
    pub backoff_counter: u32,
    pub backoff_stage: u32,
    /// Counter carried over from a lost contention.
    pub frozen: bool,
    /// Full value of the draw the counter came from.
    pub draw: u32,
}

impl CsmaUserState {
    fn fresh(stage: u32, params: &CsmaParams, rng: &mut ChaCha8Rng) -> Self {
        let draw = rng.random_range(1..=params.cw(stage));
        CsmaUserState {
            phase: Phase::Difs,
            backoff_counter: draw,
            backoff_stage: stage,
            frozen: false,
            draw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Winner(usize),
    Collision,
}

/// One contention resolution as seen by the audit log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentionRecord {
    /// End of the resulting channel event.
    pub t: Tick,
    pub outcome: Outcome,
    /// Backoff stages in effect during the round.
    pub stages: [u32; 2],
    /// Full draws behind each user's counter during the round.
    pub lambdas: [u32; 2],
}

/// Two-user saturated CSMA/CA.
pub fn simulate_csma(config: &SimConfig) -> Result<ChannelTrace> {
    run_csma(config, None)
}

/// Like [`simulate_csma`], also returning one record per contention round.
pub fn simulate_csma_audited(config: &SimConfig) -> Result<(ChannelTrace, Vec<ContentionRecord>)> {
    let mut audit = Vec::new();
    let trace = run_csma(config, Some(&mut audit))?;
    Ok((trace, audit))
}

fn run_csma(
    config: &SimConfig,
    mut audit: Option<&mut Vec<ContentionRecord>>,
) -> Result<ChannelTrace> {
    config.validate()?;
    let Protocol::Csma { params, mode } = config.protocol else {
        return Err(Error::InvalidParam("not a CSMA/CA configuration".into()));
    };
    let mut rngs = [user_rng(config.seed, 0), user_rng(config.seed, 1)];
    let mut state = [
        CsmaUserState::fresh(0, &params, &mut rngs[0]),
        CsmaUserState::fresh(0, &params, &mut rngs[1]),
    ];
    let success_air = params.success_airtime(mode);
    let collision_air = params.collision_airtime(mode);
    let handshake_phase = match mode {
        CsmaMode::RtsCts => Phase::Rcts,
        CsmaMode::Basic => Phase::Tran,
    };
    let horizon = config.horizon;
    let mut events = Vec::new();
    let mut t = Tick(0);

    loop {
        let m = state[0].backoff_counter.min(state[1].backoff_counter);
        let idle_end = t + params.l_difs + Tick(m as u64);
        let expired = [
            state[0].backoff_counter == m,
            state[1].backoff_counter == m,
        ];
        let outcome = match expired {
            [true, true] => Outcome::Collision,
            [true, false] => Outcome::Winner(0),
            _ => Outcome::Winner(1),
        };
        let busy = match outcome {
            Outcome::Collision => collision_air,
            Outcome::Winner(_) => success_air,
        };
        let end = idle_end + busy;
        if end > horizon {
            let cut = idle_end.min(horizon);
            if cut > t {
                events.push(ChannelEvent::idle(t, cut));
            }
            break;
        }
        events.push(ChannelEvent::idle(t, idle_end));
        events.push(match outcome {
            Outcome::Collision => {
                ChannelEvent::collision(idle_end, end, UserSet::from_indices([0, 1]))
            }
            Outcome::Winner(w) => ChannelEvent::success(idle_end, end, w),
        });
        if let Some(log) = audit.as_deref_mut() {
            log.push(ContentionRecord {
                t: end,
                outcome,
                stages: [state[0].backoff_stage, state[1].backoff_stage],
                lambdas: [state[0].draw, state[1].draw],
            });
        }

        match outcome {
            Outcome::Collision => {
                for u in 0..2 {
                    let stage = (state[u].backoff_stage + 1).min(params.beta);
                    state[u] = CsmaUserState::fresh(stage, &params, &mut rngs[u]);
                    state[u].phase = handshake_phase;
                }
            }
            Outcome::Winner(w) => {
                let l = 1 - w;
                state[w] = CsmaUserState::fresh(0, &params, &mut rngs[w]);
                state[w].phase = Phase::Tran;
                // the loser counts down through the winner's first busy slot
                state[l].backoff_counter -= m + 1;
                state[l].frozen = true;
                state[l].phase = Phase::Nav;
            }
        }
        t = end;
    }
    Ok(ChannelTrace::from_parts_unchecked(
        config.users.clone(),
        events,
        horizon,
    ))
}

/// `t,winner|collision,stage_a,stage_b,lambda_a,lambda_b`, one line per round.
pub fn write_audit<W: Write>(
    records: &[ContentionRecord],
    users: &[String],
    mut out: W,
) -> Result<()> {
    let mut line = String::with_capacity(48);
    for r in records {
        line.clear();
        let who = match r.outcome {
            Outcome::Winner(w) => users[w].as_str(),
            Outcome::Collision => "collision",
        };
        let _ = writeln!(
            line,
            "{},{},{},{},{},{}",
            r.t, who, r.stages[0], r.stages[1], r.lambdas[0], r.lambdas[1]
        );
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Part durations of one cycle rebuilt from the audit log alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditedParts {
    pub n_b: u64,
    /// Collisions before the owner's first success.
    pub rho1: u64,
    /// Owner's extra successes after the split.
    pub n_a_prime: u64,
    pub t_part1: Tick,
    pub t_part2: Tick,
}

/// Rebuilds Part 1 and Part 2 of the owner's cycle `(start, end]`, split at
/// `split`, as
///
/// * Part 1: `n_B (l_difs + hold) + extra + Σ (l_difs + attempt + λ_i)` over the
///   owner's attempts up to and including its first success;
/// * Part 2: `Σ_j [extra + Σ_i (l_difs + attempt + λ_i^(j))]` over the owner's
///   remaining successes,
///
/// where `attempt` is the collision airtime and `extra` the success airtime
/// beyond it (`l_tran` with RTS/CTS, zero in basic mode).
pub fn audited_parts(
    params: &CsmaParams,
    mode: CsmaMode,
    audit: &[ContentionRecord],
    owner: usize,
    start: Tick,
    split: Tick,
    end: Tick,
) -> AuditedParts {
    let difs = params.l_difs.0;
    let hold = params.hold(mode).0;
    let attempt = params.collision_airtime(mode).0;
    let extra = params.success_airtime(mode).0 - attempt;
    let first = audit.partition_point(|r| r.t <= start);
    let mut parts = AuditedParts {
        n_b: 0,
        rho1: 0,
        n_a_prime: 0,
        t_part1: Tick(0),
        t_part2: Tick(0),
    };
    for r in audit[first..].iter().take_while(|r| r.t <= end) {
        let in_part1 = r.t <= split;
        let lambda = r.lambdas[owner] as u64;
        let cost = match r.outcome {
            Outcome::Winner(w) if w != owner => {
                parts.n_b += 1;
                difs + hold
            }
            Outcome::Winner(_) => {
                if !in_part1 {
                    parts.n_a_prime += 1;
                }
                extra + difs + attempt + lambda
            }
            Outcome::Collision => {
                if in_part1 {
                    parts.rho1 += 1;
                }
                difs + attempt + lambda
            }
        };
        if in_part1 {
            parts.t_part1 += Tick(cost);
        } else {
            parts.t_part2 += Tick(cost);
        }
    }
    parts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::EventKind;

    fn csma(cw_min: u32, beta: u32, mode: CsmaMode, horizon: u64, seed: u64) -> SimConfig {
        let mut params = CsmaParams::reference(Tick(30));
        params.cw_min = cw_min;
        params.beta = beta;
        SimConfig::new(seed, Tick(horizon), Protocol::Csma { params, mode })
    }

    #[test]
    fn aloha_always_a_gives_only_a_successes() {
        let cfg = SimConfig::new(
            1,
            Tick(100),
            Protocol::Aloha(AlohaParams::new(1.0, 0.0, Tick(1)).unwrap()),
        );
        let t = simulate_aloha(&cfg).unwrap();
        assert_eq!(t.events().len(), 100);
        assert!(t.events().iter().all(|e| e.sole_user() == Some(0)));
    }

    #[test]
    fn aloha_is_reproducible() {
        let cfg = SimConfig::new(
            42,
            Tick(10_000),
            Protocol::Aloha(AlohaParams::new(0.3, 0.6, Tick(3)).unwrap()),
        );
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, simulate(&cfg.with_seed(43)).unwrap());
        assert_eq!(a.slots_per_unit(), Some(3));
        a.validate().unwrap();
    }

    #[test]
    fn cw_one_collides_forever() {
        let t = simulate_csma(&csma(1, 0, CsmaMode::RtsCts, 10_000, 3)).unwrap();
        assert!(t.events().iter().all(|e| e.kind != EventKind::Success));
        assert!(t.events().iter().any(|e| e.kind == EventKind::Collision));
    }

    #[test]
    fn csma_trace_is_well_formed_and_alternates_idle() {
        for mode in [CsmaMode::RtsCts, CsmaMode::Basic] {
            let t = simulate_csma(&csma(32, 5, mode, 200_000, 9)).unwrap();
            t.validate().unwrap();
            let busy = t.events().iter().filter(|e| e.kind != EventKind::Idle);
            let params = CsmaParams::reference(Tick(30));
            for e in busy {
                let expect = match e.kind {
                    EventKind::Success => params.success_airtime(mode),
                    _ => params.collision_airtime(mode),
                };
                assert_eq!(e.duration(), expect);
            }
        }
    }

    #[test]
    fn audit_log_has_one_record_per_busy_event() {
        let (t, audit) = simulate_csma_audited(&csma(16, 3, CsmaMode::Basic, 100_000, 5)).unwrap();
        let busy: Vec<_> = t
            .events()
            .iter()
            .filter(|e| e.kind != EventKind::Idle)
            .collect();
        assert_eq!(busy.len(), audit.len());
        for (e, r) in busy.iter().zip(&audit) {
            assert_eq!(e.end, r.t);
            for u in 0..2 {
                assert!(r.lambdas[u] >= 1 && r.lambdas[u] <= 16 << r.stages[u]);
                assert!(r.stages[u] <= 3);
            }
        }
        let mut buf = Vec::new();
        write_audit(&audit[..2], t.users(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next().unwrap().split(',').count(), 6);
    }

    #[test]
    fn tdma_truncates_partial_cycle() {
        let cfg = SimConfig::new(
            0,
            Tick(69),
            Protocol::Tdma {
                packet_lengths: vec![Tick(10), Tick(20), Tick(30)],
            },
        );
        let t = simulate_tdma(&cfg).unwrap();
        let ends: Vec<u64> = t.events().iter().map(|e| e.end.0).collect();
        assert_eq!(ends, vec![10, 30, 60]);
        t.validate().unwrap();
    }

    #[test]
    fn config_validation() {
        let mut cfg = csma(32, 5, CsmaMode::RtsCts, 0, 0);
        assert!(simulate(&cfg).is_err());
        cfg.horizon = Tick(10);
        cfg.users = default_users(3);
        assert!(simulate(&cfg).is_err());
        assert_eq!(default_users(3), ["A", "B", "C"]);
    }
}
