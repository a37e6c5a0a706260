//! Short-term fairness measurements over a [`ChannelTrace`]: refresh moments,
//! cycle times, the channel cycle time Ψ, inter-transmission counts and the
//! two-part decomposition of two-user cycles.
//!
//! Only success events matter here; collisions and idle periods contribute
//! through timing alone.
//!
//! A success of user `n` is counted in `M_n(t, t')` when its whole airtime lies
//! within `[t, t']`. Since refresh moments are event end times and events do not
//! overlap, that is exactly "strictly between the two bounding successes".

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ChannelTrace, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Success {
    user: usize,
    start: Tick,
    end: Tick,
}

fn success_sequence(trace: &ChannelTrace) -> Vec<Success> {
    trace
        .successes()
        .map(|e| Success {
            user: e.sole_user().expect("validated success has one user"),
            start: e.start,
            end: e.end,
        })
        .collect()
}

/// Positions (into the success sequence) of `user`'s refresh moments.
fn refresh_positions(seq: &[Success], user: usize) -> Vec<usize> {
    seq.windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].user == user && w[1].user != user)
        .map(|(i, _)| i)
        .collect()
}

/// End times of `user`'s successes that are followed by another user's
/// success. The final success of the trace is never a refresh moment.
pub fn refresh_moments(trace: &ChannelTrace, user: &str) -> Result<Vec<Tick>> {
    let ui = trace.user_index(user)?;
    let seq = success_sequence(trace);
    Ok(refresh_positions(&seq, ui)
        .into_iter()
        .map(|p| seq[p].end)
        .collect())
}

/// One cycle-time sample: the interval between two refresh moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycle {
    pub start: Tick,
    pub end: Tick,
}

impl Cycle {
    pub fn duration(&self) -> Tick {
        self.end - self.start
    }
}

/// Qualifying refresh-moment pairs as positions into the success sequence,
/// ordered by right endpoint, then left endpoint.
fn cycle_positions(seq: &[Success], user: usize, n_users: usize) -> Vec<(usize, usize)> {
    let refresh = refresh_positions(seq, user);
    let times: Vec<Tick> = refresh.iter().map(|&p| seq[p].end).collect();
    let others: Vec<usize> = (0..n_users).filter(|&n| n != user).collect();
    if others.is_empty() {
        return Vec::new();
    }

    // last_start[n]: start of user n's latest success seen so far.
    let mut last_start: Vec<Option<Tick>> = vec![None; n_users];
    let mut out = Vec::new();
    let mut prev_count = 0usize;
    let mut pos = 0usize;
    for (j, &rp) in refresh.iter().enumerate() {
        while pos < rp {
            last_start[seq[pos].user] = Some(seq[pos].start);
            pos += 1;
        }
        // Every other user has a success inside [r_k, r_j] iff
        // r_k <= min_n last_start[n]; that holds for a prefix of k.
        let bound = others
            .iter()
            .map(|&n| last_start[n])
            .try_fold(Tick(u64::MAX), |acc, s| s.map(|s| acc.min(s)));
        let count = bound.map_or(0, |b| times.partition_point(|&t| t <= b));
        // consecutive pair (j-1, j) needs count > j-1; a nonconsecutive pair
        // (k, j) additionally needs the pair (k, j-1) to fail, i.e. k >= prev_count.
        let hi = count.min(j);
        let lo = if j == 0 { hi } else { prev_count.min(hi) };
        out.extend((lo..hi).map(|k| (refresh[k], rp)));
        prev_count = count;
    }
    out
}

/// Every cycle of `user` as a pair of refresh moments.
pub fn cycles(trace: &ChannelTrace, user: &str) -> Result<Vec<Cycle>> {
    let ui = trace.user_index(user)?;
    let seq = success_sequence(trace);
    Ok(cycle_positions(&seq, ui, trace.user_count())
        .into_iter()
        .map(|(a, b)| Cycle {
            start: seq[a].end,
            end: seq[b].end,
        })
        .collect())
}

/// Cycle-time samples of `user`, in the order of [`cycles`].
pub fn cycle_times(trace: &ChannelTrace, user: &str) -> Result<Vec<Tick>> {
    Ok(cycles(trace, user)?.iter().map(Cycle::duration).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserCycles {
    pub user: String,
    pub samples: Vec<Tick>,
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleTimeReport {
    pub per_user: Vec<UserCycles>,
    /// Average of the per-user means; `None` when some user has no sample.
    pub psi: Option<f64>,
    pub users_without_samples: Vec<String>,
}

impl CycleTimeReport {
    pub fn is_undefined(&self) -> bool {
        self.psi.is_none()
    }

    pub fn mean_of(&self, user: &str) -> Option<f64> {
        self.per_user
            .iter()
            .find(|u| u.user == user)
            .and_then(|u| u.mean)
    }
}

fn mean_ticks(samples: &[Tick]) -> Option<f64> {
    if samples.is_empty() {
        None
    } else {
        let sum: u128 = samples.iter().map(|t| t.0 as u128).sum();
        Some(sum as f64 / samples.len() as f64)
    }
}

/// Per-user cycle times and the channel cycle time Ψ.
pub fn channel_cycle_time(trace: &ChannelTrace) -> Result<CycleTimeReport> {
    let n = trace.user_count();
    if n < 2 {
        return Err(Error::TooFewUsers { need: 2, found: n });
    }
    let seq = success_sequence(trace);
    let per_user: Vec<UserCycles> = trace
        .users()
        .iter()
        .enumerate()
        .map(|(ui, name)| {
            let samples: Vec<Tick> = cycle_positions(&seq, ui, n)
                .into_iter()
                .map(|(a, b)| seq[b].end - seq[a].end)
                .collect();
            UserCycles {
                user: name.clone(),
                mean: mean_ticks(&samples),
                samples,
            }
        })
        .collect();
    let users_without_samples: Vec<String> = per_user
        .iter()
        .filter(|u| u.mean.is_none())
        .map(|u| u.user.clone())
        .collect();
    let psi = if users_without_samples.is_empty() {
        Some(per_user.iter().filter_map(|u| u.mean).sum::<f64>() / n as f64)
    } else {
        None
    };
    Ok(CycleTimeReport {
        per_user,
        psi,
        users_without_samples,
    })
}

fn inter_transmission_counts(seq: &[Success], n_users: usize) -> Vec<Vec<u64>> {
    let mut last: Vec<Option<usize>> = vec![None; n_users];
    let mut counts = vec![Vec::new(); n_users];
    for (pos, s) in seq.iter().enumerate() {
        if let Some(prev) = last[s.user] {
            counts[s.user].push((pos - prev - 1) as u64);
        }
        last[s.user] = Some(pos);
    }
    counts
}

/// For each pair of adjacent successes of `user`, the number of other users'
/// successes in between.
pub fn inter_transmissions(trace: &ChannelTrace, user: &str) -> Result<Vec<u64>> {
    let ui = trace.user_index(user)?;
    let seq = success_sequence(trace);
    Ok(inter_transmission_counts(&seq, trace.user_count()).swap_remove(ui))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterTxReport {
    pub per_user_counts: Vec<(String, Vec<u64>)>,
    /// Empirical PMF of the inter-transmission count pooled over all users.
    pub pooled_pmf: BTreeMap<u64, f64>,
    pub mean: Option<f64>,
}

impl InterTxReport {
    /// Estimated probability of zero inter-transmissions.
    pub fn p0(&self) -> Option<f64> {
        self.mean
            .map(|_| self.pooled_pmf.get(&0).copied().unwrap_or(0.0))
    }

    pub fn sample_count(&self) -> usize {
        self.per_user_counts.iter().map(|(_, c)| c.len()).sum()
    }
}

pub fn inter_transmission_report(trace: &ChannelTrace) -> InterTxReport {
    let seq = success_sequence(trace);
    let counts = inter_transmission_counts(&seq, trace.user_count());
    let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
    for c in counts.iter().flatten() {
        *hist.entry(*c).or_default() += 1;
    }
    let total: u64 = hist.values().sum();
    let pooled_pmf: BTreeMap<u64, f64> = hist
        .iter()
        .map(|(&k, &n)| (k, n as f64 / total as f64))
        .collect();
    let mean = (total > 0).then(|| pooled_pmf.iter().map(|(&k, &p)| k as f64 * p).sum());
    InterTxReport {
        per_user_counts: trace.users().iter().cloned().zip(counts).collect(),
        pooled_pmf,
        mean,
    }
}

/// A two-user cycle split at the end of the owner's first success in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartDecomposition {
    pub cycle: Cycle,
    /// End of the owner's first success inside the cycle.
    pub split: Tick,
    /// Other user's successes before the split.
    pub n_b: u64,
    /// Owner's successes after the split.
    pub n_a_prime: u64,
    pub t_part1: Tick,
    pub t_part2: Tick,
}

/// Splits every cycle of `user` into Part 1 (the other user's successes and
/// the owner's first success) and Part 2 (the owner's remaining successes).
pub fn part_decomposition(trace: &ChannelTrace, user: &str) -> Result<Vec<PartDecomposition>> {
    match trace.user_count() {
        n if n < 2 => return Err(Error::TooFewUsers { need: 2, found: n }),
        2 => {}
        n => return Err(Error::NotTwoUsers(n)),
    }
    let ui = trace.user_index(user)?;
    let seq = success_sequence(trace);
    let mut out = Vec::new();
    for (a, b) in cycle_positions(&seq, ui, 2) {
        let first_own = (a + 1..=b)
            .find(|&p| seq[p].user == ui)
            .expect("a cycle ends with an own success");
        let n_b = seq[a + 1..first_own].len() as u64;
        let n_a_prime = seq[first_own + 1..=b]
            .iter()
            .filter(|s| s.user == ui)
            .count() as u64;
        let cycle = Cycle {
            start: seq[a].end,
            end: seq[b].end,
        };
        let split = seq[first_own].end;
        out.push(PartDecomposition {
            cycle,
            split,
            n_b,
            n_a_prime,
            t_part1: split - cycle.start,
            t_part2: cycle.end - split,
        });
    }
    Ok(out)
}

/// Fraction of the horizon covered by success events.
pub fn throughput(trace: &ChannelTrace) -> f64 {
    if trace.horizon().0 == 0 {
        return 0.0;
    }
    let busy: u64 = trace.successes().map(|e| e.duration().0).sum();
    busy as f64 / trace.horizon().as_f64()
}
