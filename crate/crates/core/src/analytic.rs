//! Closed-form channel cycle times for two-user slotted Aloha, CSMA/CA
//! (RTS/CTS and basic access) and round-robin TDMA, plus the collision
//! probability fixed point behind the CSMA/CA expressions.
//!
//! Everything is in slots. Inputs that would make an expression infinite or
//! meaningless are rejected rather than returned as `inf`/`NaN`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{AlohaParams, CsmaMode, CsmaParams, Tick};

/// Default probability of zero inter-transmissions.
pub const DEFAULT_P_NI0: f64 = 0.32;
/// Default mean number of inter-transmissions.
pub const DEFAULT_E_NI: f64 = 1.0;

const FIXED_POINT_TOL: f64 = 1e-12;
const BRACKET_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CctMode {
    AlohaSlotted,
    CsmaRtsCts,
    CsmaBasic,
    TdmaRoundRobin,
}

impl From<CsmaMode> for CctMode {
    fn from(m: CsmaMode) -> Self {
        match m {
            CsmaMode::RtsCts => CctMode::CsmaRtsCts,
            CsmaMode::Basic => CctMode::CsmaBasic,
        }
    }
}

/// Additive breakdown of a CSMA/CA channel cycle time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsmaComponents {
    pub part1_mean: f64,
    pub part2_mean: f64,
    /// Expected total backoff per successful transmission.
    pub mu: f64,
    pub p_c: f64,
    pub p_ni0: f64,
    pub e_ni: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticCct {
    pub psi_slots: f64,
    pub mode: CctMode,
    pub users: usize,
    pub components: Option<CsmaComponents>,
}

fn aloha_success_probability(p_a: f64, p_b: f64) -> f64 {
    (1.0 - p_a) * p_b + (1.0 - p_b) * p_a
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name}={p} is not in [0, 1]")))
    }
}

/// Probabilities that a successful slot belongs to A and to B.
pub fn aloha_success_split(p_a: f64, p_b: f64) -> Result<(f64, f64)> {
    check_probability("p_a", p_a)?;
    check_probability("p_b", p_b)?;
    let s = aloha_success_probability(p_a, p_b);
    if s <= 0.0 {
        return Err(Error::Degenerate(format!(
            "no slot can succeed with p_a={p_a}, p_b={p_b}"
        )));
    }
    Ok(((1.0 - p_b) * p_a / s, (1.0 - p_a) * p_b / s))
}

/// Mean time between successful slots.
pub fn aloha_mean_success_time(params: &AlohaParams) -> Result<f64> {
    check_probability("p_a", params.p_a)?;
    check_probability("p_b", params.p_b)?;
    let s = aloha_success_probability(params.p_a, params.p_b);
    if s <= 0.0 {
        return Err(Error::Degenerate(format!(
            "no slot can succeed with p_a={}, p_b={}",
            params.p_a, params.p_b
        )));
    }
    Ok(params.slot.as_f64() / s)
}

/// Channel cycle time of two-user slotted Aloha.
pub fn aloha_cct(params: &AlohaParams) -> Result<AnalyticCct> {
    check_probability("p_a", params.p_a)?;
    check_probability("p_b", params.p_b)?;
    // fixed operand order keeps the result exactly symmetric under a swap
    let (a, b) = if params.p_a <= params.p_b {
        (params.p_a, params.p_b)
    } else {
        (params.p_b, params.p_a)
    };
    let denom = (1.0 - a) * (1.0 - b) * a * b;
    if denom <= 0.0 {
        return Err(Error::Degenerate(format!(
            "p_a={}, p_b={}: some user never transmits or never yields, the cycle time is infinite",
            params.p_a, params.p_b
        )));
    }
    Ok(AnalyticCct {
        psi_slots: aloha_success_probability(a, b) / denom * params.slot.as_f64(),
        mode: CctMode::AlohaSlotted,
        users: 2,
        components: None,
    })
}

/// Offered load (mean transmission attempts per slot).
pub fn aloha_offered_load(p_a: f64, p_b: f64) -> f64 {
    p_a + p_b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlohaOptimum {
    pub p_a: f64,
    pub p_b: f64,
    /// In units of one slot.
    pub psi_slots: f64,
    pub offered_load: f64,
}

/// Transmit probabilities minimising the Aloha channel cycle time. The
/// minimiser also sits at offered load 1, the throughput optimum.
pub fn aloha_optimum() -> AlohaOptimum {
    let (p_a, p_b) = (0.5, 0.5);
    let psi = aloha_cct(&AlohaParams {
        p_a,
        p_b,
        slot: Tick(1),
    })
    .expect("interior point")
    .psi_slots;
    let offered_load = aloha_offered_load(p_a, p_b);
    assert_eq!(offered_load, 1.0);
    AlohaOptimum {
        p_a,
        p_b,
        psi_slots: psi,
        offered_load,
    }
}

/// Right-hand side of the two-user collision probability fixed point.
pub fn collision_rhs(p: f64, cw_min: u32, beta: u32) -> f64 {
    let w = cw_min as f64;
    let x = 1.0 - 2.0 * p;
    2.0 * x / (x * (w + 3.0) + p * w * (1.0 - (2.0 * p).powi(beta as i32)))
}

/// Solution of the collision probability fixed point. In the two-user model
/// the per-slot transmission probability equals `p_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionFixedPoint {
    pub p_c: f64,
    pub residual: f64,
    pub iterations: u32,
}

impl CollisionFixedPoint {
    pub fn tau(&self) -> f64 {
        self.p_c
    }
}

/// Bisection on `p - rhs(p)` over `[1e-9, 0.5 - 1e-9]`.
pub fn solve_collision_probability(cw_min: u32, beta: u32) -> Result<CollisionFixedPoint> {
    if cw_min < 1 {
        return Err(Error::Domain("cw_min must be at least 1".into()));
    }
    let f = |p: f64| p - collision_rhs(p, cw_min, beta);
    let (mut lo, mut hi) = (BRACKET_EPS, 0.5 - BRACKET_EPS);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::NoRoot { cw_min, beta });
    }
    let mut iterations = 0;
    while hi - lo > f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let p_c = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    let residual = f(p_c).abs();
    if residual > FIXED_POINT_TOL {
        return Err(Error::NoRoot { cw_min, beta });
    }
    Ok(CollisionFixedPoint {
        p_c,
        residual,
        iterations,
    })
}

/// Expected total backoff spent per successful transmission, summing the mean
/// uniform draw of every backoff stage reached.
pub fn expected_backoff_sum(p_c: f64, cw_min: u32, beta: u32) -> Result<f64> {
    if !(0.0..1.0).contains(&p_c) {
        return Err(Error::Domain(format!("p_c={p_c} is not in [0, 1)")));
    }
    let mean_draw = |i: u32| (1.0 + (cw_min as f64) * 2f64.powi(i as i32)) / 2.0;
    let head: f64 = (0..beta).map(|i| p_c.powi(i as i32) * mean_draw(i)).sum();
    Ok(head + p_c.powi(beta as i32) / (1.0 - p_c) * mean_draw(beta))
}

/// Inter-transmission statistics fed into the CSMA/CA expressions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterTxInputs {
    pub p_ni0: f64,
    pub e_ni: f64,
}

impl Default for InterTxInputs {
    fn default() -> Self {
        InterTxInputs {
            p_ni0: DEFAULT_P_NI0,
            e_ni: DEFAULT_E_NI,
        }
    }
}

impl InterTxInputs {
    fn validate(&self) -> Result<()> {
        if !(self.p_ni0 > 0.0 && self.p_ni0 < 1.0) {
            return Err(Error::Domain(format!(
                "P(N_I=0)={} is not in (0, 1)",
                self.p_ni0
            )));
        }
        if !(self.e_ni >= 0.0 && self.e_ni.is_finite()) {
            return Err(Error::Domain(format!("E(N_I)={} is invalid", self.e_ni)));
        }
        Ok(())
    }
}

/// Mean number of the other user's successes in Part 1 and of the owner's
/// extra successes in Part 2.
pub fn part_count_means(p_ni0: f64, e_ni: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&p_ni0) {
        return Err(Error::Domain(format!("P(N_I=0)={p_ni0} is not in [0, 1)")));
    }
    if !(e_ni >= 0.0 && e_ni.is_finite()) {
        return Err(Error::Domain(format!("E(N_I)={e_ni} is invalid")));
    }
    Ok((e_ni / (1.0 - p_ni0), p_ni0 / (1.0 - p_ni0)))
}

/// CSMA/CA channel cycle time with the collision probability solved from the
/// fixed point.
pub fn csma_cct(params: &CsmaParams, mode: CsmaMode, inputs: InterTxInputs) -> Result<AnalyticCct> {
    params
        .validate()
        .map_err(|e| Error::Domain(e.to_string()))?;
    let fp = solve_collision_probability(params.cw_min, params.beta)?;
    csma_cct_with_pc(params, mode, fp.p_c, inputs)
}

/// CSMA/CA channel cycle time for a given collision probability.
///
/// Part 1 holds `E(n_B)` deferrals of `l_difs + hold` each, the owner's own
/// exchange and its contention attempts; Part 2 repeats the owner's exchange
/// and attempts `E(n_A')` times. In RTS/CTS mode an attempt costs
/// `l_difs + l_rcts` and a success adds `l_tran`; in basic mode an attempt
/// costs `l_difs + l_tran` and the hold is `l_tran - 1`.
pub fn csma_cct_with_pc(
    params: &CsmaParams,
    mode: CsmaMode,
    p_c: f64,
    inputs: InterTxInputs,
) -> Result<AnalyticCct> {
    inputs.validate()?;
    if !(0.0..1.0).contains(&p_c) {
        return Err(Error::Domain(format!("p_c={p_c} is not in [0, 1)")));
    }
    let difs = params.l_difs.as_f64();
    let tran = params.l_tran().as_f64();
    let (attempt, success_extra, hold) = match mode {
        CsmaMode::RtsCts => (params.l_rcts().as_f64(), tran, params.l_nav().as_f64()),
        CsmaMode::Basic => (tran, 0.0, tran - 1.0),
    };
    let mu = expected_backoff_sum(p_c, params.cw_min, params.beta)?;
    let (e_nb, e_na) = part_count_means(inputs.p_ni0, inputs.e_ni)?;
    let per_success = success_extra + (difs + attempt) / (1.0 - p_c) + mu;
    let part1_mean = e_nb * (difs + hold) + per_success;
    let part2_mean = e_na * per_success;
    Ok(AnalyticCct {
        psi_slots: part1_mean + part2_mean,
        mode: mode.into(),
        users: 2,
        components: Some(CsmaComponents {
            part1_mean,
            part2_mean,
            mu,
            p_c,
            p_ni0: inputs.p_ni0,
            e_ni: inputs.e_ni,
        }),
    })
}

/// The RTS/CTS expression specialised to `CW_max = CW_min`, written in its
/// simplified form `(2(l_difs+l_rcts)/(W+1) + (W+1)/2 + C) / (1-P)`.
pub fn csma_cct_fixed_window(params: &CsmaParams, p_ni0: f64) -> Result<f64> {
    if !(p_ni0 > 0.0 && p_ni0 < 1.0) {
        return Err(Error::Domain(format!("P(N_I=0)={p_ni0} is not in (0, 1)")));
    }
    let w = params.cw_min as f64;
    let difs = params.l_difs.as_f64();
    let rcts = params.l_rcts().as_f64();
    let c = 2.0 * difs + params.l_nav().as_f64() + rcts + params.l_tran().as_f64() + 1.0;
    Ok((2.0 * (difs + rcts) / (w + 1.0) + (w + 1.0) / 2.0 + c) / (1.0 - p_ni0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CwOptimum {
    /// Stationary point of the fixed-window expression in `CW_min`.
    pub continuous: f64,
    /// Better of the two neighbouring integers (at least 1).
    pub integer: u32,
}

/// Contention window minimising the fixed-window RTS/CTS channel cycle time.
pub fn cw_min_optimal(l_difs: Tick, l_rcts: Tick) -> Result<CwOptimum> {
    let s = (l_difs + l_rcts).as_f64();
    if l_difs.0 == 0 || l_rcts.0 == 0 {
        return Err(Error::Domain("durations must be positive".into()));
    }
    let continuous = 2.0 * s.sqrt() - 1.0;
    // only the W-dependent part of the simplified expression matters
    let g = |w: f64| 2.0 * s / (w + 1.0) + (w + 1.0) / 2.0;
    let floor = continuous.floor().max(1.0);
    let ceil = continuous.ceil().max(1.0);
    let integer = if g(floor) <= g(ceil) { floor } else { ceil };
    Ok(CwOptimum {
        continuous,
        integer: integer as u32,
    })
}

/// Packet length (in the `l_tran` sense) at which RTS/CTS and basic access
/// have equal channel cycle time.
pub fn rtscts_basic_inflection(p_c: f64, l_rcts: Tick) -> Result<f64> {
    if !(p_c > 0.0 && p_c <= 1.0) {
        return Err(Error::Domain(format!("p_c={p_c} is not in (0, 1]")));
    }
    Ok((2.0 - p_c) / p_c * l_rcts.as_f64())
}

/// Round-robin TDMA: the sum of all packet durations, which lower-bounds the
/// channel cycle time of any protocol with these packet lengths.
pub fn tdma_cct(packet_lengths: &[Tick]) -> Result<AnalyticCct> {
    if packet_lengths.is_empty() {
        return Err(Error::Empty("packet_lengths"));
    }
    if packet_lengths.iter().any(|l| l.0 == 0) {
        return Err(Error::Domain("packet lengths must be positive".into()));
    }
    Ok(AnalyticCct {
        psi_slots: packet_lengths.iter().map(|l| l.as_f64()).sum(),
        mode: CctMode::TdmaRoundRobin,
        users: packet_lengths.len(),
        components: None,
    })
}
