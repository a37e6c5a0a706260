//! Shared vocabulary: slot-granular time, protocol parameter bundles and the
//! channel trace that simulators produce and metrics consume.
//!
//! All times are integer multiples of one slot. Microsecond values only exist
//! at the boundary (see [`SlotClock`]).

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in time or a duration, in whole slots.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Tick(pub u64);

impl Tick {
    pub const ZERO: Tick = Tick(0);

    pub fn get(self) -> u64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }
}

impl Add for Tick {
    type Output = Tick;
    fn add(self, rhs: Tick) -> Tick {
        Tick(self.0 + rhs.0)
    }
}

impl AddAssign for Tick {
    fn add_assign(&mut self, rhs: Tick) {
        self.0 += rhs.0;
    }
}

impl Sub for Tick {
    type Output = Tick;
    fn sub(self, rhs: Tick) -> Tick {
        Tick(self.0 - rhs.0)
    }
}

impl fmt::Display for Tick {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Conversion between slots and microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotClock {
    micros_per_slot: u64,
}

impl SlotClock {
    /// 20 µs per slot.
    pub const DEFAULT_MICROS_PER_SLOT: u64 = 20;

    pub fn new(micros_per_slot: u64) -> Result<Self> {
        if micros_per_slot == 0 {
            return Err(Error::InvalidParam("micros_per_slot must be positive".into()));
        }
        Ok(SlotClock { micros_per_slot })
    }

    pub fn micros_per_slot(&self) -> u64 {
        self.micros_per_slot
    }

    /// Converts a microsecond duration to slots. Values that are not a whole
    /// number of slots are rejected.
    pub fn to_slots(&self, micros: u64) -> Result<Tick> {
        if !micros.is_multiple_of(self.micros_per_slot) {
            return Err(Error::InvalidParam(format!(
                "{micros} us is not a multiple of the {} us slot",
                self.micros_per_slot
            )));
        }
        Ok(Tick(micros / self.micros_per_slot))
    }

    pub fn to_micros(&self, t: Tick) -> u64 {
        t.0 * self.micros_per_slot
    }

    pub fn slots_to_micros_f64(&self, slots: f64) -> f64 {
        slots * self.micros_per_slot as f64
    }
}

impl Default for SlotClock {
    fn default() -> Self {
        SlotClock {
            micros_per_slot: Self::DEFAULT_MICROS_PER_SLOT,
        }
    }
}

/// Per-slot transmit probabilities of the two slotted-Aloha users. The slot
/// length equals the packet length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlohaParams {
    pub p_a: f64,
    pub p_b: f64,
    pub slot: Tick,
}

impl AlohaParams {
    pub fn new(p_a: f64, p_b: f64, slot: Tick) -> Result<Self> {
        let params = AlohaParams { p_a, p_b, slot };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_a", self.p_a), ("p_b", self.p_b)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParam(format!("{name}={p} is not in [0, 1]")));
            }
        }
        if self.slot.0 < 1 {
            return Err(Error::InvalidParam("slot must be at least one tick".into()));
        }
        Ok(())
    }
}

/// Whether contention winners run the RTS/CTS handshake before the data frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CsmaMode {
    RtsCts,
    Basic,
}

impl CsmaMode {
    pub fn label(self) -> &'static str {
        match self {
            CsmaMode::RtsCts => "csma-rtscts",
            CsmaMode::Basic => "csma-basic",
        }
    }
}

/// CSMA/CA timing and contention-window parameters, all durations in slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsmaParams {
    pub cw_min: u32,
    /// Number of doublings, so `CW_max = 2^beta * cw_min`.
    pub beta: u32,
    pub l_difs: Tick,
    pub l_pkt: Tick,
    pub l_ack: Tick,
    pub l_rts: Tick,
    pub l_cts: Tick,
}

impl CsmaParams {
    pub fn new(
        cw_min: u32,
        beta: u32,
        l_difs: Tick,
        l_pkt: Tick,
        l_ack: Tick,
        l_rts: Tick,
        l_cts: Tick,
    ) -> Result<Self> {
        let p = CsmaParams {
            cw_min,
            beta,
            l_difs,
            l_pkt,
            l_ack,
            l_rts,
            l_cts,
        };
        p.validate()?;
        Ok(p)
    }

    /// Reference setting: CW_min 32, CW_max 1024, DIFS 4 slots, ACK/RTS/CTS one
    /// slot each, with the given packet length.
    pub fn reference(l_pkt: Tick) -> Self {
        CsmaParams {
            cw_min: 32,
            beta: 5,
            l_difs: Tick(4),
            l_pkt,
            l_ack: Tick(1),
            l_rts: Tick(1),
            l_cts: Tick(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cw_min < 1 {
            return Err(Error::InvalidParam("cw_min must be at least 1".into()));
        }
        // 2^beta * cw_min must fit comfortably in a u32 counter
        if self.beta > 20 || (self.cw_min as u64) << self.beta > u32::MAX as u64 / 2 {
            return Err(Error::InvalidParam(format!(
                "CW_max = 2^{} * {} is too large",
                self.beta, self.cw_min
            )));
        }
        for (name, d) in [
            ("l_difs", self.l_difs),
            ("l_pkt", self.l_pkt),
            ("l_ack", self.l_ack),
            ("l_rts", self.l_rts),
            ("l_cts", self.l_cts),
        ] {
            if d.0 < 1 {
                return Err(Error::InvalidParam(format!("{name} must be at least one slot")));
            }
        }
        Ok(())
    }

    pub fn cw_max(&self) -> u32 {
        self.cw_min << self.beta
    }

    /// Contention window after `stage` collisions.
    pub fn cw(&self, stage: u32) -> u32 {
        self.cw_min << stage.min(self.beta)
    }

    /// Data frame plus its ACK.
    pub fn l_tran(&self) -> Tick {
        self.l_pkt + self.l_ack
    }

    /// RTS plus CTS.
    pub fn l_rcts(&self) -> Tick {
        self.l_rts + self.l_cts
    }

    /// Deferral of the contention loser in RTS/CTS mode: the winner's exchange
    /// minus the one slot in which the loser still counts down.
    pub fn l_nav(&self) -> Tick {
        self.l_tran() + self.l_rcts() - Tick(1)
    }

    /// Channel occupancy of a successful exchange.
    pub fn success_airtime(&self, mode: CsmaMode) -> Tick {
        match mode {
            CsmaMode::RtsCts => self.l_rcts() + self.l_tran(),
            CsmaMode::Basic => self.l_tran(),
        }
    }

    /// Channel occupancy of a collision.
    pub fn collision_airtime(&self, mode: CsmaMode) -> Tick {
        match mode {
            CsmaMode::RtsCts => self.l_rcts(),
            CsmaMode::Basic => self.l_tran(),
        }
    }

    /// How long the contention loser stays frozen after the slot in which the
    /// winner started transmitting (`l_nav` or `l_tran - 1`).
    pub fn hold(&self, mode: CsmaMode) -> Tick {
        self.success_airtime(mode) - Tick(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Success,
    Collision,
    Idle,
}

impl EventKind {
    pub fn code(self) -> char {
        match self {
            EventKind::Success => 'S',
            EventKind::Collision => 'C',
            EventKind::Idle => 'I',
        }
    }
}

/// Set of user indices into [`ChannelTrace::users`], as a bitmask.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UserSet(u32);

impl UserSet {
    /// Traces support at most this many users.
    pub const CAPACITY: usize = 32;

    pub const EMPTY: UserSet = UserSet(0);

    pub fn single(index: usize) -> Self {
        assert!(index < Self::CAPACITY, "user index {index} out of range");
        UserSet(1 << index)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        indices
            .into_iter()
            .fold(UserSet::EMPTY, |s, i| s.with(i))
    }

    pub fn with(self, index: usize) -> Self {
        UserSet(self.0 | UserSet::single(index).0)
    }

    pub fn contains(self, index: usize) -> bool {
        index < Self::CAPACITY && self.0 & (1 << index) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// The lowest member, if any.
    pub fn first(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..Self::CAPACITY).filter(move |&i| self.contains(i))
    }

    pub fn bits(self) -> u32 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChannelEvent {
    pub start: Tick,
    pub end: Tick,
    pub kind: EventKind,
    pub users: UserSet,
}

impl ChannelEvent {
    pub fn success(start: Tick, end: Tick, user: usize) -> Self {
        ChannelEvent {
            start,
            end,
            kind: EventKind::Success,
            users: UserSet::single(user),
        }
    }

    pub fn collision(start: Tick, end: Tick, users: UserSet) -> Self {
        ChannelEvent {
            start,
            end,
            kind: EventKind::Collision,
            users,
        }
    }

    pub fn idle(start: Tick, end: Tick) -> Self {
        ChannelEvent {
            start,
            end,
            kind: EventKind::Idle,
            users: UserSet::EMPTY,
        }
    }

    pub fn duration(&self) -> Tick {
        self.end - self.start
    }

    pub fn is_success(&self) -> bool {
        self.kind == EventKind::Success
    }

    /// The transmitting user of a success event.
    pub fn sole_user(&self) -> Option<usize> {
        match self.kind {
            EventKind::Success => self.users.first(),
            _ => None,
        }
    }
}

/// A time-ordered, non-overlapping record of channel activity.
///
/// Construct through [`ChannelTrace::new`], which validates every invariant;
/// afterwards the trace is immutable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTrace {
    users: Vec<String>,
    events: Vec<ChannelEvent>,
    horizon: Tick,
    slots_per_unit: Option<u64>,
}

/// A user label may not contain the trace-file delimiters or whitespace.
pub fn validate_user_label(label: &str) -> Result<()> {
    let bad = label.is_empty()
        || label == "collision"
        || label
            .chars()
            .any(|c| c == ',' || c == '+' || c == '#' || c == '|' || c == '=' || c.is_whitespace());
    if bad {
        Err(Error::InvalidUser(label.to_string()))
    } else {
        Ok(())
    }
}

impl ChannelTrace {
    pub fn new(users: Vec<String>, events: Vec<ChannelEvent>, horizon: Tick) -> Result<Self> {
        let trace = ChannelTrace {
            users,
            events,
            horizon,
            slots_per_unit: None,
        };
        trace.validate()?;
        Ok(trace)
    }

    /// Builds a trace from parts already known to be valid, as simulators do.
    /// Debug builds still check.
    pub(crate) fn from_parts_unchecked(
        users: Vec<String>,
        events: Vec<ChannelEvent>,
        horizon: Tick,
    ) -> Self {
        let trace = ChannelTrace {
            users,
            events,
            horizon,
            slots_per_unit: None,
        };
        debug_assert_eq!(trace.validate(), Ok(()));
        trace
    }

    pub fn with_slots_per_unit(mut self, slots_per_unit: Option<u64>) -> Self {
        self.slots_per_unit = slots_per_unit;
        self
    }

    /// Checks every trace invariant, reporting the first violation.
    pub fn validate(&self) -> Result<()> {
        if self.users.len() > UserSet::CAPACITY {
            return Err(Error::InvalidParam(format!(
                "at most {} users are supported",
                UserSet::CAPACITY
            )));
        }
        for (i, u) in self.users.iter().enumerate() {
            validate_user_label(u)?;
            if self.users[..i].contains(u) {
                return Err(Error::InvalidParam(format!("duplicate user `{u}`")));
            }
        }
        let known = if self.users.len() == UserSet::CAPACITY {
            u32::MAX
        } else {
            (1u32 << self.users.len()) - 1
        };
        let mut prev: Option<&ChannelEvent> = None;
        for (index, e) in self.events.iter().enumerate() {
            if e.start >= e.end {
                return Err(Error::InvalidEvent {
                    index,
                    reason: format!("start {} is not before end {}", e.start, e.end),
                });
            }
            let n = e.users.len();
            let arity_ok = match e.kind {
                EventKind::Success => n == 1,
                EventKind::Collision => n >= 2,
                EventKind::Idle => n == 0,
            };
            if !arity_ok {
                return Err(Error::InvalidEvent {
                    index,
                    reason: format!("{:?} event with {n} users", e.kind),
                });
            }
            if e.users.bits() & !known != 0 {
                let idx = (e.users.bits() & !known).trailing_zeros();
                return Err(Error::UnknownUser(format!("#{idx}")));
            }
            if let Some(p) = prev {
                if e.start < p.start {
                    return Err(Error::Order { index });
                }
                if e.start < p.end {
                    return Err(Error::Overlap { index });
                }
            }
            if e.end > self.horizon {
                return Err(Error::InvalidEvent {
                    index,
                    reason: format!("ends at {} after horizon {}", e.end, self.horizon),
                });
            }
            prev = Some(e);
        }
        Ok(())
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn events(&self) -> &[ChannelEvent] {
        &self.events
    }

    pub fn horizon(&self) -> Tick {
        self.horizon
    }

    pub fn slots_per_unit(&self) -> Option<u64> {
        self.slots_per_unit
    }

    pub fn user_index(&self, user: &str) -> Result<usize> {
        self.users
            .iter()
            .position(|u| u == user)
            .ok_or_else(|| Error::UnknownUser(user.to_string()))
    }

    /// Success events of `user`, in trace order.
    pub fn successes_of(&self, user: &str) -> Result<Vec<&ChannelEvent>> {
        let idx = self.user_index(user)?;
        Ok(self
            .events
            .iter()
            .filter(|e| e.is_success() && e.users.contains(idx))
            .collect())
    }

    /// All success events in trace order.
    pub fn successes(&self) -> impl Iterator<Item = &ChannelEvent> + '_ {
        self.events.iter().filter(|e| e.is_success())
    }

    /// Drops every event that starts before `t`. Used to discard warm-up.
    pub fn since(&self, t: Tick) -> ChannelTrace {
        let first = self.events.partition_point(|e| e.start < t);
        ChannelTrace {
            users: self.users.clone(),
            events: self.events[first..].to_vec(),
            horizon: self.horizon,
            slots_per_unit: self.slots_per_unit,
        }
    }
}
