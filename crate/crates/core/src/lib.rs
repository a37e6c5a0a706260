//! Channel cycle time toolkit.
//!
//! Channel cycle time measures short-term fairness of a multiple-access
//! channel: the mean time between two successes of a user during which every
//! other user has succeeded at least once, averaged over users.
//!
//! * [`types`] and [`trace_io`]: slot-granular traces and their file format.
//! * [`metrics`]: refresh moments, cycle times, Ψ, inter-transmission counts.
//! * [`analytic`]: closed forms for slotted Aloha, CSMA/CA and TDMA.
//! * [`sim`]: seeded simulators emitting traces.
//! * [`experiment`]: seed replication and parameter sweeps.

pub mod analytic;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod report;
pub mod sim;
pub mod stats;
pub mod trace_io;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    AlohaParams, ChannelEvent, ChannelTrace, CsmaMode, CsmaParams, EventKind, SlotClock, Tick,
    UserSet,
};
