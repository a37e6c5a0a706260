//! Serializable summary of a trace analysis, as key-value text or JSON.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiment::attempt_collision_probability;
use crate::metrics;
use crate::types::{ChannelTrace, Tick};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserAnalysis {
    pub user: String,
    pub cycle_samples: usize,
    pub cycle_mean_slots: Option<f64>,
    pub intertx_samples: usize,
    pub collision_probability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub refresh_moments: Option<Vec<Tick>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cycle_times: Option<Vec<Tick>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceAnalysis {
    pub psi_slots: Option<f64>,
    pub psi_undefined: bool,
    pub users_without_samples: Vec<String>,
    pub horizon_slots: Tick,
    pub throughput: f64,
    pub intertx_pmf: BTreeMap<u64, f64>,
    pub intertx_mean: Option<f64>,
    pub users: Vec<UserAnalysis>,
}

impl TraceAnalysis {
    /// With `detail`, per-user refresh moments and cycle times are included.
    pub fn from_trace(trace: &ChannelTrace, detail: bool) -> Result<Self> {
        let cct = metrics::channel_cycle_time(trace)?;
        let itx = metrics::inter_transmission_report(trace);
        let collisions = attempt_collision_probability(trace);
        let users = cct
            .per_user
            .iter()
            .zip(&itx.per_user_counts)
            .zip(collisions)
            .map(|((c, (_, counts)), coll)| {
                Ok(UserAnalysis {
                    user: c.user.clone(),
                    cycle_samples: c.samples.len(),
                    cycle_mean_slots: c.mean,
                    intertx_samples: counts.len(),
                    collision_probability: coll,
                    refresh_moments: if detail {
                        Some(metrics::refresh_moments(trace, &c.user)?)
                    } else {
                        None
                    },
                    cycle_times: detail.then(|| c.samples.clone()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TraceAnalysis {
            psi_slots: cct.psi,
            psi_undefined: cct.psi.is_none(),
            users_without_samples: cct.users_without_samples,
            horizon_slots: trace.horizon(),
            throughput: metrics::throughput(trace),
            intertx_pmf: itx.pooled_pmf,
            intertx_mean: itx.mean,
            users,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    /// One `key=value` per line; per-user blocks start at `user=`.
    pub fn to_kv(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
        }
        fn ticks(v: &[Tick]) -> String {
            v.iter().map(Tick::to_string).collect::<Vec<_>>().join(" ")
        }
        let mut s = String::new();
        let _ = writeln!(s, "psi_slots={}", opt(self.psi_slots));
        let _ = writeln!(s, "psi_undefined={}", self.psi_undefined);
        let _ = writeln!(s, "users_without_samples={}", self.users_without_samples.join(" "));
        let _ = writeln!(s, "horizon_slots={}", self.horizon_slots);
        let _ = writeln!(s, "throughput={}", self.throughput);
        let pmf: Vec<String> = self
            .intertx_pmf
            .iter()
            .map(|(k, p)| format!("{k}:{p}"))
            .collect();
        let _ = writeln!(s, "intertx_pmf={}", pmf.join(","));
        let _ = writeln!(s, "intertx_mean={}", opt(self.intertx_mean));
        for u in &self.users {
            let _ = writeln!(s, "user={}", u.user);
            let _ = writeln!(s, "cycle_samples={}", u.cycle_samples);
            let _ = writeln!(s, "cycle_mean_slots={}", opt(u.cycle_mean_slots));
            let _ = writeln!(s, "intertx_samples={}", u.intertx_samples);
            let _ = writeln!(s, "collision_probability={}", opt(u.collision_probability));
            if let Some(r) = &u.refresh_moments {
                let _ = writeln!(s, "refresh_moments={}", ticks(r));
            }
            if let Some(c) = &u.cycle_times {
                let _ = writeln!(s, "cycle_times={}", ticks(c));
            }
        }
        s
    }
}
