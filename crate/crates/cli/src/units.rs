//! Duration and range arguments.

use std::str::FromStr;

use cct_core::{SlotClock, Tick};

/// A duration as typed: slots by default, microseconds with a `us` suffix.
/// Conversion waits until the slot clock is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Duration {
    Slots(u64),
    Micros(u64),
}

impl FromStr for Duration {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (digits, micros) = match s.strip_suffix("us") {
            Some(d) => (d.trim_end(), true),
            None => (s, false),
        };
        let v: u64 = digits
            .parse()
            .map_err(|_| format!("`{s}` is not a duration (slots, or microseconds with `us`)"))?;
        Ok(if micros {
            Duration::Micros(v)
        } else {
            Duration::Slots(v)
        })
    }
}

impl Duration {
    pub fn to_slots(self, clock: &SlotClock) -> cct_core::Result<Tick> {
        match self {
            Duration::Slots(v) => Ok(Tick(v)),
            Duration::Micros(v) => clock.to_slots(v),
        }
    }
}

/// `start:end:step` (inclusive) or a comma-separated list.
#[derive(Debug, Clone, PartialEq)]
pub struct Range(pub Vec<f64>);

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{t}` is not a number"))
        };
        let parts: Vec<&str> = s.split(':').collect();
        let values = match parts.as_slice() {
            [start, end, step] => {
                let (start, end, step) = (num(start)?, num(end)?, num(step)?);
                if step.is_nan() || step <= 0.0 || end < start {
                    return Err(format!("`{s}` needs start <= end and a positive step"));
                }
                let n = ((end - start) / step + 1e-9).floor() as usize;
                // rounding keeps 0.1-style steps free of representation noise
                (0..=n)
                    .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
                    .collect()
            }
            [_] => s.split(',').map(num).collect::<Result<_, _>>()?,
            _ => return Err(format!("`{s}` is neither start:end:step nor a list")),
        };
        Ok(Range(values))
    }
}

impl Range {
    pub fn as_u64(&self, what: &str) -> Result<Vec<u64>, String> {
        self.0
            .iter()
            .map(|&v| {
                if v >= 0.0 && v.fract() == 0.0 {
                    Ok(v as u64)
                } else {
                    Err(format!("{what} value {v} is not a non-negative integer"))
                }
            })
            .collect()
    }
}
