//! Line-oriented trace files.
//!
//! ```text
//! #slots_per_unit=30
//! #users=A+B
//! #horizon=400
//! 120,153,S,A
//! 153,159,I,
//! 200,206,C,A+B
//! ```
//!
//! Header lines start with `#` and are optional. Without `#users` the user
//! set is the order of first appearance; without `#horizon` the horizon is the
//! last event's end. Every record is `start,end,kind,users` with `kind` one of
//! `S`, `C`, `I` and `users` a `+`-joined list (empty for idle). The writer
//! always emits `#users` and `#horizon` and uses `\n` line endings.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::types::{validate_user_label, ChannelEvent, ChannelTrace, EventKind, Tick, UserSet};

pub fn write_trace<W: Write>(trace: &ChannelTrace, mut out: W) -> Result<()> {
    let mut line = String::with_capacity(64);
    if let Some(spu) = trace.slots_per_unit() {
        writeln!(out, "#slots_per_unit={spu}")?;
    }
    writeln!(out, "#users={}", trace.users().join("+"))?;
    writeln!(out, "#horizon={}", trace.horizon())?;
    for e in trace.events() {
        line.clear();
        let _ = write!(line, "{},{},{},", e.start, e.end, e.kind.code());
        for (k, u) in e.users.iter().enumerate() {
            if k > 0 {
                line.push('+');
            }
            line.push_str(&trace.users()[u]);
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn trace_to_string(trace: &ChannelTrace) -> String {
    let mut buf = Vec::new();
    write_trace(trace, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("trace output is ASCII-safe")
}

fn parse_u64(field: &str, line: usize, what: &str) -> Result<u64> {
    field.trim().parse::<u64>().map_err(|_| Error::Parse {
        line,
        msg: format!("{what} `{field}` is not a non-negative integer"),
    })
}

pub fn read_trace<R: BufRead>(input: R) -> Result<ChannelTrace> {
    let mut users: Vec<String> = Vec::new();
    let mut declared_users = false;
    let mut horizon: Option<u64> = None;
    let mut slots_per_unit = None;
    let mut events = Vec::new();
    let mut record_lines = Vec::new();

    for (i, line) in input.lines().enumerate() {
        let lineno = i + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            let Some((key, value)) = header.split_once('=') else {
                continue;
            };
            match key.trim() {
                "slots_per_unit" => {
                    let v = parse_u64(value, lineno, "slots_per_unit")?;
                    if v == 0 {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: "slots_per_unit must be positive".into(),
                        });
                    }
                    slots_per_unit = Some(v);
                }
                "users" => {
                    if !events.is_empty() {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: "#users must precede the first event".into(),
                        });
                    }
                    users = value
                        .split('+')
                        .filter(|s| !s.is_empty())
                        .map(str::to_string)
                        .collect();
                    for u in &users {
                        validate_user_label(u).map_err(|e| Error::Parse {
                            line: lineno,
                            msg: e.to_string(),
                        })?;
                    }
                    declared_users = true;
                }
                "horizon" => horizon = Some(parse_u64(value, lineno, "horizon")?),
                _ => {}
            }
            continue;
        }

        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 4 comma-separated fields, found {}", fields.len()),
            });
        }
        let start = parse_u64(fields[0], lineno, "start")?;
        let end = parse_u64(fields[1], lineno, "end")?;
        let kind = match fields[2].trim() {
            "S" => EventKind::Success,
            "C" => EventKind::Collision,
            "I" => EventKind::Idle,
            other => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("unknown event kind `{other}`"),
                })
            }
        };
        let mut set = UserSet::EMPTY;
        for label in fields[3].trim().split('+').filter(|s| !s.is_empty()) {
            let idx = match users.iter().position(|u| u == label) {
                Some(idx) => idx,
                None if declared_users => {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("user `{label}` is not in #users"),
                    })
                }
                None => {
                    validate_user_label(label).map_err(|e| Error::Parse {
                        line: lineno,
                        msg: e.to_string(),
                    })?;
                    if users.len() == UserSet::CAPACITY {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: format!("more than {} users", UserSet::CAPACITY),
                        });
                    }
                    users.push(label.to_string());
                    users.len() - 1
                }
            };
            set = set.with(idx);
        }
        record_lines.push(lineno);
        events.push(ChannelEvent {
            start: Tick(start),
            end: Tick(end),
            kind,
            users: set,
        });
    }

    let horizon = Tick(horizon.unwrap_or_else(|| events.last().map_or(0, |e| e.end.0)));
    ChannelTrace::new(users, events, horizon)
        .map(|t| t.with_slots_per_unit(slots_per_unit))
        .map_err(|e| match e {
            Error::Overlap { index } | Error::Order { index } | Error::InvalidEvent { index, .. } => {
                Error::Parse {
                    line: record_lines[index],
                    msg: e.to_string(),
                }
            }
            other => other,
        })
}

pub fn trace_from_str(s: &str) -> Result<ChannelTrace> {
    read_trace(s.as_bytes())
}
