//! Plain-text counts snapshot for resuming runs.
//!
//! ```text
//! # conrl counts v1
//! states <S>
//! actions <A>
//! resources <d>
//! episodes <k>
//! <s> <a> <N> <reward_sum> <cons_sum_0> .. <cons_sum_{d-1}> <count_0> .. <count_{S-1}>
//! ```
//!
//! One record line per `(s, a)` in row-major order. Sums are written with
//! Rust's shortest round-trip decimal formatting so a reload is bit-exact.
//! Lines starting with `#` are comments.

use std::io::{BufRead, Write};

use thiserror::Error;

use super::Counts;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Counts {
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# conrl counts v1")?;
        writeln!(out, "states {}", self.states)?;
        writeln!(out, "actions {}", self.actions)?;
        writeln!(out, "resources {}", self.resources)?;
        writeln!(out, "episodes {}", self.episodes_seen)?;
        for s in 0..self.states {
            for a in 0..self.actions {
                write!(
                    out,
                    "{s} {a} {} {}",
                    self.visits(s, a),
                    self.reward_sum(s, a)
                )?;
                for i in 0..self.resources {
                    write!(out, " {}", self.consumption_sum(s, a, i))?;
                }
                for next in 0..self.states {
                    write!(out, " {}", self.transition_count(s, a, next))?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }

    pub fn read_snapshot<R: BufRead>(input: R) -> Result<Counts, SnapshotError> {
        let mut header: [Option<u64>; 4] = [None; 4];
        let mut counts: Option<Counts> = None;
        let mut seen = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let err = |reason: String| SnapshotError::Parse {
                line: line_no,
                reason,
            };
            let fields: Vec<&str> = text.split_whitespace().collect();
            let slot = match fields[0] {
                "states" => Some(0),
                "actions" => Some(1),
                "resources" => Some(2),
                "episodes" => Some(3),
                _ => None,
            };
            if let Some(slot) = slot {
                if fields.len() != 2 {
                    return Err(err(format!("expected `{} <value>`", fields[0])));
                }
                header[slot] = Some(fields[1].parse().map_err(|e| err(format!("{e}")))?);
                continue;
            }
            if counts.is_none() {
                let [Some(s), Some(a), Some(d), Some(k)] = header else {
                    return Err(err("record before complete header".into()));
                };
                let mut c = Counts::new(s as usize, a as usize, d as usize);
                c.episodes_seen = k;
                seen = vec![false; (s * a) as usize];
                counts = Some(c);
            }
            let c = counts.as_mut().expect("initialised above");
            let expected = 4 + c.resources + c.states;
            if fields.len() != expected {
                return Err(err(format!(
                    "expected {expected} fields, found {}",
                    fields.len()
                )));
            }
            let int = |i: usize| {
                fields[i]
                    .parse::<u64>()
                    .map_err(|e| err(format!("field {}: {e}", i + 1)))
            };
            let real = |i: usize| {
                fields[i]
                    .parse::<f64>()
                    .map_err(|e| err(format!("field {}: {e}", i + 1)))
            };
            let (s, a) = (int(0)? as usize, int(1)? as usize);
            if s >= c.states || a >= c.actions {
                return Err(err(format!("pair ({s}, {a}) out of range")));
            }
            let pair = s * c.actions + a;
            if std::mem::replace(&mut seen[pair], true) {
                return Err(err(format!("duplicate record for ({s}, {a})")));
            }
            let n = int(2)?;
            c.visits[pair] = n;
            c.reward_sum[pair] = real(3)?;
            for i in 0..c.resources {
                c.consumption_sum[pair * c.resources + i] = real(4 + i)?;
            }
            let mut total = 0;
            for next in 0..c.states {
                let t = int(4 + c.resources + next)?;
                c.transitions[pair * c.states + next] = t;
                total += t;
            }
            if total != n {
                return Err(err(format!(
                    "transition counts sum to {total}, visits are {n}"
                )));
            }
            let nf = n as f64;
            if c.reward_sum[pair] < 0.0 || c.reward_sum[pair] > nf {
                return Err(err("reward sum outside [0, N]".into()));
            }
            if (0..c.resources).any(|i| {
                let v = c.consumption_sum[pair * c.resources + i];
                v < 0.0 || v > nf
            }) {
                return Err(err("consumption sum outside [0, N]".into()));
            }
        }
        let counts = counts.ok_or(SnapshotError::Parse {
            line: 0,
            reason: "no records".into(),
        })?;
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(SnapshotError::Parse {
                line: 0,
                reason: format!(
                    "missing record for ({}, {})",
                    missing / counts.actions,
                    missing % counts.actions
                ),
            });
        }
        Ok(counts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn snapshot_round_trip(steps in proptest::collection::vec((0usize..3, 0usize..2, 0.0f64..=1.0, 0.0f64..=1.0, 0usize..3), 0..60)) {
            let mut c = Counts::new(3, 2, 1);
            for (s, a, r, x, n) in steps {
                c.record_step(s, a, r, &[x], n).unwrap();
            }
            c.finish_episode();
            let mut buf = Vec::new();
            c.write_snapshot(&mut buf).unwrap();
            let back = Counts::read_snapshot(buf.as_slice()).unwrap();
            prop_assert_eq!(back, c);
        }
    }

    #[test]
    fn rejects_inconsistent_records() {
        let text = "states 2\nactions 1\nresources 0\nepisodes 1\n0 0 3 1.0 1 1\n1 0 0 0 0 0\n";
        let err = Counts::read_snapshot(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 5"), "{err}");
        let text = "states 1\nactions 1\nresources 0\nepisodes 1\n";
        assert!(Counts::read_snapshot(text.as_bytes()).is_err());
    }
}
