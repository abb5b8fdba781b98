//! Per-sample trace and its CSV form.
//!
//! ```text
//! # specfilter trace prng=chacha8 seed=42
//! n,u,load,g,node,primary_id,y_primary,y_spec,cores,events
//! 0,0.0000000000000000e0,...,F2_ONLY,2,...,,2,SCALE_RESOURCES(1);RUN_THREAD(2);ACTIVATE_THREAD(2)
//! ```
//!
//! Floats carry 17 significant digits so a parse returns the same bits.
//! `y_spec` is empty when only the primary runs. Leading `#` lines are
//! metadata.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::filter::FilterId;
use crate::switching::{CommandKind, LifecycleCommand, Node};

pub const CSV_HEADER: &str = "n,u,load,g,node,primary_id,y_primary,y_spec,cores,events";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub n: u64,
    pub u: f64,
    pub load: f64,
    pub g: f64,
    pub node: Node,
    pub primary_id: FilterId,
    pub y_primary: f64,
    /// Output of the non-primary live worker (speculative or doomed).
    pub y_spec: Option<f64>,
    pub cores: u32,
    pub events: Vec<LifecycleCommand>,
}

impl SampleRecord {
    fn bitwise_eq(&self, other: &Self) -> bool {
        let b = f64::to_bits;
        self.n == other.n
            && b(self.u) == b(other.u)
            && b(self.load) == b(other.load)
            && b(self.g) == b(other.g)
            && self.node == other.node
            && self.primary_id == other.primary_id
            && b(self.y_primary) == b(other.y_primary)
            && self.y_spec.map(b) == other.y_spec.map(b)
            && self.cores == other.cores
            && self.events == other.events
    }
}

/// Provenance written as the CSV comment line.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TraceMeta {
    pub label: Option<String>,
    pub prng: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleTrace {
    pub meta: TraceMeta,
    pub records: Vec<SampleRecord>,
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

impl SampleTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Field-for-field equality with floats compared by bit pattern.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| a.bitwise_eq(b))
    }

    /// Index of the first record that differs, if any.
    pub fn first_difference(&self, other: &Self) -> Option<usize> {
        let common = self.records.len().min(other.records.len());
        (0..common)
            .find(|&i| !self.records[i].bitwise_eq(&other.records[i]))
            .or_else(|| (self.records.len() != other.records.len()).then_some(common))
    }

    pub fn primary_output(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.y_primary).collect()
    }

    /// Samples with two filters running.
    pub fn overlap_samples(&self) -> usize {
        self.records.iter().filter(|r| r.y_spec.is_some()).count()
    }

    pub fn events(&self) -> impl Iterator<Item = &LifecycleCommand> {
        self.records.iter().flat_map(|r| r.events.iter())
    }

    /// Samples where the primary filter changed.
    pub fn switch_instants(&self) -> Vec<u64> {
        self.records.windows(2).filter(|w| w[0].primary_id != w[1].primary_id).map(|w| w[1].n).collect()
    }

    /// Zero-state spawns after the initial primary.
    pub fn respawns(&self) -> usize {
        self.events().filter(|c| matches!(c.kind, CommandKind::RunThread(_))).count().saturating_sub(1)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut comment = String::from("# specfilter trace");
        if let Some(label) = &self.meta.label {
            comment.push_str(&format!(" label={label}"));
        }
        if let Some(prng) = &self.meta.prng {
            comment.push_str(&format!(" prng={prng}"));
        }
        if let Some(seed) = self.meta.seed {
            comment.push_str(&format!(" seed={seed}"));
        }
        writeln!(w, "{comment}")?;
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.records {
            let events: Vec<String> = r.events.iter().map(|c| c.to_string()).collect();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                r.n,
                float(r.u),
                float(r.load),
                float(r.g),
                r.node,
                r.primary_id,
                float(r.y_primary),
                r.y_spec.map(float).unwrap_or_default(),
                r.cores,
                events.join(";")
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("trace CSV is ASCII")
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<SampleTrace, TraceError> {
        let mut trace = SampleTrace::default();
        let mut seen_header = false;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let err = |msg: String| TraceError::Parse { line: lineno, msg };
            if let Some(comment) = line.strip_prefix('#') {
                for kv in comment.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("label", v)) => trace.meta.label = Some(v.to_string()),
                        Some(("prng", v)) => trace.meta.prng = Some(v.to_string()),
                        Some(("seed", v)) => {
                            trace.meta.seed = Some(v.parse().map_err(|_| err(format!("bad seed {v}")))?)
                        }
                        _ => {}
                    }
                }
                continue;
            }
            if !seen_header {
                if line != CSV_HEADER {
                    return Err(err(format!("expected header `{CSV_HEADER}`")));
                }
                seen_header = true;
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 10 {
                return Err(err(format!("expected 10 columns, got {}", cols.len())));
            }
            let f = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad float `{s}`")));
            let n: u64 = cols[0].parse().map_err(|_| err(format!("bad index `{}`", cols[0])))?;
            let events = if cols[9].is_empty() {
                Vec::new()
            } else {
                cols[9]
                    .split(';')
                    .map(|e| parse_command(e, n).ok_or_else(|| err(format!("bad event `{e}`"))))
                    .collect::<Result<_, _>>()?
            };
            trace.records.push(SampleRecord {
                n,
                u: f(cols[1])?,
                load: f(cols[2])?,
                g: f(cols[3])?,
                node: Node::parse(cols[4]).ok_or_else(|| err(format!("bad node `{}`", cols[4])))?,
                primary_id: FilterId(cols[5].parse().map_err(|_| err(format!("bad id `{}`", cols[5])))?),
                y_primary: f(cols[6])?,
                y_spec: if cols[7].is_empty() { None } else { Some(f(cols[7])?) },
                cores: cols[8].parse().map_err(|_| err(format!("bad cores `{}`", cols[8])))?,
                events,
            });
        }
        Ok(trace)
    }
}

fn parse_command(s: &str, n: u64) -> Option<LifecycleCommand> {
    let (name, rest) = s.split_once('(')?;
    let arg = rest.strip_suffix(')')?;
    let id = |a: &str| a.parse().ok().map(FilterId);
    let kind = match name {
        "RUN_THREAD" => CommandKind::RunThread(id(arg)?),
        "ACTIVATE_THREAD" => CommandKind::ActivateThread(id(arg)?),
        "CANCEL_KILL" => CommandKind::CancelKill(id(arg)?),
        "KILL_THREAD" => {
            let (target, deadline) = arg.split_once('@')?;
            CommandKind::KillThread { target: id(target)?, deadline: deadline.parse().ok()? }
        }
        "SCALE_RESOURCES" => CommandKind::ScaleResources(arg.parse().ok()?),
        _ => return None,
    };
    Some(LifecycleCommand { n, kind })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(n: u64, u: f64, y: f64, spec: Option<f64>, events: Vec<CommandKind>) -> SampleRecord {
        SampleRecord {
            n,
            u,
            load: 0.5,
            g: -u,
            node: if spec.is_some() { Node::F2PredictF1 } else { Node::F2Only },
            primary_id: FilterId(2),
            y_primary: y,
            y_spec: spec,
            cores: if spec.is_some() { 3 } else { 2 },
            events: events.into_iter().map(|kind| LifecycleCommand { n, kind }).collect(),
        }
    }

    #[test]
    fn csv_layout() {
        let trace = SampleTrace {
            meta: TraceMeta { label: Some("spec30".into()), prng: Some("chacha8".into()), seed: Some(7) },
            records: vec![
                record(0, 0.0, 0.0, None, vec![CommandKind::ScaleResources(1), CommandKind::RunThread(FilterId(2))]),
                record(1, 0.25, 1.5, Some(-0.125), vec![CommandKind::KillThread { target: FilterId(1), deadline: 4 }]),
            ],
        };
        let csv = trace.to_csv_string();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# specfilter trace label=spec30 prng=chacha8 seed=7");
        assert_eq!(lines[1], CSV_HEADER);
        assert_eq!(
            lines[2],
            "0,0.0000000000000000e0,5.0000000000000000e-1,-0.0000000000000000e0,F2_ONLY,2,0.0000000000000000e0,,2,SCALE_RESOURCES(1);RUN_THREAD(2)"
        );
        assert!(lines[3].ends_with(",-1.2500000000000000e-1,3,KILL_THREAD(1@4)"));
        let back = SampleTrace::read_csv(csv.as_bytes()).unwrap();
        assert!(back.bitwise_eq(&trace));
        assert_eq!(back.meta, trace.meta);
    }

    #[test]
    fn rejects_malformed_rows() {
        assert!(SampleTrace::read_csv("n,u\n".as_bytes()).is_err());
        let bad = format!("{CSV_HEADER}\n0,1,2,3,F9,1,0,,2,\n");
        assert!(matches!(SampleTrace::read_csv(bad.as_bytes()), Err(TraceError::Parse { line: 2, .. })));
    }

    #[test]
    fn first_difference_finds_divergence() {
        let a = SampleTrace { meta: TraceMeta::default(), records: vec![record(0, 1.0, 1.0, None, vec![]); 3] };
        let mut b = a.clone();
        b.records[2].y_primary = f64::from_bits(1.0f64.to_bits() + 1);
        assert_eq!(a.first_difference(&b), Some(2));
        assert_eq!(a.first_difference(&a), None);
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(
            rows in proptest::collection::vec((any::<f64>(), any::<f64>(), proptest::option::of(any::<f64>())), 1..40)
        ) {
            prop_assume!(rows.iter().all(|(u, y, s)| u.is_finite() && y.is_finite() && s.is_none_or(f64::is_finite)));
            let trace = SampleTrace {
                meta: TraceMeta::default(),
                records: rows.iter().enumerate().map(|(n, &(u, y, s))| record(n as u64, u, y, s, vec![])).collect(),
            };
            let back = SampleTrace::read_csv(trace.to_csv_string().as_bytes()).unwrap();
            prop_assert!(back.bitwise_eq(&trace));
        }
    }
}
