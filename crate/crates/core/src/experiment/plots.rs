//! Plot-ready data files.
//!
//! Each file is tab-separated text. Leading `#` lines describe the content,
//! then comes one header row and one row per sample. A `t` column (seconds)
//! follows `n` when a sample rate is given; it is a label only.
//!
//! * `outputs.tsv`: input and primary output of every noiseless run, plus a
//!   `switch` column that is 1 on rows where the benchmark changes filter.
//! * `errors.tsv`: `|y - y_benchmark|` of every noiseless run.
//! * `hysteresis.tsv`: noisy scenario, switching function, outputs and
//!   errors of each run.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use super::suite::{ScenarioReport, SuiteReport};

struct Table {
    title: String,
    columns: Vec<(String, Vec<f64>)>,
}

impl Table {
    fn render(&self, len: usize, sample_rate: Option<f64>, markers: &BTreeSet<u64>) -> String {
        let mut out = format!("# {}\n", self.title);
        let mut header = vec!["n".to_string()];
        if sample_rate.is_some() {
            header.push("t".into());
        }
        header.extend(self.columns.iter().map(|(name, _)| name.clone()));
        if !markers.is_empty() {
            header.push("switch".into());
        }
        let _ = writeln!(out, "{}", header.join("\t"));
        for n in 0..len {
            let mut row = vec![n.to_string()];
            if let Some(fs) = sample_rate {
                row.push(format!("{:.9e}", n as f64 / fs));
            }
            row.extend(self.columns.iter().map(|(_, v)| format!("{:.16e}", v[n])));
            if !markers.is_empty() {
                row.push(if markers.contains(&(n as u64)) { "1" } else { "0" }.into());
            }
            let _ = writeln!(out, "{}", row.join("\t"));
        }
        out
    }
}

fn error_columns(s: &ScenarioReport) -> Vec<(String, Vec<f64>)> {
    let bench = s.benchmark().trace.primary_output();
    s.runs
        .iter()
        .filter(|r| r.label != s.benchmark().label)
        .map(|r| {
            let err = r.trace.primary_output().iter().zip(&bench).map(|(a, b)| (a - b).abs()).collect();
            (format!("err_{}", r.label), err)
        })
        .collect()
}

fn output_columns(s: &ScenarioReport) -> Vec<(String, Vec<f64>)> {
    s.runs.iter().map(|r| (format!("y_{}", r.label), r.trace.primary_output())).collect()
}

/// Write the data files for the scenarios present in `report`.
pub fn emit_plots(report: &SuiteReport, dir: &Path, sample_rate: Option<f64>) -> io::Result<Vec<PathBuf>> {
    if report.scenarios.iter().all(|s| s.runs.is_empty()) {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "no traces to plot"));
    }
    let mut written = Vec::new();
    let mut write = |name: &str, body: String| -> io::Result<()> {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };

    if let Some(clean) = report.scenario("clean") {
        let bench = &clean.benchmark().trace;
        let markers: BTreeSet<u64> = bench.switch_instants().into_iter().collect();
        let mut columns = vec![("u".to_string(), bench.records.iter().map(|r| r.u).collect())];
        columns.extend(output_columns(clean));
        let t = Table { title: "primary output per strategy; switch=1 marks a benchmark switch".into(), columns };
        write("outputs.tsv", t.render(bench.len(), sample_rate, &markers))?;

        let t = Table { title: "absolute output error against the benchmark".into(), columns: error_columns(clean) };
        write("errors.tsv", t.render(bench.len(), sample_rate, &markers))?;
    }

    if let Some(noisy) = report.scenario("noisy") {
        let bench = &noisy.benchmark().trace;
        let markers: BTreeSet<u64> = bench.switch_instants().into_iter().collect();
        let mut columns = vec![("g".to_string(), bench.records.iter().map(|r| r.g).collect())];
        columns.extend(output_columns(noisy));
        columns.extend(error_columns(noisy));
        let t = Table { title: "noisy switching function, with and without hysteresis".into(), columns };
        write("hysteresis.tsv", t.render(bench.len(), sample_rate, &markers))?;
    }
    Ok(written)
}
