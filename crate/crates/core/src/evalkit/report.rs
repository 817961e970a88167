//! Tabular reports written as CSV plus one JSON record per row.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::bench::BenchTable;
use super::stats::{BootstrapSummary, EnsemblePercentiles};

/// RMSD in Å rendered as integer milli-Ångström.
pub fn fmt_rmsd_milli(rmsd: f64) -> String {
    format!("{:.0}", rmsd * 1000.0)
}

/// pLDDT in [0, 1] rendered on the 0 to 100 scale with one decimal.
pub fn fmt_plddt(plddt: f64) -> String {
    format!("{:.1}", plddt * 100.0)
}

pub fn fmt_rate(rate: f64) -> String {
    format!("{:.2}", rate * 100.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    /// One JSON object per row, keyed by column name.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let obj: Map<String, Value> = self.columns.iter().cloned().zip(r.iter().cloned().map(Value::String)).collect();
            out.push_str(&Value::Object(obj).to_string());
            out.push('\n');
        }
        out
    }
}

/// Writes `<name>.csv` and `<name>.jsonl` for each table into `dir`.
pub fn emit_report(tables: &[Table], dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for t in tables {
        let csv = dir.join(format!("{}.csv", t.name));
        fs::write(&csv, t.to_csv())?;
        let jsonl = dir.join(format!("{}.jsonl", t.name));
        fs::write(&jsonl, t.to_jsonl())?;
        written.extend([csv, jsonl]);
    }
    Ok(written)
}

/// Per-prompt rows followed by an `all` row.
pub fn bench_table(b: &BenchTable) -> Table {
    let mut t = Table::new(
        &format!("bench_{}", b.syntax.as_str()),
        &["model", "syntax", "prompt", "generations", "syntactic", "successes", "success_rate"],
    );
    let row = |prompt: &str, n: usize, syn: usize, ok: usize, rate: f64| {
        vec![b.model.clone(), b.syntax.as_str().into(), prompt.into(), n.to_string(), syn.to_string(), ok.to_string(), fmt_rate(rate)]
    };
    for r in &b.rows {
        t.push(row(&r.prompt_id, r.generations, r.syntactic, r.successes, r.rate()));
    }
    let syn = b.rows.iter().map(|r| r.syntactic).sum();
    t.push(row("all", b.total(), syn, b.successes(), b.success_rate()));
    t
}

/// One row per trial step.
pub fn percentile_table(rows: &[(String, usize, Option<EnsemblePercentiles>)]) -> Table {
    let mut t = Table::new("percentiles", &["trial", "step", "rmsd_p5_mA", "plddt_p95", "n_kept"]);
    for (trial, step, p) in rows {
        let cells = match p {
            Some(p) => vec![fmt_rmsd_milli(p.rmsd_p5), fmt_plddt(p.plddt_p95), p.n_kept.to_string()],
            None => vec!["".into(), "".into(), "0".into()],
        };
        let mut row = vec![trial.clone(), step.to_string()];
        row.extend(cells);
        t.push(row);
    }
    t
}

/// Bootstrap summaries; RMSD-like metrics in mÅ, pLDDT on 0 to 100.
pub fn bootstrap_table(rows: &[(String, BootstrapSummary)]) -> Table {
    let mut t = Table::new("bootstrap", &["metric", "median", "ci95_low", "ci95_high"]);
    for (metric, s) in rows {
        let f = |x: f64| if metric.starts_with("plddt") { fmt_plddt(x) } else { fmt_rmsd_milli(x) };
        t.push(vec![metric.clone(), f(s.median), f(s.ci95_low), f(s.ci95_high)]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_table_precision() {
        assert_eq!(format!("{}, {}", fmt_rmsd_milli(0.571), fmt_plddt(0.927)), "571, 92.7");
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new("x", &["a", "b"]);
        assert_eq!(t.to_csv(), "a,b\n");
        assert_eq!(t.to_jsonl(), "");
    }

    #[test]
    fn cells_with_commas_are_quoted() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(vec!["1,2".into(), "3".into()]);
        assert_eq!(t.to_csv(), "a,b\n\"1,2\",3\n");
        assert_eq!(t.to_jsonl(), "{\"a\":\"1,2\",\"b\":\"3\"}\n");
    }
}
