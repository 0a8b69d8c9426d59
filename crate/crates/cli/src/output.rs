//! Writing reports to disk or stdout.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};
use unhinged::Result;

use crate::svg::Plot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Plots keep at most this many points per series so files stay small.
pub const MAX_PLOT_POINTS: usize = 1000;

/// Everything one subcommand produces.
#[derive(Debug, Clone)]
pub struct Report {
    pub name: &'static str,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Same rows as structured data, for `--format json`.
    pub records: Value,
    pub summary: Value,
    pub plot: Option<Plot>,
    pub claim_holds: bool,
}

impl Report {
    pub fn new(name: &'static str, header: &[&str]) -> Self {
        Self {
            name,
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            records: Value::Array(Vec::new()),
            summary: Value::Null,
            plot: None,
            claim_holds: true,
        }
    }

    pub fn with_records<T: Serialize>(mut self, records: &T) -> Self {
        self.records = serde_json::to_value(records).expect("records serialize");
        self
    }

    pub fn with_summary<T: Serialize>(mut self, summary: &T) -> Self {
        self.summary = serde_json::to_value(summary).expect("summary serializes");
        self
    }

    pub fn csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn json(&self) -> String {
        let doc = json!({ "summary": self.summary, "rows": self.records });
        serde_json::to_string_pretty(&doc).expect("json value serializes") + "\n"
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("json value serializes") + "\n"
    }

    /// Writes `<name>.csv` + `<name>_summary.json` (or a single `<name>.json`)
    /// and, with `plot`, `<name>.svg` into `out_dir`. Without a directory the
    /// main document goes to `stdout` (CSV mode leaves the summary to the caller).
    pub fn emit(&self, out_dir: Option<&Path>, format: Format, plot: bool, stdout: &mut dyn Write) -> Result<()> {
        let main = match format {
            Format::Csv => self.csv()?,
            Format::Json => self.json(),
        };
        match out_dir {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                match format {
                    Format::Csv => {
                        fs::write(dir.join(format!("{}.csv", self.name)), &main)?;
                        fs::write(dir.join(format!("{}_summary.json", self.name)), self.summary_json())?;
                    }
                    Format::Json => fs::write(dir.join(format!("{}.json", self.name)), &main)?,
                }
                if plot {
                    if let Some(p) = &self.plot {
                        fs::write(dir.join(format!("{}.svg", self.name)), p.render())?;
                    }
                }
            }
            None => stdout.write_all(main.as_bytes())?,
        }
        Ok(())
    }
}

/// Shortest round-trip representation, so outputs are reproducible bit for bit.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Evenly thins `points` to at most [`MAX_PLOT_POINTS`], keeping both ends.
pub fn thin(points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let n = points.len();
    if n <= MAX_PLOT_POINTS {
        return points;
    }
    let stride = n.div_ceil(MAX_PLOT_POINTS - 1);
    let mut out: Vec<(f64, f64)> = points.iter().step_by(stride).copied().collect();
    if !(n - 1).is_multiple_of(stride) {
        out.push(points[n - 1]);
    }
    out
}
