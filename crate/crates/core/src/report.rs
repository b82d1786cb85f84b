//! Results tables as CSV, JSON and aligned text.
//!
//! Rows are sorted by overall accuracy, highest first, and followed by an
//! `Avg Accuracy` line holding the column means of the per-class accuracies
//! (its `acc` cell is left empty).

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cipher::{CipherLabel, NUM_CLASSES};
use crate::corpus::write_atomic;
use crate::error::{Error, Result};
use crate::metrics::ResultRow;

pub const CSV_HEADER: &str = "model,level,subs,trans,t_rev,chr_s,w_rev,original,acc";
pub const AVERAGE_LABEL: &str = "Avg Accuracy";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub rows: Vec<ResultRow>,
    pub average: [f64; NUM_CLASSES],
}

impl Report {
    pub fn new(rows: &[ResultRow]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("a report needs at least one row".into()));
        }
        let mut rows = rows.to_vec();
        rows.sort_by(|a, b| b.acc.total_cmp(&a.acc));
        Ok(Report {
            average: column_means(&rows),
            rows,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{}", csv_field(&row.model), csv_field(&row.level));
            for v in row.per_class {
                let _ = write!(out, ",{v:.4}");
            }
            let _ = writeln!(out, ",{:.4}", row.acc);
        }
        out.push_str(AVERAGE_LABEL);
        out.push(',');
        for v in self.average {
            let _ = write!(out, ",{v:.4}");
        }
        out.push_str(",\n");
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(json: &str, source_name: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::format(source_name, Some(e.line()), e.to_string()))
    }

    /// Fixed-width table for terminal output.
    pub fn to_text(&self) -> String {
        let mut headers = vec!["Model", "Level"];
        headers.extend(CipherLabel::ALL.iter().map(|c| c.column()));
        headers.push("acc");
        let mut cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut line = vec![r.model.clone(), r.level.clone()];
                line.extend(r.per_class.iter().map(|v| format!("{v:.4}")));
                line.push(format!("{:.4}", r.acc));
                line
            })
            .collect();
        let mut avg = vec![AVERAGE_LABEL.to_string(), String::new()];
        avg.extend(self.average.iter().map(|v| format!("{v:.4}")));
        avg.push(String::new());
        cells.push(avg);

        let widths: Vec<usize> = (0..headers.len())
            .map(|c| cells.iter().map(|l| l[c].len()).chain([headers[c].len()]).max().unwrap_or(0))
            .collect();
        let render = |line: &[String]| {
            let mut s = String::new();
            for (c, cell) in line.iter().enumerate() {
                if c > 0 {
                    s.push_str("  ");
                }
                if c < 2 {
                    let _ = write!(s, "{cell:<w$}", w = widths[c]);
                } else {
                    let _ = write!(s, "{cell:>w$}", w = widths[c]);
                }
            }
            s.trim_end().to_string()
        };
        let header: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
        let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1));
        let mut out = String::new();
        let _ = writeln!(out, "{}", render(&header));
        let _ = writeln!(out, "{rule}");
        for (i, line) in cells.iter().enumerate() {
            if i + 1 == cells.len() {
                let _ = writeln!(out, "{rule}");
            }
            let _ = writeln!(out, "{}", render(line));
        }
        out
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        write_atomic(&dir.join(format!("{stem}.csv")), self.to_csv().as_bytes())?;
        write_atomic(&dir.join(format!("{stem}.json")), self.to_json().as_bytes())
    }
}

fn column_means(rows: &[ResultRow]) -> [f64; NUM_CLASSES] {
    let mut sums = [0.0; NUM_CLASSES];
    for row in rows {
        for (s, v) in sums.iter_mut().zip(row.per_class) {
            *s += v;
        }
    }
    sums.map(|s| s / rows.len() as f64)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
