//! Measured left/right-hand sides of an inequality, with CSV and JSON export.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One evaluated instance of an inequality `lhs <= rhs` (or `lhs >= rhs` for
/// lower bounds; the caller decides `pass`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub x: f64,
    pub y: f64,
    pub y_prime: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl BoundRow {
    /// Row for `lhs >= rhs`.
    pub fn lower(x: f64, y: f64, y_prime: Option<f64>, lhs: f64, rhs: f64) -> Self {
        BoundRow {
            x,
            y,
            y_prime,
            lhs,
            rhs,
            pass: lhs >= rhs,
        }
    }

    pub fn upper(x: f64, y: f64, y_prime: Option<f64>, lhs: f64, rhs: f64) -> Self {
        BoundRow {
            x,
            y,
            y_prime,
            lhs,
            rhs,
            pass: lhs <= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// The inequality being checked, written out as a formula.
    pub check: String,
    pub rows: Vec<BoundRow>,
    pub metrics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub pass: bool,
}

impl BoundReport {
    pub fn new(check: impl Into<String>) -> Self {
        BoundReport {
            check: check.into(),
            rows: Vec::new(),
            metrics: BTreeMap::new(),
            notes: Vec::new(),
            pass: true,
        }
    }

    pub fn push(&mut self, row: BoundRow) {
        self.pass &= row.pass;
        self.rows.push(row);
    }

    pub fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn fail(&mut self) {
        self.pass = false;
    }

    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.pass).count()
    }

    /// Largest `lhs / rhs` over rows with a positive right-hand side.
    pub fn worst_ratio(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.rhs > 0.0)
            .map(|r| r.lhs / r.rhs)
            .fold(0.0, f64::max)
    }

    /// Folds another report's rows into this one.
    pub fn absorb(&mut self, other: BoundReport) {
        self.pass &= other.pass;
        self.rows.extend(other.rows);
    }

    pub fn write_csv<W: Write>(&self, mut out: W, violations_only: bool) -> Result<()> {
        writeln!(out, "# check: {}", self.check)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "y_prime", "lhs", "rhs", "pass"])?;
        for r in self.rows.iter().filter(|r| !violations_only || !r.pass) {
            w.write_record([
                fmt_f64(r.x),
                fmt_f64(r.y),
                r.y_prime.map(fmt_f64).unwrap_or_default(),
                fmt_f64(r.lhs),
                fmt_f64(r.rhs),
                r.pass.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// JSON summary; rows are omitted when `with_rows` is false.
    pub fn to_json(&self, with_rows: bool) -> Result<String> {
        if with_rows {
            return Ok(serde_json::to_string_pretty(self)?);
        }
        let summary = serde_json::json!({
            "check": self.check,
            "samples": self.rows.len(),
            "violations": self.violations(),
            "worst_ratio": self.worst_ratio(),
            "metrics": self.metrics,
            "notes": self.notes,
            "pass": self.pass,
        });
        Ok(serde_json::to_string_pretty(&summary)?)
    }
}

/// Shortest round-trip representation, so reports are byte-stable.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        assert!((loglog_slope(&xs, &ys) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn failed_row_fails_report() {
        let mut r = BoundReport::new("a <= b");
        r.push(BoundRow::upper(0.0, 1.0, None, 1.0, 2.0));
        assert!(r.pass);
        r.push(BoundRow::upper(0.0, 1.0, None, 3.0, 2.0));
        assert!(!r.pass);
        assert_eq!(r.violations(), 1);
        assert_eq!(r.worst_ratio(), 1.5);
    }

    #[test]
    fn csv_starts_with_check_line() {
        let mut r = BoundReport::new("|K| <= 1/|y-x|");
        r.push(BoundRow::upper(0.0, 2.0, Some(2.5), 0.1, 0.25));
        let mut buf = Vec::new();
        r.write_csv(&mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# check: |K| <= 1/|y-x|\nx,y,y_prime,lhs,rhs,pass\n"));
        assert!(text.contains("0.0,2.0,2.5,0.1,0.25,true"));
    }
}
