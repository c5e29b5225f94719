//! Number formatting and table emission.

use std::path::Path;

use anyhow::{Context, Result};

/// Three significant digits in scientific notation with a two-digit exponent (`4.77e-02`);
/// `nan` for missing or non-finite values.
pub fn sci3(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => {
            let s = format!("{v:.2e}");
            let (mant, exp) = s.split_once('e').expect("scientific format");
            let exp: i32 = exp.parse().expect("exponent");
            let sign = if exp < 0 { '-' } else { '+' };
            format!("{mant}e{sign}{:02}", exp.abs())
        }
        _ => "nan".into(),
    }
}

/// Three significant digits in fixed notation (`1.96`, `0.970`, `12.3`); `nan` when missing.
pub fn fix3(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => {
            if v == 0.0 {
                return "0.00".into();
            }
            let mag = v.abs().log10().floor() as i32;
            if !(-3..3).contains(&mag) {
                return sci3(Some(v));
            }
            let decimals = (2 - mag).max(0) as usize;
            format!("{v:.decimals$}")
        }
        _ => "nan".into(),
    }
}

/// Full precision for CSV (17 significant digits); `nan` when missing.
pub fn full(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v:.16e}"),
        Some(v) if v.is_nan() => "nan".into(),
        Some(v) => format!("{v}"),
        None => "nan".into(),
    }
}

/// `1/m` when `τ` is the reciprocal of an integer, else three significant digits.
pub fn tau_label(tau: f64) -> String {
    let m = 1.0 / tau;
    let r = m.round();
    if r >= 1.0 && (m - r).abs() <= 1e-9 * r {
        format!("1/{}", r as u64)
    } else {
        sci3(Some(tau))
    }
}

/// One table in both renderings; CSV and Markdown cells come from the same numbers.
pub struct Table {
    pub title: String,
    pub csv_header: Vec<String>,
    pub md_header: Vec<String>,
    pub csv_rows: Vec<Vec<String>>,
    pub md_rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(title: &str, columns: &[(&str, &str)]) -> Self {
        Self {
            title: title.into(),
            csv_header: columns.iter().map(|c| c.0.to_string()).collect(),
            md_header: columns.iter().map(|c| c.1.to_string()).collect(),
            csv_rows: Vec::new(),
            md_rows: Vec::new(),
        }
    }

    pub fn push(&mut self, csv: Vec<String>, md: Vec<String>) {
        debug_assert_eq!(csv.len(), self.csv_header.len());
        debug_assert_eq!(md.len(), self.md_header.len());
        self.csv_rows.push(csv);
        self.md_rows.push(md);
    }

    pub fn markdown(&self) -> String {
        let mut s = format!("### {}\n\n", self.title);
        s += &format!("| {} |\n", self.md_header.join(" | "));
        s += &format!("|{}\n", "---|".repeat(self.md_header.len()));
        for r in &self.md_rows {
            s += &format!("| {} |\n", r.join(" | "));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .with_context(|| format!("cannot write {}", path.display()))?;
        w.write_record(&self.csv_header)?;
        for r in &self.csv_rows {
            w.write_record(r)?;
        }
        w.flush().with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }
}
