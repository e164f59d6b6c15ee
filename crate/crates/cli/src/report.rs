//! Aggregates result rows into per-configuration means.

use std::fs;
use std::path::Path;

use anyhow::Context;

use crate::runner::{fmt_f64, write_rows, RESULTS_FILE};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const SUMMARY_HEADER: [&str; 9] = ["init", "mixer", "mixer_spec", "schedule", "p", "count", "failed", "mean_ar", "sem_ar"];

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub init: String,
    pub mixer: String,
    pub mixer_spec: String,
    pub schedule: String,
    pub p: usize,
    pub ars: Vec<f64>,
    pub failed: usize,
}

impl SummaryRow {
    pub fn mean(&self) -> f64 {
        self.ars.iter().sum::<f64>() / self.ars.len() as f64
    }

    /// Standard error of the mean (sample standard deviation / sqrt(count)).
    pub fn sem(&self) -> f64 {
        let n = self.ars.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        let var = self.ars.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    }

    fn key(&self) -> (&str, &str, &str, &str, usize) {
        (&self.init, &self.mixer, &self.mixer_spec, &self.schedule, self.p)
    }
}

/// Groups `results.csv` rows by configuration, in order of first appearance.
pub fn summarize(results: &Path) -> anyhow::Result<Vec<SummaryRow>> {
    let mut reader = csv::Reader::from_path(results).with_context(|| format!("reading {}", results.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).with_context(|| format!("missing column {name}"));
    let (ci, cm, cs, csch, cp, car) =
        (col("init")?, col("mixer")?, col("mixer_spec")?, col("schedule")?, col("p")?, col("best_ar")?);
    let mut out: Vec<SummaryRow> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = SummaryRow {
            init: rec[ci].to_string(),
            mixer: rec[cm].to_string(),
            mixer_spec: rec[cs].to_string(),
            schedule: rec[csch].to_string(),
            p: rec[cp].parse().with_context(|| format!("row {}: bad depth", line + 2))?,
            ars: Vec::new(),
            failed: 0,
        };
        let idx = match out.iter().position(|r| r.key() == row.key()) {
            Some(i) => i,
            None => {
                out.push(row);
                out.len() - 1
            }
        };
        match rec[car].trim() {
            "" => out[idx].failed += 1,
            v => out[idx].ars.push(v.parse().with_context(|| format!("row {}: bad best_ar", line + 2))?),
        }
    }
    Ok(out)
}

/// `report`: writes `summary.csv` next to `results.csv` and returns a table.
pub fn cmd_report(out: &Path) -> anyhow::Result<String> {
    let rows = summarize(&out.join(RESULTS_FILE))?;
    write_rows(
        &out.join(SUMMARY_FILE),
        &SUMMARY_HEADER,
        rows.iter().map(|r| {
            let (mean, sem) = if r.ars.is_empty() { (String::new(), String::new()) } else { (fmt_f64(r.mean()), fmt_f64(r.sem())) };
            vec![
                r.init.clone(),
                r.mixer.clone(),
                r.mixer_spec.clone(),
                r.schedule.clone(),
                r.p.to_string(),
                r.ars.len().to_string(),
                r.failed.to_string(),
                mean,
                sem,
            ]
        }),
    )?;
    let mut table = format!("{:<14} {:<14} {:<14} {:<13} {:>4} {:>9} {:>9}\n", "init", "mixer", "spec", "schedule", "p", "mean AR", "sem");
    for r in &rows {
        table += &format!(
            "{:<14} {:<14} {:<14} {:<13} {:>4} {:>9.4} {:>9.4}\n",
            r.init, r.mixer, r.mixer_spec, r.schedule, r.p, r.mean(), r.sem()
        );
    }
    fs::write(out.join("summary.txt"), &table)?;
    Ok(table)
}
