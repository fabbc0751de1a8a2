//! Experiment reports: JSON for machines, a fixed-width table for people.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::float_or_undefined;
use crate::reweight::LevelWeightConfig;

/// One (condition, evaluated attribute) row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Index into [`ExperimentReport::runs`].
    pub run_index: usize,
    pub method: String,
    pub sensitive_attributes: String,
    pub evaluated_attribute: String,
    pub acc: f64,
    pub auroc: f64,
    pub auprc: f64,
    #[serde(with = "float_or_undefined")]
    pub di: f64,
    pub spd: f64,
    pub aod: f64,
    pub eod: f64,
    pub partial_support: bool,
    /// DI of the favorable label on the training split under the training weights.
    #[serde(with = "float_or_undefined")]
    pub train_label_di: f64,
    pub train_label_spd: f64,
}

impl ReportRow {
    /// |1 − DI| + |SPD| + |AOD| + |EOD|
    pub fn unfairness(&self) -> f64 {
        (1.0 - self.di).abs() + self.spd.abs() + self.aod.abs() + self.eod.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub method: String,
    pub sensitive_attributes: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub level_weights: Option<LevelWeightConfig>,
    pub seed: u64,
    pub config_hash: String,
    pub n_train: usize,
    pub n_test: usize,
    pub converged: bool,
    pub iterations: usize,
    pub final_loss: f64,
    pub prior_mass: f64,
    pub weight_mass: f64,
    /// Largest weighted favorable-rate deviation across the groups the
    /// method balanced; absent for the unweighted baseline.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub balance_gap: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub runs: Vec<RunMetadata>,
}

impl ExperimentReport {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Appends another report's runs and rows, renumbering run indices.
    pub fn append(&mut self, other: ExperimentReport) {
        let offset = self.runs.len();
        self.runs.extend(other.runs);
        self.rows.extend(other.rows.into_iter().map(|mut r| {
            r.run_index += offset;
            r
        }));
    }

    /// Rows of one evaluated attribute.
    pub fn rows_for<'a>(&'a self, attribute: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.evaluated_attribute == attribute)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Table laid out like a results table: the method, attributes and
    /// performance columns are printed once per condition.
    pub fn to_table(&self) -> String {
        const HEADER: [&str; 10] = ["Method", "SA", "EA", "ACC", "AUROC", "AUPRC", "DI", "SPD", "AOD", "EOD"];
        let mut cells: Vec<[String; 10]> = Vec::with_capacity(self.rows.len());
        let mut prev_run = None;
        for r in &self.rows {
            let first = prev_run != Some(r.run_index);
            prev_run = Some(r.run_index);
            let shared = |s: String| if first { s } else { String::new() };
            cells.push([
                shared(r.method.clone()),
                shared(r.sensitive_attributes.clone()),
                r.evaluated_attribute.clone(),
                shared(fmt_metric(r.acc)),
                shared(fmt_metric(r.auroc)),
                shared(fmt_metric(r.auprc)),
                fmt_metric(r.di),
                fmt_metric(r.spd),
                fmt_metric(r.aod),
                fmt_metric(r.eod),
            ]);
        }
        let widths: Vec<usize> = (0..HEADER.len())
            .map(|j| {
                cells
                    .iter()
                    .map(|c| c[j].chars().count())
                    .chain(std::iter::once(HEADER[j].len()))
                    .max()
                    .unwrap_or(0)
            })
            .collect();

        let mut out = String::new();
        let line = |out: &mut String, row: &[String]| {
            let mut s = String::new();
            for (j, cell) in row.iter().enumerate() {
                if j > 0 {
                    s.push_str("  ");
                }
                // text columns left-aligned, numbers right-aligned
                if j < 3 {
                    let _ = write!(s, "{cell:<w$}", w = widths[j]);
                } else {
                    let _ = write!(s, "{cell:>w$}", w = widths[j]);
                }
            }
            out.push_str(s.trim_end());
            out.push('\n');
        };
        line(&mut out, &HEADER.map(String::from));
        let rule: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
        out.push_str(&"-".repeat(rule));
        out.push('\n');
        for row in &cells {
            line(&mut out, row);
        }
        out
    }
}

fn fmt_metric(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "undefined".to_string()
    }
}

/// Writes `<path>.json` and `<path>.txt`, returning both paths.
pub fn emit_report(report: &ExperimentReport, path: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let base = path.as_ref();
    let json_path = base.with_extension("json");
    let txt_path = base.with_extension("txt");
    if let Some(dir) = base.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(&json_path, report.to_json()?).map_err(|e| Error::io(&json_path, e))?;
    std::fs::write(&txt_path, report.to_table()).map_err(|e| Error::io(&txt_path, e))?;
    Ok((json_path, txt_path))
}
