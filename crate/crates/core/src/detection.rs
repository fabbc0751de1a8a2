//! Sensitive-attribute detection.
//!
//! Each candidate column is binarized at its mean, oriented by base rate, and
//! scored on DI, SPD, AOD and EOD against a fixed set of predictions. Columns
//! in the top N of all four rankings are reported as sensitive.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::{binarize_by_mean, set_privileged, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{cmp_desc_then_name, float_or_undefined, GroupConfusion, PredictionSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    pub top_n: usize,
    /// All feature columns when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate_columns: Option<Vec<String>>,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            top_n: 20,
            candidate_columns: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedColumn {
    pub column: String,
    #[serde(with = "float_or_undefined")]
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricRankings {
    pub di: Vec<RankedColumn>,
    pub spd: Vec<RankedColumn>,
    pub aod: Vec<RankedColumn>,
    pub eod: Vec<RankedColumn>,
}

impl MetricRankings {
    pub fn all(&self) -> [&[RankedColumn]; 4] {
        [&self.di, &self.spd, &self.aod, &self.eod]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedColumn {
    pub column: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub top_n: usize,
    pub rankings: MetricRankings,
    /// Sorted by column name.
    pub intersection: Vec<String>,
    pub skipped: Vec<SkippedColumn>,
}

struct ColumnScores {
    column: String,
    di: f64,
    spd: f64,
    aod: f64,
    eod: f64,
}

fn score_column(dataset: &Dataset, preds: &PredictionSet, column: &str) -> Result<ColumnScores> {
    let group = binarize_by_mean(dataset, column)?;
    let group = set_privileged(group, dataset)?;
    let c = GroupConfusion::compute(preds, &group)?;
    let di = c.disparate_impact();
    Ok(ColumnScores {
        column: column.to_string(),
        // undefined DI is infinite, which ranks first
        di: if di.is_finite() { (1.0 - di).abs() } else { f64::INFINITY },
        spd: c.statistical_parity_difference().abs(),
        aod: c.average_odds_difference().abs(),
        eod: c.equal_opportunity_difference()?.abs(),
    })
}

fn rank(scored: &[ColumnScores], key: impl Fn(&ColumnScores) -> f64) -> Vec<RankedColumn> {
    let mut ranked: Vec<RankedColumn> = scored
        .iter()
        .map(|s| RankedColumn {
            column: s.column.clone(),
            score: key(s),
        })
        .collect();
    ranked.sort_by(|a, b| cmp_desc_then_name((&a.column, a.score), (&b.column, b.score)));
    ranked
}

pub fn detect(dataset: &Dataset, baseline: &PredictionSet, config: &DetectionConfig) -> Result<DetectionResult> {
    if config.top_n == 0 {
        return Err(Error::InvalidConfig("top_n must be at least 1".into()));
    }
    if baseline.len() != dataset.n_rows() {
        return Err(Error::LengthMismatch {
            what: "baseline predictions",
            expected: dataset.n_rows(),
            found: baseline.len(),
        });
    }
    let candidates: Vec<String> = match &config.candidate_columns {
        Some(cols) => {
            for c in cols {
                dataset.column_index(c)?;
            }
            cols.clone()
        }
        None => dataset.column_names().to_vec(),
    };

    let mut scored = Vec::new();
    let mut skipped = Vec::new();
    for column in &candidates {
        match score_column(dataset, baseline, column) {
            Ok(s) => scored.push(s),
            Err(e @ (Error::DegenerateAttribute(_) | Error::EmptyGroup(_) | Error::UndefinedMetric(_))) => {
                skipped.push(SkippedColumn {
                    column: column.clone(),
                    reason: e.to_string(),
                })
            }
            Err(e) => return Err(e),
        }
    }
    if scored.is_empty() {
        return Err(Error::NoDetectableAttributes);
    }

    let rankings = MetricRankings {
        di: rank(&scored, |s| s.di),
        spd: rank(&scored, |s| s.spd),
        aod: rank(&scored, |s| s.aod),
        eod: rank(&scored, |s| s.eod),
    };
    let intersection = top_n_intersection(&rankings, config.top_n);
    Ok(DetectionResult {
        top_n: config.top_n,
        rankings,
        intersection,
        skipped,
    })
}

fn top_n_intersection(rankings: &MetricRankings, top_n: usize) -> Vec<String> {
    let prefixes: Vec<BTreeSet<&str>> = rankings
        .all()
        .iter()
        .map(|r| r.iter().take(top_n).map(|c| c.column.as_str()).collect())
        .collect();
    prefixes[0]
        .iter()
        .filter(|c| prefixes[1..].iter().all(|p| p.contains(*c)))
        .map(|c| c.to_string())
        .collect()
}
