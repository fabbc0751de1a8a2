//! Performance metrics (ACC, AUROC, AUPRC) and the four group-fairness
//! metrics (DI, SPD, AOD, EOD).
//!
//! Group metrics are always "unprivileged minus privileged" (or the ratio,
//! for DI), so a negative SPD means the unprivileged group receives fewer
//! favorable predictions.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::data::GroupAssignment;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Scores, their thresholded predictions, and the true labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    scores: Vec<f64>,
    predictions: Vec<u8>,
    labels: Vec<u8>,
}

impl PredictionSet {
    /// Thresholds `scores` at `threshold` (prediction 1 iff score ≥ threshold).
    pub fn from_scores(scores: Vec<f64>, labels: Vec<u8>, threshold: f64) -> Result<Self> {
        let predictions = scores.iter().map(|&s| u8::from(s >= threshold)).collect();
        Self::new(scores, predictions, labels)
    }

    pub fn new(scores: Vec<f64>, predictions: Vec<u8>, labels: Vec<u8>) -> Result<Self> {
        if predictions.len() != scores.len() {
            return Err(Error::LengthMismatch {
                what: "predictions",
                expected: scores.len(),
                found: predictions.len(),
            });
        }
        if labels.len() != scores.len() {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: scores.len(),
                found: labels.len(),
            });
        }
        if predictions.iter().chain(&labels).any(|&v| v > 1) {
            return Err(Error::InvalidDataset("predictions and labels must be 0 or 1".into()));
        }
        Ok(Self {
            scores,
            predictions,
            labels,
        })
    }

    /// Hard predictions only; scores mirror the predictions.
    pub fn from_predictions(predictions: Vec<u8>, labels: Vec<u8>) -> Result<Self> {
        let scores = predictions.iter().map(|&p| p as f64).collect();
        Self::new(scores, predictions, labels)
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn predictions(&self) -> &[u8] {
        &self.predictions
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Confusion counts for one side of a group assignment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GroupCounts {
    pub n: usize,
    pub predicted_positive: usize,
    pub positives: usize,
    pub true_positives: usize,
    pub negatives: usize,
    pub false_positives: usize,
}

impl GroupCounts {
    pub fn positive_rate(&self) -> f64 {
        ratio(self.predicted_positive, self.n)
    }

    /// 0 when the group has no positive labels.
    pub fn tpr(&self) -> f64 {
        ratio(self.true_positives, self.positives)
    }

    /// 0 when the group has no negative labels.
    pub fn fpr(&self) -> f64 {
        ratio(self.false_positives, self.negatives)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Confusion counts split by privileged and unprivileged side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupConfusion {
    pub unprivileged: GroupCounts,
    pub privileged: GroupCounts,
}

impl GroupConfusion {
    pub fn compute(preds: &PredictionSet, group: &GroupAssignment) -> Result<Self> {
        if group.len() != preds.len() {
            return Err(Error::LengthMismatch {
                what: "group membership",
                expected: preds.len(),
                found: group.len(),
            });
        }
        let privileged = group
            .privileged_value()
            .ok_or_else(|| Error::PrivilegedUnset(group.attribute_name().to_string()))?;
        let mut sides = [GroupCounts::default(); 2];
        for ((&m, &p), &y) in group
            .membership()
            .iter()
            .zip(preds.predictions())
            .zip(preds.labels())
        {
            let c = &mut sides[usize::from(m == privileged)];
            c.n += 1;
            c.predicted_positive += p as usize;
            if y == 1 {
                c.positives += 1;
                c.true_positives += p as usize;
            } else {
                c.negatives += 1;
                c.false_positives += p as usize;
            }
        }
        if sides[0].n == 0 || sides[1].n == 0 {
            return Err(Error::EmptyGroup(group.attribute_name().to_string()));
        }
        Ok(Self {
            unprivileged: sides[0],
            privileged: sides[1],
        })
    }

    /// Both sides have at least one positive and one negative label.
    pub fn has_full_support(&self) -> bool {
        [self.unprivileged, self.privileged]
            .iter()
            .all(|c| c.positives > 0 && c.negatives > 0)
    }

    pub fn disparate_impact(&self) -> f64 {
        let u = self.unprivileged.positive_rate();
        let p = self.privileged.positive_rate();
        if p == 0.0 {
            if u == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            u / p
        }
    }

    pub fn statistical_parity_difference(&self) -> f64 {
        self.unprivileged.positive_rate() - self.privileged.positive_rate()
    }

    pub fn average_odds_difference(&self) -> f64 {
        0.5 * ((self.unprivileged.fpr() - self.privileged.fpr())
            + (self.unprivileged.tpr() - self.privileged.tpr()))
    }

    pub fn equal_opportunity_difference(&self) -> Result<f64> {
        if self.unprivileged.positives == 0 || self.privileged.positives == 0 {
            return Err(Error::UndefinedMetric("EOD"));
        }
        Ok(self.unprivileged.tpr() - self.privileged.tpr())
    }
}

/// P(ŷ=1 | unprivileged) / P(ŷ=1 | privileged). 0/0 is 1; x/0 is +∞ ("undefined").
pub fn disparate_impact(preds: &PredictionSet, group: &GroupAssignment) -> Result<f64> {
    Ok(GroupConfusion::compute(preds, group)?.disparate_impact())
}

pub fn statistical_parity_difference(preds: &PredictionSet, group: &GroupAssignment) -> Result<f64> {
    Ok(GroupConfusion::compute(preds, group)?.statistical_parity_difference())
}

/// ½[(FPR_u − FPR_p) + (TPR_u − TPR_p)]; a rate with no support counts as 0.
pub fn average_odds_difference(preds: &PredictionSet, group: &GroupAssignment) -> Result<f64> {
    Ok(GroupConfusion::compute(preds, group)?.average_odds_difference())
}

pub fn equal_opportunity_difference(preds: &PredictionSet, group: &GroupAssignment) -> Result<f64> {
    GroupConfusion::compute(preds, group)?.equal_opportunity_difference()
}

/// DI and SPD of the labels themselves under per-row weights: the
/// dataset-level parity that reweighting targets.
pub fn weighted_label_parity(labels: &[u8], weights: &[f64], group: &GroupAssignment) -> Result<(f64, f64)> {
    if labels.len() != group.len() || weights.len() != group.len() {
        return Err(Error::LengthMismatch {
            what: "labels or weights",
            expected: group.len(),
            found: labels.len().min(weights.len()),
        });
    }
    let privileged = group
        .privileged_value()
        .ok_or_else(|| Error::PrivilegedUnset(group.attribute_name().to_string()))?;
    let mut mass = [0.0f64; 2];
    let mut favorable = [0.0f64; 2];
    for ((&m, &y), &w) in group.membership().iter().zip(labels).zip(weights) {
        let side = usize::from(m == privileged);
        mass[side] += w;
        favorable[side] += w * y as f64;
    }
    if mass[0] <= 0.0 || mass[1] <= 0.0 {
        return Err(Error::EmptyGroup(group.attribute_name().to_string()));
    }
    let (u, p) = (favorable[0] / mass[0], favorable[1] / mass[1]);
    let di = if p == 0.0 {
        if u == 0.0 { 1.0 } else { f64::INFINITY }
    } else {
        u / p
    };
    Ok((di, u - p))
}

pub fn accuracy(preds: &PredictionSet) -> f64 {
    let correct = preds
        .predictions()
        .iter()
        .zip(preds.labels())
        .filter(|(p, y)| p == y)
        .count();
    ratio(correct, preds.len())
}

fn check_scores(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidDataset("NaN score".into()));
    }
    Ok(())
}

/// Area under the ROC curve as the Mann–Whitney rank statistic, ties ½.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_scores(scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("AUROC"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of (1-based) midranks of the positives, doubled to stay integral.
    let mut twice_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let twice_midrank = (start + 1 + end) as u128;
        let pos_in_tie = order[start..end].iter().filter(|&&i| labels[i] == 1).count() as u128;
        twice_rank_sum += twice_midrank * pos_in_tie;
        start = end;
    }
    let p = n_pos as u128;
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// Average precision over the descending-score sweep, one step per distinct score.
pub fn auprc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_scores(scores, labels)?;
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    if n_pos == 0 {
        return Err(Error::UndefinedMetric("AUPRC"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        tp += order[start..end].iter().filter(|&&i| labels[i] == 1).count();
        seen += end - start;
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / seen as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        start = end;
    }
    Ok(ap)
}

/// The seven per-attribute metrics for one evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub attribute_name: String,
    pub acc: f64,
    pub auroc: f64,
    pub auprc: f64,
    #[serde(with = "float_or_undefined")]
    pub di: f64,
    pub spd: f64,
    pub aod: f64,
    pub eod: f64,
    /// Some group lacks a positive or a negative label, so AOD used a zero rate.
    pub partial_support: bool,
}

impl FairnessReport {
    pub fn compute(preds: &PredictionSet, group: &GroupAssignment) -> Result<Self> {
        let confusion = GroupConfusion::compute(preds, group)?;
        Ok(Self {
            attribute_name: group.attribute_name().to_string(),
            acc: accuracy(preds),
            auroc: auroc(preds.scores(), preds.labels())?,
            auprc: auprc(preds.scores(), preds.labels())?,
            di: confusion.disparate_impact(),
            spd: confusion.statistical_parity_difference(),
            aod: confusion.average_odds_difference(),
            eod: confusion.equal_opportunity_difference()?,
            partial_support: !confusion.has_full_support(),
        })
    }

    /// |1 − DI| + |SPD| + |AOD| + |EOD|; infinite when DI is undefined.
    pub fn unfairness(&self) -> f64 {
        (1.0 - self.di).abs() + self.spd.abs() + self.aod.abs() + self.eod.abs()
    }
}

pub(crate) fn cmp_desc_then_name(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

/// Serializes non-finite floats as the string `"undefined"`, which reads
/// back as +∞.
pub mod float_or_undefined {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str("undefined")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s == "undefined" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("expected number, got `{s}`"))),
        }
    }
}
