//! Experiment orchestration: load → split → binarize → reweight → fit →
//! evaluate, plus the level-weight grid search.

use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    binarize_at, column_mean, load_csv_with, set_privileged, split_indices, Dataset, GroupAssignment,
    LoadOptions, SplitSpec,
};
use crate::detection::{detect, DetectionConfig, DetectionResult};
use crate::error::{Error, Result, Stage, StageExt};
use crate::metrics::{weighted_label_parity, FairnessReport};
use crate::model::{fit, predict, TrainConfig};
use crate::report::{ExperimentReport, ReportRow, RunMetadata};
use crate::reweight::{
    compute_sensitivity_levels, m3fair, max_balance_gap, reweight_sequential, reweight_single_attribute,
    LevelWeightConfig, SampleWeights,
};

/// Mitigation applied to the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    /// Unit weights.
    None,
    RwSingle { attribute: String },
    /// Reweight by each attribute in order (`A->B`).
    RwSequential { order: Vec<String> },
    /// Simultaneous reweighting over sensitivity levels (`[A, B]`).
    M3fair { level_weights: LevelWeightConfig },
}

impl Method {
    /// Label used in the Method column.
    pub fn label(&self) -> &'static str {
        match self {
            Method::None => "/",
            Method::RwSingle { .. } | Method::RwSequential { .. } => "RW",
            Method::M3fair { .. } => "M3Fair",
        }
    }

    fn attributes(&self) -> Vec<&str> {
        match self {
            Method::None => Vec::new(),
            Method::RwSingle { attribute } => vec![attribute.as_str()],
            Method::RwSequential { order } => order.iter().map(String::as_str).collect(),
            Method::M3fair { level_weights } => level_weights.iter().map(|(a, _)| a).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: LoadOptions,
    #[serde(default)]
    pub split: SplitSpec,
    /// Columns evaluated as sensitive attributes (after one-hot encoding).
    pub sensitive_attributes: Vec<String>,
    pub method: Method,
    /// Short names for attributes in reports, e.g. `"sex=Male": "Sex"`.
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub attribute_labels: IndexMap<String, String>,
    #[serde(default)]
    pub detection: DetectionConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_path: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Reads a JSON config. Relative dataset and report paths are resolved
    /// against the config file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: Self = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if config.dataset.path.is_relative() {
            config.dataset.path = base.join(&config.dataset.path);
        }
        if let Some(report) = config.report_path.as_mut().filter(|p| p.is_relative()) {
            *report = base.join(&*report);
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sensitive_attributes.is_empty() {
            return Err(Error::InvalidConfig("no sensitive attributes".into()));
        }
        for (i, a) in self.sensitive_attributes.iter().enumerate() {
            if self.sensitive_attributes[..i].contains(a) {
                return Err(Error::InvalidConfig(format!("sensitive attribute `{a}` listed twice")));
            }
        }
        if let Method::RwSequential { order } = &self.method {
            if order.is_empty() {
                return Err(Error::InvalidConfig("rw_sequential needs a non-empty order".into()));
            }
        }
        for a in self.method.attributes() {
            if !self.sensitive_attributes.iter().any(|s| s == a) {
                return Err(Error::InvalidConfig(format!(
                    "method attribute `{a}` is not among the sensitive attributes"
                )));
            }
        }
        Ok(())
    }

    fn display(&self, attribute: &str) -> String {
        self.attribute_labels
            .get(attribute)
            .cloned()
            .unwrap_or_else(|| attribute.to_string())
    }

    /// Sensitive-attribute column of the report: `/`, `A`, `A->B` or `[A, B]`.
    pub fn sensitive_label(&self) -> String {
        match &self.method {
            Method::None => "/".to_string(),
            Method::RwSingle { attribute } => self.display(attribute),
            Method::RwSequential { order } => {
                order.iter().map(|a| self.display(a)).collect::<Vec<_>>().join("->")
            }
            Method::M3fair { level_weights } => format!(
                "[{}]",
                level_weights.iter().map(|(a, _)| self.display(a)).collect::<Vec<_>>().join(", ")
            ),
        }
    }

    /// SHA-256 of the config's canonical JSON.
    pub fn hash(&self) -> Result<String> {
        let json = serde_json::to_vec(self)?;
        Ok(Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Train and evaluation splits with the sensitive attributes binarized at
/// the training means.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub train: Dataset,
    pub eval: Dataset,
    pub train_groups: Vec<GroupAssignment>,
    pub eval_groups: Vec<GroupAssignment>,
}

impl PreparedSplit {
    pub fn new(train: Dataset, eval: Dataset, attributes: &[String]) -> Result<Self> {
        let mut train_groups = Vec::with_capacity(attributes.len());
        let mut eval_groups = Vec::with_capacity(attributes.len());
        for a in attributes {
            let threshold = column_mean(&train, a)?;
            let g = set_privileged(binarize_at(&train, a, threshold)?, &train)?;
            let privileged = g.privileged_value().unwrap_or(1);
            eval_groups.push(binarize_at(&eval, a, threshold)?.with_privileged(privileged)?);
            train_groups.push(g);
        }
        Ok(Self {
            train,
            eval,
            train_groups,
            eval_groups,
        })
    }

    fn train_group(&self, attribute: &str) -> Result<&GroupAssignment> {
        self.train_groups
            .iter()
            .find(|g| g.attribute_name() == attribute)
            .ok_or_else(|| Error::MissingAssignment(attribute.to_string()))
    }
}

/// Loads the dataset and applies the configured train/test split.
pub fn load_and_split(config: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let data = load_csv_with(&config.dataset).stage(Stage::Load)?;
    let (train, test) = split_indices(data.n_rows(), &config.split).stage(Stage::Split)?;
    Ok((data.select_rows(&train), data.select_rows(&test)))
}

/// Training weights for `method`, plus the largest balance gap over the
/// partition the method equalised last.
pub fn method_weights(method: &Method, split: &PreparedSplit) -> Result<(SampleWeights, Option<f64>)> {
    let labels = split.train.labels();
    let prior = SampleWeights::uniform(labels.len());
    let membership = |g: &GroupAssignment| -> Vec<u32> { g.membership().iter().map(|&m| m as u32).collect() };
    Ok(match method {
        Method::None => (prior, None),
        Method::RwSingle { attribute } => {
            let g = split.train_group(attribute)?;
            let w = reweight_single_attribute(labels, g, &prior)?;
            let gap = max_balance_gap(labels, &membership(g), &w);
            (w, Some(gap))
        }
        Method::RwSequential { order } => {
            let groups = order
                .iter()
                .map(|a| split.train_group(a).cloned())
                .collect::<Result<Vec<_>>>()?;
            let w = reweight_sequential(labels, &groups, &prior)?;
            let last = groups.last().expect("validated non-empty");
            let gap = max_balance_gap(labels, &membership(last), &w);
            (w, Some(gap))
        }
        Method::M3fair { level_weights } => {
            let w = m3fair(labels, &split.train_groups, level_weights, &prior)?;
            let levels = compute_sensitivity_levels(&split.train_groups, level_weights)?;
            let gap = max_balance_gap(labels, &levels.levels, &w);
            (w, Some(gap))
        }
    })
}

/// Fits on `split.train` with the method's weights and evaluates every
/// sensitive attribute on `split.eval`.
pub fn evaluate_condition(config: &ExperimentConfig, split: &PreparedSplit) -> Result<ExperimentReport> {
    let (weights, balance_gap) = method_weights(&config.method, split).stage(Stage::Reweight)?;
    let model = fit(&split.train, &weights, &config.train).stage(Stage::Fit)?;
    let preds = predict(&model, &split.eval).stage(Stage::Evaluate)?;

    let method = config.method.label().to_string();
    let sensitive = config.sensitive_label();
    let mut rows = Vec::with_capacity(config.sensitive_attributes.len());
    for (train_group, eval_group) in split.train_groups.iter().zip(&split.eval_groups) {
        let m = FairnessReport::compute(&preds, eval_group).stage(Stage::Evaluate)?;
        let (train_label_di, train_label_spd) =
            weighted_label_parity(split.train.labels(), weights.as_slice(), train_group).stage(Stage::Evaluate)?;
        rows.push(ReportRow {
            run_index: 0,
            method: method.clone(),
            sensitive_attributes: sensitive.clone(),
            evaluated_attribute: config.display(train_group.attribute_name()),
            acc: m.acc,
            auroc: m.auroc,
            auprc: m.auprc,
            di: m.di,
            spd: m.spd,
            aod: m.aod,
            eod: m.eod,
            partial_support: m.partial_support,
            train_label_di,
            train_label_spd,
        });
    }
    let run = RunMetadata {
        method,
        sensitive_attributes: sensitive,
        level_weights: match &config.method {
            Method::M3fair { level_weights } => Some(level_weights.clone()),
            _ => None,
        },
        seed: config.split.seed,
        config_hash: config.hash().stage(Stage::Report)?,
        n_train: split.train.n_rows(),
        n_test: split.eval.n_rows(),
        converged: model.convergence.converged,
        iterations: model.convergence.iterations,
        final_loss: model.convergence.loss,
        prior_mass: split.train.n_rows() as f64,
        weight_mass: weights.total(),
        balance_gap,
    };
    Ok(ExperimentReport {
        rows,
        runs: vec![run],
    })
}

/// Runs one configured condition end to end on the test split.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate().stage(Stage::Config)?;
    let (train, test) = load_and_split(config)?;
    let split = PreparedSplit::new(train, test, &config.sensitive_attributes).stage(Stage::Binarize)?;
    evaluate_condition(config, &split)
}

/// Training-split weights for the configured method, in training-row order.
pub fn training_weights(config: &ExperimentConfig) -> Result<SampleWeights> {
    config.validate().stage(Stage::Config)?;
    let (train, test) = load_and_split(config)?;
    let split = PreparedSplit::new(train, test, &config.sensitive_attributes).stage(Stage::Binarize)?;
    Ok(method_weights(&config.method, &split).stage(Stage::Reweight)?.0)
}

/// Detection on the training split against an unweighted baseline model's
/// in-sample predictions.
pub fn run_detection(config: &ExperimentConfig) -> Result<DetectionResult> {
    let (train, _) = load_and_split(config)?;
    let model = fit(&train, &SampleWeights::uniform(train.n_rows()), &config.train).stage(Stage::Fit)?;
    let preds = predict(&model, &train).stage(Stage::Evaluate)?;
    detect(&train, &preds, &config.detection).stage(Stage::Detect)
}

fn default_validation_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSearchConfig {
    /// Candidate level weights per attribute. Defaults to {1, 2} for each
    /// attribute of the base config's level weights.
    #[serde(default)]
    pub candidates: IndexMap<String, Vec<u32>>,
    /// Share of the training split held out for selection.
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
}

impl Default for GridSearchConfig {
    fn default() -> Self {
        Self {
            candidates: IndexMap::new(),
            validation_fraction: default_validation_fraction(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub level_weights: LevelWeightConfig,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    /// Σ over attributes of |1 − DI| + |SPD| + |AOD| + |EOD| on validation.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub validation_auroc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub run: Option<RunMetadata>,
}

impl GridPoint {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub best: LevelWeightConfig,
    pub report: ExperimentReport,
    pub points: Vec<GridPoint>,
}

fn cartesian(candidates: &IndexMap<String, Vec<u32>>) -> Vec<Vec<u32>> {
    let mut tuples: Vec<Vec<u32>> = vec![Vec::new()];
    for values in candidates.values() {
        let mut sorted = values.clone();
        sorted.sort_unstable();
        sorted.dedup();
        tuples = tuples
            .into_iter()
            .flat_map(|t| {
                sorted.iter().map(move |&v| {
                    let mut next = t.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    tuples
}

/// Sweeps level weights on a validation split carved from the training data,
/// picks the least unfair point (ties: higher AUROC, then the smaller tuple)
/// and reruns it on the test split.
pub fn grid_search(base: &ExperimentConfig, grid: &GridSearchConfig) -> Result<GridOutcome> {
    base.validate().stage(Stage::Config)?;
    let base_levels = match &base.method {
        Method::M3fair { level_weights } => level_weights,
        _ => return Err(Error::InvalidConfig("grid search needs an m3fair base config".into())).stage(Stage::Config),
    };
    let candidates = if grid.candidates.is_empty() {
        base_levels.iter().map(|(a, _)| (a.to_string(), vec![1, 2])).collect()
    } else {
        grid.candidates.clone()
    };
    for (a, values) in &candidates {
        if values.is_empty() {
            return Err(Error::InvalidConfig(format!("no candidate levels for `{a}`"))).stage(Stage::Config);
        }
        if !base.sensitive_attributes.contains(a) {
            return Err(Error::InvalidConfig(format!("grid attribute `{a}` is not sensitive"))).stage(Stage::Config);
        }
    }

    let (train, test) = load_and_split(base)?;
    let holdout = SplitSpec {
        test_fraction: grid.validation_fraction,
        seed: base.split.seed,
    };
    let (fit_rows, val_rows) = split_indices(train.n_rows(), &holdout).stage(Stage::Split)?;
    let validation = PreparedSplit::new(
        train.select_rows(&fit_rows),
        train.select_rows(&val_rows),
        &base.sensitive_attributes,
    )
    .stage(Stage::Binarize)?;

    let names: Vec<&String> = candidates.keys().collect();
    let points: Vec<GridPoint> = cartesian(&candidates)
        .into_par_iter()
        .map(|tuple| -> Result<GridPoint> {
            let level_weights = LevelWeightConfig::new(names.iter().map(|n| n.as_str()).zip(tuple))
                .stage(Stage::Config)?;
            let config = ExperimentConfig {
                method: Method::M3fair {
                    level_weights: level_weights.clone(),
                },
                ..base.clone()
            };
            match evaluate_condition(&config, &validation) {
                Ok(report) => Ok(GridPoint {
                    level_weights,
                    status: "ok".into(),
                    error: None,
                    score: Some(report.rows.iter().map(ReportRow::unfairness).sum()),
                    validation_auroc: report.rows.first().map(|r| r.auroc),
                    run: report.runs.into_iter().next(),
                }),
                Err(e) if matches!(e.root(), Error::UnreachableCell { .. }) => Ok(GridPoint {
                    level_weights,
                    status: "failed".into(),
                    error: Some(e.to_string()),
                    score: None,
                    validation_auroc: None,
                    run: None,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let best = points
        .iter()
        .filter(|p| p.is_ok())
        .min_by(|a, b| {
            let (sa, sb) = (a.score.unwrap_or(f64::INFINITY), b.score.unwrap_or(f64::INFINITY));
            sa.total_cmp(&sb)
                .then_with(|| {
                    let (ua, ub) = (a.validation_auroc.unwrap_or(0.0), b.validation_auroc.unwrap_or(0.0));
                    ub.total_cmp(&ua)
                })
                .then_with(|| a.level_weights.levels().cmp(&b.level_weights.levels()))
        })
        .map(|p| p.level_weights.clone())
        .ok_or_else(|| Error::InvalidConfig("every grid point failed".into()))
        .stage(Stage::Reweight)?;

    let final_config = ExperimentConfig {
        method: Method::M3fair {
            level_weights: best.clone(),
        },
        ..base.clone()
    };
    let split = PreparedSplit::new(train, test, &base.sensitive_attributes).stage(Stage::Binarize)?;
    let report = evaluate_condition(&final_config, &split)?;
    Ok(GridOutcome { best, report, points })
}
