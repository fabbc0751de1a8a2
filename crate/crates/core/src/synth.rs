//! Seeded synthetic datasets with known, planted group disparities.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::sigmoid;

pub const PLANTED_COLUMN: &str = "planted";

/// One binary column whose groups have different favorable-label rates,
/// surrounded by independent uniform noise columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedBiasConfig {
    pub n_rows: usize,
    pub n_noise: usize,
    /// Favorable rate in group 1 of the planted column.
    pub high_rate: f64,
    /// Favorable rate in group 0.
    pub low_rate: f64,
    pub seed: u64,
}

impl Default for PlantedBiasConfig {
    fn default() -> Self {
        Self {
            n_rows: 500,
            n_noise: 30,
            high_rate: 0.8,
            low_rate: 0.2,
            seed: 0,
        }
    }
}

pub fn planted_bias(config: &PlantedBiasConfig) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_cols = config.n_noise + 1;
    let planted_at = rng.gen_range(0..n_cols);
    let names: Vec<String> = (0..n_cols)
        .map(|j| match j.cmp(&planted_at) {
            std::cmp::Ordering::Equal => PLANTED_COLUMN.to_string(),
            std::cmp::Ordering::Less => format!("noise_{j:02}"),
            std::cmp::Ordering::Greater => format!("noise_{:02}", j - 1),
        })
        .collect();

    let mut features = Vec::with_capacity(config.n_rows * n_cols);
    let mut labels = Vec::with_capacity(config.n_rows);
    for _ in 0..config.n_rows {
        let member = rng.gen_bool(0.5);
        let rate = if member { config.high_rate } else { config.low_rate };
        labels.push(u8::from(rng.gen_bool(rate)));
        for j in 0..n_cols {
            features.push(if j == planted_at {
                f64::from(u8::from(member))
            } else {
                rng.gen::<f64>()
            });
        }
    }
    Dataset::new(features, labels, names)
}

/// A small clinical-style cohort: binary `sex`, continuous `age`, and lab
/// features. Outcome odds depend on the labs and are shifted for `sex = 1`
/// and for patients older than `age_cutoff`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortConfig {
    pub n_rows: usize,
    pub n_labs: usize,
    /// Log-odds shift for `sex = 1`.
    pub sex_effect: f64,
    /// Log-odds shift for age above the cutoff.
    pub age_effect: f64,
    pub age_cutoff: f64,
    pub seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            n_rows: 2000,
            n_labs: 6,
            sex_effect: 1.0,
            age_effect: -1.2,
            age_cutoff: 60.0,
            seed: 7,
        }
    }
}

pub fn cohort(config: &CohortConfig) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut names = vec!["sex".to_string(), "age".to_string()];
    names.extend((0..config.n_labs).map(|k| format!("lab_{k}")));
    let coefs: Vec<f64> = (0..config.n_labs).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let mut features = Vec::with_capacity(config.n_rows * names.len());
    let mut labels = Vec::with_capacity(config.n_rows);
    for _ in 0..config.n_rows {
        let sex = u8::from(rng.gen_bool(0.55));
        let age: f64 = rng.gen_range(20.0..90.0);
        let old = age > config.age_cutoff;
        features.push(f64::from(sex));
        features.push(age.round());
        let mut logit = -0.3;
        for c in &coefs {
            // labs drift slightly with age so age is partly recoverable from them
            let lab = rng.gen_range(-1.0..1.0) + if old { 0.2 } else { 0.0 };
            features.push(lab);
            logit += c * lab;
        }
        logit += config.sex_effect * f64::from(sex);
        if old {
            logit += config.age_effect;
        }
        labels.push(u8::from(rng.gen_bool(sigmoid(logit))));
    }
    Dataset::new(features, labels, names)
}

/// Writes `dataset` as CSV with the label as the last column, rendered as
/// `positive`/`negative`.
pub fn write_csv(
    dataset: &Dataset,
    path: impl AsRef<Path>,
    label_column: &str,
    positive: &str,
    negative: &str,
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header: Vec<&str> = dataset.column_names().iter().map(String::as_str).collect();
    header.push(label_column);
    w.write_record(&header)?;
    for i in 0..dataset.n_rows() {
        let mut rec: Vec<String> = dataset.row(i).iter().map(f64::to_string).collect();
        rec.push(if dataset.labels()[i] == 1 { positive } else { negative }.to_string());
        w.write_record(&rec)?;
    }
    let mut inner = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    inner.flush().map_err(|e| Error::io(path, e))
}
