//! Sample reweighting.
//!
//! Every method here reduces to one primitive, [`reweight`]: given a partition
//! of the rows into groups, each row in group `g` with label `d` is rescaled by
//!
//! ```text
//!              Σ_{y_j=d} W_j · Σ_{j∈g} W_j
//! W'_i = W_i · ---------------------------
//!              Σ_j W_j · Σ_{j∈g, y_j=d} W_j
//! ```
//!
//! which makes label and group independent under the reweighted distribution.
//! Single-attribute reweighting uses the attribute's membership as the
//! partition; the multi-level method partitions rows by their sensitivity
//! level, the sum of configured level weights over the attributes on which a
//! row sits on the unprivileged side.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::data::GroupAssignment;
use crate::error::{Error, Result};

/// Non-negative per-row weights with a strictly positive total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SampleWeights(Vec<f64>);

impl SampleWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidWeights(format!(
                "weight {} at row {i} is negative or non-finite",
                weights[i]
            )));
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidWeights("zero total weight".into()));
        }
        Ok(Self(weights))
    }

    /// All ones.
    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Writes a one-column CSV (`weight` header), one line per row in order.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "weight")?;
            for w in &self.0 {
                writeln!(out, "{w}")?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

impl TryFrom<Vec<f64>> for SampleWeights {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SampleWeights> for Vec<f64> {
    fn from(w: SampleWeights) -> Self {
        w.0
    }
}

/// Ordered attribute → level weight map; every weight is at least 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "IndexMap<String, u32>", into = "IndexMap<String, u32>")]
pub struct LevelWeightConfig(IndexMap<String, u32>);

impl LevelWeightConfig {
    pub fn new<S: Into<String>>(entries: impl IntoIterator<Item = (S, u32)>) -> Result<Self> {
        let mut map = IndexMap::new();
        for (name, level) in entries {
            let name = name.into();
            if level == 0 {
                return Err(Error::InvalidLevelWeights(format!(
                    "level weight of `{name}` must be at least 1"
                )));
            }
            if map.insert(name.clone(), level).is_some() {
                return Err(Error::InvalidLevelWeights(format!("`{name}` listed twice")));
            }
        }
        if map.is_empty() {
            return Err(Error::InvalidLevelWeights("no attributes".into()));
        }
        Ok(Self(map))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn get(&self, attribute: &str) -> Option<u32> {
        self.0.get(attribute).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_level(&self) -> u32 {
        self.0.values().sum()
    }

    /// Level weights in configuration order.
    pub fn levels(&self) -> Vec<u32> {
        self.0.values().copied().collect()
    }
}

impl TryFrom<IndexMap<String, u32>> for LevelWeightConfig {
    type Error = Error;

    fn try_from(map: IndexMap<String, u32>) -> Result<Self> {
        Self::new(map)
    }
}

impl From<LevelWeightConfig> for IndexMap<String, u32> {
    fn from(c: LevelWeightConfig) -> Self {
        c.0
    }
}

/// Per-row sensitivity level and the rows at each occurring level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensitivityLevels {
    pub levels: Vec<u32>,
    pub groups: BTreeMap<u32, Vec<usize>>,
}

/// Level of row `i` = Σ_a level(a) · [row i is on a's unprivileged side].
pub fn compute_sensitivity_levels(
    groups: &[GroupAssignment],
    config: &LevelWeightConfig,
) -> Result<SensitivityLevels> {
    let n = groups.first().map_or(0, GroupAssignment::len);
    let mut levels = vec![0u32; n];
    for (attribute, weight) in config.iter() {
        let group = groups
            .iter()
            .find(|g| g.attribute_name() == attribute)
            .ok_or_else(|| Error::MissingAssignment(attribute.to_string()))?;
        if group.len() != n {
            return Err(Error::LengthMismatch {
                what: "group membership",
                expected: n,
                found: group.len(),
            });
        }
        for (level, m) in levels.iter_mut().zip(group.unprivileged_indicator()) {
            *level += weight * m as u32;
        }
    }
    let mut by_level: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in levels.iter().enumerate() {
        by_level.entry(l).or_default().push(i);
    }
    Ok(SensitivityLevels {
        levels,
        groups: by_level,
    })
}

fn check_aligned(labels: &[u8], partition_len: usize, prior: &SampleWeights) -> Result<()> {
    if partition_len != labels.len() {
        return Err(Error::LengthMismatch {
            what: "partition",
            expected: labels.len(),
            found: partition_len,
        });
    }
    if prior.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "prior weights",
            expected: labels.len(),
            found: prior.len(),
        });
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::InvalidDataset("labels must be 0 or 1".into()));
    }
    Ok(())
}

/// Reweights so that, under the new weights, every group of `partition` has
/// the same label distribution as the whole. Total mass is preserved.
pub fn reweight(labels: &[u8], partition: &[u32], prior: &SampleWeights) -> Result<SampleWeights> {
    check_aligned(labels, partition.len(), prior)?;
    let w = prior.as_slice();

    let mut total = 0.0;
    let mut label_mass = [0.0f64; 2];
    let mut group_mass: BTreeMap<u32, f64> = BTreeMap::new();
    let mut cell_mass: BTreeMap<(u32, u8), f64> = BTreeMap::new();
    for ((&y, &g), &wi) in labels.iter().zip(partition).zip(w) {
        total += wi;
        label_mass[y as usize] += wi;
        *group_mass.entry(g).or_default() += wi;
        *cell_mass.entry((g, y)).or_default() += wi;
    }
    if total <= 0.0 {
        return Err(Error::InvalidWeights("zero total weight".into()));
    }

    let mut factor: BTreeMap<(u32, u8), f64> = BTreeMap::new();
    for (&g, &g_mass) in &group_mass {
        for y in 0..2u8 {
            let expected = label_mass[y as usize] * g_mass;
            let cell = cell_mass.get(&(g, y)).copied().unwrap_or(0.0);
            if cell <= 0.0 {
                if expected > 0.0 {
                    return Err(Error::UnreachableCell { group: g, label: y });
                }
                continue;
            }
            factor.insert((g, y), expected / (total * cell));
        }
    }

    let out = labels
        .iter()
        .zip(partition)
        .zip(w)
        .map(|((&y, &g), &wi)| factor.get(&(g, y)).map_or(0.0, |f| wi * f))
        .collect();
    SampleWeights::new(out)
}

/// Reweighting by one binary attribute.
pub fn reweight_single_attribute(
    labels: &[u8],
    group: &GroupAssignment,
    prior: &SampleWeights,
) -> Result<SampleWeights> {
    let partition: Vec<u32> = group.membership().iter().map(|&m| m as u32).collect();
    reweight(labels, &partition, prior)
}

/// Reweights by each attribute in turn, feeding each result in as the next prior.
pub fn reweight_sequential(
    labels: &[u8],
    groups: &[GroupAssignment],
    prior: &SampleWeights,
) -> Result<SampleWeights> {
    if groups.is_empty() {
        return Err(Error::InvalidConfig("sequential reweighting needs at least one attribute".into()));
    }
    groups.iter().try_fold(prior.clone(), |w, g| {
        reweight_single_attribute(labels, g, &w)
    })
}

/// Simultaneous multi-attribute reweighting over sensitivity-level groups.
pub fn m3fair(
    labels: &[u8],
    groups: &[GroupAssignment],
    config: &LevelWeightConfig,
    prior: &SampleWeights,
) -> Result<SampleWeights> {
    let levels = compute_sensitivity_levels(groups, config)?;
    reweight(labels, &levels.levels, prior)
}

/// Largest deviation, over groups of `partition`, of the weighted favorable
/// rate from the overall weighted favorable rate.
pub fn max_balance_gap(labels: &[u8], partition: &[u32], weights: &SampleWeights) -> f64 {
    let w = weights.as_slice();
    let total: f64 = w.iter().sum();
    let favorable: f64 = labels.iter().zip(w).filter(|(&y, _)| y == 1).map(|(_, &wi)| wi).sum();
    let overall = favorable / total;
    let mut per_group: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
    for ((&y, &g), &wi) in labels.iter().zip(partition).zip(w) {
        let e = per_group.entry(g).or_default();
        e.0 += wi;
        if y == 1 {
            e.1 += wi;
        }
    }
    per_group
        .values()
        .filter(|(mass, _)| *mass > 0.0)
        .map(|(mass, fav)| (fav / mass - overall).abs())
        .fold(0.0, f64::max)
}
