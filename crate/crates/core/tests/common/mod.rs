//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

/// Direct weighted-frequency reweighting: each row's weight is scaled by
/// P_W(y) P_W(g) / P_W(g, y), with every mass recomputed from scratch.
pub fn reweight_oracle(labels: &[u8], partition: &[u32], prior: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = prior.iter().sum();
    let mass = |g: Option<u32>, y: Option<u8>| -> f64 {
        labels
            .iter()
            .zip(partition)
            .zip(prior)
            .filter(|((&l, &p), _)| g.is_none_or(|g| g == p) && y.is_none_or(|y| y == l))
            .map(|(_, &w)| w)
            .sum()
    };
    // an empty cell whose group and label both carry mass cannot be balanced
    for &g in partition {
        for y in 0..2u8 {
            if mass(Some(g), None) * mass(None, Some(y)) > 0.0 && mass(Some(g), Some(y)) <= 0.0 {
                return None;
            }
        }
    }
    let out = (0..labels.len())
        .map(|i| {
            let (g, y) = (partition[i], labels[i]);
            let cell = mass(Some(g), Some(y));
            if cell <= 0.0 {
                0.0
            } else {
                prior[i] * mass(None, Some(y)) * mass(Some(g), None) / (total * cell)
            }
        })
        .collect();
    Some(out)
}

/// AUROC by enumerating every (positive, negative) pair.
pub fn auroc_pairwise(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    (pairs > 0.0).then(|| wins / pairs)
}

/// Weighted favorable rate of each group id present in `partition`.
pub fn favorable_rates(labels: &[u8], partition: &[u32], weights: &[f64]) -> Vec<f64> {
    let mut ids: Vec<u32> = partition.to_vec();
    ids.sort_unstable();
    ids.dedup();
    ids.iter()
        .map(|&g| {
            let (mut fav, mut all) = (0.0, 0.0);
            for ((&y, &p), &w) in labels.iter().zip(partition).zip(weights) {
                if p == g {
                    all += w;
                    fav += w * y as f64;
                }
            }
            fav / all
        })
        .collect()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
