mod common;

use common::{auroc_pairwise, favorable_rates, reweight_oracle, rel_close};
use m3fair::data::{split_indices, GroupAssignment};
use m3fair::detection::{detect, DetectionConfig};
use m3fair::metrics::{auroc, FairnessReport, GroupConfusion, PredictionSet};
use m3fair::model::{fit, predict_scores, WeightedLogistic};
use m3fair::reweight::{m3fair, reweight, reweight_sequential, reweight_single_attribute, LevelWeightConfig};
use m3fair::synth::{planted_bias, PlantedBiasConfig};
use m3fair::{Dataset, Error, SampleWeights, SplitSpec, TrainConfig};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// (labels, partition, prior) with `n_groups` groups.
fn instance(max_n: usize, n_groups: u32) -> impl Strategy<Value = (Vec<u8>, Vec<u32>, Vec<f64>)> {
    (2..=max_n).prop_flat_map(move |n| {
        (
            prop::collection::vec(0u8..2, n),
            prop::collection::vec(0..n_groups, n),
            prop::collection::vec(0.05f64..5.0, n),
        )
    })
}

fn group(name: &str, membership: Vec<u8>, privileged: u8) -> GroupAssignment {
    GroupAssignment::new(name, membership).unwrap().with_privileged(privileged).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn reweight_matches_oracle((labels, partition, prior) in instance(100, 4)) {
        let got = reweight(&labels, &partition, &SampleWeights::new(prior.clone()).unwrap());
        match reweight_oracle(&labels, &partition, &prior) {
            None => {
                let unreachable = matches!(got, Err(Error::UnreachableCell { .. }));
                prop_assert!(unreachable);
            }
            Some(expected) => {
                let got = got.unwrap();
                for (a, b) in got.as_slice().iter().zip(&expected) {
                    prop_assert!(rel_close(*a, *b, 1e-12), "{a} vs {b}");
                }
                // mass conservation and balance
                prop_assert!(rel_close(got.total(), prior.iter().sum(), 1e-9));
                let rates = favorable_rates(&labels, &partition, got.as_slice());
                let overall = labels.iter().zip(&prior).map(|(&y, w)| y as f64 * w).sum::<f64>() / prior.iter().sum::<f64>();
                for r in rates {
                    prop_assert!((r - overall).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn scale_invariance((labels, partition, prior) in instance(60, 3), c in 0.01f64..100.0) {
        let a = reweight(&labels, &partition, &SampleWeights::new(prior.clone()).unwrap());
        let scaled: Vec<f64> = prior.iter().map(|w| w * c).collect();
        let b = reweight(&labels, &partition, &SampleWeights::new(scaled).unwrap());
        match (a, b) {
            (Ok(a), Ok(b)) => {
                for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                    prop_assert!(rel_close(x * c, *y, 1e-12));
                }
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "scaling changed reachability"),
        }
    }

    #[test]
    fn group_ids_are_labels_only((labels, partition, prior) in instance(60, 3), shift in 1u32..1000) {
        let relabeled: Vec<u32> = partition.iter().map(|&g| (2 - g) * shift + 7).collect();
        let prior = SampleWeights::new(prior).unwrap();
        let a = reweight(&labels, &partition, &prior).ok();
        let b = reweight(&labels, &relabeled, &prior).ok();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn row_permutation_commutes((labels, partition, prior) in instance(60, 3), seed in any::<u64>()) {
        let mut perm: Vec<usize> = (0..labels.len()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let pl: Vec<u8> = perm.iter().map(|&i| labels[i]).collect();
        let pp: Vec<u32> = perm.iter().map(|&i| partition[i]).collect();
        let pw: Vec<f64> = perm.iter().map(|&i| prior[i]).collect();
        let a = reweight(&labels, &partition, &SampleWeights::new(prior).unwrap());
        let b = reweight(&pl, &pp, &SampleWeights::new(pw).unwrap());
        if let (Ok(a), Ok(b)) = (a, b) {
            for (k, &i) in perm.iter().enumerate() {
                prop_assert!(rel_close(a.as_slice()[i], b.as_slice()[k], 1e-12));
            }
        }
    }

    #[test]
    fn single_attribute_collapse((labels, partition, prior) in instance(100, 2), privileged in 0u8..2, level in 1u32..5) {
        let membership: Vec<u8> = partition.iter().map(|&g| g as u8).collect();
        let g = group("a", membership, privileged);
        let prior = SampleWeights::new(prior).unwrap();
        let single = reweight_single_attribute(&labels, &g, &prior);
        let config = LevelWeightConfig::new([("a", level)]).unwrap();
        let multi = m3fair(&labels, std::slice::from_ref(&g), &config, &prior);
        match (single, multi) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.as_slice(), b.as_slice()),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "collapse changed reachability"),
        }
        let seq = reweight_sequential(&labels, std::slice::from_ref(&g), &prior).ok();
        prop_assert_eq!(seq, reweight_single_attribute(&labels, &g, &prior).ok());
    }

    #[test]
    fn level_relabeling_with_same_fibers(
        (labels, _, prior) in instance(80, 2),
        a in prop::collection::vec(0u8..2, 80),
        b in prop::collection::vec(0u8..2, 80),
        scale in 1u32..4,
    ) {
        let n = labels.len();
        let ga = group("a", a[..n].to_vec(), 1);
        let gb = group("b", b[..n].to_vec(), 1);
        let groups = [ga, gb];
        let prior = SampleWeights::new(prior).unwrap();
        // (1, 2) and (k, 2k) induce the same four-way partition as (2, 1)
        let c1 = LevelWeightConfig::new([("a", 1), ("b", 2)]).unwrap();
        let c2 = LevelWeightConfig::new([("a", scale), ("b", 2 * scale)]).unwrap();
        let c3 = LevelWeightConfig::new([("a", 2), ("b", 1)]).unwrap();
        let w1 = m3fair(&labels, &groups, &c1, &prior).ok();
        prop_assert_eq!(&w1, &m3fair(&labels, &groups, &c2, &prior).ok());
        prop_assert_eq!(&w1, &m3fair(&labels, &groups, &c3, &prior).ok());
    }

    #[test]
    fn m3fair_balances_every_level((labels, _, prior) in instance(100, 2), a in prop::collection::vec(0u8..2, 100), b in prop::collection::vec(0u8..2, 100)) {
        let n = labels.len();
        let groups = [group("a", a[..n].to_vec(), 0), group("b", b[..n].to_vec(), 1)];
        let config = LevelWeightConfig::new([("a", 1), ("b", 1)]).unwrap();
        let levels: Vec<u32> = (0..n).map(|i| u32::from(a[i]) + u32::from(1 - b[i])).collect();
        let got = m3fair(&labels, &groups, &config, &SampleWeights::new(prior.clone()).unwrap()).ok();
        let expected = reweight_oracle(&labels, &levels, &prior);
        prop_assert_eq!(got.is_some(), expected.is_some());
        if let (Some(got), Some(expected)) = (got, expected) {
            for (x, y) in got.as_slice().iter().zip(&expected) {
                prop_assert!(rel_close(*x, *y, 1e-12));
            }
        }
    }

    #[test]
    fn auroc_equals_pairwise(
        data in (2usize..=200).prop_flat_map(|n| (prop::collection::vec(0u8..20, n), prop::collection::vec(0u8..2, n)))
    ) {
        let (raw, labels) = data;
        let scores: Vec<f64> = raw.iter().map(|&s| s as f64 / 19.0).collect();
        match auroc_pairwise(&scores, &labels) {
            Some(expected) => prop_assert!((auroc(&scores, &labels).unwrap() - expected).abs() <= 1e-12),
            None => prop_assert!(auroc(&scores, &labels).is_err()),
        }
    }

    #[test]
    fn auroc_is_rank_invariant(scores in prop::collection::vec(-5.0f64..5.0, 4..100), seed in any::<u64>()) {
        let labels: Vec<u8> = (0..scores.len()).map(|i| ((seed >> (i % 64)) & 1) as u8).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let transformed: Vec<f64> = scores.iter().map(|s| (s * 0.7).exp() + s * s * s).collect();
        prop_assert_eq!(auroc(&scores, &labels).unwrap(), auroc(&transformed, &labels).unwrap());
    }

    #[test]
    fn swapping_privileged_side(
        data in (4usize..80).prop_flat_map(|n| (
            prop::collection::vec(0u8..2, n),
            prop::collection::vec(0u8..2, n),
            prop::collection::vec(0u8..2, n),
        ))
    ) {
        let (preds, labels, membership) = data;
        let set = PredictionSet::from_predictions(preds, labels).unwrap();
        let g = group("a", membership, 1);
        let (Ok(c), Ok(s)) = (GroupConfusion::compute(&set, &g), GroupConfusion::compute(&set, &g.swapped())) else {
            return Ok(());
        };
        prop_assert!((-1.0..=1.0).contains(&c.statistical_parity_difference()));
        prop_assert!(c.disparate_impact() >= 0.0);
        prop_assert_eq!(c.statistical_parity_difference(), -s.statistical_parity_difference());
        prop_assert_eq!(c.average_odds_difference(), -s.average_odds_difference());
        if let (Ok(e1), Ok(e2)) = (c.equal_opportunity_difference(), s.equal_opportunity_difference()) {
            prop_assert_eq!(e1, -e2);
        }
        let (di, di_swapped) = (c.disparate_impact(), s.disparate_impact());
        if di > 0.0 && di.is_finite() {
            prop_assert!((di * di_swapped - 1.0).abs() < 1e-12);
        }
        if c.privileged.positive_rate() > 0.0 {
            prop_assert_eq!(di == 1.0, c.statistical_parity_difference() == 0.0);
        }
    }

    #[test]
    fn metrics_are_permutation_invariant(
        data in (4usize..60).prop_flat_map(|n| (
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(0u8..2, n),
            prop::collection::vec(0u8..2, n),
        )),
        rot in 0usize..60,
    ) {
        let (scores, labels, membership) = data;
        let n = scores.len();
        let perm: Vec<usize> = (0..n).map(|i| (n - 1 - i + rot) % n).collect();
        let a = FairnessReport::compute(
            &PredictionSet::from_scores(scores.clone(), labels.clone(), 0.5).unwrap(),
            &group("g", membership.clone(), 1),
        );
        let b = FairnessReport::compute(
            &PredictionSet::from_scores(perm.iter().map(|&i| scores[i]).collect(), perm.iter().map(|&i| labels[i]).collect(), 0.5).unwrap(),
            &group("g", perm.iter().map(|&i| membership[i]).collect(), 1),
        );
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert!((a.auprc - b.auprc).abs() < 1e-12);
                prop_assert_eq!(a.auroc, b.auroc);
                prop_assert_eq!((a.acc, a.di, a.spd, a.aod, a.eod), (b.acc, b.di, b.spd, b.aod, b.eod));
            }
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false),
        }
    }

    #[test]
    fn split_is_a_partition(n in 1usize..500, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let spec = SplitSpec { test_fraction: frac, seed };
        if let Ok((train, test)) = split_indices(n, &spec) {
            let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(split_indices(n, &spec).unwrap(), (train, test));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn gradient_matches_finite_differences(
        dims in (2usize..=50, 1usize..=10).prop_flat_map(|(n, d)| (
            prop::collection::vec(-2.0f64..2.0, n * d),
            prop::collection::vec(0u8..2, n),
            prop::collection::vec(0.1f64..3.0, n),
            prop::collection::vec(-1.5f64..1.5, d + 1),
            Just(d),
        )),
        l2 in 0.0f64..0.5,
    ) {
        let (x, labels, weights, params, d) = dims;
        let obj = WeightedLogistic { x: &x, n_cols: d, labels: &labels, weights: &weights, l2_penalty: l2 };
        let mut grad = vec![0.0; d + 1];
        let loss = obj.gradient(&params, &mut grad);
        prop_assert!(rel_close(loss, obj.loss(&params), 1e-12));
        let h = 1e-5;
        for k in 0..=d {
            let mut p = params.clone();
            p[k] += h;
            let up = obj.loss(&p);
            p[k] -= 2.0 * h;
            let down = obj.loss(&p);
            let fd = (up - down) / (2.0 * h);
            let scale = grad[k].abs().max(fd.abs()).max(1e-3);
            prop_assert!((grad[k] - fd).abs() / scale <= 1e-5, "coord {k}: {} vs {fd}", grad[k]);
        }
    }

    #[test]
    fn unit_weights_give_plain_cross_entropy_gradient(
        dims in (2usize..=30, 1usize..=5).prop_flat_map(|(n, d)| (
            prop::collection::vec(-2.0f64..2.0, n * d),
            prop::collection::vec(0u8..2, n),
            prop::collection::vec(-1.0f64..1.0, d + 1),
            Just(d),
        )),
    ) {
        let (x, labels, params, d) = dims;
        let ones = vec![1.0; labels.len()];
        let obj = WeightedLogistic { x: &x, n_cols: d, labels: &labels, weights: &ones, l2_penalty: 0.0 };
        let mut grad = vec![0.0; d + 1];
        obj.gradient(&params, &mut grad);
        let mut expected = vec![0.0; d + 1];
        for (i, &y) in labels.iter().enumerate() {
            let row = &x[i * d..(i + 1) * d];
            let z: f64 = row.iter().zip(&params).map(|(a, b)| a * b).sum::<f64>() + params[d];
            let p = 1.0 / (1.0 + (-z).exp());
            for k in 0..d {
                expected[k] += (p - y as f64) * row[k];
            }
            expected[d] += p - y as f64;
        }
        for (g, e) in grad.iter().zip(&expected) {
            prop_assert!(rel_close(*g, *e, 1e-10));
        }
    }
}

fn random_dataset(n: usize, d: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let labels: Vec<u8> = rows
        .iter()
        .map(|r| u8::from(r.iter().sum::<f64>() + rng.gen_range(-1.0..1.0) > 0.0))
        .collect();
    Dataset::from_rows(&rows, labels, (0..d).map(|j| format!("x{j}")).collect()).unwrap()
}

#[test]
fn loss_never_increases_along_the_path() {
    let ds = random_dataset(120, 4, 3);
    let w = SampleWeights::uniform(ds.n_rows());
    let mut prev = f64::INFINITY;
    for k in 1..40 {
        let cfg = TrainConfig { max_iterations: k, gradient_tolerance: 1e-300, ..TrainConfig::default() };
        let loss = fit(&ds, &w, &cfg).unwrap().convergence.loss;
        assert!(loss <= prev, "iteration {k}: {loss} > {prev}");
        prev = loss;
    }
}

#[test]
fn fit_is_bit_deterministic() {
    let ds = random_dataset(200, 6, 11);
    let w = SampleWeights::new((0..200).map(|i| 0.5 + (i % 7) as f64 / 3.0).collect()).unwrap();
    let a = fit(&ds, &w, &TrainConfig::default()).unwrap();
    let b = fit(&ds, &w, &TrainConfig::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_weight_rows_are_the_same_as_removed_rows() {
    let ds = random_dataset(80, 3, 5);
    let keep: Vec<usize> = (0..80).filter(|i| i % 4 != 0).collect();
    let weights: Vec<f64> = (0..80).map(|i| if i % 4 == 0 { 0.0 } else { 1.0 + (i % 3) as f64 }).collect();
    let kept_weights: Vec<f64> = keep.iter().map(|&i| weights[i]).collect();
    let cfg = TrainConfig::default();
    let full = fit(&ds, &SampleWeights::new(weights).unwrap(), &cfg).unwrap();
    let sub = fit(&ds.select_rows(&keep), &SampleWeights::new(kept_weights).unwrap(), &cfg).unwrap();
    for (a, b) in full.coefficients.iter().zip(&sub.coefficients) {
        assert!(rel_close(*a, *b, 1e-9), "{a} vs {b}");
    }
    assert!(rel_close(full.intercept, sub.intercept, 1e-9));
}

#[test]
fn scaling_weights_with_penalty_leaves_the_optimum() {
    let ds = random_dataset(100, 3, 9);
    let base = TrainConfig { gradient_tolerance: 1e-10, max_iterations: 5000, ..TrainConfig::default() };
    let a = fit(&ds, &SampleWeights::uniform(100), &base).unwrap();
    let scaled = TrainConfig { l2_penalty: base.l2_penalty * 3.0, ..base };
    let b = fit(&ds, &SampleWeights::new(vec![3.0; 100]).unwrap(), &scaled).unwrap();
    let (sa, sb) = (predict_scores(&a, &ds).unwrap(), predict_scores(&b, &ds).unwrap());
    for (x, y) in sa.iter().zip(&sb) {
        assert!((x - y).abs() < 1e-6);
    }
}

#[test]
fn sequential_order_is_irrelevant_for_independent_attributes() {
    // B splits evenly inside every (A, label) stratum, so it is independent of both
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut y = Vec::new();
    for (av, yv, count) in [(1u8, 1u8, 6), (1, 0, 2), (0, 1, 2), (0, 0, 6)] {
        for k in 0..count {
            a.push(av);
            b.push((k % 2) as u8);
            y.push(yv);
        }
    }
    let ga = group("A", a.clone(), 1);
    let gb = group("B", b, 1);
    let prior = SampleWeights::uniform(16);
    let ab = reweight_sequential(&y, &[ga.clone(), gb.clone()], &prior).unwrap();
    let ba = reweight_sequential(&y, &[gb, ga], &prior).unwrap();
    let oracle = reweight_oracle(&y, &a.iter().map(|&v| v as u32).collect::<Vec<_>>(), &[1.0; 16]).unwrap();
    for ((x, z), o) in ab.as_slice().iter().zip(ba.as_slice()).zip(&oracle) {
        assert!((x - z).abs() < 1e-12);
        assert!((x - o).abs() < 1e-12);
    }
    // A-favored cells shrink to 2/3, the rare cells grow to 2
    assert!((oracle[0] - 2.0 / 3.0).abs() < 1e-15 && (oracle[6] - 2.0).abs() < 1e-15);
}

#[test]
fn detection_intersection_grows_with_top_n() {
    let ds = planted_bias(&PlantedBiasConfig { n_rows: 300, n_noise: 12, seed: 4, ..Default::default() }).unwrap();
    let preds = PredictionSet::from_predictions(ds.labels().to_vec(), ds.labels().to_vec()).unwrap();
    let mut prev: Vec<String> = Vec::new();
    for top_n in 1..=13 {
        let r = detect(&ds, &preds, &DetectionConfig { top_n, candidate_columns: None }).unwrap();
        assert!(prev.iter().all(|c| r.intersection.contains(c)), "top_n {top_n}");
        assert_eq!(r, detect(&ds, &preds, &DetectionConfig { top_n, candidate_columns: None }).unwrap());
        prev = r.intersection;
    }
    assert_eq!(prev.len(), 13);
}

#[test]
fn perfectly_fair_column_stays_out_of_the_intersection() {
    // columns u0..u2 each separate the predictions; `fair` splits every (label, prediction) cell evenly
    let n = 40;
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i % 4 < 2)).collect();
    let preds: Vec<u8> = (0..n).map(|i| u8::from(i % 4 == 0 || i % 4 == 2)).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let p = preds[i] as f64;
            vec![p, p, p, ((i / 4) % 2) as f64]
        })
        .collect();
    let names = vec!["u0".into(), "u1".into(), "u2".into(), "fair".into()];
    let ds = Dataset::from_rows(&rows, labels.clone(), names).unwrap();
    let set = PredictionSet::from_predictions(preds, labels).unwrap();
    let r = detect(&ds, &set, &DetectionConfig { top_n: 3, candidate_columns: None }).unwrap();
    let fair_di = r.rankings.di.iter().find(|c| c.column == "fair").unwrap().score;
    assert_eq!(fair_di, 0.0);
    assert_eq!(r.intersection, vec!["u0", "u1", "u2"]);
}
