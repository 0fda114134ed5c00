use proptest::prelude::*;
use rand::seq::SliceRandom;
use uqkit::conformal::{
    calibrate, classification_scores, empirical_coverage, predict_interval_conformal, predict_set,
    rank, regression_scores, RegressionScore, ScoreKind,
};
use uqkit::datasets::{split, synth_classes, ClassesConfig, SplitSpec};
use uqkit::numerics::{softmax, ProbVector, RandomStream};

/// Softmax of negative squared distances to known class centres.
fn centre_classifier(ds: &uqkit::Dataset, centres: &[Vec<f64>]) -> Vec<ProbVector> {
    ds.features
        .iter_rows()
        .map(|row| {
            let logits: Vec<f64> = centres
                .iter()
                .map(|c| -0.5 * c.iter().zip(row).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
                .collect();
            softmax(&logits).unwrap()
        })
        .collect()
}

fn class_means(ds: &uqkit::Dataset, n_classes: usize) -> Vec<Vec<f64>> {
    let k = ds.n_features();
    let mut sums = vec![vec![0.0; k]; n_classes];
    let mut counts = vec![0.0; n_classes];
    for (row, &c) in ds.features.iter_rows().zip(ds.labels().unwrap()) {
        counts[c] += 1.0;
        sums[c].iter_mut().zip(row).for_each(|(s, v)| *s += v);
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, n)| s.iter().map(|v| v / n).collect())
        .collect()
}

#[test]
fn coverage_lands_in_the_guaranteed_band() {
    let ds = synth_classes(&ClassesConfig {
        n: 1200,
        separation: 1.0,
        ..Default::default()
    })
    .unwrap();
    let parts = split(&ds, &SplitSpec::counts(&[200, 1000], 0)).unwrap();
    let centres = class_means(&parts[0], 3);
    let rest = &parts[1];
    let probs = centre_classifier(rest, &centres);
    let labels = rest.labels().unwrap();
    for alpha in [0.1, 0.2] {
        let n_cal = 300;
        let mut mean = 0.0;
        let reps = 200;
        for rep in 0..reps {
            let mut perm: Vec<usize> = (0..1000).collect();
            perm.shuffle(&mut RandomStream::new(rep, 0));
            let idx = &perm[..n_cal];
            let mut is_cal = vec![false; 1000];
            idx.iter().for_each(|&i| is_cal[i] = true);
            let cal_p: Vec<ProbVector> = idx.iter().map(|&i| probs[i].clone()).collect();
            let cal_y: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            let cal = calibrate(
                &classification_scores(&cal_p, &cal_y).unwrap(),
                alpha,
                ScoreKind::Classification,
            )
            .unwrap();
            let test: Vec<usize> = (0..1000).filter(|&i| !is_cal[i]).collect();
            let sets: Vec<_> = test
                .iter()
                .map(|&i| predict_set(&probs[i], &cal).unwrap())
                .collect();
            let truths: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
            mean += empirical_coverage(&sets, &truths).unwrap() / reps as f64;
        }
        let lo = 1.0 - alpha;
        let hi = lo + 1.0 / (n_cal as f64 + 1.0);
        assert!(
            mean >= lo - 0.01 && mean <= hi + 0.01,
            "alpha {alpha}: {mean}"
        );
    }
}

proptest! {
    #[test]
    fn q_hat_is_the_kth_order_statistic(
        scores in prop::collection::vec(0.0f64..1.0, 1..200),
        alpha in 0.01f64..0.99,
    ) {
        let n = scores.len();
        match calibrate(&scores, alpha, ScoreKind::Classification) {
            Ok(cal) => {
                prop_assert!(cal.k >= 1 && cal.k <= n);
                let mut sorted = scores.clone();
                sorted.sort_by(f64::total_cmp);
                prop_assert_eq!(cal.q_hat, sorted[cal.k - 1]);
                prop_assert!(cal.k as f64 >= (n as f64 + 1.0) * (1.0 - alpha) - 1e-9);
            }
            Err(_) => prop_assert!(rank(n, alpha) > n),
        }
    }

    #[test]
    fn sets_shrink_as_alpha_grows(
        scores in prop::collection::vec(0.0f64..1.0, 50..200),
        a1 in 0.05f64..0.5,
        gap in 0.0f64..0.4,
        w in prop::collection::vec(0.01f64..1.0, 4),
    ) {
        let a2 = a1 + gap;
        let c1 = calibrate(&scores, a1, ScoreKind::Classification).unwrap();
        let c2 = calibrate(&scores, a2, ScoreKind::Classification).unwrap();
        prop_assert!(c1.k >= c2.k && c1.q_hat >= c2.q_hat);
        let s: f64 = w.iter().sum();
        let p = ProbVector::new(w.iter().map(|v| v / s).collect()).unwrap();
        prop_assert!(predict_set(&p, &c2).unwrap().is_subset_of(&predict_set(&p, &c1).unwrap()));
    }

    #[test]
    fn absolute_scores_are_translation_invariant(
        pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 10..100),
        shift in -8i32..8,
    ) {
        let c = f64::from(shift) * 0.25;
        let (pred, truth): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let moved_p: Vec<f64> = pred.iter().map(|v| v + c).collect();
        let moved_t: Vec<f64> = truth.iter().map(|v| v + c).collect();
        let s1 = regression_scores(&pred, &truth, RegressionScore::Absolute).unwrap();
        let s2 = regression_scores(&moved_p, &moved_t, RegressionScore::Absolute).unwrap();
        for (a, b) in s1.iter().zip(&s2) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        let c1 = calibrate(&s1, 0.2, ScoreKind::RegressionAbsolute).unwrap();
        let c2 = calibrate(&s2, 0.2, ScoreKind::RegressionAbsolute).unwrap();
        prop_assert!((c1.q_hat - c2.q_hat).abs() < 1e-12);
        let w1 = predict_interval_conformal(pred[0], &c1).unwrap().width();
        let w2 = predict_interval_conformal(moved_p[0], &c2).unwrap().width();
        prop_assert!((w1 - w2).abs() < 1e-11);
    }

    #[test]
    fn squared_scores_square_absolute_ones(
        pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..50),
    ) {
        let (pred, truth): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let a = regression_scores(&pred, &truth, RegressionScore::Absolute).unwrap();
        let s = regression_scores(&pred, &truth, RegressionScore::Squared).unwrap();
        for (x, y) in a.iter().zip(&s) {
            prop_assert_eq!(x * x, *y);
        }
    }
}
