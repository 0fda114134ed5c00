use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use uqkit::numerics::RandomStream;
use uqkit::selective::{
    accuracy_rejection_curve, rmse_rejection_curve, threshold_for_target, RejectionCurve,
};

fn accuracy_after_threshold(u: &[f64], pred: &[usize], truth: &[usize], threshold: f64) -> f64 {
    let kept: Vec<usize> = (0..u.len()).filter(|&i| u[i] < threshold).collect();
    kept.iter().filter(|&&i| pred[i] == truth[i]).count() as f64 / kept.len() as f64
}

#[test]
fn hand_enumerated_four_items() {
    let curve =
        accuracy_rejection_curve(&[0.9, 0.1, 0.5, 0.3], &[0, 1, 1, 0], &[1, 1, 0, 0]).unwrap();
    // rejection order: 0, 2, 3, 1
    let acc: Vec<f64> = curve.points.iter().map(|p| p.metric_value).collect();
    assert_eq!(acc, vec![0.5, 2.0 / 3.0, 1.0, 1.0]);
    let fr: Vec<f64> = curve.points.iter().map(|p| p.rejected_fraction).collect();
    assert_eq!(fr, vec![0.0, 0.25, 0.5, 0.75]);
}

#[test]
fn uninformative_uncertainty_gives_a_flat_curve() {
    let mut rng = RandomStream::new(3, 0);
    let n = 400;
    let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
    let pred: Vec<usize> = truth
        .iter()
        .map(|&t| {
            if rng.random::<f64>() < 0.7 {
                t
            } else {
                (t + 1) % 3
            }
        })
        .collect();
    let base = pred.iter().zip(&truth).filter(|(p, t)| p == t).count() as f64 / n as f64;
    let mut u: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let mut mean_at_half = 0.0;
    for _ in 0..100 {
        u.shuffle(&mut rng);
        let curve = accuracy_rejection_curve(&u, &pred, &truth).unwrap();
        mean_at_half += curve.metric_at_fraction(0.5).unwrap() / 100.0;
    }
    assert!(
        (mean_at_half - base).abs() < 0.01,
        "{mean_at_half} vs {base}"
    );
}

fn classification_case() -> impl Strategy<Value = (Vec<f64>, Vec<usize>, Vec<usize>)> {
    (2usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(0usize..3, n),
            prop::collection::vec(0usize..3, n),
        )
    })
}

fn is_monotone(curve: &RejectionCurve, up: bool) -> bool {
    curve.points.windows(2).all(|w| {
        if up {
            w[1].metric_value >= w[0].metric_value
        } else {
            w[1].metric_value <= w[0].metric_value + 1e-12
        }
    })
}

proptest! {
    #[test]
    fn oracle_uncertainty_gives_monotone_accuracy((_, pred, truth) in classification_case()) {
        let u: Vec<f64> = pred.iter().zip(&truth).map(|(p, t)| if p == t { 0.0 } else { 1.0 }).collect();
        prop_assert!(is_monotone(&accuracy_rejection_curve(&u, &pred, &truth).unwrap(), true));
    }

    #[test]
    fn oracle_uncertainty_gives_monotone_rmse(
        pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..60)
    ) {
        let (pred, truth): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let u: Vec<f64> = pred.iter().zip(&truth).map(|(p, t)| (p - t).abs()).collect();
        prop_assert!(is_monotone(&rmse_rejection_curve(&u, &pred, &truth).unwrap(), false));
    }

    #[test]
    fn threshold_round_trip((u, pred, truth) in classification_case(), pick in any::<prop::sample::Index>()) {
        // distinct uncertainties so a threshold rejects exactly its prefix
        let mut u = u;
        for (i, v) in u.iter_mut().enumerate() {
            *v += i as f64 * 1e-9;
        }
        let curve = accuracy_rejection_curve(&u, &pred, &truth).unwrap();
        let target = curve.points[pick.index(curve.points.len())].metric_value;
        let choice = threshold_for_target(&curve, target).unwrap();
        let achieved = accuracy_after_threshold(&u, &pred, &truth, choice.uncertainty_threshold);
        prop_assert!(achieved >= target);
        let rejected = u.iter().filter(|&&v| v >= choice.uncertainty_threshold).count();
        prop_assert_eq!(rejected as f64 / u.len() as f64, choice.rejected_fraction);
        // no smaller rejection level reaches the target
        for p in &curve.points {
            if p.rejected_fraction < choice.rejected_fraction {
                prop_assert!(p.metric_value < target);
            }
        }
    }
}
