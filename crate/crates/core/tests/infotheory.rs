use proptest::prelude::*;
use uqkit::infotheory::{decompose, entropy, shannon_entropy, LogBase};
use uqkit::numerics::ProbVector;

fn prob_vector(len: usize) -> impl Strategy<Value = ProbVector> {
    prop::collection::vec(0.0f64..1.0, len).prop_filter_map("all zero", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| ProbVector::new(w.iter().map(|v| v / s).collect()).unwrap())
    })
}

fn ensemble() -> impl Strategy<Value = Vec<ProbVector>> {
    (2usize..6).prop_flat_map(|k| prop::collection::vec(prob_vector(k), 1..8))
}

#[test]
fn printed_tree_entropies_in_bits() {
    let cases: [(&[f64], f64); 4] = [
        (&[1.0, 0.0, 0.0], 0.0),
        (&[0.1, 0.9, 0.0], 0.47),
        (&[0.0, 0.79, 0.21], 0.74),
        (&[0.02, 0.94, 0.04], 0.38),
    ];
    for (p, want) in cases {
        let h = shannon_entropy(p, LogBase::Two).unwrap();
        assert!((h - want).abs() < 0.01, "{p:?}: {h}");
    }
}

proptest! {
    #[test]
    fn entropy_is_permutation_invariant(p in prob_vector(5), seed in any::<u64>()) {
        let mut v = p.as_slice().to_vec();
        let shift = (seed % 5) as usize;
        v.rotate_left(shift);
        v.swap(0, 4);
        let q = ProbVector::new(v).unwrap();
        prop_assert!((entropy(&p, LogBase::Two) - entropy(&q, LogBase::Two)).abs() < 1e-12);
    }

    #[test]
    fn bits_are_nats_over_ln_two(p in prob_vector(4)) {
        let bits = entropy(&p, LogBase::Two);
        let nats = entropy(&p, LogBase::E);
        prop_assert!((bits - nats / std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn entropy_is_bounded(p in prob_vector(6)) {
        let h = entropy(&p, LogBase::Two);
        prop_assert!(h >= 0.0 && h <= 6f64.log2() + 1e-12);
    }

    #[test]
    fn decomposition_is_consistent(members in ensemble()) {
        let d = decompose(&members, LogBase::E).unwrap();
        prop_assert!(d.epistemic >= 0.0);
        prop_assert!(d.aleatoric >= 0.0 && d.aleatoric <= d.total);
        prop_assert!((d.total - d.aleatoric - d.epistemic).abs() < 1e-9);
    }

    #[test]
    fn identical_members_carry_no_epistemic_uncertainty(p in prob_vector(3), m in 1usize..10) {
        let d = decompose(&vec![p; m], LogBase::Two).unwrap();
        prop_assert!(d.epistemic < 1e-12);
    }
}
