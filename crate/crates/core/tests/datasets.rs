use proptest::prelude::*;
use uqkit::datasets::{
    iris, load_csv, read_csv, split, subsample, synth_classes, synth_linear, synth_sine, write_csv,
    ClassesConfig, LinearConfig, SineConfig, SplitSpec, TargetKind,
};

#[test]
fn csv_round_trip_is_exact() {
    let ds = synth_linear(&LinearConfig {
        n: 50,
        beta: vec![0.1, 0.2, 0.3],
        ..Default::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lin.csv");
    write_csv(&ds, std::fs::File::create(&path).unwrap()).unwrap();
    assert_eq!(load_csv(&path, "y", TargetKind::Regression).unwrap(), ds);

    let flowers = iris();
    let mut buf = Vec::new();
    write_csv(&flowers, &mut buf).unwrap();
    assert_eq!(
        read_csv(buf.as_slice(), "species", TargetKind::Classification).unwrap(),
        flowers
    );
}

#[test]
fn iris_shape() {
    let ds = iris();
    assert_eq!(
        (ds.len(), ds.n_features(), ds.n_classes()),
        (150, 4, Some(3))
    );
    assert_eq!(
        ds.class_names().unwrap(),
        ["setosa", "versicolor", "virginica"]
    );
    let per_class = (0..3).map(|c| ds.labels().unwrap().iter().filter(|&&l| l == c).count());
    assert!(per_class.into_iter().all(|n| n == 50));
}

#[test]
fn sine_noise_only_inside_the_noisy_interval() {
    let cfg = SineConfig::default();
    let (train, test) = synth_sine(&cfg).unwrap();
    assert_eq!((train.len(), test.len()), (200, 100));
    for ds in [&train, &test] {
        for (row, &y) in ds.features.iter_rows().zip(ds.values().unwrap()) {
            let x = row[0];
            if !(0.0..=6.0).contains(&x) {
                assert_eq!(y, x.sin());
            }
        }
    }
    assert!(train
        .features
        .column_values(0)
        .iter()
        .all(|x| (-4.0..4.0).contains(x)));
    assert!(test.features.column_values(0).iter().any(|x| x.abs() > 4.0));
}

#[test]
fn generators_are_deterministic() {
    let cfg = ClassesConfig {
        master_seed: 5,
        ..Default::default()
    };
    assert_eq!(synth_classes(&cfg).unwrap(), synth_classes(&cfg).unwrap());
    let other = ClassesConfig {
        master_seed: 6,
        ..Default::default()
    };
    assert_ne!(synth_classes(&cfg).unwrap(), synth_classes(&other).unwrap());
}

#[test]
fn infeasible_requests_fail() {
    let ds = iris();
    assert!(split(&ds, &SplitSpec::counts(&[100, 100], 0)).is_err());
    assert!(split(&ds, &SplitSpec::fractions(&[0.5, 0.6], 0)).is_err());
    assert!(subsample(&ds, 151, 0).is_err());
    assert!(read_csv("a,b\n1,2\n".as_bytes(), "c", TargetKind::Regression).is_err());
    assert!(read_csv("a,b\n1,x\n".as_bytes(), "b", TargetKind::Regression).is_err());
}

proptest! {
    #[test]
    fn split_is_a_partition(a in 0usize..150, b in 0usize..150, seed in any::<u64>()) {
        prop_assume!(a + b <= 150);
        let ds = iris();
        let parts = split(&ds, &SplitSpec::counts(&[a, b, 150 - a - b], seed)).unwrap();
        prop_assert_eq!(parts.iter().map(|p| p.len()).collect::<Vec<_>>(), vec![a, b, 150 - a - b]);
        // iris has duplicate rows, so compare multisets
        let mut all: Vec<String> = parts
            .iter()
            .flat_map(|p| {
                p.features
                    .iter_rows()
                    .zip(p.labels().unwrap())
                    .map(|(r, l)| format!("{r:?}{l}"))
                    .collect::<Vec<_>>()
            })
            .collect();
        let mut orig: Vec<String> = ds
            .features
            .iter_rows()
            .zip(ds.labels().unwrap())
            .map(|(r, l)| format!("{r:?}{l}"))
            .collect();
        all.sort();
        orig.sort();
        prop_assert_eq!(all, orig);
        prop_assert_eq!(&parts, &split(&ds, &SplitSpec::counts(&[a, b, 150 - a - b], seed)).unwrap());
    }
}
