use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use uqkit::datasets::{iris, load_csv, split, Dataset, SplitSpec, TargetKind};
use uqkit::forest::{train_forest, ForestConfig};
use uqkit::infotheory::{decompose, LogBase, UncertaintyDecomposition};
use uqkit::numerics::ProbVector;
use uqkit::selective::{accuracy_rejection_curve, threshold_for_target, RejectionCurve};

use super::{finish, fmt_opt, truncate_curve};
use crate::config::{default_out, resolve, CommonArgs, RunConfig};
use crate::output::{num, OutputDir};
use crate::svg::{Chart, PALETTE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestUqConfig {
    pub out: PathBuf,
    pub seed: u64,
    /// Classification CSV; the bundled Iris table when absent.
    pub data: Option<PathBuf>,
    pub target: String,
    pub train_size: usize,
    /// Defaults to every row not used for training.
    pub test_size: Option<usize>,
    pub trees_count: usize,
    pub max_depth: Option<usize>,
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub log_base: LogBase,
    /// Curves stop once this many test items remain.
    pub min_retained: usize,
    pub target_accuracy: f64,
}

impl Default for ForestUqConfig {
    fn default() -> Self {
        ForestUqConfig {
            out: default_out("forest-uq"),
            seed: 0,
            data: None,
            target: "species".into(),
            train_size: 30,
            test_size: None,
            trees_count: 100,
            max_depth: Some(2),
            features_per_split: None,
            bootstrap: true,
            log_base: LogBase::Two,
            min_retained: 10,
            target_accuracy: 0.97,
        }
    }
}

impl RunConfig for ForestUqConfig {
    const SUBCOMMAND: &'static str = "forest-uq";

    fn out(&self) -> &Path {
        &self.out
    }

    fn set_out(&mut self, out: PathBuf) {
        self.out = out;
    }

    fn set_seed(&mut self, seed: u64) -> Result<()> {
        self.seed = seed;
        Ok(())
    }
}

impl ForestUqConfig {
    pub fn forest_config(&self) -> ForestConfig {
        ForestConfig {
            trees_count: self.trees_count,
            max_depth: self.max_depth,
            features_per_split: self.features_per_split,
            bootstrap: self.bootstrap,
            master_seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct ForestUqArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Classification CSV to use instead of Iris.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub train_size: Option<usize>,
    #[arg(long)]
    pub test_size: Option<usize>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UncertaintyRow {
    pub truth: usize,
    pub prediction: usize,
    pub decomposition: UncertaintyDecomposition,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForestUqReport {
    pub rows: Vec<UncertaintyRow>,
    pub accuracy: f64,
    pub total_curve: RejectionCurve,
    pub aleatoric_curve: RejectionCurve,
    pub epistemic_curve: RejectionCurve,
    /// Smallest rejected fraction on the total curve reaching the target.
    pub target_fraction: Option<f64>,
    pub target_threshold: Option<f64>,
}

pub fn run(args: ForestUqArgs) -> Result<PathBuf> {
    let mut cfg: ForestUqConfig = resolve(&args.common)?;
    if args.data.is_some() {
        cfg.data = args.data;
    }
    if let Some(t) = args.target {
        cfg.target = t;
    }
    if let Some(v) = args.train_size {
        cfg.train_size = v;
    }
    if args.test_size.is_some() {
        cfg.test_size = args.test_size;
    }
    if let Some(v) = args.trees {
        cfg.trees_count = v;
    }
    if args.max_depth.is_some() {
        cfg.max_depth = args.max_depth;
    }
    let (dir, report) = execute(&cfg)?;
    println!("test accuracy {:.4}", report.accuracy);
    match report.target_fraction {
        Some(f) => println!(
            "accuracy {} reached after rejecting {:.1}% (total uncertainty > {})",
            cfg.target_accuracy,
            100.0 * f,
            fmt_opt(report.target_threshold)
        ),
        None => println!("accuracy {} not reached", cfg.target_accuracy),
    }
    Ok(dir)
}

fn load(cfg: &ForestUqConfig) -> Result<Dataset> {
    match &cfg.data {
        Some(path) => load_csv(path, &cfg.target, TargetKind::Classification)
            .with_context(|| format!("loading {}", path.display())),
        None => Ok(iris()),
    }
}

pub fn execute(cfg: &ForestUqConfig) -> Result<(PathBuf, ForestUqReport)> {
    let ds = load(cfg)?;
    let n = ds.len();
    ensure!(
        cfg.train_size < n,
        "train_size {} leaves no test rows out of {n}",
        cfg.train_size
    );
    let test_size = cfg.test_size.unwrap_or(n - cfg.train_size);
    ensure!(
        cfg.train_size + test_size <= n,
        "train_size + test_size exceeds the {n} available rows"
    );
    let parts = split(
        &ds,
        &SplitSpec::counts(
            &[cfg.train_size, test_size, n - cfg.train_size - test_size],
            cfg.seed,
        ),
    )?;
    let (train, test) = (&parts[0], &parts[1]);
    let n_classes = ds
        .n_classes()
        .context("forest-uq needs a classification target")?;
    let forest = train_forest(
        &train.features,
        train.labels().expect("classification"),
        n_classes,
        &cfg.forest_config(),
    )?;

    let truths = test.labels().expect("classification");
    let rows: Vec<UncertaintyRow> = test
        .features
        .iter_rows()
        .collect::<Vec<_>>()
        .par_iter()
        .zip(truths)
        .map(|(x, &truth)| -> Result<UncertaintyRow> {
            let members = forest.predict_proba_per_tree(x)?;
            let prediction = ProbVector::mean(&members)?.argmax();
            Ok(UncertaintyRow {
                truth,
                prediction,
                decomposition: decompose(&members, cfg.log_base)?,
            })
        })
        .collect::<Result<_>>()?;

    let predictions: Vec<usize> = rows.iter().map(|r| r.prediction).collect();
    let curve = |pick: fn(&UncertaintyDecomposition) -> f64| -> Result<RejectionCurve> {
        let u: Vec<f64> = rows.iter().map(|r| pick(&r.decomposition)).collect();
        let mut c = accuracy_rejection_curve(&u, &predictions, truths)?;
        truncate_curve(&mut c, cfg.min_retained);
        Ok(c)
    };
    let total_curve = curve(|d| d.total)?;
    let aleatoric_curve = curve(|d| d.aleatoric)?;
    let epistemic_curve = curve(|d| d.epistemic)?;
    let choice = threshold_for_target(&total_curve, cfg.target_accuracy);
    let accuracy =
        rows.iter().filter(|r| r.truth == r.prediction).count() as f64 / rows.len() as f64;
    let report = ForestUqReport {
        rows,
        accuracy,
        total_curve,
        aleatoric_curve,
        epistemic_curve,
        target_fraction: choice.map(|c| c.rejected_fraction),
        target_threshold: choice.map(|c| c.uncertainty_threshold),
    };

    let mut out = OutputDir::create(&cfg.out)?;
    write_outputs(&mut out, cfg, test, &report)?;
    let dir = finish(out, cfg)?;
    Ok((dir, report))
}

fn write_outputs(
    out: &mut OutputDir,
    cfg: &ForestUqConfig,
    test: &Dataset,
    report: &ForestUqReport,
) -> Result<()> {
    let names = test.class_names().expect("classification");
    let mut header: Vec<String> = test.feature_names.clone();
    header.extend(
        [
            "truth",
            "prediction",
            "correct",
            "total",
            "aleatoric",
            "epistemic",
        ]
        .map(String::from),
    );
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write_csv(
        "uncertainty.csv",
        &header_refs,
        test.features.iter_rows().zip(&report.rows).map(|(x, r)| {
            let mut cells: Vec<String> = x.iter().copied().map(num).collect();
            cells.push(names[r.truth].clone());
            cells.push(names[r.prediction].clone());
            cells.push((r.truth == r.prediction).to_string());
            cells.push(num(r.decomposition.total));
            cells.push(num(r.decomposition.aleatoric));
            cells.push(num(r.decomposition.epistemic));
            cells
        }),
    )?;

    let curves = [
        ("total", &report.total_curve),
        ("aleatoric", &report.aleatoric_curve),
        ("epistemic", &report.epistemic_curve),
    ];
    let n_points = report.total_curve.points.len();
    let mut header = vec!["rejected_fraction".to_string(), "retained".to_string()];
    for (name, _) in &curves {
        header.push(format!("accuracy_{name}"));
        header.push(format!("threshold_{name}"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let n_test = report.rows.len();
    out.write_csv(
        "rejection_curves.csv",
        &header_refs,
        (0..n_points).map(|i| {
            let p = &report.total_curve.points[i];
            let mut cells = vec![
                num(p.rejected_fraction),
                (n_test - p.rejected_count).to_string(),
            ];
            for (_, c) in &curves {
                cells.push(num(c.points[i].metric_value));
                cells.push(num(c.points[i].uncertainty_threshold));
            }
            cells
        }),
    )?;

    let unit = match cfg.log_base {
        LogBase::Two => "bits",
        LogBase::E => "nats",
    };
    let mut chart = Chart::new("Accuracy-rejection curves", "rejected fraction", "accuracy")
        .secondary_axis(&format!("total uncertainty threshold ({unit})"));
    let xs: Vec<f64> = report
        .total_curve
        .points
        .iter()
        .map(|p| p.rejected_fraction)
        .collect();
    for (i, (name, c)) in curves.iter().enumerate() {
        let ys: Vec<f64> = c.points.iter().map(|p| p.metric_value).collect();
        chart.line(name, PALETTE[i], &xs, &ys);
    }
    // the first point has an infinite threshold
    let finite: Vec<(f64, f64)> = report
        .total_curve
        .points
        .iter()
        .filter(|p| p.uncertainty_threshold.is_finite())
        .map(|p| (p.rejected_fraction, p.uncertainty_threshold))
        .collect();
    chart.line_secondary(
        "total threshold",
        PALETTE[3],
        &finite.iter().map(|p| p.0).collect::<Vec<_>>(),
        &finite.iter().map(|p| p.1).collect::<Vec<_>>(),
    );
    out.write_str("rejection_curves.svg", &chart.render())?;

    out.write_csv(
        "summary.csv",
        &[
            "n_test",
            "accuracy",
            "target_accuracy",
            "target_fraction",
            "target_threshold",
        ],
        [vec![
            n_test.to_string(),
            num(report.accuracy),
            num(cfg.target_accuracy),
            fmt_opt(report.target_fraction),
            fmt_opt(report.target_threshold),
        ]],
    )?;
    Ok(())
}
