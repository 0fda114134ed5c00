use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use uqkit::conformal::{
    calibrate, classification_scores, empirical_coverage, predict_set, predict_set_top1_fallback,
    CalibrationResult, PredictionSet, ScoreKind,
};
use uqkit::datasets::{
    load_csv, split, subsample, synth_classes, ClassesConfig, Dataset, SplitSpec, TargetKind,
};
use uqkit::forest::{train_forest, ForestConfig, RandomForest};
use uqkit::numerics::ProbVector;

use super::finish;
use crate::config::{check_alpha, default_out, resolve, CommonArgs, RunConfig};
use crate::output::{num, OutputDir};
use crate::svg::{Chart, PALETTE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConformalRunConfig {
    pub out: PathBuf,
    pub seed: u64,
    pub alpha: f64,
    /// Classification CSV (e.g. covtype.csv); synthetic classes when absent.
    pub data: Option<PathBuf>,
    pub target: String,
    /// Used without `data`; its size is the sum of the three splits.
    pub synthetic: ClassesConfig,
    pub train_size: usize,
    pub calibration_size: usize,
    pub test_size: usize,
    pub trees_count: usize,
    pub max_depth: Option<usize>,
    pub features_per_split: Option<usize>,
    /// Replace empty sets by the most probable class.
    pub top1_fallback: bool,
}

impl Default for ConformalRunConfig {
    fn default() -> Self {
        ConformalRunConfig {
            out: default_out("conformal"),
            seed: 0,
            alpha: 0.2,
            data: None,
            target: "Cover_Type".into(),
            synthetic: ClassesConfig {
                n: 10_000,
                n_classes: 7,
                n_features: 10,
                separation: 1.0,
                master_seed: 0,
            },
            train_size: 6400,
            calibration_size: 1600,
            test_size: 2000,
            trees_count: 100,
            max_depth: Some(2),
            features_per_split: None,
            top1_fallback: false,
        }
    }
}

impl RunConfig for ConformalRunConfig {
    const SUBCOMMAND: &'static str = "conformal";

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

    fn set_alpha(&mut self, alpha: f64) -> Result<()> {
        self.alpha = alpha;
        Ok(())
    }

    fn normalize(&mut self) {
        self.synthetic.master_seed = self.seed;
        self.synthetic.n = self.train_size + self.calibration_size + self.test_size;
    }
}

#[derive(Debug, Args)]
pub struct ConformalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Classification CSV, e.g. the output of fetch-covertype.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub train_size: Option<usize>,
    #[arg(long)]
    pub calibration_size: Option<usize>,
    #[arg(long)]
    pub test_size: Option<usize>,
    #[arg(long)]
    pub trees: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub top1_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConformalReport {
    pub calibration: CalibrationResult,
    pub sets: Vec<PredictionSet>,
    pub coverage: f64,
    pub mean_set_size: f64,
    pub empty_sets: usize,
    /// `counts[s]` test items received a set of size `s`.
    pub size_counts: Vec<usize>,
}

pub fn run(args: ConformalArgs) -> Result<PathBuf> {
    let mut cfg: ConformalRunConfig = resolve(&args.common)?;
    if args.data.is_some() {
        cfg.data = args.data;
    }
    if let Some(t) = args.target {
        cfg.target = t;
    }
    if let Some(v) = args.train_size {
        cfg.train_size = v;
    }
    if let Some(v) = args.calibration_size {
        cfg.calibration_size = v;
    }
    if let Some(v) = args.test_size {
        cfg.test_size = v;
    }
    if let Some(v) = args.trees {
        cfg.trees_count = v;
    }
    if args.max_depth.is_some() {
        cfg.max_depth = args.max_depth;
    }
    cfg.top1_fallback |= args.top1_fallback;
    let (dir, report) = execute(&cfg)?;
    let c = &report.calibration;
    println!(
        "n = {}, k = {}, q_hat = {}, class threshold {}",
        c.n,
        c.k,
        c.q_hat,
        c.class_threshold()
    );
    println!(
        "coverage {:.4}, mean set size {:.4}, empty sets {}",
        report.coverage, report.mean_set_size, report.empty_sets
    );
    Ok(dir)
}

fn load(cfg: &ConformalRunConfig) -> Result<Dataset> {
    match &cfg.data {
        Some(path) => load_csv(path, &cfg.target, TargetKind::Classification)
            .with_context(|| format!("loading {}", path.display())),
        None => Ok(synth_classes(&cfg.synthetic)?),
    }
}

fn softmaxes(forest: &RandomForest, ds: &Dataset) -> Result<Vec<ProbVector>> {
    use rayon::prelude::*;
    (0..ds.len())
        .into_par_iter()
        .map(|i| Ok(forest.predict_proba_mean(ds.features.row(i))?))
        .collect()
}

pub fn execute(cfg: &ConformalRunConfig) -> Result<(PathBuf, ConformalReport)> {
    let mut cfg = cfg.clone();
    cfg.normalize();
    check_alpha(cfg.alpha)?;
    let ds = load(&cfg)?;
    let used = cfg.train_size + cfg.calibration_size + cfg.test_size;
    ensure!(
        used <= ds.len(),
        "splits need {used} rows but the data has {}",
        ds.len()
    );
    let pool = subsample(&ds, used, cfg.seed)?;
    let parts = split(
        &pool,
        &SplitSpec::counts(
            &[cfg.train_size, cfg.calibration_size, cfg.test_size],
            cfg.seed,
        ),
    )?;
    let (train, cal, test) = (&parts[0], &parts[1], &parts[2]);
    let n_classes = ds
        .n_classes()
        .context("conformal needs a classification target")?;
    let forest = train_forest(
        &train.features,
        train.labels().expect("classification"),
        n_classes,
        &ForestConfig {
            trees_count: cfg.trees_count,
            max_depth: cfg.max_depth,
            features_per_split: cfg.features_per_split,
            bootstrap: true,
            master_seed: cfg.seed,
        },
    )?;

    let cal_truths = cal.labels().expect("classification");
    let cal_probs = softmaxes(&forest, cal)?;
    let scores = classification_scores(&cal_probs, cal_truths)?;
    let calibration = calibrate(&scores, cfg.alpha, ScoreKind::Classification)?;

    let test_truths = test.labels().expect("classification");
    let test_probs = softmaxes(&forest, test)?;
    let sets: Vec<PredictionSet> = test_probs
        .iter()
        .map(|p| {
            if cfg.top1_fallback {
                predict_set_top1_fallback(p, &calibration)
            } else {
                predict_set(p, &calibration)
            }
        })
        .collect::<Result<_, _>>()?;
    let coverage = empirical_coverage(&sets, test_truths)?;
    let mut size_counts = vec![0; n_classes + 1];
    for s in &sets {
        size_counts[s.len()] += 1;
    }
    let report = ConformalReport {
        calibration,
        coverage,
        mean_set_size: sets.iter().map(PredictionSet::len).sum::<usize>() as f64
            / sets.len() as f64,
        empty_sets: size_counts[0],
        size_counts,
        sets,
    };

    let mut out = OutputDir::create(&cfg.out)?;
    out.write_str("calibration.json", &format!("{}\n", calibration.to_json()))?;
    let names = ds.class_names().expect("classification");
    out.write_csv(
        "calibration_scores.csv",
        &["row", "truth", "p_truth", "score"],
        cal_probs
            .iter()
            .zip(cal_truths)
            .zip(&scores)
            .enumerate()
            .map(|(i, ((p, &t), &s))| {
                vec![
                    i.to_string(),
                    names[t].clone(),
                    num(p.as_slice()[t]),
                    num(s),
                ]
            }),
    )?;
    let mut header = vec![
        "row".to_string(),
        "truth".into(),
        "set".into(),
        "size".into(),
        "covered".into(),
    ];
    header.extend(names.iter().map(|c| format!("p_{c}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write_csv(
        "prediction_sets.csv",
        &header_refs,
        report
            .sets
            .iter()
            .zip(test_truths)
            .zip(&test_probs)
            .enumerate()
            .map(|(i, ((s, &t), p))| {
                let members: Vec<&str> =
                    s.class_indices.iter().map(|&c| names[c].as_str()).collect();
                let mut cells = vec![
                    i.to_string(),
                    names[t].clone(),
                    members.join(" "),
                    s.len().to_string(),
                    s.contains(t).to_string(),
                ];
                cells.extend(p.as_slice().iter().copied().map(num));
                cells
            }),
    )?;
    out.write_csv(
        "set_sizes.csv",
        &["size", "count"],
        report
            .size_counts
            .iter()
            .enumerate()
            .map(|(s, c)| vec![s.to_string(), c.to_string()]),
    )?;
    let mut chart = Chart::new(
        &format!("Prediction set sizes (alpha = {})", cfg.alpha),
        "set size",
        "test items",
    );
    chart.bars(
        "count",
        PALETTE[0],
        &(0..report.size_counts.len())
            .map(|s| s as f64)
            .collect::<Vec<_>>(),
        &report
            .size_counts
            .iter()
            .map(|&c| c as f64)
            .collect::<Vec<_>>(),
    );
    out.write_str("set_sizes.svg", &chart.render())?;
    out.write_csv(
        "summary.csv",
        &[
            "alpha",
            "n",
            "k",
            "q_hat",
            "class_threshold",
            "coverage",
            "mean_set_size",
            "empty_sets",
        ],
        [vec![
            num(cfg.alpha),
            calibration.n.to_string(),
            calibration.k.to_string(),
            num(calibration.q_hat),
            num(calibration.class_threshold()),
            num(report.coverage),
            num(report.mean_set_size),
            report.empty_sets.to_string(),
        ]],
    )?;
    let dir = finish(out, &cfg)?;
    Ok((dir, report))
}
