use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use uqkit::bnn::{mc_predict_batch, train, McPrediction, MlpConfig, TrainingLog};
use uqkit::datasets::{load_csv, synth_sine, Dataset, SineConfig, TargetKind};
use uqkit::selective::{rmse_rejection_curve, RejectionCurve};

use super::{finish, fmt_opt, truncate_curve};
use crate::config::{default_out, resolve, CommonArgs, RunConfig};
use crate::output::{num, OutputDir};
use crate::svg::{Chart, PALETTE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BnnRunConfig {
    pub out: PathBuf,
    pub seed: u64,
    /// Training CSV; the synthetic sine task when absent.
    pub data: Option<PathBuf>,
    /// Test CSV, required together with `data`.
    pub test_data: Option<PathBuf>,
    pub target: String,
    pub sine: SineConfig,
    /// The input width is set from the data.
    pub network: MlpConfig,
    /// Curves stop once this many test items remain.
    pub min_retained: usize,
}

impl Default for BnnRunConfig {
    fn default() -> Self {
        BnnRunConfig {
            out: default_out("bnn"),
            seed: 0,
            data: None,
            test_data: None,
            target: "y".into(),
            sine: SineConfig::default(),
            network: MlpConfig::default(),
            min_retained: 10,
        }
    }
}

impl RunConfig for BnnRunConfig {
    const SUBCOMMAND: &'static str = "bnn";

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

    fn normalize(&mut self) {
        self.sine.master_seed = self.seed;
        self.network.master_seed = self.seed;
    }
}

#[derive(Debug, Args)]
pub struct BnnArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Regression CSV for training instead of the sine task.
    #[arg(long, requires = "test_data")]
    pub data: Option<PathBuf>,
    #[arg(long, requires = "data")]
    pub test_data: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Monte Carlo forward passes per prediction.
    #[arg(long)]
    pub passes: Option<usize>,
}

/// Region means on the sine task; `None` for groups without test points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SineOrderings {
    pub epistemic_inside: Option<f64>,
    pub epistemic_outside: Option<f64>,
    pub aleatoric_noisy: Option<f64>,
    pub aleatoric_clean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BnnReport {
    pub log: TrainingLog,
    pub predictions: Vec<McPrediction>,
    pub total_curve: RejectionCurve,
    pub epistemic_curve: RejectionCurve,
    pub aleatoric_curve: RejectionCurve,
    pub rmse_full: f64,
    pub rmse_half_rejected: Option<f64>,
    pub sine: Option<SineOrderings>,
}

pub fn run(args: BnnArgs) -> Result<PathBuf> {
    let mut cfg: BnnRunConfig = resolve(&args.common)?;
    if args.data.is_some() {
        cfg.data = args.data;
        cfg.test_data = args.test_data;
    }
    if let Some(t) = args.target {
        cfg.target = t;
    }
    if let Some(v) = args.epochs {
        cfg.network.epochs = v;
    }
    if let Some(v) = args.dropout {
        cfg.network.dropout_rate = v;
    }
    if let Some(v) = args.passes {
        cfg.network.mc_passes = v;
    }
    let (dir, report) = execute(&cfg)?;
    println!(
        "final loss {:.5}; test RMSE {:.4}, after rejecting half {}",
        report.log.last(),
        report.rmse_full,
        fmt_opt(report.rmse_half_rejected)
    );
    if let Some(s) = &report.sine {
        println!(
            "epistemic inside/outside {} / {}; aleatoric clean/noisy {} / {}",
            fmt_opt(s.epistemic_inside),
            fmt_opt(s.epistemic_outside),
            fmt_opt(s.aleatoric_clean),
            fmt_opt(s.aleatoric_noisy)
        );
    }
    Ok(dir)
}

fn load(cfg: &BnnRunConfig) -> Result<(Dataset, Dataset)> {
    match (&cfg.data, &cfg.test_data) {
        (Some(train), Some(test)) => {
            let read = |p: &PathBuf| {
                load_csv(p, &cfg.target, TargetKind::Regression)
                    .with_context(|| format!("loading {}", p.display()))
            };
            Ok((read(train)?, read(test)?))
        }
        (None, None) => Ok(synth_sine(&cfg.sine)?),
        _ => anyhow::bail!("data and test_data must be given together"),
    }
}

fn mean_where(
    preds: &[McPrediction],
    xs: &[f64],
    keep: impl Fn(f64) -> bool,
    pick: fn(&McPrediction) -> f64,
) -> Option<f64> {
    let vals: Vec<f64> = preds
        .iter()
        .zip(xs)
        .filter(|(_, &x)| keep(x))
        .map(|(p, _)| pick(p))
        .collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

fn sine_orderings(sine: &SineConfig, xs: &[f64], preds: &[McPrediction]) -> SineOrderings {
    let (lo, hi) = sine.train_domain;
    let (a, b) = sine.noisy_interval;
    let inside = |x: f64| lo <= x && x <= hi;
    SineOrderings {
        epistemic_inside: mean_where(preds, xs, inside, |p| p.epistemic_var),
        epistemic_outside: mean_where(preds, xs, |x| !inside(x), |p| p.epistemic_var),
        aleatoric_noisy: mean_where(
            preds,
            xs,
            |x| x > a.max(lo) && x < b.min(hi),
            |p| p.aleatoric_var,
        ),
        aleatoric_clean: mean_where(preds, xs, |x| x > lo && x < a, |p| p.aleatoric_var),
    }
}

pub fn execute(cfg: &BnnRunConfig) -> Result<(PathBuf, BnnReport)> {
    let mut cfg = cfg.clone();
    cfg.normalize();
    let (train_ds, test_ds) = load(&cfg)?;
    if let Some(first) = cfg.network.layer_sizes.first_mut() {
        *first = train_ds.n_features();
    }
    let y_train = train_ds.values().context("bnn needs a regression target")?;
    let y_test = test_ds.values().context("bnn needs a regression target")?;

    let (net, log) = train(&train_ds.features, y_train, &cfg.network)?;
    let predictions = mc_predict_batch(&net, &test_ds.features, &cfg.network)?;
    let means: Vec<f64> = predictions.iter().map(|p| p.mean).collect();
    let curve = |pick: fn(&McPrediction) -> f64| -> Result<RejectionCurve> {
        let u: Vec<f64> = predictions.iter().map(pick).collect();
        let mut c = rmse_rejection_curve(&u, &means, y_test)?;
        truncate_curve(&mut c, cfg.min_retained);
        Ok(c)
    };
    let total_curve = curve(|p| p.total_var)?;
    let epistemic_curve = curve(|p| p.epistemic_var)?;
    let aleatoric_curve = curve(|p| p.aleatoric_var)?;
    let x1 = test_ds.features.column_values(0);
    let sine = cfg
        .data
        .is_none()
        .then(|| sine_orderings(&cfg.sine, &x1, &predictions));
    let report = BnnReport {
        rmse_full: total_curve.points[0].metric_value,
        rmse_half_rejected: total_curve.metric_at_fraction(0.5),
        log,
        predictions,
        total_curve,
        epistemic_curve,
        aleatoric_curve,
        sine,
    };

    let mut out = OutputDir::create(&cfg.out)?;
    write_outputs(&mut out, &test_ds, &report)?;
    out.write_str("model.json", &net.to_json())?;
    let dir = finish(out, &cfg)?;
    Ok((dir, report))
}

fn write_outputs(out: &mut OutputDir, test: &Dataset, report: &BnnReport) -> Result<()> {
    let y = test.values().expect("regression");
    let mut header: Vec<String> = test.feature_names.clone();
    header.extend(
        [
            "truth",
            "mean",
            "epistemic_var",
            "aleatoric_var",
            "total_var",
        ]
        .map(String::from),
    );
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write_csv(
        "predictions.csv",
        &header_refs,
        test.features
            .iter_rows()
            .zip(y)
            .zip(&report.predictions)
            .map(|((x, &t), p)| {
                let mut cells: Vec<String> = x.iter().copied().map(num).collect();
                cells.extend([t, p.mean, p.epistemic_var, p.aleatoric_var, p.total_var].map(num));
                cells
            }),
    )?;
    out.write_with("training_log.csv", |buf| report.log.write_csv(buf))?;

    let curves = [
        ("total", &report.total_curve),
        ("epistemic", &report.epistemic_curve),
        ("aleatoric", &report.aleatoric_curve),
    ];
    let mut header = vec!["rejected_fraction".to_string()];
    for (name, _) in &curves {
        header.push(format!("rmse_{name}"));
        header.push(format!("threshold_{name}"));
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write_csv(
        "rmse_curves.csv",
        &header_refs,
        (0..report.total_curve.points.len()).map(|i| {
            let mut cells = vec![num(report.total_curve.points[i].rejected_fraction)];
            for (_, c) in &curves {
                cells.push(num(c.points[i].metric_value));
                cells.push(num(c.points[i].uncertainty_threshold));
            }
            cells
        }),
    )?;

    let mut chart = Chart::new("RMSE-rejection curves", "rejected fraction", "RMSE");
    let xs: Vec<f64> = report
        .total_curve
        .points
        .iter()
        .map(|p| p.rejected_fraction)
        .collect();
    for (i, (name, c)) in curves.iter().enumerate() {
        chart.line(
            name,
            PALETTE[i],
            &xs,
            &c.points.iter().map(|p| p.metric_value).collect::<Vec<_>>(),
        );
    }
    out.write_str("rmse_curves.svg", &chart.render())?;

    let mut order: Vec<usize> = (0..test.len()).collect();
    let x1 = test.features.column_values(0);
    order.sort_by(|&a, &b| x1[a].total_cmp(&x1[b]));
    let xs: Vec<f64> = order.iter().map(|&i| x1[i]).collect();
    let at = |f: &dyn Fn(&McPrediction) -> f64| -> Vec<f64> {
        order.iter().map(|&i| f(&report.predictions[i])).collect()
    };
    let mut chart = Chart::new(
        "MC dropout predictions",
        &test.feature_names[0],
        &test.target_name,
    );
    chart.band(
        "mean ± 2 total sd",
        PALETTE[0],
        &xs,
        &at(&|p| p.mean - 2.0 * p.total_var.sqrt()),
        &at(&|p| p.mean + 2.0 * p.total_var.sqrt()),
    );
    chart.band(
        "mean ± 2 epistemic sd",
        PALETTE[1],
        &xs,
        &at(&|p| p.mean - 2.0 * p.epistemic_var.sqrt()),
        &at(&|p| p.mean + 2.0 * p.epistemic_var.sqrt()),
    );
    chart.points(
        "truth",
        PALETTE[2],
        &xs,
        &order.iter().map(|&i| y[i]).collect::<Vec<_>>(),
    );
    chart.line("predictive mean", PALETTE[3], &xs, &at(&|p| p.mean));
    out.write_str("predictions.svg", &chart.render())?;

    let mut header = vec!["final_loss", "rmse_full", "rmse_half_rejected"];
    let mut row = vec![
        num(report.log.last()),
        num(report.rmse_full),
        fmt_opt(report.rmse_half_rejected),
    ];
    if let Some(s) = &report.sine {
        header.extend([
            "epistemic_inside",
            "epistemic_outside",
            "aleatoric_clean",
            "aleatoric_noisy",
        ]);
        row.extend(
            [
                s.epistemic_inside,
                s.epistemic_outside,
                s.aleatoric_clean,
                s.aleatoric_noisy,
            ]
            .map(fmt_opt),
        );
    }
    out.write_csv("summary.csv", &header, [row])?;
    Ok(())
}
