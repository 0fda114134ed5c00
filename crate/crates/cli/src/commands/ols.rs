use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use uqkit::datasets::{load_csv, synth_linear, Dataset, LinearConfig, TargetKind};
use uqkit::linreg::{fit_ols, predict_interval, OlsFit};

use super::finish;
use crate::config::{check_alpha, default_out, resolve, CommonArgs, RunConfig};
use crate::output::{num, OutputDir};
use crate::svg::{Chart, PALETTE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Base,
    FewObs,
    Noisy,
    Heteroscedastic,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Base => "base",
            Scenario::FewObs => "few-obs",
            Scenario::Noisy => "noisy",
            Scenario::Heteroscedastic => "heteroscedastic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OlsConfig {
    pub out: PathBuf,
    pub seed: u64,
    /// The wide band has level `1 - alpha`.
    pub alpha: f64,
    /// The narrow band; must exceed `alpha`.
    pub secondary_alpha: f64,
    /// Synthetic scenarios; ignored when `data` is set.
    pub scenarios: Vec<Scenario>,
    pub n: usize,
    /// Intercept followed by slopes.
    pub beta: Vec<f64>,
    pub noise_sigma: f64,
    pub feature_mean: f64,
    pub feature_sd: f64,
    pub few_obs_n: usize,
    pub noisy_sigma: f64,
    pub grid_points: usize,
    pub data: Option<PathBuf>,
    pub target: String,
}

impl Default for OlsConfig {
    fn default() -> Self {
        OlsConfig {
            out: default_out("ols"),
            seed: 0,
            alpha: 0.1,
            secondary_alpha: 0.2,
            scenarios: vec![
                Scenario::Base,
                Scenario::FewObs,
                Scenario::Noisy,
                Scenario::Heteroscedastic,
            ],
            n: 100,
            beta: vec![1.0, 2.0],
            noise_sigma: 1.0,
            feature_mean: 0.0,
            feature_sd: 1.0,
            few_obs_n: 10,
            noisy_sigma: 3.0,
            grid_points: 50,
            data: None,
            target: "y".into(),
        }
    }
}

impl RunConfig for OlsConfig {
    const SUBCOMMAND: &'static str = "ols";

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
}

impl OlsConfig {
    pub fn linear_config(&self, scenario: Scenario) -> LinearConfig {
        let mut cfg = LinearConfig {
            n: self.n,
            beta: self.beta.clone(),
            noise_sigma: self.noise_sigma,
            heteroscedastic: false,
            feature_mean: self.feature_mean,
            feature_sd: self.feature_sd,
            master_seed: self.seed,
        };
        match scenario {
            Scenario::Base => {}
            Scenario::FewObs => cfg.n = self.few_obs_n,
            Scenario::Noisy => cfg.noise_sigma = self.noisy_sigma,
            Scenario::Heteroscedastic => cfg.heteroscedastic = true,
        }
        cfg
    }
}

#[derive(Debug, Args)]
pub struct OlsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Scenarios to run; repeat the flag for several.
    #[arg(long = "scenario", value_enum)]
    pub scenarios: Vec<Scenario>,
    /// Level of the narrow band is `1 - secondary_alpha`.
    #[arg(long)]
    pub secondary_alpha: Option<f64>,
    /// Regression CSV to use instead of synthetic data.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Target column of `--data`.
    #[arg(long)]
    pub target: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSummary {
    pub scenario: String,
    pub n: usize,
    pub coefficients: Vec<f64>,
    pub residual_sd: f64,
    pub mean_width: f64,
    pub mean_width_secondary: f64,
    /// Narrow band inside the wide band at every grid point.
    pub nested: bool,
}

pub fn run(args: OlsArgs) -> Result<PathBuf> {
    let mut cfg: OlsConfig = resolve(&args.common)?;
    if !args.scenarios.is_empty() {
        cfg.scenarios = args.scenarios;
    }
    if let Some(a) = args.secondary_alpha {
        cfg.secondary_alpha = a;
    }
    if args.data.is_some() {
        cfg.data = args.data;
    }
    if let Some(t) = args.target {
        cfg.target = t;
    }
    let (dir, summaries) = execute(&cfg)?;
    for s in &summaries {
        println!(
            "{}: n={} sd={:.4} mean width {:.4} / {:.4}",
            s.scenario, s.n, s.residual_sd, s.mean_width, s.mean_width_secondary
        );
    }
    Ok(dir)
}

pub fn execute(cfg: &OlsConfig) -> Result<(PathBuf, Vec<ScenarioSummary>)> {
    check_alpha(cfg.alpha)?;
    check_alpha(cfg.secondary_alpha)?;
    ensure!(
        cfg.secondary_alpha > cfg.alpha,
        "secondary_alpha {} must exceed alpha {} so its band is narrower",
        cfg.secondary_alpha,
        cfg.alpha
    );
    ensure!(cfg.grid_points >= 2, "grid_points must be at least 2");

    let runs: Vec<(String, Dataset, Option<LinearConfig>)> = match &cfg.data {
        Some(path) => {
            let ds = load_csv(path, &cfg.target, TargetKind::Regression)
                .with_context(|| format!("loading {}", path.display()))?;
            vec![("data".into(), ds, None)]
        }
        None => {
            if cfg.scenarios.is_empty() {
                bail!("no scenarios selected");
            }
            cfg.scenarios
                .iter()
                .map(|&s| {
                    let lc = cfg.linear_config(s);
                    Ok((s.name().to_string(), synth_linear(&lc)?, Some(lc)))
                })
                .collect::<Result<_>>()?
        }
    };

    let mut out = OutputDir::create(&cfg.out)?;
    let mut summaries = Vec::new();
    for (name, ds, lc) in &runs {
        summaries.push(write_scenario(&mut out, cfg, name, ds, lc.as_ref())?);
    }
    out.write_csv(
        "ols_summary.csv",
        &[
            "scenario",
            "n",
            "residual_sd",
            "mean_width",
            "mean_width_secondary",
            "nested",
        ],
        summaries.iter().map(|s| {
            vec![
                s.scenario.clone(),
                s.n.to_string(),
                num(s.residual_sd),
                num(s.mean_width),
                num(s.mean_width_secondary),
                s.nested.to_string(),
            ]
        }),
    )?;
    let dir = finish(out, cfg)?;
    Ok((dir, summaries))
}

fn level_label(alpha: f64) -> String {
    num(((1.0 - alpha) * 1e6).round() / 1e4)
}

/// Grid over the first regressor with the others held at their centre.
fn grid(cfg: &OlsConfig, ds: &Dataset, lc: Option<&LinearConfig>) -> Vec<Vec<f64>> {
    let k = ds.n_features();
    let (lo, hi, centre): (f64, f64, Vec<f64>) = match lc {
        Some(lc) => (
            lc.feature_mean - 3.0 * lc.feature_sd,
            lc.feature_mean + 3.0 * lc.feature_sd,
            vec![lc.feature_mean; k],
        ),
        None => {
            let cols: Vec<Vec<f64>> = (0..k).map(|j| ds.features.column_values(j)).collect();
            let lo = cols[0].iter().copied().fold(f64::INFINITY, f64::min);
            let hi = cols[0].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let centre = cols
                .iter()
                .map(|c| c.iter().sum::<f64>() / c.len() as f64)
                .collect();
            (lo, hi, centre)
        }
    };
    let m = cfg.grid_points;
    (0..m)
        .map(|i| {
            let mut row = centre.clone();
            row[0] = lo + (hi - lo) * i as f64 / (m - 1) as f64;
            row
        })
        .collect()
}

fn write_scenario(
    out: &mut OutputDir,
    cfg: &OlsConfig,
    name: &str,
    ds: &Dataset,
    lc: Option<&LinearConfig>,
) -> Result<ScenarioSummary> {
    let y = ds.values().context("ols needs a regression target")?;
    let fit: OlsFit = fit_ols(&ds.features, y).with_context(|| format!("fitting {name}"))?;

    let mut terms = vec!["intercept".to_string()];
    terms.extend(ds.feature_names.iter().cloned());
    out.write_csv(
        &format!("ols_{name}_coefficients.csv"),
        &["term", "estimate"],
        terms
            .iter()
            .zip(&fit.coefficients)
            .map(|(t, b)| vec![t.clone(), num(*b)]),
    )?;

    let mut header: Vec<String> = ds.feature_names.clone();
    header.push(ds.target_name.clone());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write_csv(
        &format!("ols_{name}_data.csv"),
        &header_refs,
        ds.features.iter_rows().zip(y).map(|(row, &v)| {
            row.iter()
                .copied()
                .chain(std::iter::once(v))
                .map(num)
                .collect::<Vec<_>>()
        }),
    )?;

    let points = grid(cfg, ds, lc);
    let mut wide = Vec::with_capacity(points.len());
    let mut narrow = Vec::with_capacity(points.len());
    for x in &points {
        wide.push(predict_interval(&fit, x, cfg.alpha)?);
        narrow.push(predict_interval(&fit, x, cfg.secondary_alpha)?);
    }
    let (lw, ln) = (level_label(cfg.alpha), level_label(cfg.secondary_alpha));
    let x1_name = ds.feature_names[0].clone();
    let interval_header = [
        x1_name.clone(),
        "point".into(),
        format!("lower_{lw}"),
        format!("upper_{lw}"),
        format!("lower_{ln}"),
        format!("upper_{ln}"),
    ];
    let interval_refs: Vec<&str> = interval_header.iter().map(String::as_str).collect();
    out.write_csv(
        &format!("ols_{name}_intervals.csv"),
        &interval_refs,
        points
            .iter()
            .zip(wide.iter().zip(&narrow))
            .map(|(x, (w, s))| {
                vec![
                    num(x[0]),
                    num(w.point),
                    num(w.lower),
                    num(w.upper),
                    num(s.lower),
                    num(s.upper),
                ]
            }),
    )?;

    let xs: Vec<f64> = points.iter().map(|x| x[0]).collect();
    let mut chart = Chart::new(
        &format!("OLS prediction intervals: {name}"),
        &x1_name,
        &ds.target_name,
    );
    chart.band(
        &format!("{lw}% interval"),
        PALETTE[0],
        &xs,
        &wide.iter().map(|w| w.lower).collect::<Vec<_>>(),
        &wide.iter().map(|w| w.upper).collect::<Vec<_>>(),
    );
    chart.band(
        &format!("{ln}% interval"),
        PALETTE[1],
        &xs,
        &narrow.iter().map(|w| w.lower).collect::<Vec<_>>(),
        &narrow.iter().map(|w| w.upper).collect::<Vec<_>>(),
    );
    chart.points("observations", PALETTE[2], &ds.features.column_values(0), y);
    chart.line(
        "fit",
        PALETTE[3],
        &xs,
        &wide.iter().map(|w| w.point).collect::<Vec<_>>(),
    );
    out.write_str(&format!("ols_{name}.svg"), &chart.render())?;

    let m = points.len() as f64;
    Ok(ScenarioSummary {
        scenario: name.to_string(),
        n: ds.len(),
        coefficients: fit.coefficients.clone(),
        residual_sd: fit.residual_sd(),
        mean_width: wide.iter().map(|w| w.width()).sum::<f64>() / m,
        mean_width_secondary: narrow.iter().map(|w| w.width()).sum::<f64>() / m,
        nested: wide
            .iter()
            .zip(&narrow)
            .all(|(w, s)| w.lower <= s.lower && s.upper <= w.upper),
    })
}
