//! Config resolution: defaults, then a JSON file, then command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON config; a previous run's manifest.json works too.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed for every random stream in the run.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Miscoverage level.
    #[arg(long)]
    pub alpha: Option<f64>,
}

pub trait RunConfig: Serialize + DeserializeOwned + Default {
    const SUBCOMMAND: &'static str;

    fn out(&self) -> &Path;
    fn set_out(&mut self, out: PathBuf);

    fn set_seed(&mut self, _seed: u64) -> Result<()> {
        bail!("{} does not take --seed", Self::SUBCOMMAND)
    }

    fn set_alpha(&mut self, _alpha: f64) -> Result<()> {
        bail!("{} does not take --alpha", Self::SUBCOMMAND)
    }

    /// Brings derived fields in line with the top-level ones (nested seeds,
    /// sizes) so the manifest shows exactly what ran.
    fn normalize(&mut self) {}
}

pub fn default_out(subcommand: &str) -> PathBuf {
    PathBuf::from("uqkit-out").join(subcommand)
}

/// Reads a config file. Unknown fields are ignored; a `subcommand` field, as
/// found in manifests, must match.
pub fn load<T: RunConfig>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if let Some(name) = value.get("subcommand").and_then(Value::as_str) {
        if name != T::SUBCOMMAND {
            bail!(
                "{} is a {name} config, not {}",
                path.display(),
                T::SUBCOMMAND
            );
        }
    }
    serde_json::from_value(value).with_context(|| format!("invalid config {}", path.display()))
}

pub fn resolve<T: RunConfig>(common: &CommonArgs) -> Result<T> {
    let mut cfg = match &common.config {
        Some(path) => load(path)?,
        None => T::default(),
    };
    if let Some(out) = &common.out {
        cfg.set_out(out.clone());
    }
    if let Some(seed) = common.seed {
        cfg.set_seed(seed)?;
    }
    if let Some(alpha) = common.alpha {
        cfg.set_alpha(alpha)?;
    }
    Ok(cfg)
}

pub fn manifest<T: RunConfig>(cfg: &T) -> Result<Value> {
    let mut value = serde_json::to_value(cfg)?;
    if let Value::Object(map) = &mut value {
        map.insert("subcommand".into(), Value::String(T::SUBCOMMAND.into()));
    }
    Ok(value)
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        bail!("alpha must lie in (0, 1), got {alpha}")
    }
}
