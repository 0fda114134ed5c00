use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use uqkit::datasets::{
    synth_classes, synth_linear, synth_sine, write_csv, ClassesConfig, Dataset, LinearConfig,
    SineConfig,
};

use super::finish;
use crate::config::{default_out, resolve, CommonArgs, RunConfig};
use crate::output::OutputDir;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    Sine,
    Linear,
    Classes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub out: PathBuf,
    pub seed: u64,
    pub kind: SynthKind,
    pub sine: SineConfig,
    pub linear: LinearConfig,
    pub classes: ClassesConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            out: default_out("synth"),
            seed: 0,
            kind: SynthKind::Sine,
            sine: SineConfig::default(),
            linear: LinearConfig::default(),
            classes: ClassesConfig::default(),
        }
    }
}

impl RunConfig for SynthConfig {
    const SUBCOMMAND: &'static str = "synth";

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
        self.linear.master_seed = self.seed;
        self.classes.master_seed = self.seed;
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub kind: Option<SynthKind>,
}

pub fn run(args: SynthArgs) -> Result<PathBuf> {
    let mut cfg: SynthConfig = resolve(&args.common)?;
    if let Some(k) = args.kind {
        cfg.kind = k;
    }
    let dir = execute(&cfg)?;
    println!("wrote {}", dir.display());
    Ok(dir)
}

pub fn execute(cfg: &SynthConfig) -> Result<PathBuf> {
    let mut cfg = cfg.clone();
    cfg.normalize();
    let tables: Vec<(&str, Dataset)> = match cfg.kind {
        SynthKind::Sine => {
            let (train, test) = synth_sine(&cfg.sine)?;
            vec![("sine_train.csv", train), ("sine_test.csv", test)]
        }
        SynthKind::Linear => vec![("linear.csv", synth_linear(&cfg.linear)?)],
        SynthKind::Classes => vec![("classes.csv", synth_classes(&cfg.classes)?)],
    };
    let mut out = OutputDir::create(&cfg.out)?;
    for (name, ds) in &tables {
        let mut buf = Vec::new();
        write_csv(ds, &mut buf)?;
        out.write(name, &buf)?;
    }
    finish(out, &cfg)
}
