use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use clap::Args;
use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use super::finish;
use crate::config::{resolve, CommonArgs, RunConfig};
use crate::output::OutputDir;

pub const COVERTYPE_URL: &str =
    "https://archive.ics.uci.edu/ml/machine-learning-databases/covtype/covtype.data.gz";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FetchConfig {
    pub out: PathBuf,
    /// An http(s) URL or a local file, gzipped or plain.
    pub source: String,
}

impl Default for FetchConfig {
    fn default() -> Self {
        FetchConfig {
            out: PathBuf::from("data"),
            source: COVERTYPE_URL.into(),
        }
    }
}

impl RunConfig for FetchConfig {
    const SUBCOMMAND: &'static str = "fetch-covertype";

    fn out(&self) -> &Path {
        &self.out
    }

    fn set_out(&mut self, out: PathBuf) {
        self.out = out;
    }
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub source: Option<String>,
}

pub fn run(args: FetchArgs) -> Result<PathBuf> {
    let mut cfg: FetchConfig = resolve(&args.common)?;
    if let Some(s) = args.source {
        cfg.source = s;
    }
    let (dir, rows) = execute(&cfg)?;
    println!(
        "wrote {} rows to {}",
        rows,
        dir.join("covtype.csv").display()
    );
    Ok(dir)
}

/// Column names of the 54 features followed by the label.
pub fn covertype_header() -> Vec<String> {
    let mut names: Vec<String> = [
        "Elevation",
        "Aspect",
        "Slope",
        "Horizontal_Distance_To_Hydrology",
        "Vertical_Distance_To_Hydrology",
        "Horizontal_Distance_To_Roadways",
        "Hillshade_9am",
        "Hillshade_Noon",
        "Hillshade_3pm",
        "Horizontal_Distance_To_Fire_Points",
    ]
    .map(String::from)
    .to_vec();
    names.extend((1..=4).map(|i| format!("Wilderness_Area{i}")));
    names.extend((1..=40).map(|i| format!("Soil_Type{i}")));
    names.push("Cover_Type".into());
    names
}

fn read_source(source: &str) -> Result<Vec<u8>> {
    if source.starts_with("http://") || source.starts_with("https://") {
        let resp = reqwest::blocking::get(source)
            .and_then(|r| r.error_for_status())
            .with_context(|| format!("downloading {source}"))?;
        Ok(resp
            .bytes()
            .with_context(|| format!("downloading {source}"))?
            .to_vec())
    } else {
        fs::read(source).with_context(|| format!("reading {source}"))
    }
}

fn decompress(raw: Vec<u8>) -> Result<String> {
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut text = String::new();
        GzDecoder::new(raw.as_slice())
            .read_to_string(&mut text)
            .context("decompressing")?;
        Ok(text)
    } else {
        String::from_utf8(raw).context("source is not UTF-8 text")
    }
}

/// Prepends the header after checking every line has the expected width.
pub fn convert(text: &str) -> Result<(String, usize)> {
    let header = covertype_header();
    let mut csv = header.join(",");
    csv.push('\n');
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields = line.split(',').count();
        ensure!(
            fields == header.len(),
            "line {} has {fields} fields, expected {}",
            i + 1,
            header.len()
        );
        csv.push_str(line);
        csv.push('\n');
        rows += 1;
    }
    ensure!(rows > 0, "source has no rows");
    Ok((csv, rows))
}

pub fn execute(cfg: &FetchConfig) -> Result<(PathBuf, usize)> {
    let (csv, rows) = convert(&decompress(read_source(&cfg.source)?)?)?;
    let mut out = OutputDir::create(&cfg.out)?;
    out.write_str("covtype.csv", &csv)?;
    Ok((finish(out, cfg)?, rows))
}
