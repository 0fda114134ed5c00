//! One module per subcommand. Each exposes a serde config, a clap argument
//! struct, `execute` for library callers and `run` for the binary.

pub mod bnn;
pub mod conformal;
pub mod fetch;
pub mod forest_uq;
pub mod ols;
pub mod synth;

use std::path::PathBuf;

use anyhow::Result;
use uqkit::selective::RejectionCurve;

use crate::config::{manifest, RunConfig};
use crate::output::{num, OutputDir};

/// Writes the manifest last and keeps the directory.
fn finish<T: RunConfig>(mut out: OutputDir, cfg: &T) -> Result<PathBuf> {
    out.write_json("manifest.json", &manifest(cfg)?)?;
    Ok(out.commit())
}

/// Drops curve points that would leave fewer than `min_retained` items.
fn truncate_curve(curve: &mut RejectionCurve, min_retained: usize) {
    let n = curve.points.len();
    curve
        .points
        .retain(|p| n - p.rejected_count >= min_retained.max(1));
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, num)
}
