//! Entropy decomposition of an ensemble's class predictions.
//!
//! For member distributions `p_1 … p_M`:
//!
//! * total uncertainty `H` is the entropy of the mean distribution,
//! * aleatoric uncertainty `C` is the mean of the member entropies,
//! * epistemic uncertainty `I = H - C` is the mutual information between the
//!   prediction and the choice of member. It is non-negative by concavity of
//!   entropy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{NumericsError, ProbVector};

/// Probabilities below this contribute nothing to an entropy.
const ZERO_PROB: f64 = 1e-12;
/// Largest negative rounding error tolerated before clamping `I` to zero.
const NEGATIVE_MI_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InfoError {
    #[error("invalid probability vector: {0}")]
    InvalidProbVector(#[from] NumericsError),
    #[error("ensemble has no members")]
    EmptyEnsemble,
    #[error("member {index} has {len} classes, expected {expected}")]
    LengthMismatch {
        index: usize,
        len: usize,
        expected: usize,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    /// Bits.
    #[default]
    Two,
    /// Nats.
    E,
}

impl LogBase {
    fn log(self, v: f64) -> f64 {
        match self {
            LogBase::Two => v.log2(),
            LogBase::E => v.ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UncertaintyDecomposition {
    pub total: f64,
    pub aleatoric: f64,
    pub epistemic: f64,
    pub log_base: LogBase,
}

/// Entropy of a validated distribution.
pub fn entropy(p: &ProbVector, base: LogBase) -> f64 {
    let h: f64 = p
        .as_slice()
        .iter()
        .filter(|&&q| q > ZERO_PROB)
        .map(|&q| -q * base.log(q))
        .sum();
    // a one-hot vector yields -0.0
    h.max(0.0)
}

/// Entropy of raw probabilities, validating them first.
pub fn shannon_entropy(p: &[f64], base: LogBase) -> Result<f64, InfoError> {
    Ok(entropy(&ProbVector::new(p.to_vec())?, base))
}

pub fn decompose(
    members: &[ProbVector],
    base: LogBase,
) -> Result<UncertaintyDecomposition, InfoError> {
    let first = members.first().ok_or(InfoError::EmptyEnsemble)?;
    let expected = first.len();
    if let Some((index, m)) = members
        .iter()
        .enumerate()
        .find(|(_, m)| m.len() != expected)
    {
        return Err(InfoError::LengthMismatch {
            index,
            len: m.len(),
            expected,
        });
    }
    let mean = ProbVector::mean(members)?;
    let total = entropy(&mean, base);
    let aleatoric = members.iter().map(|m| entropy(m, base)).sum::<f64>() / members.len() as f64;
    let raw = total - aleatoric;
    debug_assert!(
        raw >= -NEGATIVE_MI_TOL,
        "mutual information {raw} below tolerance"
    );
    // with a single member the two entropies agree up to rounding
    let epistemic = if members.len() == 1 {
        0.0
    } else {
        raw.max(0.0)
    };
    Ok(UncertaintyDecomposition {
        total,
        aleatoric: aleatoric.min(total),
        epistemic,
        log_base: base,
    })
}
