//! Accuracy-rejection curves and threshold lookup.
//!
//! Items are ranked from most to least uncertain (ties: lower original index
//! counts as more uncertain) and rejected one at a time. The curve records the
//! metric over the retained items after each rejection, together with the
//! uncertainty threshold that produces that rejection: an item is rejected when
//! its uncertainty is `>=` the threshold. The fraction-0 point rejects nothing
//! and carries a threshold of `+inf`.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectiveError {
    #[error("length mismatch: {uncertainties} uncertainties, {predictions} predictions, {truths} truths")]
    LengthMismatch {
        uncertainties: usize,
        predictions: usize,
        truths: usize,
    },
    #[error("need at least two items, got {0}")]
    EmptyInput(usize),
    #[error("non-finite uncertainty {value} at index {index}")]
    NonFiniteUncertainty { index: usize, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Higher is better.
    Accuracy,
    /// Lower is better.
    Rmse,
}

impl MetricKind {
    /// Whether `value` is at least as good as `target`.
    pub fn meets(self, value: f64, target: f64) -> bool {
        match self {
            MetricKind::Accuracy => value >= target,
            MetricKind::Rmse => value <= target,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub rejected_fraction: f64,
    pub rejected_count: usize,
    pub metric_value: f64,
    pub uncertainty_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionCurve {
    pub points: Vec<CurvePoint>,
    pub metric_kind: MetricKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdChoice {
    pub uncertainty_threshold: f64,
    pub rejected_fraction: f64,
}

fn check_inputs(u: &[f64], p: usize, t: usize) -> Result<(), SelectiveError> {
    if u.len() != p || u.len() != t {
        return Err(SelectiveError::LengthMismatch {
            uncertainties: u.len(),
            predictions: p,
            truths: t,
        });
    }
    if u.len() < 2 {
        return Err(SelectiveError::EmptyInput(u.len()));
    }
    if let Some((index, &value)) = u.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(SelectiveError::NonFiniteUncertainty { index, value });
    }
    Ok(())
}

/// Indices from most to least uncertain.
fn rejection_order(uncertainties: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..uncertainties.len()).collect();
    order.sort_by(|&a, &b| {
        uncertainties[b]
            .total_cmp(&uncertainties[a])
            .then(a.cmp(&b))
    });
    order
}

/// Shared sweep: `losses[i]` is 1 − correct for accuracy or the squared error
/// for RMSE.
fn sweep(uncertainties: &[f64], losses: &[f64], kind: MetricKind) -> RejectionCurve {
    let n = uncertainties.len();
    let order = rejection_order(uncertainties);
    // suffix sums over the rejection order: retained set after m rejections is order[m..]
    let mut suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + losses[order[i]];
    }
    let points = (0..n)
        .map(|m| {
            let kept = (n - m) as f64;
            let metric_value = match kind {
                MetricKind::Accuracy => (kept - suffix[m]) / kept,
                MetricKind::Rmse => (suffix[m] / kept).sqrt(),
            };
            CurvePoint {
                rejected_fraction: m as f64 / n as f64,
                rejected_count: m,
                metric_value,
                uncertainty_threshold: if m == 0 {
                    f64::INFINITY
                } else {
                    uncertainties[order[m - 1]]
                },
            }
        })
        .collect();
    RejectionCurve {
        points,
        metric_kind: kind,
    }
}

pub fn accuracy_rejection_curve(
    uncertainties: &[f64],
    predictions: &[usize],
    truths: &[usize],
) -> Result<RejectionCurve, SelectiveError> {
    check_inputs(uncertainties, predictions.len(), truths.len())?;
    // wrong-item counts are exact integers, so accuracy is correct / kept exactly
    let losses: Vec<f64> = predictions
        .iter()
        .zip(truths)
        .map(|(p, t)| if p == t { 0.0 } else { 1.0 })
        .collect();
    Ok(sweep(uncertainties, &losses, MetricKind::Accuracy))
}

pub fn rmse_rejection_curve(
    uncertainties: &[f64],
    predictions: &[f64],
    truths: &[f64],
) -> Result<RejectionCurve, SelectiveError> {
    check_inputs(uncertainties, predictions.len(), truths.len())?;
    let losses: Vec<f64> = predictions
        .iter()
        .zip(truths)
        .map(|(p, t)| (p - t).powi(2))
        .collect();
    Ok(sweep(uncertainties, &losses, MetricKind::Rmse))
}

/// Predictions and truths for either metric.
#[derive(Debug, Clone, Copy)]
pub enum Outcomes<'a> {
    Classes {
        predictions: &'a [usize],
        truths: &'a [usize],
    },
    Values {
        predictions: &'a [f64],
        truths: &'a [f64],
    },
}

/// Accuracy curve for class outcomes, RMSE curve for real-valued outcomes.
pub fn rejection_curve(
    uncertainties: &[f64],
    outcomes: Outcomes<'_>,
) -> Result<RejectionCurve, SelectiveError> {
    match outcomes {
        Outcomes::Classes {
            predictions,
            truths,
        } => accuracy_rejection_curve(uncertainties, predictions, truths),
        Outcomes::Values {
            predictions,
            truths,
        } => rmse_rejection_curve(uncertainties, predictions, truths),
    }
}

/// Smallest rejection whose retained metric meets `target`, or `None` when no
/// rejection level reaches it.
pub fn threshold_for_target(curve: &RejectionCurve, target: f64) -> Option<ThresholdChoice> {
    curve
        .points
        .iter()
        .find(|p| curve.metric_kind.meets(p.metric_value, target))
        .map(|p| ThresholdChoice {
            uncertainty_threshold: p.uncertainty_threshold,
            rejected_fraction: p.rejected_fraction,
        })
}

impl RejectionCurve {
    pub fn metric_at_fraction(&self, fraction: f64) -> Option<f64> {
        self.points
            .iter()
            .rev()
            .find(|p| p.rejected_fraction <= fraction + 1e-12)
            .map(|p| p.metric_value)
    }

    /// CSV with columns `rejected_fraction,metric,threshold`.
    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let metric = match self.metric_kind {
            MetricKind::Accuracy => "accuracy",
            MetricKind::Rmse => "rmse",
        };
        wtr.write_record(["rejected_fraction", metric, "threshold"])?;
        for p in &self.points {
            wtr.write_record([
                p.rejected_fraction.to_string(),
                p.metric_value.to_string(),
                p.uncertainty_threshold.to_string(),
            ])?;
        }
        wtr.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_item_hand_case() {
        let curve =
            accuracy_rejection_curve(&[4.0, 3.0, 2.0, 1.0], &[1, 1, 1, 1], &[0, 1, 1, 1]).unwrap();
        let acc: Vec<f64> = curve.points.iter().map(|p| p.metric_value).collect();
        assert_eq!(acc, vec![0.75, 1.0, 1.0, 1.0]);
        let thresholds: Vec<f64> = curve
            .points
            .iter()
            .map(|p| p.uncertainty_threshold)
            .collect();
        assert_eq!(thresholds, vec![f64::INFINITY, 4.0, 3.0, 2.0]);
        let choice = threshold_for_target(&curve, 1.0).unwrap();
        assert_eq!(choice.rejected_fraction, 0.25);
        assert_eq!(choice.uncertainty_threshold, 4.0);
    }

    #[test]
    fn full_set_target_needs_no_rejection() {
        let curve = accuracy_rejection_curve(&[0.3, 0.1, 0.2], &[0, 1, 1], &[0, 0, 1]).unwrap();
        let full = curve.points[0].metric_value;
        assert_eq!(
            threshold_for_target(&curve, full)
                .unwrap()
                .rejected_fraction,
            0.0
        );
        assert_eq!(threshold_for_target(&curve, 1.01), None);
    }

    #[test]
    fn ties_reject_lower_index_first() {
        let curve = accuracy_rejection_curve(&[1.0, 1.0, 0.0], &[0, 1, 1], &[1, 1, 1]).unwrap();
        // index 0 (wrong) goes first among the tied pair
        assert_eq!(curve.points[1].metric_value, 1.0);
    }

    #[test]
    fn rmse_direction() {
        let curve =
            rmse_rejection_curve(&[5.0, 0.1, 0.2], &[3.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).unwrap();
        assert!((curve.points[0].metric_value - 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(curve.points[1].metric_value, 0.0);
        let choice = threshold_for_target(&curve, 0.5).unwrap();
        assert!((choice.rejected_fraction - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn input_errors() {
        assert!(matches!(
            accuracy_rejection_curve(&[1.0, 2.0], &[0], &[0, 1]),
            Err(SelectiveError::LengthMismatch { .. })
        ));
        assert_eq!(
            accuracy_rejection_curve(&[1.0], &[0], &[0]),
            Err(SelectiveError::EmptyInput(1))
        );
        assert!(matches!(
            rmse_rejection_curve(&[1.0, f64::NAN], &[0.0, 0.0], &[0.0, 0.0]),
            Err(SelectiveError::NonFiniteUncertainty { index: 1, .. })
        ));
    }

    #[test]
    fn csv_export() {
        let curve = accuracy_rejection_curve(&[2.0, 1.0], &[0, 1], &[1, 1]).unwrap();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "rejected_fraction,accuracy,threshold\n0,0.5,inf\n0.5,1,2\n"
        );
    }
}
