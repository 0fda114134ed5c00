//! Split conformal prediction.
//!
//! A held-out calibration set yields one nonconformity score per item. The
//! score at rank `k = ceil((n + 1)(1 - alpha))` of the sorted scores becomes
//! `q_hat`. Classification sets keep every class whose probability is at least
//! `1 - q_hat`; regression intervals are `prediction ± q_hat` for absolute
//! scores and `prediction ± sqrt(q_hat)` for squared scores. Under
//! exchangeability the truth is covered with probability at least `1 - alpha`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::ProbVector;

/// Relative slack for treating `(n + 1)(1 - alpha)` as an exact integer.
const RANK_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConformalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("label {label} at index {index} is outside 0..{n_classes}")]
    IndexOutOfRange {
        index: usize,
        label: usize,
        n_classes: usize,
    },
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("no calibration scores")]
    EmptyCalibration,
    #[error("rank {k} exceeds the {n} calibration scores; alpha is too small for this n")]
    InsufficientCalibration { n: usize, k: usize },
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("calibration has score kind {found:?}, expected {expected}")]
    WrongScoreKind {
        expected: &'static str,
        found: ScoreKind,
    },
    #[error("malformed calibration: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Classification,
    RegressionAbsolute,
    RegressionSquared,
}

/// Regression nonconformity score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionScore {
    Absolute,
    Squared,
}

impl From<RegressionScore> for ScoreKind {
    fn from(kind: RegressionScore) -> Self {
        match kind {
            RegressionScore::Absolute => ScoreKind::RegressionAbsolute,
            RegressionScore::Squared => ScoreKind::RegressionSquared,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub alpha: f64,
    pub n: usize,
    pub k: usize,
    pub q_hat: f64,
    pub score_kind: ScoreKind,
}

impl CalibrationResult {
    /// Probability a class needs to enter a prediction set.
    pub fn class_threshold(&self) -> f64 {
        1.0 - self.q_hat
    }

    /// Half-width of regression intervals.
    pub fn half_width(&self) -> Result<f64, ConformalError> {
        match self.score_kind {
            ScoreKind::RegressionAbsolute => Ok(self.q_hat),
            ScoreKind::RegressionSquared => Ok(self.q_hat.sqrt()),
            found => Err(ConformalError::WrongScoreKind {
                expected: "regression",
                found,
            }),
        }
    }

    pub fn validate(&self) -> Result<(), ConformalError> {
        check_alpha(self.alpha)?;
        if self.k < 1 || self.k > self.n {
            return Err(ConformalError::Malformed(format!(
                "k = {} with n = {}",
                self.k, self.n
            )));
        }
        if self.k != rank(self.n, self.alpha) {
            return Err(ConformalError::Malformed(format!(
                "k = {} does not match n = {} and alpha = {}",
                self.k, self.n, self.alpha
            )));
        }
        if !self.q_hat.is_finite() || self.q_hat < 0.0 {
            return Err(ConformalError::Malformed(format!("q_hat = {}", self.q_hat)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("calibration serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ConformalError> {
        let cal: CalibrationResult =
            serde_json::from_str(text).map_err(|e| ConformalError::Malformed(e.to_string()))?;
        cal.validate()?;
        Ok(cal)
    }
}

/// Sorted class indices; may be empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub class_indices: Vec<usize>,
}

impl PredictionSet {
    pub fn contains(&self, class: usize) -> bool {
        self.class_indices.binary_search(&class).is_ok()
    }

    pub fn len(&self) -> usize {
        self.class_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_indices.is_empty()
    }

    pub fn is_subset_of(&self, other: &PredictionSet) -> bool {
        self.class_indices.iter().all(|&c| other.contains(c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalInterval {
    pub lower: f64,
    pub upper: f64,
}

impl ConformalInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

/// Anything that can be checked against a ground truth for coverage.
pub trait Covers<T> {
    fn covers(&self, truth: &T) -> bool;
}

impl Covers<usize> for PredictionSet {
    fn covers(&self, truth: &usize) -> bool {
        self.contains(*truth)
    }
}

impl Covers<f64> for ConformalInterval {
    fn covers(&self, truth: &f64) -> bool {
        self.contains(*truth)
    }
}

fn check_alpha(alpha: f64) -> Result<(), ConformalError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(ConformalError::InvalidAlpha(alpha))
    }
}

fn check_lengths(left: usize, right: usize) -> Result<(), ConformalError> {
    if left == right {
        Ok(())
    } else {
        Err(ConformalError::LengthMismatch { left, right })
    }
}

/// `ceil((n + 1)(1 - alpha))`, snapping products that are integers up to
/// rounding so that e.g. `n = 9, alpha = 0.1` gives 9 rather than 10.
pub fn rank(n: usize, alpha: f64) -> usize {
    let x = (n as f64 + 1.0) * (1.0 - alpha);
    let nearest = x.round();
    let k = if (x - nearest).abs() <= RANK_SNAP * x.max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    (k as usize).max(1)
}

/// `1 - p[truth]` per item.
pub fn classification_scores(
    softmaxes: &[ProbVector],
    truths: &[usize],
) -> Result<Vec<f64>, ConformalError> {
    check_lengths(softmaxes.len(), truths.len())?;
    softmaxes
        .iter()
        .zip(truths)
        .enumerate()
        .map(|(index, (p, &label))| {
            p.get(label)
                .map(|q| 1.0 - q)
                .ok_or(ConformalError::IndexOutOfRange {
                    index,
                    label,
                    n_classes: p.len(),
                })
        })
        .collect()
}

pub fn regression_scores(
    predictions: &[f64],
    truths: &[f64],
    kind: RegressionScore,
) -> Result<Vec<f64>, ConformalError> {
    check_lengths(predictions.len(), truths.len())?;
    predictions
        .iter()
        .zip(truths)
        .enumerate()
        .map(|(index, (&p, &y))| {
            let r = (y - p).abs();
            if !r.is_finite() {
                return Err(ConformalError::NonFinite { index, value: r });
            }
            Ok(match kind {
                RegressionScore::Absolute => r,
                RegressionScore::Squared => r * r,
            })
        })
        .collect()
}

/// Picks the rank-`k` score. Ties need no special handling: the rank is taken
/// over the sorted multiset.
pub fn calibrate(
    scores: &[f64],
    alpha: f64,
    score_kind: ScoreKind,
) -> Result<CalibrationResult, ConformalError> {
    check_alpha(alpha)?;
    if scores.is_empty() {
        return Err(ConformalError::EmptyCalibration);
    }
    if let Some((index, &value)) = scores.iter().enumerate().find(|(_, s)| !s.is_finite()) {
        return Err(ConformalError::NonFinite { index, value });
    }
    let n = scores.len();
    let k = rank(n, alpha);
    if k > n {
        return Err(ConformalError::InsufficientCalibration { n, k });
    }
    let mut sorted = scores.to_vec();
    let (_, q_hat, _) = sorted.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(CalibrationResult {
        alpha,
        n,
        k,
        q_hat: *q_hat,
        score_kind,
    })
}

/// Classes with probability at least `1 - q_hat`, tested as `1 - p <= q_hat`
/// so that membership agrees exactly with the calibration scores.
pub fn predict_set(
    softmax: &ProbVector,
    cal: &CalibrationResult,
) -> Result<PredictionSet, ConformalError> {
    if cal.score_kind != ScoreKind::Classification {
        return Err(ConformalError::WrongScoreKind {
            expected: "classification",
            found: cal.score_kind,
        });
    }
    let class_indices = softmax
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &p)| 1.0 - p <= cal.q_hat)
        .map(|(c, _)| c)
        .collect();
    Ok(PredictionSet { class_indices })
}

/// As [`predict_set`], but an empty set is replaced by the most probable class.
pub fn predict_set_top1_fallback(
    softmax: &ProbVector,
    cal: &CalibrationResult,
) -> Result<PredictionSet, ConformalError> {
    let set = predict_set(softmax, cal)?;
    if set.is_empty() {
        Ok(PredictionSet {
            class_indices: vec![softmax.argmax()],
        })
    } else {
        Ok(set)
    }
}

pub fn predict_interval_conformal(
    prediction: f64,
    cal: &CalibrationResult,
) -> Result<ConformalInterval, ConformalError> {
    let h = cal.half_width()?;
    Ok(ConformalInterval {
        lower: prediction - h,
        upper: prediction + h,
    })
}

/// Fraction of truths covered by their sets or intervals.
pub fn empirical_coverage<S, T>(regions: &[S], truths: &[T]) -> Result<f64, ConformalError>
where
    S: Covers<T>,
{
    check_lengths(regions.len(), truths.len())?;
    if regions.is_empty() {
        return Err(ConformalError::EmptyCalibration);
    }
    let hits = regions
        .iter()
        .zip(truths)
        .filter(|(r, t)| r.covers(t))
        .count();
    Ok(hits as f64 / regions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normalized(v: &[f64]) -> ProbVector {
        let s: f64 = v.iter().sum();
        ProbVector::new(v.iter().map(|x| x / s).collect()).unwrap()
    }

    #[test]
    fn printed_calibration_scores() {
        let rows = [
            [0.307, 0.498, 0.109, 0.004, 0.024, 0.031, 0.028],
            [0.286, 0.626, 0.032, 0.002, 0.015, 0.017, 0.022],
        ];
        let softmaxes: Vec<ProbVector> = rows.iter().map(|r| normalized(r)).collect();
        let s = classification_scores(&softmaxes, &[2, 1]).unwrap();
        assert!((s[0] - 0.891).abs() < 1e-3);
        assert!((s[1] - 0.374).abs() < 1e-3);
        let perfect = classification_scores(&[ProbVector::one_hot(3, 2)], &[2]).unwrap();
        assert_eq!(perfect, vec![0.0]);
        assert_eq!(
            classification_scores(&[ProbVector::one_hot(3, 2)], &[3]),
            Err(ConformalError::IndexOutOfRange {
                index: 0,
                label: 3,
                n_classes: 3
            })
        );
    }

    #[test]
    fn rank_arithmetic() {
        assert_eq!(rank(1600, 0.2), 1281);
        assert_eq!(rank(9, 0.1), 9);
        assert_eq!(rank(99, 0.1), 90);
        assert_eq!(
            calibrate(&[0.1, 0.2, 0.3, 0.4], 0.05, ScoreKind::Classification),
            Err(ConformalError::InsufficientCalibration { n: 4, k: 5 })
        );
        assert_eq!(
            calibrate(&[0.1], 0.0, ScoreKind::Classification),
            Err(ConformalError::InvalidAlpha(0.0))
        );
    }

    #[test]
    fn q_hat_is_kth_smallest() {
        let scores = [0.5, 0.1, 0.9, 0.3, 0.7, 0.2, 0.8, 0.4, 0.6];
        let cal = calibrate(&scores, 0.2, ScoreKind::Classification).unwrap();
        // (10)(0.8) = 8
        assert_eq!(cal.k, 8);
        assert_eq!(cal.q_hat, 0.8);
    }

    #[test]
    fn printed_prediction_sets() {
        let cal = CalibrationResult {
            alpha: 0.2,
            n: 1600,
            k: 1281,
            q_hat: 0.645,
            score_kind: ScoreKind::Classification,
        };
        let rows = [
            [0.337, 0.529, 0.053, 0.003, 0.019, 0.028, 0.031],
            [0.175, 0.362, 0.269, 0.026, 0.014, 0.137, 0.016],
            [0.204, 0.362, 0.269, 0.026, 0.013, 0.124, 0.018],
            [0.435, 0.444, 0.044, 0.003, 0.014, 0.021, 0.039],
            [0.434, 0.390, 0.030, 0.002, 0.012, 0.015, 0.117],
        ];
        let expected: [&[usize]; 5] = [&[1], &[1], &[1], &[0, 1], &[0, 1]];
        for (row, want) in rows.iter().zip(expected) {
            let set = predict_set(&normalized(row), &cal).unwrap();
            assert_eq!(set.class_indices, want);
        }
        let all = CalibrationResult { q_hat: 1.0, ..cal };
        assert_eq!(predict_set(&normalized(&rows[0]), &all).unwrap().len(), 7);
    }

    #[test]
    fn empty_set_and_fallback() {
        let cal = CalibrationResult {
            alpha: 0.2,
            n: 10,
            k: 9,
            q_hat: 0.1,
            score_kind: ScoreKind::Classification,
        };
        let p = ProbVector::new(vec![0.5, 0.3, 0.2]).unwrap();
        assert!(predict_set(&p, &cal).unwrap().is_empty());
        assert_eq!(
            predict_set_top1_fallback(&p, &cal).unwrap().class_indices,
            vec![0]
        );
    }

    #[test]
    fn regression_scores_and_intervals() {
        assert_eq!(
            regression_scores(&[1.0], &[3.0], RegressionScore::Absolute).unwrap(),
            vec![2.0]
        );
        assert_eq!(
            regression_scores(&[1.0], &[3.0], RegressionScore::Squared).unwrap(),
            vec![4.0]
        );
        assert!(matches!(
            regression_scores(&[1.0], &[], RegressionScore::Absolute),
            Err(ConformalError::LengthMismatch { .. })
        ));
        let abs = CalibrationResult {
            alpha: 0.1,
            n: 20,
            k: 19,
            q_hat: 2.0,
            score_kind: ScoreKind::RegressionAbsolute,
        };
        let iv = predict_interval_conformal(5.0, &abs).unwrap();
        assert_eq!((iv.lower, iv.upper), (3.0, 7.0));
        let sq = CalibrationResult {
            q_hat: 4.0,
            score_kind: ScoreKind::RegressionSquared,
            ..abs
        };
        assert_eq!(predict_interval_conformal(5.0, &sq).unwrap(), iv);
        let zero = CalibrationResult { q_hat: 0.0, ..abs };
        let point = predict_interval_conformal(1.5, &zero).unwrap();
        assert_eq!((point.lower, point.upper), (1.5, 1.5));
        let cls = CalibrationResult {
            score_kind: ScoreKind::Classification,
            ..abs
        };
        assert!(matches!(
            predict_interval_conformal(0.0, &cls),
            Err(ConformalError::WrongScoreKind { .. })
        ));
    }

    #[test]
    fn coverage_extremes() {
        let full = vec![
            PredictionSet {
                class_indices: vec![0, 1, 2]
            };
            3
        ];
        assert_eq!(empirical_coverage(&full, &[0usize, 1, 2]).unwrap(), 1.0);
        let empty = vec![PredictionSet::default(); 3];
        assert_eq!(empirical_coverage(&empty, &[0usize, 1, 2]).unwrap(), 0.0);
        assert!(matches!(
            empirical_coverage(&empty, &[0usize]),
            Err(ConformalError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let cal = calibrate(
            &[0.3, 0.1, 0.2, 0.5, 0.4],
            0.5,
            ScoreKind::RegressionSquared,
        )
        .unwrap();
        let text = cal.to_json();
        assert!(text.contains("\"score_kind\": \"regression_squared\""));
        assert_eq!(CalibrationResult::from_json(&text).unwrap(), cal);
        let bad = text.replace(&format!("\"k\": {}", cal.k), "\"k\": 9");
        assert!(CalibrationResult::from_json(&bad).is_err());
    }
}
