use serde::{Deserialize, Serialize};

use super::NumericsError;

const SUM_TOL: f64 = 1e-9;

/// Non-negative vector of class probabilities summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(probabilities: Vec<f64>) -> Result<Self, NumericsError> {
        if probabilities.is_empty() {
            return Err(NumericsError::InvalidProbVector("empty vector".into()));
        }
        if let Some((i, p)) = probabilities
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && (0.0..=1.0).contains(*p)))
        {
            return Err(NumericsError::InvalidProbVector(format!(
                "entry {i} = {p} is outside [0, 1]"
            )));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(NumericsError::InvalidProbVector(format!(
                "entries sum to {sum}"
            )));
        }
        Ok(ProbVector(probabilities))
    }

    /// Normalizes non-negative counts. Fails if all counts are zero.
    pub fn from_counts(counts: &[u32]) -> Result<Self, NumericsError> {
        let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
        if total == 0 {
            return Err(NumericsError::InvalidProbVector(
                "all counts are zero".into(),
            ));
        }
        let total = total as f64;
        Ok(ProbVector(
            counts.iter().map(|&c| f64::from(c) / total).collect(),
        ))
    }

    /// Elementwise mean of equally long vectors.
    pub fn mean(members: &[ProbVector]) -> Result<Self, NumericsError> {
        let first = members
            .first()
            .ok_or_else(|| NumericsError::InvalidProbVector("no members to average".into()))?;
        let len = first.len();
        let mut acc = vec![0.0; len];
        for m in members {
            if m.len() != len {
                return Err(NumericsError::InvalidProbVector(format!(
                    "member of length {} among vectors of length {len}",
                    m.len()
                )));
            }
            for (a, p) in acc.iter_mut().zip(m.as_slice()) {
                *a += p;
            }
        }
        let n = members.len() as f64;
        Ok(ProbVector(acc.into_iter().map(|a| a / n).collect()))
    }

    pub fn one_hot(len: usize, index: usize) -> Self {
        let mut v = vec![0.0; len];
        v[index] = 1.0;
        ProbVector(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, class: usize) -> Option<f64> {
        self.0.get(class).copied()
    }

    /// Most probable class; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = NumericsError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        ProbVector::new(v)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(p: ProbVector) -> Self {
        p.0
    }
}

/// Max-shifted softmax, stable for large logits.
pub fn softmax(logits: &[f64]) -> Result<ProbVector, NumericsError> {
    if logits.is_empty() {
        return Err(NumericsError::InvalidProbVector("empty logits".into()));
    }
    if let Some((index, &value)) = logits.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(NumericsError::NonFinite { index, value });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(ProbVector(exps.into_iter().map(|e| e / sum).collect()))
}
