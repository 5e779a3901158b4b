//! Essential variation of sampled ζ series.
//!
//! For a finitely sampled, piecewise-affine series the supremum over
//! partitions is attained by the full partition of consecutive samples,
//! so the variation is the sum of the pointwise jumps.

use serde::{Deserialize, Serialize};

use crate::error::VariationError;
use crate::evolution::EvolutionTrace;
use crate::laws::Zeta;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZetaSeries {
    times: Vec<f64>,
    values: Vec<Vec<Zeta>>,
}

impl ZetaSeries {
    pub fn new(times: Vec<f64>, values: Vec<Vec<Zeta>>) -> Result<Self, VariationError> {
        if times.len() != values.len() {
            return Err(VariationError::Shape {
                index: 0,
                expected: times.len(),
                actual: values.len(),
            });
        }
        if let Some(i) = (1..times.len()).find(|&i| !(times[i] > times[i - 1])) {
            return Err(VariationError::Times(i));
        }
        if let Some(first) = values.first() {
            for (index, v) in values.iter().enumerate() {
                if v.len() != first.len() {
                    return Err(VariationError::Shape {
                        index,
                        expected: first.len(),
                        actual: v.len(),
                    });
                }
                if v.iter().zip(first).any(|(a, b)| a.distance(b).is_none()) {
                    return Err(VariationError::Kind);
                }
            }
        }
        Ok(Self { times, values })
    }

    pub fn from_trace(trace: &EvolutionTrace) -> Self {
        Self::new(trace.times.clone(), trace.zeta.clone()).expect("trace grid is increasing")
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<Zeta>] {
        &self.values
    }

    /// Keep only the samples at `indices` (strictly increasing).
    pub fn subsample(&self, indices: &[usize]) -> Result<Self, VariationError> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(VariationError::Range {
                from: 0,
                to: bad,
                len: self.len(),
            });
        }
        Self::new(
            indices.iter().map(|&i| self.times[i]).collect(),
            indices.iter().map(|&i| self.values[i].clone()).collect(),
        )
    }

    /// Per element, `Σ_{j=from+1}^{to} |ζ_j − ζ_{j−1}|`.
    pub fn essential_variation(&self, from: usize, to: usize) -> Result<Vec<f64>, VariationError> {
        if from > to || to >= self.len() {
            return Err(VariationError::Range {
                from,
                to,
                len: self.len(),
            });
        }
        let mut var = vec![0.0; self.values[from].len()];
        for j in from + 1..=to {
            for ((acc, a), b) in var.iter_mut().zip(&self.values[j - 1]).zip(&self.values[j]) {
                *acc += a.distance(b).ok_or(VariationError::Kind)?;
            }
        }
        Ok(var)
    }
}
