//! Per-dimension min-max normalization into [0, 1], fit on the training set
//! and stored with the checkpoint.

use crate::episode::{TrainingSequence, STATE_DIMS};
use crate::error::{Error, Result};

/// Per-dimension `(min, max)` over the full 18-dim paired state; model
/// variants pick their column subsets out of this shared map.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    mins: Vec<f64>,
    maxs: Vec<f64>,
}

impl Normalizer {
    pub fn fit(sequences: &[TrainingSequence]) -> Result<Normalizer> {
        let mut mins = vec![f64::INFINITY; STATE_DIMS];
        let mut maxs = vec![f64::NEG_INFINITY; STATE_DIMS];
        let mut any = false;
        for seq in sequences {
            for row in &seq.rows {
                any = true;
                for (d, &v) in row.iter().enumerate() {
                    mins[d] = mins[d].min(v);
                    maxs[d] = maxs[d].max(v);
                }
            }
        }
        if !any {
            return Err(Error::EmptyDataset);
        }
        Ok(Normalizer { mins, maxs })
    }

    pub fn from_bounds(mins: Vec<f64>, maxs: Vec<f64>) -> Result<Normalizer> {
        if mins.len() != maxs.len() {
            return Err(Error::DimensionMismatch {
                expected: mins.len(),
                got: maxs.len(),
                context: "normalizer bounds",
            });
        }
        for (lo, hi) in mins.iter().zip(&maxs) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidConfig("bad normalizer bounds".into()));
            }
        }
        Ok(Normalizer { mins, maxs })
    }

    pub fn dims(&self) -> usize {
        self.mins.len()
    }

    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.mins, &self.maxs)
    }

    /// Maps one raw value into [0, 1]. Degenerate dimensions (min == max)
    /// map to 0.5.
    pub fn norm_at(&self, dim: usize, v: f64) -> f64 {
        let lo = self.mins[dim];
        let hi = self.maxs[dim];
        if hi > lo {
            (v - lo) / (hi - lo)
        } else {
            0.5
        }
    }

    /// Inverse of [`Self::norm_at`]. Degenerate dimensions return their
    /// constant.
    pub fn denorm_at(&self, dim: usize, v01: f64) -> f64 {
        let lo = self.mins[dim];
        let hi = self.maxs[dim];
        if hi > lo {
            lo + v01 * (hi - lo)
        } else {
            lo
        }
    }

    pub fn normalize(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                got: v.len(),
                context: "normalize",
            });
        }
        Ok(v
            .iter()
            .enumerate()
            .map(|(d, &x)| self.norm_at(d, x))
            .collect())
    }

    pub fn denormalize(&self, v01: &[f64]) -> Result<Vec<f64>> {
        if v01.len() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                got: v01.len(),
                context: "denormalize",
            });
        }
        Ok(v01
            .iter()
            .enumerate()
            .map(|(d, &x)| self.denorm_at(d, x))
            .collect())
    }

    /// Normalizes the column range `cols` of an 18-dim row into a fresh vector.
    pub fn normalize_cols(&self, cols: std::ops::Range<usize>, row: &[f64]) -> Vec<f64> {
        cols.map(|d| self.norm_at(d, row[d])).collect()
    }
}
