use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, Standardizer};
use crate::error::{Error, Result};

/// k-nearest-neighbour average on z-scored features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub scaler: Standardizer,
    /// Standardized training rows.
    pub train: FeatureMatrix,
    pub targets: Vec<f64>,
}

impl KnnModel {
    pub fn fit(x: &FeatureMatrix, y: &[f64], k: usize) -> Result<Self> {
        if k == 0 || k >= x.rows() {
            return Err(Error::DegenerateData(format!(
                "knn needs 1 <= k <= n - 1, got k = {k} with n = {}",
                x.rows()
            )));
        }
        let scaler = Standardizer::fit(x);
        let mut values = Vec::with_capacity(x.rows() * x.cols());
        let mut z = Vec::with_capacity(x.cols());
        for r in x.iter_rows() {
            scaler.apply_into(r, &mut z);
            values.extend_from_slice(&z);
        }
        let train = FeatureMatrix::new(x.rows(), x.cols(), values)?;
        Ok(Self { k, scaler, train, targets: y.to_vec() })
    }

    /// Mean target of the `k` nearest training rows; distance ties go to the
    /// lower training index.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let z = self.scaler.apply(x);
        let mut dist: Vec<(f64, usize)> = self
            .train
            .iter_rows()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), i))
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
            a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
        };
        let k = self.k;
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, order);
        }
        dist[..k].iter().map(|&(_, i)| self.targets[i]).sum::<f64>() / k as f64
    }
}
