//! Top-scoring-pair classifier.
//!
//! Chooses the ordered feature pair `(p, q)` whose order indicator
//! `x_p < x_q` differs most in frequency between the two classes, then
//! predicts the smoothed class-1 frequency among training rows sharing the
//! new row's indicator value.

use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TspModel {
    pub pair: (usize, usize),
    pub score: f64,
    /// Smoothed `P(A = 1)` when the indicator is 0 and when it is 1.
    pub prob: [f64; 2],
}

impl TspModel {
    pub fn fit(x: &FeatureMatrix, y: &[f64]) -> Result<Self> {
        let d = x.cols();
        if d < 2 {
            return Err(Error::DegenerateData("tsp needs at least two features".into()));
        }
        let n1 = y.iter().filter(|&&v| v == 1.0).count();
        let n0 = y.len() - n1;
        if n0 == 0 || n1 == 0 {
            return Err(Error::DegenerateData("tsp needs both classes".into()));
        }

        let mut best: Option<((usize, usize), f64)> = None;
        for p in 0..d {
            for q in 0..d {
                if p == q {
                    continue;
                }
                let (mut c1, mut c0) = (0usize, 0usize);
                for (r, &a) in x.iter_rows().zip(y) {
                    if r[p] < r[q] {
                        if a == 1.0 {
                            c1 += 1;
                        } else {
                            c0 += 1;
                        }
                    }
                }
                let score = (c1 as f64 / n1 as f64 - c0 as f64 / n0 as f64).abs();
                // strict improvement keeps the lexicographically smallest pair
                if best.map_or(true, |(_, s)| score > s) {
                    best = Some(((p, q), score));
                }
            }
        }
        let (pair, score) = best.expect("at least one pair");

        let mut count = [0usize; 2];
        let mut pos = [0usize; 2];
        for (r, &a) in x.iter_rows().zip(y) {
            let ind = (r[pair.0] < r[pair.1]) as usize;
            count[ind] += 1;
            if a == 1.0 {
                pos[ind] += 1;
            }
        }
        let prob = [0, 1].map(|v| (pos[v] as f64 + 1.0) / (count[v] as f64 + 2.0));
        Ok(Self { pair, score, prob })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.prob[(x[self.pair.0] < x[self.pair.1]) as usize]
    }
}
