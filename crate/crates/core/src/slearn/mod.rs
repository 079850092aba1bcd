//! Base learners and cross-validated super-learning.
//!
//! A learner library is aggregated into a convex combination whose weights
//! minimize the cross-validated risk of the blended out-of-fold predictions.

mod ensemble;
mod folds;
mod glm;
mod knn;
mod simplex;
mod tsp;

pub use ensemble::{cv_predictions, super_learn, CvOutcome, CvRiskTable, Ensemble, SlAudit};
pub use folds::{default_fold_count, FoldPlan};
pub use glm::{GlmModel, GlmTerms};
pub use knn::KnnModel;
pub use simplex::{minimize_on_simplex, SimplexSolution};
pub use tsp::TspModel;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability predictions are clipped to this margin inside the
/// log-likelihood loss.
pub const PROB_CLIP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Probability,
}

impl Task {
    pub fn loss(self) -> Loss {
        match self {
            Task::Regression => Loss::Squared,
            Task::Probability => Loss::LogLikelihood,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    Squared,
    /// Negative Bernoulli log-likelihood with predictions clipped to
    /// `[PROB_CLIP, 1 - PROB_CLIP]`.
    LogLikelihood,
}

impl Loss {
    pub fn point(self, y: f64, pred: f64) -> f64 {
        match self {
            Loss::Squared => (y - pred).powi(2),
            Loss::LogLikelihood => {
                let p = pred.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
                -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            }
        }
    }

    pub fn risk(self, y: &[f64], pred: &[f64]) -> f64 {
        y.iter().zip(pred).map(|(&a, &b)| self.point(a, b)).sum::<f64>() / y.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LearnerKind {
    Constant,
    GlmMainTerms,
    GlmInteractions,
    Knn { k: usize },
    Tsp,
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LearnerKind::Constant => write!(f, "constant"),
            LearnerKind::GlmMainTerms => write!(f, "glm-main-terms"),
            LearnerKind::GlmInteractions => write!(f, "glm-interactions"),
            LearnerKind::Knn { k } => write!(f, "knn({k})"),
            LearnerKind::Tsp => write!(f, "tsp"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub task: Task,
}

impl LearnerSpec {
    pub const fn new(kind: LearnerKind, task: Task) -> Self {
        Self { kind, task }
    }
}

/// Which learner collection to aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LibraryChoice {
    #[default]
    Full,
    /// Two learners per task.
    Reduced,
}

impl LibraryChoice {
    pub fn library(self, task: Task) -> Vec<LearnerSpec> {
        use LearnerKind::*;
        let kinds: &[LearnerKind] = match (self, task) {
            (LibraryChoice::Full, Task::Probability) => &[Constant, GlmMainTerms, Knn { k: 5 }, Tsp],
            (LibraryChoice::Full, Task::Regression) => &[Constant, GlmMainTerms, GlmInteractions, Knn { k: 5 }],
            (LibraryChoice::Reduced, Task::Probability) => &[GlmMainTerms, Tsp],
            (LibraryChoice::Reduced, Task::Regression) => &[GlmMainTerms, Knn { k: 5 }],
        };
        kinds.iter().map(|&k| LearnerSpec::new(k, task)).collect()
    }
}

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::InvalidConfig(format!(
                "{} values do not fill a {rows} x {cols} matrix",
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::ArityMismatch { expected: cols, got: r.len() });
        }
        Ok(Self { rows: rows.len(), cols, values: rows.concat() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self { rows: idx.len(), cols: self.cols, values }
    }
}

/// Per-column location and scale from training data. Constant columns get
/// a zero scale and standardize to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &FeatureMatrix) -> Self {
        let n = x.rows() as f64;
        let mut mean = vec![0.0; x.cols()];
        for r in x.iter_rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; x.cols()];
        for r in x.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let sd = var
            .iter()
            .zip(&mean)
            .map(|(&s, m)| {
                let sd = (s / n).sqrt();
                // relative cutoff: columns constant up to rounding
                if sd <= 1e-12 * (1.0 + m.abs()) {
                    0.0
                } else {
                    sd
                }
            })
            .collect();
        Self { mean, sd }
    }

    pub fn apply_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(x.iter().zip(&self.mean).zip(&self.sd).map(|((v, m), s)| {
            if *s > 0.0 {
                (v - m) / s
            } else {
                0.0
            }
        }));
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.len());
        self.apply_into(x, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum FittedLearner {
    Constant { value: f64 },
    Glm(GlmModel),
    Knn(KnnModel),
    Tsp(TspModel),
}

impl FittedLearner {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            FittedLearner::Constant { value } => *value,
            FittedLearner::Glm(m) => m.predict(x),
            FittedLearner::Knn(m) => m.predict(x),
            FittedLearner::Tsp(m) => m.predict(x),
        }
    }
}

fn require_both_classes(y: &[f64], kind: LearnerKind) -> Result<()> {
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::DegenerateData(format!("{kind} needs 0/1 labels")));
    }
    if ones == 0 || ones == y.len() {
        return Err(Error::DegenerateData(format!("{kind} needs both classes")));
    }
    Ok(())
}

/// Fits one base learner on `(x, y)`.
pub fn fit_base(spec: &LearnerSpec, x: &FeatureMatrix, y: &[f64]) -> Result<FittedLearner> {
    if x.rows() != y.len() {
        return Err(Error::ArityMismatch { expected: x.rows(), got: y.len() });
    }
    if y.is_empty() {
        return Err(Error::DegenerateData("no training rows".into()));
    }
    if spec.task == Task::Probability && spec.kind != LearnerKind::Constant {
        require_both_classes(y, spec.kind)?;
    }
    match spec.kind {
        LearnerKind::Constant => Ok(FittedLearner::Constant {
            value: y.iter().sum::<f64>() / y.len() as f64,
        }),
        LearnerKind::GlmMainTerms => Ok(FittedLearner::Glm(GlmModel::fit(x, y, GlmTerms::Main, spec.task)?)),
        LearnerKind::GlmInteractions => {
            Ok(FittedLearner::Glm(GlmModel::fit(x, y, GlmTerms::Interactions, spec.task)?))
        }
        LearnerKind::Knn { k } => Ok(FittedLearner::Knn(KnnModel::fit(x, y, k)?)),
        LearnerKind::Tsp => {
            if spec.task != Task::Probability {
                return Err(Error::InvalidConfig("tsp is a probability learner".into()));
            }
            Ok(FittedLearner::Tsp(TspModel::fit(x, y)?))
        }
    }
}
