use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::simplex::minimize_on_simplex;
use super::{fit_base, FeatureMatrix, FittedLearner, FoldPlan, LearnerKind, LearnerSpec, Loss, Task, PROB_CLIP};
use crate::error::{Error, Result};

/// Out-of-fold predictions of one learner.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub predictions: Vec<f64>,
    /// One message per fold where the learner could not be fitted and the
    /// constant learner stood in.
    pub warnings: Vec<String>,
}

/// Entry `l` is the prediction for row `l` from `spec` fitted on every fold
/// except the one holding `l`.
pub fn cv_predictions(spec: &LearnerSpec, x: &FeatureMatrix, y: &[f64], folds: &FoldPlan) -> Result<CvOutcome> {
    if x.rows() != y.len() || folds.len() != y.len() {
        return Err(Error::ArityMismatch { expected: y.len(), got: x.rows().min(folds.len()) });
    }
    let mut predictions = vec![0.0; y.len()];
    let mut warnings = Vec::new();
    for fold in 0..folds.v() {
        let (train, test) = folds.split(fold);
        let xt = x.select_rows(&train);
        let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let model = match fit_base(spec, &xt, &yt) {
            Ok(m) => m,
            Err(Error::DegenerateData(msg)) => {
                warnings.push(format!("fold {fold}: {} replaced by constant ({msg})", spec.kind));
                fit_base(&LearnerSpec::new(LearnerKind::Constant, spec.task), &xt, &yt)?
            }
            Err(e) => return Err(e),
        };
        for i in test {
            predictions[i] = model.predict(x.row(i));
        }
    }
    Ok(CvOutcome { predictions, warnings })
}

/// Cross-validated risks of the library members and of the selected blend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRiskTable {
    pub learners: Vec<f64>,
    pub ensemble: f64,
    pub solver_iterations: usize,
    pub stationarity: f64,
    /// True when a single learner beat the solver's blend and was kept.
    pub vertex: bool,
}

impl CvRiskTable {
    pub fn min_learner_risk(&self) -> f64 {
        self.learners.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `ensemble - min learner risk`; never positive for a table produced by
    /// [`super_learn`].
    pub fn excess(&self) -> f64 {
        self.ensemble - self.min_learner_risk()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub task: Task,
    pub library: Vec<LearnerSpec>,
    pub learners: Vec<FittedLearner>,
    pub weights: Vec<f64>,
    pub cv_risks: CvRiskTable,
    pub arity: usize,
    #[serde(default)]
    pub warnings: Vec<String>,
}

fn blend(z: &[Vec<f64>], w: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (col, &wk) in z.iter().zip(w) {
        for (o, p) in out.iter_mut().zip(col) {
            *o += wk * p;
        }
    }
}

fn blend_risk(loss: Loss, y: &[f64], z: &[Vec<f64>], w: &[f64]) -> f64 {
    let mut p = vec![0.0; y.len()];
    blend(z, w, &mut p);
    loss.risk(y, &p)
}

fn blend_gradient(loss: Loss, y: &[f64], z: &[Vec<f64>], w: &[f64], g: &mut [f64]) {
    let n = y.len() as f64;
    let mut p = vec![0.0; y.len()];
    blend(z, w, &mut p);
    // derivative of the pointwise loss in the prediction
    let dp: Vec<f64> = y
        .iter()
        .zip(&p)
        .map(|(&a, &q)| match loss {
            Loss::Squared => -2.0 * (a - q),
            Loss::LogLikelihood => {
                if q <= PROB_CLIP || q >= 1.0 - PROB_CLIP {
                    0.0
                } else {
                    -(a / q - (1.0 - a) / (1.0 - q))
                }
            }
        })
        .collect();
    for (gk, col) in g.iter_mut().zip(z) {
        *gk = col.iter().zip(&dp).map(|(a, b)| a * b).sum::<f64>() / n;
    }
}

/// Fits the super learner: out-of-fold predictions for every library member,
/// simplex weights minimizing the cross-validated risk of their blend, then
/// every member refitted on all rows.
pub fn super_learn(
    x: &FeatureMatrix,
    y: &[f64],
    task: Task,
    library: &[LearnerSpec],
    folds: &FoldPlan,
) -> Result<Ensemble> {
    if library.is_empty() {
        return Err(Error::EmptyLibrary);
    }
    if let Some(s) = library.iter().find(|s| s.task != task) {
        return Err(Error::InvalidConfig(format!("{} is configured for the other task", s.kind)));
    }
    let loss = task.loss();
    let mut z = Vec::with_capacity(library.len());
    let mut warnings = Vec::new();
    for spec in library {
        let cv = cv_predictions(spec, x, y, folds)?;
        warnings.extend(cv.warnings);
        z.push(cv.predictions);
    }
    let k = library.len();
    let vertex_weights = |v: usize| -> Vec<f64> {
        let mut e = vec![0.0; k];
        e[v] = 1.0;
        e
    };
    let learner_risks: Vec<f64> = (0..k).map(|v| blend_risk(loss, y, &z, &vertex_weights(v))).collect();

    let sol = minimize_on_simplex(k, |w| blend_risk(loss, y, &z, w), |w, g| blend_gradient(loss, y, &z, w, g));
    let mut weights = sol.weights;
    let mut risk = blend_risk(loss, y, &z, &weights);
    let mut vertex = false;
    // first index wins ties among vertices
    let best = (0..k).fold(0, |b, v| if learner_risks[v] < learner_risks[b] { v } else { b });
    if learner_risks[best] <= risk {
        weights = vertex_weights(best);
        risk = learner_risks[best];
        vertex = true;
    }

    let learners = library.iter().map(|spec| fit_base(spec, x, y)).collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        task,
        library: library.to_vec(),
        learners,
        weights,
        cv_risks: CvRiskTable {
            learners: learner_risks,
            ensemble: risk,
            solver_iterations: sol.iterations,
            stationarity: sol.stationarity,
            vertex,
        },
        arity: x.cols(),
        warnings,
    })
}

impl Ensemble {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.arity {
            return Err(Error::ArityMismatch { expected: self.arity, got: x.len() });
        }
        let mut p = 0.0;
        for (m, &w) in self.learners.iter().zip(&self.weights) {
            if w != 0.0 {
                p += w * m.predict(x);
            }
        }
        Ok(match self.task {
            Task::Regression => p,
            Task::Probability => p.clamp(0.0, 1.0),
        })
    }
}

/// Thread-safe tally of fitted ensembles and of the largest amount by which
/// an ensemble's CV risk exceeded its best member's.
#[derive(Debug, Default)]
pub struct SlAudit {
    fitted: AtomicUsize,
    violations: AtomicUsize,
    worst_excess: Mutex<f64>,
}

impl SlAudit {
    pub fn new() -> Self {
        Self { fitted: AtomicUsize::new(0), violations: AtomicUsize::new(0), worst_excess: Mutex::new(f64::NEG_INFINITY) }
    }

    pub fn record(&self, table: &CvRiskTable) {
        self.fitted.fetch_add(1, Ordering::Relaxed);
        let excess = table.excess();
        if excess > 0.0 {
            self.violations.fetch_add(1, Ordering::Relaxed);
        }
        let mut worst = self.worst_excess.lock().expect("audit lock");
        if excess > *worst {
            *worst = excess;
        }
    }

    pub fn fitted(&self) -> usize {
        self.fitted.load(Ordering::Relaxed)
    }

    pub fn violations(&self) -> usize {
        self.violations.load(Ordering::Relaxed)
    }

    pub fn worst_excess(&self) -> f64 {
        *self.worst_excess.lock().expect("audit lock")
    }
}
