//! Targeted maximum likelihood estimation of the adjusted class contrast
//! of every summary coordinate, and the protocol ranking built on it.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, tag};
use crate::simgen::{Covariates, Dataset, PROTOCOLS};
use crate::slearn::{
    default_fold_count, super_learn, Ensemble, FeatureMatrix, FoldPlan, LearnerSpec, LibraryChoice, SlAudit, Task,
};

/// Propensity predictions are truncated to `[G_BOUND, 1 - G_BOUND]`.
pub const G_BOUND: f64 = 0.01;
/// Lower bound applied to the influence-curve standard deviation.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Settings shared by ranking and classification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub library: LibraryChoice,
    /// Overrides the propensity library chosen by `library`.
    #[serde(default)]
    pub g_library: Option<Vec<LearnerSpec>>,
    /// Overrides the outcome-regression library chosen by `library`.
    #[serde(default)]
    pub q_library: Option<Vec<LearnerSpec>>,
    /// Cross-validation fold count; `None` picks 10, or `n` below 20 subjects.
    #[serde(default)]
    pub folds: Option<usize>,
    pub seed: u64,
    /// Fail with `ZeroVarianceIc` instead of flooring sigma.
    #[serde(default)]
    pub strict_ic: bool,
    #[serde(skip)]
    pub audit: Option<Arc<SlAudit>>,
}

impl PipelineConfig {
    pub fn new(library: LibraryChoice, seed: u64) -> Self {
        Self { library, g_library: None, q_library: None, folds: None, seed, strict_ic: false, audit: None }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn g_library(&self) -> Vec<LearnerSpec> {
        self.g_library.clone().unwrap_or_else(|| self.library.library(Task::Probability))
    }

    pub fn q_library(&self) -> Vec<LearnerSpec> {
        self.q_library.clone().unwrap_or_else(|| self.library.library(Task::Regression))
    }

    pub fn fold_count(&self, n: usize) -> usize {
        self.folds.unwrap_or_else(|| default_fold_count(n))
    }

    pub(crate) fn audited(&self, e: Ensemble) -> Ensemble {
        if let Some(a) = &self.audit {
            a.record(&e.cv_risks);
        }
        e
    }

    /// Class-stratified folds for `labels`, drawn from the `FOLDS` stream.
    pub fn fold_plan(&self, labels: &[u8]) -> Result<FoldPlan> {
        let v = self.fold_count(labels.len());
        FoldPlan::stratified(labels, v, &mut rng::stream(self.seed, &[tag::FOLDS]))
    }
}

/// Fitted propensity `g_n(1 | w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Propensity {
    pub ensemble: Ensemble,
}

impl Propensity {
    pub fn at(&self, w: &Covariates) -> Result<f64> {
        Ok(self.ensemble.predict(&w.to_array())?.clamp(G_BOUND, 1.0 - G_BOUND))
    }
}

/// Initial outcome regression `Q_n(a, w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRegression {
    pub ensemble: Ensemble,
}

fn q_features(a: u8, w: &Covariates) -> [f64; 6] {
    let v = w.to_array();
    [a as f64, v[0], v[1], v[2], v[3], v[4]]
}

impl OutcomeRegression {
    pub fn at(&self, a: u8, w: &Covariates) -> Result<f64> {
        self.ensemble.predict(&q_features(a, w))
    }
}

fn covariate_matrix(data: &Dataset) -> Result<FeatureMatrix> {
    let rows: Vec<Vec<f64>> = data.records.iter().map(|r| r.w.to_array().to_vec()).collect();
    FeatureMatrix::from_rows(&rows)
}

/// Super-learner fit of the class label on the covariates.
pub fn estimate_g(data: &Dataset, library: &[LearnerSpec], folds: &FoldPlan) -> Result<Propensity> {
    let labels = data.labels()?;
    if labels.iter().all(|&a| a == labels[0]) {
        return Err(Error::DegenerateData("propensity fit needs both classes".into()));
    }
    let y: Vec<f64> = labels.iter().map(|&a| a as f64).collect();
    let ensemble = super_learn(&covariate_matrix(data)?, &y, Task::Probability, library, folds)?;
    Ok(Propensity { ensemble })
}

/// Super-learner regression of summary coordinate `i` of protocol `j` on
/// `(A, W)`.
pub fn estimate_q(
    data: &Dataset,
    i: usize,
    j: usize,
    library: &[LearnerSpec],
    folds: &FoldPlan,
) -> Result<OutcomeRegression> {
    check_indices(data, i, j)?;
    let labels = data.labels()?;
    let rows: Vec<Vec<f64>> =
        data.records.iter().zip(&labels).map(|(r, &a)| q_features(a, &r.w).to_vec()).collect();
    let y: Vec<f64> = data.records.iter().map(|r| r.outcome(i, j)).collect();
    let ensemble = super_learn(&FeatureMatrix::from_rows(&rows)?, &y, Task::Regression, library, folds)?;
    Ok(OutcomeRegression { ensemble })
}

fn check_indices(data: &Dataset, i: usize, j: usize) -> Result<()> {
    if !(1..=data.dim.len()).contains(&i) || !(1..=PROTOCOLS).contains(&j) {
        return Err(Error::InvalidConfig(format!("no summary coordinate ({i}, {j})")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AteEstimate {
    pub i: usize,
    pub j: usize,
    pub psi: f64,
    pub sigma: f64,
    pub tstat: f64,
    /// Fluctuation coefficient.
    pub epsilon: f64,
    /// Untargeted plug-in `mean(Q_n(1, W) - Q_n(0, W))`.
    pub psi_initial: f64,
    pub n: usize,
    /// Set when the influence-curve sd fell below `SIGMA_FLOOR`.
    pub sigma_floored: bool,
}

/// Targeting step given per-subject propensities `g` (already truncated)
/// and the initial regression evaluated at the observed class and at both
/// counterfactual classes.
pub fn target(
    i: usize,
    j: usize,
    labels: &[u8],
    y: &[f64],
    g: &[f64],
    q1: &[f64],
    q0: &[f64],
    strict_ic: bool,
) -> Result<AteEstimate> {
    let n = y.len();
    if n < 2 {
        return Err(Error::DegenerateData(format!("need at least 2 subjects, have {n}")));
    }
    let h: Vec<f64> = labels
        .iter()
        .zip(g)
        .map(|(&a, &p)| if a == 1 { 1.0 / p } else { -1.0 / (1.0 - p) })
        .collect();
    let q_obs: Vec<f64> = labels.iter().zip(q1.iter().zip(q0)).map(|(&a, (&u, &v))| if a == 1 { u } else { v }).collect();
    let num: f64 = (0..n).map(|l| h[l] * (y[l] - q_obs[l])).sum();
    let den: f64 = h.iter().map(|v| v * v).sum();
    let epsilon = num / den;

    let nf = n as f64;
    let psi_initial = (0..n).map(|l| q1[l] - q0[l]).sum::<f64>() / nf;
    let star1: Vec<f64> = (0..n).map(|l| q1[l] + epsilon / g[l]).collect();
    let star0: Vec<f64> = (0..n).map(|l| q0[l] - epsilon / (1.0 - g[l])).collect();
    let psi = (0..n).map(|l| star1[l] - star0[l]).sum::<f64>() / nf;
    let ic: Vec<f64> = (0..n)
        .map(|l| {
            let star_obs = q_obs[l] + epsilon * h[l];
            h[l] * (y[l] - star_obs) + star1[l] - star0[l] - psi
        })
        .collect();
    let mean_ic = ic.iter().sum::<f64>() / nf;
    let sd = (ic.iter().map(|v| (v - mean_ic).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    let sigma_floored = !(sd >= SIGMA_FLOOR);
    if sigma_floored && strict_ic {
        return Err(Error::ZeroVarianceIc { i, j });
    }
    let sigma = if sigma_floored { SIGMA_FLOOR } else { sd };
    Ok(AteEstimate { i, j, psi, sigma, tstat: nf.sqrt() * psi / sigma, epsilon, psi_initial, n, sigma_floored })
}

/// Fitted propensity plus the fold plan reused by every outcome regression
/// on the same data.
#[derive(Debug, Clone)]
pub struct Nuisance {
    pub labels: Vec<u8>,
    pub folds: FoldPlan,
    pub propensity: Option<Propensity>,
    /// Truncated `g_n(1 | W_l)` for every subject.
    pub g: Vec<f64>,
}

impl Nuisance {
    pub fn fit(data: &Dataset, config: &PipelineConfig) -> Result<Self> {
        let labels = data.labels()?;
        let folds = config.fold_plan(&labels)?;
        let mut propensity = estimate_g(data, &config.g_library(), &folds)?;
        propensity.ensemble = config.audited(propensity.ensemble);
        let g = data.records.iter().map(|r| propensity.at(&r.w)).collect::<Result<Vec<_>>>()?;
        Ok(Self { labels, folds, propensity: Some(propensity), g })
    }

    /// Uses known propensities instead of a fitted one; values are truncated
    /// like fitted ones.
    pub fn with_known_g(data: &Dataset, config: &PipelineConfig, g: &[f64]) -> Result<Self> {
        let labels = data.labels()?;
        if g.len() != labels.len() {
            return Err(Error::ArityMismatch { expected: labels.len(), got: g.len() });
        }
        let folds = config.fold_plan(&labels)?;
        let g = g.iter().map(|p| p.clamp(G_BOUND, 1.0 - G_BOUND)).collect();
        Ok(Self { labels, folds, propensity: None, g })
    }

    /// TMLE of coordinate `(i, j)` with this nuisance.
    pub fn estimate(&self, data: &Dataset, i: usize, j: usize, config: &PipelineConfig) -> Result<AteEstimate> {
        let mut q = estimate_q(data, i, j, &config.q_library(), &self.folds)?;
        q.ensemble = config.audited(q.ensemble);
        let q1 = data.records.iter().map(|r| q.at(1, &r.w)).collect::<Result<Vec<_>>>()?;
        let q0 = data.records.iter().map(|r| q.at(0, &r.w)).collect::<Result<Vec<_>>>()?;
        let y: Vec<f64> = data.records.iter().map(|r| r.outcome(i, j)).collect();
        target(i, j, &self.labels, &y, &self.g, &q1, &q0, config.strict_ic)
    }
}

/// TMLE of the adjusted class contrast of coordinate `i` in protocol `j`.
pub fn tmle_ate(data: &Dataset, i: usize, j: usize, config: &PipelineConfig) -> Result<AteEstimate> {
    check_indices(data, i, j)?;
    Nuisance::fit(data, config)?.estimate(data, i, j, config)
}

/// Sum of squared test statistics.
pub fn protocol_score(estimates: &[AteEstimate]) -> f64 {
    estimates.iter().map(|e| e.tstat * e.tstat).sum()
}

/// Protocols (1-based) from most to least informative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRanking {
    pub order: [usize; PROTOCOLS],
    pub scores: [f64; PROTOCOLS],
}

impl ProtocolRanking {
    /// Sorts descending by score; equal scores keep ascending protocol order.
    pub fn from_scores(scores: [f64; PROTOCOLS]) -> Self {
        let mut order = [1, 2, 3, 4];
        order.sort_by(|&a, &b| scores[b - 1].total_cmp(&scores[a - 1]).then(a.cmp(&b)));
        Self { order, scores }
    }

    /// Order as `"3,2,1,4"`.
    pub fn label(&self) -> String {
        self.order.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(",")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub ranking: ProtocolRanking,
    /// Ordered by protocol, then coordinate.
    pub estimates: Vec<AteEstimate>,
}

/// Estimates every `(i, j)`, scores each protocol and ranks them.
pub fn rank_protocols(data: &Dataset, config: &PipelineConfig) -> Result<RankingReport> {
    let nuisance = Nuisance::fit(data, config)?;
    rank_with(data, &nuisance, config)
}

/// Ranking with a prepared nuisance.
pub fn rank_with(data: &Dataset, nuisance: &Nuisance, config: &PipelineConfig) -> Result<RankingReport> {
    let d = data.dim.len();
    let cells: Vec<(usize, usize)> = (1..=PROTOCOLS).flat_map(|j| (1..=d).map(move |i| (i, j))).collect();
    let estimates = cells
        .par_iter()
        .map(|&(i, j)| nuisance.estimate(data, i, j, config))
        .collect::<Result<Vec<_>>>()?;
    let scores = std::array::from_fn(|jdx| protocol_score(&estimates[jdx * d..(jdx + 1) * d]));
    Ok(RankingReport { ranking: ProtocolRanking::from_scores(scores), estimates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{draw_dataset, Scenario, SimConfig, SummaryDim};
    use crate::slearn::LearnerKind;

    fn sim(n: usize, seed: u64) -> Dataset {
        draw_dataset(&SimConfig::new(Scenario::One, 0.5, n, seed), SummaryDim::Basic).unwrap()
    }

    #[test]
    fn score_examples() {
        let e = |t| AteEstimate { i: 1, j: 1, psi: 0.0, sigma: 1.0, tstat: t, epsilon: 0.0, psi_initial: 0.0, n: 1, sigma_floored: false };
        assert_eq!(protocol_score(&[e(1.0), e(2.0), e(3.0)]), 14.0);
        assert_eq!(protocol_score(&[e(0.0), e(0.0)]), 0.0);
    }

    #[test]
    fn ranking_ties_go_to_lower_index() {
        assert_eq!(ProtocolRanking::from_scores([1.0, 1.0, 1.0, 1.0]).order, [1, 2, 3, 4]);
        assert_eq!(ProtocolRanking::from_scores([0.1, 0.9, 3.0, 0.0]).order, [3, 2, 1, 4]);
        assert_eq!(ProtocolRanking::from_scores([2.0, 1.0, 2.0, 1.0]).order, [1, 3, 2, 4]);
    }

    #[test]
    fn targeting_zeroes_the_ic_mean() {
        let labels = [1, 0, 1, 1, 0, 0, 1];
        let y = [1.0, 0.3, 2.0, -1.0, 0.5, 0.1, 0.7];
        let g = [0.6, 0.4, 0.7, 0.2, 0.5, 0.3, 0.9];
        let q1 = [0.9, 0.8, 1.1, 0.0, 0.2, 0.5, 0.6];
        let q0 = [0.1, 0.2, 0.3, -0.4, 0.4, 0.0, 0.1];
        let e = target(1, 1, &labels, &y, &g, &q1, &q0, false).unwrap();
        // IC mean vanishes: recompute it from the returned fields
        let ic: Vec<f64> = (0..7)
            .map(|l| {
                let h = if labels[l] == 1 { 1.0 / g[l] } else { -1.0 / (1.0 - g[l]) };
                let qo = if labels[l] == 1 { q1[l] } else { q0[l] };
                let s1 = q1[l] + e.epsilon / g[l];
                let s0 = q0[l] - e.epsilon / (1.0 - g[l]);
                h * (y[l] - qo - e.epsilon * h) + s1 - s0 - e.psi
            })
            .collect();
        let mean = ic.iter().sum::<f64>() / 7.0;
        assert!(mean.abs() < 1e-10 * e.sigma);
        assert!((e.tstat - 7f64.sqrt() * e.psi / e.sigma).abs() < 1e-12);
    }

    #[test]
    fn zero_outcome_gives_zero_statistic() {
        let mut data = sim(60, 3);
        for r in &mut data.records {
            r.y = std::array::from_fn(|_| vec![0.0; 3]);
        }
        let e = tmle_ate(&data, 1, 1, &PipelineConfig::new(LibraryChoice::Reduced, 1)).unwrap();
        assert_eq!(e.psi, 0.0);
        assert_eq!(e.tstat, 0.0);
        assert!(e.sigma_floored);
        let mut strict = PipelineConfig::new(LibraryChoice::Reduced, 1);
        strict.strict_ic = true;
        assert!(matches!(tmle_ate(&data, 1, 1, &strict), Err(Error::ZeroVarianceIc { i: 1, j: 1 })));
    }

    #[test]
    fn independent_labels_give_flat_propensity() {
        let n = 1000;
        let mut data = sim(n, 4);
        let mut r = rng::stream(11, &[]);
        use rand::Rng;
        for rec in &mut data.records {
            rec.a = Some(r.gen_bool(0.6) as u8);
        }
        let config = PipelineConfig::new(LibraryChoice::Full, 2);
        let folds = config.fold_plan(&data.labels().unwrap()).unwrap();
        let g = estimate_g(&data, &config.g_library(), &folds).unwrap();
        let mut dev = 0.0;
        for rec in &data.records {
            let p = g.at(&rec.w).unwrap();
            assert!((G_BOUND..=1.0 - G_BOUND).contains(&p));
            assert!((p - 0.6).abs() < 0.15, "g = {p}");
            dev += (p - 0.6).abs() / n as f64;
        }
        assert!(dev < 0.05, "mean deviation {dev}");
    }

    #[test]
    fn noiseless_treatment_effect_is_recovered() {
        let mut data = sim(100, 5);
        for rec in &mut data.records {
            let a = rec.a.unwrap() as f64;
            rec.y[0][0] = a;
        }
        let config = PipelineConfig::new(LibraryChoice::Full, 3);
        let folds = config.fold_plan(&data.labels().unwrap()).unwrap();
        let q = estimate_q(&data, 1, 1, &config.q_library(), &folds).unwrap();
        for rec in &data.records {
            let d = q.at(1, &rec.w).unwrap() - q.at(0, &rec.w).unwrap();
            assert!((d - 1.0).abs() < 1e-6, "{d}");
        }
    }

    #[test]
    fn constant_outcome_regression_is_constant() {
        let mut data = sim(40, 6);
        for rec in &mut data.records {
            rec.y[1][2] = 2.5;
        }
        let config = PipelineConfig::new(LibraryChoice::Full, 3);
        let folds = config.fold_plan(&data.labels().unwrap()).unwrap();
        let q = estimate_q(&data, 3, 2, &config.q_library(), &folds).unwrap();
        for rec in &data.records {
            assert!((q.at(0, &rec.w).unwrap() - 2.5).abs() < 1e-9);
            assert!((q.at(1, &rec.w).unwrap() - 2.5).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_protocols_tie_in_index_order() {
        let mut data = sim(54, 7);
        for rec in &mut data.records {
            let y = rec.y[0].clone();
            rec.y = std::array::from_fn(|_| y.clone());
        }
        let rep = rank_protocols(&data, &PipelineConfig::new(LibraryChoice::Reduced, 8)).unwrap();
        assert_eq!(rep.ranking.order, [1, 2, 3, 4]);
        assert!(rep.ranking.scores.iter().all(|&s| s == rep.ranking.scores[0]));
    }

    #[test]
    fn permuting_protocols_permutes_the_ranking() {
        let data = sim(54, 9);
        let config = PipelineConfig::new(LibraryChoice::Reduced, 10);
        let base = rank_protocols(&data, &config).unwrap();
        // new protocol k holds old protocol perm[k]
        let perm = [2usize, 0, 3, 1];
        let mut shuffled = data.clone();
        for rec in &mut shuffled.records {
            let old: [Vec<f64>; 4] = rec.y.clone();
            rec.y = std::array::from_fn(|k| old[perm[k]].clone());
        }
        let rep = rank_protocols(&shuffled, &config).unwrap();
        for k in 0..4 {
            assert_eq!(rep.ranking.scores[k], base.ranking.scores[perm[k]]);
        }
        let mapped: Vec<usize> = rep.ranking.order.iter().map(|&j| perm[j - 1] + 1).collect();
        assert_eq!(mapped, base.ranking.order.to_vec());
    }

    #[test]
    fn scale_equivariance_with_linear_library() {
        let data = sim(120, 12);
        let mut config = PipelineConfig::new(LibraryChoice::Reduced, 13);
        config.q_library = Some(vec![
            LearnerSpec::new(LearnerKind::Constant, Task::Regression),
            LearnerSpec::new(LearnerKind::GlmMainTerms, Task::Regression),
        ]);
        let base = tmle_ate(&data, 2, 3, &config).unwrap();
        let mut scaled = data.clone();
        let lambda = 3.5;
        for rec in &mut scaled.records {
            for v in rec.y.iter_mut().flatten() {
                *v *= lambda;
            }
        }
        let e = tmle_ate(&scaled, 2, 3, &config).unwrap();
        assert!((e.psi - lambda * base.psi).abs() < 1e-9 * (1.0 + base.psi.abs()));
        assert!((e.tstat - base.tstat).abs() < 1e-8 * (1.0 + base.tstat.abs()));
    }

    #[test]
    fn rejects_out_of_range_coordinates() {
        let data = sim(30, 1);
        let config = PipelineConfig::new(LibraryChoice::Reduced, 1);
        assert!(tmle_ate(&data, 4, 1, &config).is_err());
        assert!(tmle_ate(&data, 1, 5, &config).is_err());
    }

    #[test]
    fn single_class_is_degenerate() {
        let mut data = sim(30, 1);
        for r in &mut data.records {
            r.a = Some(1);
        }
        let config = PipelineConfig::new(LibraryChoice::Reduced, 1);
        assert!(matches!(tmle_ate(&data, 1, 1, &config), Err(Error::DegenerateData(_))));
    }
}
