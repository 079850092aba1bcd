//! Plug-in classifiers over the top-ranked protocols, leave-one-out
//! evaluation, and the replicated simulation study.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, tag};
use crate::simgen::{draw_dataset, Covariates, Dataset, SimConfig, SubjectRecord, SummaryDim, PROTOCOLS};
use crate::slearn::{super_learn, Ensemble, FeatureMatrix, FoldPlan, Task};
use crate::tmle::{rank_protocols, PipelineConfig, ProtocolRanking};

pub const THRESHOLD: f64 = 0.5;

/// `1{h(W, Y^j : j in protocols) >= 1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PluginClassifier {
    /// Protocols used, in ranking order.
    pub protocols: Vec<usize>,
    pub dim: SummaryDim,
    pub h: Ensemble,
}

/// Covariates first, then the summary blocks of `protocols` in that order.
pub fn plugin_features(w: &Covariates, y: &[Vec<f64>; PROTOCOLS], protocols: &[usize]) -> Vec<f64> {
    let mut x = w.to_array().to_vec();
    for &j in protocols {
        x.extend_from_slice(&y[j - 1]);
    }
    x
}

/// Fits `h` on the covariates and the first `j_top` protocols of `order`.
pub fn fit_plugin(data: &Dataset, order: &[usize; PROTOCOLS], j_top: usize, config: &PipelineConfig) -> Result<PluginClassifier> {
    if !(1..=PROTOCOLS).contains(&j_top) {
        return Err(Error::InvalidConfig(format!("J must lie in 1..=4, got {j_top}")));
    }
    let labels = data.labels()?;
    let protocols = order[..j_top].to_vec();
    let rows: Vec<Vec<f64>> = data.records.iter().map(|r| plugin_features(&r.w, &r.y, &protocols)).collect();
    let y: Vec<f64> = labels.iter().map(|&a| a as f64).collect();
    let v = config.fold_count(labels.len());
    let folds = FoldPlan::stratified(&labels, v, &mut rng::stream(config.seed, &[tag::EVAL, j_top as u64]))?;
    let h = super_learn(&FeatureMatrix::from_rows(&rows)?, &y, Task::Probability, &config.g_library(), &folds)?;
    Ok(PluginClassifier { protocols, dim: data.dim, h: config.audited(h) })
}

impl PluginClassifier {
    pub fn probability(&self, x: &[f64]) -> Result<f64> {
        self.h.predict(x)
    }

    pub fn classify_features(&self, x: &[f64]) -> Result<u8> {
        Ok((self.probability(x)? >= THRESHOLD) as u8)
    }

    /// Class of a subject given all four of its summary blocks.
    pub fn classify(&self, w: &Covariates, y: &[Vec<f64>; PROTOCOLS]) -> Result<u8> {
        self.classify_features(&plugin_features(w, y, &self.protocols))
    }

    pub fn classify_record(&self, r: &SubjectRecord) -> Result<u8> {
        self.classify(&r.w, &r.y)
    }
}

/// Leave-one-out outcome for one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooPrediction {
    pub id: String,
    pub true_class: u8,
    /// Prediction of the top-J classifier, `None` when the split lacked a class.
    pub predictions: [Option<u8>; PROTOCOLS],
    /// Ranking computed without this subject; `None` on a degenerate split.
    pub ranking: Option<[usize; PROTOCOLS]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    /// Fraction of subjects correctly classified by the top-J classifier.
    pub perf: [f64; PROTOCOLS],
    pub subjects: Vec<LooPrediction>,
    pub warnings: Vec<String>,
}

fn loo_split(data: &Dataset, labels: &[u8], l: usize, config: &PipelineConfig) -> Result<LooPrediction> {
    let rec = &data.records[l];
    let rest = data.without(l);
    let rest_labels: Vec<u8> = labels.iter().enumerate().filter(|&(k, _)| k != l).map(|(_, &a)| a).collect();
    if !(rest_labels.contains(&0) && rest_labels.contains(&1)) {
        return Err(Error::DegenerateSplit(l));
    }
    let split_config = config.with_seed(rng::derive_seed(config.seed, &[tag::SPLIT, l as u64]));
    let ranking = rank_protocols(&rest, &split_config)?.ranking.order;
    let mut predictions = [None; PROTOCOLS];
    for j_top in 1..=PROTOCOLS {
        let clf = fit_plugin(&rest, &ranking, j_top, &split_config)?;
        predictions[j_top - 1] = Some(clf.classify_record(rec)?);
    }
    Ok(LooPrediction { id: rec.id.clone(), true_class: labels[l], predictions, ranking: Some(ranking) })
}

/// Classifies every subject with classifiers ranked and fitted on the other
/// subjects only.
pub fn loo_evaluate(data: &Dataset, config: &PipelineConfig) -> Result<PerfReport> {
    let labels = data.labels()?;
    let n = labels.len();
    if n < 2 {
        return Err(Error::DegenerateData(format!("leave-one-out needs at least 2 subjects, have {n}")));
    }
    if !(labels.contains(&0) && labels.contains(&1)) {
        return Err(Error::DegenerateData("leave-one-out needs both classes".into()));
    }
    let outcomes: Vec<Result<LooPrediction>> = (0..n).into_par_iter().map(|l| loo_split(data, &labels, l, config)).collect();
    let mut subjects = Vec::with_capacity(n);
    let mut warnings = Vec::new();
    for (l, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(p) => subjects.push(p),
            Err(Error::DegenerateSplit(_)) => {
                warnings.push(format!("subject {}: split without it lacks a class; counted as misclassified", data.records[l].id));
                subjects.push(LooPrediction {
                    id: data.records[l].id.clone(),
                    true_class: labels[l],
                    predictions: [None; PROTOCOLS],
                    ranking: None,
                });
            }
            Err(e) => return Err(e),
        }
    }
    let perf = std::array::from_fn(|jdx| {
        let correct = subjects.iter().filter(|s| s.predictions[jdx] == Some(s.true_class)).count();
        correct as f64 / n as f64
    });
    Ok(PerfReport { perf, subjects, warnings })
}

/// Per-replication summary of a simulation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub perf: [f64; PROTOCOLS],
    /// Ranking on the full replicated dataset.
    pub ranking: ProtocolRanking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    #[serde(rename = "B")]
    pub b: usize,
    pub n: usize,
    pub sigma: f64,
    pub scenario: u8,
    pub perf_mean: [f64; PROTOCOLS],
    pub perf_sd: [f64; PROTOCOLS],
    /// False when `B = 1`; `perf_sd` is then reported as 0.
    pub sd_defined: bool,
    pub ranking_histogram: BTreeMap<String, usize>,
    pub replications: Vec<Replication>,
}

/// Seeds of replication `b`: one for the simulated cohort, one for the
/// pipeline run on it.
pub fn replication_seeds(master: u64, b: usize) -> (u64, u64) {
    (
        rng::derive_seed(master, &[tag::REPLICATION, b as u64, tag::SUBJECT]),
        rng::derive_seed(master, &[tag::REPLICATION, b as u64, tag::EVAL]),
    )
}

/// Runs `b_reps` independent replications of simulate, rank, and
/// leave-one-out evaluate. `sim.seed` is the master seed.
pub fn simulation_study(sim: &SimConfig, dim: SummaryDim, config: &PipelineConfig, b_reps: usize) -> Result<StudyReport> {
    if b_reps == 0 {
        return Err(Error::InvalidConfig("B must be at least 1".into()));
    }
    sim.validate()?;
    let replications = (0..b_reps)
        .into_par_iter()
        .map(|b| {
            let (data_seed, eval_seed) = replication_seeds(sim.seed, b);
            let data = draw_dataset(&SimConfig { seed: data_seed, ..sim.clone() }, dim)?;
            let run = config.with_seed(eval_seed);
            let ranking = rank_protocols(&data, &run)?.ranking;
            let perf = loo_evaluate(&data, &run)?.perf;
            Ok(Replication { perf, ranking })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_study(sim, replications))
}

pub fn summarize_study(sim: &SimConfig, replications: Vec<Replication>) -> StudyReport {
    let b = replications.len() as f64;
    let perf_mean: [f64; PROTOCOLS] = std::array::from_fn(|k| replications.iter().map(|r| r.perf[k]).sum::<f64>() / b);
    let sd_defined = replications.len() > 1;
    let perf_sd = std::array::from_fn(|k| {
        if !sd_defined {
            return 0.0;
        }
        let ss: f64 = replications.iter().map(|r| (r.perf[k] - perf_mean[k]).powi(2)).sum();
        (ss / (b - 1.0)).sqrt()
    });
    let mut ranking_histogram = BTreeMap::new();
    for r in &replications {
        *ranking_histogram.entry(r.ranking.label()).or_insert(0) += 1;
    }
    StudyReport {
        b: replications.len(),
        n: sim.n,
        sigma: sim.sigma,
        scenario: sim.scenario.index(),
        perf_mean,
        perf_sd,
        sd_defined,
        ranking_histogram,
        replications,
    }
}
