//! Protocol ranking by targeted maximum likelihood and plug-in
//! classification over the top-ranked protocols, for two-foot
//! center-of-pressure recordings.
//!
//! The pipeline runs in stages:
//! - [`features`] turns a trajectory into low-dimensional summaries,
//! - [`simgen`] draws synthetic cohorts with known contrasts,
//! - [`slearn`] provides base learners and the cross-validated super learner,
//! - [`tmle`] estimates per-coordinate class contrasts and ranks protocols,
//! - [`eval`] fits plug-in classifiers and runs leave-one-out studies,
//! - [`io`] reads and writes the file formats.

pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod rng;
pub mod simgen;
pub mod slearn;
pub mod tmle;

pub use error::{Error, Result};
pub use eval::{fit_plugin, loo_evaluate, simulation_study, PerfReport, PluginClassifier, StudyReport};
pub use features::{basic_summary, extended_summary, PhaseSchedule, SummaryBasic, SummaryExtended, Trajectory};
pub use simgen::{draw_dataset, Covariates, Dataset, Scenario, SimConfig, SubjectRecord, SummaryDim};
pub use slearn::{Ensemble, LibraryChoice};
pub use tmle::{rank_protocols, tmle_ate, AteEstimate, PipelineConfig, ProtocolRanking, RankingReport};
