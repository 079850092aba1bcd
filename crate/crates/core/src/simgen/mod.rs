//! Synthetic cohorts following the three-scenario simulation scheme.
//!
//! A subject is `(W, A, Y^1..Y^4)`: five baseline covariates, a class label
//! drawn from a scenario-specific propensity, and four per-protocol summary
//! vectors whose coordinates are Gaussian around fixed conditional means.

mod trajectory;

pub use trajectory::{synth_trajectory, OuRegime, RegimeParams};

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, tag};

/// Number of protocols per subject.
pub const PROTOCOLS: usize = 4;

/// Baseline covariates `W = (age, gender, laterality, height, weight)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    /// Years.
    pub age: f64,
    pub gender: u8,
    pub laterality: u8,
    /// Centimetres.
    pub height: f64,
    /// Kilograms.
    pub weight: f64,
}

impl Covariates {
    pub fn new(age: f64, gender: u8, laterality: u8, height: f64, weight: f64) -> Result<Self> {
        let w = Self { age, gender, laterality, height, weight };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.age, self.height, self.weight].iter().all(|v| v.is_finite() && *v > 0.0);
        if !positive || self.gender > 1 || self.laterality > 1 {
            return Err(Error::InvalidConfig(format!("invalid covariates {self:?}")));
        }
        Ok(())
    }

    /// `(W1, .., W5)` with binaries as 0/1.
    pub fn to_array(&self) -> [f64; 5] {
        [self.age, self.gender as f64, self.laterality as f64, self.height, self.weight]
    }
}

/// Truncated Gaussian marginal of one continuous covariate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TruncatedNormal {
    pub const fn new(mean: f64, sd: f64, lower: f64, upper: f64) -> Self {
        Self { mean, sd, lower, upper }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let normal = Normal::new(self.mean, self.sd).expect("positive sd");
        loop {
            let x = normal.sample(rng);
            if x >= self.lower && x <= self.upper {
                return x;
            }
        }
    }

    pub fn z_score(&self, x: f64) -> f64 {
        (x - self.mean) / self.sd
    }
}

/// Parametric stand-in for the cohort's covariate distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariateModel {
    pub age: TruncatedNormal,
    pub p_gender: f64,
    pub p_laterality: f64,
    pub height: TruncatedNormal,
    pub weight: TruncatedNormal,
}

impl Default for CovariateModel {
    fn default() -> Self {
        Self {
            age: TruncatedNormal::new(55.0, 15.0, 20.0, 90.0),
            p_gender: 0.5,
            p_laterality: 0.9,
            height: TruncatedNormal::new(170.0, 10.0, 140.0, 200.0),
            weight: TruncatedNormal::new(72.0, 12.0, 40.0, 120.0),
        }
    }
}

impl CovariateModel {
    fn validate(&self) -> Result<()> {
        let ok = [self.age, self.height, self.weight]
            .iter()
            .all(|d| d.sd > 0.0 && d.lower > 0.0 && d.lower < d.upper)
            && (0.0..=1.0).contains(&self.p_gender)
            && (0.0..=1.0).contains(&self.p_laterality);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("covariate model needs positive truncation bounds".into()))
        }
    }
}

pub fn draw_covariates<R: Rng + ?Sized>(rng: &mut R, model: &CovariateModel) -> Covariates {
    let age = model.age.sample(rng);
    let gender = Bernoulli::new(model.p_gender).expect("probability").sample(rng) as u8;
    let laterality = Bernoulli::new(model.p_laterality).expect("probability").sample(rng) as u8;
    let height = model.height.sample(rng);
    let weight = model.weight.sample(rng);
    Covariates { age, gender, laterality, height, weight }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    One,
    Two,
    Three,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::One, Scenario::Two, Scenario::Three];

    pub fn from_index(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Scenario::One),
            2 => Ok(Scenario::Two),
            3 => Ok(Scenario::Three),
            _ => Err(Error::InvalidConfig(format!("scenario must be 1, 2 or 3, got {k}"))),
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Scenario::One => 1,
            Scenario::Two => 2,
            Scenario::Three => 3,
        }
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Log-odds of class 1 given `w` under `scenario`.
///
/// With `standardize`, age, height and weight enter as z-scores against the
/// generator's location and scale; binary covariates are used raw.
pub fn class_logit(scenario: Scenario, w: &Covariates, model: &CovariateModel, standardize: bool) -> f64 {
    let [w1, w2, w3, w4, w5] = w.to_array();
    let (w1, w4, w5) = if standardize {
        (model.age.z_score(w1), model.height.z_score(w4), model.weight.z_score(w5))
    } else {
        (w1, w4, w5)
    };
    match scenario {
        Scenario::One => w1 / 50.0 + w2 / 50.0 - w3 / 10.0 - w4 / 2000.0 + w5,
        Scenario::Two => (w1 + w5).cos() + (w1 + w5).sin(),
        Scenario::Three => {
            let c = (w1 + w3).cos();
            let five = 5.0 * c;
            (10.0 * c).floor() + (five - five.floor()).sqrt() * (PI / 50.0) * (10.0 * c).sin()
        }
    }
}

pub fn class_probability(scenario: Scenario, w: &Covariates, model: &CovariateModel, standardize: bool) -> f64 {
    logistic(class_logit(scenario, w, model, standardize))
}

fn checked_ln(x: f64, what: &str) -> Result<f64> {
    if x > 0.0 {
        Ok(x.ln())
    } else {
        Err(Error::Domain(format!("log({what}) at {x}")))
    }
}

/// `floor(x) + sqrt(x - floor(x))`
fn floor_plus_root_frac(x: f64) -> f64 {
    let f = x.floor();
    f + (x - f).sqrt()
}

/// Conditional mean of coordinate `i` of protocol `j`'s summary given class
/// `a` and covariates `w`, on raw covariate units. `i` and `j` are 1-based.
pub fn outcome_mean(i: usize, j: usize, a: u8, w: &Covariates) -> Result<f64> {
    let [w1, w2, w3, w4, w5] = w.to_array();
    let a = a as f64;
    let b = 1.0 - a;
    let q = match (j, i) {
        (1, 1) => 2.0 * (a * (w1 + w4).sin() + b * (w1 + w5).cos()),
        (1, 2) => {
            let x = (1.0 - 2.0 * a) * w5 / 160.0 + a / 4.0;
            3.0 * ((1.0 - 6.0 * a) * x.powi(5) - a * x.powi(4) + x.powi(3) - (1.0 - a / 2.0) * x.powi(2) + a * x)
        }
        (1, 3) => a * w4.tan() + b * (w5 + w1 * w2).tan(),
        (2, 1) => (a + w1 + w2 + w3 + w5 + w1 * w2 + b * w5 + w2 * w3 * w4) / 120.0,
        (2, 2) => 5.0 * (a * (w1 + w4).sin() + b * (w1 + w4).cos()),
        (2, 3) => (a * (2.0 * w1 + 1.5 * w3) + b * w5) / 20.0,
        (3, 1) => a * checked_ln(2.0 * w1 + 1.5 * w3, "2 W1 + 1.5 W3")? + b * checked_ln(w5, "W5")?,
        (3, 2) => {
            let x = (w4 + w5) / (145.0 + a * w1);
            (x + 7.0) * (x + 2.0) * (x - 7.0) * (x - 3.0) / 45.0
        }
        (3, 3) => {
            let x = (w3 + w4 + w5).cos();
            let f = floor_plus_root_frac(2.0 * x);
            PI * (a * x.sin() * f + b * x.cos() * f)
        }
        (4, 1) => {
            let x = (a * w2 + w4 + w5) / 30.0;
            (2.0 * x.powi(3) + x.powi(2) - x - 1.0) / 100.0
        }
        (4, 2) => (a + w1 + w2 + w3 + w5) / 60.0,
        (4, 3) => (w1 * w3 * w4 / 3.0 + b * (w1 + w3 * w4) + a * w2 * w5) / 1000.0,
        _ => return Err(Error::InvalidConfig(format!("no conditional mean for (i, j) = ({i}, {j})"))),
    };
    Ok(q)
}

/// Simulation settings for one cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scenario: Scenario,
    /// Noise standard deviation of every summary coordinate.
    pub sigma: f64,
    pub n: usize,
    pub seed: u64,
    pub logit_standardize: bool,
    pub covariates: CovariateModel,
}

impl SimConfig {
    pub fn new(scenario: Scenario, sigma: f64, n: usize, seed: u64) -> Self {
        Self {
            scenario,
            sigma,
            n,
            seed,
            logit_standardize: true,
            covariates: CovariateModel::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidConfig(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        self.covariates.validate()
    }
}

/// Dimension of the per-protocol summary vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SummaryDim {
    Basic,
    Extended,
}

impl SummaryDim {
    pub fn len(self) -> usize {
        match self {
            SummaryDim::Basic => 3,
            SummaryDim::Extended => 8,
        }
    }

    pub fn from_len(d: usize) -> Result<Self> {
        match d {
            3 => Ok(SummaryDim::Basic),
            8 => Ok(SummaryDim::Extended),
            _ => Err(Error::InvalidConfig(format!("summary dimension must be 3 or 8, got {d}"))),
        }
    }
}

/// One observation `O = (W, A, Y^1, .., Y^4)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub id: String,
    pub w: Covariates,
    /// Class label; `None` for unlabeled subjects.
    pub a: Option<u8>,
    /// Per-protocol summary vectors, each of the dataset's dimension.
    pub y: [Vec<f64>; PROTOCOLS],
}

impl SubjectRecord {
    /// Summary coordinate `i` of protocol `j`, both 1-based.
    pub fn outcome(&self, i: usize, j: usize) -> f64 {
        self.y[j - 1][i - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub dim: SummaryDim,
    pub records: Vec<SubjectRecord>,
}

impl Dataset {
    pub fn new(dim: SummaryDim, records: Vec<SubjectRecord>) -> Result<Self> {
        for r in &records {
            r.w.validate()?;
            if r.y.iter().any(|v| v.len() != dim.len()) {
                return Err(Error::InvalidConfig(format!(
                    "subject {} does not carry {}-dimensional summaries",
                    r.id,
                    dim.len()
                )));
            }
            if r.y.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("subject {} has non-finite summaries", r.id)));
            }
            if matches!(r.a, Some(a) if a > 1) {
                return Err(Error::InvalidConfig(format!("subject {} has a class outside {{0,1}}", r.id)));
            }
        }
        Ok(Self { dim, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Class labels; fails if any subject is unlabeled.
    pub fn labels(&self) -> Result<Vec<u8>> {
        self.records
            .iter()
            .map(|r| {
                r.a.ok_or_else(|| Error::DegenerateData(format!("subject {} has no class label", r.id)))
            })
            .collect()
    }

    /// Same subjects restricted to the first `dim.len()` summary coordinates.
    pub fn with_dim(&self, dim: SummaryDim) -> Result<Dataset> {
        if dim.len() > self.dim.len() {
            return Err(Error::InvalidConfig(format!(
                "cannot widen {}-dimensional summaries to {}",
                self.dim.len(),
                dim.len()
            )));
        }
        let records = self
            .records
            .iter()
            .map(|r| SubjectRecord { y: r.y.clone().map(|mut v| { v.truncate(dim.len()); v }), ..r.clone() })
            .collect();
        Ok(Dataset { dim, records })
    }

    /// Copy without subject `index`.
    pub fn without(&self, index: usize) -> Dataset {
        let records = self
            .records
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != index)
            .map(|(_, r)| r.clone())
            .collect();
        Dataset { dim: self.dim, records }
    }
}

/// Draws one subject. Summary coordinates beyond the third carry no signal.
pub fn draw_subject<R: Rng + ?Sized>(rng: &mut R, config: &SimConfig, dim: SummaryDim, id: String) -> SubjectRecord {
    let w = draw_covariates(rng, &config.covariates);
    let p = class_probability(config.scenario, &w, &config.covariates, config.logit_standardize);
    let a = rng.gen_bool(p) as u8;
    let noise = Normal::new(0.0, config.sigma).expect("positive sigma");
    let y = std::array::from_fn(|jdx| {
        (0..dim.len())
            .map(|idx| {
                let mean = if idx < 3 {
                    outcome_mean(idx + 1, jdx + 1, a, &w).expect("covariates respect positivity")
                } else {
                    0.0
                };
                mean + noise.sample(rng)
            })
            .collect()
    });
    SubjectRecord { id, w, a: Some(a), y }
}

/// `n` independent subjects; subject `k` uses its own stream keyed by
/// `(seed, k)`.
pub fn draw_dataset(config: &SimConfig, dim: SummaryDim) -> Result<Dataset> {
    config.validate()?;
    let records = (0..config.n)
        .map(|k| {
            let mut rng = rng::stream(config.seed, &[tag::SUBJECT, k as u64]);
            draw_subject(&mut rng, config, dim, (k + 1).to_string())
        })
        .collect();
    Ok(Dataset { dim, records })
}
