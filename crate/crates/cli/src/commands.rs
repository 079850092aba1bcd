use std::fmt;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use swayrank_core::features::{basic_summary, extended_summary, PhaseSchedule};
use swayrank_core::io::{self as fio, RankingJson, StudyJson, SummaryReport};
use swayrank_core::simgen::PROTOCOLS;
use swayrank_core::{
    draw_dataset, fit_plugin, loo_evaluate, rank_protocols, simulation_study, Dataset, Error, LibraryChoice,
    PipelineConfig, PluginClassifier, Scenario, SimConfig, SubjectRecord, SummaryDim,
};

#[derive(Debug, Parser)]
#[command(name = "swayrank", version, about = "Rank posturography protocols and classify subjects")]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "SWAYRANK_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic cohort and write it as a dataset CSV.
    Simulate(SimulateArgs),
    /// Summarize trajectory files into a dataset CSV, or one trajectory into JSON.
    Extract(ExtractArgs),
    /// Rank the four protocols on a labeled dataset.
    Rank(RankArgs),
    /// Fit the plug-in classifier on the top-J protocols.
    Train(TrainArgs),
    /// Classify the subjects of a dataset with a trained model.
    Predict(PredictArgs),
    /// Leave-one-out evaluation of the top-J classifiers.
    Loo(LooArgs),
    /// Replicated simulation study.
    Study(StudyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LibraryArg {
    Full,
    Reduced,
}

impl From<LibraryArg> for LibraryChoice {
    fn from(l: LibraryArg) -> Self {
        match l {
            LibraryArg::Full => LibraryChoice::Full,
            LibraryArg::Reduced => LibraryChoice::Reduced,
        }
    }
}

fn parse_dim(s: &str) -> Result<SummaryDim, String> {
    match s {
        "3" => Ok(SummaryDim::Basic),
        "8" => Ok(SummaryDim::Extended),
        _ => Err(format!("dimension must be 3 or 8, got {s}")),
    }
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse::<u8>().ok().and_then(|k| Scenario::from_index(k).ok()).ok_or_else(|| format!("scenario must be 1, 2 or 3, got {s}"))
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = LibraryArg::Full)]
    pub library: LibraryArg,
    /// Cross-validation folds (default 10, or n below 20 subjects).
    #[arg(long)]
    pub folds: Option<usize>,
}

impl PipelineArgs {
    fn config(&self) -> Result<PipelineConfig, CliError> {
        if matches!(self.folds, Some(v) if v < 2) {
            return Err(CliError::usage("--folds must be at least 2"));
        }
        let mut c = PipelineConfig::new(self.library.into(), self.seed);
        c.folds = self.folds;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Scenario,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_parser = parse_dim, default_value = "3")]
    pub dim: SummaryDim,
    /// Apply the class logits to raw covariate units.
    #[arg(long)]
    pub raw_logit: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Single trajectory CSV; writes its summary JSON.
    #[arg(long, conflicts_with_all = ["metadata", "traj_dir"])]
    pub trajectory: Option<PathBuf>,
    /// Subject metadata CSV (id,age,gender,laterality,height,weight,class).
    #[arg(long, requires = "traj_dir")]
    pub metadata: Option<PathBuf>,
    /// Directory holding `<id>_<protocol>.csv` for protocols 1 to 4.
    #[arg(long, requires = "metadata")]
    pub traj_dir: Option<PathBuf>,
    #[arg(long, value_parser = parse_dim, default_value = "3")]
    pub dim: SummaryDim,
    /// Drop samples recorded before this time (seconds).
    #[arg(long, default_value_t = 0.0)]
    pub trim_start: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Summary dimension to use; an 8-dimensional dataset can be ranked on its first 3 coordinates.
    #[arg(long, value_parser = parse_dim)]
    pub dim: Option<SummaryDim>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-protocol criterion table.
    #[arg(long)]
    pub criteria_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long = "J")]
    pub j: usize,
    /// Ranking report to take the protocol order from; ranked afresh when absent.
    #[arg(long)]
    pub ranking: Option<PathBuf>,
    #[arg(long, value_parser = parse_dim)]
    pub dim: Option<SummaryDim>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LooArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_dim)]
    pub dim: Option<SummaryDim>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Per-subject CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Perf summary JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Scenario,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: f64,
    #[arg(long, default_value_t = 54)]
    pub n: usize,
    #[arg(long = "B")]
    pub b: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_parser = parse_dim, default_value = "3")]
    pub dim: SummaryDim,
    #[arg(long, value_enum, default_value_t = LibraryArg::Full)]
    pub library: LibraryArg,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Core error plus whether it stems from bad invocation.
#[derive(Debug)]
pub struct CliError {
    pub error: Error,
    usage: bool,
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        Self { error: Error::InvalidConfig(msg.into()), usage: true }
    }

    pub fn code(&self) -> &'static str {
        if self.usage {
            "usage"
        } else {
            self.error.code()
        }
    }

    pub fn exit_code(&self) -> u8 {
        if self.usage {
            1
        } else {
            2
        }
    }
}

impl From<Error> for CliError {
    fn from(error: Error) -> Self {
        let usage = matches!(error, Error::InvalidConfig(_));
        Self { error, usage }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Error::Io(e).into()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.error.fmt(f)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            let f = std::fs::File::create(p).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", p.display())))?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn warn(lines: &[String]) {
    for l in lines {
        eprintln!("WARNING: {l}");
    }
}

fn load_dataset(path: &Path, dim: Option<SummaryDim>) -> CliResult<Dataset> {
    let data = fio::read_dataset(path)?;
    match dim {
        Some(d) if d != data.dim => Ok(data.with_dim(d)?),
        _ => Ok(data),
    }
}

pub fn run(cli: Cli) -> CliResult {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::usage(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Extract(a) => extract(a),
        Command::Rank(a) => rank(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Loo(a) => loo(a),
        Command::Study(a) => study(a),
    }
}

fn simulate(a: SimulateArgs) -> CliResult {
    let mut config = SimConfig::new(a.scenario, a.sigma, a.n, a.seed);
    config.logit_standardize = !a.raw_logit;
    let data = draw_dataset(&config, a.dim)?;
    fio::write_dataset(output(a.out.as_deref())?, &data)?;
    Ok(())
}

fn extract(a: ExtractArgs) -> CliResult {
    let schedule = PhaseSchedule::default();
    if let Some(path) = &a.trajectory {
        let traj = fio::read_trajectory(path)?.trimmed(a.trim_start)?;
        let report = SummaryReport::new(&basic_summary(&traj, &schedule)?, &extended_summary(&traj, &schedule)?);
        fio::write_json(output(a.out.as_deref())?, &report)?;
        return Ok(());
    }
    let (Some(meta), Some(dir)) = (&a.metadata, &a.traj_dir) else {
        return Err(CliError::usage("extract needs --trajectory, or --metadata with --traj-dir"));
    };
    let mut records = Vec::new();
    for (id, w, class) in fio::read_metadata(meta)? {
        let mut y: [Vec<f64>; PROTOCOLS] = Default::default();
        for (jdx, slot) in y.iter_mut().enumerate() {
            let path = dir.join(format!("{id}_{}.csv", jdx + 1));
            if !path.is_file() {
                return Err(Error::MissingTrajectory { id: id.clone(), protocol: jdx + 1, path: path.display().to_string() }.into());
            }
            let traj = fio::read_trajectory(&path)?.trimmed(a.trim_start)?;
            *slot = match a.dim {
                SummaryDim::Basic => basic_summary(&traj, &schedule)?.y.to_vec(),
                SummaryDim::Extended => extended_summary(&traj, &schedule)?.y.to_vec(),
            };
        }
        records.push(SubjectRecord { id, w, a: class, y });
    }
    let data = Dataset::new(a.dim, records)?;
    fio::write_dataset(output(a.out.as_deref())?, &data)?;
    Ok(())
}

fn rank(a: RankArgs) -> CliResult {
    let data = load_dataset(&a.input, a.dim)?;
    let report = rank_protocols(&data, &a.pipeline.config()?)?;
    let floored: Vec<String> = report
        .estimates
        .iter()
        .filter(|e| e.sigma_floored)
        .map(|e| format!("influence-curve sd of ({}, {}) floored", e.i, e.j))
        .collect();
    warn(&floored);
    fio::write_json(output(a.out.as_deref())?, &RankingJson::new(data.dim, &report))?;
    if let Some(p) = &a.criteria_csv {
        fio::save_with(p, |w| fio::write_criteria(w, &report))?;
    }
    Ok(())
}

fn train(a: TrainArgs) -> CliResult {
    if !(1..=PROTOCOLS).contains(&a.j) {
        return Err(CliError::usage(format!("--J must lie in 1..=4, got {}", a.j)));
    }
    let data = load_dataset(&a.input, a.dim)?;
    let config = a.pipeline.config()?;
    let order = match &a.ranking {
        Some(p) => fio::load_json::<RankingJson>(p)?.order,
        None => rank_protocols(&data, &config)?.ranking.order,
    };
    let clf = fit_plugin(&data, &order, a.j, &config)?;
    warn(&clf.h.warnings);
    fio::write_json(output(a.out.as_deref())?, &clf)?;
    Ok(())
}

fn predict(a: PredictArgs) -> CliResult {
    let clf: PluginClassifier = fio::load_json(&a.model)?;
    let data = load_dataset(&a.input, Some(clf.dim))?;
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "id,probability,class")?;
    for r in &data.records {
        let x = swayrank_core::eval::plugin_features(&r.w, &r.y, &clf.protocols);
        let p = clf.probability(&x)?;
        let c = clf.classify_features(&x)?;
        writeln!(out, "{},{p},{c}", r.id)?;
    }
    out.flush()?;
    Ok(())
}

fn loo(a: LooArgs) -> CliResult {
    let data = load_dataset(&a.input, a.dim)?;
    let report = loo_evaluate(&data, &a.pipeline.config()?)?;
    warn(&report.warnings);
    fio::write_loo(output(a.out.as_deref())?, &report)?;
    if let Some(p) = &a.report {
        fio::save_json(p, &serde_json::json!({ "n": data.len(), "perf": report.perf, "warnings": report.warnings }))?;
    }
    Ok(())
}

fn study(a: StudyArgs) -> CliResult {
    let sim = SimConfig::new(a.scenario, a.sigma, a.n, a.seed);
    let pipeline = PipelineArgs { seed: a.seed, library: a.library, folds: a.folds }.config()?;
    let report = simulation_study(&sim, a.dim, &pipeline, a.b)?;
    fio::write_json(output(a.out.as_deref())?, &StudyJson::from(&report))?;
    Ok(())
}
