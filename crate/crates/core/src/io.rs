//! File formats: trajectory and dataset CSV, summary, ranking and study
//! JSON, leave-one-out CSV.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{PerfReport, StudyReport};
use crate::features::{Sample, SummaryBasic, SummaryExtended, Trajectory};
use crate::simgen::{Covariates, Dataset, SubjectRecord, SummaryDim, PROTOCOLS};
use crate::tmle::RankingReport;

pub const TRAJECTORY_HEADER: [&str; 5] = ["t", "lx", "ly", "rx", "ry"];
pub const METADATA_HEADER: [&str; 7] = ["id", "age", "gender", "laterality", "height", "weight", "class"];

fn parse_err(file: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { file: file.to_string(), line, msg: msg.into() }
}

fn csv_err(file: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => parse_err(file, line, format!("{kind:?}")),
    }
}

fn field<T: std::str::FromStr>(file: &str, line: usize, name: &str, raw: &str) -> Result<T> {
    raw.trim().parse().map_err(|_| parse_err(file, line, format!("cannot parse {name} from {raw:?}")))
}

fn check_header(file: &str, got: &csv::StringRecord, want: &[String]) -> Result<()> {
    let got: Vec<&str> = got.iter().map(str::trim).collect();
    if got != want.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(parse_err(file, 1, format!("expected header {}, found {}", want.join(","), got.join(","))));
    }
    Ok(())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    Ok(BufWriter::new(f))
}

// ---------------------------------------------------------------------------
// trajectories

pub fn parse_trajectory<R: Read>(reader: R, file: &str) -> Result<Trajectory> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_err(file, e))?.clone();
    check_header(file, &header, &TRAJECTORY_HEADER.map(String::from))?;
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(file, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let v: Vec<f64> = rec
            .iter()
            .zip(TRAJECTORY_HEADER)
            .map(|(raw, name)| field(file, line, name, raw))
            .collect::<Result<_>>()?;
        if let Some(prev) = samples.last().map(|s: &Sample| s.t) {
            if v[0] <= prev {
                return Err(parse_err(file, line, format!("time {} does not increase", v[0])));
            }
        }
        samples.push(Sample { t: v[0], left: [v[1], v[2]], right: [v[3], v[4]] });
    }
    Trajectory::new(samples).map_err(|e| parse_err(file, 0, e.to_string()))
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    parse_trajectory(open(path)?, &path.display().to_string())
}

pub fn write_trajectory<W: Write>(out: W, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER).map_err(|e| csv_err("<output>", e))?;
    for s in traj.samples() {
        w.write_record([s.t, s.left[0], s.left[1], s.right[0], s.right[1]].map(|v| v.to_string()))
            .map_err(|e| csv_err("<output>", e))?;
    }
    w.flush()?;
    Ok(())
}

/// Feature summary of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub basic: [f64; 3],
    pub extended: [f64; 8],
    pub means: [f64; 4],
}

impl SummaryReport {
    pub fn new(basic: &SummaryBasic, extended: &SummaryExtended) -> Self {
        Self { basic: basic.y, extended: extended.y, means: basic.means.to_array() }
    }
}

// ---------------------------------------------------------------------------
// datasets

pub fn dataset_header(dim: SummaryDim) -> Vec<String> {
    let mut h: Vec<String> = METADATA_HEADER.iter().map(|s| s.to_string()).collect();
    for j in 1..=PROTOCOLS {
        for i in 1..=dim.len() {
            h.push(format!("y{j}_{i}"));
        }
    }
    h
}

pub fn write_dataset<W: Write>(out: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(dataset_header(data.dim)).map_err(|e| csv_err("<output>", e))?;
    for r in &data.records {
        let mut row = vec![
            r.id.clone(),
            r.w.age.to_string(),
            r.w.gender.to_string(),
            r.w.laterality.to_string(),
            r.w.height.to_string(),
            r.w.weight.to_string(),
            r.a.map_or_else(String::new, |a| a.to_string()),
        ];
        row.extend(r.y.iter().flatten().map(|v| v.to_string()));
        w.write_record(&row).map_err(|e| csv_err("<output>", e))?;
    }
    w.flush()?;
    Ok(())
}

fn parse_metadata_fields(file: &str, line: usize, rec: &csv::StringRecord) -> Result<(String, Covariates, Option<u8>)> {
    let id = rec[0].trim().to_string();
    if id.is_empty() {
        return Err(parse_err(file, line, "empty id"));
    }
    let w = Covariates::new(
        field(file, line, "age", &rec[1])?,
        field(file, line, "gender", &rec[2])?,
        field(file, line, "laterality", &rec[3])?,
        field(file, line, "height", &rec[4])?,
        field(file, line, "weight", &rec[5])?,
    )
    .map_err(|e| parse_err(file, line, e.to_string()))?;
    let class = match rec[6].trim() {
        "" => None,
        raw => {
            let a: u8 = field(file, line, "class", raw)?;
            if a > 1 {
                return Err(parse_err(file, line, format!("class must be 0 or 1, got {a}")));
            }
            Some(a)
        }
    };
    Ok((id, w, class))
}

pub fn parse_dataset<R: Read>(reader: R, file: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_err(file, e))?.clone();
    let d = header.len().saturating_sub(METADATA_HEADER.len()) / PROTOCOLS;
    let dim = SummaryDim::from_len(d)
        .map_err(|_| parse_err(file, 1, format!("{} columns do not match a 3- or 8-dimensional layout", header.len())))?;
    check_header(file, &header, &dataset_header(dim))?;
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(file, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let (id, w, a) = parse_metadata_fields(file, line, &rec)?;
        let mut values = Vec::with_capacity(PROTOCOLS * d);
        for (raw, name) in rec.iter().zip(header.iter()).skip(METADATA_HEADER.len()) {
            values.push(field::<f64>(file, line, name, raw)?);
        }
        let y = std::array::from_fn(|j| values[j * d..(j + 1) * d].to_vec());
        records.push(SubjectRecord { id, w, a, y });
    }
    Dataset::new(dim, records).map_err(|e| parse_err(file, 0, e.to_string()))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset(open(path)?, &path.display().to_string())
}

pub fn save_dataset(path: &Path, data: &Dataset) -> Result<()> {
    write_dataset(create(path)?, data)
}

/// Subject metadata: `id,age,gender,laterality,height,weight,class`.
pub fn read_metadata(path: &Path) -> Result<Vec<(String, Covariates, Option<u8>)>> {
    let file = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(open(path)?);
    let header = rdr.headers().map_err(|e| csv_err(&file, e))?.clone();
    check_header(&file, &header, &METADATA_HEADER.map(String::from))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(&file, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        out.push(parse_metadata_fields(&file, line, &rec)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateJson {
    pub i: usize,
    pub j: usize,
    pub psi: f64,
    pub sigma: f64,
    pub t: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub sigma_floored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingJson {
    pub dim: usize,
    pub scores: BTreeMap<String, f64>,
    pub order: [usize; PROTOCOLS],
    pub estimates: Vec<EstimateJson>,
}

impl RankingJson {
    pub fn new(dim: SummaryDim, report: &RankingReport) -> Self {
        Self {
            dim: dim.len(),
            scores: (1..=PROTOCOLS).map(|j| (j.to_string(), report.ranking.scores[j - 1])).collect(),
            order: report.ranking.order,
            estimates: report
                .estimates
                .iter()
                .map(|e| EstimateJson { i: e.i, j: e.j, psi: e.psi, sigma: e.sigma, t: e.tstat, sigma_floored: e.sigma_floored })
                .collect(),
        }
    }
}

/// One row per protocol: `protocol,criterion,rank`.
pub fn write_criteria<W: Write>(out: W, report: &RankingReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["protocol", "criterion", "rank"]).map_err(|e| csv_err("<output>", e))?;
    for j in 1..=PROTOCOLS {
        let rank = report.ranking.order.iter().position(|&p| p == j).expect("permutation") + 1;
        w.write_record([j.to_string(), report.ranking.scores[j - 1].to_string(), rank.to_string()])
            .map_err(|e| csv_err("<output>", e))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyJson {
    #[serde(rename = "B")]
    pub b: usize,
    pub n: usize,
    pub sigma: f64,
    pub scenario: u8,
    pub perf_mean: [f64; PROTOCOLS],
    pub perf_sd: [f64; PROTOCOLS],
    pub sd_defined: bool,
    pub ranking_histogram: BTreeMap<String, usize>,
}

impl From<&StudyReport> for StudyJson {
    fn from(r: &StudyReport) -> Self {
        Self {
            b: r.b,
            n: r.n,
            sigma: r.sigma,
            scenario: r.scenario,
            perf_mean: r.perf_mean,
            perf_sd: r.perf_sd,
            sd_defined: r.sd_defined,
            ranking_histogram: r.ranking_histogram.clone(),
        }
    }
}

/// `id,true_class,pred_J1..pred_J4,ranking`; degenerate splits leave the
/// prediction and ranking cells empty.
pub fn write_loo<W: Write>(out: W, report: &PerfReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "true_class", "pred_J1", "pred_J2", "pred_J3", "pred_J4", "ranking"])
        .map_err(|e| csv_err("<output>", e))?;
    for s in &report.subjects {
        let mut row = vec![s.id.clone(), s.true_class.to_string()];
        row.extend(s.predictions.iter().map(|p| p.map_or_else(String::new, |v| v.to_string())));
        row.push(s.ranking.map_or_else(String::new, |r| r.map(|j| j.to_string()).join(",")));
        w.write_record(&row).map_err(|e| csv_err("<output>", e))?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize, W: Write>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_json(create(path)?, value)
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let mut s = String::new();
    open(path)?.read_to_string(&mut s)?;
    Ok(serde_json::from_str(&s)?)
}

pub fn save_with<F: FnOnce(&mut BufWriter<File>) -> Result<()>>(path: &Path, f: F) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}
