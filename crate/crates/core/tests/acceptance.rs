//! Acceptance suite. Every criterion prints one `PASS` or `FAIL` line; the
//! test fails if any criterion fails.
//!
//! `SWAYRANK_ACCEPTANCE=1,5` restricts the run to the listed criteria
//! (criteria 7 and 8 then cover only what ran).

use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use swayrank_core::eval::{replication_seeds, summarize_study, Replication};
use swayrank_core::features::{basic_summary, extended_summary, PhaseSchedule, Sample, Trajectory};
use swayrank_core::rng;
use swayrank_core::simgen::{draw_dataset, Scenario, SimConfig, SummaryDim};
use swayrank_core::slearn::{LearnerKind, LearnerSpec, LibraryChoice, SlAudit, Task};
use swayrank_core::tmle::{rank_protocols, tmle_ate, PipelineConfig};
use swayrank_core::{eval, Result};

const MASTER: u64 = 20_240_917;
const TRUE_ATE_24: f64 = 1.0 / 60.0;

struct Outcome {
    pass: bool,
    detail: String,
    /// Canonical serialization used by the determinism check.
    report: String,
}

fn selected(k: usize) -> bool {
    match std::env::var("SWAYRANK_ACCEPTANCE") {
        Ok(list) if !list.trim().is_empty() => list.split(',').any(|s| s.trim() == k.to_string()),
        _ => true,
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (m, s)
}

// ---------------------------------------------------------------------------
// criterion 1: brute-force feature oracle

fn oracle_median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `(Y1, Y2, Y3, slope_1 .. slope_5)` recomputed sample by sample.
fn oracle_summary(t: &[f64], l: &[[f64; 2]], r: &[[f64; 2]]) -> [f64; 8] {
    let n = t.len();
    let bx: Vec<f64> = (0..n).map(|k| (l[k][0] + r[k][0]) / 2.0).collect();
    let by: Vec<f64> = (0..n).map(|k| (l[k][1] + r[k][1]) / 2.0).collect();
    let refx = oracle_median((0..n).filter(|&k| t[k] >= 0.0 && t[k] <= 15.0).map(|k| bx[k]).collect());
    let refy = oracle_median((0..n).filter(|&k| t[k] >= 0.0 && t[k] <= 15.0).map(|k| by[k]).collect());
    let c: Vec<f64> = (0..n).map(|k| ((bx[k] - refx).powi(2) + (by[k] - refy).powi(2)).sqrt()).collect();
    let avg = |keep: &dyn Fn(f64) -> bool| {
        let idx: Vec<usize> = (0..n).filter(|&k| keep(t[k])).collect();
        idx.iter().map(|&k| c[k]).sum::<f64>() / idx.len() as f64
    };
    let c1m = avg(&|s| s >= 10.0 && s < 15.0);
    let c1p = avg(&|s| s > 15.0 && s <= 20.0);
    let c2m = avg(&|s| s >= 45.0 && s < 50.0);
    let c2p = avg(&|s| s > 50.0 && s <= 55.0);
    let slope = |lo: f64, hi: f64| {
        let idx: Vec<usize> = (0..n).filter(|&k| t[k] >= lo && t[k] < hi).collect();
        let m = idx.len() as f64;
        let mx = idx.iter().map(|&k| bx[k]).sum::<f64>() / m;
        let my = idx.iter().map(|&k| by[k]).sum::<f64>() / m;
        let cxx: f64 = idx.iter().map(|&k| (bx[k] - mx).powi(2)).sum();
        let cxy: f64 = idx.iter().map(|&k| (bx[k] - mx) * (by[k] - my)).sum();
        cxy / cxx
    };
    [
        c1p - c1m,
        c2m - c1p,
        c2p - c2m,
        slope(10.0, 15.0),
        slope(15.0, 20.0),
        slope(20.0, 45.0),
        slope(45.0, 50.0),
        slope(50.0, 55.0),
    ]
}

fn criterion_1() -> Outcome {
    let schedule = PhaseSchedule::default();
    let mut worst = 0.0f64;
    let mut report = String::new();
    for k in 0..100u64 {
        let mut g = rng::stream(MASTER, &[1, k]);
        let step = Normal::new(0.0, g.gen_range(0.01..0.5)).unwrap();
        let drift = g.gen_range(-0.02..0.02);
        let (mut lp, mut rp) = ([g.gen_range(-5.0..5.0), g.gen_range(-5.0..5.0)], [g.gen_range(-5.0..5.0), g.gen_range(-5.0..5.0)]);
        let mut t = Vec::with_capacity(2800);
        let mut l = Vec::with_capacity(2800);
        let mut r = Vec::with_capacity(2800);
        for s in 1..=2800u32 {
            let ts = (s * 25) as f64 / 1000.0;
            let boost = if (15.0..50.0).contains(&ts) { 3.0 } else { 1.0 };
            for d in 0..2 {
                lp[d] += drift + boost * step.sample(&mut g);
                rp[d] += drift + boost * step.sample(&mut g);
            }
            t.push(ts);
            l.push(lp);
            r.push(rp);
        }
        let samples = (0..t.len()).map(|s| Sample { t: t[s], left: l[s], right: r[s] }).collect();
        let traj = Trajectory::new(samples).unwrap();
        let basic = basic_summary(&traj, &schedule).unwrap();
        let ext = extended_summary(&traj, &schedule).unwrap();
        let want = oracle_summary(&t, &l, &r);
        for (idx, w) in want.iter().enumerate() {
            let got = ext.y[idx];
            worst = worst.max((got - w).abs() / w.abs().max(1.0));
            if idx < 3 {
                worst = worst.max((basic.y[idx] - w).abs() / w.abs().max(1.0));
            }
        }
        report.push_str(&format!("{:?}\n", ext.y));
    }
    Outcome { pass: worst <= 1e-10, detail: format!("worst relative deviation {worst:.2e} (tol 1e-10)"), report }
}

// ---------------------------------------------------------------------------
// criteria 2 and 3: the (2, 4) contrast

fn ate_replications(
    n: usize,
    reps: usize,
    sigma: f64,
    tag: u64,
    config: &PipelineConfig,
) -> Result<Vec<swayrank_core::tmle::AteEstimate>> {
    (0..reps)
        .map(|b| {
            let (data_seed, eval_seed) = replication_seeds(rng::derive_seed(MASTER, &[tag]), b);
            let data = draw_dataset(&SimConfig::new(Scenario::One, sigma, n, data_seed), SummaryDim::Basic)?;
            tmle_ate(&data, 2, 4, &config.with_seed(eval_seed))
        })
        .collect()
}

fn criterion_2(audit: &Arc<SlAudit>) -> Outcome {
    let mut config = PipelineConfig::new(LibraryChoice::Full, 0);
    config.audit = Some(audit.clone());
    let est = ate_replications(500, 50, 1.0, 2, &config).unwrap();
    let psi: Vec<f64> = est.iter().map(|e| e.psi).collect();
    let (m, sd) = mean_sd(&psi);
    let se = sd / (psi.len() as f64).sqrt();
    let z = (m - TRUE_ATE_24) / se;
    Outcome {
        pass: z.abs() <= 3.0,
        detail: format!("mean psi {m:.5} vs {TRUE_ATE_24:.5}, MC SE {se:.5}, z = {z:.2} (|z| <= 3)"),
        report: serde_json::to_string(&est).unwrap(),
    }
}

fn criterion_3(audit: &Arc<SlAudit>) -> Outcome {
    let mut config = PipelineConfig::new(LibraryChoice::Full, 0);
    config.q_library = Some(vec![LearnerSpec::new(LearnerKind::Constant, Task::Regression)]);
    config.audit = Some(audit.clone());
    let est = ate_replications(2000, 30, 0.5, 3, &config).unwrap();
    let tmle: Vec<f64> = est.iter().map(|e| e.psi).collect();
    let init: Vec<f64> = est.iter().map(|e| e.psi_initial).collect();
    let (mt, sdt) = mean_sd(&tmle);
    let (mi, _) = mean_sd(&init);
    let bias_t = (mt - TRUE_ATE_24).abs();
    let bias_i = (mi - TRUE_ATE_24).abs();
    Outcome {
        pass: bias_t < 0.5 * bias_i,
        detail: format!(
            "|bias| targeted {bias_t:.5} (MC SE {:.5}) vs plug-in {bias_i:.5}; need < {:.5}",
            sdt / (tmle.len() as f64).sqrt(),
            0.5 * bias_i
        ),
        report: serde_json::to_string(&est).unwrap(),
    }
}

// ---------------------------------------------------------------------------
// criterion 4: null calibration

fn criterion_4(audit: &Arc<SlAudit>) -> Outcome {
    let mut config = PipelineConfig::new(LibraryChoice::Full, 0);
    config.audit = Some(audit.clone());
    let noise = Normal::new(0.0, 1.0).unwrap();
    let scores: Vec<[f64; 4]> = (0..500)
        .map(|b| {
            let (data_seed, eval_seed) = replication_seeds(rng::derive_seed(MASTER, &[4]), b);
            let mut data = draw_dataset(&SimConfig::new(Scenario::One, 1.0, 1000, data_seed), SummaryDim::Basic).unwrap();
            let mut g = rng::stream(data_seed, &[4]);
            for rec in &mut data.records {
                for v in rec.y.iter_mut().flatten() {
                    *v = noise.sample(&mut g);
                }
            }
            rank_protocols(&data, &config.with_seed(eval_seed)).unwrap().ranking.scores
        })
        .collect();
    let all: Vec<f64> = scores.iter().flatten().copied().collect();
    let (m, sd) = mean_sd(&all);
    Outcome {
        pass: (2.5..=3.5).contains(&m),
        detail: format!("mean score {m:.3} (sd {sd:.3}, {} scores) in [2.5, 3.5]", all.len()),
        report: serde_json::to_string(&scores).unwrap(),
    }
}

// ---------------------------------------------------------------------------
// criterion 5: modal ranking

fn scenario_rankings(scenario: Scenario, config: &PipelineConfig) -> Vec<Replication> {
    (0..50)
        .map(|b| {
            let (data_seed, eval_seed) = replication_seeds(rng::derive_seed(MASTER, &[5, scenario.index() as u64]), b);
            let data = draw_dataset(&SimConfig::new(scenario, 0.5, 54, data_seed), SummaryDim::Basic).unwrap();
            let ranking = rank_protocols(&data, &config.with_seed(eval_seed)).unwrap().ranking;
            Replication { perf: [0.0; 4], ranking }
        })
        .collect()
}

fn criterion_5(audit: &Arc<SlAudit>) -> Outcome {
    let mut config = PipelineConfig::new(LibraryChoice::Reduced, 0);
    config.audit = Some(audit.clone());
    let mut pass = true;
    let mut parts = Vec::new();
    let mut report = String::new();
    for scenario in Scenario::ALL {
        let reps = scenario_rankings(scenario, &config);
        let summary = summarize_study(&SimConfig::new(scenario, 0.5, 54, 0), reps);
        let (modal, count) = summary
            .ranking_histogram
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(k, v)| (k.clone(), *v))
            .unwrap();
        let share = summary.ranking_histogram.get("3,2,1,4").copied().unwrap_or(0) as f64 / 50.0;
        pass &= modal == "3,2,1,4" && share >= 0.8;
        parts.push(format!("scenario {}: modal ({modal}) x{count}, share of 3,2,1,4 = {share:.2}", scenario.index()));
        report.push_str(&serde_json::to_string(&summary.ranking_histogram).unwrap());
    }
    Outcome { pass, detail: parts.join("; "), report }
}

// ---------------------------------------------------------------------------
// criterion 6: leave-one-out performance

fn criterion_6(audit: &Arc<SlAudit>) -> Outcome {
    let mut config = PipelineConfig::new(LibraryChoice::Reduced, 0);
    config.audit = Some(audit.clone());
    let mut avg = [[0.0f64; 4]; 2];
    let mut report = String::new();
    for (s, sigma) in [1.0, 0.5].into_iter().enumerate() {
        for scenario in Scenario::ALL {
            let sim = SimConfig::new(scenario, sigma, 54, rng::derive_seed(MASTER, &[6, scenario.index() as u64]));
            let study = eval::simulation_study(&sim, SummaryDim::Basic, &config, 20).unwrap();
            for k in 0..4 {
                avg[s][k] += study.perf_mean[k] / 3.0;
            }
            report.push_str(&serde_json::to_string(&study).unwrap());
        }
    }
    let in_band = avg[0].iter().all(|p| (0.70..=0.90).contains(p));
    let improves = (0..4).all(|k| avg[1][k] > avg[0][k]);
    let fmt = |v: &[f64; 4]| v.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>().join(", ");
    Outcome {
        pass: in_band && improves,
        detail: format!("sigma=1 Perf [{}] in [0.70, 0.90]: {in_band}; sigma=0.5 Perf [{}] higher: {improves}", fmt(&avg[0]), fmt(&avg[1])),
        report,
    }
}

// ---------------------------------------------------------------------------

type Criterion = fn(&Arc<SlAudit>) -> Outcome;

fn run_all(threads: usize, audit: &Arc<SlAudit>, verbose: bool) -> Vec<(usize, Outcome)> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let criteria: [(usize, Criterion); 6] = [
        (1, |_| criterion_1()),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
    ];
    let mut out = Vec::new();
    for (k, f) in criteria {
        if !selected(k) {
            continue;
        }
        let start = Instant::now();
        let o = pool.install(|| f(audit));
        if verbose {
            println!(
                "criterion {k}: {} | {} | {:.1}s",
                if o.pass { "PASS" } else { "FAIL" },
                o.detail,
                start.elapsed().as_secs_f64()
            );
        }
        out.push((k, o));
    }
    out
}

fn parse_threads(var: &str, default: usize) -> usize {
    std::env::var(var).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

#[test]
fn acceptance() {
    let audit = Arc::new(SlAudit::new());
    let first = run_all(parse_threads("SWAYRANK_THREADS", 4), &audit, true);
    let mut failed: Vec<usize> = first.iter().filter(|(_, o)| !o.pass).map(|(k, _)| *k).collect();

    let ok7 = audit.violations() == 0;
    println!(
        "criterion 7: {} | {} ensembles, worst CV-risk excess over best learner {:.3e} (must be <= 0)",
        if ok7 { "PASS" } else { "FAIL" },
        audit.fitted(),
        audit.worst_excess()
    );
    if !ok7 {
        failed.push(7);
    }

    let second = run_all(1, &Arc::new(SlAudit::new()), false);
    let same = first.iter().zip(&second).all(|((_, a), (_, b))| a.report == b.report);
    println!(
        "criterion 8: {} | reports from 4 worker threads and 1 worker thread {}",
        if same { "PASS" } else { "FAIL" },
        if same { "are byte-identical" } else { "differ" }
    );
    if !same {
        failed.push(8);
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
