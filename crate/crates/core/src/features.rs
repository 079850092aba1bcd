//! Summary measures of a two-foot center-of-pressure trajectory.
//!
//! The trajectory is reduced to the path of the feet barycenter, then to a
//! scalar sway series `C_t = |B_t - b|` where `b` is the componentwise median
//! of the barycenter over the unperturbed first phase. The basic summary
//! contrasts the mean sway just before and after the onset and the end of
//! the perturbation phase; the extended summary appends least-squares
//! orientation slopes of the barycenter over five windows.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the abscissa variance (relative to its mean square) below
/// which a slope is reported as degenerate.
pub const SLOPE_VARIANCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub left: [f64; 2],
    pub right: [f64; 2],
}

/// Validated center-of-pressure recording for one protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<Sample>,
    dt: f64,
}

impl Trajectory {
    /// Builds a trajectory from samples sorted by strictly increasing time.
    /// The nominal step is the mean spacing of the time stamps.
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidTrajectory("no samples".into()));
        }
        for (k, s) in samples.iter().enumerate() {
            let finite = s.t.is_finite()
                && s.left.iter().chain(&s.right).all(|v| v.is_finite());
            if !finite {
                return Err(Error::InvalidTrajectory(format!(
                    "non-finite value in sample {k}"
                )));
            }
            if k > 0 && s.t <= samples[k - 1].t {
                return Err(Error::InvalidTrajectory(format!(
                    "time not strictly increasing at sample {k} (t = {})",
                    s.t
                )));
            }
        }
        let dt = if samples.len() > 1 {
            (samples[samples.len() - 1].t - samples[0].t) / (samples.len() - 1) as f64
        } else {
            0.0
        };
        Ok(Self { samples, dt })
    }

    /// Regularly sampled trajectory with `t_k = k * dt`, `k = 1..=positions.len()`.
    pub fn regular(dt: f64, positions: &[([f64; 2], [f64; 2])]) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidTrajectory(format!("bad time step {dt}")));
        }
        let samples = positions
            .iter()
            .enumerate()
            .map(|(k, &(left, right))| Sample {
                t: grid_time(k + 1, dt),
                left,
                right,
            })
            .collect();
        let mut traj = Self::new(samples)?;
        traj.dt = dt;
        Ok(traj)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Drops every sample recorded before `start` seconds.
    pub fn trimmed(&self, start: f64) -> Result<Self> {
        let kept: Vec<Sample> = self.samples.iter().copied().filter(|s| s.t >= start).collect();
        let mut traj = Self::new(kept)?;
        traj.dt = self.dt;
        Ok(traj)
    }
}

/// `k * dt` snapped to a 1e-9 s grid, so that nominal boundaries such as
/// 15 s land exactly on the boundary rather than one ulp past it.
pub fn grid_time(k: usize, dt: f64) -> f64 {
    ((k as f64 * dt) * 1e9).round() / 1e9
}

/// Time interval with independently open or closed endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
    pub start_closed: bool,
    pub end_closed: bool,
}

impl TimeWindow {
    /// `[start, end[`
    pub const fn closed_open(start: f64, end: f64) -> Self {
        Self { start, end, start_closed: true, end_closed: false }
    }

    /// `]start, end]`
    pub const fn open_closed(start: f64, end: f64) -> Self {
        Self { start, end, start_closed: false, end_closed: true }
    }

    /// `[start, end]`
    pub const fn closed(start: f64, end: f64) -> Self {
        Self { start, end, start_closed: true, end_closed: true }
    }

    pub fn contains(&self, t: f64) -> bool {
        let lower = if self.start_closed { t >= self.start } else { t > self.start };
        let upper = if self.end_closed { t <= self.end } else { t < self.end };
        lower && upper
    }
}

impl fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let open = if self.start_closed { '[' } else { ']' };
        let close = if self.end_closed { ']' } else { '[' };
        write!(f, "{open}{}, {}{close}", self.start, self.end)
    }
}

/// Protocol timing and the analysis windows derived from it.
///
/// The window fields are public so that endpoint conventions can be
/// overridden after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSchedule {
    pub phase2_start: f64,
    pub phase2_end: f64,
    pub total: f64,
    pub mean_window: f64,
    /// Window over which the reference position is the median.
    pub reference: TimeWindow,
    /// Windows of the four sway means, in order before/after onset, before/after offset.
    pub mean_windows: [TimeWindow; 4],
    /// Windows of the five orientation slopes.
    pub slope_windows: [TimeWindow; 5],
}

impl PhaseSchedule {
    pub fn new(phase2_start: f64, phase2_end: f64, total: f64, mean_window: f64) -> Result<Self> {
        let ordered = 0.0 < phase2_start && phase2_start < phase2_end && phase2_end < total;
        if !ordered || !(mean_window > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "phase schedule ({phase2_start}, {phase2_end}, {total}, {mean_window}) is not ordered"
            )));
        }
        let (s, e, w) = (phase2_start, phase2_end, mean_window);
        Ok(Self {
            phase2_start,
            phase2_end,
            total,
            mean_window,
            reference: TimeWindow::closed(0.0, s),
            mean_windows: [
                TimeWindow::closed_open(s - w, s),
                TimeWindow::open_closed(s, s + w),
                TimeWindow::closed_open(e - w, e),
                TimeWindow::open_closed(e, e + w),
            ],
            slope_windows: [
                TimeWindow::closed_open(s - w, s),
                TimeWindow::closed_open(s, s + w),
                TimeWindow::closed_open(s + w, e - w),
                TimeWindow::closed_open(e - w, e),
                TimeWindow::closed_open(e, e + w),
            ],
        })
    }
}

impl Default for PhaseSchedule {
    fn default() -> Self {
        Self::new(15.0, 50.0, 70.0, 5.0).expect("default schedule is ordered")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedPoint {
    pub t: f64,
    pub p: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedValue {
    pub t: f64,
    pub c: f64,
}

/// Mean sway over the four windows around the perturbation phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwayMeans {
    pub before_onset: f64,
    pub after_onset: f64,
    pub before_offset: f64,
    pub after_offset: f64,
}

impl SwayMeans {
    pub fn to_array(self) -> [f64; 4] {
        [self.before_onset, self.after_onset, self.before_offset, self.after_offset]
    }
}

/// The three-component summary: onset jump, drift over the perturbation,
/// offset jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryBasic {
    pub y: [f64; 3],
    pub means: SwayMeans,
}

/// Basic summary followed by the five orientation slopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryExtended {
    pub y: [f64; 8],
}

pub fn barycenter_path(traj: &Trajectory) -> Vec<TimedPoint> {
    traj.samples()
        .iter()
        .map(|s| TimedPoint {
            t: s.t,
            p: [(s.left[0] + s.right[0]) / 2.0, (s.left[1] + s.right[1]) / 2.0],
        })
        .collect()
}

/// Median, averaging the two central order statistics for even counts.
fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Componentwise median of the barycenter over the reference window.
pub fn reference_point(bpath: &[TimedPoint], schedule: &PhaseSchedule) -> Result<[f64; 2]> {
    let window = schedule.reference;
    let (mut xs, mut ys): (Vec<f64>, Vec<f64>) = bpath
        .iter()
        .filter(|b| window.contains(b.t))
        .map(|b| (b.p[0], b.p[1]))
        .unzip();
    if xs.is_empty() {
        return Err(Error::EmptyWindow(window.to_string()));
    }
    Ok([median(&mut xs), median(&mut ys)])
}

pub fn sway_series(bpath: &[TimedPoint], reference: [f64; 2]) -> Vec<TimedValue> {
    bpath
        .iter()
        .map(|b| TimedValue {
            t: b.t,
            c: (b.p[0] - reference[0]).hypot(b.p[1] - reference[1]),
        })
        .collect()
}

pub fn interval_mean(series: &[TimedValue], window: TimeWindow) -> Result<f64> {
    let (sum, count) = series
        .iter()
        .filter(|v| window.contains(v.t))
        .fold((0.0, 0usize), |(s, k), v| (s + v.c, k + 1));
    if count == 0 {
        return Err(Error::EmptyWindow(window.to_string()));
    }
    Ok(sum / count as f64)
}

fn sway_of(traj: &Trajectory, schedule: &PhaseSchedule) -> Result<(Vec<TimedPoint>, Vec<TimedValue>)> {
    let bpath = barycenter_path(traj);
    let b = reference_point(&bpath, schedule)?;
    let sway = sway_series(&bpath, b);
    Ok((bpath, sway))
}

fn summarize_sway(sway: &[TimedValue], schedule: &PhaseSchedule) -> Result<SummaryBasic> {
    let [w0, w1, w2, w3] = schedule.mean_windows;
    let means = SwayMeans {
        before_onset: interval_mean(sway, w0)?,
        after_onset: interval_mean(sway, w1)?,
        before_offset: interval_mean(sway, w2)?,
        after_offset: interval_mean(sway, w3)?,
    };
    let y = [
        means.after_onset - means.before_onset,
        means.before_offset - means.after_onset,
        means.after_offset - means.before_offset,
    ];
    Ok(SummaryBasic { y, means })
}

pub fn basic_summary(traj: &Trajectory, schedule: &PhaseSchedule) -> Result<SummaryBasic> {
    let (_, sway) = sway_of(traj, schedule)?;
    summarize_sway(&sway, schedule)
}

/// Least-squares slope of ordinate on abscissa for the barycenter samples
/// inside `window`.
pub fn slope_fit(bpath: &[TimedPoint], window: TimeWindow) -> Result<f64> {
    let pts: Vec<[f64; 2]> = bpath.iter().filter(|b| window.contains(b.t)).map(|b| b.p).collect();
    match pts.len() {
        0 => return Err(Error::EmptyWindow(window.to_string())),
        1 => return Err(Error::SlopeDegenerate(window.to_string())),
        _ => {}
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut sq) = (0.0, 0.0, 0.0);
    for p in &pts {
        let dx = p[0] - mean_x;
        sxx += dx * dx;
        sxy += dx * (p[1] - mean_y);
        sq += p[0] * p[0];
    }
    if sxx / n <= SLOPE_VARIANCE_TOL * (sq / n) {
        return Err(Error::SlopeDegenerate(window.to_string()));
    }
    Ok(sxy / sxx)
}

pub fn extended_summary(traj: &Trajectory, schedule: &PhaseSchedule) -> Result<SummaryExtended> {
    let (bpath, sway) = sway_of(traj, schedule)?;
    let basic = summarize_sway(&sway, schedule)?;
    let mut y = [0.0; 8];
    y[..3].copy_from_slice(&basic.y);
    for (slot, window) in y[3..].iter_mut().zip(schedule.slope_windows) {
        *slot = slope_fit(&bpath, window)?;
    }
    Ok(SummaryExtended { y })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn const_traj(p: [f64; 2]) -> Trajectory {
        Trajectory::regular(0.025, &vec![(p, p); 2800]).unwrap()
    }

    fn series(points: &[(f64, f64)]) -> Vec<TimedValue> {
        points.iter().map(|&(t, c)| TimedValue { t, c }).collect()
    }

    #[test]
    fn rejects_invalid_trajectories() {
        assert!(Trajectory::new(vec![]).is_err());
        let s = |t: f64| Sample { t, left: [0.0; 2], right: [0.0; 2] };
        assert!(Trajectory::new(vec![s(1.0), s(1.0)]).is_err());
        let mut bad = s(2.0);
        bad.left[1] = f64::NAN;
        assert!(Trajectory::new(vec![s(1.0), bad]).is_err());
    }

    #[test]
    fn grid_hits_phase_boundaries() {
        assert_eq!(grid_time(600, 0.025), 15.0);
        assert_eq!(grid_time(2000, 0.025), 50.0);
        assert_eq!(grid_time(2800, 0.025), 70.0);
    }

    #[test]
    fn barycenter_is_midpoint() {
        let t = Trajectory::regular(0.025, &[([0.0, 0.0], [2.0, 4.0]), ([1.0, 2.0], [1.0, 2.0])]).unwrap();
        let b = barycenter_path(&t);
        assert_eq!(b[0].p, [1.0, 2.0]);
        assert_eq!(b[1].p, [1.0, 2.0]);
        assert_eq!(b[1].t, t.samples()[1].t);
    }

    #[test]
    fn reference_median_conventions() {
        let sched = PhaseSchedule::default();
        let pts = |xs: &[f64]| -> Vec<TimedPoint> {
            xs.iter().enumerate().map(|(k, &x)| TimedPoint { t: k as f64, p: [x, 0.0] }).collect()
        };
        assert_eq!(reference_point(&pts(&[3.0, 1.0, 2.0]), &sched).unwrap()[0], 2.0);
        assert_eq!(reference_point(&pts(&[4.0, 1.0, 3.0, 2.0]), &sched).unwrap()[0], 2.5);
        let late = vec![TimedPoint { t: 16.0, p: [0.0, 0.0] }];
        assert!(matches!(reference_point(&late, &sched), Err(Error::EmptyWindow(_))));
    }

    #[test]
    fn sway_is_euclidean_distance() {
        let b = [TimedPoint { t: 1.0, p: [4.0, 6.0] }, TimedPoint { t: 2.0, p: [1.0, 2.0] }];
        let c = sway_series(&b, [1.0, 2.0]);
        assert_eq!(c[0].c, 5.0);
        assert_eq!(c[1].c, 0.0);
    }

    #[test]
    fn interval_mean_respects_endpoints() {
        let s = series(&[(10.0, 1.0), (12.0, 2.0), (15.0, 3.0), (16.0, 9.0)]);
        assert_eq!(interval_mean(&s, TimeWindow::closed_open(10.0, 15.0)).unwrap(), 1.5);
        assert_eq!(interval_mean(&s, TimeWindow::open_closed(15.0, 20.0)).unwrap(), 9.0);
        assert_eq!(interval_mean(&s, TimeWindow::closed(12.0, 15.0)).unwrap(), 2.5);
        assert!(matches!(
            interval_mean(&s, TimeWindow::open_closed(20.0, 25.0)),
            Err(Error::EmptyWindow(_))
        ));
    }

    #[test]
    fn unit_sway_window_holds_two_hundred_samples() {
        let sched = PhaseSchedule::default();
        let s: Vec<TimedValue> = (1..=2800).map(|k| TimedValue { t: grid_time(k, 0.025), c: 1.0 }).collect();
        let w = sched.mean_windows[0];
        assert_eq!(s.iter().filter(|v| w.contains(v.t)).count(), 200);
        assert_eq!(interval_mean(&s, w).unwrap(), 1.0);
    }

    #[test]
    fn constant_trajectory_summaries() {
        let sched = PhaseSchedule::default();
        let t = const_traj([1.0, 2.0]);
        let basic = basic_summary(&t, &sched).unwrap();
        assert_eq!(basic.y, [0.0; 3]);
        assert!(matches!(extended_summary(&t, &sched), Err(Error::SlopeDegenerate(_))));
    }

    #[test]
    fn slope_on_exact_line() {
        let b: Vec<TimedPoint> = (0..50)
            .map(|k| {
                let x = k as f64 * 0.1;
                TimedPoint { t: 10.0 + k as f64 * 0.05, p: [x, 2.0 * x + 1.0] }
            })
            .collect();
        let v = slope_fit(&b, TimeWindow::closed_open(10.0, 15.0)).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let vertical: Vec<TimedPoint> =
            (0..10).map(|k| TimedPoint { t: 10.0 + k as f64, p: [3.0, k as f64] }).collect();
        assert!(matches!(
            slope_fit(&vertical, TimeWindow::closed(10.0, 20.0)),
            Err(Error::SlopeDegenerate(_))
        ));
    }
}
