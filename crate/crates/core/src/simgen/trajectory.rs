//! Piecewise mean-reverting center-of-pressure paths.
//!
//! Each foot follows a 2-D Ornstein-Uhlenbeck process integrated with the
//! Euler-Maruyama scheme. One parameter set drives the unperturbed phases,
//! another the perturbation phase; the two regime switches can be jittered
//! symmetrically around their nominal times.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{grid_time, PhaseSchedule, Trajectory};

/// `dX = rate (center - X) dt + volatility dW`, per coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuRegime {
    pub center: [f64; 2],
    pub rate: f64,
    pub volatility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    /// Regime of phases 1 and 3.
    pub rest: OuRegime,
    /// Regime of phase 2.
    pub perturbed: OuRegime,
    /// Offset of the left foot from the regime center; the right foot uses
    /// the mirrored offset so the barycenter tracks the center.
    pub foot_offset: [f64; 2],
    /// Half-width of the uniform jitter applied to each regime switch.
    pub switch_jitter: f64,
    pub dt: f64,
}

impl Default for RegimeParams {
    fn default() -> Self {
        Self {
            rest: OuRegime { center: [0.0, 0.0], rate: 1.0, volatility: 0.5 },
            perturbed: OuRegime { center: [0.5, 1.0], rate: 1.0, volatility: 1.0 },
            foot_offset: [-10.0, 0.0],
            switch_jitter: 0.0,
            dt: 0.025,
        }
    }
}

impl RegimeParams {
    fn validate(&self, schedule: &PhaseSchedule) -> Result<()> {
        for r in [self.rest, self.perturbed] {
            if !(r.rate >= 0.0) || !(r.volatility >= 0.0) {
                return Err(Error::InvalidConfig("OU rate and volatility must be non-negative".into()));
            }
            // explicit Euler is unstable beyond this
            if r.rate * self.dt > 2.0 {
                return Err(Error::InvalidConfig(format!(
                    "rate {} too stiff for step {}",
                    r.rate, self.dt
                )));
            }
        }
        if !(self.dt > 0.0) || !(self.switch_jitter >= 0.0) {
            return Err(Error::InvalidConfig("dt must be positive and jitter non-negative".into()));
        }
        let first = schedule.phase2_start - self.switch_jitter;
        let last = schedule.phase2_end + self.switch_jitter;
        if first <= 0.0 || schedule.phase2_start + self.switch_jitter >= schedule.phase2_end - self.switch_jitter
            || last >= schedule.total
        {
            return Err(Error::InvalidConfig("switch jitter overlaps the phase boundaries".into()));
        }
        Ok(())
    }
}

/// Simulates one protocol over `[0, schedule.total]` at step `params.dt`.
/// Samples are recorded at `t_k = k dt` for `k >= 1`; both feet start at
/// their rest-regime centers.
pub fn synth_trajectory<R: Rng + ?Sized>(
    rng: &mut R,
    schedule: &PhaseSchedule,
    params: &RegimeParams,
) -> Result<Trajectory> {
    params.validate(schedule)?;
    let mut jitter = || {
        if params.switch_jitter > 0.0 {
            rng.gen_range(-params.switch_jitter..=params.switch_jitter)
        } else {
            0.0
        }
    };
    let onset = schedule.phase2_start + jitter();
    let offset = schedule.phase2_end + jitter();

    let steps = (schedule.total / params.dt).round() as usize;
    let sqrt_dt = params.dt.sqrt();
    let off = params.foot_offset;
    let mut feet = [
        [params.rest.center[0] + off[0], params.rest.center[1] + off[1]],
        [params.rest.center[0] - off[0], params.rest.center[1] - off[1]],
    ];
    let mut positions = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = grid_time(k, params.dt);
        let regime = if t >= onset && t < offset { params.perturbed } else { params.rest };
        for (foot, sign) in feet.iter_mut().zip([1.0, -1.0]) {
            for c in 0..2 {
                let target = regime.center[c] + sign * off[c];
                let z: f64 = StandardNormal.sample(rng);
                foot[c] += regime.rate * (target - foot[c]) * params.dt + regime.volatility * sqrt_dt * z;
            }
        }
        positions.push((feet[0], feet[1]));
    }
    Trajectory::regular(params.dt, &positions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::basic_summary;
    use crate::rng;

    fn still(center: [f64; 2], rate: f64) -> OuRegime {
        OuRegime { center, rate, volatility: 0.0 }
    }

    #[test]
    fn deterministic_constant_path() {
        let sched = PhaseSchedule::default();
        let p = RegimeParams {
            rest: still([1.0, 2.0], 3.0),
            perturbed: still([1.0, 2.0], 3.0),
            ..RegimeParams::default()
        };
        let traj = synth_trajectory(&mut rng::stream(1, &[]), &sched, &p).unwrap();
        assert_eq!(traj.len(), 2800);
        assert_eq!(basic_summary(&traj, &sched).unwrap().y, [0.0; 3]);
    }

    #[test]
    fn onset_jump_approaches_offset_distance() {
        let sched = PhaseSchedule::default();
        let mut errs = vec![];
        for rate in [2.0, 10.0, 40.0] {
            let p = RegimeParams {
                rest: still([0.0, 0.0], rate),
                perturbed: still([3.0, 4.0], rate),
                ..RegimeParams::default()
            };
            let traj = synth_trajectory(&mut rng::stream(1, &[]), &sched, &p).unwrap();
            errs.push((basic_summary(&traj, &sched).unwrap().y[0] - 5.0).abs());
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2]);
        assert!(errs[2] < 1e-9, "{errs:?}");
    }

    #[test]
    fn reproducible_with_seed() {
        let sched = PhaseSchedule::default();
        let p = RegimeParams { switch_jitter: 1.0, ..RegimeParams::default() };
        let a = synth_trajectory(&mut rng::stream(5, &[1]), &sched, &p).unwrap();
        let b = synth_trajectory(&mut rng::stream(5, &[1]), &sched, &p).unwrap();
        let c = synth_trajectory(&mut rng::stream(5, &[2]), &sched, &p).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_stiff_rates() {
        let p = RegimeParams { rest: still([0.0, 0.0], 100.0), ..RegimeParams::default() };
        assert!(synth_trajectory(&mut rng::stream(1, &[]), &PhaseSchedule::default(), &p).is_err());
    }
}
