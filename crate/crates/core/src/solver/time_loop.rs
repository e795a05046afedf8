use super::newton::{newton_solve, NewtonOptions, TimeStepRecord};
use crate::error::{Error, Result};
use crate::fem::{norms, FeSpace, StateFields};
use crate::model::Problem;

/// Opt-in step-size control from the size of the state increment.
#[derive(Clone, Debug, PartialEq)]
pub struct StepControl {
    /// Steps whose increment `(sum ||z^n - z^{n-1}||^2)^{1/2}` exceeds this are
    /// rejected and retried with half the step.
    pub tol: f64,
    pub tau_max: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeLoopOptions {
    pub newton: NewtonOptions,
    /// Smallest step tried after failures; defaults to `tau0 / 64`.
    pub tau_min: Option<f64>,
    /// Start time, e.g. when resuming from a checkpoint.
    pub t_start: f64,
    pub keep_states: bool,
    pub step_control: Option<StepControl>,
}

impl Default for TimeLoopOptions {
    fn default() -> Self {
        TimeLoopOptions {
            newton: NewtonOptions::default(),
            tau_min: None,
            t_start: 0.0,
            keep_states: false,
            step_control: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub records: Vec<TimeStepRecord>,
    /// States after each step when `keep_states` is set.
    pub states: Vec<StateFields>,
    pub final_state: StateFields,
    pub final_time: f64,
    /// Set when the loop gave up before reaching the final time.
    pub aborted: Option<String>,
}

pub type StepCallback<'a> = &'a mut dyn FnMut(&TimeStepRecord, &StateFields);

/// Advance `initial` from `opts.t_start` to `t_final` on a fixed mesh.
pub fn time_loop(
    space: &FeSpace,
    problem: &Problem,
    initial: StateFields,
    t_final: f64,
    tau0: f64,
    opts: &TimeLoopOptions,
    mut callback: Option<StepCallback<'_>>,
) -> Result<Trajectory> {
    if !(t_final > opts.t_start) || !(tau0 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need t_final > t_start and tau0 > 0 (got t_final={t_final}, t_start={}, tau0={tau0})",
            opts.t_start
        )));
    }
    initial.check_on(space.mesh())?;
    let tau_min = opts.tau_min.unwrap_or(tau0 / 64.0);
    let eps = 1e-12 * t_final.abs().max(1.0);
    let mut t = opts.t_start;
    let mut state = initial;
    let mut tau_next = tau0;
    let mut traj = Trajectory {
        records: Vec::new(),
        states: Vec::new(),
        final_state: state.clone(),
        final_time: t,
        aborted: None,
    };
    while t < t_final - eps {
        let mut tau = tau_next;
        let accepted = loop {
            let mut t_new = t + tau;
            if t_new >= t_final - eps {
                t_new = t_final;
            }
            let step = t_new - t;
            match newton_solve(space, problem, &state, step, t_new, &opts.newton) {
                Ok((next, mut rec)) => {
                    if let Some(sc) = &opts.step_control {
                        let inc = state_increment(space, &next, &state);
                        if inc > sc.tol && step / 2.0 >= tau_min {
                            tau = step / 2.0;
                            continue;
                        }
                        tau_next = if inc < sc.tol / 4.0 { (2.0 * step).min(sc.tau_max) } else { step };
                    } else {
                        tau_next = tau0;
                    }
                    rec.n = traj.records.len() + 1;
                    break Some((next, rec));
                }
                Err(Error::StepFailure(f)) => {
                    log::warn!("step from t={t} with tau={step} failed: {f}");
                    if step / 2.0 < tau_min {
                        traj.aborted = Some(format!(
                            "step size fell below {tau_min:e} at t={t}: {f}"
                        ));
                        break None;
                    }
                    tau = step / 2.0;
                }
                Err(e) => return Err(e),
            }
        };
        let Some((next, rec)) = accepted else { break };
        t = rec.t_n;
        if let Some(cb) = callback.as_mut() {
            cb(&rec, &next);
        }
        if opts.keep_states {
            traj.states.push(next.clone());
        }
        traj.records.push(rec);
        state = next;
    }
    traj.final_state = state;
    traj.final_time = t;
    Ok(traj)
}

fn state_increment(space: &FeSpace, a: &StateFields, b: &StateFields) -> f64 {
    let d = a.difference(b).expect("states share a mesh");
    (0..3).map(|f| norms(space, d.field(f)).l2.powi(2)).sum::<f64>().sqrt()
}
