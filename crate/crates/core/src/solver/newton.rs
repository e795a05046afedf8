use std::fmt;

use serde::{Deserialize, Serialize};

use super::linear::{linear_solve, LinearOptions};
use crate::error::{Error, Result};
use crate::fem::{assemble_jacobian_with, assemble_residual, FeSpace, JacobianMode, StateFields};
use crate::mesh::MeshId;
use crate::model::Problem;

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonOptions {
    pub abs_tol: f64,
    /// Relative to the residual norm at the initial guess.
    pub rel_tol: f64,
    pub max_iter: usize,
    pub jacobian: JacobianMode,
    pub linear: LinearOptions,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_iter: 20,
            jacobian: JacobianMode::Analytic,
            linear: LinearOptions::default(),
        }
    }
}

/// Bookkeeping of one accepted time step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeStepRecord {
    pub n: usize,
    pub t_n: f64,
    pub tau_n: f64,
    /// Newton updates performed.
    pub k_n: usize,
    /// Residual norms at the initial guess and after every update.
    pub newton_residual_history: Vec<f64>,
    pub linear_iters: usize,
    pub mesh: u64,
}

impl TimeStepRecord {
    pub fn final_residual(&self) -> f64 {
        *self.newton_residual_history.last().unwrap_or(&f64::NAN)
    }
}

/// A Newton solve that did not converge, with the best iterate seen.
#[derive(Clone, Debug)]
pub struct StepFailure {
    pub best: StateFields,
    pub history: Vec<f64>,
    pub reason: String,
}

impl fmt::Display for StepFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} after {} iterations", self.reason, self.history.len().saturating_sub(1))?;
        if let Some(r) = self.history.last() {
            write!(f, " (residual {r:e})")?;
        }
        Ok(())
    }
}

/// Solve one backward-Euler step from `prev` with step `tau`, ending at time
/// `t` (where the forcing is evaluated). The initial guess is `prev`; at least
/// one Newton update is always taken.
pub fn newton_solve(
    space: &FeSpace,
    problem: &Problem,
    prev: &StateFields,
    tau: f64,
    t: f64,
    opts: &NewtonOptions,
) -> Result<(StateFields, TimeStepRecord)> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {tau}")));
    }
    prev.check_on(space.mesh())?;
    if !prev.is_finite() {
        return Err(Error::InvalidArgument("previous state is not finite".into()));
    }
    let mesh_id: MeshId = space.mesh().id();
    let mut x = prev.clone();
    let mut r = assemble_residual(space, problem, &x, prev, tau, t)?;
    let r0 = r.norm();
    let target = opts.abs_tol.max(opts.rel_tol * r0);
    let mut history = vec![r0];
    let mut best = (r0, x.clone());
    let mut linear_iters = 0;
    let fail = |best: (f64, StateFields), history: Vec<f64>, reason: String| {
        Error::StepFailure(Box::new(StepFailure {
            best: best.1,
            history,
            reason,
        }))
    };
    for k in 1..=opts.max_iter {
        let jac = assemble_jacobian_with(space, &x, prev, tau, &problem.params, opts.jacobian)?;
        let rhs: Vec<f64> = r.to_interleaved().iter().map(|v| -v).collect();
        let delta = match linear_solve(&jac, &rhs, &opts.linear) {
            Ok((d, info)) => {
                linear_iters += info.iterations;
                d
            }
            Err(e) => return Err(fail(best, history, format!("linear solve failed: {e}"))),
        };
        let mut xi = x.to_interleaved();
        for (a, d) in xi.iter_mut().zip(&delta) {
            *a += d;
        }
        x = StateFields::from_interleaved(mesh_id, &xi);
        if !x.is_finite() {
            return Err(fail(best, history, "iterate became non-finite".into()));
        }
        r = assemble_residual(space, problem, &x, prev, tau, t)?;
        let rn = r.norm();
        history.push(rn);
        if rn < best.0 {
            best = (rn, x.clone());
        }
        log::trace!("newton {k}: residual {rn:e} (target {target:e})");
        if rn <= target {
            return Ok((
                x,
                TimeStepRecord {
                    n: 0,
                    t_n: t,
                    tau_n: tau,
                    k_n: k,
                    newton_residual_history: history,
                    linear_iters,
                    mesh: mesh_id.0,
                },
            ));
        }
        if !rn.is_finite() {
            return Err(fail(best, history, "residual became non-finite".into()));
        }
    }
    Err(fail(best, history, "Newton iteration limit reached".into()))
}
