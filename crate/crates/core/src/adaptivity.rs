//! Step-size control for the composed flow, ratio clamps, and the lower
//! bounds on consecutive step ratios.

use std::io::{self, Write};

use thiserror::Error;

use crate::bdf::ImplicitSolveConfig;
use crate::composition::{alpha1_candidates, composed_step, ComposedStepOutput};
use crate::output::sci;
use crate::problems::{bootstrap, BootstrapPolicy, OdeProblem};
use crate::{Error, C64};

/// Bisection tolerance for [`min_ratio`].
pub const BOUND_TOL: f64 = 1e-4;

/// Ratio clamp factor `ℓ_p`.
pub fn clamp_factor(p: usize) -> f64 {
    match p {
        1 => 2.0,
        2..=5 => 2f64.powf(1.0 / (2 * p - 3) as f64),
        _ => (p as f64).powf(1.0 / (p * (p - 1)) as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepController {
    /// Base order.
    pub p: usize,
    pub tol: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub ell: f64,
    /// When false only the absolute clamps apply.
    pub clamps: bool,
}

impl StepController {
    pub fn new(p: usize, tol: f64, tau_max: f64) -> Self {
        assert!((1..=8).contains(&p) && tol > 0.0);
        StepController {
            p,
            tol,
            tau_min: 1e-12,
            tau_max,
            ell: clamp_factor(p),
            clamps: true,
        }
    }

    pub fn without_clamps(mut self) -> Self {
        self.clamps = false;
        self
    }
}

/// `τ_{n+1} = τ_n (tol/e_n)^{1/(p+2)}`, clamped to `[τ_n/ℓ, τ_n ℓ]` and then
/// to `[tau_min, tau_max]`.
pub fn next_step(tau_n: f64, e_n: f64, ctl: &StepController) -> f64 {
    let (lo, hi) = if ctl.clamps {
        (tau_n / ctl.ell, tau_n * ctl.ell)
    } else {
        (0.0, f64::INFINITY)
    };
    let raw = if e_n > 0.0 {
        tau_n * (ctl.tol / e_n).powf(1.0 / (ctl.p + 2) as f64)
    } else {
        hi
    };
    raw.clamp(lo, hi).clamp(ctl.tau_min, ctl.tau_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMode {
    /// Uniform history, then one contracted step.
    FirstStep,
    /// History steps already contracted at `p^{−1/(p(p−1))}` each.
    Steady,
}

/// True if a root with positive real part exists when the step after
/// `history_steps` (oldest first) is `x` times the last one.
pub fn admissible_after(p: usize, history_steps: &[f64], x: f64) -> bool {
    let mut times = vec![0.0];
    for h in history_steps {
        times.push(times.last().unwrap() + h);
    }
    let tau = x * history_steps.last().copied().unwrap_or(1.0);
    let last = *times.last().unwrap();
    let ratios: Vec<f64> = (1..=p)
        .map(|j| (last - times[times.len() - j]) / tau)
        .collect();
    alpha1_candidates(&ratios).is_ok_and(|r| r.iter().any(|z| z.re > 0.0))
}

/// Smallest admissible ratio after the given history, by bisection.
pub fn min_ratio_for_history(p: usize, history_steps: &[f64]) -> f64 {
    let (mut lo, mut hi) = (0.01, 1.5);
    while hi - lo > BOUND_TOL {
        let mid = 0.5 * (lo + hi);
        if admissible_after(p, history_steps, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

pub fn min_ratio(p: usize, mode: BoundMode) -> f64 {
    assert!((2..=8).contains(&p), "bounds are defined for p in 2..=8");
    let history: Vec<f64> = match mode {
        BoundMode::FirstStep => vec![1.0; p - 1],
        BoundMode::Steady => {
            let c = (p as f64).powf(-1.0 / (p * (p - 1)) as f64);
            (0..p - 1).map(|k| c.powi(k as i32)).collect()
        }
    };
    min_ratio_for_history(p, &history)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub n: usize,
    pub t: f64,
    pub tau: f64,
    pub alpha1: C64,
    pub err_estimate: f64,
    pub err_exact: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    /// All nodes including the bootstrap window.
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub steps: Vec<StepRecord>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{source} at t = {t} (step {step})")]
pub struct DriveFailure {
    pub t: f64,
    pub step: usize,
    pub source: Error,
    pub partial: Trajectory,
}

/// Runs Algorithm-1 style adaptive integration up to `t_end`.
///
/// Steps are never rejected; only the next step is rescaled. The final
/// step is not shortened to hit `t_end`, so the last time may overshoot.
pub fn adaptive_drive(
    problem: &OdeProblem,
    p: usize,
    tau0: f64,
    ctl: &StepController,
    t_end: f64,
    cfg: &ImplicitSolveConfig,
) -> std::result::Result<Trajectory, DriveFailure> {
    drive_with(problem, p, tau0, ctl, t_end, cfg, |out| out.error_estimate)
}

/// Like [`adaptive_drive`] with a custom per-step error estimate.
pub fn drive_with<E>(
    problem: &OdeProblem,
    p: usize,
    tau0: f64,
    ctl: &StepController,
    t_end: f64,
    cfg: &ImplicitSolveConfig,
    estimate: E,
) -> std::result::Result<Trajectory, DriveFailure>
where
    E: Fn(&ComposedStepOutput) -> f64,
{
    let fail = |t: f64, step: usize, source: Error, partial: &Trajectory| DriveFailure {
        t,
        step,
        source,
        partial: partial.clone(),
    };
    let mut traj = Trajectory::default();
    let policy = if problem.exact.is_some() {
        BootstrapPolicy::Exact
    } else {
        BootstrapPolicy::Cascade
    };
    let mut window =
        bootstrap(problem, p, tau0, policy, cfg).map_err(|e| fail(problem.t0, 0, e, &traj))?;
    for (t, y) in window.times().iter().zip(window.states()) {
        traj.times.push(t.re);
        traj.states.push(y.iter().map(|v| v.re).collect());
    }
    let mut tau = tau0;
    let mut alpha = None;
    let mut n = p;
    let mut t = window.last_time().re;
    while t < t_end - 1e-12 * t_end.abs().max(1.0) {
        let (next, out) = match composed_step(problem.rhs.as_ref(), &window, tau, cfg, alpha) {
            Ok(v) => v,
            Err(e) => return Err(fail(t, n, e, &traj)),
        };
        t = next.last_time().re;
        let err_exact = problem.exact.as_ref().map(|ex| {
            ex(t)
                .iter()
                .zip(&out.y_real)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        });
        let e = estimate(&out);
        traj.steps.push(StepRecord {
            n,
            t,
            tau,
            alpha1: out.alpha1,
            err_estimate: e,
            err_exact,
        });
        traj.times.push(t);
        traj.states.push(out.y_real.clone());
        alpha = Some(out.alpha1);
        window = next;
        n += 1;
        tau = next_step(tau, e, ctl);
    }
    Ok(traj)
}

/// Ratios `τ_{n+1}/τ_n` between consecutive accepted steps.
pub fn step_ratios(traj: &Trajectory) -> Vec<f64> {
    traj.steps.windows(2).map(|w| w[1].tau / w[0].tau).collect()
}

pub fn write_trace_csv<W: Write>(traj: &Trajectory, mut w: W) -> io::Result<()> {
    let with_exact = traj.steps.iter().all(|s| s.err_exact.is_some()) && !traj.steps.is_empty();
    write!(w, "n,t_n,tau_n,re_alpha1,im_alpha1,err_estimate")?;
    if with_exact {
        write!(w, ",err_exact")?;
    }
    writeln!(w)?;
    for s in &traj.steps {
        write!(
            w,
            "{},{},{},{},{},{}",
            sci(s.n as f64),
            sci(s.t),
            sci(s.tau),
            sci(s.alpha1.re),
            sci(s.alpha1.im),
            sci(s.err_estimate)
        )?;
        if let (true, Some(e)) = (with_exact, s.err_exact) {
            write!(w, ",{}", sci(e))?;
        }
        writeln!(w)?;
    }
    Ok(())
}
