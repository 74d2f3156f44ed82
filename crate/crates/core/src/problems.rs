//! Test problems with exact solutions, and window bootstrap.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bdf::{HistoryWindow, ImplicitSolveConfig};
use crate::composition::composed_step;
use crate::{Error, Result, C64};

pub type RhsFn = dyn Fn(C64, &[C64]) -> Vec<C64> + Send + Sync;
pub type ExactFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;

#[derive(Clone)]
pub struct OdeProblem {
    pub name: String,
    pub rhs: Arc<RhsFn>,
    pub t0: f64,
    pub y0: Vec<f64>,
    pub t_end: f64,
    pub exact: Option<Arc<ExactFn>>,
}

impl fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeProblem")
            .field("name", &self.name)
            .field("t0", &self.t0)
            .field("y0", &self.y0)
            .field("t_end", &self.t_end)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

impl OdeProblem {
    pub fn dim(&self) -> usize {
        self.y0.len()
    }

    pub fn exact_at(&self, t: f64) -> Result<Vec<f64>> {
        self.exact
            .as_ref()
            .map(|e| e(t))
            .ok_or(Error::MissingExactSolution)
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }
}

pub const BUILTIN_NAMES: [&str; 4] = ["cubic_decay", "forced_linear", "stiff_arctan", "lambert"];

/// Builtin by name, with the default parameters of each family.
pub fn builtin(name: &str) -> Result<OdeProblem> {
    match name {
        "cubic_decay" => Ok(cubic_decay()),
        "forced_linear" => Ok(forced_linear(-0.1, 2.0 * PI, 2.0)),
        "stiff_arctan" => Ok(stiff_arctan()),
        "lambert" => Ok(lambert(0.01)),
        _ => Err(Error::UnknownProblem(name.to_string())),
    }
}

/// `y′ = −y³`, `y(0) = 1` on `[0, 1]`.
pub fn cubic_decay() -> OdeProblem {
    OdeProblem {
        name: "cubic_decay".into(),
        rhs: Arc::new(|_t, y| y.iter().map(|v| -v * v * v).collect()),
        t0: 0.0,
        y0: vec![1.0],
        t_end: 1.0,
        exact: Some(Arc::new(|t| vec![1.0 / (1.0 + 2.0 * t).sqrt()])),
    }
}

/// `y′ = λy + sin(ωt)` on `[0, 5]`.
pub fn forced_linear(lambda: f64, omega: f64, y0: f64) -> OdeProblem {
    OdeProblem {
        name: "forced_linear".into(),
        rhs: Arc::new(move |t, y| vec![lambda * y[0] + (omega * t).sin()]),
        t0: 0.0,
        y0: vec![y0],
        t_end: 5.0,
        exact: Some(Arc::new(move |t| {
            let forced = omega
                - (-lambda * t).exp() * (lambda * (omega * t).sin() + omega * (omega * t).cos());
            vec![(lambda * t).exp() * (y0 + forced / (omega * omega + lambda * lambda))]
        })),
    }
}

const ARCTAN_LAMBDA: f64 = -50.0;

/// `y′ = λy − λ arctan(20t)`, `λ = −50`, `y(0) = 1` on `[0, 2π]`.
pub fn stiff_arctan() -> OdeProblem {
    let l = ARCTAN_LAMBDA;
    OdeProblem {
        name: "stiff_arctan".into(),
        rhs: Arc::new(move |t, y| vec![l * y[0] - l * (20.0 * t).atan()]),
        t0: 0.0,
        y0: vec![1.0],
        t_end: 2.0 * PI,
        exact: Some(Arc::new(|t| vec![stiff_arctan_exact(t)])),
    }
}

/// `e^{λt} y₀ + ∫ e^{λ(t−s)} (−λ) arctan(20s) ds`, dropping the part of the
/// integral where the kernel is below `e^{−75}`.
fn stiff_arctan_exact(t: f64) -> f64 {
    let l = ARCTAN_LAMBDA;
    let a = (t - 75.0 / -l).max(0.0);
    let f = |s: f64| (l * (t - s)).exp() * (-l) * (20.0 * s).atan();
    (l * t).exp() + adaptive_simpson(&f, a, t, 1e-15)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    // Split into panels so the steep parts are resolved from the start.
    let panels = 64;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let (x0, x1) = (a + k as f64 * h, a + (k + 1) as f64 * h);
            let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
            let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
            rec(f, x0, x1, f0, fm, f1, whole, tol / panels as f64, 40)
        })
        .sum()
}

/// `y′ = y² − y³`, `y(0) = δ` on `[0, 2/δ]`.
pub fn lambert(delta: f64) -> OdeProblem {
    assert!(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    let d = 1.0 / delta - 1.0;
    OdeProblem {
        name: "lambert".into(),
        rhs: Arc::new(|_t, y| y.iter().map(|v| v * v - v * v * v).collect()),
        t0: 0.0,
        y0: vec![delta],
        t_end: 2.0 / delta,
        exact: Some(Arc::new(move |t| {
            let w = lambert_w(d * (d - t).exp()).expect("argument is positive");
            vec![1.0 / (w + 1.0)]
        })),
    }
}

/// Principal branch of the Lambert W function on `[−1/e, ∞)`.
pub fn lambert_w(x: f64) -> Result<f64> {
    let branch = -(-1.0f64).exp();
    if !(x >= branch + 1e-12) || !x.is_finite() {
        return Err(Error::DomainError(x));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let mut w = if x < -0.3 {
        let q = (2.0 * (std::f64::consts::E * x + 1.0)).sqrt();
        -1.0 + q - q * q / 3.0 + 11.0 / 72.0 * q * q * q
    } else {
        x.ln_1p()
    };
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - x;
        let step = f / (ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0));
        if !step.is_finite() {
            break;
        }
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BootstrapPolicy {
    Exact,
    Cascade,
}

/// Window of `p` points at `t0 + jτ`.
///
/// The cascade grows the history with composed steps of increasing base
/// order on a graded mesh `h₀, h₀, 2h₀, …, τ/2` with `h₀ = τ/2^K`, then
/// steps of `τ`. `K` is chosen so the first composed Euler step has local
/// error `O(τ^{p+1})`.
pub fn bootstrap(
    problem: &OdeProblem,
    p: usize,
    tau: f64,
    policy: BootstrapPolicy,
    cfg: &ImplicitSolveConfig,
) -> Result<HistoryWindow> {
    let times: Vec<f64> = (0..p).map(|j| problem.t0 + j as f64 * tau).collect();
    match policy {
        BootstrapPolicy::Exact => {
            let exact = problem.exact.as_ref().ok_or(Error::MissingExactSolution)?;
            let states: Vec<Vec<f64>> = times.iter().map(|&t| exact(t)).collect();
            HistoryWindow::from_real(&times, &states)
        }
        BootstrapPolicy::Cascade => cascade(problem, p, tau, cfg),
    }
}

fn cascade(
    problem: &OdeProblem,
    p: usize,
    tau: f64,
    cfg: &ImplicitSolveConfig,
) -> Result<HistoryWindow> {
    let start = HistoryWindow::from_real(&[problem.t0], std::slice::from_ref(&problem.y0))?;
    if p == 1 {
        return Ok(start);
    }
    let k = if p > 2 {
        (((p - 2) as f64 / 3.0) * (1.0 / tau).log2())
            .ceil()
            .max(0.0) as u32
    } else {
        0
    };
    let h0 = tau / f64::from(1u32 << k.min(30));
    let mut steps = vec![h0];
    for i in 0..k {
        steps.push(h0 * f64::from(1u32 << i));
    }
    steps.extend(std::iter::repeat_n(tau, p - 2));

    let mut window = start;
    let mut grid = vec![problem.y0.clone()];
    let mut t = problem.t0;
    let mut alpha = None;
    let mut next_grid = 1;
    for h in steps {
        let base = window.len();
        let (next, out) = composed_step(problem.rhs.as_ref(), &window, h, cfg, alpha)?;
        alpha = Some(out.alpha1);
        t += h;
        window = if base < p {
            window.extended(next.last_time(), next.last_state().to_vec())?
        } else {
            next
        };
        // Snap to the uniform grid once the graded part has landed there.
        let target = problem.t0 + next_grid as f64 * tau;
        if (t - target).abs() <= 1e-12 * (1.0 + target.abs()) {
            grid.push(out.y_real);
            next_grid += 1;
        }
    }
    let times: Vec<f64> = (0..p).map(|j| problem.t0 + j as f64 * tau).collect();
    HistoryWindow::from_real(&times, &grid[..p])
}

/// JSON problem record: `{"name": ..., "rhs": builtin-id}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemRecord {
    pub name: String,
    pub rhs: String,
}

impl ProblemRecord {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidRecord(e.to_string()))
    }

    pub fn into_problem(self) -> Result<OdeProblem> {
        let mut p = builtin(&self.rhs)?;
        p.name = self.name;
        Ok(p)
    }
}
