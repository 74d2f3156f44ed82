//! BDF weights on fixed and variable (possibly complex) nodes, and the
//! implicit BDF step.
//!
//! Weights follow the convention
//! `g₀ y_n + Σ_{i≥1} gᵢ y_{n−i} = τ f(t_n, y_n)`, with `g` indexed newest
//! first. Windows store nodes oldest first.

use crate::polyroot::solve_dense;
use crate::{Error, Result, C64};

pub const MAX_ORDER: usize = 8;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn norm_inf(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// The last `p` nodes and states a BDF step maps forward.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryWindow {
    times: Vec<C64>,
    states: Vec<Vec<C64>>,
}

impl HistoryWindow {
    pub fn new(times: Vec<C64>, states: Vec<Vec<C64>>) -> Result<Self> {
        if times.is_empty() || times.len() > MAX_ORDER {
            return Err(Error::InvalidWindow("length must be in 1..=8"));
        }
        if times.len() != states.len() {
            return Err(Error::InvalidWindow("times and states differ in length"));
        }
        let d = states[0].len();
        if d == 0 || states.iter().any(|s| s.len() != d) {
            return Err(Error::InvalidWindow(
                "states must share a nonzero dimension",
            ));
        }
        if times.windows(2).any(|w| w[1].re <= w[0].re) {
            return Err(Error::InvalidWindow("times must increase in real part"));
        }
        Ok(HistoryWindow { times, states })
    }

    pub fn from_real(times: &[f64], states: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            times.iter().map(|&t| C64::new(t, 0.0)).collect(),
            states
                .iter()
                .map(|s| s.iter().map(|&x| C64::new(x, 0.0)).collect())
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn times(&self) -> &[C64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<C64>] {
        &self.states
    }

    pub fn last_time(&self) -> C64 {
        *self.times.last().unwrap()
    }

    pub fn last_state(&self) -> &[C64] {
        self.states.last().unwrap()
    }

    /// Drops the oldest entry and appends `(t, y)`.
    pub fn shifted(&self, t: C64, y: Vec<C64>) -> Result<Self> {
        let mut times = self.times[1..].to_vec();
        let mut states = self.states[1..].to_vec();
        times.push(t);
        states.push(y);
        Self::new(times, states)
    }

    /// Appends `(t, y)` without dropping anything, up to `MAX_ORDER` entries.
    pub fn extended(&self, t: C64, y: Vec<C64>) -> Result<Self> {
        let mut times = self.times.clone();
        let mut states = self.states.clone();
        times.push(t);
        states.push(y);
        Self::new(times, states)
    }

    /// Keeps only the newest `p` entries.
    pub fn truncated(&self, p: usize) -> Result<Self> {
        let k = self.len().saturating_sub(p);
        Self::new(self.times[k..].to_vec(), self.states[k..].to_vec())
    }
}

/// BDF weights `g₀..g_p` for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub weights: Vec<C64>,
    pub step: C64,
    /// History nodes oldest first, followed by the new node.
    pub nodes: Vec<C64>,
}

impl CoefficientSet {
    pub fn order(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn g0(&self) -> C64 {
        self.weights[0]
    }

    /// Normalized distances `εⱼ = (t_new − t_{n−j})/τ`, newest first.
    pub fn eps(&self) -> Vec<C64> {
        let t_new = *self.nodes.last().unwrap();
        let p = self.order();
        (1..=p)
            .map(|j| (t_new - self.nodes[p - j]) / self.step)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    FixedPointWithNewtonFallback,
    NewtonOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImplicitSolveConfig {
    pub tol: f64,
    pub max_iterations: usize,
    pub mode: SolveMode,
}

impl Default for ImplicitSolveConfig {
    fn default() -> Self {
        ImplicitSolveConfig {
            tol: 1e-13,
            max_iterations: 200,
            mode: SolveMode::FixedPointWithNewtonFallback,
        }
    }
}

impl ImplicitSolveConfig {
    pub fn with_tol(tol: f64) -> Self {
        ImplicitSolveConfig {
            tol,
            ..Self::default()
        }
    }
}

/// Weights on the uniform grid `ε_j = j`.
pub fn coeff_fixed(p: usize) -> Result<CoefficientSet> {
    if !(1..=MAX_ORDER).contains(&p) {
        return Err(Error::OrderOutOfRange(p));
    }
    let eps: Vec<C64> = (1..=p).map(|j| C64::new(j as f64, 0.0)).collect();
    let weights = g_closed_form(&eps)?;
    let mut nodes: Vec<C64> = (0..p).map(|k| C64::new(k as f64 - p as f64, 0.0)).collect();
    nodes.push(zero());
    Ok(CoefficientSet {
        weights,
        step: C64::new(1.0, 0.0),
        nodes,
    })
}

fn distinct(a: C64, b: C64) -> bool {
    (a - b).norm() > 1e-14 * a.norm().max(b.norm())
}

/// Weights for history `times` (oldest first) and new node `t_new`, by the
/// divided-difference expansion
/// `gⱼ = Σ_{m=max(1,j)}^{p} b_m c_{j,m}` with
/// `b_m = τ ∏_{ℓ=1}^{m−1}(T₀ − T_ℓ)` and
/// `c_{j,m} = ∏_{ℓ=0, ℓ≠j}^{m} 1/(T_j − T_ℓ)` on newest-first nodes `T`.
pub fn coeff_variable(times: &[C64], t_new: C64) -> Result<CoefficientSet> {
    let p = times.len();
    if !(1..=MAX_ORDER).contains(&p) {
        return Err(Error::OrderOutOfRange(p));
    }
    let t: Vec<C64> = std::iter::once(t_new)
        .chain(times.iter().rev().copied())
        .collect();
    for i in 0..=p {
        for j in i + 1..=p {
            if !distinct(t[i], t[j]) {
                return Err(Error::DuplicateNode(j));
            }
        }
    }
    let tau = t[0] - t[1];
    let mut weights = vec![zero(); p + 1];
    for j in 0..=p {
        let m0 = j.max(1);
        let mut b = tau;
        for l in 1..m0 {
            b *= t[0] - t[l];
        }
        let mut c = C64::new(1.0, 0.0);
        for l in (0..=m0).filter(|&l| l != j) {
            c /= t[j] - t[l];
        }
        let mut g = b * c;
        for m in m0 + 1..=p {
            b *= t[0] - t[m - 1];
            c /= t[j] - t[m];
            g += b * c;
        }
        weights[j] = g;
    }
    let mut nodes = times.to_vec();
    nodes.push(t_new);
    Ok(CoefficientSet {
        weights,
        step: tau,
        nodes,
    })
}

/// Closed-form weights from normalized distances:
/// `g₀ = Σ 1/εⱼ`, `gᵢ = (−1)^p ε_i⁻¹ ∏_{j≠i} εⱼ/(εᵢ − εⱼ)`.
pub fn g_closed_form(eps: &[C64]) -> Result<Vec<C64>> {
    let p = eps.len();
    let scale = eps.iter().map(|e| e.norm()).fold(0.0, f64::max);
    for (i, &e) in eps.iter().enumerate() {
        if e.norm() <= 1e-14 * scale || e.norm() == 0.0 {
            return Err(Error::DuplicateEps(i));
        }
        if eps[..i].iter().any(|&f| !distinct(e, f)) {
            return Err(Error::DuplicateEps(i));
        }
    }
    let sign = if p.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut g = Vec::with_capacity(p + 1);
    g.push(eps.iter().map(|e| e.inv()).sum());
    for i in 0..p {
        let prod: C64 = (0..p)
            .filter(|&j| j != i)
            .map(|j| eps[j] / (eps[i] - eps[j]))
            .product();
        g.push(sign * prod / eps[i]);
    }
    Ok(g)
}

/// Checks the moment conditions `Σ gⱼ = 0`, `Σ gⱼ εⱼ = −1` and
/// `Σ gⱼ εⱼ^m = 0` for `m = 2..p`, with `ε₀ = 0`.
pub fn check_order_conditions(coeffs: &CoefficientSet, p: usize) -> bool {
    if coeffs.order() < p.min(1) || coeffs.weights.len() < 2 {
        return false;
    }
    let eps = coeffs.eps();
    let g = &coeffs.weights;
    for m in 0..=p {
        let mut sum = if m == 0 { g[0] } else { zero() };
        let mut size = if m == 0 { g[0].norm() } else { 0.0 };
        for (j, e) in eps.iter().enumerate() {
            let term = g[j + 1] * e.powu(m as u32);
            sum += term;
            size += term.norm();
        }
        let target = if m == 1 { -1.0 } else { 0.0 };
        if (sum - target).norm() > 1e-9 * (1.0 + size) {
            return false;
        }
    }
    true
}

/// One implicit BDF step of order `window.len()` with step `tau`.
///
/// Returns the shifted window and the new state.
pub fn bdf_step<F>(
    rhs: &F,
    window: &HistoryWindow,
    tau: C64,
    cfg: &ImplicitSolveConfig,
) -> Result<(HistoryWindow, Vec<C64>)>
where
    F: Fn(C64, &[C64]) -> Vec<C64> + ?Sized,
{
    let y = bdf_solve(rhs, window, tau, cfg)?;
    let t_n = window.last_time() + tau;
    Ok((window.shifted(t_n, y.clone())?, y))
}

/// Solves the BDF equation for `y_n` without building the shifted window.
pub fn bdf_solve<F>(
    rhs: &F,
    window: &HistoryWindow,
    tau: C64,
    cfg: &ImplicitSolveConfig,
) -> Result<Vec<C64>>
where
    F: Fn(C64, &[C64]) -> Vec<C64> + ?Sized,
{
    if !(tau.re > 0.0) {
        return Err(Error::InvalidStep);
    }
    let t_n = window.last_time() + tau;
    let coeffs = coeff_variable(window.times(), t_n)?;
    let history: Vec<&[C64]> = window.states().iter().rev().map(|s| s.as_slice()).collect();
    weighted_solve(
        rhs,
        &coeffs.weights,
        &history,
        t_n,
        tau,
        window.last_state(),
        cfg,
    )
}

/// Solves `w₀ y + Σ_{i≥1} wᵢ hᵢ − τ f(t, y) = 0` for newest-first history `h`.
pub fn weighted_solve<F>(
    rhs: &F,
    weights: &[C64],
    history: &[&[C64]],
    t: C64,
    tau: C64,
    y_start: &[C64],
    cfg: &ImplicitSolveConfig,
) -> Result<Vec<C64>>
where
    F: Fn(C64, &[C64]) -> Vec<C64> + ?Sized,
{
    if weights.len() != history.len() + 1 {
        return Err(Error::InvalidWindow("weights and history differ in length"));
    }
    let d = y_start.len();
    let mut s = vec![zero(); d];
    for (w, y) in weights[1..].iter().zip(history) {
        for k in 0..d {
            s[k] += w * y[k];
        }
    }
    solve_implicit(rhs, t, weights[0], tau, &s, y_start, cfg)
}

/// Solves `g₀ y + s − τ f(t, y) = 0` starting from `y_start`.
pub fn solve_implicit<F>(
    rhs: &F,
    t: C64,
    g0: C64,
    tau: C64,
    s: &[C64],
    y_start: &[C64],
    cfg: &ImplicitSolveConfig,
) -> Result<Vec<C64>>
where
    F: Fn(C64, &[C64]) -> Vec<C64> + ?Sized,
{
    let d = s.len();
    let threshold = |y: &[C64]| cfg.tol.max(16.0 * f64::EPSILON * norm_inf(y));
    let mut used = 0;
    let mut last_delta = f64::INFINITY;

    if cfg.mode == SolveMode::FixedPointWithNewtonFallback {
        let budget = (cfg.max_iterations / 2).max(1);
        let mut y = y_start.to_vec();
        while used < budget {
            used += 1;
            let f = rhs(t, &y);
            let next: Vec<C64> = (0..d).map(|k| (tau * f[k] - s[k]) / g0).collect();
            if next.iter().any(|c| !c.is_finite()) {
                break;
            }
            last_delta = next
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            y = next;
            if last_delta <= threshold(&y) {
                return Ok(y);
            }
        }
    }

    let residual = |y: &[C64]| -> Vec<C64> {
        let f = rhs(t, y);
        (0..d).map(|k| g0 * y[k] + s[k] - tau * f[k]).collect()
    };
    let mut y = y_start.to_vec();
    let mut r = residual(&y);
    let newton_budget = cfg.max_iterations.saturating_sub(used).max(1);
    for _ in 0..newton_budget {
        let f0 = rhs(t, &y);
        let mut jac = vec![zero(); d * d];
        for col in 0..d {
            let h = 1e-7 * (1.0 + y[col].norm());
            let mut yp = y.clone();
            yp[col] += h;
            let fp = rhs(t, &yp);
            for row in 0..d {
                let df = (fp[row] - f0[row]) / h;
                jac[row * d + col] = -tau * df + if row == col { g0 } else { zero() };
            }
        }
        let neg_r: Vec<C64> = r.iter().map(|c| -c).collect();
        let dy = solve_dense(&jac, &neg_r).map_err(|_| Error::SingularJacobian)?;
        let r_norm = norm_inf(&r);
        let mut lambda = 1.0;
        let (y_next, r_next) = loop {
            let cand: Vec<C64> = (0..d).map(|k| y[k] + lambda * dy[k]).collect();
            let rc = residual(&cand);
            let rn = norm_inf(&rc);
            if (rn.is_finite() && rn <= (1.0 - 1e-4 * lambda) * r_norm) || lambda < 1e-3 {
                break (cand, rc);
            }
            lambda *= 0.5;
        };
        last_delta = lambda * norm_inf(&dy);
        y = y_next;
        r = r_next;
        if !last_delta.is_finite() {
            break;
        }
        if last_delta <= threshold(&y) {
            return Ok(y);
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iterations,
        residual: last_delta,
    })
}
