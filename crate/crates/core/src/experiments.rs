//! Fixed-step runs, global error, convergence sweeps and error/CPU ratios.
//!
//! Orders here are orders of accuracy: BDF of order `q` uses `q` points,
//! the composed flow of order `q` uses `q − 1`.

use std::io::{self, Write};
use std::time::Instant;

use crate::bdf::{bdf_solve, ImplicitSolveConfig};
use crate::composition::{
    composed_step_with, ratios_from_window, solve_alpha1_near, CompositionSetup,
};
use crate::output::csv_row;
use crate::par::{self, Exec};
use crate::problems::{bootstrap, BootstrapPolicy, OdeProblem};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Bdf,
    Composed,
}

impl Scheme {
    /// Number of history points for a scheme of order `q`.
    pub fn base_order(self, q: usize) -> Result<usize> {
        match self {
            Scheme::Bdf if (1..=8).contains(&q) => Ok(q),
            Scheme::Composed if (2..=9).contains(&q) => Ok(q - 1),
            _ => Err(Error::OrderOutOfRange(q)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Bdf => "bdf",
            Scheme::Composed => "composed",
        }
    }
}

/// A fixed-step trajectory. The first `window_len` points are the bootstrap.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedRun {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub window_len: usize,
    /// `‖Im ŷ‖∞` per computed step (composed only).
    pub imag: Vec<f64>,
    /// `|C_p| ‖Im ŷ‖∞` per computed step (composed only).
    pub estimates: Vec<f64>,
}

/// Number of fixed steps covering `[t0, t_end]`.
pub fn step_count(problem: &OdeProblem, tau: f64) -> usize {
    ((problem.t_end - problem.t0) / tau).round() as usize
}

pub fn fixed_step_run(
    problem: &OdeProblem,
    scheme: Scheme,
    order: usize,
    tau: f64,
    policy: BootstrapPolicy,
    cfg: &ImplicitSolveConfig,
) -> Result<FixedRun> {
    let w = scheme.base_order(order)?;
    let n_total = step_count(problem, tau);
    let mut window = bootstrap(problem, w, tau, policy, cfg)?;
    let mut run = FixedRun {
        times: window.times().iter().map(|t| t.re).collect(),
        states: window
            .states()
            .iter()
            .map(|s| s.iter().map(|v| v.re).collect())
            .collect(),
        window_len: w,
        imag: Vec::new(),
        estimates: Vec::new(),
    };
    let rhs = problem.rhs.as_ref();
    let mut cached: Option<CompositionSetup> = None;
    for n in w..=n_total {
        let t_n = problem.t0 + n as f64 * tau;
        let y = match scheme {
            Scheme::Bdf => {
                let y = bdf_solve(rhs, &window, C64::new(tau, 0.0), cfg)?;
                let y: Vec<C64> = y.iter().map(|v| C64::new(v.re, 0.0)).collect();
                window = window.shifted(C64::new(t_n, 0.0), y.clone())?;
                y.iter().map(|v| v.re).collect()
            }
            Scheme::Composed => {
                let ratios = ratios_from_window(&window, tau);
                let setup = match cached.take() {
                    Some(s) if same_ratios(&s.ratios, &ratios) => s,
                    prev => {
                        let a = solve_alpha1_near(&ratios, prev.map(|s| s.alpha1))?;
                        CompositionSetup::new(&ratios, a)?
                    }
                };
                let (_, out) = composed_step_with(rhs, &window, tau, cfg, &setup)?;
                cached = Some(setup);
                // Pin the node to the grid so ratios stay exactly uniform.
                let y: Vec<C64> = out.y_real.iter().map(|&v| C64::new(v, 0.0)).collect();
                window = window.shifted(C64::new(t_n, 0.0), y)?;
                run.imag.push(
                    out.error_estimate_raw
                        .iter()
                        .map(|x| x.abs())
                        .fold(0.0, f64::max),
                );
                run.estimates.push(out.error_estimate);
                out.y_real
            }
        };
        run.times.push(t_n);
        run.states.push(y);
    }
    Ok(run)
}

fn same_ratios(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()))
}

/// Pointwise errors `‖y_n − y(t_n)‖∞` for every stored node.
pub fn pointwise_errors(problem: &OdeProblem, run: &FixedRun) -> Result<Vec<f64>> {
    run.times
        .iter()
        .zip(&run.states)
        .map(|(&t, y)| {
            let ex = problem.exact_at(t)?;
            Ok(ex
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max))
        })
        .collect()
}

/// Trapezoidal global error `E_N = (1/N)(Σ_{n=w}^{N−1} e(t_n) + e(t_N)/2)`,
/// with `w` the first computed index.
pub fn global_error(problem: &OdeProblem, run: &FixedRun) -> Result<f64> {
    let e = pointwise_errors(problem, run)?;
    let n = e.len() - 1;
    let inner: f64 = e[run.window_len..n].iter().sum();
    Ok((inner + 0.5 * e[n]) / n as f64)
}

/// Least-squares slope of `log E` against `log τ`.
pub fn fit_slope(taus: &[f64], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub scheme: Scheme,
    pub order: usize,
    pub tau: f64,
    pub steps: usize,
    pub global_error: f64,
}

/// Global errors for every `(order, τ)` cell, sorted by order then
/// decreasing `τ`.
pub fn run_convergence(
    problem: &OdeProblem,
    scheme: Scheme,
    orders: &[usize],
    taus: &[f64],
    cfg: &ImplicitSolveConfig,
    exec: Exec,
) -> Result<Vec<ConvergenceRow>> {
    let cells: Vec<(usize, f64)> = orders
        .iter()
        .flat_map(|&q| taus.iter().map(move |&t| (q, t)))
        .collect();
    let rows = par::map(exec, &cells, |&(q, tau)| {
        let run = fixed_step_run(problem, scheme, q, tau, BootstrapPolicy::Exact, cfg)?;
        Ok(ConvergenceRow {
            scheme,
            order: q,
            tau,
            steps: step_count(problem, tau),
            global_error: global_error(problem, &run)?,
        })
    });
    let mut rows: Vec<ConvergenceRow> = rows.into_iter().collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.order.cmp(&b.order).then(b.tau.total_cmp(&a.tau)));
    Ok(rows)
}

/// Slope per order, in order of first appearance.
pub fn slopes(rows: &[ConvergenceRow]) -> Vec<(usize, f64)> {
    let mut orders: Vec<usize> = rows.iter().map(|r| r.order).collect();
    orders.dedup();
    orders
        .into_iter()
        .map(|q| {
            let (t, e): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.order == q)
                .map(|r| (r.tau, r.global_error))
                .unzip();
            (q, fit_slope(&t, &e))
        })
        .collect()
}

pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], mut w: W) -> io::Result<()> {
    writeln!(w, "scheme,order,tau,steps,global_error")?;
    for r in rows {
        writeln!(
            w,
            "{},{}",
            r.scheme.name(),
            csv_row(&[r.order as f64, r.tau, r.steps as f64, r.global_error])
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub order: usize,
    pub tau: f64,
    pub err_bdf: f64,
    pub err_composed: f64,
    pub r_e: f64,
    pub cpu_bdf: f64,
    pub cpu_composed: f64,
    pub r_cpu: f64,
}

/// Median wall-clock seconds over `reps` runs after one discarded warmup.
pub fn time_median<F: FnMut() -> Result<()>>(reps: usize, mut f: F) -> Result<f64> {
    f()?;
    let mut samples = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        f()?;
        samples.push(start.elapsed().as_secs_f64());
    }
    samples.sort_by(f64::total_cmp);
    Ok(samples[samples.len() / 2])
}

/// `R_E = E^{BDF_q}/E^{composed_q}` and `R_CPU` likewise. Timing runs are
/// sequential on the calling thread.
pub fn run_bench(
    problem: &OdeProblem,
    orders: &[usize],
    taus: &[f64],
    cfg: &ImplicitSolveConfig,
) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &q in orders {
        for &tau in taus {
            let mut runs = [None, None];
            let mut cpu = [0.0; 2];
            for (k, scheme) in [Scheme::Bdf, Scheme::Composed].into_iter().enumerate() {
                cpu[k] = time_median(3, || {
                    runs[k] = Some(fixed_step_run(
                        problem,
                        scheme,
                        q,
                        tau,
                        BootstrapPolicy::Exact,
                        cfg,
                    )?);
                    Ok(())
                })?;
            }
            let e_b = global_error(problem, runs[0].as_ref().unwrap())?;
            let e_c = global_error(problem, runs[1].as_ref().unwrap())?;
            rows.push(BenchRow {
                order: q,
                tau,
                err_bdf: e_b,
                err_composed: e_c,
                r_e: e_b / e_c,
                cpu_bdf: cpu[0],
                cpu_composed: cpu[1],
                r_cpu: cpu[0] / cpu[1],
            });
        }
    }
    Ok(rows)
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], mut w: W) -> io::Result<()> {
    writeln!(
        w,
        "order,tau,err_bdf,err_composed,r_e,cpu_bdf,cpu_composed,r_cpu"
    )?;
    for r in rows {
        writeln!(
            w,
            "{}",
            csv_row(&[
                r.order as f64,
                r.tau,
                r.err_bdf,
                r.err_composed,
                r.r_e,
                r.cpu_bdf,
                r.cpu_composed,
                r.r_cpu
            ])
        )?;
    }
    Ok(())
}

/// Per-step ratio `‖exact error‖ / ‖Im ŷ‖` of a composed fixed-step run.
pub fn estimator_ratios(problem: &OdeProblem, run: &FixedRun) -> Result<Vec<f64>> {
    let e = pointwise_errors(problem, run)?;
    Ok(e[run.window_len..]
        .iter()
        .zip(&run.imag)
        .map(|(err, im)| err / im)
        .collect())
}
