//! Step-size traces of the adaptive driver.

use cbdf::adaptivity::{adaptive_drive, drive_with, step_ratios, StepController, Trajectory};
use cbdf::bdf::ImplicitSolveConfig;
use cbdf::problems::{cubic_decay, lambert};

fn lambert_trace(p: usize, tol: f64) -> Trajectory {
    let prob = lambert(0.01);
    let ctl = StepController::new(p, tol, prob.t_end - prob.t0);
    adaptive_drive(
        &prob,
        p,
        0.01,
        &ctl,
        prob.t_end,
        &ImplicitSolveConfig::default(),
    )
    .unwrap()
}

/// `Σ |ln τ_{n+1} − ln τ_n|`.
fn total_variation(tr: &Trajectory) -> f64 {
    step_ratios(tr).iter().map(|r| r.ln().abs()).sum()
}

fn log_ratio_variance(tr: &Trajectory) -> f64 {
    let d: Vec<f64> = step_ratios(tr).iter().map(|r| r.ln()).collect();
    let m = d.iter().sum::<f64>() / d.len() as f64;
    d.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / d.len() as f64
}

#[test]
fn step_variation_grows_as_tolerance_shrinks() {
    let tv: Vec<f64> = [1e-7, 1e-9, 1e-12]
        .iter()
        .map(|&tol| total_variation(&lambert_trace(2, tol)))
        .collect();
    assert!(tv.windows(2).all(|w| w[1] > w[0]), "{tv:?}");
}

#[test]
fn step_variation_falls_with_order() {
    let traces: Vec<Trajectory> = (2..=4).map(|p| lambert_trace(p, 1e-10)).collect();
    let tv: Vec<f64> = traces.iter().map(total_variation).collect();
    let var: Vec<f64> = traces.iter().map(log_ratio_variance).collect();
    assert!(tv.windows(2).all(|w| w[1] < w[0]), "{tv:?}");
    assert!(var.windows(2).all(|w| w[1] < w[0]), "{var:?}");
}

#[test]
fn clamped_runs_keep_positive_alpha() {
    for p in 2..=4 {
        let tr = lambert_trace(p, 1e-10);
        assert!(tr.steps.iter().all(|s| s.alpha1.re > 0.0), "p={p}");
        assert!(tr.times.last().unwrap() >= &200.0);
    }
}

#[test]
fn constant_error_keeps_constant_step() {
    let prob = cubic_decay();
    let tol = 1e-8;
    let ctl = StepController::new(3, tol, 1.0);
    let tr = drive_with(
        &prob,
        3,
        0.01,
        &ctl,
        prob.t_end,
        &ImplicitSolveConfig::default(),
        |_| tol,
    )
    .unwrap();
    assert!(tr.steps.len() > 90);
    assert!(tr.steps.iter().all(|s| s.tau == 0.01));
}
