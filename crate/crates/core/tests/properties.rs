//! Randomized identity suites. Every suite draws at least 100 cases per
//! order from a deterministic generator.

use cbdf::adaptivity::{next_step, StepController};
use cbdf::bdf::{check_order_conditions, coeff_fixed, coeff_variable, g_closed_form};
use cbdf::composition::{
    alpha1_candidates, alpha1_polynomial, g_coefficients, g_coefficients_dense, solve_alpha1,
    CompositionSetup,
};
use cbdf::par::Exec;
use cbdf::polyroot::{find_roots, solve_dense, ComplexPolynomial};
use cbdf::stability::{sector_ok, StabilityModel};
use cbdf::C64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

const CASES: u32 = 100;

fn runner() -> TestRunner {
    let cfg = Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(cfg, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run_per_order<S, F>(
    orders: std::ops::RangeInclusive<usize>,
    strategy: impl Fn(usize) -> S,
    test: F,
) where
    S: Strategy,
    S::Value: std::fmt::Debug,
    F: Fn(usize, S::Value) -> Result<(), TestCaseError>,
{
    for p in orders {
        runner()
            .run(&strategy(p), |v| test(p, v))
            .unwrap_or_else(|e| panic!("p = {p}: {e}"));
    }
}

fn complex(re: std::ops::Range<f64>, im: std::ops::Range<f64>) -> impl Strategy<Value = C64> {
    (re, im).prop_map(|(a, b)| C64::new(a, b))
}

/// `p` complex distances with pairwise separation at least 0.2.
fn separated_eps(p: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec(complex(0.3..4.0, -2.0..2.0), p).prop_filter("separated", |e| {
        e.iter()
            .enumerate()
            .all(|(i, a)| e[..i].iter().all(|b| (a - b).norm() > 0.2))
    })
}

/// `r₁ = 0` followed by increasing ratios with gaps in `gap`.
fn ratios(p: usize, gap: std::ops::Range<f64>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(gap, p - 1).prop_map(|gaps| {
        let mut r = vec![0.0];
        for g in gaps {
            r.push(r.last().unwrap() + g);
        }
        r
    })
}

fn close(a: C64, b: C64, scale: f64, tol: f64) -> bool {
    (a - b).norm() <= tol * scale.max(1.0)
}

/// The moment system: `Σ gⱼ = 0`, `Σ gⱼ εⱼ = −1`, `Σ gⱼ εⱼ^m = 0`, `ε₀ = 0`.
fn vandermonde_weights(eps: &[C64]) -> Vec<C64> {
    let p = eps.len();
    let n = p + 1;
    let mut a = vec![C64::new(0.0, 0.0); n * n];
    let mut b = vec![C64::new(0.0, 0.0); n];
    a[0] = C64::new(1.0, 0.0);
    for m in 0..n {
        for j in 1..n {
            a[m * n + j] = eps[j - 1].powu(m as u32);
        }
    }
    b[1] = C64::new(-1.0, 0.0);
    solve_dense(&a, &b).unwrap()
}

#[test]
fn weighted_power_sum_identity() {
    run_per_order(1..=6, separated_eps, |p, eps| {
        let g = g_closed_form(&eps).unwrap();
        let lhs: C64 = (0..p).map(|j| eps[j].powu(p as u32 + 1) * g[j + 1]).sum();
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        let rhs: C64 = sign * eps.iter().product::<C64>();
        let scale: f64 = (0..p)
            .map(|j| (eps[j].powu(p as u32 + 1) * g[j + 1]).norm())
            .sum();
        prop_assert!(close(lhs, rhs, scale, 1e-10), "{lhs} vs {rhs}");
        Ok(())
    });
}

#[test]
fn closed_form_weights_match_vandermonde() {
    run_per_order(1..=6, separated_eps, |_, eps| {
        let g = g_closed_form(&eps).unwrap();
        let d = vandermonde_weights(&eps);
        for (x, y) in g.iter().zip(&d) {
            prop_assert!(close(*x, *y, y.norm(), 1e-10), "{x} vs {y}");
        }
        Ok(())
    });
}

fn identity_inputs(p: usize) -> impl Strategy<Value = (Vec<f64>, C64)> {
    (ratios(p, 0.4..2.0), complex(0.1..1.5, 0.2..1.5))
}

#[test]
fn shifted_moment_identities() {
    run_per_order(1..=6, identity_inputs, |p, (r, a1)| {
        let eps: Vec<C64> = r.iter().map(|&x| 1.0 + x / a1).collect();
        let g = g_closed_form(&eps).unwrap();
        let eb: Vec<C64> = std::iter::once(1.0 - a1)
            .chain(r.iter().map(|&x| C64::new(1.0 + x, 0.0)))
            .collect();
        let sum = |j: u32| -> (C64, f64) {
            let terms: Vec<C64> = (1..=p).map(|i| eb[i].powu(j) * g[i]).collect();
            (
                -terms.iter().sum::<C64>(),
                terms.iter().map(|t| t.norm()).sum(),
            )
        };
        for j in 1..=p as u32 {
            let (lhs, scale) = sum(j);
            let rhs = eb[0].powu(j - 1) * (j as f64 * a1 + eb[0] * g[0]);
            prop_assert!(close(lhs, rhs, scale, 1e-10), "j={j}: {lhs} vs {rhs}");
        }
        let j = p as u32 + 1;
        let (lhs, scale) = sum(j);
        let sign = if (p + 1) % 2 == 0 { 1.0 } else { -1.0 };
        let rhs = eb[0].powu(j - 1) * (j as f64 * a1 + eb[0] * g[0])
            + sign * a1.powu(j) * eps.iter().product::<C64>();
        prop_assert!(close(lhs, rhs, scale, 1e-10), "j=p+1: {lhs} vs {rhs}");
        Ok(())
    });
}

#[test]
fn second_stage_closed_form_matches_dense_and_sums_to_zero() {
    run_per_order(1..=6, identity_inputs, |_, (r, a1)| {
        let (Ok(gc), Ok(gd)) = (g_coefficients(a1, &r), g_coefficients_dense(a1, &r)) else {
            return Err(TestCaseError::reject("degenerate denominator"));
        };
        let scale: f64 = gd.iter().map(|g| g.norm()).sum();
        for (x, y) in gc.iter().zip(&gd) {
            prop_assert!(close(*x, *y, scale, 1e-9), "{x} vs {y}");
        }
        prop_assert!(gc.iter().sum::<C64>().norm() <= 1e-10 * scale.max(1.0));
        Ok(())
    });
}

/// Ratios of a history whose consecutive step ratios stay in `[0.95, 1.05]`,
/// well inside the admissible bounds.
fn admissible_ratios(p: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.95..1.05f64, p - 1).prop_map(|q| {
        let mut r = vec![0.0];
        let mut h = 1.0;
        for x in q {
            h *= x;
            r.push(r.last().unwrap() + h);
        }
        r
    })
}

#[test]
fn last_weight_vanishes_at_root() {
    run_per_order(1..=6, admissible_ratios, |_, r| {
        let a = solve_alpha1(&r).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(a.re > 0.0 && a.im > 0.0);
        let s = CompositionSetup::new(&r, a).unwrap();
        prop_assert!(s.big_g[s.p + 1].norm() <= 1e-9);
        let scale: f64 = s.big_g.iter().map(|g| g.norm()).sum();
        prop_assert!(s.big_g.iter().sum::<C64>().norm() <= 1e-10 * scale.max(1.0));
        prop_assert!(s.root_condition().norm() <= 1e-9);
        prop_assert_eq!(s.alpha1 + s.alpha2, C64::new(1.0, 0.0));
        Ok(())
    });
}

#[test]
fn stage_equivalence_on_variable_grids() {
    run_per_order(
        1..=6,
        |p| (admissible_ratios(p), 0.01..1.0f64),
        |p, (r, tau)| {
            let a = solve_alpha1(&r).unwrap();
            let s = CompositionSetup::new(&r, a).unwrap();
            // t_{n−1} = 0 and t_{n−j} = −rⱼτ, oldest first.
            let mut nodes: Vec<C64> = r.iter().rev().map(|&x| C64::new(-x * tau, 0.0)).collect();
            nodes.remove(0);
            nodes.push(a * tau);
            let cs = coeff_variable(&nodes, C64::new(tau, 0.0)).unwrap();
            let scale: f64 = s.big_g.iter().map(|g| g.norm()).sum();
            for i in 0..=p {
                prop_assert!(
                    close(cs.weights[i], s.big_g[i], scale, 1e-9),
                    "i={i}: {} vs {}",
                    cs.weights[i],
                    s.big_g[i]
                );
            }
            Ok(())
        },
    );
}

#[test]
fn polynomial_roots_solve_root_condition() {
    run_per_order(
        1..=6,
        |p| ratios(p, 0.3..3.0),
        |p, r| {
            let roots = alpha1_candidates(&r).unwrap();
            prop_assert_eq!(roots.len(), p + 1);
            let poly = alpha1_polynomial(&r);
            for a in roots {
                prop_assert!(poly.eval(a).norm() <= 1e-9 * poly.max_coeff_norm());
                if r.iter().any(|&x| (a + x).norm() < 1e-6) {
                    continue;
                }
                let eps: Vec<C64> = r.iter().map(|&x| 1.0 + x / a).collect();
                let g0: C64 = eps.iter().map(|e| e.inv()).sum();
                let cond = eps[p - 1] * a * a + g0 * (1.0 - a) * (1.0 - a);
                let a2 = (1.0 - a).norm_sqr();
                let scale = (eps[p - 1] * a * a).norm()
                    + eps.iter().map(|e| e.inv().norm()).sum::<f64>() * a2;
                prop_assert!(cond.norm() <= 1e-9 * scale.max(1.0), "{a}: {cond}");
            }
            Ok(())
        },
    );
}

#[test]
fn uniform_grid_equivalence() {
    run_per_order(
        1..=8,
        |_| (-10.0..10.0f64, 0.01..1.0f64),
        |p, (t0, h)| {
            let times: Vec<C64> = (0..p).map(|k| C64::new(t0 + k as f64 * h, 0.0)).collect();
            let cs = coeff_variable(&times, C64::new(t0 + p as f64 * h, 0.0)).unwrap();
            let fixed = coeff_fixed(p).unwrap();
            let scale: f64 = fixed.weights.iter().map(|g| g.norm()).sum();
            for (x, y) in cs.weights.iter().zip(&fixed.weights) {
                prop_assert!(close(*x, *y, scale, 1e-12), "{x} vs {y}");
            }
            Ok(())
        },
    );
}

#[test]
fn variable_weights_are_consistent() {
    run_per_order(
        1..=8,
        |p| (ratios(p, 0.5..2.0), 0.01..1.0f64),
        |p, (r, tau)| {
            let times: Vec<C64> = r.iter().rev().map(|&x| C64::new(-x * tau, 0.0)).collect();
            let cs = coeff_variable(&times, C64::new(tau, 0.0)).unwrap();
            let scale: f64 = cs.weights.iter().map(|g| g.norm()).sum();
            prop_assert!(cs.weights.iter().sum::<C64>().norm() <= 1e-12 * scale.max(1.0));
            prop_assert!(check_order_conditions(&cs, p));
            Ok(())
        },
    );
}

#[test]
fn find_roots_recovers_separated_roots() {
    run_per_order(
        1..=10,
        |n| prop::collection::vec(complex(-3.0..3.0, -3.0..3.0), n),
        |_, roots| {
            let sep = roots
                .iter()
                .enumerate()
                .all(|(i, a)| roots[..i].iter().all(|b| (a - b).norm() > 1e-3));
            if !sep {
                return Err(TestCaseError::reject("close roots"));
            }
            let found = find_roots(&ComplexPolynomial::from_roots(&roots)).unwrap();
            prop_assert_eq!(found.len(), roots.len());
            let mut used = vec![false; found.len()];
            for r in &roots {
                let k = (0..found.len())
                    .filter(|&k| !used[k])
                    .min_by(|&a, &b| (found[a] - r).norm().total_cmp(&(found[b] - r).norm()))
                    .unwrap();
                used[k] = true;
                prop_assert!((found[k] - r).norm() <= 1e-7, "{r} vs {}", found[k]);
            }
            Ok(())
        },
    );
}

#[test]
fn dense_solve_residual() {
    let entries = |n: usize| prop::collection::vec(complex(-1.0..1.0, -1.0..1.0), n * n + n);
    run_per_order(1..=12, entries, |n, v| {
        // Diagonal shift keeps the condition number small.
        let mut a = v[..n * n].to_vec();
        for i in 0..n {
            a[i * n + i] += C64::new(2.0 * n as f64, 0.0);
        }
        let b = &v[n * n..];
        let x = solve_dense(&a, b).unwrap();
        let bnorm = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for i in 0..n {
            let ax: C64 = (0..n).map(|j| a[i * n + j] * x[j]).sum();
            prop_assert!((ax - b[i]).norm() <= 1e-10 * bnorm.max(1e-300));
        }
        Ok(())
    });
}

#[test]
fn clamps_bound_every_ratio() {
    let errs = |_: usize| prop::collection::vec(prop_oneof![Just(0.0), 1e-20..1e3f64], 40);
    run_per_order(1..=8, errs, |p, es| {
        let ctl = StepController::new(p, 1e-8, 1e6);
        let mut tau = 1e-2;
        for e in es {
            let next = next_step(tau, e, &ctl);
            let q = next / tau;
            prop_assert!(
                q <= ctl.ell * (1.0 + 1e-15) && q >= (1.0 - 1e-15) / ctl.ell,
                "ratio {q}"
            );
            tau = next;
        }
        Ok(())
    });
}

#[test]
fn sector_test_is_monotone() {
    let models: Vec<StabilityModel> = (3..=7)
        .map(|q| StabilityModel::composed(q).unwrap())
        .collect();
    let cfg = Config {
        cases: 10,
        failure_persistence: None,
        ..Config::default()
    };
    let mut r = TestRunner::new_with_rng(cfg, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    r.run(&(0.0..90.0f64, 0.0..90.0f64), |(x, y)| {
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        for m in &models {
            if sector_ok(m, hi.to_radians(), Exec::Parallel) {
                prop_assert!(
                    sector_ok(m, lo.to_radians(), Exec::Parallel),
                    "order {}",
                    m.order()
                );
            }
        }
        Ok(())
    })
    .unwrap();
}
