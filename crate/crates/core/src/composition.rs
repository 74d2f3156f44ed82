//! The composed flow: two BDF sub-steps with complex fractions `α₁` and
//! `α₂ = 1 − α₁` of the step, whose real part gains one order and whose
//! imaginary part estimates the local error.

use crate::bdf::{g_closed_form, weighted_solve, HistoryWindow, ImplicitSolveConfig, MAX_ORDER};
use crate::polyroot::{find_roots, solve_dense, ComplexPolynomial};
use crate::{Error, Result, C64};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Everything one composed step needs besides the states.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionSetup {
    pub p: usize,
    pub ratios: Vec<f64>,
    pub alpha1: C64,
    pub alpha2: C64,
    /// `εⱼ = 1 + rⱼ/α₁`.
    pub eps: Vec<C64>,
    /// First-stage weights `g₀..g_p`.
    pub g: Vec<C64>,
    /// `Ē₀ = α₂`, `Ēᵢ = 1 + rᵢ`.
    pub eps_bar: Vec<C64>,
    /// Second-stage weights `G₀..G_{p+1}`.
    pub big_g: Vec<C64>,
    pub error_constant: f64,
}

impl CompositionSetup {
    pub fn new(ratios: &[f64], alpha1: C64) -> Result<Self> {
        let p = ratios.len();
        if !(1..=MAX_ORDER).contains(&p) {
            return Err(Error::OrderOutOfRange(p));
        }
        let eps: Vec<C64> = ratios.iter().map(|&r| 1.0 + r / alpha1).collect();
        let g = g_closed_form(&eps)?;
        let eps_bar = eps_bar(ratios, alpha1);
        let big_g = g_coefficients(alpha1, ratios)?;
        let mut setup = CompositionSetup {
            p,
            ratios: ratios.to_vec(),
            alpha1,
            alpha2: 1.0 - alpha1,
            eps,
            g,
            eps_bar,
            big_g,
            error_constant: 0.0,
        };
        setup.error_constant = error_constant(&setup)?;
        Ok(setup)
    }

    /// Setup on the uniform grid `rⱼ = j − 1`.
    pub fn uniform(p: usize) -> Result<Self> {
        let r = uniform_ratios(p);
        Self::new(&r, solve_alpha1(&r)?)
    }

    /// Root condition `ε_p α₁² + g₀ α₂²`.
    pub fn root_condition(&self) -> C64 {
        self.eps[self.p - 1] * self.alpha1 * self.alpha1 + self.g[0] * self.alpha2 * self.alpha2
    }
}

pub fn uniform_ratios(p: usize) -> Vec<f64> {
    (0..p).map(|j| j as f64).collect()
}

fn eps_bar(ratios: &[f64], alpha1: C64) -> Vec<C64> {
    std::iter::once(1.0 - alpha1)
        .chain(ratios.iter().map(|&r| c(1.0 + r)))
        .collect()
}

/// Output of one composed step.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedStepOutput {
    pub y_hat: Vec<C64>,
    pub y_real: Vec<f64>,
    pub error_estimate_raw: Vec<f64>,
    /// `|C_p| · ‖Im ŷ‖∞`.
    pub error_estimate: f64,
    pub intermediate: Vec<C64>,
    pub alpha1: C64,
    pub error_constant: f64,
}

/// `rⱼ = (t_{n−1} − t_{n−j})/τ`, so `r₁ = 0`.
pub fn ratios_from_window(window: &HistoryWindow, tau: f64) -> Vec<f64> {
    let t = window.times();
    let last = window.last_time().re;
    (1..=t.len())
        .map(|j| (last - t[t.len() - j].re) / tau)
        .collect()
}

/// Degree `p + 1` polynomial whose roots solve `ε_p α² + g₀ (1 − α)² = 0`.
///
/// Built as `(1−α)² Σⱼ ∏_{k≠j}(α+r_k) + (α+r_p) ∏ⱼ(α+rⱼ)`, i.e. the rational
/// condition times `∏(α+rⱼ)/α`.
pub fn alpha1_polynomial(ratios: &[f64]) -> ComplexPolynomial {
    let p = ratios.len();
    let lin = |r: f64| ComplexPolynomial::from_real(&[r, 1.0]);
    let mut sum = ComplexPolynomial::from_real(&[0.0]);
    for j in 0..p {
        let term = (0..p)
            .filter(|&k| k != j)
            .fold(ComplexPolynomial::from_real(&[1.0]), |acc, k| {
                acc.mul(&lin(ratios[k]))
            });
        sum = sum.add(&term);
    }
    let first = ComplexPolynomial::from_real(&[1.0, -2.0, 1.0]).mul(&sum);
    let second = ratios
        .iter()
        .fold(lin(ratios[p - 1]), |acc, &r| acc.mul(&lin(r)));
    first.add(&second)
}

/// All roots of the `α₁` polynomial.
pub fn alpha1_candidates(ratios: &[f64]) -> Result<Vec<C64>> {
    let poly = alpha1_polynomial(ratios);
    let roots = find_roots(&poly)?;
    Ok(roots.into_iter().map(|z| polish(&poly, z)).collect())
}

fn polish(poly: &ComplexPolynomial, mut z: C64) -> C64 {
    let coeffs = poly.coeffs();
    let deriv = ComplexPolynomial::new(
        coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &a)| a * k as f64)
            .collect(),
    );
    for _ in 0..3 {
        let d = deriv.eval(z);
        if d.norm() == 0.0 {
            break;
        }
        let step = poly.eval(z) / d;
        if !step.is_finite() || step.norm() > 1e-6 * (1.0 + z.norm()) {
            break;
        }
        z -= step;
    }
    z
}

/// Picks the admissible root: `Re > 0`, preferring `Im > 0`, then the root
/// nearest `prev`, else the largest real part.
pub fn select_root(roots: &[C64], prev: Option<C64>) -> Option<C64> {
    let admissible: Vec<C64> = roots.iter().copied().filter(|z| z.re > 0.0).collect();
    if admissible.is_empty() {
        return None;
    }
    let upper: Vec<C64> = admissible.iter().copied().filter(|z| z.im > 0.0).collect();
    let pool = if upper.is_empty() { admissible } else { upper };
    let best = match prev {
        Some(a) => pool
            .iter()
            .copied()
            .min_by(|x, y| (x - a).norm().total_cmp(&(y - a).norm())),
        None => pool.iter().copied().max_by(|x, y| x.re.total_cmp(&y.re)),
    };
    best
}

pub fn solve_alpha1(ratios: &[f64]) -> Result<C64> {
    solve_alpha1_near(ratios, None)
}

/// Like [`solve_alpha1`], choosing the branch closest to `prev` when
/// several are admissible.
pub fn solve_alpha1_near(ratios: &[f64], prev: Option<C64>) -> Result<C64> {
    let roots = alpha1_candidates(ratios)?;
    let alpha = select_root(&roots, prev).ok_or_else(|| Error::NoAdmissibleRoot {
        ratios: ratios.to_vec(),
    })?;
    let last = g_last_closed_form(alpha, ratios)?;
    if last.norm() > 1e-9 {
        return Err(Error::NoAdmissibleRoot {
            ratios: ratios.to_vec(),
        });
    }
    Ok(alpha)
}

fn first_stage(alpha1: C64, ratios: &[f64]) -> Result<(Vec<C64>, C64, C64)> {
    let eps: Vec<C64> = ratios.iter().map(|&r| 1.0 + r / alpha1).collect();
    let g0: C64 = eps.iter().map(|e| e.inv()).sum();
    let den = (1.0 - alpha1) * g0 - alpha1;
    if den.norm() < 1e-12 {
        return Err(Error::DegenerateDenominator(den.norm()));
    }
    Ok((eps, g0, den))
}

/// Closed form of `G_{j+1}`, `j = 1..p`:
/// `(−1)^p ∏_{i≠j} Ēᵢ/(Ēⱼ−Ēᵢ) · (α₁−1)(Ē₀²g₀ + α₁²εⱼ) / (Ēⱼ(rⱼ+α₁)(Ē₀g₀−α₁))`.
fn g_tail(alpha1: C64, ratios: &[f64], eps: &[C64], g0: C64, den: C64, j: usize) -> C64 {
    let p = ratios.len();
    let e0 = 1.0 - alpha1;
    let ej = 1.0 + ratios[j - 1];
    let lagrange: f64 = (1..=p)
        .filter(|&i| i != j)
        .map(|i| (1.0 + ratios[i - 1]) / (ej - (1.0 + ratios[i - 1])))
        .product();
    let sign = if p.is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * lagrange * (alpha1 - 1.0) * (e0 * e0 * g0 + alpha1 * alpha1 * eps[j - 1])
        / (ej * (ratios[j - 1] + alpha1) * den)
}

fn g_last_closed_form(alpha1: C64, ratios: &[f64]) -> Result<C64> {
    let (eps, g0, den) = first_stage(alpha1, ratios)?;
    Ok(g_tail(alpha1, ratios, &eps, g0, den, ratios.len()))
}

/// Second-stage weights `G₀..G_{p+1}` in closed form.
///
/// `G₁ = −g₀Ē₀/(Ē₀g₀−α₁) ∏(1+rᵢ)/(α₁+rᵢ)`, the tail as in `g_tail`, and
/// `G₀` from `Σ G = 0`.
pub fn g_coefficients(alpha1: C64, ratios: &[f64]) -> Result<Vec<C64>> {
    let p = ratios.len();
    if !(1..=MAX_ORDER).contains(&p) {
        return Err(Error::OrderOutOfRange(p));
    }
    if alpha1.norm() == 0.0 || (alpha1 - 1.0).norm() == 0.0 {
        return Err(Error::DegenerateDenominator(0.0));
    }
    let (eps, g0, den) = first_stage(alpha1, ratios)?;
    let e0 = 1.0 - alpha1;
    let mut out = vec![c(0.0); p + 2];
    out[1] = -g0 * e0 / den
        * ratios
            .iter()
            .map(|&r| (1.0 + r) / (alpha1 + r))
            .product::<C64>();
    for j in 1..=p {
        out[j + 1] = g_tail(alpha1, ratios, &eps, g0, den, j);
    }
    out[0] = -out[1..].iter().sum::<C64>();
    Ok(out)
}

/// Second-stage weights from the `(p+2)×(p+2)` moment system.
pub fn g_coefficients_dense(alpha1: C64, ratios: &[f64]) -> Result<Vec<C64>> {
    let p = ratios.len();
    let (eps, g0, _) = first_stage(alpha1, ratios)?;
    let eb = eps_bar(ratios, alpha1);
    let n = p + 2;
    let mut a = vec![c(0.0); n * n];
    let mut b = vec![c(0.0); n];
    for col in 0..n {
        a[col] = c(1.0);
    }
    for j in 1..=p + 1 {
        for i in 0..=p {
            a[j * n + i + 1] = eb[i].powu(j as u32);
        }
    }
    let prod: C64 = eps.iter().product();
    a[(p + 1) * n + 1] += (-alpha1).powu(p as u32 + 1) / g0 * prod;
    b[1] = -eb[0];
    solve_dense(&a, &b)
}

/// Printed fixed-step closed forms `Ḡ_{p+1}(α)` for `p = 1..4`.
pub fn gbar_fixed(p: usize, alpha: C64) -> Result<C64> {
    let a = alpha;
    let (num, den) = match p {
        1 => (
            (a - 1.0) * (2.0 * a * a - 2.0 * a + 1.0),
            a * (2.0 * a - 1.0),
        ),
        2 => (
            -(a - 1.0) * (3.0 * a.powu(3) - a * a + a + 1.0),
            2.0 * (a + 1.0) * (3.0 * a * a - 1.0),
        ),
        3 => (
            (a - 1.0) * (4.0 * a.powu(4) + 5.0 * a.powu(3) + a * a + 6.0 * a + 2.0),
            6.0 * (2.0 * a + 1.0) * (a + 2.0) * (a * a + a - 1.0),
        ),
        4 => (
            -(a - 1.0)
                * (5.0 * a.powu(5)
                    + 19.0 * a.powu(4)
                    + 19.0 * a.powu(3)
                    + 19.0 * a * a
                    + 28.0 * a
                    + 6.0),
            4.0 * (a + 3.0) * (5.0 * a.powu(4) + 20.0 * a.powu(3) + 15.0 * a * a - 10.0 * a - 6.0),
        ),
        _ => return Err(Error::OrderOutOfRange(p)),
    };
    if den.norm() < 1e-14 {
        return Err(Error::PoleEvaluation);
    }
    Ok(num / den)
}

/// `C_p = Re(ℰ_{p+2}/G₀) / Im(ℰ_{p+2}/G₀)` with
/// `ℰ_{p+2} = (−1)^{p}/(p+2)! Σᵢ G_{i+1} Ēᵢ^{p+2} − (G₁/g₀) E_{p+2}` and
/// `E_j = (−1)^j/j! (Σᵢ gᵢ Ēᵢ^j + j Ē₀^{j−1} α₁)`.
pub fn error_constant(setup: &CompositionSetup) -> Result<f64> {
    let p = setup.p;
    let j = p + 2;
    let sign = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
    let eb = &setup.eps_bar;
    let g = &setup.g;
    let gg = &setup.big_g;
    let pw = |z: C64| z.powu(j as u32);
    let e_j = sign / factorial(j)
        * ((0..=p).map(|i| g[i] * pw(eb[i])).sum::<C64>()
            + j as f64 * eb[0].powu(j as u32 - 1) * setup.alpha1);
    let cal_e = sign / factorial(j) * (0..=p).map(|i| gg[i + 1] * pw(eb[i])).sum::<C64>()
        - gg[1] / g[0] * e_j;
    let k = cal_e / gg[0];
    if !(k.im.abs() >= 1e-14 * k.norm()) || k.norm() == 0.0 {
        return Err(Error::DegenerateImaginaryPart);
    }
    Ok(k.re / k.im)
}

/// One composed step of size `tau` on a real-time window.
pub fn composed_step<F>(
    rhs: &F,
    window: &HistoryWindow,
    tau: f64,
    cfg: &ImplicitSolveConfig,
    prev_alpha: Option<C64>,
) -> Result<(HistoryWindow, ComposedStepOutput)>
where
    F: Fn(C64, &[C64]) -> Vec<C64> + ?Sized,
{
    let ratios = ratios_from_window(window, tau);
    let alpha1 = solve_alpha1_near(&ratios, prev_alpha)?;
    let setup = CompositionSetup::new(&ratios, alpha1)?;
    composed_step_with(rhs, window, tau, cfg, &setup)
}

/// Composed step with a precomputed setup, for fixed-step runs.
///
/// The first stage uses the weights `g`; the second uses `G₀..G_p` on the
/// window `[y_half, y_{n−1}, …, y_{n−p+1}]`, since `G_{p+1}` vanishes at
/// the root.
pub fn composed_step_with<F>(
    rhs: &F,
    window: &HistoryWindow,
    tau: f64,
    cfg: &ImplicitSolveConfig,
    setup: &CompositionSetup,
) -> Result<(HistoryWindow, ComposedStepOutput)>
where
    F: Fn(C64, &[C64]) -> Vec<C64> + ?Sized,
{
    let p = setup.p;
    if window.len() != p {
        return Err(Error::InvalidWindow(
            "window length differs from the setup order",
        ));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidStep);
    }
    let history: Vec<&[C64]> = window.states().iter().rev().map(|s| s.as_slice()).collect();
    let h1 = setup.alpha1 * tau;
    let t_half = window.last_time() + h1;
    let y_half = weighted_solve(
        rhs,
        &setup.g,
        &history,
        t_half,
        h1,
        window.last_state(),
        cfg,
    )?;

    let t_n = c(window.last_time().re + tau);
    let mut second: Vec<&[C64]> = Vec::with_capacity(p);
    second.push(&y_half);
    second.extend_from_slice(&history[..p - 1]);
    let y_hat = weighted_solve(
        rhs,
        &setup.big_g[..=p],
        &second,
        t_n,
        setup.alpha2 * tau,
        &y_half,
        cfg,
    )?;

    let y_real: Vec<f64> = y_hat.iter().map(|z| z.re).collect();
    let raw: Vec<f64> = y_hat.iter().map(|z| z.im).collect();
    let im_norm = raw.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let next = window.shifted(t_n, y_real.iter().map(|&x| c(x)).collect())?;
    let out = ComposedStepOutput {
        error_estimate: setup.error_constant.abs() * im_norm,
        y_hat,
        y_real,
        error_estimate_raw: raw,
        intermediate: y_half,
        alpha1: setup.alpha1,
        error_constant: setup.error_constant,
    };
    Ok((next, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bdf::coeff_variable;

    fn cx(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn ratios_examples() {
        let w = HistoryWindow::from_real(&[0.0, 0.1, 0.2], &vec![vec![1.0]; 3]).unwrap();
        let r = ratios_from_window(&w, 0.1);
        for (j, x) in r.iter().enumerate() {
            assert!((x - j as f64).abs() < 1e-12);
        }
        let w = HistoryWindow::from_real(&[0.0, 1.0], &vec![vec![1.0]; 2]).unwrap();
        assert_eq!(ratios_from_window(&w, 0.5), vec![0.0, 2.0]);
        let w = HistoryWindow::from_real(&[3.0], &[vec![1.0]]).unwrap();
        assert_eq!(ratios_from_window(&w, 0.5), vec![0.0]);
    }

    #[test]
    fn polynomial_shapes() {
        let want = |p: &ComplexPolynomial, coeffs: &[f64]| {
            let lead = p.coeffs().last().unwrap().re / coeffs.last().unwrap();
            for (a, b) in p.coeffs().iter().zip(coeffs) {
                assert!((a - cx(b * lead, 0.0)).norm() < 1e-12, "{a} vs {b}");
            }
        };
        want(&alpha1_polynomial(&[0.0]), &[1.0, -2.0, 2.0]);
        want(&alpha1_polynomial(&[0.0, 1.0]), &[1.0, 1.0, -1.0, 3.0]);
        let r2 = 2.7;
        want(
            &alpha1_polynomial(&[0.0, r2]),
            &[r2, r2 * r2 - 2.0 * r2 + 2.0, 3.0 * r2 - 4.0, 3.0],
        );
    }

    #[test]
    fn printed_uniform_roots() {
        let cases = [
            (1, cx(0.5, 0.5)),
            (2, cx(0.4013648789516588, 0.7409710153124752)),
            (3, cx(0.3247753916537674, 0.927940112670109)),
            (4, cx(0.2675589068337956, 1.088573443182903)),
        ];
        for (p, want) in cases {
            let a = solve_alpha1(&uniform_ratios(p)).unwrap();
            assert!((a - want).norm() < 1e-12, "p={p}: {a}");
            assert!(gbar_fixed(p, a).unwrap().norm() < 1e-9);
        }
        // p = 1 ignores the ratio.
        assert!((solve_alpha1(&[0.0]).unwrap() - cx(0.5, 0.5)).norm() < 1e-14);
    }

    #[test]
    fn first_step_boundary_for_order_two() {
        let a = solve_alpha1(&[0.0, 1.0 / 0.4506]).unwrap();
        assert!(a.re > 0.0 && a.re < 5e-3, "{a}");
        assert!(matches!(
            solve_alpha1(&[0.0, 1.0 / 0.44]),
            Err(Error::NoAdmissibleRoot { .. })
        ));
    }

    #[test]
    fn gbar_examples() {
        assert_eq!(gbar_fixed(1, cx(1.0, 0.0)).unwrap(), cx(0.0, 0.0));
        assert!(gbar_fixed(1, cx(0.5, 0.5)).unwrap().norm() < 1e-15);
        assert!(matches!(
            gbar_fixed(1, cx(0.5, 0.0)),
            Err(Error::PoleEvaluation)
        ));
        assert!(matches!(
            gbar_fixed(5, cx(0.5, 0.5)),
            Err(Error::OrderOutOfRange(5))
        ));
    }

    #[test]
    fn closed_form_matches_dense_uniform_p3() {
        let r = uniform_ratios(3);
        let a = cx(0.3, 0.9);
        let closed = g_coefficients(a, &r).unwrap();
        let dense = g_coefficients_dense(a, &r).unwrap();
        for (x, y) in closed.iter().zip(&dense) {
            assert!((x - y).norm() <= 1e-9 * (1.0 + y.norm()), "{x} vs {y}");
        }
    }

    #[test]
    fn second_stage_equals_variable_weights() {
        // With α₁ a root, G₀..G_p are the p-point weights of the second jump.
        for p in 1..=6 {
            let r = uniform_ratios(p);
            let s = CompositionSetup::uniform(p).unwrap();
            let tau = 0.1;
            let mut nodes: Vec<C64> = (0..p).map(|k| cx(k as f64 * tau, 0.0)).collect();
            let t_half = nodes[p - 1] + s.alpha1 * tau;
            let t_n = nodes[p - 1] + tau;
            nodes.remove(0);
            nodes.push(t_half);
            let cs = coeff_variable(&nodes, t_n).unwrap();
            for i in 0..=p {
                assert!((cs.weights[i] - s.big_g[i]).norm() < 1e-9, "p={p} i={i}");
            }
            assert!(s.big_g[p + 1].norm() < 1e-9);
            assert_eq!(s.ratios, r);
        }
    }

    #[test]
    fn error_constant_uniform_values() {
        let want = [
            0.33333, 0.055508, -0.045026, -0.093485, -0.12118, -0.13913, -0.15179, -0.16124,
        ];
        for (p, w) in (1..=8).zip(want) {
            let s = CompositionSetup::uniform(p).unwrap();
            assert!(
                (s.error_constant - w).abs() < 5e-5 * (1.0 + w.abs()),
                "p={p}: {}",
                s.error_constant
            );
        }
    }

    #[test]
    fn conjugate_branch_flips_constant() {
        for p in 1..=5 {
            let s = CompositionSetup::uniform(p).unwrap();
            let t = CompositionSetup::new(&s.ratios, s.alpha1.conj()).unwrap();
            assert!((s.error_constant + t.error_constant).abs() < 1e-10);
        }
    }

    #[test]
    fn first_order_linear_step() {
        let w = HistoryWindow::from_real(&[0.0], &[vec![1.0]]).unwrap();
        let rhs = |_t: C64, y: &[C64]| vec![-y[0]];
        let (next, out) =
            composed_step(&rhs, &w, 0.1, &ImplicitSolveConfig::default(), None).unwrap();
        assert!((out.y_hat[0] - cx(1.0 / 1.105, 0.0)).norm() < 1e-13);
        assert!(out.y_hat[0].im.abs() < 1e-14);
        assert_eq!(next.last_time(), cx(0.1, 0.0));
        assert_eq!(next.last_state()[0], cx(out.y_real[0], 0.0));
    }

    #[test]
    fn stored_weights_match_two_plain_solves() {
        use crate::bdf::bdf_solve;
        let times = [0.0f64, 0.08, 0.17, 0.25];
        let states: Vec<Vec<f64>> = times.iter().map(|&t| vec![(-t).exp(), t.cos()]).collect();
        let w = HistoryWindow::from_real(&times, &states).unwrap();
        let rhs = |t: C64, y: &[C64]| vec![-y[0] * y[1], t.sin() - y[1] * y[1]];
        let cfg = ImplicitSolveConfig::default();
        let tau = 0.09;
        let (_, out) = composed_step(&rhs, &w, tau, &cfg, None).unwrap();
        let a = out.alpha1;
        let y_half = bdf_solve(&rhs, &w, a * tau, &cfg).unwrap();
        let second = w.shifted(w.last_time() + a * tau, y_half).unwrap();
        let y_hat = bdf_solve(&rhs, &second, (1.0 - a) * tau, &cfg).unwrap();
        for k in 0..2 {
            assert!(
                (y_hat[k] - out.y_hat[k]).norm() < 1e-13,
                "{} vs {}",
                y_hat[k],
                out.y_hat[k]
            );
        }
    }

    #[test]
    fn conjugate_branch_conjugates_output() {
        let p = 3;
        let tau = 0.05;
        let ex = |t: f64| 1.0 / (1.0 + 2.0 * t).sqrt();
        let times: Vec<f64> = (0..p).map(|k| k as f64 * tau).collect();
        let states: Vec<Vec<f64>> = times.iter().map(|&t| vec![ex(t)]).collect();
        let w = HistoryWindow::from_real(&times, &states).unwrap();
        let rhs = |_t: C64, y: &[C64]| vec![-y[0] * y[0] * y[0]];
        let cfg = ImplicitSolveConfig::default();
        let s = CompositionSetup::uniform(p).unwrap();
        let sc = CompositionSetup::new(&s.ratios, s.alpha1.conj()).unwrap();
        let (_, a) = composed_step_with(&rhs, &w, tau, &cfg, &s).unwrap();
        let (_, b) = composed_step_with(&rhs, &w, tau, &cfg, &sc).unwrap();
        assert!((a.y_hat[0] - b.y_hat[0].conj()).norm() < 1e-13);
        assert!((a.y_real[0] - b.y_real[0]).abs() < 1e-13);
    }

    #[test]
    fn output_parts_recombine() {
        let w = HistoryWindow::from_real(&[0.0, 0.1], &[vec![1.0, 2.0], vec![0.9, 1.9]]).unwrap();
        let rhs = |t: C64, y: &[C64]| vec![-y[0] * y[1], t.sin() - y[1]];
        let (_, out) = composed_step(&rhs, &w, 0.1, &ImplicitSolveConfig::default(), None).unwrap();
        for k in 0..2 {
            assert_eq!(cx(out.y_real[k], out.error_estimate_raw[k]), out.y_hat[k]);
        }
        let im = out
            .error_estimate_raw
            .iter()
            .map(|x| x.abs())
            .fold(0.0, f64::max);
        assert_eq!(out.error_estimate, out.error_constant.abs() * im);
    }
}
