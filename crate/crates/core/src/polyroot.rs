//! Dense complex linear solves and polynomial root finding.

use crate::{Error, Result, C64};

const MAX_SWEEPS: usize = 500;

/// Polynomial with complex coefficients in ascending degree order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPolynomial {
    coeffs: Vec<C64>,
}

impl ComplexPolynomial {
    /// Trailing zero coefficients are stripped. An empty or all-zero input
    /// becomes the constant zero polynomial.
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.norm() == 0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(C64::new(0.0, 0.0));
        }
        ComplexPolynomial { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| C64::new(c, 0.0)).collect())
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[C64]) -> Self {
        let mut c = vec![C64::new(1.0, 0.0)];
        for &r in roots {
            c = mul_coeffs(&c, &[-r, C64::new(1.0, 0.0)]);
        }
        Self::new(c)
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: C64) -> C64 {
        self.coeffs
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, &c| acc * x + c)
    }

    /// Value and first derivative by Horner.
    fn eval_with_derivative(&self, x: C64) -> (C64, C64) {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp)
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn mul(&self, other: &ComplexPolynomial) -> ComplexPolynomial {
        Self::new(mul_coeffs(&self.coeffs, &other.coeffs))
    }

    pub fn add(&self, other: &ComplexPolynomial) -> ComplexPolynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let zero = C64::new(0.0, 0.0);
        Self::new(
            (0..n)
                .map(|i| {
                    self.coeffs.get(i).copied().unwrap_or(zero)
                        + other.coeffs.get(i).copied().unwrap_or(zero)
                })
                .collect(),
        )
    }

    pub fn scale(&self, s: C64) -> ComplexPolynomial {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }
}

fn mul_coeffs(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
///
/// `a` is row-major with `b.len()` rows.
pub fn solve_dense(a: &[C64], b: &[C64]) -> Result<Vec<C64>> {
    let n = b.len();
    assert!(
        n >= 1 && a.len() == n * n,
        "matrix must be square and match rhs"
    );
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let threshold = 1e-14 * scale;

    for k in 0..n {
        let (piv, pmag) = (k..n)
            .map(|i| (i, m[i * n + k].norm()))
            .fold(
                (k, -1.0),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            );
        if pmag <= threshold || pmag == 0.0 {
            return Err(Error::SingularMatrix { pivot: pmag });
        }
        if piv != k {
            for j in 0..n {
                m.swap(k * n + j, piv * n + j);
            }
            x.swap(k, piv);
        }
        let d = m[k * n + k];
        for i in k + 1..n {
            let f = m[i * n + k] / d;
            if f.norm() == 0.0 {
                continue;
            }
            for j in k..n {
                let v = m[k * n + j];
                m[i * n + j] -= f * v;
            }
            let xk = x[k];
            x[i] -= f * xk;
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for j in k + 1..n {
            s -= m[k * n + j] * x[j];
        }
        x[k] = s / m[k * n + k];
    }
    Ok(x)
}

/// All roots of `poly` with multiplicity, by Aberth–Ehrlich iteration.
pub fn find_roots(poly: &ComplexPolynomial) -> Result<Vec<C64>> {
    let n = poly.degree();
    if n == 0 {
        return Err(Error::DegreeZero);
    }
    let c = poly.coeffs();
    let lead = c[n];
    if n == 1 {
        return Ok(vec![-c[0] / lead]);
    }
    let radius = 1.0
        + c[..n]
            .iter()
            .map(|ci| (ci / lead).norm())
            .fold(0.0, f64::max);
    let mut z: Vec<C64> = (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
            C64::from_polar(radius, theta)
        })
        .collect();
    // Rounding bound for Horner evaluation at |x|.
    let abs_coeffs: Vec<f64> = c.iter().map(|ci| ci.norm()).collect();
    let noise = |x: C64| {
        let r = x.norm();
        8.0 * f64::EPSILON * abs_coeffs.iter().rev().fold(0.0, |acc, &a| acc * r + a)
    };

    let mut done = vec![false; n];
    let mut last = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        let mut max_step: f64 = 0.0;
        for k in 0..n {
            if done[k] {
                continue;
            }
            let (p, dp) = poly.eval_with_derivative(z[k]);
            if p.norm() <= noise(z[k]) {
                done[k] = true;
                continue;
            }
            let ratio = p / dp;
            let s: C64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| (z[k] - z[j]).inv())
                .sum();
            let step = ratio / (C64::new(1.0, 0.0) - ratio * s);
            if !step.is_finite() {
                // Nudge off a critical point.
                let nudge = C64::new(1e-8, 1e-8) * (1.0 + z[k].norm());
                z[k] += nudge;
                max_step = f64::INFINITY;
                continue;
            }
            z[k] -= step;
            let rel = step.norm() / (1.0 + z[k].norm());
            if rel <= 4.0 * f64::EPSILON {
                done[k] = true;
            }
            max_step = max_step.max(rel);
        }
        last = max_step;
        if done.iter().all(|&d| d) {
            return Ok(z);
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_SWEEPS,
        residual: last,
    })
}
