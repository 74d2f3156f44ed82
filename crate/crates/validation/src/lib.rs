//! Published reference values and a small reporting helper for the
//! acceptance checks.

/// Step sizes of the fixed-step comparison tables.
pub const TAUS: [f64; 5] = [0.1, 0.05, 0.025, 0.0125, 0.00625];

/// Fixed-step BDF weights `g₀..g_p` for `p = 1..5` as exact rationals
/// `(numerator, denominator)`.
pub const BDF_WEIGHTS: [&[(i64, i64)]; 5] = [
    &[(1, 1), (-1, 1)],
    &[(3, 2), (-2, 1), (1, 2)],
    &[(11, 6), (-3, 1), (3, 2), (-1, 3)],
    &[(25, 12), (-4, 1), (3, 1), (-4, 3), (1, 4)],
    &[(137, 60), (-5, 1), (5, 1), (-10, 3), (5, 4), (-1, 5)],
];

/// Selected `α₁` on uniform grids for base order `p = 1..4`.
pub const UNIFORM_ALPHA1: [(f64, f64); 4] = [
    (0.5, 0.5),
    (0.4013648789516588, 0.7409710153124752),
    (0.3247753916537674, 0.927940112670109),
    (0.2675589068337956, 1.088573443182903),
];

/// Global errors of BDF of order `q = 2..5` on `cubic_decay` over [`TAUS`].
pub const BDF_ERRORS: [[f64; 5]; 4] = [
    [2.46e-3, 7.73e-4, 2.15e-4, 5.68e-5, 1.45e-5],
    [6.08e-4, 1.21e-4, 1.91e-5, 2.68e-6, 3.56e-7],
    [1.85e-4, 2.53e-5, 2.33e-6, 1.78e-7, 1.22e-8],
    [6.41e-5, 6.46e-6, 3.60e-7, 1.51e-8, 5.52e-10],
];

/// Global errors of the composed flow of order `q = 2..5`.
pub const COMPOSED_ERRORS: [[f64; 5]; 4] = [
    [1.10e-3, 3.04e-4, 7.99e-5, 2.04e-5, 5.18e-6],
    [1.00e-4, 1.59e-5, 2.22e-6, 2.93e-7, 3.75e-8],
    [1.70e-5, 1.66e-6, 1.24e-7, 8.41e-9, 5.43e-10],
    [4.06e-6, 2.58e-7, 1.02e-8, 3.39e-10, 1.06e-11],
];

/// Error ratios `R_E = E^{BDF}/E^{composed}` for `q = 2..5`.
pub const ERROR_RATIOS: [[f64; 5]; 4] = [
    [2.234, 2.539, 2.695, 2.775, 2.816],
    [6.0582, 7.629, 8.607, 9.172, 9.480],
    [10.890, 15.266, 18.734, 21.150, 22.626],
    [15.773, 24.966, 35.055, 44.662, 52.073],
];

/// A(θ) angles in degrees of the composed flows of order `q = 5..8`.
pub const COMPOSED_ANGLES: [(usize, f64); 4] = [(5, 81.511), (6, 67.796), (7, 45.0), (8, 4.146)];

/// A(θ) angles in degrees of BDF of order `q = 3..6`.
pub const BDF_ANGLES: [(usize, f64); 4] = [(3, 86.032), (4, 73.351), (5, 51.839), (6, 17.839)];

/// First-step lower bounds of `τ_p/τ` for `p = 2..8`.
pub const FIRST_STEP_BOUNDS: [f64; 7] = [0.4506, 0.6311, 0.7158, 0.7717, 0.8125, 0.8454, 0.8734];

/// Steady lower bounds of `τ_{n+1}/τ_n` under the `p^{-1/(p(p−1))}` rule.
pub const STEADY_BOUNDS: [f64; 7] = [0.4501, 0.6806, 0.7900, 0.8559, 0.9019, 0.9362, 0.96351];

/// Relative deviation `|a/b − 1|`.
pub fn rel_dev(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

/// Collects one verdict per check and prints a line for each.
#[derive(Debug, Default)]
pub struct Report {
    failed: Vec<String>,
    total: usize,
}

impl Report {
    pub fn record(&mut self, id: &str, title: &str, pass: bool, detail: &str) {
        self.line("criterion", id, title, pass, detail);
    }

    /// A checked property that is not one of the numbered criteria.
    pub fn record_invariant(&mut self, id: &str, title: &str, pass: bool, detail: &str) {
        self.line("invariant", id, title, pass, detail);
    }

    fn line(&mut self, kind: &str, id: &str, title: &str, pass: bool, detail: &str) {
        self.total += 1;
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{kind} {id:>3} {tag} {title}: {detail}");
        if !pass {
            self.failed.push(id.to_string());
        }
    }

    pub fn failed(&self) -> &[String] {
        &self.failed
    }

    pub fn total(&self) -> usize {
        self.total
    }
}
