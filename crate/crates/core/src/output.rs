//! Deterministic CSV formatting.

/// Scientific notation with 17 significant digits.
pub fn sci(x: f64) -> String {
    format!("{:.16e}", x)
}

pub fn csv_row(fields: &[f64]) -> String {
    fields.iter().map(|&x| sci(x)).collect::<Vec<_>>().join(",")
}
