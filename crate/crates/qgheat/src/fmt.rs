//! Deterministic numeric formatting for CSV output.

/// 17 significant digits, '.' decimal separator.
pub fn g17(x: f64) -> String {
    format!("{x:.16e}")
}
