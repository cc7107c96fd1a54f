//! Locale-independent numeric formatting for text outputs.

/// Shortest round-trip scientific notation, e.g. `1.5e-3`.
pub fn sci(x: f64) -> String {
    format!("{x:e}")
}
