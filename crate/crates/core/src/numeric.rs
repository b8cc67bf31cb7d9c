//! Compensated floating-point accumulation shared by the scoring modules.

/// Neumaier-compensated sum. The correction term absorbs low-order bits lost
/// when summands differ widely in magnitude, so reorderings of the same
/// multiset agree to well below 1e-12.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    for value in values {
        let t = sum + value;
        if sum.abs() >= value.abs() {
            compensation += (sum - t) + value;
        } else {
            compensation += (value - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}

/// Compensated arithmetic mean. Returns `None` for an empty slice.
pub(crate) fn compensated_mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(compensated_sum(values.iter().copied()) / values.len() as f64)
    }
}
