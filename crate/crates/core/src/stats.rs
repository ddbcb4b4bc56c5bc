/// Median of a slice; the two middle values are averaged for even lengths.
/// Returns `None` on an empty slice. Input order does not affect the result.
pub(crate) fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        Some(sorted[mid])
    } else {
        Some(0.5 * (sorted[mid - 1] + sorted[mid]))
    }
}

/// Inclusive index range of a centered window of `size` around `t`, shrunk
/// to `[0, len)`. Even sizes extend one further to the left.
pub(crate) fn centered_window(t: usize, size: usize, len: usize) -> (usize, usize) {
    let size = size.max(1);
    let left = size / 2;
    let right = size - 1 - left;
    (t.saturating_sub(left), (t + right).min(len - 1))
}
