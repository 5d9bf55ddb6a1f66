//! Euclidean projection onto the capped simplex `{ v >= 0, sum v <= cap }`.
//!
//! Solved exactly by thresholding: the projection is `max(y - tau, 0)` where
//! `tau = 0` if the clamped point already fits under the cap, and otherwise
//! `tau` is the unique water level at which the clamped coordinates sum to
//! the cap.

/// Water level `tau >= 0` for projecting `target` onto the cap.
pub fn waterfill_threshold(target: &[f64], cap: f64) -> f64 {
    assert!(cap >= 0.0, "cap must be nonnegative");
    let pos_sum: f64 = target.iter().map(|&t| t.max(0.0)).sum();
    if pos_sum <= cap {
        return 0.0;
    }
    let mut sorted: Vec<f64> = target.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    for (k, &tk) in sorted.iter().enumerate() {
        cum += tk;
        let tau = (cum - cap) / (k + 1) as f64;
        let next = sorted.get(k + 1).copied().unwrap_or(f64::NEG_INFINITY);
        if tau >= next {
            return tau.max(0.0);
        }
    }
    unreachable!("threshold search exhausted without a valid level");
}

/// Projection of `target` onto `{ v >= 0, sum v <= cap }`.
pub fn project_capped_simplex(target: &[f64], cap: f64) -> Vec<f64> {
    let tau = waterfill_threshold(target, cap);
    target.iter().map(|&t| (t - tau).max(0.0)).collect()
}
