//! Link rate model.
//!
//! A link carrying signal power `p` (W) over bandwidth `w` (MHz) with channel
//! gain `q` and receiver noise density `n0` (W/MHz) supports
//! `w * log2(1 + p*q/(w*n0))` Mbps. The function is jointly concave in
//! `(p, w)` and positively homogeneous: scaling power and bandwidth together
//! scales the rate by the same factor.

use std::f64::consts::LN_2;

/// Achievable rate in Mbps. Panics on negative `w`/`p` or non-positive
/// `q`/`n0`; `w = 0` returns the continuous limit 0 regardless of `p`.
pub fn capacity(w: f64, p: f64, q: f64, n0: f64) -> f64 {
    assert!(w >= 0.0 && p >= 0.0, "capacity: negative bandwidth or power");
    assert!(q > 0.0 && n0 > 0.0, "capacity: gain and noise must be positive");
    if w == 0.0 {
        return 0.0;
    }
    let snr = p * q / (w * n0);
    w * (1.0 + snr).log2()
}

/// Partial derivatives `(dc/dp, dc/dw)` of [`capacity`].
///
/// At `w = 0` the limit for `snr -> 0` is used: `dc/dp = q/(n0 ln 2)` and
/// `dc/dw = 0`. The resulting plane through the origin is a valid global
/// upper bound since `ln(1 + s) <= s`.
pub fn capacity_gradient(w: f64, p: f64, q: f64, n0: f64) -> (f64, f64) {
    assert!(w >= 0.0 && p >= 0.0, "capacity_gradient: negative bandwidth or power");
    assert!(q > 0.0 && n0 > 0.0, "capacity_gradient: gain and noise must be positive");
    if w == 0.0 {
        return (q / (n0 * LN_2), 0.0);
    }
    let snr = p * q / (w * n0);
    let dc_dp = q / (n0 * LN_2 * (1.0 + snr));
    let dc_dw = (1.0 + snr).log2() - snr / ((1.0 + snr) * LN_2);
    (dc_dp, dc_dw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_snr_gives_one_mbps_per_mhz() {
        // p*q/(w*n0) = 1 at w = 1 MHz: rate = log2(2) = 1 Mbps.
        let rate = capacity(1.0, 1.0, 1e-11, 1e-11);
        assert!((rate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_bandwidth_is_zero_rate() {
        assert_eq!(capacity(0.0, 0.7, 1e-9, 1e-11), 0.0);
    }

    #[test]
    fn zero_power_is_zero_rate() {
        assert_eq!(capacity(2.5, 0.0, 1e-9, 1e-11), 0.0);
    }

    #[test]
    fn scaling_power_and_bandwidth_scales_rate() {
        let r1 = capacity(1.3, 0.2, 3e-10, 1e-11);
        let r2 = capacity(2.6, 0.4, 3e-10, 1e-11);
        assert!((r2 - 2.0 * r1).abs() < 1e-9 * r1.abs());
    }

    #[test]
    fn gradient_at_zero_bandwidth_is_snr_limit() {
        let (dp, dw) = capacity_gradient(0.0, 0.4, 2e-10, 1e-11);
        assert!((dp - 2e-10 / (1e-11 * LN_2)).abs() < 1e-9);
        assert_eq!(dw, 0.0);
    }

    #[test]
    #[should_panic(expected = "negative bandwidth")]
    fn negative_bandwidth_rejected() {
        capacity(-1.0, 0.1, 1e-10, 1e-11);
    }
}
