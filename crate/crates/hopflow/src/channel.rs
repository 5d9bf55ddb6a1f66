//! Path loss, noise and the spectrum reuse structure.
//!
//! Channel gain follows a power law `q = k * (l0 / dist)^a`. Rings at least
//! `f` apart share a spectrum slice; the nearest possible
//! interferer-to-victim distance under that pattern is `(f - 2) * d`, and
//! capping each link's transmit power density at `gamma = alpha * n0 /
//! (k * (l0 / d_int)^a)` keeps the received interference density below
//! `alpha` times the noise floor. `f` must exceed 2 for that distance to be
//! positive; `f = inf` disables reuse (every ring gets its own slice and the
//! density cap goes away).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::ScenarioConfig;
use crate::topology::NetworkTopology;

/// Spectrum reuse period in rings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReuseFactor {
    Finite(u32),
    Infinite,
}

impl ReuseFactor {
    pub fn is_finite(self) -> bool {
        matches!(self, ReuseFactor::Finite(_))
    }
}

impl std::fmt::Display for ReuseFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReuseFactor::Finite(v) => write!(f, "{v}"),
            ReuseFactor::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for ReuseFactor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ReuseFactor::Finite(v) => s.serialize_u32(*v),
            ReuseFactor::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ReuseFactor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u32),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(ReuseFactor::Finite(v)),
            Raw::Word(w) if w.eq_ignore_ascii_case("inf") || w.eq_ignore_ascii_case("infinite") => {
                Ok(ReuseFactor::Infinite)
            }
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "reuse factor must be an integer or \"inf\", got {w:?}"
            ))),
        }
    }
}

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("distance must be positive, got {0}")]
    BadDistance(f64),
    #[error("reuse factor must be at least 3, got {0}")]
    BadReuseFactor(u32),
    #[error("{0} must be positive")]
    NonPositiveParameter(&'static str),
}

/// Power-law channel gain at `dist` meters.
pub fn channel_gain(k: f64, l0: f64, a: f64, dist: f64) -> Result<f64, ChannelError> {
    if dist <= 0.0 {
        return Err(ChannelError::BadDistance(dist));
    }
    if k <= 0.0 {
        return Err(ChannelError::NonPositiveParameter("k"));
    }
    if l0 <= 0.0 {
        return Err(ChannelError::NonPositiveParameter("l0"));
    }
    Ok(k * (l0 / dist).powf(a))
}

/// Transmit power density cap in W/MHz enforcing the interference budget,
/// `+inf` when reuse is disabled.
pub fn bandwidth_coefficient(
    alpha: f64,
    n0: f64,
    k: f64,
    l0: f64,
    a: f64,
    reuse: ReuseFactor,
    d: f64,
) -> Result<f64, ChannelError> {
    let f = match reuse {
        ReuseFactor::Infinite => return Ok(f64::INFINITY),
        ReuseFactor::Finite(f) if f < 3 => return Err(ChannelError::BadReuseFactor(f)),
        ReuseFactor::Finite(f) => f,
    };
    if alpha <= 0.0 {
        return Err(ChannelError::NonPositiveParameter("alpha"));
    }
    if n0 <= 0.0 {
        return Err(ChannelError::NonPositiveParameter("n0"));
    }
    let d_int = (f as f64 - 2.0) * d;
    let gain_at_d_int = channel_gain(k, l0, a, d_int)?;
    Ok(alpha * n0 / gain_at_d_int)
}

/// Which spectrum slice each ring uses: 0-based slice id per 1-based ring.
/// Finite reuse `f` cycles slices with period `f`; without reuse every ring
/// has its own slice.
pub fn ring_spectrum_classes(reuse: ReuseFactor, num_groups: usize) -> (Vec<usize>, usize) {
    match reuse {
        ReuseFactor::Infinite => ((0..num_groups).collect(), num_groups),
        ReuseFactor::Finite(f) => {
            let period = (f as usize).min(num_groups.max(1));
            ((0..num_groups).map(|g| g % period).collect(), period)
        }
    }
}

/// Per-link channel state plus the shared radio constants.
#[derive(Clone, Debug)]
pub struct ChannelModel {
    /// Channel gain per link.
    pub gains: Vec<f64>,
    /// Noise density seen on each link (W/MHz); starts at `n0` and may be
    /// perturbed per link while a network runs.
    pub sigma: Vec<f64>,
    /// Power density cap (W/MHz), `+inf` when reuse is off.
    pub gamma: f64,
    /// Per-node transmit power budget (W).
    pub p_max: f64,
    /// Total spectrum (MHz).
    pub w_max: f64,
    pub reuse: ReuseFactor,
    pub n0: f64,
    pub k: f64,
    pub l0: f64,
    pub a: f64,
}

impl ChannelModel {
    pub fn build(topology: &NetworkTopology, config: &ScenarioConfig) -> Result<Self, ChannelError> {
        let gains = topology
            .links
            .iter()
            .map(|link| channel_gain(config.k, config.l0, config.a, link.distance))
            .collect::<Result<Vec<_>, _>>()?;
        let gamma = bandwidth_coefficient(
            config.alpha,
            config.n0,
            config.k,
            config.l0,
            config.a,
            config.reuse_factor_f,
            config.group_width_d,
        )?;
        Ok(Self {
            gains,
            sigma: vec![config.n0; topology.num_links()],
            gamma,
            p_max: config.p_max,
            w_max: config.w_max,
            reuse: config.reuse_factor_f,
            n0: config.n0,
            k: config.k,
            l0: config.l0,
            a: config.a,
        })
    }

    /// Channel for the single-hop baseline over the same node positions: one
    /// direct link per user, no reuse, no density cap.
    pub fn build_direct(star: &NetworkTopology, config: &ScenarioConfig) -> Result<Self, ChannelError> {
        let gains = star
            .links
            .iter()
            .map(|link| channel_gain(config.k, config.l0, config.a, link.distance))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            gains,
            sigma: vec![config.n0; star.num_links()],
            gamma: f64::INFINITY,
            p_max: config.p_max,
            w_max: config.w_max,
            reuse: ReuseFactor::Infinite,
            n0: config.n0,
            k: config.k,
            l0: config.l0,
            a: config.a,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_follows_power_law() {
        let q = channel_gain(1.0, 1.0, 4.0, 200.0).unwrap();
        assert!((q - 6.25e-10).abs() < 1e-22);
    }

    #[test]
    fn zero_distance_rejected() {
        assert!(matches!(channel_gain(1.0, 1.0, 4.0, 0.0), Err(ChannelError::BadDistance(_))));
    }

    #[test]
    fn density_cap_matches_interference_budget() {
        // alpha 0.1, n0 1e-11, f = 4, d = 40: d_int = 80, cap 0.1*1e-11*80^4.
        let g = bandwidth_coefficient(0.1, 1e-11, 1.0, 1.0, 4.0, ReuseFactor::Finite(4), 40.0)
            .unwrap();
        assert!((g - 4.096e-5).abs() < 1e-12);
    }

    #[test]
    fn tighter_reuse_means_tighter_cap() {
        let g3 = bandwidth_coefficient(0.1, 1e-11, 1.0, 1.0, 4.0, ReuseFactor::Finite(3), 40.0)
            .unwrap();
        let g4 = bandwidth_coefficient(0.1, 1e-11, 1.0, 1.0, 4.0, ReuseFactor::Finite(4), 40.0)
            .unwrap();
        assert!((g3 / g4 - 1.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn no_reuse_has_no_cap() {
        let g = bandwidth_coefficient(0.1, 1e-11, 1.0, 1.0, 4.0, ReuseFactor::Infinite, 40.0)
            .unwrap();
        assert!(g.is_infinite());
    }

    #[test]
    fn reuse_factor_below_three_rejected() {
        assert!(matches!(
            bandwidth_coefficient(0.1, 1e-11, 1.0, 1.0, 4.0, ReuseFactor::Finite(2), 40.0),
            Err(ChannelError::BadReuseFactor(2))
        ));
    }

    #[test]
    fn spectrum_classes_cycle() {
        let (classes, count) = ring_spectrum_classes(ReuseFactor::Finite(3), 6);
        assert_eq!(classes, vec![0, 1, 2, 0, 1, 2]);
        assert_eq!(count, 3);
        let (classes, count) = ring_spectrum_classes(ReuseFactor::Infinite, 4);
        assert_eq!(classes, vec![0, 1, 2, 3]);
        assert_eq!(count, 4);
        // More slices than rings collapses to one slice per ring.
        let (classes, count) = ring_spectrum_classes(ReuseFactor::Finite(5), 3);
        assert_eq!(classes, vec![0, 1, 2]);
        assert_eq!(count, 3);
    }

    #[test]
    fn reuse_factor_serde_roundtrip() {
        let f: ReuseFactor = serde_json::from_str("4").unwrap();
        assert_eq!(f, ReuseFactor::Finite(4));
        let f: ReuseFactor = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(f, ReuseFactor::Infinite);
        assert_eq!(serde_json::to_string(&ReuseFactor::Infinite).unwrap(), "\"inf\"");
    }
}
