// Shared oracles for the integration suites: a KKT active-set enumeration
// solver for small dense QPs, finite differences, exhaustive grid searches
// on instances tiny enough to trust, and the frozen scenario classes the
// suites run against.
#![allow(dead_code)]

use hopflow::capacity::capacity;
use hopflow::channel::{ChannelModel, ReuseFactor};
use hopflow::device::DeviceOptions;
use hopflow::layered::LayeredOptions;
use hopflow::scenario::ScenarioConfig;
use hopflow::topology::{assign_rings, NetworkTopology};

/// Stopping thresholds an order tighter than the defaults, for checks that
/// compare converged objectives across solvers rather than iteration counts.
pub fn tight_layered() -> LayeredOptions {
    LayeredOptions { eps_abs: 1e-5, eps_rel: 1e-4, max_iters: 3000, ..LayeredOptions::default() }
}

pub fn tight_device() -> DeviceOptions {
    DeviceOptions { eps_abs: 1e-5, eps_rel: 1e-4, max_iters: 6000, ..DeviceOptions::default() }
}

pub fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-12)
}

/// Dense convex QP for the enumeration oracle:
/// `min ½ xᵀHx + cᵀx  s.t.  Ex = f,  Gx <= h`.
/// Nonnegativity must be encoded by the caller as rows of `G`.
pub struct DenseQp {
    pub quad: Vec<Vec<f64>>,
    pub linear: Vec<f64>,
    pub eq: Vec<(Vec<f64>, f64)>,
    pub ineq: Vec<(Vec<f64>, f64)>,
}

impl DenseQp {
    pub fn objective(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mut v = 0.0;
        for i in 0..n {
            v += self.linear[i] * x[i];
            for j in 0..n {
                v += 0.5 * x[i] * self.quad[i][j] * x[j];
            }
        }
        v
    }
}

/// Solves a convex QP exactly by enumerating active sets of the inequality
/// constraints and checking the KKT conditions of each candidate system.
/// Returns the best feasible KKT point, or `None` when no subset produces
/// one (infeasible problems, or LPs with no bounded vertex).
pub fn solve_by_enumeration(p: &DenseQp) -> Option<(Vec<f64>, f64)> {
    use nalgebra::{DMatrix, DVector};
    let n = p.linear.len();
    let me = p.eq.len();
    let mi = p.ineq.len();
    assert!(mi <= 20, "enumeration oracle is exponential in the inequality count");

    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 0u32..1u32 << mi {
        let active: Vec<usize> = (0..mi).filter(|i| mask >> i & 1 == 1).collect();
        let rows = me + active.len();
        let dim = n + rows;
        let mut kkt = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DVector::<f64>::zeros(dim);
        for i in 0..n {
            for j in 0..n {
                kkt[(i, j)] = p.quad[i][j];
            }
            rhs[i] = -p.linear[i];
        }
        {
            let mut fill = |r: usize, row: &[f64], b: f64| {
                for j in 0..n {
                    kkt[(n + r, j)] = row[j];
                    kkt[(j, n + r)] = row[j];
                }
                rhs[n + r] = b;
            };
            for (r, (row, b)) in p.eq.iter().enumerate() {
                fill(r, row, *b);
            }
            for (r, &idx) in active.iter().enumerate() {
                let (row, b) = &p.ineq[idx];
                fill(me + r, row, *b);
            }
        }
        let Some(sol) = kkt.clone().lu().solve(&rhs) else { continue };
        // The LU "solves" near-singular systems too; reject by residual.
        let resid = (&kkt * &sol - &rhs).amax();
        if !resid.is_finite() || resid > 1e-8 * (1.0 + rhs.amax()) {
            continue;
        }
        let x: Vec<f64> = sol.as_slice()[..n].to_vec();
        // Multipliers of active inequalities must be nonnegative.
        if sol.as_slice()[n + me..].iter().any(|&mu| mu < -1e-9) {
            continue;
        }
        let feasible = p.ineq.iter().all(|(row, b)| {
            let v: f64 = row.iter().zip(&x).map(|(a, xi)| a * xi).sum();
            v <= b + 1e-8 * (1.0 + b.abs())
        });
        if !feasible {
            continue;
        }
        let obj = p.objective(&x);
        if best.as_ref().is_none_or(|(_, bo)| obj < *bo) {
            best = Some((x, obj));
        }
    }
    best
}

/// Central-difference gradient with per-coordinate steps sized for f64.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = 6e-6 * (1.0 + x[i].abs());
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Collinear chain with one user per ring: user `i` sits at `radii[i]` on
/// the x axis and relays through user `i - 1` (the first relays straight to
/// the collection point).
pub fn chain_setup(
    radii: &[f64],
    reuse: ReuseFactor,
    p_max: f64,
) -> (NetworkTopology, ChannelModel, ScenarioConfig) {
    let mut positions = vec![(0.0, 0.0)];
    positions.extend(radii.iter().map(|&r| (r, 0.0)));
    let groups: Vec<usize> = (0..positions.len()).collect();
    let topology = NetworkTopology::assemble(positions, groups, radii.len(), 0.3, 80.0).unwrap();
    let config = ScenarioConfig {
        num_users: radii.len(),
        group_width_d: 40.0,
        reuse_factor_f: reuse,
        p_max,
        ..ScenarioConfig::default()
    };
    let channel = ChannelModel::build(&topology, &config).unwrap();
    (topology, channel, config)
}

/// Exhaustive grid search for the best max-min rate on a 1- or 2-link
/// chain. The spectrum split between the (at most two) ring slices and each
/// link's power are scanned on uniform grids of `steps + 1` points. On a
/// chain the first link carries every user's traffic, the second only the
/// outer user's.
pub fn chain_grid_oracle(channel: &ChannelModel, steps: usize) -> f64 {
    let cap_p = |w: f64| {
        if channel.gamma.is_finite() {
            channel.p_max.min(channel.gamma * w)
        } else {
            channel.p_max
        }
    };
    let frac = |k: usize| k as f64 / steps as f64;
    let best_rate = |l: usize, w: f64| -> f64 {
        let hi = cap_p(w);
        (0..=steps)
            .map(|k| capacity(w, hi * frac(k), channel.gains[l], channel.sigma[l]))
            .fold(0.0, f64::max)
    };
    match channel.gains.len() {
        1 => (0..=steps).map(|k| best_rate(0, channel.w_max * frac(k))).fold(0.0, f64::max),
        2 => (0..=steps)
            .map(|k| {
                let w1 = channel.w_max * frac(k);
                let w0 = channel.w_max - w1;
                (best_rate(0, w0) / 2.0).min(best_rate(1, w1))
            })
            .fold(0.0, f64::max),
        n => panic!("chain oracle handles 1 or 2 links, got {n}"),
    }
}

/// Grid search over the bandwidth simplex for a 3-user direct star: every
/// user transmits at full power and the splits scan the whole band.
pub fn direct_grid_oracle(channel: &ChannelModel, steps: usize) -> f64 {
    assert_eq!(channel.gains.len(), 3);
    let w = channel.w_max;
    let mut best = 0.0f64;
    for i in 0..=steps {
        let w0 = w * i as f64 / steps as f64;
        for j in 0..=steps - i {
            let w1 = w * j as f64 / steps as f64;
            let w2 = w - w0 - w1;
            let r = capacity(w0, channel.p_max, channel.gains[0], channel.sigma[0])
                .min(capacity(w1, channel.p_max, channel.gains[1], channel.sigma[1]))
                .min(capacity(w2, channel.p_max, channel.gains[2], channel.sigma[2]));
            best = best.max(r);
        }
    }
    best
}

/// The scenario class used for cross-solver agreement: full-circle sectors
/// small enough that every solver runs in well under a second, alternating
/// between unlimited reuse and f = 3, with the density knob high enough
/// that the reuse cap stays off the trivial corner.
pub fn agree_config(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        sector_radius: 120.0,
        sector_angle: 360.0,
        num_users: 5 + (seed % 7) as usize,
        group_width_d: 30.0,
        reuse_factor_f: if seed % 3 == 0 { ReuseFactor::Infinite } else { ReuseFactor::Finite(3) },
        theta: 25.0,
        d_th_factor: 1.6,
        alpha: 900.0,
        rng_seed: 1000 + seed,
        ..ScenarioConfig::default()
    }
}

/// Parameters of the 12-node / 15-link convergence benchmark.
pub fn anchor_config() -> ScenarioConfig {
    ScenarioConfig {
        sector_radius: 280.0,
        sector_angle: 360.0,
        num_users: 11,
        group_width_d: 40.0,
        reuse_factor_f: ReuseFactor::Finite(4),
        theta: 10.0,
        d_th_factor: 1.5,
        rng_seed: 1,
        ..ScenarioConfig::default()
    }
}

/// Builds a topology from frozen node positions under `config`'s gates.
pub fn corridor_topology(positions: Vec<(f64, f64)>, config: &ScenarioConfig) -> NetworkTopology {
    let d = config.group_width_d;
    let (groups, m) = assign_rings(&positions, d, config.sector_radius).unwrap();
    NetworkTopology::assemble(
        positions,
        groups,
        m,
        config.theta.to_radians(),
        config.d_th_factor * d,
    )
    .unwrap()
}

/// Six users spread over four rings (two rings share a slice at f = 3);
/// enough structure to exercise the share projection and locality checks.
pub fn four_ring_fixture() -> (NetworkTopology, ChannelModel, ScenarioConfig) {
    let positions = vec![
        (0.0, 0.0),
        (60.0, 0.0),
        (70.0, 8.0),
        (100.0, 0.0),
        (110.0, 8.0),
        (150.0, 0.0),
        (190.0, 0.0),
    ];
    let config = ScenarioConfig {
        num_users: 6,
        sector_radius: 200.0,
        sector_angle: 360.0,
        group_width_d: 40.0,
        reuse_factor_f: ReuseFactor::Finite(3),
        theta: 25.0,
        d_th_factor: 1.5,
        ..ScenarioConfig::default()
    };
    let topology = corridor_topology(positions, &config);
    assert_eq!(topology.num_groups, 4);
    let channel = ChannelModel::build(&topology, &config).unwrap();
    (topology, channel, config)
}
