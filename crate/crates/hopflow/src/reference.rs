//! Centralized cutting-plane solver for the joint allocation problem.
//!
//! The problem: choose per-link flow `x`, power `p`, bandwidth `w` and the
//! spectrum split `W` across reuse classes to maximize the worst user rate
//! (minus a small total-power tiebreak), subject to flow conservation,
//! per-link capacity, the interference density cap, per-node power budgets
//! and the ring bandwidth structure.
//!
//! Everything is linear except the capacity bound `x <= c(w, p)`, and `c` is
//! concave, so the solver alternates between an LP over the current tangent
//! planes (an outer approximation, hence an upper bound) and relinearizing
//! `c` at the LP's own iterate. It stops when the iterate's true capacity
//! violation is below tolerance, then clips flows onto the exact capacities
//! so the returned allocation is feasible outright.

use thiserror::Error;

use crate::capacity::capacity;
use crate::channel::{ring_spectrum_classes, ChannelModel, ReuseFactor};
use crate::planes::{TangentPlaneModel, DEFAULT_PLANE_BUDGET};
use crate::qp::{solve_qp, QpError, QpProblem};
use crate::scenario::ScenarioConfig;
use crate::solution::GlobalSolution;
use crate::topology::{NetworkTopology, TopologyError};

/// Relative floor (vs `w_max`) used when relinearizing at a zero-bandwidth
/// iterate; the gradient is singular there.
const ANCHOR_BANDWIDTH_FLOOR: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Capacity violation below which the iterate is accepted (Mbps).
    pub tol: f64,
    /// Maximum linearization rounds.
    pub max_rounds: usize,
    /// Planes kept per link.
    pub plane_budget: usize,
    /// Total-power tiebreak weight.
    pub epsilon_power: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_rounds: 200,
            plane_budget: DEFAULT_PLANE_BUDGET,
            epsilon_power: 1e-6,
        }
    }
}

impl SolveOptions {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        Self { epsilon_power: config.epsilon_power, ..Self::default() }
    }
}

#[derive(Clone, Debug)]
pub struct ReferenceRun {
    pub solution: GlobalSolution,
    /// Linearization rounds used.
    pub rounds: usize,
    /// Final LP value of the worst user rate; an upper bound on the true
    /// optimum (before the power tiebreak).
    pub upper_bound: f64,
    /// Capacity violation of the accepted LP iterate before clipping.
    pub final_violation: f64,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("subproblem failed: {0}")]
    Qp(#[from] QpError),
    #[error("no convergence after {rounds} rounds (capacity violation {violation:.3e})")]
    NoConvergence { rounds: usize, violation: f64 },
    #[error("invalid topology: {0}")]
    Topology(#[from] TopologyError),
    #[error("channel error: {0}")]
    Channel(#[from] crate::channel::ChannelError),
}

/// Seeds a link's plane set: one tangent at a representative operating point
/// and the zero-snr power bound through the origin.
pub fn seed_planes(model: &mut TangentPlaneModel, q: f64, sigma: f64, channel: &ChannelModel, w_ref: f64) {
    let p_ref = if channel.gamma.is_finite() {
        (channel.gamma * w_ref).min(channel.p_max)
    } else {
        channel.p_max
    };
    model.refine(q, sigma, 0.0, 0.0);
    model.refine(q, sigma, p_ref, w_ref);
}

/// Anchor used for relinearization: zero-bandwidth iterates are floored so
/// the new plane still cuts off the spurious `w = 0, rate > 0` region.
pub fn refine_anchor(p: f64, w: f64, w_max: f64) -> (f64, f64) {
    if p > 0.0 && w < ANCHOR_BANDWIDTH_FLOOR * w_max {
        (p, ANCHOR_BANDWIDTH_FLOOR * w_max)
    } else {
        (p, w)
    }
}

/// Centralized solve of the joint problem.
pub fn solve_joint(
    topology: &NetworkTopology,
    channel: &ChannelModel,
    options: &SolveOptions,
) -> Result<ReferenceRun, SolveError> {
    if topology.num_users() == 0 {
        return Ok(ReferenceRun {
            solution: GlobalSolution::empty(topology, channel),
            rounds: 0,
            upper_bound: 0.0,
            final_violation: 0.0,
        });
    }
    let l = topology.num_links();
    let (classes, num_classes) = ring_spectrum_classes(channel.reuse, topology.num_groups);

    let w_ref = channel.w_max / l as f64;
    let mut planes: Vec<TangentPlaneModel> = (0..l)
        .map(|link| {
            let mut model = TangentPlaneModel::new(options.plane_budget);
            seed_planes(&mut model, channel.gains[link], channel.sigma[link], channel, w_ref);
            model
        })
        .collect();

    // Variable layout: [x | p | w | W_classes | nu].
    let xi = |link: usize| link;
    let pi = |link: usize| l + link;
    let wi = |link: usize| 2 * l + link;
    let ci = |class: usize| 3 * l + class;
    let nu = 3 * l + num_classes;
    let n = nu + 1;

    let members = topology.ring_members();
    let incidence = topology.incidence();

    let mut best: Option<(Vec<f64>, f64, f64, usize)> = None;
    for round in 1..=options.max_rounds {
        let mut problem = QpProblem::new(n);
        problem.linear[nu] = -1.0;
        for link in 0..l {
            problem.linear[pi(link)] = options.epsilon_power;
        }
        for i in 0..nu {
            problem.nonneg[i] = true;
        }

        // Epigraph: nu - (A x)_node <= 0 for every user.
        for node in 1..topology.num_nodes() {
            let mut row: Vec<(usize, f64)> = vec![(nu, 1.0)];
            for (link, &coef) in incidence[node].iter().enumerate() {
                if coef != 0.0 {
                    row.push((xi(link), -coef));
                }
            }
            problem.ineq.push((row, 0.0));
        }
        // Capacity planes: x - slope_p p - slope_w w <= offset.
        for link in 0..l {
            for plane in planes[link].planes() {
                problem.ineq.push((
                    vec![(xi(link), 1.0), (pi(link), -plane.slope_p), (wi(link), -plane.slope_w)],
                    plane.offset,
                ));
            }
        }
        // Interference density cap.
        if channel.gamma.is_finite() {
            for link in 0..l {
                problem
                    .ineq
                    .push((vec![(pi(link), 1.0), (wi(link), -channel.gamma)], 0.0));
            }
        }
        // Node power budgets.
        for node in 1..topology.num_nodes() {
            if topology.out_links[node].is_empty() {
                continue;
            }
            let row = topology.out_links[node].iter().map(|&link| (pi(link), 1.0)).collect();
            problem.ineq.push((row, channel.p_max));
        }
        // Ring bandwidth: members' outgoing bandwidth within the class slice.
        for g in 1..=topology.num_groups {
            if members[g].is_empty() {
                continue;
            }
            let mut row: Vec<(usize, f64)> = Vec::new();
            for &node in &members[g] {
                for &link in &topology.out_links[node] {
                    row.push((wi(link), 1.0));
                }
            }
            row.push((ci(classes[g - 1]), -1.0));
            problem.ineq.push((row, 0.0));
        }
        // The class slices partition the spectrum.
        problem.eq.push(((0..num_classes).map(|c| (ci(c), 1.0)).collect(), channel.w_max));

        let sol = solve_qp(&problem, options.tol.min(1e-8))?;

        let mut violation = 0.0_f64;
        for link in 0..l {
            let cap = capacity(
                sol.x[wi(link)].max(0.0),
                sol.x[pi(link)].max(0.0),
                channel.gains[link],
                channel.sigma[link],
            );
            violation = violation.max(sol.x[xi(link)] - cap);
        }
        best = Some((sol.x.clone(), sol.x[nu], violation, round));
        if violation <= options.tol {
            break;
        }
        for link in 0..l {
            let (p, w) = (sol.x[pi(link)].max(0.0), sol.x[wi(link)].max(0.0));
            planes[link].mark_tight(p, w);
            let (ap, aw) = refine_anchor(p, w, channel.w_max);
            planes[link].refine(channel.gains[link], channel.sigma[link], ap, aw);
        }
    }

    let (x, bound, violation, rounds) = best.expect("at least one round runs");
    if violation > options.tol {
        return Err(SolveError::NoConvergence { rounds, violation });
    }

    let mut flows = Vec::with_capacity(l);
    let mut powers = Vec::with_capacity(l);
    let mut bandwidths = Vec::with_capacity(l);
    for link in 0..l {
        let p = x[pi(link)].max(0.0);
        let w = x[wi(link)].max(0.0);
        let cap = capacity(w, p, channel.gains[link], channel.sigma[link]);
        flows.push(x[xi(link)].max(0.0).min(cap));
        powers.push(p);
        bandwidths.push(w);
    }
    let class_bandwidths: Vec<f64> = (0..num_classes).map(|c| x[ci(c)].max(0.0)).collect();
    let solution =
        GlobalSolution::assemble(topology, channel, flows, powers, bandwidths, class_bandwidths);
    Ok(ReferenceRun { solution, rounds, upper_bound: bound, final_violation: violation })
}

/// Single-hop baseline: every user transmits straight to the collection
/// point over its own slice of the band, with no reuse and no density cap.
///
/// Rate is strictly increasing in power, so each user sends at `p_max` and
/// only the spectrum split matters. The split equalizes rates: bisect the
/// common rate, give each user the narrowest slice that supports it, and
/// stop when the slices fill the band. Exact, no linearization involved.
pub fn solve_direct(
    topology: &NetworkTopology,
    channel: &ChannelModel,
    options: &SolveOptions,
) -> Result<ReferenceRun, SolveError> {
    let n = topology.num_users();
    assert_eq!(topology.num_links(), n, "solve_direct expects a star topology");
    for link in &topology.links {
        assert_eq!(link.dest, 0, "solve_direct expects every link to end at the collection point");
    }
    if n == 0 {
        let solution = GlobalSolution::empty(topology, channel);
        return Ok(ReferenceRun { solution, rounds: 0, upper_bound: 0.0, final_violation: 0.0 });
    }

    let w_max = channel.w_max;
    let p_max = channel.p_max;
    // The bottleneck user owning the whole band bounds the optimum.
    let mut hi = f64::INFINITY;
    for l in 0..n {
        hi = hi.min(capacity(w_max, p_max, channel.gains[l], channel.sigma[l]));
    }
    // Narrowest slice delivering rate r at full power. r <= hi keeps the
    // whole band a valid bracket for every user.
    let slice_for = |l: usize, r: f64| -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let (mut a, mut b) = (0.0f64, w_max);
        for _ in 0..80 {
            let m = 0.5 * (a + b);
            if capacity(m, p_max, channel.gains[l], channel.sigma[l]) >= r {
                b = m;
            } else {
                a = m;
            }
        }
        b
    };
    let mut lo = 0.0f64;
    let mut rounds = 0;
    for _ in 0..90 {
        rounds += 1;
        let mid = 0.5 * (lo + hi);
        let need: f64 = (0..n).map(|l| slice_for(l, mid)).sum();
        if need <= w_max {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= options.tol.min(1e-9) * hi.max(1.0) {
            break;
        }
    }
    let mut bandwidths: Vec<f64> = (0..n).map(|l| slice_for(l, lo)).collect();
    let spare = (w_max - bandwidths.iter().sum::<f64>()).max(0.0) / n as f64;
    for w in &mut bandwidths {
        *w += spare;
    }
    let flows: Vec<f64> = (0..n)
        .map(|l| capacity(bandwidths[l], p_max, channel.gains[l], channel.sigma[l]))
        .collect();
    let powers = vec![p_max; n];
    let solution =
        GlobalSolution::assemble(topology, channel, flows, powers, bandwidths, vec![w_max]);
    Ok(ReferenceRun { solution, rounds, upper_bound: hi, final_violation: 0.0 })
}

/// True when the channel uses no interference density cap (direct baseline
/// or reuse disabled).
pub fn is_uncapped(channel: &ChannelModel) -> bool {
    matches!(channel.reuse, ReuseFactor::Infinite) || !channel.gamma.is_finite()
}
