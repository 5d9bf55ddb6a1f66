//! Per-device ADMM with simulated message passing.
//!
//! Consensus variables are split so that each piece is computable where its
//! data lives. Two lightweight coordination units keep the network-wide
//! copies: CU1 holds the flows `x` (worst-rate routing update), CU2 holds
//! per-node bandwidth shares `v` (a projection onto the ring spectrum
//! structure). Every node holds the matching local copies: rates `t` and
//! powers/bandwidths for its outgoing links plus its total share `b`, tied
//! to the CU copies by scaled duals `u` (flows) and `y` (shares).
//!
//! One iteration, in lockstep:
//! 1. CU1 and CU2 update `x` and `v` in parallel from the previous node
//!    snapshot and broadcast `x + u` and `v + y`.
//! 2. Every node solves its own small QP from the broadcast values and its
//!    local channel state only, then broadcasts its new `t` and `b`.
//!    During the first few iterations nodes may skip an update (partial
//!    updates); a skipped node stays silent and the CUs reuse its last
//!    values.
//! 3. The CUs update the duals and the four residual norms decide stopping.
//!
//! All broadcasts go through [`MessageLog`], which is what the message
//! accounting tests and the exported transcript read.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity::capacity;
use crate::channel::{ring_spectrum_classes, ChannelModel, ReuseFactor};
use crate::layered::{norm2, residual_threshold};
use crate::planes::{TangentPlaneModel, DEFAULT_PLANE_BUDGET, RELINEARIZE_MERGE_WIDTH};
use crate::projection::{project_capped_simplex, waterfill_threshold};
use crate::qp::{solve_qp, QpError, QpProblem, Quadratic};
use crate::routing::{solve_flow_update, RoutingError};
use crate::scenario::ScenarioConfig;
use crate::solution::GlobalSolution;
use crate::topology::{Link, NetworkTopology};

/// Flows below this are pruning candidates (Mbps; 10 Kbps).
pub const DEFAULT_FLOW_FLOOR: f64 = 0.01;

#[derive(Clone, Debug)]
pub struct DeviceOptions {
    pub rho: f64,
    pub max_iters: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub plane_budget: usize,
    pub epsilon_power: f64,
    /// Iterations during which nodes may skip their update.
    pub partial_update_iters: usize,
    /// Probability that a node skips during the partial-update phase.
    pub partial_update_prob: f64,
    /// Seed for the skip draws.
    pub rng_seed: u64,
}

impl Default for DeviceOptions {
    fn default() -> Self {
        Self {
            rho: 0.5,
            max_iters: 2000,
            eps_abs: 1e-4,
            eps_rel: 1e-3,
            plane_budget: DEFAULT_PLANE_BUDGET,
            epsilon_power: 1e-6,
            partial_update_iters: 5,
            partial_update_prob: 0.5,
            rng_seed: 0,
        }
    }
}

impl DeviceOptions {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        Self {
            epsilon_power: config.epsilon_power,
            rng_seed: config.rng_seed,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sender {
    Cu1,
    Cu2,
    Node(usize),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MessageRecord {
    pub iteration: usize,
    pub sender: Sender,
    pub payload: Vec<f64>,
}

impl MessageRecord {
    /// Wire size estimate: doubles only.
    pub fn bytes(&self) -> usize {
        8 * self.payload.len()
    }
}

#[derive(Clone, Debug, Default)]
pub struct MessageLog {
    pub records: Vec<MessageRecord>,
}

impl MessageLog {
    pub fn total_bytes(&self) -> usize {
        self.records.iter().map(MessageRecord::bytes).sum()
    }

    /// Scalars broadcast by the two coordination units in one iteration.
    pub fn cu_scalars(&self, iteration: usize) -> usize {
        self.records
            .iter()
            .filter(|r| r.iteration == iteration && matches!(r.sender, Sender::Cu1 | Sender::Cu2))
            .map(|r| r.payload.len())
            .sum()
    }

    /// Scalars broadcast by nodes in one iteration.
    pub fn node_scalars(&self, iteration: usize) -> usize {
        self.records
            .iter()
            .filter(|r| r.iteration == iteration && matches!(r.sender, Sender::Node(_)))
            .map(|r| r.payload.len())
            .sum()
    }

    pub fn senders(&self, iteration: usize) -> Vec<Sender> {
        self.records
            .iter()
            .filter(|r| r.iteration == iteration)
            .map(|r| r.sender)
            .collect()
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        for record in &self.records {
            serde_json::to_writer(&mut out, record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Channel mutation applied between iterations while a network runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// Per-node factors; each link's noise density scales by the factor of
    /// its receiving node.
    NoiseRescale { factors: Vec<f64> },
    /// Per-link gain factors.
    GainRescale { factors: Vec<f64> },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelEvent {
    pub at_iteration: usize,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventSchedule {
    events: Vec<ChannelEvent>,
}

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("event iterations must start at 1 and strictly increase (event {index})")]
    NotIncreasing { index: usize },
    #[error("event {index} has a non-positive factor")]
    BadFactor { index: usize },
}

impl EventSchedule {
    pub fn new(events: Vec<ChannelEvent>) -> Result<Self, ScheduleError> {
        if events.first().map(|e| e.at_iteration == 0).unwrap_or(false) {
            return Err(ScheduleError::NotIncreasing { index: 0 });
        }
        for (i, pair) in events.windows(2).enumerate() {
            if pair[1].at_iteration <= pair[0].at_iteration {
                return Err(ScheduleError::NotIncreasing { index: i + 1 });
            }
        }
        for (i, ev) in events.iter().enumerate() {
            let factors = match &ev.kind {
                EventKind::NoiseRescale { factors } => factors,
                EventKind::GainRescale { factors } => factors,
            };
            if factors.iter().any(|&f| !(f > 0.0)) {
                return Err(ScheduleError::BadFactor { index: i });
            }
        }
        Ok(Self { events })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn events(&self) -> &[ChannelEvent] {
        &self.events
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        Self::new(self.events.clone()).map(|_| ())
    }
}

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error("node {node} subproblem failed: {source}")]
    Node {
        node: usize,
        #[source]
        source: QpError,
    },
    #[error("event schedule invalid: {0}")]
    Schedule(#[from] ScheduleError),
}

/// Everything a node knows when solving its own subproblem: broadcast
/// targets for its outgoing links and share, plus its local channel state.
#[derive(Clone, Debug)]
pub struct NodeInputs<'a> {
    /// `x_l + u_l` per outgoing link.
    pub flow_targets: &'a [f64],
    /// `v_n + y_n`.
    pub share_target: f64,
    /// Channel gain per outgoing link.
    pub gains: &'a [f64],
    /// Noise density per outgoing link.
    pub sigmas: &'a [f64],
    pub gamma: f64,
    pub p_max: f64,
    pub w_scale: f64,
    pub rho: f64,
    pub epsilon_power: f64,
    /// Capacity-model slack above which the solution anchors a new plane.
    pub refine_tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeUpdate {
    pub t: Vec<f64>,
    pub powers: Vec<f64>,
    pub bandwidths: Vec<f64>,
    pub share: f64,
}

/// Relinearization rounds a node may spend settling one local step.
const NODE_SETTLE_ROUNDS: usize = 60;

/// One node's local step: fit its link rates and bandwidth share to the
/// broadcast targets subject to its own power budget, the density cap and
/// its current capacity planes, relinearizing the planes at the iterate
/// until the hull stops over-promising there.
///
/// The result is a function of `inputs` and `planes` only.
pub fn node_subproblem(
    inputs: &NodeInputs,
    planes: &mut [TangentPlaneModel],
) -> Result<NodeUpdate, QpError> {
    let k = inputs.flow_targets.len();
    assert_eq!(planes.len(), k);
    assert_eq!(inputs.gains.len(), k);
    assert_eq!(inputs.sigmas.len(), k);

    // Variables: [t(k), p(k), w(k), b].
    let ti = |i: usize| i;
    let pi = |i: usize| k + i;
    let wi = |i: usize| 2 * k + i;
    let bi = 3 * k;
    let n = 3 * k + 1;

    let mut last: Option<NodeUpdate> = None;
    // (p, w) have no prox curvature of their own; a faint pull toward the
    // previous round keeps them from hopping between tying vertices while
    // the hull refines. The pull vanishes once the round settles.
    let damp = inputs.rho * 1e-3;
    for _ in 0..NODE_SETTLE_ROUNDS {
        let mut problem = QpProblem::new(n);
        let mut diag = vec![0.0; n];
        for i in 0..k {
            diag[ti(i)] = inputs.rho;
            problem.linear[ti(i)] = -inputs.rho * inputs.flow_targets[i];
            problem.linear[pi(i)] = inputs.epsilon_power;
        }
        diag[bi] = inputs.rho;
        problem.linear[bi] = -inputs.rho * inputs.share_target;
        if let Some(prev) = &last {
            for i in 0..k {
                diag[pi(i)] += damp;
                problem.linear[pi(i)] -= damp * prev.powers[i];
                diag[wi(i)] += damp;
                problem.linear[wi(i)] -= damp * prev.bandwidths[i];
            }
        }
        problem.quad = Quadratic::Diag(diag);
        for i in 0..n {
            problem.nonneg[i] = true;
        }

        for i in 0..k {
            for plane in planes[i].planes() {
                problem.ineq.push((
                    vec![(ti(i), 1.0), (pi(i), -plane.slope_p), (wi(i), -plane.slope_w)],
                    plane.offset,
                ));
            }
            if inputs.gamma.is_finite() {
                problem.ineq.push((vec![(pi(i), 1.0), (wi(i), -inputs.gamma)], 0.0));
            }
        }
        problem.ineq.push(((0..k).map(|i| (pi(i), 1.0)).collect(), inputs.p_max));
        // The node's links split exactly its share: sum w - b = 0.
        let mut row: Vec<(usize, f64)> = (0..k).map(|i| (wi(i), 1.0)).collect();
        row.push((bi, -1.0));
        problem.eq.push((row, 0.0));

        let sol = solve_qp(&problem, 1e-9)?;
        let update = NodeUpdate {
            t: (0..k).map(|i| sol.x[ti(i)].max(0.0)).collect(),
            powers: (0..k).map(|i| sol.x[pi(i)].max(0.0)).collect(),
            bandwidths: (0..k).map(|i| sol.x[wi(i)].max(0.0)).collect(),
            share: sol.x[bi].max(0.0),
        };
        let mut violation = 0f64;
        for i in 0..k {
            let cap = capacity(
                update.bandwidths[i],
                update.powers[i],
                inputs.gains[i],
                inputs.sigmas[i],
            );
            violation = violation.max(update.t[i] - cap);
        }
        let done = violation <= inputs.refine_tol;
        // New planes only where the hull is wrong; refining violation-free
        // rounds churns the eviction budget for nothing.
        for i in 0..k {
            planes[i].mark_tight(update.powers[i], update.bandwidths[i]);
            if !done {
                let (ap, aw) = crate::reference::refine_anchor(
                    update.powers[i],
                    update.bandwidths[i],
                    inputs.w_scale,
                );
                planes[i].refine(inputs.gains[i], inputs.sigmas[i], ap, aw);
            }
        }
        last = Some(update);
        if done {
            break;
        }
    }
    Ok(last.expect("at least one settle round"))
}

/// CU2's block: project share targets `b - y` onto the ring spectrum
/// structure, choosing the per-class slice widths along the way.
///
/// For a fixed slice vector the per-ring pieces are exact capped-simplex
/// projections, and optimality across slices means the water levels are
/// equal (or a slice is empty), so the slice vector reduces to a scalar
/// search over that common level.
#[derive(Clone, Debug)]
pub struct ShareProjection {
    /// Per-node shares; entry 0 is unused.
    pub shares: Vec<f64>,
    pub class_bandwidths: Vec<f64>,
}

pub fn bandwidth_projection(
    targets: &[f64],
    topology: &NetworkTopology,
    reuse: ReuseFactor,
    w_max: f64,
) -> ShareProjection {
    assert_eq!(targets.len(), topology.num_nodes());
    let (classes, num_classes) = ring_spectrum_classes(reuse, topology.num_groups);
    let members = topology.ring_members();
    let group_targets: Vec<Vec<f64>> = (0..=topology.num_groups)
        .map(|g| if g == 0 { Vec::new() } else { members[g].iter().map(|&n| targets[n]).collect() })
        .collect();
    let groups_in_class: Vec<Vec<usize>> = (0..num_classes)
        .map(|c| (1..=topology.num_groups).filter(|&g| classes[g - 1] == c).collect())
        .collect();

    let need: Vec<f64> = (0..num_classes)
        .map(|c| {
            groups_in_class[c]
                .iter()
                .map(|&g| group_targets[g].iter().map(|&t| t.max(0.0)).sum::<f64>())
                .fold(0.0, f64::max)
        })
        .collect();

    let mut widths = vec![0.0; num_classes];
    let total_need: f64 = need.iter().sum();
    if total_need <= w_max {
        // Every ring fits; spread the slack evenly so the slices still
        // partition the whole spectrum.
        let slack = (w_max - total_need) / num_classes as f64;
        for c in 0..num_classes {
            widths[c] = need[c] + slack;
        }
    } else {
        // Water level per class: sum of its rings' fill thresholds at slice
        // width s, a continuous decreasing function of s.
        let level = |c: usize, s: f64| -> f64 {
            groups_in_class[c]
                .iter()
                .map(|&g| waterfill_threshold(&group_targets[g], s))
                .sum()
        };
        let width_at = |c: usize, mu: f64| -> f64 {
            if level(c, 0.0) <= mu {
                return 0.0;
            }
            let (mut lo, mut hi) = (0.0, need[c]);
            for _ in 0..90 {
                let mid = 0.5 * (lo + hi);
                if level(c, mid) > mu {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let mu_max = (0..num_classes).map(|c| level(c, 0.0)).fold(0.0, f64::max);
        let (mut lo, mut hi) = (0.0, mu_max);
        for _ in 0..90 {
            let mu = 0.5 * (lo + hi);
            let total: f64 = (0..num_classes).map(|c| width_at(c, mu)).sum();
            if total > w_max {
                lo = mu;
            } else {
                hi = mu;
            }
        }
        let mu = 0.5 * (lo + hi);
        for c in 0..num_classes {
            widths[c] = width_at(c, mu);
        }
        // Bisection leaves a tiny gap; absorb it in the widest slice so the
        // partition is exact.
        let total: f64 = widths.iter().sum();
        let widest = (0..num_classes)
            .max_by(|&a, &b| widths[a].total_cmp(&widths[b]))
            .expect("at least one class");
        widths[widest] = (widths[widest] + w_max - total).max(0.0);
    }

    let mut shares = vec![0.0; topology.num_nodes()];
    for g in 1..=topology.num_groups {
        let projected = project_capped_simplex(&group_targets[g], widths[classes[g - 1]]);
        for (i, &node) in members[g].iter().enumerate() {
            shares[node] = projected[i];
        }
    }
    ShareProjection { shares, class_bandwidths: widths }
}

#[derive(Clone, Copy, Debug)]
pub struct DeviceTraceRow {
    pub iteration: usize,
    pub objective: f64,
    /// `||x - t||`.
    pub flow_gap: f64,
    /// `||v - b||`.
    pub share_gap: f64,
    /// `rho ||t - t_prev||`.
    pub flow_drift: f64,
    /// `rho ||b - b_prev||`.
    pub share_drift: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct StopReport {
    pub flow_gap: f64,
    pub share_gap: f64,
    pub flow_drift: f64,
    pub share_drift: f64,
    pub eps_flow_gap: f64,
    pub eps_share_gap: f64,
    pub eps_flow_drift: f64,
    pub eps_share_drift: f64,
}

impl StopReport {
    pub fn all_pass(&self) -> bool {
        self.flow_gap <= self.eps_flow_gap
            && self.share_gap <= self.eps_share_gap
            && self.flow_drift <= self.eps_flow_drift
            && self.share_drift <= self.eps_share_drift
    }
}

/// The running per-device decomposition: CU copies, node copies, duals and
/// per-node plane state.
#[derive(Clone)]
pub struct DeviceAdmm {
    topology: NetworkTopology,
    channel: ChannelModel,
    options: DeviceOptions,
    /// CU1 flow copy per link.
    x: Vec<f64>,
    /// CU2 share copy per node (entry 0 unused).
    v: Vec<f64>,
    /// Node-side rate copy per link.
    t: Vec<f64>,
    /// Node-side share per node.
    b: Vec<f64>,
    /// Flow duals per link.
    u: Vec<f64>,
    /// Share duals per node.
    y: Vec<f64>,
    powers: Vec<f64>,
    bandwidths: Vec<f64>,
    class_bandwidths: Vec<f64>,
    /// Per node: plane models for its outgoing links, in `out_links` order.
    planes: Vec<Vec<TangentPlaneModel>>,
    rng: ChaCha20Rng,
    iteration: usize,
    last_stop: Option<StopReport>,
    trace: Vec<DeviceTraceRow>,
    log: MessageLog,
}

impl DeviceAdmm {
    pub fn new(topology: &NetworkTopology, channel: &ChannelModel, options: DeviceOptions) -> Self {
        let l = topology.num_links();
        let n = topology.num_nodes();
        let w_ref = if l > 0 { channel.w_max / l as f64 } else { channel.w_max };
        let planes = (0..n)
            .map(|node| {
                topology.out_links[node]
                    .iter()
                    .map(|&link| {
                        let mut model = TangentPlaneModel::with_merge(
                            options.plane_budget,
                            RELINEARIZE_MERGE_WIDTH,
                        );
                        crate::reference::seed_planes(
                            &mut model,
                            channel.gains[link],
                            channel.sigma[link],
                            channel,
                            w_ref,
                        );
                        model
                    })
                    .collect()
            })
            .collect();
        let (_, num_classes) = ring_spectrum_classes(channel.reuse, topology.num_groups);
        let rng = ChaCha20Rng::seed_from_u64(options.rng_seed);
        Self {
            topology: topology.clone(),
            channel: channel.clone(),
            x: vec![0.0; l],
            v: vec![0.0; n],
            t: vec![1.0; l],
            b: vec![1.0; n],
            u: vec![0.0; l],
            y: vec![0.0; n],
            powers: vec![0.0; l],
            bandwidths: vec![0.0; l],
            class_bandwidths: vec![channel.w_max / num_classes.max(1) as f64; num_classes],
            planes,
            rng,
            options,
            iteration: 0,
            last_stop: None,
            trace: Vec::new(),
            log: MessageLog::default(),
        }
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn trace(&self) -> &[DeviceTraceRow] {
        &self.trace
    }

    pub fn message_log(&self) -> &MessageLog {
        &self.log
    }

    pub fn channel(&self) -> &ChannelModel {
        &self.channel
    }

    pub fn converged(&self) -> bool {
        self.last_stop.map(|s| s.all_pass()).unwrap_or(false)
    }

    pub fn last_stop(&self) -> Option<StopReport> {
        self.last_stop
    }

    /// Applies a channel mutation. Affected links drop their stale
    /// linearizations and reseed at their current operating point.
    pub fn apply_event(&mut self, kind: &EventKind) {
        let mut touched = vec![false; self.topology.num_links()];
        match kind {
            EventKind::NoiseRescale { factors } => {
                assert_eq!(factors.len(), self.topology.num_nodes(), "one factor per node");
                for (l, link) in self.topology.links.iter().enumerate() {
                    self.channel.sigma[l] *= factors[link.dest];
                    touched[l] = true;
                }
            }
            EventKind::GainRescale { factors } => {
                assert_eq!(factors.len(), self.topology.num_links(), "one factor per link");
                for (l, factor) in factors.iter().enumerate() {
                    if (factor - 1.0).abs() > 0.0 {
                        self.channel.gains[l] *= factor;
                        touched[l] = true;
                    }
                }
            }
        }
        let w_ref = self.channel.w_max / self.topology.num_links().max(1) as f64;
        for node in 0..self.topology.num_nodes() {
            for (slot, &link) in self.topology.out_links[node].iter().enumerate() {
                if !touched[link] {
                    continue;
                }
                let model = &mut self.planes[node][slot];
                model.reset();
                crate::reference::seed_planes(
                    model,
                    self.channel.gains[link],
                    self.channel.sigma[link],
                    &self.channel,
                    w_ref,
                );
                if self.powers[link] > 0.0 || self.bandwidths[link] > 0.0 {
                    let (ap, aw) = crate::reference::refine_anchor(
                        self.powers[link],
                        self.bandwidths[link],
                        self.channel.w_max,
                    );
                    model.refine(self.channel.gains[link], self.channel.sigma[link], ap, aw);
                }
            }
        }
        // Fresh perturbation, fresh stopping state.
        self.last_stop = None;
    }

    /// One synchronous iteration. Returns the stop report for the iteration.
    pub fn step(&mut self) -> Result<StopReport, DeviceError> {
        let l = self.topology.num_links();
        let n = self.topology.num_nodes();
        self.iteration += 1;
        let iteration = self.iteration;

        // CU block from the previous node snapshot.
        let flow_targets: Vec<f64> = (0..l).map(|i| self.t[i] - self.u[i]).collect();
        let update = solve_flow_update(&self.topology, &flow_targets, self.options.rho)?;
        self.x = update.flows;
        let share_targets: Vec<f64> = (0..n).map(|i| self.b[i] - self.y[i]).collect();
        let projection =
            bandwidth_projection(&share_targets, &self.topology, self.channel.reuse, self.channel.w_max);
        self.v = projection.shares;
        self.class_bandwidths = projection.class_bandwidths;

        self.log.records.push(MessageRecord {
            iteration,
            sender: Sender::Cu1,
            payload: (0..l).map(|i| self.x[i] + self.u[i]).collect(),
        });
        self.log.records.push(MessageRecord {
            iteration,
            sender: Sender::Cu2,
            payload: (1..n).map(|i| self.v[i] + self.y[i]).collect(),
        });

        // Node block: every participating node solves its local QP from the
        // broadcast values.
        let partial = iteration <= self.options.partial_update_iters;
        let skip: Vec<bool> = (1..n)
            .map(|_| partial && self.rng.gen::<f64>() < self.options.partial_update_prob)
            .collect();

        let cu1_payload: Vec<f64> = (0..l).map(|i| self.x[i] + self.u[i]).collect();
        let cu2_payload: Vec<f64> = (0..n).map(|i| self.v[i] + self.y[i]).collect();

        struct NodeOut {
            node: usize,
            update: NodeUpdate,
        }
        let topology = &self.topology;
        let channel = &self.channel;
        let options = &self.options;
        let results: Vec<Option<Result<NodeOut, DeviceError>>> = self
            .planes
            .par_iter_mut()
            .enumerate()
            .map(|(node, planes)| {
                if node == 0 || skip[node - 1] {
                    return None;
                }
                let out_links = &topology.out_links[node];
                let flow_targets: Vec<f64> =
                    out_links.iter().map(|&link| cu1_payload[link]).collect();
                let gains: Vec<f64> = out_links.iter().map(|&link| channel.gains[link]).collect();
                let sigmas: Vec<f64> = out_links.iter().map(|&link| channel.sigma[link]).collect();
                let inputs = NodeInputs {
                    flow_targets: &flow_targets,
                    share_target: cu2_payload[node],
                    gains: &gains,
                    sigmas: &sigmas,
                    gamma: channel.gamma,
                    p_max: channel.p_max,
                    w_scale: channel.w_max,
                    rho: options.rho,
                    epsilon_power: options.epsilon_power,
                    refine_tol: options.eps_abs / 10.0,
                };
                Some(
                    node_subproblem(&inputs, planes)
                        .map(|update| NodeOut { node, update })
                        .map_err(|source| DeviceError::Node { node, source }),
                )
            })
            .collect();

        let b_prev = self.b.clone();
        let t_prev = self.t.clone();
        for result in results.into_iter().flatten() {
            let NodeOut { node, update } = result?;
            let mut payload = Vec::with_capacity(update.t.len() + 1);
            for (slot, &link) in self.topology.out_links[node].iter().enumerate() {
                self.t[link] = update.t[slot];
                self.powers[link] = update.powers[slot];
                self.bandwidths[link] = update.bandwidths[slot];
                payload.push(update.t[slot]);
            }
            payload.push(update.share);
            self.b[node] = update.share;
            self.log.records.push(MessageRecord { iteration, sender: Sender::Node(node), payload });
        }

        // Dual updates at the CUs.
        for i in 0..l {
            self.u[i] += self.x[i] - self.t[i];
        }
        for i in 1..n {
            self.y[i] += self.v[i] - self.b[i];
        }

        let flow_gap = norm2(&(0..l).map(|i| self.x[i] - self.t[i]).collect::<Vec<_>>());
        let share_gap = norm2(&(1..n).map(|i| self.v[i] - self.b[i]).collect::<Vec<_>>());
        let flow_drift =
            self.options.rho * norm2(&(0..l).map(|i| self.t[i] - t_prev[i]).collect::<Vec<_>>());
        let share_drift =
            self.options.rho * norm2(&(1..n).map(|i| self.b[i] - b_prev[i]).collect::<Vec<_>>());

        let eps_abs = self.options.eps_abs;
        let eps_rel = self.options.eps_rel;
        let users = n - 1;
        // Same scaled threshold for a pair's gap and drift residuals.
        let eps_flow = residual_threshold(l, eps_abs, eps_rel, norm2(&self.x).max(norm2(&self.t)));
        let eps_share =
            residual_threshold(users, eps_abs, eps_rel, norm2(&self.v).max(norm2(&self.b)));
        let report = StopReport {
            flow_gap,
            share_gap,
            flow_drift,
            share_drift,
            eps_flow_gap: eps_flow,
            eps_share_gap: eps_share,
            eps_flow_drift: eps_flow,
            eps_share_drift: eps_share,
        };
        self.last_stop = Some(report);

        let rates = self.topology.node_rates(&self.x);
        let objective = rates.iter().skip(1).copied().fold(f64::INFINITY, f64::min);
        self.trace.push(DeviceTraceRow {
            iteration,
            objective,
            flow_gap,
            share_gap,
            flow_drift,
            share_drift,
        });
        Ok(report)
    }

    /// Steps until the four residuals pass or the budget runs out. Returns
    /// the number of iterations used in this call.
    pub fn run_to_convergence(&mut self, max_iters: usize) -> Result<usize, DeviceError> {
        for used in 1..=max_iters {
            let report = self.step()?;
            if self.iteration > self.options.partial_update_iters && report.all_pass() {
                return Ok(used);
            }
        }
        Ok(max_iters)
    }

    /// Feasible allocation from the current state.
    ///
    /// Node-side bandwidth sums can overshoot a ring slice by the residual
    /// gap, so bandwidths are scaled per ring onto the slice, powers are
    /// re-capped by the density bound and flows are clipped to the exact
    /// capacity at the restored radio variables.
    pub fn solution(&self) -> GlobalSolution {
        let l = self.topology.num_links();
        let (classes, _) = ring_spectrum_classes(self.channel.reuse, self.topology.num_groups);
        let members = self.topology.ring_members();

        let mut bandwidths = self.bandwidths.clone();
        for g in 1..=self.topology.num_groups {
            let used: f64 = members[g]
                .iter()
                .flat_map(|&node| self.topology.out_links[node].iter())
                .map(|&link| self.bandwidths[link])
                .sum();
            let slice = self.class_bandwidths[classes[g - 1]];
            if used > slice && used > 0.0 {
                let scale = slice / used;
                for &node in &members[g] {
                    for &link in &self.topology.out_links[node] {
                        bandwidths[link] *= scale;
                    }
                }
            }
        }
        let mut powers = self.powers.clone();
        if self.channel.gamma.is_finite() {
            for link in 0..l {
                powers[link] = powers[link].min(self.channel.gamma * bandwidths[link]);
            }
        }
        let mut flows = Vec::with_capacity(l);
        for link in 0..l {
            let cap = capacity(
                bandwidths[link],
                powers[link],
                self.channel.gains[link],
                self.channel.sigma[link],
            );
            flows.push(self.x[link].min(self.t[link]).min(cap).max(0.0));
        }
        GlobalSolution::assemble(
            &self.topology,
            &self.channel,
            flows,
            powers,
            bandwidths,
            self.class_bandwidths.clone(),
        )
    }
}

#[derive(Clone, Debug)]
pub struct DeviceRun {
    pub solution: GlobalSolution,
    pub trace: Vec<DeviceTraceRow>,
    pub iterations: usize,
    pub converged: bool,
    pub message_bytes: usize,
}

/// Full run helper: steps the decomposition, applying scheduled channel
/// events at their iterations, until it converges with no events pending.
pub fn run_device(
    topology: &NetworkTopology,
    channel: &ChannelModel,
    options: &DeviceOptions,
    schedule: &EventSchedule,
) -> Result<(DeviceRun, MessageLog), DeviceError> {
    schedule.validate()?;
    if topology.num_users() == 0 {
        let solution = GlobalSolution::empty(topology, channel);
        return Ok((
            DeviceRun {
                solution,
                trace: Vec::new(),
                iterations: 0,
                converged: true,
                message_bytes: 0,
            },
            MessageLog::default(),
        ));
    }
    let mut admm = DeviceAdmm::new(topology, channel, options.clone());
    let mut pending = schedule.events().iter().peekable();
    let mut converged = false;
    for _ in 0..options.max_iters {
        while pending.peek().map(|e| e.at_iteration == admm.iteration() + 1).unwrap_or(false) {
            let event = pending.next().expect("peeked");
            admm.apply_event(&event.kind);
        }
        let report = admm.step()?;
        let warmup = admm.iteration() <= options.partial_update_iters;
        if !warmup && report.all_pass() && pending.peek().is_none() {
            converged = true;
            break;
        }
    }
    let run = DeviceRun {
        solution: admm.solution(),
        trace: admm.trace.clone(),
        iterations: admm.iteration(),
        converged,
        message_bytes: admm.log.total_bytes(),
    };
    Ok((run, admm.log))
}

/// Removes links whose flow fell below `floor`, keeping (and flagging) any
/// link whose removal would cut a user off.
#[derive(Clone, Debug)]
pub struct PruneReport {
    pub topology: NetworkTopology,
    /// Removed links as (old index, link).
    pub removed: Vec<(usize, Link)>,
    /// Links below the floor that had to stay to keep users connected.
    pub flagged: Vec<(usize, Link)>,
}

pub fn prune_links(topology: &NetworkTopology, flows: &[f64], floor: f64) -> PruneReport {
    assert_eq!(flows.len(), topology.num_links());
    let mut alive = vec![true; topology.num_links()];
    let mut candidates: Vec<usize> =
        (0..topology.num_links()).filter(|&l| flows[l] < floor).collect();
    candidates.sort_by(|&a, &b| flows[a].total_cmp(&flows[b]));

    let mut removed = Vec::new();
    let mut flagged = Vec::new();
    for link in candidates {
        alive[link] = false;
        if topology.all_users_connected(&alive) {
            removed.push((link, topology.links[link]));
        } else {
            alive[link] = true;
            flagged.push((link, topology.links[link]));
        }
    }

    let kept: Vec<Link> =
        (0..topology.num_links()).filter(|&l| alive[l]).map(|l| topology.links[l]).collect();
    let n = topology.num_nodes();
    let mut out_links = vec![Vec::new(); n];
    let mut in_links = vec![Vec::new(); n];
    for (l, link) in kept.iter().enumerate() {
        out_links[link.source].push(l);
        in_links[link.dest].push(l);
    }
    let pruned = NetworkTopology {
        positions: topology.positions.clone(),
        group_of: topology.group_of.clone(),
        num_groups: topology.num_groups,
        links: kept,
        out_links,
        in_links,
    };
    PruneReport { topology: pruned, removed, flagged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioConfig;

    fn chain_fixture() -> (NetworkTopology, ChannelModel) {
        let positions = vec![(0.0, 0.0), (50.0, 0.0), (90.0, 0.0)];
        let groups = vec![0, 1, 2];
        let topology = NetworkTopology::assemble(positions, groups, 2, 0.3, 80.0).unwrap();
        let config = ScenarioConfig {
            num_users: 2,
            reuse_factor_f: ReuseFactor::Infinite,
            ..ScenarioConfig::default()
        };
        let channel = ChannelModel::build(&topology, &config).unwrap();
        (topology, channel)
    }

    #[test]
    fn chain_converges_and_verifies() {
        let (topology, channel) = chain_fixture();
        let (run, _) =
            run_device(&topology, &channel, &DeviceOptions::default(), &EventSchedule::empty())
                .unwrap();
        assert!(run.converged, "did not converge in {} iterations", run.iterations);
        let report = crate::solution::verify_solution(&run.solution, &topology, &channel);
        assert!(report.passes(1e-6), "{report}");
        assert!(run.solution.objective > 0.0);
    }

    #[test]
    fn message_counts_match_structure() {
        let (topology, channel) = chain_fixture();
        let options = DeviceOptions { partial_update_iters: 0, ..DeviceOptions::default() };
        let (run, log) = run_device(&topology, &channel, &options, &EventSchedule::empty()).unwrap();
        let l = topology.num_links();
        let users = topology.num_users();
        let node_payloads: usize =
            (1..topology.num_nodes()).map(|n| topology.out_links[n].len() + 1).sum();
        for iter in 1..=run.iterations {
            assert_eq!(log.cu_scalars(iter), l + users);
            assert_eq!(log.node_scalars(iter), node_payloads);
        }
    }

    #[test]
    fn partial_updates_silence_some_nodes() {
        let (topology, channel) = chain_fixture();
        let options = DeviceOptions {
            partial_update_iters: 8,
            partial_update_prob: 0.9,
            rng_seed: 3,
            ..DeviceOptions::default()
        };
        let (_, log) = run_device(&topology, &channel, &options, &EventSchedule::empty()).unwrap();
        let early_nodes: usize = (1..=8)
            .map(|iter| {
                log.senders(iter).iter().filter(|s| matches!(s, Sender::Node(_))).count()
            })
            .sum();
        assert!(early_nodes < 16, "expected skipped node updates, saw {early_nodes}");
    }

    #[test]
    fn schedule_rejects_non_increasing_iterations() {
        let events = vec![
            ChannelEvent {
                at_iteration: 10,
                kind: EventKind::GainRescale { factors: vec![1.0, 1.0] },
            },
            ChannelEvent {
                at_iteration: 10,
                kind: EventKind::GainRescale { factors: vec![1.0, 1.0] },
            },
        ];
        assert!(matches!(
            EventSchedule::new(events),
            Err(ScheduleError::NotIncreasing { index: 1 })
        ));
    }

    #[test]
    fn prune_respects_connectivity() {
        // Node 2 relays through node 1 on its only link: that link can't go
        // even with zero flow.
        let (topology, _) = chain_fixture();
        let report = prune_links(&topology, &[0.5, 0.001], 0.01);
        assert!(report.removed.is_empty());
        assert_eq!(report.flagged.len(), 1);
        assert_eq!(report.topology.num_links(), 2);
    }

    #[test]
    fn prune_drops_redundant_low_flow_links() {
        // Two parallel relays for node 3: one carries traffic, one is idle.
        let positions = vec![(0.0, 0.0), (50.0, 5.0), (50.0, -5.0), (95.0, 0.0)];
        let groups = vec![0, 1, 1, 2];
        let topology = NetworkTopology::assemble(positions, groups, 2, 0.5, 80.0).unwrap();
        assert_eq!(topology.num_links(), 4);
        let report = prune_links(&topology, &[0.5, 0.5, 0.6, 0.0001], 0.01);
        assert_eq!(report.removed.len(), 1);
        assert_eq!(report.topology.num_links(), 3);
        assert!(report.flagged.is_empty());
    }
}

impl DeviceAdmm {
    /// Raw state peek for diagnostics: (x, t, u, v, b, y, class widths).
    #[doc(hidden)]
    pub fn debug_state(
        &self,
    ) -> (&[f64], &[f64], &[f64], &[f64], &[f64], &[f64], &[f64]) {
        (&self.x, &self.t, &self.u, &self.v, &self.b, &self.y, &self.class_bandwidths)
    }

    /// Raw per-link radio state peek: (powers, bandwidths).
    #[doc(hidden)]
    pub fn debug_radio(&self) -> (&[f64], &[f64]) {
        (&self.powers, &self.bandwidths)
    }
}
