//! Two-block ADMM split between the network and physical layers.
//!
//! The network layer holds the flow copy `x` and maximizes the worst user
//! rate; the physical layer holds its own copy `t` limited by link capacity,
//! power budgets and the ring spectrum structure. A scaled dual `u` ties the
//! copies together:
//!
//! 1. `x  <- argmax  nu - (rho/2)||x - (t - u)||^2` over the flow polytope,
//! 2. `t, p, w, W <- argmin (rho/2)||t - (x + u)||^2` over the radio set,
//! 3. `u  <- u + x - t`.
//!
//! Step 2 keeps the capacity bound as a working set of tangent planes and
//! relinearizes inside its own loop, one order tighter than the outer
//! stopping tolerance.

use thiserror::Error;

use crate::capacity::capacity;
use crate::channel::{ring_spectrum_classes, ChannelModel};
use crate::planes::{TangentPlaneModel, DEFAULT_PLANE_BUDGET, RELINEARIZE_MERGE_WIDTH};
use crate::qp::{solve_qp, QpError, QpProblem, Quadratic};
use crate::reference::{refine_anchor, seed_planes};
use crate::routing::{solve_flow_update, RoutingError};
use crate::scenario::ScenarioConfig;
use crate::solution::GlobalSolution;
use crate::topology::NetworkTopology;

#[derive(Clone, Debug)]
pub struct LayeredOptions {
    pub rho: f64,
    pub max_iters: usize,
    /// Absolute floor of the scaled residual thresholds.
    pub eps_abs: f64,
    /// Relative part of the scaled residual thresholds.
    pub eps_rel: f64,
    pub plane_budget: usize,
    pub epsilon_power: f64,
    /// Cap on relinearization rounds inside one physical-layer step.
    pub max_inner_rounds: usize,
}

impl Default for LayeredOptions {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iters: 500,
            eps_abs: 1e-4,
            eps_rel: 1e-3,
            plane_budget: DEFAULT_PLANE_BUDGET,
            epsilon_power: 1e-6,
            max_inner_rounds: 200,
        }
    }
}

impl LayeredOptions {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        Self { epsilon_power: config.epsilon_power, ..Self::default() }
    }

    fn inner_tol(&self) -> f64 {
        self.eps_abs / 10.0
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TraceRow {
    pub iteration: usize,
    /// Worst user rate implied by the network-side flows (Mbps).
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

#[derive(Clone, Debug)]
pub struct LayeredRun {
    pub solution: GlobalSolution,
    pub trace: Vec<TraceRow>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Error)]
pub enum LayeredError {
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error("physical layer step failed: {0}")]
    Qp(#[from] QpError),
    #[error("physical layer linearization stalled (violation {violation:.3e} after {rounds} rounds)")]
    InnerStall { rounds: usize, violation: f64 },
}

/// Physical-layer block: projects the flow targets onto the radio-feasible
/// region, choosing powers, bandwidths and the spectrum split along the way.
pub struct PhysicalLayer<'a> {
    topology: &'a NetworkTopology,
    channel: &'a ChannelModel,
    planes: Vec<TangentPlaneModel>,
    classes: Vec<usize>,
    num_classes: usize,
}

#[derive(Clone, Debug)]
pub struct PhysicalUpdate {
    pub t: Vec<f64>,
    pub powers: Vec<f64>,
    pub bandwidths: Vec<f64>,
    pub class_bandwidths: Vec<f64>,
}

impl<'a> PhysicalLayer<'a> {
    pub fn new(
        topology: &'a NetworkTopology,
        channel: &'a ChannelModel,
        plane_budget: usize,
    ) -> Self {
        let l = topology.num_links();
        let w_ref = if l > 0 { channel.w_max / l as f64 } else { channel.w_max };
        let planes = (0..l)
            .map(|link| {
                let mut model =
                    TangentPlaneModel::with_merge(plane_budget, RELINEARIZE_MERGE_WIDTH);
                seed_planes(&mut model, channel.gains[link], channel.sigma[link], channel, w_ref);
                model
            })
            .collect();
        let (classes, num_classes) = ring_spectrum_classes(channel.reuse, topology.num_groups);
        Self { topology, channel, planes, classes, num_classes }
    }

    /// One block update: minimize `(rho/2)||t - targets||^2` plus the power
    /// tiebreak over the radio constraints, relinearizing capacity until the
    /// iterate's true violation is below `inner_tol`.
    pub fn step(
        &mut self,
        targets: &[f64],
        rho: f64,
        epsilon_power: f64,
        inner_tol: f64,
        max_rounds: usize,
    ) -> Result<PhysicalUpdate, LayeredError> {
        let l = self.topology.num_links();
        assert_eq!(targets.len(), l);
        let ti = |link: usize| link;
        let pi = |link: usize| l + link;
        let wi = |link: usize| 2 * l + link;
        let ci = |class: usize| 3 * l + class;
        let n = 3 * l + self.num_classes;
        let members = self.topology.ring_members();

        let mut last: Option<(PhysicalUpdate, f64, usize)> = None;
        // Only t carries prox curvature from the consensus term; on a
        // degenerate face the free (p, w) coordinates would hop between tying
        // vertices while refinement chases them. A small prox pull toward the
        // previous round's point selects one face point and vanishes at the
        // settled solution, so the fixed point still solves the exact block.
        let damp = rho * 1e-3;
        for round in 1..=max_rounds {
            let mut problem = QpProblem::new(n);
            let mut diag = vec![0.0; n];
            for link in 0..l {
                diag[ti(link)] = rho;
                problem.linear[ti(link)] = -rho * targets[link];
                problem.linear[pi(link)] = epsilon_power;
            }
            if let Some((prev, _, _)) = &last {
                for link in 0..l {
                    diag[pi(link)] += damp;
                    problem.linear[pi(link)] -= damp * prev.powers[link];
                    diag[wi(link)] += damp;
                    problem.linear[wi(link)] -= damp * prev.bandwidths[link];
                }
                for c in 0..self.num_classes {
                    diag[ci(c)] += damp;
                    problem.linear[ci(c)] -= damp * prev.class_bandwidths[c];
                }
            }
            problem.quad = Quadratic::Diag(diag);
            for i in 0..n {
                problem.nonneg[i] = true;
            }

            for link in 0..l {
                for plane in self.planes[link].planes() {
                    problem.ineq.push((
                        vec![
                            (ti(link), 1.0),
                            (pi(link), -plane.slope_p),
                            (wi(link), -plane.slope_w),
                        ],
                        plane.offset,
                    ));
                }
            }
            if self.channel.gamma.is_finite() {
                for link in 0..l {
                    problem
                        .ineq
                        .push((vec![(pi(link), 1.0), (wi(link), -self.channel.gamma)], 0.0));
                }
            }
            for node in 1..self.topology.num_nodes() {
                if self.topology.out_links[node].is_empty() {
                    continue;
                }
                let row =
                    self.topology.out_links[node].iter().map(|&link| (pi(link), 1.0)).collect();
                problem.ineq.push((row, self.channel.p_max));
            }
            for g in 1..=self.topology.num_groups {
                if members[g].is_empty() {
                    continue;
                }
                let mut row: Vec<(usize, f64)> = Vec::new();
                for &node in &members[g] {
                    for &link in &self.topology.out_links[node] {
                        row.push((wi(link), 1.0));
                    }
                }
                row.push((ci(self.classes[g - 1]), -1.0));
                problem.ineq.push((row, 0.0));
            }
            problem
                .eq
                .push(((0..self.num_classes).map(|c| (ci(c), 1.0)).collect(), self.channel.w_max));

            let sol = solve_qp(&problem, (inner_tol * 1e-2).min(1e-8))?;

            let mut violation = 0.0_f64;
            for link in 0..l {
                let cap = capacity(
                    sol.x[wi(link)].max(0.0),
                    sol.x[pi(link)].max(0.0),
                    self.channel.gains[link],
                    self.channel.sigma[link],
                );
                violation = violation.max(sol.x[ti(link)] - cap);
            }
            let update = PhysicalUpdate {
                t: (0..l).map(|link| sol.x[ti(link)].max(0.0)).collect(),
                powers: (0..l).map(|link| sol.x[pi(link)].max(0.0)).collect(),
                bandwidths: (0..l).map(|link| sol.x[wi(link)].max(0.0)).collect(),
                class_bandwidths: (0..self.num_classes).map(|c| sol.x[ci(c)].max(0.0)).collect(),
            };
            // Relinearize with the targets frozen until the hull is right
            // at the iterate.
            let done = violation <= inner_tol;
            // Refine only while the hull is actually wrong at the iterate;
            // extra planes on violation-free rounds churn the eviction
            // budget and can drop a load-bearing plane.
            for link in 0..l {
                let (p, w) = (update.powers[link], update.bandwidths[link]);
                self.planes[link].mark_tight(p, w);
                if !done {
                    let (ap, aw) = refine_anchor(p, w, self.channel.w_max);
                    self.planes[link].refine(
                        self.channel.gains[link],
                        self.channel.sigma[link],
                        ap,
                        aw,
                    );
                }
            }
            last = Some((update, violation, round));
            if done {
                break;
            }
        }
        let (update, violation, rounds) = last.expect("at least one round");
        if violation > inner_tol {
            return Err(LayeredError::InnerStall { rounds, violation });
        }
        Ok(update)
    }
}

/// Scaled stopping thresholds: `sqrt(dim) * eps_abs + eps_rel * scale`.
pub fn residual_threshold(dim: usize, eps_abs: f64, eps_rel: f64, scale: f64) -> f64 {
    (dim as f64).sqrt() * eps_abs + eps_rel * scale
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Runs the layered ADMM to convergence or `max_iters`.
pub fn run_layered(
    topology: &NetworkTopology,
    channel: &ChannelModel,
    options: &LayeredOptions,
) -> Result<LayeredRun, LayeredError> {
    if topology.num_users() == 0 {
        return Ok(LayeredRun {
            solution: GlobalSolution::empty(topology, channel),
            trace: Vec::new(),
            iterations: 0,
            converged: true,
        });
    }
    let l = topology.num_links();
    let mut t = vec![1.0; l];
    let mut u = vec![0.0; l];
    let mut physical = PhysicalLayer::new(topology, channel, options.plane_budget);

    let mut trace = Vec::new();
    let mut converged = false;
    let mut x = vec![0.0; l];
    let mut update = PhysicalUpdate {
        t: t.clone(),
        powers: vec![0.0; l],
        bandwidths: vec![0.0; l],
        class_bandwidths: Vec::new(),
    };
    let mut iterations = 0;

    for iter in 1..=options.max_iters {
        iterations = iter;
        let targets: Vec<f64> = (0..l).map(|i| t[i] - u[i]).collect();
        x = solve_flow_update(topology, &targets, options.rho)?.flows;

        let phys_targets: Vec<f64> = (0..l).map(|i| x[i] + u[i]).collect();
        update = physical.step(
            &phys_targets,
            options.rho,
            options.epsilon_power,
            options.inner_tol(),
            options.max_inner_rounds,
        )?;

        let t_prev = std::mem::replace(&mut t, update.t.clone());
        let primal: f64 = norm2(&(0..l).map(|i| x[i] - t[i]).collect::<Vec<_>>());
        let dual =
            options.rho * norm2(&(0..l).map(|i| t[i] - t_prev[i]).collect::<Vec<_>>());
        for i in 0..l {
            u[i] += x[i] - t[i];
        }

        let rates = topology.node_rates(&x);
        let objective = rates.iter().skip(1).copied().fold(f64::INFINITY, f64::min);
        trace.push(TraceRow {
            iteration: iter,
            objective,
            primal_residual: primal,
            dual_residual: dual,
        });

        // One threshold for both residuals, scaled by the iterate magnitude.
        let eps = residual_threshold(
            l,
            options.eps_abs,
            options.eps_rel,
            norm2(&x).max(norm2(&t)),
        );
        if primal <= eps && dual <= eps {
            converged = true;
            break;
        }
    }

    // Feasibility restoration: flows capped by the physical copy and the
    // exact capacity at the returned powers and bandwidths.
    let mut flows = Vec::with_capacity(l);
    for link in 0..l {
        let cap = capacity(
            update.bandwidths[link],
            update.powers[link],
            channel.gains[link],
            channel.sigma[link],
        );
        flows.push(x[link].min(t[link]).min(cap).max(0.0));
    }
    let solution = GlobalSolution::assemble(
        topology,
        channel,
        flows,
        update.powers,
        update.bandwidths,
        update.class_bandwidths,
    );
    Ok(LayeredRun { solution, trace, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ReuseFactor;
    use crate::scenario::ScenarioConfig;

    #[test]
    fn two_hop_chain_converges() {
        let positions = vec![(0.0, 0.0), (50.0, 0.0), (90.0, 0.0)];
        let groups = vec![0, 1, 2];
        let topology = NetworkTopology::assemble(positions, groups, 2, 0.3, 80.0).unwrap();
        let config = ScenarioConfig {
            num_users: 2,
            reuse_factor_f: ReuseFactor::Infinite,
            ..ScenarioConfig::default()
        };
        let channel = ChannelModel::build(&topology, &config).unwrap();
        let run = run_layered(&topology, &channel, &LayeredOptions::default()).unwrap();
        assert!(run.converged, "no convergence in {} iterations", run.iterations);
        let report = crate::solution::verify_solution(&run.solution, &topology, &channel);
        assert!(report.passes(1e-6), "{report}");
        assert!(run.solution.objective > 0.0);
    }

    #[test]
    fn empty_network_converges_immediately() {
        let topology = NetworkTopology::direct_star(vec![(0.0, 0.0)]);
        let config = ScenarioConfig { num_users: 0, ..ScenarioConfig::default() };
        let channel = ChannelModel::build_direct(&topology, &config).unwrap();
        let run = run_layered(&topology, &channel, &LayeredOptions::default()).unwrap();
        assert_eq!(run.iterations, 0);
        assert!(run.converged);
    }
}
