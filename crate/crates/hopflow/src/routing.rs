//! Flow update shared by both decomposed solvers.
//!
//! Given per-link targets `d` (the physical-layer copies adjusted by the
//! duals), the network side maximizes the worst user rate minus a quadratic
//! penalty for deviating from the targets:
//! `max  nu - (rho/2) ||x - d||^2  s.t.  (A x)_n >= nu for users, x >= 0`.

use thiserror::Error;

use crate::qp::{solve_qp, QpError, QpProblem, Quadratic};
use crate::topology::NetworkTopology;

#[derive(Clone, Debug)]
pub struct FlowUpdate {
    pub flows: Vec<f64>,
    /// Epigraph value: the worst user rate the update commits to.
    pub worst_rate: f64,
}

#[derive(Debug, Error)]
pub enum RoutingError {
    #[error("flow update failed: {0}")]
    Qp(#[from] QpError),
}

/// Solves the flow update. `targets` has one entry per link; `rho > 0`.
pub fn solve_flow_update(
    topology: &NetworkTopology,
    targets: &[f64],
    rho: f64,
) -> Result<FlowUpdate, RoutingError> {
    let l = topology.num_links();
    assert_eq!(targets.len(), l);
    assert!(rho > 0.0, "rho must be positive");
    if topology.num_users() == 0 {
        return Ok(FlowUpdate { flows: Vec::new(), worst_rate: 0.0 });
    }

    // Variables: [x_0..x_{L-1}, nu].
    let n = l + 1;
    let mut problem = QpProblem::new(n);
    let mut diag = vec![rho; l];
    diag.push(0.0);
    problem.quad = Quadratic::Diag(diag);
    for i in 0..l {
        problem.linear[i] = -rho * targets[i];
    }
    problem.linear[l] = -1.0;

    // nu - (A x)_n <= 0 per user.
    let a = topology.incidence();
    for node in 1..topology.num_nodes() {
        let mut row: Vec<(usize, f64)> = vec![(l, 1.0)];
        for (link, &coef) in a[node].iter().enumerate() {
            if coef != 0.0 {
                row.push((link, -coef));
            }
        }
        problem.ineq.push((row, 0.0));
    }
    for i in 0..l {
        problem.nonneg[i] = true;
    }

    let sol = solve_qp(&problem, 1e-9)?;
    Ok(FlowUpdate { flows: sol.x[..l].to_vec(), worst_rate: sol.x[l] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_link_has_closed_form() {
        // One user, one link: optimum is x = max(0, d + 1/rho).
        let topology = NetworkTopology::direct_star(vec![(0.0, 0.0), (50.0, 0.0)]);
        for (target, rho) in [(2.0, 1.0), (-3.0, 0.5), (0.3, 4.0)] {
            let update = solve_flow_update(&topology, &[target], rho).unwrap();
            let expect = (target + 1.0 / rho).max(0.0);
            assert!(
                (update.flows[0] - expect).abs() < 1e-6,
                "target {target} rho {rho}: got {} want {expect}",
                update.flows[0]
            );
        }
    }

    #[test]
    fn relay_balances_branch_flows() {
        // Node 1 relays for users 2 and 3; targets pull x up on every link
        // and the epigraph ties the three user rates together.
        let positions = vec![(0.0, 0.0), (50.0, 0.0), (100.0, 5.0), (100.0, -5.0)];
        let groups = vec![0, 1, 2, 2];
        let topology = NetworkTopology::assemble(positions, groups, 2, 0.5, 80.0).unwrap();
        let update = solve_flow_update(&topology, &[3.0, 1.0, 1.0], 1.0).unwrap();
        let rates = topology.node_rates(&update.flows);
        let min_rate = rates[1].min(rates[2]).min(rates[3]);
        assert!((update.worst_rate - min_rate).abs() < 1e-6);
        // Flow conservation is structural: absorbed = sum of user rates.
        assert!((rates[0] + rates[1] + rates[2] + rates[3]).abs() < 1e-9);
    }
}
