//! Joint allocation result and feasibility reporting.

use crate::capacity::capacity;
use crate::channel::{ring_spectrum_classes, ChannelModel};
use crate::topology::NetworkTopology;

/// A complete allocation: per-link flow, power and bandwidth plus the
/// spectrum split across rings. Rates and node bandwidths are derived and
/// kept consistent by construction via [`GlobalSolution::assemble`].
#[derive(Clone, Debug)]
pub struct GlobalSolution {
    /// Flow per link (Mbps).
    pub flows: Vec<f64>,
    /// Transmit power per link (W).
    pub powers: Vec<f64>,
    /// Bandwidth per link (MHz).
    pub bandwidths: Vec<f64>,
    /// Spectrum slice widths, one per reuse class (MHz).
    pub class_bandwidths: Vec<f64>,
    /// Slice width available to each ring (MHz), 1-based ring id minus one.
    pub group_bandwidths: Vec<f64>,
    /// Net injected rate per node, entry 0 is the collection point.
    pub rates: Vec<f64>,
    /// Total bandwidth used by each node's outgoing links (MHz).
    pub node_bandwidths: Vec<f64>,
    /// Minimum user rate (Mbps).
    pub objective: f64,
    /// Sum of link powers (W).
    pub total_power: f64,
}

impl GlobalSolution {
    /// Builds the derived fields from the primal variables.
    pub fn assemble(
        topology: &NetworkTopology,
        channel: &ChannelModel,
        flows: Vec<f64>,
        powers: Vec<f64>,
        bandwidths: Vec<f64>,
        class_bandwidths: Vec<f64>,
    ) -> Self {
        let l = topology.num_links();
        assert_eq!(flows.len(), l);
        assert_eq!(powers.len(), l);
        assert_eq!(bandwidths.len(), l);
        let (classes, num_classes) = ring_spectrum_classes(channel.reuse, topology.num_groups);
        assert_eq!(class_bandwidths.len(), num_classes);

        let rates = topology.node_rates(&flows);
        let mut node_bandwidths = vec![0.0; topology.num_nodes()];
        for (l, link) in topology.links.iter().enumerate() {
            node_bandwidths[link.source] += bandwidths[l];
        }
        let group_bandwidths =
            (0..topology.num_groups).map(|g| class_bandwidths[classes[g]]).collect();
        let objective =
            rates.iter().skip(1).copied().fold(f64::INFINITY, f64::min).min(f64::INFINITY);
        let objective = if topology.num_users() == 0 { 0.0 } else { objective };
        let total_power = powers.iter().sum();
        Self {
            flows,
            powers,
            bandwidths,
            class_bandwidths,
            group_bandwidths,
            rates,
            node_bandwidths,
            objective,
            total_power,
        }
    }

    /// Trivial solution for a network with no users.
    pub fn empty(topology: &NetworkTopology, channel: &ChannelModel) -> Self {
        let (_, num_classes) = ring_spectrum_classes(channel.reuse, topology.num_groups);
        let even = channel.w_max / num_classes.max(1) as f64;
        Self::assemble(
            topology,
            channel,
            vec![0.0; topology.num_links()],
            vec![0.0; topology.num_links()],
            vec![0.0; topology.num_links()],
            vec![even; num_classes],
        )
    }
}

/// Worst violation per constraint family; all entries are `<= 0` up to
/// numerical tolerance for a feasible allocation.
#[derive(Clone, Copy, Debug)]
pub struct ConstraintReport {
    /// max over links of `x - capacity(w, p)`.
    pub flow_capacity: f64,
    /// max over links of `p - gamma * w` (0 when reuse is off).
    pub power_density: f64,
    /// max over nodes of outgoing power sum minus the budget.
    pub node_power: f64,
    /// max over rings of member bandwidth sum minus the ring's slice.
    pub group_bandwidth: f64,
    /// `|sum of class widths - w_max|`.
    pub spectrum_total: f64,
    /// max mismatch between a ring's slice and its class width.
    pub reuse_ties: f64,
    /// most negative variable, sign-flipped.
    pub negativity: f64,
}

impl ConstraintReport {
    pub fn worst(&self) -> f64 {
        [
            self.flow_capacity,
            self.power_density,
            self.node_power,
            self.group_bandwidth,
            self.spectrum_total,
            self.reuse_ties,
            self.negativity,
        ]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.worst() <= tol
    }
}

impl std::fmt::Display for ConstraintReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "flow vs capacity:   {:+.3e}", self.flow_capacity)?;
        writeln!(f, "power density cap:  {:+.3e}", self.power_density)?;
        writeln!(f, "node power budget:  {:+.3e}", self.node_power)?;
        writeln!(f, "ring bandwidth:     {:+.3e}", self.group_bandwidth)?;
        writeln!(f, "spectrum total:     {:+.3e}", self.spectrum_total)?;
        writeln!(f, "reuse ties:         {:+.3e}", self.reuse_ties)?;
        write!(f, "negativity:         {:+.3e}", self.negativity)
    }
}

/// Measures how far `solution` is from satisfying every constraint of the
/// joint problem on `topology` + `channel`.
pub fn verify_solution(
    solution: &GlobalSolution,
    topology: &NetworkTopology,
    channel: &ChannelModel,
) -> ConstraintReport {
    let links = &topology.links;
    let mut flow_capacity = f64::NEG_INFINITY;
    let mut power_density = f64::NEG_INFINITY;
    for l in 0..links.len() {
        let c = capacity(
            solution.bandwidths[l].max(0.0),
            solution.powers[l].max(0.0),
            channel.gains[l],
            channel.sigma[l],
        );
        flow_capacity = flow_capacity.max(solution.flows[l] - c);
        if channel.gamma.is_finite() {
            power_density =
                power_density.max(solution.powers[l] - channel.gamma * solution.bandwidths[l]);
        }
    }
    if !channel.gamma.is_finite() || links.is_empty() {
        power_density = 0.0;
    }
    if links.is_empty() {
        flow_capacity = 0.0;
    }

    let mut node_power = 0.0_f64;
    for node in 1..topology.num_nodes() {
        let used: f64 = topology.out_links[node].iter().map(|&l| solution.powers[l]).sum();
        node_power = node_power.max(used - channel.p_max);
    }

    let members = topology.ring_members();
    let mut group_bandwidth = 0.0_f64;
    for g in 1..=topology.num_groups {
        let used: f64 =
            members[g].iter().map(|&n| solution.node_bandwidths[n]).sum();
        group_bandwidth = group_bandwidth.max(used - solution.group_bandwidths[g - 1]);
    }

    let total: f64 = solution.class_bandwidths.iter().sum();
    let spectrum_total = (total - channel.w_max).abs();

    let (classes, _) = ring_spectrum_classes(channel.reuse, topology.num_groups);
    let mut reuse_ties = 0.0_f64;
    for g in 0..topology.num_groups {
        reuse_ties =
            reuse_ties.max((solution.group_bandwidths[g] - solution.class_bandwidths[classes[g]]).abs());
    }

    let negativity = solution
        .flows
        .iter()
        .chain(&solution.powers)
        .chain(&solution.bandwidths)
        .chain(&solution.class_bandwidths)
        .copied()
        .fold(0.0_f64, |acc, v| acc.max(-v));

    ConstraintReport {
        flow_capacity,
        power_density,
        node_power,
        group_bandwidth,
        spectrum_total,
        reuse_ties,
        negativity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioConfig;

    fn two_hop_fixture() -> (NetworkTopology, ChannelModel) {
        let positions = vec![(0.0, 0.0), (50.0, 0.0), (100.0, 0.0)];
        let groups = vec![0, 1, 2];
        let topology = NetworkTopology::assemble(positions, groups, 2, 0.3, 80.0).unwrap();
        let config = ScenarioConfig {
            num_users: 2,
            reuse_factor_f: crate::channel::ReuseFactor::Infinite,
            ..ScenarioConfig::default()
        };
        let channel = ChannelModel::build(&topology, &config).unwrap();
        (topology, channel)
    }

    #[test]
    fn assemble_derives_rates_and_totals() {
        let (topology, channel) = two_hop_fixture();
        // Links: 1->0 then 2->1. Flow 2.0 on the first, 0.5 on the second.
        let solution = GlobalSolution::assemble(
            &topology,
            &channel,
            vec![2.0, 0.5],
            vec![0.01, 0.02],
            vec![4.0, 6.0],
            vec![4.0, 6.0],
        );
        assert_eq!(solution.rates[0], -2.0);
        assert_eq!(solution.rates[1], 1.5);
        assert_eq!(solution.rates[2], 0.5);
        assert_eq!(solution.objective, 0.5);
        assert!((solution.total_power - 0.03).abs() < 1e-15);
        assert_eq!(solution.node_bandwidths[1], 4.0);
        assert_eq!(solution.group_bandwidths, vec![4.0, 6.0]);
    }

    #[test]
    fn verify_flags_capacity_violation() {
        let (topology, channel) = two_hop_fixture();
        let solution = GlobalSolution::assemble(
            &topology,
            &channel,
            vec![1e6, 0.0],
            vec![0.0, 0.0],
            vec![4.0, 6.0],
            vec![4.0, 6.0],
        );
        let report = verify_solution(&solution, &topology, &channel);
        assert!(report.flow_capacity > 1.0);
        assert!(!report.passes(1e-4));
    }

    #[test]
    fn verify_accepts_feasible_point() {
        let (topology, channel) = two_hop_fixture();
        let c0 = capacity(4.0, 0.01, channel.gains[0], channel.n0);
        let solution = GlobalSolution::assemble(
            &topology,
            &channel,
            vec![c0 * 0.9, c0 * 0.4],
            vec![0.01, 0.01],
            vec![4.0, 6.0],
            vec![4.0, 6.0],
        );
        let report = verify_solution(&solution, &topology, &channel);
        assert!(report.passes(1e-9), "{report}");
    }
}
