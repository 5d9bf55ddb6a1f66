// End-to-end solver checks on instances small enough to verify
// independently: exhaustive grids, cross-solver agreement, locality of the
// per-device updates, and structural properties of generated topologies.

mod common;

use common::{rel_gap, tight_device, tight_layered};
use hopflow::capacity::capacity;
use hopflow::channel::{ring_spectrum_classes, ChannelModel, ReuseFactor};
use hopflow::device::{
    run_device, DeviceAdmm, DeviceOptions, EventSchedule, ScheduleError,
};
use hopflow::experiment::quantize_bandwidths;
use hopflow::layered::{run_layered, LayeredOptions};
use hopflow::reference::{solve_direct, solve_joint, SolveOptions};
use hopflow::solution::verify_solution;
use hopflow::topology::{angular_separation, ring_of, NetworkTopology};
use proptest::prelude::*;

#[test]
fn single_link_chain_matches_grid_and_closed_form() {
    let (topology, channel, _) = common::chain_setup(&[60.0], ReuseFactor::Finite(3), 0.5);
    let run = solve_joint(&topology, &channel, &SolveOptions::default()).unwrap();
    let grid = common::chain_grid_oracle(&channel, 1000);
    assert!(
        rel_gap(run.solution.objective, grid) <= 1e-3,
        "solver {} vs grid {}",
        run.solution.objective,
        grid
    );
    // One link gets the whole band and as much power as the density cap
    // admits, so the optimum is available in closed form too.
    let p_star = channel.p_max.min(channel.gamma * channel.w_max);
    let closed = capacity(channel.w_max, p_star, channel.gains[0], channel.sigma[0]);
    assert!(rel_gap(run.solution.objective, closed) <= 1e-5);
}

#[test]
fn two_hop_chain_matches_grid_with_density_cap() {
    let (topology, channel, _) = common::chain_setup(&[50.0, 90.0], ReuseFactor::Finite(3), 0.5);
    let run = solve_joint(&topology, &channel, &SolveOptions::default()).unwrap();
    let grid = common::chain_grid_oracle(&channel, 1000);
    assert!(
        rel_gap(run.solution.objective, grid) <= 1e-3,
        "solver {} vs grid {}",
        run.solution.objective,
        grid
    );
    // Both users end with the same rate: the inner link carries double.
    let rates = &run.solution.rates;
    assert!(rel_gap(rates[1], rates[2]) <= 1e-4);
}

#[test]
fn two_hop_chain_matches_grid_without_density_cap() {
    let (topology, channel, _) = common::chain_setup(&[50.0, 90.0], ReuseFactor::Infinite, 0.01);
    assert!(channel.gamma.is_infinite());
    let run = solve_joint(&topology, &channel, &SolveOptions::default()).unwrap();
    let grid = common::chain_grid_oracle(&channel, 1000);
    assert!(
        rel_gap(run.solution.objective, grid) <= 1e-3,
        "solver {} vs grid {}",
        run.solution.objective,
        grid
    );
}

#[test]
fn direct_star_matches_simplex_grid() {
    let positions = vec![(0.0, 0.0), (40.0, 0.0), (80.0, 30.0), (120.0, -45.0)];
    let config = hopflow::ScenarioConfig {
        num_users: 3,
        p_max: 1e-3,
        ..hopflow::ScenarioConfig::default()
    };
    let star = NetworkTopology::direct_star(positions);
    let channel = ChannelModel::build_direct(&star, &config).unwrap();
    let run = solve_direct(&star, &channel, &SolveOptions::default()).unwrap();
    let grid = common::direct_grid_oracle(&channel, 1200);
    assert!(
        rel_gap(run.solution.objective, grid) <= 1.5e-3,
        "solver {} vs grid {}",
        run.solution.objective,
        grid
    );
    // Full power on every uplink; rates equalized.
    for node in 1..star.num_nodes() {
        let spent: f64 = star.out_links[node].iter().map(|&l| run.solution.powers[l]).sum();
        assert!((spent - channel.p_max).abs() <= 1e-9);
    }
    let spread = run.solution.rates[1..]
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    assert!(rel_gap(spread.0, spread.1) <= 1e-4, "rates not equalized: {spread:?}");
}

#[test]
fn reference_objective_monotone_in_power_budget() {
    let mut last = 0.0;
    for p_max in [1e-4, 1e-3, 1e-2] {
        let (topology, channel, _) =
            common::chain_setup(&[50.0, 90.0], ReuseFactor::Infinite, p_max);
        let run = solve_joint(&topology, &channel, &SolveOptions::default()).unwrap();
        assert!(
            run.solution.objective > last * (1.0 + 1e-6),
            "objective did not grow with the power budget"
        );
        last = run.solution.objective;
    }
}

#[test]
fn spectrum_classes_follow_reuse_pattern() {
    assert_eq!(ring_spectrum_classes(ReuseFactor::Finite(3), 6), (vec![0, 1, 2, 0, 1, 2], 3));
    assert_eq!(ring_spectrum_classes(ReuseFactor::Infinite, 6), (vec![0, 1, 2, 3, 4, 5], 6));
    assert_eq!(ring_spectrum_classes(ReuseFactor::Finite(4), 3), (vec![0, 1, 2], 3));
    assert_eq!(ring_spectrum_classes(ReuseFactor::Finite(3), 1), (vec![0], 1));
}

#[test]
fn layered_and_device_agree_with_reference() {
    let config = common::agree_config(3);
    let topology = NetworkTopology::generate(&config).unwrap();
    let channel = ChannelModel::build(&topology, &config).unwrap();
    let reference = solve_joint(&topology, &channel, &SolveOptions::default()).unwrap();

    let layered = run_layered(&topology, &channel, &tight_layered()).unwrap();
    assert!(layered.converged);
    assert!(
        rel_gap(layered.solution.objective, reference.solution.objective) <= 0.01,
        "layered {} vs reference {}",
        layered.solution.objective,
        reference.solution.objective
    );
    assert!(verify_solution(&layered.solution, &topology, &channel).passes(1e-4));

    let (device, _) = run_device(&topology, &channel, &tight_device(), &EventSchedule::empty())
        .unwrap();
    assert!(device.converged);
    assert!(
        rel_gap(device.solution.objective, reference.solution.objective) <= 0.01,
        "device {} vs reference {}",
        device.solution.objective,
        reference.solution.objective
    );
    assert!(verify_solution(&device.solution, &topology, &channel).passes(1e-4));
}

#[test]
fn layered_rho_variants_reach_the_same_objective() {
    let config = common::agree_config(4);
    let topology = NetworkTopology::generate(&config).unwrap();
    let channel = ChannelModel::build(&topology, &config).unwrap();
    let reference = solve_joint(&topology, &channel, &SolveOptions::default()).unwrap();
    for rho in [0.3, 1.0, 3.0] {
        let options = LayeredOptions { rho, ..tight_layered() };
        let run = run_layered(&topology, &channel, &options).unwrap();
        assert!(run.converged, "rho {rho} did not converge");
        assert!(
            rel_gap(run.solution.objective, reference.solution.objective) <= 0.01,
            "rho {rho}: {} vs {}",
            run.solution.objective,
            reference.solution.objective
        );
    }
}

#[test]
fn node_step_ignores_remote_gains() {
    let (topology, channel, _) = common::four_ring_fixture();
    // Perturb the outermost node's own link; every other node's first update
    // must not move by a single bit.
    let outer = topology.num_nodes() - 1;
    let mut perturbed = channel.clone();
    for &l in &topology.out_links[outer] {
        perturbed.gains[l] *= 3.0;
    }
    let options = DeviceOptions { partial_update_iters: 0, ..DeviceOptions::default() };
    let mut a = DeviceAdmm::new(&topology, &channel, options.clone());
    let mut b = DeviceAdmm::new(&topology, &perturbed, options);
    a.step().unwrap();
    b.step().unwrap();

    let (_, ta, _, _, ba, _, _) = a.debug_state();
    let (_, tb, _, _, bb, _, _) = b.debug_state();
    let (pa, wa) = a.debug_radio();
    let (pb, wb) = b.debug_radio();
    for node in 1..topology.num_nodes() {
        if node == outer {
            continue;
        }
        for &l in &topology.out_links[node] {
            assert_eq!(ta[l].to_bits(), tb[l].to_bits(), "node {node} link {l} rate moved");
            assert_eq!(pa[l].to_bits(), pb[l].to_bits(), "node {node} link {l} power moved");
            assert_eq!(wa[l].to_bits(), wb[l].to_bits(), "node {node} link {l} bandwidth moved");
        }
        assert_eq!(ba[node].to_bits(), bb[node].to_bits(), "node {node} share moved");
    }
    // And the perturbed node must actually respond, or this test checks nothing.
    let moved = topology.out_links[outer]
        .iter()
        .any(|&l| ta[l].to_bits() != tb[l].to_bits() || pa[l].to_bits() != pb[l].to_bits());
    assert!(moved, "gain change did not reach the perturbed node");
}

#[test]
fn quantization_keeps_feasibility_and_never_gains() {
    let config = common::agree_config(2);
    let topology = NetworkTopology::generate(&config).unwrap();
    let channel = ChannelModel::build(&topology, &config).unwrap();
    let run = solve_joint(&topology, &channel, &SolveOptions::default()).unwrap();

    let report = quantize_bandwidths(&run.solution, &topology, &channel, 0.05);
    assert!(report.objective_after <= report.objective_before + 1e-9);
    for (l, &w) in report.solution.bandwidths.iter().enumerate() {
        let snapped = (w / 0.05).round() * 0.05;
        assert!((w - snapped).abs() <= 1e-9, "link {l} bandwidth {w} off the grid");
    }
    let feas = verify_solution(&report.solution, &topology, &channel);
    assert!(feas.passes(1e-6), "{feas}");

    let identity = quantize_bandwidths(&run.solution, &topology, &channel, 0.0);
    assert_eq!(identity.solution.bandwidths, run.solution.bandwidths);
    assert_eq!(identity.objective_after, identity.objective_before);
}

#[test]
fn schedule_rejects_nonpositive_factors() {
    let events = vec![hopflow::device::ChannelEvent {
        at_iteration: 3,
        kind: hopflow::device::EventKind::NoiseRescale { factors: vec![1.0, 0.0] },
    }];
    assert!(matches!(
        EventSchedule::new(events),
        Err(ScheduleError::BadFactor { index: 0 })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn generated_topologies_hop_one_ring_inward(seed in 0u64..10_000) {
        let mut config = common::agree_config(seed % 50);
        config.rng_seed = seed;
        let Ok(topology) = NetworkTopology::generate(&config) else {
            // Dense draws can fail the placement gates; nothing to check.
            return Ok(());
        };
        let d = config.group_width_d;
        for link in &topology.links {
            prop_assert_eq!(topology.group_of[link.source], topology.group_of[link.dest] + 1);
            let (sx, sy) = topology.positions[link.source];
            let (dx, dy) = topology.positions[link.dest];
            let dist = ((sx - dx).powi(2) + (sy - dy).powi(2)).sqrt();
            prop_assert!((dist - link.distance).abs() <= 1e-9);
            if link.dest == 0 {
                prop_assert_eq!(topology.group_of[link.source], 1);
                prop_assert!(dist <= 2.0 * d + 1e-9);
            } else {
                prop_assert!(dist <= config.d_th_factor * d + 1e-9);
                let a = sy.atan2(sx);
                let b = dy.atan2(dx);
                prop_assert!(
                    angular_separation(a, b) <= config.theta.to_radians() + 1e-9
                );
            }
        }
        for (node, &(x, y)) in topology.positions.iter().enumerate().skip(1) {
            let rho = (x * x + y * y).sqrt();
            prop_assert_eq!(topology.group_of[node], ring_of(rho, d, topology.num_groups));
        }
        let members = topology.ring_members();
        for g in 1..=topology.num_groups {
            prop_assert!(!members[g].is_empty(), "ring {} empty", g);
        }
        prop_assert!(topology.all_users_connected(&vec![true; topology.num_links()]));
    }
}
