// Scratch probe for the layered plateau. Not part of the shipped examples.

use hopflow::channel::ChannelModel;
use hopflow::layered::{norm2, LayeredOptions, PhysicalLayer};
use hopflow::routing::solve_flow_update;
use hopflow::scenario::ScenarioConfig;
use hopflow::topology::NetworkTopology;

fn main() {
    let config = ScenarioConfig {
        sector_radius: 280.0,
        sector_angle: 360.0,
        num_users: 11,
        group_width_d: 40.0,
        reuse_factor_f: hopflow::channel::ReuseFactor::Finite(4),
        theta: 10.0,
        d_th_factor: 1.5,
        rng_seed: 1,
        ..ScenarioConfig::default()
    };
    let positions = vec![
        (0.0, 0.0),
        (60.194, 2.180),
        (46.837, -1.857),
        (106.703, 16.105),
        (111.191, 2.900),
        (158.501, 21.329),
        (144.540, 1.020),
        (163.562, 19.481),
        (180.026, -5.490),
        (212.936, -30.850),
        (200.578, 29.930),
        (254.355, 28.211),
    ];
    let (groups, m) =
        hopflow::topology::assign_rings(&positions, config.group_width_d, config.sector_radius)
            .unwrap();
    let topo = NetworkTopology::assemble(
        positions,
        groups,
        m,
        config.theta.to_radians(),
        config.d_th_factor * config.group_width_d,
    )
    .unwrap();
    let channel = ChannelModel::build(&topo, &config).unwrap();
    let options = LayeredOptions::default();
    let l = topo.num_links();

    let mut t = vec![1.0; l];
    let mut u = vec![0.0; l];
    let mut physical = PhysicalLayer::new(&topo, &channel, options.plane_budget);
    let mut prev_p: Vec<f64> = vec![0.0; l];
    let mut prev_w: Vec<f64> = vec![0.0; l];
    for iter in 1..=260 {
        let targets: Vec<f64> = (0..l).map(|i| t[i] - u[i]).collect();
        let x = solve_flow_update(&topo, &targets, options.rho).unwrap().flows;
        let phys_targets: Vec<f64> = (0..l).map(|i| x[i] + u[i]).collect();
        let update = physical
            .step(&phys_targets, options.rho, options.epsilon_power, 1e-5, 50)
            .unwrap();
        let t_prev = t.clone();
        t = update.t.clone();
        for i in 0..l {
            u[i] += x[i] - t[i];
        }
        if iter >= 250 {
            println!("iter {iter}:");
            for i in 0..l {
                println!(
                    "  link {:>2} {}->{}: dt={:>10.3e} x-t={:>10.3e} u={:>9.5} t={:.6} p={:.6e} dp={:>10.3e} w={:.5} dw={:>10.3e}",
                    i,
                    topo.links[i].source,
                    topo.links[i].dest,
                    t[i] - t_prev[i],
                    x[i] - t[i],
                    u[i],
                    t[i],
                    update.powers[i],
                    update.powers[i] - prev_p[i],
                    update.bandwidths[i],
                    update.bandwidths[i] - prev_w[i],
                );
            }
            println!(
                "  |dt|={:.4e} classes={:?}",
                norm2(&(0..l).map(|i| t[i] - t_prev[i]).collect::<Vec<_>>()),
                update.class_bandwidths
            );
        }
        prev_p = update.powers.clone();
        prev_w = update.bandwidths.clone();
    }
}
