// Scratch pilot for pinning acceptance-test parameters. Not part of the
// shipped example set; run with --release.

use std::time::Instant;

use hopflow::channel::{ChannelModel, ReuseFactor};
use hopflow::device::{DeviceAdmm, DeviceOptions, EventKind, EventSchedule, run_device};
use hopflow::layered::{run_layered, LayeredOptions};
use hopflow::reference::{solve_direct, solve_joint, SolveOptions};
use hopflow::scenario::ScenarioConfig;
use hopflow::solution::verify_solution;
use hopflow::topology::NetworkTopology;

fn small_config(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        sector_radius: 280.0,
        sector_angle: 360.0,
        num_users: 11,
        group_width_d: 40.0,
        reuse_factor_f: ReuseFactor::Finite(4),
        theta: 10.0,
        d_th_factor: 1.5,
        rng_seed: seed,
        ..ScenarioConfig::default()
    }
}

fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

fn frozen_ivd_positions() -> Vec<(f64, f64)> {
    vec![
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
    ]
}

fn find_ivd_positions(attempts: u64) -> Option<Vec<(f64, f64)>> {
    use rand::{Rng, SeedableRng};
    let d = 40.0;
    let radius = 280.0;
    let theta = 10f64.to_radians();
    let d_th = 60.0;
    // Radial corridor: one or two users per ring, angles in a narrow band so
    // inward neighbors stay within the angular gate.
    for seed in 0..attempts {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut positions = vec![(0.0, 0.0)];
        // ring occupancy pattern: 6 rings, 11 users
        let pattern = [2usize, 2, 2, 2, 2, 1];
        for (ring, &count) in pattern.iter().enumerate() {
            let (lo, hi) = if ring == 0 { (8.0, 80.0) } else { (80.0 + 40.0 * (ring as f64 - 1.0), 80.0 + 40.0 * ring as f64) };
            for _ in 0..count {
                let rho = rng.gen_range(lo..hi);
                let phi: f64 = rng.gen_range(-0.22..0.22);
                positions.push((rho * phi.cos(), rho * phi.sin()));
            }
        }
        let (groups, m) = match hopflow::topology::assign_rings(&positions, d, radius) {
            Ok(v) => v,
            Err(_) => continue,
        };
        match NetworkTopology::assemble(positions.clone(), groups, m, theta, d_th) {
            Ok(t) if t.num_links() == 15 => {
                println!("  ivd seed {} -> L=15", seed);
                return Some(positions);
            }
            _ => continue,
        }
    }
    None
}

fn survey_instances(limit: usize) {
    use rand::{Rng, SeedableRng};
    let d = 40.0;
    let radius = 280.0;
    let theta = 10f64.to_radians();
    let d_th = 60.0;
    let config = small_config(1);
    let mut found = 0usize;
    for seed in 0..200000u64 {
        if found >= limit {
            break;
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut positions = vec![(0.0, 0.0)];
        let pattern = [2usize, 2, 2, 2, 2, 1];
        for (ring, &count) in pattern.iter().enumerate() {
            let (lo, hi) = if ring == 0 {
                (8.0, 80.0)
            } else {
                (80.0 + 40.0 * (ring as f64 - 1.0), 80.0 + 40.0 * ring as f64)
            };
            for _ in 0..count {
                let rho = rng.gen_range(lo..hi);
                let phi: f64 = rng.gen_range(-0.22..0.22);
                positions.push((rho * phi.cos(), rho * phi.sin()));
            }
        }
        let Ok((groups, m)) = hopflow::topology::assign_rings(&positions, d, radius) else {
            continue;
        };
        let Ok(topo) = NetworkTopology::assemble(positions.clone(), groups, m, theta, d_th)
        else {
            continue;
        };
        if topo.num_links() != 15 {
            continue;
        }
        found += 1;
        let channel = ChannelModel::build(&topo, &config).unwrap();
        let lay1 = run_layered(&topo, &channel, &LayeredOptions::default()).unwrap();
        if lay1.iterations > 28 || !lay1.converged {
            continue;
        }
        let mut admm = DeviceAdmm::new(&topo, &channel, DeviceOptions::default());
        let cold1 = admm.run_to_convergence(2000).unwrap();
        if cold1 > 95 {
            println!("seed {:>6}: lay1 {:>3} | dev {:>4} (device too slow)", seed, lay1.iterations, cold1);
            continue;
        }
        // Warm ratios over 6 draws, threshold-level, cold1 denominator.
        let mut ratios = Vec::new();
        for fseed in 1..=6u64 {
            use rand::Rng;
            let mut warm_admm = admm.clone();
            let mut factor_rng = rand_chacha::ChaCha8Rng::seed_from_u64(fseed);
            let factors: Vec<f64> =
                (0..topo.num_nodes()).map(|_| factor_rng.gen_range(0.5..2.5)).collect();
            warm_admm.apply_event(&EventKind::NoiseRescale { factors });
            let warm = warm_admm.run_to_convergence(2000).unwrap();
            ratios.push(warm as f64 / cold1 as f64);
        }
        let pass = ratios.iter().filter(|r| **r < 0.5).count();
        let reference = solve_joint(&topo, &channel, &SolveOptions::default()).unwrap();
        let lay_gap = 100.0 * (reference.solution.objective - lay1.solution.objective).abs()
            / reference.solution.objective;
        println!(
            "seed {:>6}: ref={:>7.1} Kbps | lay1 {:>3}/{:.2}% | dev {:>4} | warm pass {}/6 ratios {:?}",
            seed,
            reference.solution.objective * 1e3,
            lay1.iterations,
            lay_gap,
            cold1,
            pass,
            ratios.iter().map(|r| (r * 100.0).round() / 100.0).collect::<Vec<_>>()
        );
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let what = args.get(1).map(String::as_str).unwrap_or("all");

    if what == "survey" {
        let limit = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(12);
        survey_instances(limit);
        return;
    }

    if what == "fixture" {
        use rand::{Rng, SeedableRng};
        let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1208);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut positions = vec![(0.0, 0.0)];
        let pattern = [2usize, 2, 2, 2, 2, 1];
        for (ring, &count) in pattern.iter().enumerate() {
            let (lo, hi) = if ring == 0 {
                (8.0, 80.0)
            } else {
                (80.0 + 40.0 * (ring as f64 - 1.0), 80.0 + 40.0 * ring as f64)
            };
            for _ in 0..count {
                let rho = rng.gen_range(lo..hi);
                let phi: f64 = rng.gen_range(-0.22..0.22);
                positions.push((rho * phi.cos(), rho * phi.sin()));
            }
        }
        for (i, p) in positions.iter().enumerate() {
            println!("({:.6}, {:.6}),  // node {}", p.0, p.1, i);
        }
        let config = small_config(1);
        let d = config.group_width_d;
        let (groups, m) =
            hopflow::topology::assign_rings(&positions, d, config.sector_radius).unwrap();
        let topo = NetworkTopology::assemble(
            positions,
            groups,
            m,
            config.theta.to_radians(),
            config.d_th_factor * d,
        )
        .unwrap();
        let channel = ChannelModel::build(&topo, &config).unwrap();
        println!("N={} L={} M={}", topo.num_nodes(), topo.num_links(), topo.num_groups);
        for (l, link) in topo.links.iter().enumerate() {
            println!("  link {}: {} -> {}", l, link.source, link.dest);
        }
        let reference = solve_joint(&topo, &channel, &SolveOptions::default()).unwrap();
        println!(
            "reference: obj={:.6} ({:.1} Kbps) power={:.6} W",
            reference.solution.objective,
            reference.solution.objective * 1e3,
            reference.solution.total_power
        );
        let lay = run_layered(&topo, &channel, &LayeredOptions::default()).unwrap();
        println!(
            "layered rho=1: iters={} conv={} gap={:.3}%",
            lay.iterations,
            lay.converged,
            100.0 * (reference.solution.objective - lay.solution.objective).abs()
                / reference.solution.objective
        );
        for row in lay.trace.iter() {
            println!(
                "  it {:>3}: obj={:>10.6} pri={:.3e} dual={:.3e}",
                row.iteration, row.objective, row.primal_residual, row.dual_residual
            );
        }
        let (dev, _) =
            run_device(&topo, &channel, &DeviceOptions::default(), &EventSchedule::default())
                .unwrap();
        println!(
            "device rho=0.5: iters={} conv={} gap={:.3}%",
            dev.iterations,
            dev.converged,
            100.0 * (reference.solution.objective - dev.solution.objective).abs()
                / reference.solution.objective
        );
        // Warm start: converge, rescale noise, continue vs cold on rescaled.
        // Settle time = first iteration after which the objective stays
        // within 1% of its final value.
        fn settle_time(objs: &[f64]) -> usize {
            let last = *objs.last().unwrap();
            let band = 0.01 * last.abs().max(1e-9);
            let mut settle = objs.len();
            for k in (0..objs.len()).rev() {
                if (objs[k] - last).abs() > band {
                    break;
                }
                settle = k + 1;
            }
            settle
        }
        for fseed in 1..=10u64 {
            let mut admm = DeviceAdmm::new(&topo, &channel, DeviceOptions::default());
            let cold1 = admm.run_to_convergence(2000).unwrap();
            let trace_len_before = admm.trace().len();
            let mut factor_rng = rand_chacha::ChaCha8Rng::seed_from_u64(fseed);
            let factors: Vec<f64> =
                (0..topo.num_nodes()).map(|_| factor_rng.gen_range(0.5..2.5)).collect();
            admm.apply_event(&EventKind::NoiseRescale { factors: factors.clone() });
            let warm = admm.run_to_convergence(2000).unwrap();
            let warm_objs: Vec<f64> =
                admm.trace()[trace_len_before..].iter().map(|r| r.objective).collect();
            let warm_settle = settle_time(&warm_objs);
            let cold_objs: Vec<f64> =
                admm.trace()[..trace_len_before].iter().map(|r| r.objective).collect();
            let cold_settle = settle_time(&cold_objs);
            println!(
                "warm fseed {:>2}: threshold cold1={} warm={} | objective cold={} warm={} ratio={:.3}",
                fseed,
                cold1,
                warm,
                cold_settle,
                warm_settle,
                warm_settle as f64 / cold_settle as f64
            );
        }
        return;
    }

    if what == "rho" {
        let positions = frozen_ivd_positions();
        let config = small_config(1);
        let d = config.group_width_d;
        let (groups, m) =
            hopflow::topology::assign_rings(&positions, d, config.sector_radius).unwrap();
        let topo = NetworkTopology::assemble(
            positions,
            groups,
            m,
            config.theta.to_radians(),
            config.d_th_factor * d,
        )
        .unwrap();
        let channel = ChannelModel::build(&topo, &config).unwrap();
        let reference = solve_joint(&topo, &channel, &SolveOptions::default()).unwrap();
        println!("reference obj={:.6}", reference.solution.objective);
        for rho in [0.1, 0.2, 0.3, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0] {
            let options = LayeredOptions { rho, ..LayeredOptions::default() };
            let run = run_layered(&topo, &channel, &options).unwrap();
            let gap = 100.0 * (reference.solution.objective - run.solution.objective).abs()
                / reference.solution.objective;
            println!(
                "layered rho={:>4.1}: iters={:>3} conv={} gap={:.3}%",
                rho, run.iterations, run.converged, gap
            );
        }
        for rho in [0.1, 0.2, 0.3, 0.5, 1.0, 2.0] {
            let options = DeviceOptions { rho, ..DeviceOptions::default() };
            let (run, _) =
                run_device(&topo, &channel, &options, &EventSchedule::default()).unwrap();
            let gap = 100.0 * (reference.solution.objective - run.solution.objective).abs()
                / reference.solution.objective;
            println!(
                "device  rho={:>4.1}: iters={:>4} conv={} gap={:.3}%",
                rho, run.iterations, run.converged, gap
            );
        }
        return;
    }

    if what == "ivd" {
        let Some(positions) = find_ivd_positions(100000) else {
            println!("no placement found");
            return;
        };
        for (i, p) in positions.iter().enumerate() {
            println!("  node {}: ({:.3}, {:.3})", i, p.0, p.1);
        }
        let config = small_config(1);
        let d = config.group_width_d;
        let (groups, m) =
            hopflow::topology::assign_rings(&positions, d, config.sector_radius).unwrap();
        let topo = NetworkTopology::assemble(
            positions,
            groups,
            m,
            config.theta.to_radians(),
            config.d_th_factor * d,
        )
        .unwrap();
        let channel = ChannelModel::build(&topo, &config).unwrap();
        println!("N={} L={} M={}", topo.num_nodes(), topo.num_links(), topo.num_groups);
        let reference = solve_joint(&topo, &channel, &SolveOptions::default()).unwrap();
        println!(
            "reference: obj={:.6} Mbps ({:.1} Kbps) power={:.6}",
            reference.solution.objective,
            reference.solution.objective * 1e3,
            reference.solution.total_power
        );
        let layered = run_layered(&topo, &channel, &LayeredOptions::default()).unwrap();
        println!(
            "layered: iters={} conv={} gap={:.4}%",
            layered.iterations,
            layered.converged,
            100.0 * (reference.solution.objective - layered.solution.objective).abs()
                / reference.solution.objective
        );
        for row in layered.trace.iter().filter(|r| r.iteration % 25 == 0 || r.iteration <= 20) {
            println!(
                "  it {:>4}: obj={:>10.6} pri={:.3e} dual={:.3e}",
                row.iteration, row.objective, row.primal_residual, row.dual_residual
            );
        }
        let (device, _) =
            run_device(&topo, &channel, &DeviceOptions::default(), &EventSchedule::empty())
                .unwrap();
        println!(
            "device: iters={} conv={} gap={:.4}%",
            device.iterations,
            device.converged,
            100.0 * (reference.solution.objective - device.solution.objective).abs()
                / reference.solution.objective
        );
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let factors: Vec<f64> =
            (0..topo.num_nodes()).map(|_| rng.gen_range(0.5..2.5)).collect();
        let mut warm = DeviceAdmm::new(&topo, &channel, DeviceOptions::default());
        let cold1 = warm.run_to_convergence(2000).unwrap();
        warm.apply_event(&EventKind::NoiseRescale { factors: factors.clone() });
        let warm_iters = warm.run_to_convergence(2000).unwrap();
        let mut scaled = channel.clone();
        for (l, link) in topo.links.iter().enumerate() {
            scaled.sigma[l] *= factors[link.dest];
        }
        let mut cold = DeviceAdmm::new(&topo, &scaled, DeviceOptions::default());
        let cold2 = cold.run_to_convergence(2000).unwrap();
        println!("warm start: cold1={} warm={} cold2={} ratio={:.2}", cold1, warm_iters, cold2, warm_iters as f64 / cold2 as f64);
        return;
    }

    if what == "seed" || what == "all" {
        println!("== seed search: small instance with L == 15 ==");
        for seed in 1..200u64 {
            let config = small_config(seed);
            if let Ok(topo) = NetworkTopology::generate(&config) {
                if topo.num_links() == 15 {
                    println!("  seed {} -> L=15, groups={}", seed, topo.num_groups);
                }
            }
        }
    }

    if what == "small" || what == "all" {
        let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
        let config = small_config(seed);
        let topo = NetworkTopology::generate(&config).unwrap();
        let channel = ChannelModel::build(&topo, &config).unwrap();
        println!(
            "== small instance seed {}: N={} L={} M={} ==",
            seed,
            topo.num_nodes(),
            topo.num_links(),
            topo.num_groups
        );
        let t = Instant::now();
        let reference = solve_joint(&topo, &channel, &SolveOptions::default()).unwrap();
        println!(
            "reference: obj={:.6} Mbps power={:.6} W rounds={} [{:?}]",
            reference.solution.objective,
            reference.solution.total_power,
            reference.rounds,
            t.elapsed()
        );
        let t = Instant::now();
        let layered = run_layered(&topo, &channel, &LayeredOptions::default()).unwrap();
        println!(
            "layered: obj={:.6} iters={} conv={} gap={:.4}% [{:?}]",
            layered.solution.objective,
            layered.iterations,
            layered.converged,
            100.0 * (reference.solution.objective - layered.solution.objective).abs()
                / reference.solution.objective,
            t.elapsed()
        );
        let t = Instant::now();
        let (device, _log) =
            run_device(&topo, &channel, &DeviceOptions::default(), &EventSchedule::empty())
                .unwrap();
        println!(
            "device: obj={:.6} iters={} conv={} gap={:.4}% [{:?}]",
            device.solution.objective,
            device.iterations,
            device.converged,
            100.0 * (reference.solution.objective - device.solution.objective).abs()
                / reference.solution.objective,
            t.elapsed()
        );
        let worst = verify_solution(&device.solution, &topo, &channel).worst();
        println!("device worst violation {:.3e}", worst);

        // Warm start: converge, rescale noise, re-converge; compare with a
        // cold run on the rescaled channel.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let factors: Vec<f64> =
            (0..topo.num_nodes()).map(|_| rng.gen_range(0.5..2.5)).collect();
        let mut warm = DeviceAdmm::new(&topo, &channel, DeviceOptions::default());
        let cold1 = warm.run_to_convergence(2000).unwrap();
        warm.apply_event(&EventKind::NoiseRescale { factors: factors.clone() });
        let warm_iters = warm.run_to_convergence(2000).unwrap();
        let mut scaled = channel.clone();
        for (l, link) in topo.links.iter().enumerate() {
            scaled.sigma[l] *= factors[link.dest];
        }
        let mut cold = DeviceAdmm::new(&topo, &scaled, DeviceOptions::default());
        let cold2 = cold.run_to_convergence(2000).unwrap();
        println!(
            "warm start: cold1={} warm={} cold2={} ratio={:.2}",
            cold1,
            warm_iters,
            cold2,
            warm_iters as f64 / cold2 as f64
        );
    }

    if what == "agree" || what == "all" {
        println!("== agreement pilot: random small topologies ==");
        let t_all = Instant::now();
        let reps: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10);
        let start: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);
        let mut worst_lay = 0f64;
        let mut worst_dev = 0f64;
        for seed in start..reps {
            let config = ScenarioConfig {
                sector_radius: 120.0,
                sector_angle: 360.0,
                num_users: 5 + (seed % 7) as usize,
                group_width_d: 30.0,
                reuse_factor_f: if seed % 3 == 0 {
                    ReuseFactor::Infinite
                } else {
                    ReuseFactor::Finite(3)
                },
                theta: 25.0,
                d_th_factor: 1.6,
                alpha: 900.0,
                rng_seed: 1000 + seed,
                ..ScenarioConfig::default()
            };
            let topo = match NetworkTopology::generate(&config) {
                Ok(t) => t,
                Err(e) => {
                    println!("  seed {} skipped: {}", seed, e);
                    continue;
                }
            };
            if topo.num_links() > 20 {
                println!("  seed {}: L={} (too big)", seed, topo.num_links());
                continue;
            }
            let channel = ChannelModel::build(&topo, &config).unwrap();
            let reference = solve_joint(&topo, &channel, &SolveOptions::default()).unwrap();
            let lay_opts = LayeredOptions {
                eps_abs: 1e-5,
                eps_rel: 1e-4,
                max_iters: 3000,
                ..LayeredOptions::default()
            };
            let layered = run_layered(&topo, &channel, &lay_opts).unwrap();
            let dev_opts = DeviceOptions {
                eps_abs: 1e-5,
                eps_rel: 1e-4,
                max_iters: 6000,
                ..DeviceOptions::default()
            };
            let (device, _) =
                run_device(&topo, &channel, &dev_opts, &EventSchedule::empty()).unwrap();
            let gl = (reference.solution.objective - layered.solution.objective).abs()
                / reference.solution.objective;
            let gd = (reference.solution.objective - device.solution.objective).abs()
                / reference.solution.objective;
            worst_lay = worst_lay.max(gl);
            worst_dev = worst_dev.max(gd);
            println!(
                "  seed {}: N={} L={} ref={:.4} lay {:.3}% ({} it) dev {:.3}% ({} it, conv {})",
                seed,
                topo.num_nodes(),
                topo.num_links(),
                reference.solution.objective,
                100.0 * gl,
                layered.iterations,
                100.0 * gd,
                device.iterations,
                device.converged
            );
        }
        println!(
            "worst layered gap {:.3}%, worst device gap {:.3}%, total {:?}",
            100.0 * worst_lay,
            100.0 * worst_dev,
            t_all.elapsed()
        );
    }

    if what == "sweep" || what == "all" {
        println!("== sector sweep pilot (alpha=900) ==");
        let reps: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2);
        let t_all = Instant::now();
        for seed in 1..=reps {
            for &dbm in &[0.0, 10.0, 20.0, 25.0, 30.0] {
                for mode in ["f3", "f4", "direct"] {
                    let config = ScenarioConfig {
                        alpha: 900.0,
                        p_max: dbm_to_watts(dbm),
                        reuse_factor_f: match mode {
                            "f3" => ReuseFactor::Finite(3),
                            "f4" => ReuseFactor::Finite(4),
                            _ => ReuseFactor::Infinite,
                        },
                        rng_seed: seed,
                        ..ScenarioConfig::default()
                    };
                    let t = Instant::now();
                    let (obj, power) = if mode == "direct" {
                        let relay = NetworkTopology::generate(&config).unwrap();
                        let star = NetworkTopology::direct_star(relay.positions.clone());
                        let channel = ChannelModel::build_direct(&star, &config).unwrap();
                        let run = solve_direct(&star, &channel, &SolveOptions::default()).unwrap();
                        (run.solution.objective, run.solution.total_power)
                    } else {
                        let topo = NetworkTopology::generate(&config).unwrap();
                        let channel = ChannelModel::build(&topo, &config).unwrap();
                        let opts =
                            SolveOptions { epsilon_power: 1e-2, ..SolveOptions::default() };
                        let run = solve_joint(&topo, &channel, &opts).unwrap();
                        (run.solution.objective, run.solution.total_power)
                    };
                    println!(
                        "  seed {} {:>6} {:>4} dBm: rate {:>9.4} Kbps power {:>10.4} mW [{:?}]",
                        seed,
                        mode,
                        dbm,
                        obj * 1e3,
                        power * 1e3,
                        t.elapsed()
                    );
                }
            }
        }
        println!("sweep pilot total {:?}", t_all.elapsed());
    }

    if what == "c5scan" {
        println!("== alpha scan at 0 dBm, f3 vs direct ==");
        for &alpha in &[75.0] {
            let mut rate3 = 0.0;
            let mut pow3 = 0.0;
            let mut rated = 0.0;
            let mut powd = 0.0;
            let reps = 30u64;
            for seed in 1..=reps {
                let config = ScenarioConfig {
                    alpha,
                    p_max: dbm_to_watts(0.0),
                    reuse_factor_f: ReuseFactor::Finite(3),
                    rng_seed: seed,
                    ..ScenarioConfig::default()
                };
                let topo = NetworkTopology::generate(&config).unwrap();
                let channel = ChannelModel::build(&topo, &config).unwrap();
                let run = solve_joint(&topo, &channel, &SolveOptions::default()).unwrap();
                rate3 += run.solution.objective;
                pow3 += run.solution.total_power;
                let star = NetworkTopology::direct_star(topo.positions.clone());
                let dchan = ChannelModel::build_direct(&star, &config).unwrap();
                let drun = solve_direct(&star, &dchan, &SolveOptions::default()).unwrap();
                rated += drun.solution.objective;
                powd += drun.solution.total_power;
            }
            let n = reps as f64;
            println!(
                "  alpha {:>6}: f3 rate {:>8.2} Kbps pow {:>8.3} mW | direct rate {:>8.2} Kbps pow {:>8.3} mW | ratios rate {:.2} pow {:.3}",
                alpha,
                rate3 / n * 1e3,
                pow3 / n * 1e3,
                rated / n * 1e3,
                powd / n * 1e3,
                (rate3 / rated),
                (pow3 / powd)
            );
        }
    }
}
