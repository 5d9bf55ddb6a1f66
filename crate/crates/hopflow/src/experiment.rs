//! Experiment orchestration: single runs, replicated sweeps, quantization.
//!
//! A run samples a topology from a scenario, solves it with one of the four
//! solver routes and returns the allocation plus a summary record. A sweep
//! varies one knob across a value grid, repeats each cell over seeded
//! replications and aggregates means and deviations. Everything is
//! deterministic in the configured seeds.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity::capacity;
use crate::channel::{ChannelModel, ChannelError, ReuseFactor};
use crate::device::{run_device, DeviceError, DeviceOptions, EventSchedule, MessageLog};
use crate::layered::{run_layered, LayeredError, LayeredOptions};
use crate::reference::{solve_direct, solve_joint, SolveError, SolveOptions};
use crate::scenario::{watts_to_dbm, ScenarioConfig, ScenarioError};
use crate::solution::{verify_solution, GlobalSolution};
use crate::topology::{NetworkTopology, TopologyError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    /// Centralized cutting-plane solve of the joint problem.
    Reference,
    /// Two-block split between routing and the physical layer.
    Layered,
    /// Per-device decomposition with coordination units.
    Device,
    /// Single-hop star with no relaying and no spectrum reuse.
    Direct,
}

impl fmt::Display for SolverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SolverMode::Reference => "reference",
            SolverMode::Layered => "layered",
            SolverMode::Device => "device",
            SolverMode::Direct => "direct",
        };
        f.write_str(name)
    }
}

impl FromStr for SolverMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "reference" => Ok(SolverMode::Reference),
            "layered" => Ok(SolverMode::Layered),
            "device" => Ok(SolverMode::Device),
            "direct" => Ok(SolverMode::Direct),
            other => Err(format!(
                "unknown mode `{other}` (expected reference, layered, device or direct)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Reference(#[from] SolveError),
    #[error(transparent)]
    Layered(#[from] LayeredError),
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Knobs shared by the CLI and the sweep layer; `None` keeps the per-solver
/// default.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub max_iters: Option<usize>,
    pub rho: Option<f64>,
}

/// Flat summary of one solve, ready for a CSV row.
#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub mode: SolverMode,
    pub seed: u64,
    pub num_users: usize,
    pub num_links: usize,
    pub objective_kbps: f64,
    pub total_power_watts: f64,
    pub total_power_dbm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub worst_violation: f64,
    pub runtime_secs: f64,
}

/// Solver-agnostic progress row for trace exports.
#[derive(Clone, Copy, Debug)]
pub struct TraceRecord {
    pub iteration: usize,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub share_residual: Option<f64>,
    pub share_dual: Option<f64>,
}

pub struct RunOutput {
    pub topology: NetworkTopology,
    pub channel: ChannelModel,
    pub solution: GlobalSolution,
    pub record: RunRecord,
    pub trace: Vec<TraceRecord>,
    pub messages: Option<MessageLog>,
}

fn effective_config(config: &ScenarioConfig, overrides: &RunOverrides) -> ScenarioConfig {
    let mut config = config.clone();
    if let Some(seed) = overrides.seed {
        config.rng_seed = seed;
    }
    config
}

/// Samples the scenario's topology and solves it in the requested mode.
///
/// `Direct` reuses the very same sampled positions, so relay and direct
/// records from one config/seed pair are comparable head to head.
pub fn run_scenario(
    config: &ScenarioConfig,
    mode: SolverMode,
    overrides: &RunOverrides,
) -> Result<RunOutput, ExperimentError> {
    let config = effective_config(config, overrides);
    config.validate()?;
    let relay = NetworkTopology::generate(&config)?;
    let start = Instant::now();
    let (topology, channel, solution, iterations, converged, trace, messages) = match mode {
        SolverMode::Reference => {
            let channel = ChannelModel::build(&relay, &config)?;
            let mut options = SolveOptions::from_config(&config);
            if let Some(max) = overrides.max_iters {
                options.max_rounds = max;
            }
            let run = solve_joint(&relay, &channel, &options)?;
            (relay, channel, run.solution, run.rounds, true, Vec::new(), None)
        }
        SolverMode::Layered => {
            let channel = ChannelModel::build(&relay, &config)?;
            let mut options = LayeredOptions::from_config(&config);
            if let Some(max) = overrides.max_iters {
                options.max_iters = max;
            }
            if let Some(rho) = overrides.rho {
                options.rho = rho;
            }
            let run = run_layered(&relay, &channel, &options)?;
            let trace = run
                .trace
                .iter()
                .map(|row| TraceRecord {
                    iteration: row.iteration,
                    objective: row.objective,
                    primal_residual: row.primal_residual,
                    dual_residual: row.dual_residual,
                    share_residual: None,
                    share_dual: None,
                })
                .collect();
            (relay, channel, run.solution, run.iterations, run.converged, trace, None)
        }
        SolverMode::Device => {
            let channel = ChannelModel::build(&relay, &config)?;
            let mut options = DeviceOptions::from_config(&config);
            if let Some(max) = overrides.max_iters {
                options.max_iters = max;
            }
            if let Some(rho) = overrides.rho {
                options.rho = rho;
            }
            let (run, log) = run_device(&relay, &channel, &options, &EventSchedule::empty())?;
            let trace = run
                .trace
                .iter()
                .map(|row| TraceRecord {
                    iteration: row.iteration,
                    objective: row.objective,
                    primal_residual: row.flow_gap,
                    dual_residual: row.flow_drift,
                    share_residual: Some(row.share_gap),
                    share_dual: Some(row.share_drift),
                })
                .collect();
            (relay, channel, run.solution, run.iterations, run.converged, trace, Some(log))
        }
        SolverMode::Direct => {
            let star = NetworkTopology::direct_star(relay.positions.clone());
            let channel = ChannelModel::build_direct(&star, &config)?;
            let options = SolveOptions::from_config(&config);
            let run = solve_direct(&star, &channel, &options)?;
            (star, channel, run.solution, run.rounds, true, Vec::new(), None)
        }
    };
    let runtime_secs = start.elapsed().as_secs_f64();
    let report = verify_solution(&solution, &topology, &channel);
    let record = RunRecord {
        mode,
        seed: config.rng_seed,
        num_users: topology.num_users(),
        num_links: topology.num_links(),
        objective_kbps: solution.objective * 1e3,
        total_power_watts: solution.total_power,
        total_power_dbm: watts_to_dbm(solution.total_power),
        iterations,
        converged,
        worst_violation: report.worst(),
        runtime_secs,
    };
    Ok(RunOutput { topology, channel, solution, record, trace, messages })
}

/// The knob a sweep varies, with its value grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum SweepVariable {
    /// Per-node power budget in dBm.
    PMaxDbm { values: Vec<f64> },
    /// Spectrum reuse factor.
    ReuseF { values: Vec<ReuseFactor> },
    /// Network size.
    NumUsers { values: Vec<usize> },
    /// Penalty weight for the splitting methods.
    Rho { values: Vec<f64> },
}

impl SweepVariable {
    pub fn labels(&self) -> Vec<String> {
        match self {
            SweepVariable::PMaxDbm { values } => values.iter().map(|v| v.to_string()).collect(),
            SweepVariable::ReuseF { values } => values.iter().map(|v| v.to_string()).collect(),
            SweepVariable::NumUsers { values } => values.iter().map(|v| v.to_string()).collect(),
            SweepVariable::Rho { values } => values.iter().map(|v| v.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SweepVariable::PMaxDbm { values } => values.len(),
            SweepVariable::ReuseF { values } => values.len(),
            SweepVariable::NumUsers { values } => values.len(),
            SweepVariable::Rho { values } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn apply(&self, index: usize, config: &mut ScenarioConfig, overrides: &mut RunOverrides) {
        match self {
            SweepVariable::PMaxDbm { values } => {
                config.p_max = crate::scenario::dbm_to_watts(values[index]);
            }
            SweepVariable::ReuseF { values } => config.reuse_factor_f = values[index],
            SweepVariable::NumUsers { values } => config.num_users = values[index],
            SweepVariable::Rho { values } => overrides.rho = Some(values[index]),
        }
    }
}

/// One curve in a sweep: a solver, optionally pinned to a reuse factor.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SweepMode {
    pub solver: SolverMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reuse: Option<ReuseFactor>,
}

impl SweepMode {
    pub fn label(&self) -> String {
        match self.reuse {
            Some(reuse) => format!("{}_f{}", self.solver, reuse),
            None => self.solver.to_string(),
        }
    }
}

fn default_replications() -> usize {
    30
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub scenario: ScenarioConfig,
    pub variable: SweepVariable,
    pub modes: Vec<SweepMode>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed_base: Option<u64>,
}

impl SweepSpec {
    pub fn from_file(path: &std::path::Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io { path: path.display().to_string(), source: e })?;
        let spec: SweepSpec = serde_json::from_str(&text)
            .map_err(|e| ScenarioError::Parse { path: path.display().to_string(), source: e })?;
        spec.scenario.validate()?;
        Ok(spec)
    }

    pub fn seed_base(&self) -> u64 {
        self.seed_base.unwrap_or(self.scenario.rng_seed)
    }
}

/// Aggregated cell: one (value, mode) pair across replications.
#[derive(Clone, Debug, Serialize)]
pub struct SweepCell {
    pub variable: String,
    pub value: String,
    pub mode: String,
    pub replications: usize,
    pub failures: usize,
    pub mean_objective_kbps: f64,
    pub std_objective_kbps: f64,
    pub mean_power_watts: f64,
    pub std_power_watts: f64,
    /// dBm of the mean power (not the mean of dBm values).
    pub mean_power_dbm: f64,
    pub mean_iterations: f64,
}

pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    pub runs: Vec<RunRecord>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var =
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() - 1) as f64;
    (mean, var.sqrt())
}

fn variable_name(variable: &SweepVariable) -> &'static str {
    match variable {
        SweepVariable::PMaxDbm { .. } => "p_max_dbm",
        SweepVariable::ReuseF { .. } => "reuse_f",
        SweepVariable::NumUsers { .. } => "num_users",
        SweepVariable::Rho { .. } => "rho",
    }
}

/// Runs the full grid. Replication `r` of every cell uses seed
/// `seed_base + r`, so curves share topologies point for point. Failed
/// replications (infeasible draws, non-convergence) are counted and
/// excluded from the averages.
pub fn run_sweep(spec: &SweepSpec) -> SweepResult {
    let labels = spec.variable.labels();
    let name = variable_name(&spec.variable);
    let mut cells = Vec::new();
    let mut runs = Vec::new();
    for index in 0..spec.variable.len() {
        for mode in &spec.modes {
            let mut objectives = Vec::new();
            let mut powers = Vec::new();
            let mut iterations = Vec::new();
            let mut failures = 0usize;
            for r in 0..spec.replications {
                let mut config = spec.scenario.clone();
                let mut overrides = RunOverrides {
                    seed: Some(spec.seed_base() + r as u64),
                    ..RunOverrides::default()
                };
                spec.variable.apply(index, &mut config, &mut overrides);
                if let Some(reuse) = mode.reuse {
                    config.reuse_factor_f = reuse;
                }
                match run_scenario(&config, mode.solver, &overrides) {
                    Ok(output) => {
                        if output.record.converged {
                            objectives.push(output.record.objective_kbps);
                            powers.push(output.record.total_power_watts);
                            iterations.push(output.record.iterations as f64);
                        } else {
                            failures += 1;
                        }
                        runs.push(output.record);
                    }
                    Err(_) => failures += 1,
                }
            }
            let (mean_obj, std_obj) = mean_std(&objectives);
            let (mean_pow, std_pow) = mean_std(&powers);
            let (mean_iter, _) = mean_std(&iterations);
            cells.push(SweepCell {
                variable: name.to_string(),
                value: labels[index].clone(),
                mode: mode.label(),
                replications: objectives.len(),
                failures,
                mean_objective_kbps: mean_obj,
                std_objective_kbps: std_obj,
                mean_power_watts: mean_pow,
                std_power_watts: std_pow,
                mean_power_dbm: watts_to_dbm(mean_pow),
                mean_iterations: mean_iter,
            });
        }
    }
    SweepResult { cells, runs }
}

/// Result of snapping bandwidths onto a carrier grid.
#[derive(Clone, Debug)]
pub struct QuantizeReport {
    pub solution: GlobalSolution,
    /// Links whose bandwidth quantized to zero while carrying flow.
    pub zeroed_links: Vec<usize>,
    pub objective_before: f64,
    pub objective_after: f64,
}

/// Floors every link bandwidth to a multiple of `grid` (MHz) and restores
/// feasibility: powers re-capped by the density bound, then each node's
/// power re-spent to carry the largest uniform fraction of its old flows
/// that its budget still supports. `grid == 0` returns the input unchanged.
pub fn quantize_bandwidths(
    solution: &GlobalSolution,
    topology: &NetworkTopology,
    channel: &ChannelModel,
    grid: f64,
) -> QuantizeReport {
    assert!(grid >= 0.0, "grid must be nonnegative");
    if grid == 0.0 {
        return QuantizeReport {
            solution: solution.clone(),
            zeroed_links: Vec::new(),
            objective_before: solution.objective,
            objective_after: solution.objective,
        };
    }
    let l = topology.num_links();
    let mut bandwidths = Vec::with_capacity(l);
    let mut zeroed_links = Vec::new();
    for link in 0..l {
        let w = (solution.bandwidths[link] / grid).floor() * grid;
        if w == 0.0 && solution.flows[link] > 0.0 {
            zeroed_links.push(link);
        }
        bandwidths.push(w);
    }

    // Power a flow needs on a link at fixed bandwidth; inverse of the rate
    // curve, infinite when the bandwidth is gone.
    let power_for = |link: usize, flow: f64, w: f64| -> f64 {
        if flow <= 0.0 {
            return 0.0;
        }
        if w <= 0.0 {
            return f64::INFINITY;
        }
        let sigma = channel.sigma[link];
        let q = channel.gains[link];
        w * sigma / q * ((flow / w).exp2() - 1.0)
    };

    let mut flows = vec![0.0; l];
    let mut powers = vec![0.0; l];
    for node in 1..topology.num_nodes() {
        let out = &topology.out_links[node];
        if out.is_empty() {
            continue;
        }
        let cap = |link: usize, beta: f64| -> f64 {
            let p = power_for(link, solution.flows[link] * beta, bandwidths[link]);
            if channel.gamma.is_finite() {
                p.min(channel.gamma * bandwidths[link])
            } else {
                p
            }
        };
        let spend = |beta: f64| -> f64 { out.iter().map(|&link| cap(link, beta)).sum() };
        let beta = if spend(1.0) <= channel.p_max {
            1.0
        } else {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if spend(mid) <= channel.p_max {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        for &link in out {
            powers[link] = cap(link, beta);
            flows[link] = solution.flows[link]
                .min(capacity(bandwidths[link], powers[link], channel.gains[link], channel.sigma[link]));
            if beta < 1.0 {
                flows[link] = flows[link].min(solution.flows[link] * beta);
            }
        }
    }

    let quantized = GlobalSolution::assemble(
        topology,
        channel,
        flows,
        powers,
        bandwidths,
        solution.class_bandwidths.clone(),
    );
    QuantizeReport {
        objective_before: solution.objective,
        objective_after: quantized.objective,
        solution: quantized,
        zeroed_links,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_parsing_round_trips() {
        for mode in
            [SolverMode::Reference, SolverMode::Layered, SolverMode::Device, SolverMode::Direct]
        {
            assert_eq!(mode.to_string().parse::<SolverMode>().unwrap(), mode);
        }
        assert!("centralized".parse::<SolverMode>().is_err());
    }

    #[test]
    fn quantization_floors_to_grid() {
        let config = ScenarioConfig {
            num_users: 3,
            sector_radius: 50.0,
            group_width_d: 40.0,
            reuse_factor_f: ReuseFactor::Infinite,
            rng_seed: 7,
            ..ScenarioConfig::default()
        };
        let output = run_scenario(&config, SolverMode::Reference, &RunOverrides::default()).unwrap();
        let grid = 0.015;
        let report = quantize_bandwidths(&output.solution, &output.topology, &output.channel, grid);
        for &w in &report.solution.bandwidths {
            let steps = w / grid;
            assert!((steps - steps.round()).abs() < 1e-9, "bandwidth {w} off grid");
        }
        assert!(report.objective_after <= report.objective_before + 1e-9);
        let verify =
            verify_solution(&report.solution, &output.topology, &output.channel);
        assert!(verify.passes(1e-9), "{verify}");
    }

    #[test]
    fn zero_grid_is_identity() {
        let config = ScenarioConfig {
            num_users: 2,
            sector_radius: 50.0,
            group_width_d: 40.0,
            reuse_factor_f: ReuseFactor::Infinite,
            rng_seed: 7,
            ..ScenarioConfig::default()
        };
        let output = run_scenario(&config, SolverMode::Reference, &RunOverrides::default()).unwrap();
        let report = quantize_bandwidths(&output.solution, &output.topology, &output.channel, 0.0);
        assert_eq!(report.solution.bandwidths, output.solution.bandwidths);
        assert_eq!(report.objective_after, report.objective_before);
    }

    #[test]
    fn sweep_shares_seeds_across_modes() {
        let spec = SweepSpec {
            scenario: ScenarioConfig {
                num_users: 2,
                sector_radius: 50.0,
                group_width_d: 40.0,
                reuse_factor_f: ReuseFactor::Infinite,
                rng_seed: 7,
                ..ScenarioConfig::default()
            },
            variable: SweepVariable::PMaxDbm { values: vec![20.0, 25.0] },
            modes: vec![
                SweepMode { solver: SolverMode::Reference, reuse: None },
                SweepMode { solver: SolverMode::Direct, reuse: None },
            ],
            replications: 2,
            seed_base: None,
        };
        let result = run_sweep(&spec);
        assert_eq!(result.cells.len(), 4);
        for cell in &result.cells {
            assert_eq!(cell.failures, 0);
            assert_eq!(cell.replications, 2);
            assert!(cell.mean_objective_kbps.is_finite());
        }
        let seeds: Vec<u64> = result.runs.iter().map(|r| r.seed).collect();
        assert!(seeds.iter().filter(|&&s| s == 7).count() >= 4);
    }
}
