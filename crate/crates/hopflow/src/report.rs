//! File outputs. All writers go through a temp-file rename so a crashed run
//! never leaves a half-written artifact.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::channel::ChannelModel;
use crate::experiment::{RunOutput, SweepResult, TraceRecord};
use crate::solution::GlobalSolution;
use crate::topology::NetworkTopology;

fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let mut tmp_name = path.as_os_str().to_owned();
    tmp_name.push(".tmp");
    let tmp = PathBuf::from(tmp_name);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

/// `topology.csv`: a `# nodes` section (id, position, ring; the collection
/// point is node 0 with ring 0) followed by a `# links` section.
pub fn write_topology_csv(path: &Path, topology: &NetworkTopology) -> io::Result<()> {
    let mut out = String::new();
    out.push_str("# nodes\n");
    out.push_str("node,x_m,y_m,ring\n");
    for (n, &(x, y)) in topology.positions.iter().enumerate() {
        writeln!(out, "{n},{x},{y},{}", topology.group_of[n]).unwrap();
    }
    out.push_str("# links\n");
    out.push_str("link,source,dest,distance_m\n");
    for (l, link) in topology.links.iter().enumerate() {
        writeln!(out, "{l},{},{},{}", link.source, link.dest, link.distance).unwrap();
    }
    write_atomic(path, out.as_bytes())
}

/// `solution.csv`: `# links` (flow, power, bandwidth per link), `# nodes`
/// (rate and bandwidth share per node) and `# classes` (spectrum slices).
pub fn write_solution_csv(
    path: &Path,
    topology: &NetworkTopology,
    solution: &GlobalSolution,
) -> io::Result<()> {
    let mut out = String::new();
    out.push_str("# links\n");
    out.push_str("link,source,dest,flow_mbps,power_w,bandwidth_mhz\n");
    for (l, link) in topology.links.iter().enumerate() {
        writeln!(
            out,
            "{l},{},{},{},{},{}",
            link.source, link.dest, solution.flows[l], solution.powers[l], solution.bandwidths[l]
        )
        .unwrap();
    }
    out.push_str("# nodes\n");
    out.push_str("node,ring,rate_mbps,bandwidth_mhz\n");
    for n in 0..topology.num_nodes() {
        writeln!(
            out,
            "{n},{},{},{}",
            topology.group_of[n], solution.rates[n], solution.node_bandwidths[n]
        )
        .unwrap();
    }
    out.push_str("# classes\n");
    out.push_str("class,bandwidth_mhz\n");
    for (c, &w) in solution.class_bandwidths.iter().enumerate() {
        writeln!(out, "{c},{w}").unwrap();
    }
    write_atomic(path, out.as_bytes())
}

/// `trace.csv`: one row per iteration. The share columns are only filled by
/// the per-device route; they stay empty for the layered one.
pub fn write_trace_csv(path: &Path, trace: &[TraceRecord]) -> io::Result<()> {
    let mut out = String::new();
    out.push_str(
        "iteration,objective_mbps,primal_residual,dual_residual,share_residual,share_dual\n",
    );
    for row in trace {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.iteration,
            row.objective,
            row.primal_residual,
            row.dual_residual,
            opt(row.share_residual),
            opt(row.share_dual)
        )
        .unwrap();
    }
    write_atomic(path, out.as_bytes())
}

/// `sweep_summary.csv`: one aggregated row per (value, mode) cell.
pub fn write_sweep_summary_csv(path: &Path, result: &SweepResult) -> io::Result<()> {
    let mut out = String::new();
    out.push_str(
        "variable,value,mode,replications,failures,mean_objective_kbps,std_objective_kbps,\
         mean_power_watts,std_power_watts,mean_power_dbm,mean_iterations\n",
    );
    for cell in &result.cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            cell.variable,
            cell.value,
            cell.mode,
            cell.replications,
            cell.failures,
            cell.mean_objective_kbps,
            cell.std_objective_kbps,
            cell.mean_power_watts,
            cell.std_power_watts,
            cell.mean_power_dbm,
            cell.mean_iterations
        )
        .unwrap();
    }
    write_atomic(path, out.as_bytes())
}

/// `runs.csv`: the unaggregated per-replication records behind a sweep.
pub fn write_runs_csv(path: &Path, result: &SweepResult) -> io::Result<()> {
    let mut out = String::new();
    out.push_str(
        "mode,seed,num_users,num_links,objective_kbps,total_power_watts,total_power_dbm,\
         iterations,converged,worst_violation,runtime_secs\n",
    );
    for run in &result.runs {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            run.mode,
            run.seed,
            run.num_users,
            run.num_links,
            run.objective_kbps,
            run.total_power_watts,
            run.total_power_dbm,
            run.iterations,
            run.converged,
            run.worst_violation,
            run.runtime_secs
        )
        .unwrap();
    }
    write_atomic(path, out.as_bytes())
}

/// Channel summary alongside a run, for reproducibility checks.
fn write_channel_json(path: &Path, channel: &ChannelModel) -> io::Result<()> {
    let value = serde_json::json!({
        "reuse": channel.reuse,
        "gamma_w_per_mhz": if channel.gamma.is_finite() {
            serde_json::Value::from(channel.gamma)
        } else {
            serde_json::Value::from("inf")
        },
        "p_max_w": channel.p_max,
        "w_max_mhz": channel.w_max,
        "num_links": channel.gains.len(),
    });
    write_atomic(path, serde_json::to_string_pretty(&value)?.as_bytes())
}

/// Writes the full artifact set for one run into `dir`: `topology.csv`,
/// `solution.csv`, `trace.csv`, `summary.json`, `channel.json` and, for the
/// per-device route, `messages.jsonl`.
pub fn write_run_artifacts(dir: &Path, output: &RunOutput) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    write_topology_csv(&dir.join("topology.csv"), &output.topology)?;
    write_solution_csv(&dir.join("solution.csv"), &output.topology, &output.solution)?;
    write_trace_csv(&dir.join("trace.csv"), &output.trace)?;
    write_atomic(
        &dir.join("summary.json"),
        serde_json::to_string_pretty(&output.record)?.as_bytes(),
    )?;
    write_channel_json(&dir.join("channel.json"), &output.channel)?;
    if let Some(log) = &output.messages {
        let mut buf = Vec::new();
        log.write_jsonl(&mut buf)?;
        write_atomic(&dir.join("messages.jsonl"), &buf)?;
    }
    Ok(())
}

/// Writes `sweep_summary.csv` and `runs.csv` for a sweep into `dir`.
pub fn write_sweep_artifacts(dir: &Path, result: &SweepResult) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    write_sweep_summary_csv(&dir.join("sweep_summary.csv"), result)?;
    write_runs_csv(&dir.join("runs.csv"), result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{run_scenario, RunOverrides, SolverMode};
    use crate::scenario::ScenarioConfig;

    fn small_config() -> ScenarioConfig {
        ScenarioConfig {
            num_users: 2,
            sector_radius: 50.0,
            group_width_d: 40.0,
            reuse_factor_f: crate::channel::ReuseFactor::Infinite,
            rng_seed: 7,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn run_artifacts_are_written_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let output =
            run_scenario(&small_config(), SolverMode::Reference, &RunOverrides::default()).unwrap();
        write_run_artifacts(dir.path(), &output).unwrap();
        for name in ["topology.csv", "solution.csv", "trace.csv", "summary.json", "channel.json"] {
            assert!(dir.path().join(name).exists(), "missing {name}");
        }
        let first = fs::read_to_string(dir.path().join("solution.csv")).unwrap();
        assert!(first.starts_with("# links\n"));

        let output2 =
            run_scenario(&small_config(), SolverMode::Reference, &RunOverrides::default()).unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        write_run_artifacts(dir2.path(), &output2).unwrap();
        let second = fs::read_to_string(dir2.path().join("solution.csv")).unwrap();
        assert_eq!(first, second, "same seed must reproduce byte-identical artifacts");
    }

    #[test]
    fn no_tmp_files_left_behind() {
        let dir = tempfile::tempdir().unwrap();
        let output =
            run_scenario(&small_config(), SolverMode::Direct, &RunOverrides::default()).unwrap();
        write_run_artifacts(dir.path(), &output).unwrap();
        for entry in fs::read_dir(dir.path()).unwrap() {
            let name = entry.unwrap().file_name();
            assert!(!name.to_string_lossy().ends_with(".tmp"), "leftover {name:?}");
        }
    }
}
