//! Sector geometry, ring grouping and link candidates.
//!
//! All traffic flows toward a single collection point (node 0) at the origin
//! of a circular sector. Users are grouped by distance into concentric rings:
//! the innermost ring spans twice the ring width `d`, every further ring
//! spans `d`. A user may relay through a neighbor one ring closer when the
//! two are angularly aligned and near enough; users in the innermost ring
//! connect straight to the collection point.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

use crate::scenario::ScenarioConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Link {
    pub source: usize,
    pub dest: usize,
    pub distance: f64,
}

/// A generated network instance. Node 0 is the collection point at the
/// origin; nodes `1..N` are users. `group_of[0]` is 0 as a placeholder,
/// users carry 1-based ring ids.
#[derive(Clone, Debug)]
pub struct NetworkTopology {
    pub positions: Vec<(f64, f64)>,
    pub group_of: Vec<usize>,
    pub num_groups: usize,
    pub links: Vec<Link>,
    pub out_links: Vec<Vec<usize>>,
    pub in_links: Vec<Vec<usize>>,
}

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("node {node} at radius {radius:.3} lies outside the sector radius {sector_radius:.3}")]
    OutsideSector { node: usize, radius: f64, sector_radius: f64 },
    #[error("could not cover all {groups} rings with {users} users in {attempts} attempts; density too low")]
    InfeasibleDensity { groups: usize, users: usize, attempts: usize },
    #[error("node {node} has no outgoing link; widen theta or the distance threshold")]
    DisconnectedNode { node: usize },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

/// Number of rings for a sector of radius `r` and ring width `d`.
pub fn ring_count(sector_radius: f64, d: f64) -> usize {
    if sector_radius <= 2.0 * d {
        1
    } else {
        ((sector_radius - 2.0 * d) / d).ceil() as usize + 1
    }
}

/// 1-based ring id for a user at distance `rho` from the origin. Distances
/// beyond the outermost boundary fold into the last ring; boundary ties go
/// inward.
pub fn ring_of(rho: f64, d: f64, num_groups: usize) -> usize {
    if rho <= 2.0 * d {
        return 1;
    }
    let g = ((rho - 2.0 * d) / d).ceil() as usize + 1;
    g.min(num_groups)
}

/// Ring ids for a full position set (entry 0 is the collection point and
/// gets the placeholder 0). Rejects users outside the sector radius.
pub fn assign_rings(
    positions: &[(f64, f64)],
    d: f64,
    sector_radius: f64,
) -> Result<(Vec<usize>, usize), TopologyError> {
    let m = ring_count(sector_radius, d);
    let mut groups = vec![0; positions.len().min(1)];
    for (node, &(x, y)) in positions.iter().enumerate().skip(1) {
        let rho = (x * x + y * y).sqrt();
        if rho > sector_radius * (1.0 + 1e-12) {
            return Err(TopologyError::OutsideSector { node, radius: rho, sector_radius });
        }
        groups.push(ring_of(rho, d, m));
    }
    Ok((groups, m))
}

/// Angular separation wrapped into `[0, pi]`.
pub fn angular_separation(a: f64, b: f64) -> f64 {
    let diff = (a - b).rem_euclid(2.0 * PI);
    if diff > PI {
        2.0 * PI - diff
    } else {
        diff
    }
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

impl NetworkTopology {
    /// Samples user positions and wires relay links per `config`.
    ///
    /// Positions are drawn uniformly over the sector area and redrawn as a
    /// whole until every ring holds at least one user (capped attempts).
    /// A non-innermost user with no aligned neighbor in the next ring inward
    /// is an error, not a resample.
    pub fn generate(config: &ScenarioConfig) -> Result<Self, TopologyError> {
        config.validate().map_err(|e| TopologyError::InvalidScenario(e.to_string()))?;
        let d = config.group_width_d;
        let m = ring_count(config.sector_radius, d);
        let n_users = config.num_users;
        let angle = config.sector_angle_rad();
        let mut rng = ChaCha20Rng::seed_from_u64(config.rng_seed);

        const MAX_ATTEMPTS: usize = 10_000;
        for _ in 0..MAX_ATTEMPTS {
            let mut positions = Vec::with_capacity(n_users + 1);
            positions.push((0.0, 0.0));
            for _ in 0..n_users {
                let rho = config.sector_radius * rng.gen::<f64>().sqrt();
                let phi = angle * rng.gen::<f64>();
                positions.push((rho * phi.cos(), rho * phi.sin()));
            }
            let (groups, _) = assign_rings(&positions, d, config.sector_radius)?;
            let mut seen = vec![false; m + 1];
            for &g in groups.iter().skip(1) {
                seen[g] = true;
            }
            if n_users > 0 && !seen.iter().skip(1).all(|&s| s) {
                continue;
            }
            // A draw that leaves some node without any relay candidate is
            // rejected the same way as one that misses a ring.
            match Self::assemble(positions, groups, m, config.theta_rad(), config.d_th_factor * d)
            {
                Ok(topology) => return Ok(topology),
                Err(TopologyError::DisconnectedNode { .. }) => continue,
                Err(other) => return Err(other),
            }
        }
        Err(TopologyError::InfeasibleDensity { groups: m, users: n_users, attempts: MAX_ATTEMPTS })
    }

    /// Builds the link set over given positions and ring assignments.
    pub fn assemble(
        positions: Vec<(f64, f64)>,
        group_of: Vec<usize>,
        num_groups: usize,
        theta: f64,
        d_th: f64,
    ) -> Result<Self, TopologyError> {
        let n = positions.len();
        let mut links = Vec::new();
        for i in 1..n {
            let gi = group_of[i];
            if gi == 1 {
                links.push(Link { source: i, dest: 0, distance: distance(positions[i], (0.0, 0.0)) });
                continue;
            }
            let ai = positions[i].1.atan2(positions[i].0);
            let before = links.len();
            for j in 1..n {
                if group_of[j] != gi - 1 {
                    continue;
                }
                let aj = positions[j].1.atan2(positions[j].0);
                let dist = distance(positions[i], positions[j]);
                if angular_separation(ai, aj) < theta && dist < d_th {
                    links.push(Link { source: i, dest: j, distance: dist });
                }
            }
            if links.len() == before {
                return Err(TopologyError::DisconnectedNode { node: i });
            }
        }

        let mut out_links = vec![Vec::new(); n];
        let mut in_links = vec![Vec::new(); n];
        for (l, link) in links.iter().enumerate() {
            out_links[link.source].push(l);
            in_links[link.dest].push(l);
        }
        Ok(Self { positions, group_of, num_groups, links, out_links, in_links })
    }

    /// Star instance: every user gets one direct link to the collection
    /// point and all users share a single ring (used by the single-hop
    /// baseline).
    pub fn direct_star(positions: Vec<(f64, f64)>) -> Self {
        let n = positions.len();
        let mut links = Vec::new();
        let mut out_links = vec![Vec::new(); n];
        let mut in_links = vec![Vec::new(); n];
        for i in 1..n {
            out_links[i].push(links.len());
            in_links[0].push(links.len());
            links.push(Link { source: i, dest: 0, distance: distance(positions[i], (0.0, 0.0)) });
        }
        let mut group_of = vec![1; n];
        group_of[0] = 0;
        Self { positions, group_of, num_groups: 1, links, out_links, in_links }
    }

    pub fn num_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn num_users(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    /// Node-link incidence: `+1` at the source row, `-1` at the destination
    /// row of each link column.
    pub fn incidence(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.links.len()]; self.num_nodes()];
        for (l, link) in self.links.iter().enumerate() {
            a[link.source][l] = 1.0;
            a[link.dest][l] = -1.0;
        }
        a
    }

    /// Net injected rate per node, `r = A x`. Entry 0 is the (negative)
    /// total traffic absorbed by the collection point.
    pub fn node_rates(&self, flows: &[f64]) -> Vec<f64> {
        assert_eq!(flows.len(), self.links.len());
        let mut r = vec![0.0; self.num_nodes()];
        for (l, link) in self.links.iter().enumerate() {
            r[link.source] += flows[l];
            r[link.dest] -= flows[l];
        }
        r
    }

    /// Users of each ring, indexed by 1-based ring id.
    pub fn ring_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.num_groups + 1];
        for (node, &g) in self.group_of.iter().enumerate().skip(1) {
            members[g].push(node);
        }
        members
    }

    /// True when every user can still reach node 0 using only `alive` links.
    pub fn all_users_connected(&self, alive: &[bool]) -> bool {
        assert_eq!(alive.len(), self.links.len());
        let mut reach = vec![false; self.num_nodes()];
        reach[0] = true;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            for &l in &self.in_links[node] {
                if alive[l] && !reach[self.links[l].source] {
                    reach[self.links[l].source] = true;
                    stack.push(self.links[l].source);
                }
            }
        }
        reach.iter().all(|&r| r)
    }
}
