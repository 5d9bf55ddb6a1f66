//! Cross-layer optimizer for dense multi-hop wireless access networks.
//!
//! Nodes in a circular sector relay traffic inward to a single collection
//! point over short hops. The sector is partitioned into concentric rings,
//! rings far enough apart reuse the same spectrum, and a per-link power
//! density cap keeps that reuse interference below a chosen fraction of the
//! noise floor. On top of such a topology the crate solves the joint
//! routing / spectrum / power allocation problem that maximizes the minimum
//! end-to-end user rate, three ways:
//!
//! * [`reference`]: a centralized cutting-plane solver, used as ground truth.
//! * [`layered`]: a two-block ADMM split between a network layer (flows) and
//!   a physical layer (powers, bandwidths).
//! * [`device`]: a per-device ADMM in which every node solves a small local
//!   problem and two lightweight coordination units handle routing and
//!   spectrum shares, with all exchanged messages logged.
//!
//! [`experiment`] drives parameter sweeps and CSV reporting on top of the
//! solvers; the `hopflow` binary exposes the same through a flag-based CLI.

pub mod capacity;
pub mod channel;
pub mod device;
pub mod experiment;
pub mod layered;
pub mod planes;
pub mod projection;
pub mod qp;
pub mod reference;
pub mod report;
pub mod routing;
pub mod scenario;
pub mod solution;
pub mod topology;

pub use channel::ChannelModel;
pub use scenario::ScenarioConfig;
pub use solution::GlobalSolution;
pub use topology::NetworkTopology;
