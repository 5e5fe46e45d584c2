//! Agent-based simulator of wealth dynamics and trust-driven investment
//! projects, with analysis of the bipartite investor-initiator networks the
//! dynamics grow.
//!
//! - [`model`]: agent state and the pure wealth/weight/reputation arithmetic
//! - [`project`]: solicitation, Boltzmann acceptance, launch, settlement
//! - [`runner`]: the deterministic discrete-time loop and snapshotting
//! - [`analysis`]: network metrics, rank-size statistics, tail fits
//! - [`rng`]: the seeded random stream everything consumes

pub mod analysis;
pub mod model;
pub mod project;
pub mod rng;
pub mod runner;
