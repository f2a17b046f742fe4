//! Simulation and finite-time-scaling analysis of linearly driven
//! measurement-induced entanglement transitions in (1+1)D hybrid Clifford
//! circuits.

pub mod analysis;
pub mod clifford;
pub mod ensemble;
pub mod gf2;
pub mod observables;
pub mod protocol;
pub mod stabilizer;
