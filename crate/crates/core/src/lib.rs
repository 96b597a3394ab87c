//! Verifiable federated linear regression: fixed-point field codec,
//! algebraic Merkle commitments, training, hash-derived Laplace noise,
//! rank-1 constraint circuits, a simulated ledger and a scenario runner.

pub mod field;
pub mod hash;
pub mod merkle;
pub mod bounds;
pub mod dp;
pub mod linreg;
pub mod circuits;
pub mod client;
pub mod ledger;
pub mod scenario;
