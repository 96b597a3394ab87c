//! Simulated chain and the clients contract that gates uploads on proofs.

pub mod chain;
pub mod contract;
pub mod incentives;

pub use chain::{tx_digest, Block, Chain};
pub use contract::{aggregate, Address, ClientRecord, ClientsContract, ContractError, ContractState, GenericParams, Ledger, TxKind, TxRecord, TxStatus};
pub use incentives::{compute_incentives, IncentiveError};
