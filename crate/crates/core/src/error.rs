use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown site {0}")]
    UnknownSite(usize),
    #[error("empty sector: {particles} particles exceed capacity {capacity}")]
    EmptySector { particles: u32, capacity: u64 },
    #[error("lattice mismatch: {0}")]
    LatticeMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("transition from state {state} leaves the sector")]
    Assembly { state: String },
    #[error("absorption is unreachable from state {state}")]
    Unreachable { state: String },
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("chain is reducible: {0}")]
    Reducible(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
