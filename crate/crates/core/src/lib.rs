//! SU(2)-resolved exact diagonalization of Heisenberg chains and
//! eigenstate-thermalization statistics of spherical tensor operators.

pub mod consistency;
pub mod coupled_basis;
pub mod model_ops;
pub mod sparse;
pub mod spin_algebra;
pub mod spectral;
pub mod eth_stats;
