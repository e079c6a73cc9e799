//! Independent reference computations used to check the pricers.

pub mod chain;
pub mod expm;
pub mod lcp;
pub mod parisian;
pub mod suites;

pub use chain::{value_iterate_american, value_iterate_slice, UniformizedChain};
pub use parisian::{age_chain_generator, bermudan_surface, finite_downin_exact, finite_downout_dp, perpetual_downout_dp};
