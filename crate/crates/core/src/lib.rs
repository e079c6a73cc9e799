//! Pricing of American Parisian options by continuous-time Markov chain
//! approximation.
//!
//! ```
//! use parisian::models::{BsParams, ModelParams};
//! use parisian::pricing::{price, PricingOptions};
//! use parisian::{ContractSpec, Flavor, Payoff};
//!
//! let params = ModelParams::Bs(BsParams { sigma: 0.3, r_f: 0.1, dividend: 0.05, log_space: false });
//! let contract = ContractSpec {
//!     payoff: Payoff::Call(95.0),
//!     barrier: 90.0,
//!     window: 1.0 / 12.0,
//!     maturity: Some(1.0),
//!     rate: params.rate(),
//!     flavor: Flavor::DownOut,
//! };
//! let opts = PricingOptions { n: 129, ..Default::default() };
//! let v = price(&params.build()?, &contract, 90.0, &opts)?;
//! assert!(v.price > 0.0);
//! # Ok::<(), parisian::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod blocks;
pub mod contract;
pub mod config;
pub mod ctmc;
pub mod downin;
pub mod downout;
pub mod error;
pub mod models;
pub mod numerics;
pub mod oracle;
pub mod pricing;
pub mod study;
pub mod tables;

pub use contract::{ContractSpec, Flavor, Payoff};
pub use error::{Error, Result};
