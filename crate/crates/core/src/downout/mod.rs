//! Down-out American Parisian options.
//!
//! The option is cancelled once the asset has spent a continuous window `D`
//! below the barrier `L`. The age of the current excursion is tracked on a
//! grid of step `δ_d`, which turns the problem into an American option on
//! the augmented chain of (age, state).

mod operator;
mod pricer;
mod space;

pub use operator::AugmentedOperator;
pub use pricer::{augmented_generator, price_finite_downout, price_perpetual_downout};
pub use space::AugmentedStateSpace;
