//! Down-in American Parisian options.
//!
//! The option pays `f` once the asset has spent a continuous window `D`
//! below the barrier `L`. Prices decompose into first-passage kernels of the
//! chain composed with a vanilla American value started at the Parisian
//! time.

mod finite;
mod perpetual;

pub use finite::{
    bermudan_slice, kernel_h, kernel_u_minus, kernel_u_plus, kernel_v, poisson_weights, price_finite_downin,
    FiniteDownIn, FiniteKernels,
};
pub use perpetual::{
    parisian_transform, price_perpetual_downin, vanilla_american_perpetual, PerpetualDownIn, PerpetualKernels,
};
