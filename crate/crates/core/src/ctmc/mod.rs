//! State grids, generator assembly and path simulation.

mod generator;
mod grid;
mod simulate;
mod time;

pub use generator::{build_generator, GeneratorMatrix, RatePolicy};
pub use grid::{build_grid, SpatialGrid, SplitPolicy};
pub use simulate::{parisian_path, simulate_paths, simulate_up_crossing, ChainSampler, McEstimate, PathOutcome, SimulationSpec};
pub use time::{first_index_above, TimeGrid};
