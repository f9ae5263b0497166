//! Integration, Picard distances, the level iteration and its probes.

pub mod homotopy;
pub mod integrate;
pub mod iteration;
pub mod picard;
pub mod stability;

pub use homotopy::homotopy;
pub use integrate::{integrate, sup_distance, IntegrateOptions, Trajectory};
pub use iteration::{build_extremal, BuildOptions, IterationState, IterationStatus, LevelView};
pub use picard::{h_integral, picard_distance, PicardDistance};
pub use stability::{closeness, continuity_probe, stability_probe, start_grid};
