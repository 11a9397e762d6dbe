//! Thermodynamic quantities: potentials, partition sums, pressure and the
//! uniqueness bounds built from the expansion profile.

mod bounds;
mod potential;
mod pressure;

pub use bounds::*;
pub use potential::{lift, Potential, PotentialBounds, PotentialKind};
pub use pressure::{
    birkhoff_sum, bowen_distance, build_separated_set, collection_candidates, estimate_entropy, estimate_pressure,
    fit_slope, is_separated, partition_sum, BowenSpace, CandidateBudget, CandidatePool, Collection, PartitionSum,
    PressureEstimate, PressureSchedules, SeparatedSet,
};
pub(crate) use pressure::fmt_f64;
