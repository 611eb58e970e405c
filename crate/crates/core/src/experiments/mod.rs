//! Refinement ladders (schedules, consistency and convergence experiments)
//! and the concentration, Hölder and boundary diagnostics.

mod diagnostics;
mod ladder;
mod report;
mod schedule;

use thiserror::Error;

pub use self::diagnostics::{
    boundary_gap, concentration_check, holder_diagnostic, BoundaryGap, ConcentrationResult,
    HOLDER_MAX_PAIRS,
};
pub use self::ladder::{
    consistency_experiment, convergence_experiment, ConsistencySpec, ConvergenceSpec,
    COVERING_PROBES,
};
pub use self::report::{median, quantile, Aggregate, LadderReport, Record};
pub use self::schedule::{
    condition_value, make_schedule, Level, Schedule, ScheduleMode, PRACTICAL_N0,
    THEORETICAL_N_LIMIT,
};
use crate::calculus::CalculusError;
use crate::geometry::GeometryError;
use crate::operator::OperatorError;
use crate::solver::SolverError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("schedule: {0}")]
    Schedule(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sampling seed of task `(seed, stream)`; distinct streams of one seed give
/// unrelated clouds.
pub fn task_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_seeds_differ() {
        assert_ne!(task_seed(1, 0), task_seed(1, 1));
        assert_ne!(task_seed(1, 0), task_seed(2, 0));
        assert_eq!(task_seed(7, 3), task_seed(7, 3));
    }
}
