//! Tug-of-war operators on random geometric graphs.
//!
//! A cloud of i.i.d. points is drawn from a density on a domain
//! ([`geometry`]); the tug-of-war operator mixes an inf/sup bracket and a
//! neighborhood average over ε-balls ([`operator`]); its Dirichlet problem is
//! solved by monotone fixed-point sweeps ([`solver`]); analytic targets come
//! from exact second-order jets of closed-form fields ([`calculus`]); and
//! refinement ladders measure consistency and convergence ([`experiments`]).

// Negated comparisons throughout reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod experiments;
pub mod geometry;
pub mod operator;
pub mod solver;

pub use calculus::{CalculusError, PdeTarget, ScalarField, SmoothField};
pub use geometry::{DataCloud, Density, Domain, GeometryError, SpatialIndex};
pub use operator::{GameParams, OperatorEval, PucciParams};
pub use solver::{DirichletProblem, SolveOptions, SolveReport, SolverError, ValueFunction};

/// Float rendering used by every CSV: 17 significant digits, round-trips
/// exactly.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}
