//! Shared fixtures for the criterion benchmarks.

use std::sync::Arc;

use towcloud::geometry::sample_cloud;
use towcloud::{DataCloud, Density, DirichletProblem, Domain, GameParams, SmoothField};

/// Uniform cloud of `n` points in the unit disc.
pub fn disc_cloud(n: usize, seed: u64) -> Arc<DataCloud> {
    let disc = Domain::ball(vec![0.0, 0.0], 1.0).expect("unit disc");
    Arc::new(sample_cloud(&disc, &Density::uniform(&disc), n, seed).expect("sampling succeeds"))
}

/// Dirichlet problem with smooth data on [`disc_cloud`].
pub fn disc_problem(n: usize, p: f64, eps: f64) -> DirichletProblem {
    let g = SmoothField::parse("x1^2 - x2", 2).expect("valid expression");
    let f = SmoothField::constant(0.5, 2);
    DirichletProblem::assemble(
        disc_cloud(n, 1),
        GameParams::new(2, p, eps).expect("valid parameters"),
        &f,
        &g,
    )
    .expect("assembly succeeds")
}
