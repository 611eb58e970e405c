//! Dirichlet problem `L u = f` off the boundary strip, `u = g` on it.
//!
//! The problem is solved by Jacobi sweeps of the monotone map
//!
//! ```text
//! u'(x) = (α/2)(min_B u + max_B u) + β mean_B u − ε² f(x)   (interior)
//! u'(x) = g(x)                                            (strip)
//! ```
//!
//! and, for `p = 2`, directly by a dense LU solve of the linear system.

use std::io::Write;
use std::ops::Deref;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calculus::ScalarField;
use crate::fmt_float;
use crate::geometry::{boundary_strip, DataCloud, GeometryError, SpatialIndex};
use crate::operator::{mean_value, min_max, GameParams};

/// Interior count above which the dense p = 2 solve is refused.
pub const MAX_DENSE_UNKNOWNS: usize = 12_000;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("the boundary strip of width {eps} swallows all {n} points; no interior nodes")]
    EmptyInterior { eps: f64, n: usize },
    #[error(
        "{count} interior node(s) have no neighbor but themselves within eps (first: {first:?}); \
         increase eps or n"
    )]
    IsolatedNodes { count: usize, first: Vec<usize> },
    #[error("{what} is not finite ({value}) at node {node}")]
    NonFiniteData {
        what: &'static str,
        node: usize,
        value: f64,
    },
    #[error("iterate became non-finite at node {node} in sweep {iteration}")]
    NonFiniteIterate { iteration: usize, node: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("the direct solver needs p = 2, got p = {0}")]
    NotLinear(f64),
    #[error(
        "singular system: interior component of {size} node(s) containing node(s) {nodes:?} \
         has no path to the boundary strip"
    )]
    SingularComponent { size: usize, nodes: Vec<usize> },
    #[error("direct solve of {0} unknowns exceeds the dense limit of {MAX_DENSE_UNKNOWNS}")]
    TooLarge(usize),
    #[error("LU factorization reported a singular matrix")]
    Singular,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Per-node values `u(Z_i)`, indexed by cloud id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction(Vec<f64>);

impl ValueFunction {
    pub fn new(values: Vec<f64>) -> Self {
        ValueFunction(values)
    }

    pub fn constant(value: f64, n: usize) -> Self {
        ValueFunction(vec![value; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        sup_diff(&self.0, &other.0)
    }
}

impl Deref for ValueFunction {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AssembleOptions {
    /// Keep interior nodes whose neighborhood is `{x}` instead of rejecting
    /// the instance. Their equation reads `0 = f(x)`.
    pub allow_isolated: bool,
}

/// One instance of the discrete Dirichlet problem.
#[derive(Clone, Debug)]
pub struct DirichletProblem {
    cloud: Arc<DataCloud>,
    index: Arc<SpatialIndex>,
    params: GameParams,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    is_boundary: Vec<bool>,
    /// `f` at interior nodes, 0 elsewhere.
    f: Vec<f64>,
    /// `g` at strip nodes, 0 elsewhere.
    g: Vec<f64>,
    /// CSR ε-neighborhoods; empty rows for strip nodes.
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    isolated: Vec<usize>,
}

impl DirichletProblem {
    pub fn assemble(
        cloud: Arc<DataCloud>,
        params: GameParams,
        f: &dyn ScalarField,
        g: &dyn ScalarField,
    ) -> Result<Self, SolverError> {
        Self::assemble_with(cloud, params, f, g, AssembleOptions::default())
    }

    pub fn assemble_with(
        cloud: Arc<DataCloud>,
        params: GameParams,
        f: &dyn ScalarField,
        g: &dyn ScalarField,
        options: AssembleOptions,
    ) -> Result<Self, SolverError> {
        let dim = cloud.dim();
        for d in [params.dim, f.dim(), g.dim()] {
            if d != dim {
                return Err(SolverError::DimensionMismatch {
                    expected: dim,
                    actual: d,
                });
            }
        }
        let n = cloud.len();
        let strip = boundary_strip(&cloud, params.eps)?;
        if strip.degenerate {
            return Err(SolverError::EmptyInterior { eps: params.eps, n });
        }
        let mut is_boundary = vec![false; n];
        for &id in &strip.ids {
            is_boundary[id] = true;
        }
        let interior: Vec<usize> = (0..n).filter(|&i| !is_boundary[i]).collect();

        let mut fv = vec![0.0; n];
        let mut gv = vec![0.0; n];
        for &i in &interior {
            let v = f.value(cloud.point(i));
            if !v.is_finite() {
                return Err(SolverError::NonFiniteData {
                    what: "f",
                    node: i,
                    value: v,
                });
            }
            fv[i] = v;
        }
        for &i in &strip.ids {
            let v = g.value(cloud.point(i));
            if !v.is_finite() {
                return Err(SolverError::NonFiniteData {
                    what: "g",
                    node: i,
                    value: v,
                });
            }
            gv[i] = v;
        }

        let index = Arc::new(SpatialIndex::for_radius(Arc::clone(&cloud), params.eps));
        let rows: Vec<Vec<u32>> = (0..n)
            .into_par_iter()
            .map(|i| {
                if is_boundary[i] {
                    Vec::new()
                } else {
                    let mut buf = Vec::new();
                    index.ball_neighbors_into(cloud.point(i), params.eps, &mut buf);
                    buf
                }
            })
            .collect();
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        let total: usize = rows.iter().map(Vec::len).sum();
        let mut neighbors = Vec::with_capacity(total);
        for row in &rows {
            neighbors.extend_from_slice(row);
            offsets.push(neighbors.len());
        }
        drop(rows);

        let isolated: Vec<usize> = interior
            .iter()
            .copied()
            .filter(|&i| offsets[i + 1] - offsets[i] <= 1)
            .collect();
        if !isolated.is_empty() && !options.allow_isolated {
            return Err(SolverError::IsolatedNodes {
                count: isolated.len(),
                first: isolated.iter().copied().take(5).collect(),
            });
        }

        Ok(DirichletProblem {
            cloud,
            index,
            params,
            interior,
            boundary: strip.ids,
            is_boundary,
            f: fv,
            g: gv,
            offsets,
            neighbors,
            isolated,
        })
    }

    pub fn cloud(&self) -> &Arc<DataCloud> {
        &self.cloud
    }

    pub fn index(&self) -> &Arc<SpatialIndex> {
        &self.index
    }

    pub fn params(&self) -> &GameParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.is_boundary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.is_boundary.is_empty()
    }

    pub fn interior_ids(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary_ids(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.is_boundary[node]
    }

    pub fn isolated_ids(&self) -> &[usize] {
        &self.isolated
    }

    pub fn f_value(&self, node: usize) -> f64 {
        self.f[node]
    }

    pub fn g_value(&self, node: usize) -> f64 {
        self.g[node]
    }

    /// ε-neighborhood of an interior node, ascending ids.
    pub fn neighborhood(&self, node: usize) -> &[u32] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn g_range(&self) -> (f64, f64) {
        self.boundary
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                (lo.min(self.g[i]), hi.max(self.g[i]))
            })
    }

    pub fn g_sup(&self) -> f64 {
        self.boundary
            .iter()
            .fold(0.0, |m, &i| m.max(self.g[i].abs()))
    }

    pub fn f_sup(&self) -> f64 {
        self.interior
            .iter()
            .fold(0.0, |m, &i| m.max(self.f[i].abs()))
    }

    /// Strip values extended to every node by the value of the nearest strip
    /// node (ties to the smaller id).
    pub fn boundary_extension(&self) -> ValueFunction {
        let dim = self.cloud.dim();
        let mut coords = Vec::with_capacity(self.boundary.len() * dim);
        for &i in &self.boundary {
            coords.extend_from_slice(self.cloud.point(i));
        }
        let strip_cloud = DataCloud::from_coords(self.cloud.domain().clone(), coords, None)
            .expect("strip nodes are cloud points");
        let strip_index = SpatialIndex::for_nearest(Arc::new(strip_cloud));
        let values = (0..self.len())
            .into_par_iter()
            .map(|i| {
                if self.is_boundary[i] {
                    self.g[i]
                } else {
                    self.g[self.boundary[strip_index.nearest(self.cloud.point(i))]]
                }
            })
            .collect();
        ValueFunction(values)
    }

    #[inline]
    fn update(&self, u: &[f64], node: usize) -> f64 {
        if self.is_boundary[node] {
            return self.g[node];
        }
        let nbhd = self.neighborhood(node);
        let (lo, hi) = min_max(u, nbhd);
        let a = self.params.alpha;
        let b = self.params.beta;
        // Exact arithmetic keeps this convex combination inside [lo, hi];
        // clamping removes the round-off so the discrete maximum principle is
        // exact.
        let mixed = (0.5 * a * (lo + hi) + b * mean_value(u, nbhd)).clamp(lo, hi);
        mixed - self.params.eps * self.params.eps * self.f[node]
    }

    fn sweep_into(&self, u: &[f64], out: &mut [f64]) {
        out.par_iter_mut()
            .with_min_len(256)
            .enumerate()
            .for_each(|(i, slot)| *slot = self.update(u, i));
    }

    /// `|L u(x) − f(x)|` at an interior node.
    pub fn defect(&self, u: &[f64], node: usize) -> f64 {
        let eps2 = self.params.eps * self.params.eps;
        let nbhd = self.neighborhood(node);
        let ux = u[node];
        let l = self.params.alpha * crate::operator::linf_on(u, nbhd, ux, self.params.eps)
            + self.params.beta * crate::operator::mean_difference(u, nbhd, ux) / eps2;
        (l - self.f[node]).abs()
    }
}

/// One Jacobi sweep, reading only `u`.
pub fn fixed_point_map(problem: &DirichletProblem, u: &ValueFunction) -> ValueFunction {
    assert_eq!(
        u.len(),
        problem.len(),
        "iterate length differs from the cloud"
    );
    let mut out = vec![0.0; u.len()];
    problem.sweep_into(u, &mut out);
    ValueFunction(out)
}

/// `max_{interior} |L u − f|`.
pub fn residual(problem: &DirichletProblem, u: &ValueFunction) -> f64 {
    problem
        .interior
        .par_iter()
        .map(|&i| problem.defect(u, i))
        .reduce(|| 0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Defaults to [`DirichletProblem::boundary_extension`].
    pub init: Option<ValueFunction>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-9,
            max_iter: 1_000_000,
            init: None,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolveOptions {
            tol,
            ..SolveOptions::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub sup_change_last_sweep: f64,
    pub wall_time: f64,
    pub converged: bool,
}

impl SolveReport {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Iterate the sweep until the sup change drops to `tol · ε²` and the
/// residual to `tol`, or `max_iter` sweeps have run.
pub fn solve(
    problem: &DirichletProblem,
    options: &SolveOptions,
) -> Result<(ValueFunction, SolveReport), SolverError> {
    if !(options.tol > 0.0) {
        return Err(SolverError::InvalidTolerance(options.tol));
    }
    let start = Instant::now();
    let mut u = match &options.init {
        Some(init) => {
            if init.len() != problem.len() {
                return Err(SolverError::DimensionMismatch {
                    expected: problem.len(),
                    actual: init.len(),
                });
            }
            init.0.clone()
        }
        None => problem.boundary_extension().0,
    };
    if let Some(node) = u.iter().position(|v| !v.is_finite()) {
        return Err(SolverError::NonFiniteIterate { iteration: 0, node });
    }
    let eps2 = problem.params.eps * problem.params.eps;
    let threshold = options.tol * eps2;
    let mut next = vec![0.0; u.len()];
    let mut iterations = 0;
    let mut change = f64::INFINITY;
    let mut final_residual = f64::NAN;
    let mut converged = false;
    while iterations < options.max_iter {
        problem.sweep_into(&u, &mut next);
        iterations += 1;
        change = 0.0;
        for (i, (a, b)) in next.iter().zip(&u).enumerate() {
            let d = (a - b).abs();
            if !d.is_finite() {
                return Err(SolverError::NonFiniteIterate {
                    iteration: iterations,
                    node: i,
                });
            }
            change = change.max(d);
        }
        std::mem::swap(&mut u, &mut next);
        if change <= threshold {
            let u_ref = ValueFunction(std::mem::take(&mut u));
            final_residual = residual(problem, &u_ref);
            u = u_ref.0;
            if final_residual <= options.tol {
                converged = true;
                break;
            }
        }
    }
    let u = ValueFunction(u);
    if !converged {
        final_residual = residual(problem, &u);
    }
    let report = SolveReport {
        iterations,
        final_residual,
        sup_change_last_sweep: change,
        wall_time: start.elapsed().as_secs_f64(),
        converged,
    };
    log::debug!(
        "solve: {} sweeps, residual {:e}, converged {}",
        report.iterations,
        report.final_residual,
        report.converged
    );
    Ok((u, report))
}

/// Interior components (under the neighborhood relation) with no strip node
/// in any member's neighborhood.
fn detached_components(problem: &DirichletProblem) -> Vec<Vec<usize>> {
    let n = problem.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &i in &problem.interior {
        for &j in problem.neighborhood(i) {
            let j = j as usize;
            if !problem.is_boundary[j] {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut touches = vec![false; n];
    for &i in &problem.interior {
        if problem
            .neighborhood(i)
            .iter()
            .any(|&j| problem.is_boundary[j as usize])
        {
            let r = find(&mut parent, i);
            touches[r] = true;
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for &i in &problem.interior {
        let r = find(&mut parent, i);
        if !touches[r] {
            groups.entry(r).or_default().push(i);
        }
    }
    groups.into_values().collect()
}

/// Direct solve of the `p = 2` system `(I − A_II) u_I = −ε² f + A_IB g`.
pub fn solve_linear_p2(problem: &DirichletProblem) -> Result<ValueFunction, SolverError> {
    if problem.params.p != 2.0 {
        return Err(SolverError::NotLinear(problem.params.p));
    }
    if let Some(component) = detached_components(problem).into_iter().next() {
        return Err(SolverError::SingularComponent {
            size: component.len(),
            nodes: component.into_iter().take(10).collect(),
        });
    }
    let m = problem.interior.len();
    if m > MAX_DENSE_UNKNOWNS {
        return Err(SolverError::TooLarge(m));
    }
    let mut slot = vec![usize::MAX; problem.len()];
    for (k, &i) in problem.interior.iter().enumerate() {
        slot[i] = k;
    }
    let eps2 = problem.params.eps * problem.params.eps;
    let mut a = DMatrix::<f64>::identity(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for (k, &i) in problem.interior.iter().enumerate() {
        let nbhd = problem.neighborhood(i);
        let w = 1.0 / nbhd.len() as f64;
        let mut coupling = 0.0;
        for &j in nbhd {
            let j = j as usize;
            if problem.is_boundary[j] {
                coupling += w * problem.g[j];
            } else {
                a[(k, slot[j])] -= w;
            }
        }
        rhs[k] = coupling - eps2 * problem.f[i];
    }
    let x = a.lu().solve(&rhs).ok_or(SolverError::Singular)?;
    let mut values = problem.g.clone();
    for (k, &i) in problem.interior.iter().enumerate() {
        values[i] = x[k];
    }
    Ok(ValueFunction(values))
}

/// Largest pairwise sup distance between solutions started from the strip
/// extension and from the constants `min g` and `max g`.
pub fn initialization_spread(
    problem: &DirichletProblem,
    options: &SolveOptions,
) -> Result<f64, SolverError> {
    let (lo, hi) = problem.g_range();
    let mut solutions = Vec::new();
    for init in [
        None,
        Some(ValueFunction::constant(lo, problem.len())),
        Some(ValueFunction::constant(hi, problem.len())),
    ] {
        let opts = SolveOptions {
            init,
            ..options.clone()
        };
        solutions.push(solve(problem, &opts)?.0);
    }
    let mut spread: f64 = 0.0;
    for a in 0..solutions.len() {
        for b in a + 1..solutions.len() {
            spread = spread.max(solutions[a].sup_distance(&solutions[b]));
        }
    }
    Ok(spread)
}

/// Measured constant `C` in `‖u‖∞ ≤ ‖g‖∞ + C ‖f‖∞`; `None` when `f ≡ 0`.
pub fn max_principle_constant(problem: &DirichletProblem, u: &ValueFunction) -> Option<f64> {
    let f = problem.f_sup();
    if f == 0.0 {
        None
    } else {
        Some(((u.sup_norm() - problem.g_sup()) / f).max(0.0))
    }
}

/// Solution export: `node_id,x1..xN,u,is_boundary`.
pub fn write_solution_csv<W: Write>(
    problem: &DirichletProblem,
    u: &ValueFunction,
    mut out: W,
) -> std::io::Result<()> {
    let mut header = String::from("node_id");
    for k in 1..=problem.cloud.dim() {
        header.push_str(&format!(",x{k}"));
    }
    header.push_str(",u,is_boundary");
    writeln!(out, "{header}")?;
    for (i, p) in problem.cloud.points().enumerate() {
        write!(out, "{i}")?;
        for v in p {
            write!(out, ",{}", fmt_float(*v))?;
        }
        writeln!(
            out,
            ",{},{}",
            fmt_float(u[i]),
            u8::from(problem.is_boundary[i])
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::SmoothField;
    use crate::geometry::Domain;

    const A1_CLOUD: [f64; 7] = [0.05, 0.25, 0.45, 0.5, 0.55, 0.75, 0.95];

    fn a1_problem() -> DirichletProblem {
        let interval = Domain::unit_box(1);
        let pts: Vec<Vec<f64>> = A1_CLOUD.iter().map(|&v| vec![v]).collect();
        let cloud = Arc::new(DataCloud::from_points(interval, &pts).unwrap());
        let params = GameParams::new(1, 4.0, 0.3).unwrap();
        DirichletProblem::assemble(
            cloud,
            params,
            &SmoothField::constant(0.0, 1),
            &SmoothField::parse("x1", 1).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn a1_assembly() {
        let problem = a1_problem();
        assert_eq!(problem.boundary_ids(), &[0, 1, 5, 6]);
        assert_eq!(problem.interior_ids(), &[2, 3, 4]);
        assert_eq!(problem.neighborhood(2), &[1, 2, 3, 4, 5]);
        assert_eq!(problem.neighborhood(4), &[2, 3, 4, 5]);
        assert!(problem.neighborhood(0).is_empty());
    }

    #[test]
    fn a1_solution_and_initial_residual() {
        let problem = a1_problem();
        let init = problem.boundary_extension();
        assert_eq!(init.values(), &[0.05, 0.25, 0.25, 0.25, 0.75, 0.75, 0.95]);
        assert!(residual(&problem, &init) > 0.0);
        let (u, report) = solve(&problem, &SolveOptions::with_tol(1e-12)).unwrap();
        assert!(report.converged);
        assert!(report.final_residual <= 1e-12);
        let expected = [
            0.05,
            0.25,
            0.5179180887372014,
            0.5179180887372014,
            0.613481228668942,
            0.75,
            0.95,
        ];
        for (a, b) in u.iter().zip(expected) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn constant_boundary_data_is_fixed_in_one_sweep() {
        let ball = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let density = crate::geometry::Density::uniform(&ball);
        let cloud = Arc::new(crate::geometry::sample_cloud(&ball, &density, 400, 2).unwrap());
        let params = GameParams::new(2, 3.0, 0.3).unwrap();
        let problem = DirichletProblem::assemble(
            cloud,
            params,
            &SmoothField::constant(0.0, 2),
            &SmoothField::constant(5.0, 2),
        )
        .unwrap();
        assert!(problem
            .boundary_ids()
            .iter()
            .all(|&i| problem.g_value(i) == 5.0));
        let (u, report) = solve(&problem, &SolveOptions::default()).unwrap();
        assert_eq!(report.iterations, 1);
        assert!(report.converged);
        assert!(u.iter().all(|&v| v == 5.0));
        assert_eq!(residual(&problem, &u), 0.0);
    }

    #[test]
    fn empty_interior_and_isolated_nodes() {
        let interval = Domain::unit_box(1);
        let cloud = Arc::new(
            DataCloud::from_points(interval.clone(), &[vec![0.2], vec![0.5], vec![0.8]]).unwrap(),
        );
        let zero = SmoothField::constant(0.0, 1);
        let err = DirichletProblem::assemble(
            Arc::clone(&cloud),
            GameParams::new(1, 2.0, 2.0).unwrap(),
            &zero,
            &zero,
        );
        assert!(matches!(err, Err(SolverError::EmptyInterior { .. })));

        // eps = 0.25: 0.5 is interior and alone in its ball.
        let params = GameParams::new(1, 2.0, 0.25).unwrap();
        let err = DirichletProblem::assemble(Arc::clone(&cloud), params, &zero, &zero);
        assert!(matches!(
            err,
            Err(SolverError::IsolatedNodes { count: 1, .. })
        ));
        let problem = DirichletProblem::assemble_with(
            cloud,
            params,
            &zero,
            &zero,
            AssembleOptions {
                allow_isolated: true,
            },
        )
        .unwrap();
        assert_eq!(problem.isolated_ids(), &[1]);
        match solve_linear_p2(&problem) {
            Err(SolverError::SingularComponent { size: 1, nodes }) => assert_eq!(nodes, vec![1]),
            other => panic!("expected a singular component, got {other:?}"),
        }
    }

    #[test]
    fn linear_solver_on_three_interior_nodes() {
        let mut problem = a1_problem();
        problem.params = GameParams::new(1, 2.0, 0.3).unwrap();
        let direct = solve_linear_p2(&problem).unwrap();
        let (iter, _) = solve(&problem, &SolveOptions::with_tol(1e-13)).unwrap();
        assert!(direct.sup_distance(&iter) <= 1e-10);
        assert!(matches!(
            solve_linear_p2(&a1_problem()),
            Err(SolverError::NotLinear(_))
        ));
    }

    #[test]
    fn rejects_bad_tolerance_and_init() {
        let problem = a1_problem();
        assert!(solve(&problem, &SolveOptions::with_tol(0.0)).is_err());
        let opts = SolveOptions {
            init: Some(ValueFunction::constant(0.0, 3)),
            ..SolveOptions::default()
        };
        assert!(matches!(
            solve(&problem, &opts),
            Err(SolverError::DimensionMismatch { .. })
        ));
        let opts = SolveOptions {
            init: Some(ValueFunction::constant(f64::NAN, 7)),
            ..SolveOptions::default()
        };
        assert!(matches!(
            solve(&problem, &opts),
            Err(SolverError::NonFiniteIterate { .. })
        ));
    }

    #[test]
    fn max_iter_reports_non_convergence() {
        let problem = a1_problem();
        let opts = SolveOptions {
            max_iter: 2,
            ..SolveOptions::default()
        };
        let (_, report) = solve(&problem, &opts).unwrap();
        assert_eq!(report.iterations, 2);
        assert!(!report.converged);
        assert!(report.final_residual > 1e-9);
    }

    #[test]
    fn report_json_line() {
        let report = SolveReport {
            iterations: 3,
            final_residual: 0.5,
            sup_change_last_sweep: 0.25,
            wall_time: 0.0,
            converged: true,
        };
        let line = report.to_json_line();
        assert_eq!(
            line,
            r#"{"iterations":3,"final_residual":0.5,"sup_change_last_sweep":0.25,"wall_time":0.0,"converged":true}"#
        );
        let back: SolveReport = serde_json::from_str(&line).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn solution_csv() {
        let problem = a1_problem();
        let u = problem.boundary_extension();
        let mut buf = Vec::new();
        write_solution_csv(&problem, &u, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "node_id,x1,u,is_boundary");
        assert_eq!(lines[1], "0,5.0000000000000003e-2,5.0000000000000003e-2,1");
        assert!(lines[3].ends_with(",0"));
    }
}
