use std::sync::Arc;

use rayon::prelude::*;

use super::diagnostics::{boundary_gap, holder_diagnostic};
use super::report::{median, LadderReport, Record};
use super::schedule::{Level, Schedule};
use super::{task_seed, ExperimentError};
use crate::calculus::{manufactured_f, PdeTarget, ScalarField, SmoothField};
use crate::geometry::{covering_radius, sample_cloud, Density, Domain, SpatialIndex};
use crate::operator::{l2_on, linf_on, GameParams};
use crate::solver::{solve, DirichletProblem, SolveOptions};

/// Uniform probes used for the covering-radius estimate.
pub const COVERING_PROBES: usize = 4000;

/// Inputs of a consistency ladder. `params.eps` is replaced level by level.
#[derive(Clone, Debug)]
pub struct ConsistencySpec<'a> {
    pub domain: &'a Domain,
    pub density: &'a Density,
    pub test_u: &'a SmoothField,
    pub params: GameParams,
    pub target_scale: f64,
    pub schedule: &'a Schedule,
    pub seeds: &'a [u64],
    pub probes: usize,
}

/// Inputs of a manufactured-solution convergence ladder.
#[derive(Clone, Debug)]
pub struct ConvergenceSpec<'a> {
    pub domain: &'a Domain,
    pub density: &'a Density,
    pub u_star: &'a SmoothField,
    pub params: GameParams,
    pub target_scale: f64,
    pub schedule: &'a Schedule,
    pub seeds: &'a [u64],
    /// Probe grid points per axis.
    pub probe_grid: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub holder_gamma: f64,
}

enum Outcome {
    Records(Vec<(String, f64)>),
    Skipped(String),
}

struct Task {
    level: Level,
    seed: u64,
}

fn tasks(schedule: &Schedule, seeds: &[u64]) -> Vec<Task> {
    let mut out = Vec::new();
    for level in &schedule.levels {
        for &seed in seeds {
            out.push(Task {
                level: *level,
                seed,
            });
        }
    }
    out
}

/// Run every (level, seed) task in parallel and assemble the report in
/// (level, seed) order.
fn run_ladder<F>(
    kind: &str,
    schedule: &Schedule,
    seeds: &[u64],
    run: F,
) -> Result<LadderReport, ExperimentError>
where
    F: Fn(&Level, u64) -> Result<Outcome, ExperimentError> + Sync,
{
    if seeds.is_empty() {
        return Err(ExperimentError::InvalidArgument(
            "at least one seed is required".into(),
        ));
    }
    let tasks = tasks(schedule, seeds);
    let outcomes: Vec<Result<Outcome, ExperimentError>> =
        tasks.par_iter().map(|t| run(&t.level, t.seed)).collect();
    let mut pairs: Vec<(&Task, Outcome)> = Vec::with_capacity(tasks.len());
    for (t, o) in tasks.iter().zip(outcomes) {
        pairs.push((t, o?));
    }
    pairs.sort_by_key(|(t, _)| (t.level.k, t.seed));

    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for (t, outcome) in pairs {
        match outcome {
            Outcome::Records(values) => {
                for (metric, value) in values {
                    records.push(Record {
                        level: t.level.k,
                        n: t.level.n,
                        eps: t.level.eps,
                        seed: t.seed,
                        metric,
                        value,
                    });
                }
            }
            Outcome::Skipped(why) => {
                let w = format!("level {} seed {} skipped: {why}", t.level.k, t.seed);
                log::warn!("{w}");
                warnings.push(w);
            }
        }
    }
    let mut report = LadderReport {
        kind: kind.to_string(),
        schedule: schedule.clone(),
        seeds: seeds.to_vec(),
        records,
        flags: Vec::new(),
        warnings,
    };
    for level in &schedule.levels {
        let r = report.values(level.k, "covering_radius");
        if !r.is_empty() {
            let m = median(&r);
            if m >= level.eps / 2.0 {
                report.flags.push((
                    level.k,
                    format!(
                        "median covering radius {m:.4e} >= eps/2 = {:.4e}",
                        level.eps / 2.0
                    ),
                ));
            }
        }
    }
    Ok(report)
}

/// Per level and seed: the largest `|L u − target|` over interior probes at
/// distance more than `2ε` from the boundary, with the same error for the
/// average and bracket parts separately.
pub fn consistency_experiment(spec: &ConsistencySpec) -> Result<LadderReport, ExperimentError> {
    if spec.probes == 0 {
        return Err(ExperimentError::InvalidArgument(
            "probes must be positive".into(),
        ));
    }
    let phi = spec.density.field();
    let bracket_used = spec.params.p > 2.0;
    let run = |level: &Level, seed: u64| -> Result<Outcome, ExperimentError> {
        let params = spec.params.with_eps(level.eps)?;
        let target = PdeTarget::from_params(&params).with_scale(spec.target_scale);
        let task = task_seed(seed, level.k as u64);
        let cloud = Arc::new(sample_cloud(spec.domain, spec.density, level.n, task)?);
        let eps = level.eps;
        let probes: Vec<usize> = cloud
            .points()
            .enumerate()
            .filter(|(_, p)| spec.domain.boundary_distance(p) > 2.0 * eps)
            .map(|(i, _)| i)
            .take(spec.probes)
            .collect();
        if probes.is_empty() {
            return Ok(Outcome::Skipped(format!(
                "no cloud point lies farther than 2 eps = {} from the boundary",
                2.0 * eps
            )));
        }
        let index = SpatialIndex::for_radius(Arc::clone(&cloud), eps);
        let (mut err_l, mut err_l2, mut err_linf) = (0.0f64, 0.0f64, 0.0f64);
        let mut nbhd = Vec::new();
        for &i in &probes {
            let x = cloud.point(i);
            index.ball_neighbors_into(x, eps, &mut nbhd);
            let local: Vec<f64> = nbhd
                .iter()
                .map(|&j| spec.test_u.value(cloud.point(j as usize)))
                .collect();
            let slots: Vec<u32> = (0..nbhd.len() as u32).collect();
            let ux = spec.test_u.value(x);
            let l2 = l2_on(&local, &slots, ux, eps);
            let linf = linf_on(&local, &slots, ux, eps);
            let l = params.alpha * linf + params.beta * l2;
            let split = target.split(phi, spec.test_u, x)?;
            let s = spec.target_scale;
            let e_l = (l - split.combined).abs();
            let e_l2 = (l2 - s * split.average_part).abs();
            let e_linf = (linf - s * split.bracket_part.unwrap_or(0.0)).abs();
            debug_assert!(
                !bracket_used || e_l <= params.alpha * e_linf + params.beta * e_l2 + 1e-12
            );
            err_l = err_l.max(e_l);
            err_l2 = err_l2.max(e_l2);
            err_linf = err_linf.max(e_linf);
        }
        let r_n = covering_radius(&cloud, COVERING_PROBES, task ^ 0xC0FE)?;
        let mut values = vec![
            ("consistency_L".to_string(), err_l),
            ("consistency_L2".to_string(), err_l2),
        ];
        if bracket_used {
            values.push(("consistency_Linf".to_string(), err_linf));
        }
        values.push(("covering_radius".to_string(), r_n));
        values.push(("probes".to_string(), probes.len() as f64));
        Ok(Outcome::Records(values))
    };
    run_ladder("consistency", spec.schedule, spec.seeds, run)
}

/// Per level and seed: solve the problem with `f = f*`, `g = u*`, then
/// record the sup over a uniform probe grid of `|u(T x) − u*(x)|` with `T`
/// the nearest-point transport, with diagnostics.
pub fn convergence_experiment(spec: &ConvergenceSpec) -> Result<LadderReport, ExperimentError> {
    if spec.probe_grid == 0 {
        return Err(ExperimentError::InvalidArgument(
            "probe_grid must be positive".into(),
        ));
    }
    let phi = spec.density.field();
    let target = PdeTarget::from_params(&spec.params).with_scale(spec.target_scale);
    let f_star = manufactured_f(target, phi, spec.u_star, spec.domain)?;
    let grid = spec.domain.grid_points(spec.probe_grid, false);
    let exact: Vec<f64> = grid.iter().map(|x| spec.u_star.value(x)).collect();
    let run = |level: &Level, seed: u64| -> Result<Outcome, ExperimentError> {
        let params = spec.params.with_eps(level.eps)?;
        let task = task_seed(seed, level.k as u64);
        let cloud = Arc::new(sample_cloud(spec.domain, spec.density, level.n, task)?);
        let problem =
            match DirichletProblem::assemble(Arc::clone(&cloud), params, &f_star, spec.u_star) {
                Ok(p) => p,
                Err(e) => return Ok(Outcome::Skipped(e.to_string())),
            };
        let options = SolveOptions {
            tol: spec.tol,
            max_iter: spec.max_iter,
            init: None,
        };
        let (u, report) = solve(&problem, &options)?;
        let nearest = SpatialIndex::for_nearest(Arc::clone(&cloud));
        let sup_error = grid
            .iter()
            .zip(&exact)
            .map(|(x, ex)| (u[nearest.transport(x)] - ex).abs())
            .fold(0.0, f64::max);
        let r_n = covering_radius(&cloud, COVERING_PROBES, task ^ 0xC0FE)?;
        let holder = holder_diagnostic(&u, &cloud, level.eps, spec.holder_gamma)?;
        let gap = boundary_gap(&u, spec.u_star, &cloud, level.eps)?;
        Ok(Outcome::Records(vec![
            ("sup_error".to_string(), sup_error),
            ("covering_radius".to_string(), r_n),
            ("holder".to_string(), holder),
            ("boundary_gap".to_string(), gap.value),
            ("iterations".to_string(), report.iterations as f64),
            ("residual".to_string(), report.final_residual),
            (
                "converged".to_string(),
                f64::from(u8::from(report.converged)),
            ),
        ]))
    };
    let mut report = run_ladder("convergence", spec.schedule, spec.seeds, run)?;
    for level in &spec.schedule.levels {
        let unconverged = report
            .values(level.k, "converged")
            .iter()
            .filter(|&&c| c == 0.0)
            .count();
        if unconverged > 0 {
            report.flags.push((
                level.k,
                format!("{unconverged} solve(s) hit max_iter without converging"),
            ));
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{make_schedule, ScheduleMode};

    fn small_schedule(dim: usize) -> Schedule {
        make_schedule(0.4, 0.8, 2, dim, 0.1, 1.0, ScheduleMode::Practical).unwrap()
    }

    #[test]
    fn affine_consistency_has_only_bracket_noise() {
        let domain = Domain::cuboid(vec![-1.0], vec![1.0]).unwrap();
        let density = Density::uniform(&domain);
        let u = SmoothField::parse("2*x1 + 1", 1).unwrap();
        let schedule = small_schedule(1);
        let seeds = [1, 2];
        let spec = ConsistencySpec {
            domain: &domain,
            density: &density,
            test_u: &u,
            params: GameParams::new(1, 2.0, 1.0).unwrap(),
            target_scale: 1.0,
            schedule: &schedule,
            seeds: &seeds,
            probes: 10,
        };
        let report = consistency_experiment(&spec).unwrap();
        assert!(report.metrics().iter().all(|m| m != "consistency_Linf"));
        assert_eq!(report.values(0, "consistency_L").len(), 2);
        assert!(report
            .values(0, "consistency_L2")
            .iter()
            .all(|v| v.is_finite()));
        let again = consistency_experiment(&spec).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn consistency_skips_levels_without_probes() {
        let domain = Domain::unit_box(1);
        let density = Density::uniform(&domain);
        let u = SmoothField::parse("x1", 1).unwrap();
        let schedule = make_schedule(0.3, 0.9, 2, 1, 0.1, 1.0, ScheduleMode::Practical).unwrap();
        let spec = ConsistencySpec {
            domain: &domain,
            density: &density,
            test_u: &u,
            params: GameParams::new(1, 3.0, 1.0).unwrap(),
            target_scale: 1.0,
            schedule: &schedule,
            seeds: &[4],
            probes: 5,
        };
        let report = consistency_experiment(&spec).unwrap();
        assert!(report.records.is_empty());
        assert_eq!(report.warnings.len(), 2);
    }

    #[test]
    fn constant_manufactured_solution_is_rejected() {
        let domain = Domain::unit_box(2);
        let density = Density::uniform(&domain);
        let u = SmoothField::constant(1.0, 2);
        let schedule = small_schedule(2);
        let spec = ConvergenceSpec {
            domain: &domain,
            density: &density,
            u_star: &u,
            params: GameParams::new(2, 4.0, 1.0).unwrap(),
            target_scale: 1.0,
            schedule: &schedule,
            seeds: &[1],
            probe_grid: 5,
            tol: 1e-8,
            max_iter: 10_000,
            holder_gamma: 0.5,
        };
        assert!(convergence_experiment(&spec).is_err());
    }

    #[test]
    fn affine_convergence_is_small() {
        let domain = Domain::ball(vec![0.0, 0.0], 1.0).unwrap();
        let density = Density::uniform(&domain);
        let u = SmoothField::parse("x1 - 0.5*x2", 2).unwrap();
        let schedule = small_schedule(2);
        let spec = ConvergenceSpec {
            domain: &domain,
            density: &density,
            u_star: &u,
            params: GameParams::new(2, 2.0, 1.0).unwrap(),
            target_scale: 1.0,
            schedule: &schedule,
            seeds: &[3],
            probe_grid: 11,
            tol: 1e-9,
            max_iter: 100_000,
            holder_gamma: 1.0,
        };
        let report = convergence_experiment(&spec).unwrap();
        for k in 0..2 {
            let e = report.median(k, "sup_error").unwrap();
            let r = report.median(k, "covering_radius").unwrap();
            // Transport error plus the averaging noise of an affine field.
            assert!(e < 1.2 * (r + schedule.levels[k].eps), "level {k}: {e}");
            assert_eq!(report.median(k, "converged"), Some(1.0));
            // Strip values are exact, so the gap is the variation of u* over eps.
            let gap = report.median(k, "boundary_gap").unwrap();
            assert!(gap <= 1.25f64.sqrt() * schedule.levels[k].eps + 1e-12);
        }
    }
}
