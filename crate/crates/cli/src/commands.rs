use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::anyhow;
use log::{info, warn};
use towcloud::calculus::manufactured_f;
use towcloud::experiments::{
    consistency_experiment, convergence_experiment, ConsistencySpec, ConvergenceSpec,
    ExperimentError, LadderReport,
};
use towcloud::geometry::{read_cloud_csv, sample_cloud, write_cloud_csv};
use towcloud::operator::{evaluate_all, write_operator_csv};
use towcloud::solver::{solve, write_solution_csv};
use towcloud::{
    DataCloud, Density, DirichletProblem, Domain, PdeTarget, ScalarField, SmoothField,
    SolveOptions, SpatialIndex,
};

use crate::config::RunConfig;
use crate::manifest::{sha256_hex, RunManifest};
use crate::svg::{loglog_chart, Point, Series};
use crate::{Classify, Failure, EXIT_CONFIG, EXIT_RUNTIME};

pub const DEFAULT_OUT: &str = "towcloud-out";

/// A loaded configuration together with the run directory it writes to.
pub struct RunContext {
    pub config: RunConfig,
    pub config_hash: String,
    pub out: PathBuf,
    pub deterministic: bool,
}

impl RunContext {
    pub fn load(
        path: &Path,
        seed: Option<u64>,
        out: Option<PathBuf>,
        deterministic: bool,
    ) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| anyhow!("reading config {}: {e}", path.display()))
            .or_config()?;
        let mut config = RunConfig::from_toml(&text)
            .map_err(|e| anyhow!("config {}: {e}", path.display()))
            .or_config()?;
        if let Some(seed) = seed {
            config.seeds = vec![seed];
        }
        config.validate().or_config()?;
        let out = out
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        // The run directory does not enter the hash: relocating a run keeps it.
        let mut hashed = config.clone();
        hashed.output_dir = None;
        let config_hash = sha256_hex(hashed.to_toml().as_bytes());
        Ok(RunContext {
            config,
            config_hash,
            out,
            deterministic,
        })
    }

    fn open_manifest(&self, command: &str) -> Result<RunManifest, Failure> {
        std::fs::create_dir_all(&self.out)
            .map_err(|e| anyhow!("creating output directory {}: {e}", self.out.display()))
            .or_runtime()?;
        let mut manifest =
            RunManifest::open(&self.out, &self.config_hash, command, self.deterministic);
        let mut resolved = self.config.clone();
        resolved.output_dir = None;
        manifest
            .write_artifact(&self.out, "config.toml", resolved.to_toml().as_bytes())
            .or_runtime()?;
        Ok(manifest)
    }

    fn header_lines(&self) -> Vec<String> {
        vec![
            format!(
                "tool={} {}",
                env!("CARGO_PKG_NAME"),
                env!("CARGO_PKG_VERSION")
            ),
            format!("config_hash={}", self.config_hash),
        ]
    }
}

fn geometry(config: &RunConfig) -> Result<(Domain, Density), Failure> {
    let domain = config.domain().or_config()?;
    let density = config.density(&domain).or_config()?;
    Ok((domain, density))
}

fn sampled_cloud(
    config: &RunConfig,
    domain: &Domain,
    density: &Density,
) -> Result<DataCloud, Failure> {
    let n = config
        .n
        .ok_or_else(|| anyhow!("sampling needs `n`"))
        .or_config()?;
    sample_cloud(domain, density, n, config.seeds[0]).or_config()
}

/// Invalid inputs detected inside an experiment are configuration errors.
fn experiment_failure(e: ExperimentError) -> Failure {
    let code = match e {
        ExperimentError::Schedule(_)
        | ExperimentError::InvalidArgument(_)
        | ExperimentError::Calculus(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    };
    Failure {
        code,
        error: e.into(),
    }
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    write(&mut buf).or_runtime()?;
    Ok(buf)
}

pub fn cmd_sample(ctx: &RunContext) -> Result<(), Failure> {
    let (domain, density) = geometry(&ctx.config)?;
    let cloud = sampled_cloud(&ctx.config, &domain, &density)?;
    let mut manifest = ctx.open_manifest("sample")?;
    let bytes = csv_bytes(|b| write_cloud_csv(&cloud, b))?;
    manifest
        .write_artifact(&ctx.out, "cloud.csv", &bytes)
        .or_runtime()?;
    manifest.save(&ctx.out).or_runtime()?;
    info!("sampled {} points into {}", cloud.len(), ctx.out.display());
    Ok(())
}

pub fn cmd_solve(ctx: &RunContext) -> Result<(), Failure> {
    let config = &ctx.config;
    let (domain, density) = geometry(config)?;
    let eps = config
        .eps
        .ok_or_else(|| anyhow!("solve needs `eps`"))
        .or_config()?;
    let params = config.params(eps).or_config()?;
    let pucci = config.pucci().or_config()?;
    if config.rhs_f.is_some() && config.manufactured_u.is_some() {
        return Err(anyhow!("give either `rhs_f` or `manufactured_u`, not both")).or_config();
    }
    let u_star = match &config.manufactured_u {
        Some(text) => Some(config.field("manufactured_u", text).or_config()?),
        None => None,
    };
    let g: SmoothField = match (&config.boundary_g, &u_star) {
        (Some(text), _) => config.field("boundary_g", text).or_config()?,
        (None, Some(u)) => u.clone(),
        (None, None) => {
            return Err(anyhow!("solve needs `boundary_g` or `manufactured_u`")).or_config()
        }
    };
    let f: Box<dyn ScalarField> = match (&config.rhs_f, &u_star) {
        (Some(text), _) => Box::new(config.field("rhs_f", text).or_config()?),
        (None, Some(u)) => {
            let target = PdeTarget::from_params(&params).with_scale(config.target_scale);
            Box::new(manufactured_f(target, density.field(), u, &domain).or_config()?)
        }
        (None, None) => Box::new(SmoothField::constant(0.0, config.dim)),
    };

    let mut manifest = ctx.open_manifest("solve")?;
    let cloud = match &config.cloud_file {
        Some(path) => {
            let file = File::open(path)
                .map_err(|e| anyhow!("opening cloud file {}: {e}", path.display()))
                .or_runtime()?;
            read_cloud_csv(BufReader::new(file), domain.clone()).or_runtime()?
        }
        None => {
            let cloud = sampled_cloud(config, &domain, &density)?;
            let bytes = csv_bytes(|b| write_cloud_csv(&cloud, b))?;
            manifest
                .write_artifact(&ctx.out, "cloud.csv", &bytes)
                .or_runtime()?;
            cloud
        }
    };
    let cloud = Arc::new(cloud);
    let problem = DirichletProblem::assemble(Arc::clone(&cloud), params, f.as_ref(), &g)
        .map_err(|e| anyhow!("assembly failed: {e}"))
        .or_runtime()?;
    let options = SolveOptions {
        tol: config.tol,
        max_iter: config.max_iter,
        init: None,
    };
    let (u, mut report) = solve(&problem, &options).or_runtime()?;
    if ctx.deterministic {
        report.wall_time = 0.0;
    }
    if !report.converged {
        warn!(
            "solver stopped after {} sweeps with residual {:e}",
            report.iterations, report.final_residual
        );
    }

    let bytes = csv_bytes(|b| write_solution_csv(&problem, &u, b))?;
    manifest
        .write_artifact(&ctx.out, "solution.csv", &bytes)
        .or_runtime()?;
    let index = SpatialIndex::for_radius(Arc::clone(&cloud), pucci.lambda.max(1.0) * eps);
    let rows = evaluate_all(&u, &params, &pucci, &index);
    let bytes = csv_bytes(|b| write_operator_csv(&rows, b))?;
    manifest
        .write_artifact(&ctx.out, "operator.csv", &bytes)
        .or_runtime()?;

    let mut summary = serde_json::json!({
        "solve": report,
        "n": cloud.len(),
        "eps": eps,
        "p": params.p,
        "interior": problem.interior_ids().len(),
        "boundary": problem.boundary_ids().len(),
    });
    if let Some(u_star) = &u_star {
        let nodal = cloud
            .points()
            .zip(u.iter())
            .map(|(x, v)| (v - u_star.value(x)).abs())
            .fold(0.0, f64::max);
        summary["manufactured_nodal_sup_error"] = nodal.into();
    }
    let mut text = serde_json::to_string_pretty(&summary).or_runtime()?;
    text.push('\n');
    manifest
        .write_artifact(&ctx.out, "report.json", text.as_bytes())
        .or_runtime()?;
    manifest.save(&ctx.out).or_runtime()?;
    info!(
        "solved n={} in {} sweeps (residual {:e})",
        cloud.len(),
        report.iterations,
        report.final_residual
    );
    Ok(())
}

/// Ladder-level outputs: records, aggregates and a chart of `metrics`.
fn write_ladder(
    ctx: &RunContext,
    manifest: &mut RunManifest,
    stem: &str,
    report: &LadderReport,
    metrics: &[&str],
) -> Result<(), Failure> {
    for w in &report.warnings {
        warn!("{w}");
    }
    let extra = ctx.header_lines();
    let bytes = csv_bytes(|b| report.write_records_csv(b, &extra))?;
    manifest
        .write_artifact(&ctx.out, &format!("{stem}_records.csv"), &bytes)
        .or_runtime()?;
    let bytes = csv_bytes(|b| report.write_aggregate_csv(b, &extra))?;
    manifest
        .write_artifact(&ctx.out, &format!("{stem}_aggregate.csv"), &bytes)
        .or_runtime()?;
    let aggregates = report.aggregates();
    let series: Vec<Series> = metrics
        .iter()
        .map(|m| Series {
            label: m.to_string(),
            points: aggregates
                .iter()
                .filter(|a| a.metric == *m)
                .map(|a| Point {
                    eps: a.eps,
                    median: a.median,
                    q1: a.q1,
                    q3: a.q3,
                })
                .collect(),
        })
        .filter(|s| !s.points.is_empty())
        .collect();
    let timestamp = (!ctx.deterministic).then_some(manifest.updated_unix);
    let svg = loglog_chart(stem, "median over seeds", &series, timestamp);
    manifest
        .write_artifact(&ctx.out, &format!("{stem}.svg"), svg.as_bytes())
        .or_runtime()?;
    manifest.save(&ctx.out).or_runtime()?;

    let succeeded = report
        .median_series(metrics[0])
        .iter()
        .filter(|m| m.is_some())
        .count();
    if succeeded < 2 {
        return Err(anyhow!(
            "only {succeeded} of {} levels produced results",
            report.schedule.len()
        ))
        .or_runtime();
    }
    info!(
        "{stem}: {succeeded} of {} levels succeeded",
        report.schedule.len()
    );
    Ok(())
}

pub fn cmd_consistency(ctx: &RunContext) -> Result<(), Failure> {
    let config = &ctx.config;
    let (domain, density) = geometry(config)?;
    let schedule = config.schedule().or_config()?;
    let test_u = config
        .required_field("manufactured_u", &config.manufactured_u)
        .or_config()?;
    let spec = ConsistencySpec {
        domain: &domain,
        density: &density,
        test_u: &test_u,
        params: config.params(schedule.levels[0].eps).or_config()?,
        target_scale: config.target_scale,
        schedule: &schedule,
        seeds: &config.seeds,
        probes: config.probes,
    };
    let mut manifest = ctx.open_manifest("consistency")?;
    let report = consistency_experiment(&spec).map_err(experiment_failure)?;
    write_ladder(
        ctx,
        &mut manifest,
        "consistency",
        &report,
        &["consistency_L", "consistency_L2", "consistency_Linf"],
    )
}

pub fn cmd_converge(ctx: &RunContext) -> Result<(), Failure> {
    let config = &ctx.config;
    let (domain, density) = geometry(config)?;
    let schedule = config.schedule().or_config()?;
    let u_star = config
        .required_field("manufactured_u", &config.manufactured_u)
        .or_config()?;
    let spec = ConvergenceSpec {
        domain: &domain,
        density: &density,
        u_star: &u_star,
        params: config.params(schedule.levels[0].eps).or_config()?,
        target_scale: config.target_scale,
        schedule: &schedule,
        seeds: &config.seeds,
        probe_grid: config.probe_grid,
        tol: config.tol,
        max_iter: config.max_iter,
        holder_gamma: config.holder_gamma,
    };
    let mut manifest = ctx.open_manifest("converge")?;
    let report = convergence_experiment(&spec).map_err(experiment_failure)?;
    write_ladder(
        ctx,
        &mut manifest,
        "convergence",
        &report,
        &["sup_error", "covering_radius"],
    )
}

pub const REPORT_TEXT: &str = "report.txt";
pub const REPORT_SVG: &str = "index.svg";

/// Rows of an aggregate CSV as (metric, eps, median, q1, q3, level, n).
fn read_aggregate(text: &str) -> Vec<(String, Point, usize, usize)> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .filter_map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return None;
            }
            let num = |i: usize| f[i].parse::<f64>().ok();
            Some((
                f[3].to_string(),
                Point {
                    eps: num(2)?,
                    median: num(4)?,
                    q1: num(5)?,
                    q3: num(6)?,
                },
                f[0].parse().ok()?,
                f[1].parse().ok()?,
            ))
        })
        .collect()
}

/// Verify a run directory and write a text summary plus an index chart.
/// Both outputs derive from the manifest and its artifacts only, so reruns
/// reproduce them byte for byte; they are not themselves listed.
pub fn cmd_report(run_dir: &Path) -> Result<(), Failure> {
    let manifest = RunManifest::load(run_dir)
        .map_err(|e| anyhow!("no readable manifest in {}: {e}", run_dir.display()))
        .or_runtime()?;
    let tampered = manifest.verify(run_dir);
    if !tampered.is_empty() {
        return Err(anyhow!(
            "digest mismatch for {} (run directory was modified after it was written)",
            tampered.join(", ")
        ))
        .or_runtime();
    }
    let mut text = String::new();
    text.push_str(&format!(
        "run: {}\ntool: {} {}\nconfig_hash: {}\ncommands: {}\ncreated_unix: {}\nupdated_unix: {}\n\nartifacts:\n",
        run_dir.display(),
        manifest.tool,
        manifest.version,
        manifest.config_hash,
        manifest.commands.join(", "),
        manifest.created_unix,
        manifest.updated_unix
    ));
    for a in &manifest.artifacts {
        text.push_str(&format!(
            "  {}  {} bytes  sha256={}\n",
            a.path, a.bytes, a.sha256
        ));
    }
    let mut series = Vec::new();
    for a in manifest
        .artifacts
        .iter()
        .filter(|a| a.path.ends_with("_aggregate.csv"))
    {
        let body = std::fs::read_to_string(run_dir.join(&a.path)).or_runtime()?;
        let stem = a.path.trim_end_matches("_aggregate.csv");
        text.push_str(&format!("\n{stem} (median [q1, q3] over seeds):\n"));
        for line in body.lines().filter(|l| l.starts_with("# ")) {
            text.push_str(&format!("  {}\n", &line[2..]));
        }
        let rows = read_aggregate(&body);
        let mut metrics: Vec<&str> = Vec::new();
        for (m, ..) in &rows {
            if !metrics.contains(&m.as_str()) {
                metrics.push(m);
            }
        }
        for m in metrics {
            text.push_str(&format!("  {m}\n"));
            let mut points = Vec::new();
            for (_, p, level, n) in rows.iter().filter(|r| r.0 == m) {
                text.push_str(&format!(
                    "    level {level}  n={n}  eps={:.4e}  {:.4e} [{:.4e}, {:.4e}]\n",
                    p.eps, p.median, p.q1, p.q3
                ));
                points.push(p.clone());
            }
            if m.starts_with("consistency_") || m == "sup_error" {
                series.push(Series {
                    label: format!("{stem}: {m}"),
                    points,
                });
            }
        }
    }
    if let Some(a) = manifest.artifacts.iter().find(|a| a.path == "report.json") {
        let body = std::fs::read_to_string(run_dir.join(&a.path)).or_runtime()?;
        text.push_str("\nsolve report:\n");
        for line in body.lines() {
            text.push_str(&format!("  {line}\n"));
        }
    }
    std::fs::write(run_dir.join(REPORT_TEXT), &text).or_runtime()?;
    let timestamp = (manifest.updated_unix != 0).then_some(manifest.updated_unix);
    let svg = loglog_chart("run index", "median over seeds", &series, timestamp);
    std::fs::write(run_dir.join(REPORT_SVG), svg).or_runtime()?;
    Ok(())
}
