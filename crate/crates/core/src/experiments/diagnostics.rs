use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ExperimentError;
use crate::calculus::ScalarField;
use crate::geometry::{distance, sample_cloud, unit_ball_volume, DataCloud, Density, Domain};

/// Pair count above which the Hölder quotient is estimated on random pairs.
pub const HOLDER_MAX_PAIRS: usize = 100_000;
const HOLDER_PAIR_SEED: u64 = 0x486f_6c64_6572;

/// `max |u_i − u_j| / (|Z_i − Z_j|^γ + ε^γ)` over all pairs, or over
/// [`HOLDER_MAX_PAIRS`] pairs drawn with a fixed seed when there are more.
pub fn holder_diagnostic(
    u: &[f64],
    cloud: &DataCloud,
    eps: f64,
    gamma: f64,
) -> Result<f64, ExperimentError> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(ExperimentError::InvalidArgument(format!(
            "holder exponent must lie in (0, 1], got {gamma}"
        )));
    }
    let n = cloud.len();
    let floor = eps.powf(gamma);
    let quotient = |i: usize, j: usize| {
        (u[i] - u[j]).abs() / (distance(cloud.point(i), cloud.point(j)).powf(gamma) + floor)
    };
    let mut best: f64 = 0.0;
    if n * n.saturating_sub(1) / 2 <= HOLDER_MAX_PAIRS {
        for i in 0..n {
            for j in i + 1..n {
                best = best.max(quotient(i, j));
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(HOLDER_PAIR_SEED);
        for _ in 0..HOLDER_MAX_PAIRS {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            best = best.max(quotient(i, j));
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryGap {
    pub value: f64,
    /// No cloud point lies within δ of the boundary.
    pub empty: bool,
}

/// `max |u(Z_i) − g(proj Z_i)|` over cloud points within `δ` of the boundary.
pub fn boundary_gap(
    u: &[f64],
    g: &dyn ScalarField,
    cloud: &DataCloud,
    delta: f64,
) -> Result<BoundaryGap, ExperimentError> {
    if !(delta > 0.0) {
        return Err(ExperimentError::InvalidArgument(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let domain = cloud.domain();
    let mut value: f64 = 0.0;
    let mut empty = true;
    for (i, p) in cloud.points().enumerate() {
        if domain.boundary_distance(p) <= delta {
            empty = false;
            let proj = domain.project_to_boundary(p);
            value = value.max((u[i] - g.value(&proj)).abs());
        }
    }
    Ok(BoundaryGap { value, empty })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConcentrationResult {
    /// Fraction of runs with `|Y − E Y|` above the threshold.
    pub empirical_rate: f64,
    /// `2 exp(−φ₁ n |Ω| λ² / 4)`.
    pub bound: f64,
    /// `φ₁ n |Ω| λ`.
    pub threshold: f64,
    pub expected_count: f64,
    pub exceedances: usize,
    pub runs: usize,
    /// Largest `|Y − E Y|` seen.
    pub max_deviation: f64,
}

/// `∫_{B_r(x0)} φ` by the midpoint rule on a grid of about 10⁶ cells
/// (exact for uniform densities).
fn ball_mass(density: &Density, x0: &[f64], r: f64) -> f64 {
    let dim = x0.len();
    if density.is_uniform() {
        return density.value(x0) * unit_ball_volume(dim) * r.powi(dim as i32);
    }
    let ball = Domain::ball(x0.to_vec(), r).expect("radius checked positive");
    let per_axis = ((1e6f64).powf(1.0 / dim as f64) as usize).max(2);
    let cells = ball.grid_points(per_axis, false);
    let cell_volume = (2.0 * r / per_axis as f64).powi(dim as i32);
    cells.iter().map(|x| density.value(x)).sum::<f64>() * cell_volume
}

/// Exceedance rate of the neighborhood count `Y = #{Z_i ∈ B_ε(x0)}` against
/// the Bernstein-type bound with `ψ = 1_{B_ε(x0)}` and `‖f‖∞ = φ₁`.
#[allow(clippy::too_many_arguments)]
pub fn concentration_check(
    domain: &Domain,
    density: &Density,
    n: usize,
    seed_count: usize,
    eps: f64,
    lambda: f64,
    x0: &[f64],
    base_seed: u64,
) -> Result<ConcentrationResult, ExperimentError> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(ExperimentError::InvalidArgument(format!(
            "lambda must lie in (0, 1], got {lambda}"
        )));
    }
    if !(eps > 0.0) || x0.len() != domain.dim() || domain.boundary_distance(x0) <= eps {
        return Err(ExperimentError::InvalidArgument(format!(
            "the ball B_{eps}({x0:?}) must lie inside the domain"
        )));
    }
    if seed_count == 0 {
        return Err(ExperimentError::InvalidArgument(
            "seed_count must be positive".into(),
        ));
    }
    let mass = ball_mass(density, x0, eps);
    let expected = n as f64 * mass;
    let scale = density.phi1() * n as f64 * domain.volume();
    let threshold = scale * lambda;
    let bound = 2.0 * (-0.25 * scale * lambda * lambda).exp();

    let mut exceedances = 0;
    let mut max_deviation: f64 = 0.0;
    for s in 0..seed_count {
        let seed = super::task_seed(base_seed, s as u64);
        let cloud = sample_cloud(domain, density, n, seed)?;
        let count = cloud.points().filter(|p| distance(p, x0) <= eps).count();
        let deviation = (count as f64 - expected).abs();
        max_deviation = max_deviation.max(deviation);
        if deviation > threshold {
            exceedances += 1;
        }
    }
    Ok(ConcentrationResult {
        empirical_rate: exceedances as f64 / seed_count as f64,
        bound,
        threshold,
        expected_count: expected,
        exceedances,
        runs: seed_count,
        max_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::SmoothField;
    use approx::assert_relative_eq;

    fn interval_cloud(points: &[f64]) -> DataCloud {
        let pts: Vec<Vec<f64>> = points.iter().map(|&v| vec![v]).collect();
        DataCloud::from_points(Domain::unit_box(1), &pts).unwrap()
    }

    #[test]
    fn holder_examples() {
        let cloud = interval_cloud(&[0.1, 0.3, 0.6, 0.9]);
        assert_eq!(holder_diagnostic(&[2.0; 4], &cloud, 0.1, 0.5).unwrap(), 0.0);
        let affine: Vec<f64> = cloud.points().map(|p| 3.0 * p[0] - 1.0).collect();
        let c = holder_diagnostic(&affine, &cloud, 0.1, 1.0).unwrap();
        assert!(c <= 3.0 && c > 0.0);
        // Pair (0.1, 0.9): 2.4 / (0.8 + 0.1).
        assert_relative_eq!(c, 2.4 / 0.9, epsilon = 1e-12);
        assert!(holder_diagnostic(&affine, &cloud, 0.1, 0.0).is_err());
        assert!(holder_diagnostic(&affine, &cloud, 0.1, 1.5).is_err());
    }

    #[test]
    fn holder_sampled_regime_is_deterministic() {
        let domain = Domain::unit_box(2);
        let cloud = sample_cloud(&domain, &Density::uniform(&domain), 1000, 5).unwrap();
        let u: Vec<f64> = cloud.points().map(|p| p[0] - 2.0 * p[1]).collect();
        let a = holder_diagnostic(&u, &cloud, 0.05, 1.0).unwrap();
        let b = holder_diagnostic(&u, &cloud, 0.05, 1.0).unwrap();
        assert_eq!(a, b);
        assert!(a <= 5f64.sqrt());
    }

    #[test]
    fn boundary_gap_examples() {
        let cloud = interval_cloud(&[0.05, 0.5, 0.97]);
        let g = SmoothField::parse("x1", 1).unwrap();
        let u = [0.05, 0.5, 0.97];
        let gap = boundary_gap(&u, &g, &cloud, 0.1).unwrap();
        assert!(!gap.empty);
        // Projections are 0 and 1: gaps 0.05 and 0.03.
        assert_relative_eq!(gap.value, 0.05, epsilon = 1e-15);
        let none = boundary_gap(&u, &g, &cloud, 0.01).unwrap();
        assert!(none.empty);
        assert_eq!(none.value, 0.0);
        let c = SmoothField::constant(1.0, 1);
        assert_eq!(boundary_gap(&[1.0; 3], &c, &cloud, 0.2).unwrap().value, 0.0);
        assert!(boundary_gap(&u, &g, &cloud, 0.0).is_err());
    }

    #[test]
    fn concentration_bounds() {
        let domain = Domain::unit_box(2);
        let density = Density::uniform(&domain);
        let x0 = [0.5, 0.5];
        let r = concentration_check(&domain, &density, 10_000, 5, 0.1, 0.05, &x0, 1).unwrap();
        assert_relative_eq!(r.bound, 2.0 * (-6.25f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(r.bound, 0.003860908272455415, max_relative = 1e-12);
        assert_relative_eq!(
            r.expected_count,
            10_000.0 * std::f64::consts::PI * 0.01,
            max_relative = 1e-12
        );
        assert_eq!(r.threshold, 500.0);
        assert!(r.empirical_rate <= r.bound);
        let r1 = concentration_check(&domain, &density, 2000, 3, 0.1, 1.0, &x0, 1).unwrap();
        assert_eq!(r1.exceedances, 0);
        assert!(concentration_check(&domain, &density, 100, 2, 0.6, 0.1, &x0, 1).is_err());
        assert!(concentration_check(&domain, &density, 100, 2, 0.1, 0.0, &x0, 1).is_err());
    }

    #[test]
    fn ball_mass_quadrature() {
        let domain = Domain::unit_box(2);
        let density = Density::new(SmoothField::parse("1 + x1", 2).unwrap(), &domain).unwrap();
        // phi = (1 + x1) / 1.5; the ball is symmetric about x1 = 0.5.
        let m = ball_mass(&density, &[0.5, 0.5], 0.2);
        assert_relative_eq!(m, std::f64::consts::PI * 0.04, max_relative = 1e-4);
    }
}
