//! Pointwise evaluation of the tug-of-war operator
//!
//! ```text
//! L u(x) = α/(2ε²) (min_B u + max_B u − 2u(x)) + β/ε² (mean_B u − u(x)),  B = X ∩ B̄_ε(x)
//! ```
//!
//! its averaging and bracket parts, and the extremal pair operators L⁺/L⁻.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fmt_float;
use crate::geometry::SpatialIndex;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("p must be at least 2, got {0}")]
    InvalidP(f64),
    #[error("dimension must be at least 1")]
    InvalidDim,
    #[error("eps must be positive and finite, got {0}")]
    InvalidEps(f64),
    #[error("invalid Pucci parameters: {0}")]
    InvalidPucci(String),
}

/// `(α, β)` for exponent `p` in dimension `dim`.
pub fn alpha_beta(p: f64, dim: usize) -> Result<(f64, f64), OperatorError> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(OperatorError::InvalidP(p));
    }
    if dim == 0 {
        return Err(OperatorError::InvalidDim);
    }
    let n = dim as f64;
    let alpha = (p - 2.0) / (n + p);
    // 1 - α rather than (N+2)/(N+p) keeps α + β == 1 exactly.
    Ok((alpha, 1.0 - alpha))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    pub dim: usize,
    pub p: f64,
    pub eps: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl GameParams {
    pub fn new(dim: usize, p: f64, eps: f64) -> Result<Self, OperatorError> {
        let (alpha, beta) = alpha_beta(p, dim)?;
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(OperatorError::InvalidEps(eps));
        }
        Ok(GameParams {
            dim,
            p,
            eps,
            alpha,
            beta,
        })
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self, OperatorError> {
        GameParams::new(self.dim, self.p, eps)
    }
}

/// Outer radius `Λε` and reflected-ball radius `τε²` of the extremal operators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PucciParams {
    pub lambda: f64,
    pub tau: f64,
}

impl Default for PucciParams {
    fn default() -> Self {
        PucciParams {
            lambda: 1.0,
            tau: 1.0,
        }
    }
}

impl PucciParams {
    pub fn new(lambda: f64, tau: f64) -> Result<Self, OperatorError> {
        let params = PucciParams { lambda, tau };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), OperatorError> {
        if !(self.lambda >= 1.0) || !self.lambda.is_finite() {
            return Err(OperatorError::InvalidPucci(format!(
                "lambda must be >= 1, got {}",
                self.lambda
            )));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(OperatorError::InvalidPucci(format!(
                "tau must be > 0, got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorEval {
    pub value: f64,
    pub neighborhood_card: usize,
    /// The neighborhood is `{x}` alone; every part is then zero.
    pub degenerate: bool,
    /// The extremal pair search found no admissible pair and the plain
    /// min/max bracket was used instead.
    pub fallback: bool,
}

/// Sum of `term(0..len)` by pairwise (cascade) summation, in index order.
pub(crate) fn pairwise_sum<F: Fn(usize) -> f64>(term: &F, lo: usize, hi: usize) -> f64 {
    if hi - lo <= 16 {
        let mut s = 0.0;
        for i in lo..hi {
            s += term(i);
        }
        s
    } else {
        let mid = lo + (hi - lo) / 2;
        pairwise_sum(term, lo, mid) + pairwise_sum(term, mid, hi)
    }
}

/// `mean_{j ∈ nbhd} (u_j − u_x)`.
#[inline]
pub fn mean_difference(u: &[f64], nbhd: &[u32], ux: f64) -> f64 {
    let term = |k: usize| u[nbhd[k] as usize] - ux;
    pairwise_sum(&term, 0, nbhd.len()) / nbhd.len() as f64
}

/// `mean_{j ∈ nbhd} u_j`.
#[inline]
pub fn mean_value(u: &[f64], nbhd: &[u32]) -> f64 {
    let term = |k: usize| u[nbhd[k] as usize];
    pairwise_sum(&term, 0, nbhd.len()) / nbhd.len() as f64
}

#[inline]
pub fn min_max(u: &[f64], nbhd: &[u32]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &j in nbhd {
        let v = u[j as usize];
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// `(mean_B u − u(x)) / ε²` on a precomputed neighborhood.
pub fn l2_on(u: &[f64], nbhd: &[u32], ux: f64, eps: f64) -> f64 {
    mean_difference(u, nbhd, ux) / (eps * eps)
}

/// `(min_B u + max_B u − 2u(x)) / (2ε²)` on a precomputed neighborhood.
pub fn linf_on(u: &[f64], nbhd: &[u32], ux: f64, eps: f64) -> f64 {
    let (lo, hi) = min_max(u, nbhd);
    ((lo - ux) + (hi - ux)) / (2.0 * eps * eps)
}

fn neighborhood(index: &SpatialIndex, node: usize, eps: f64) -> Vec<u32> {
    let mut buf = Vec::new();
    index.ball_neighbors_into(index.cloud().point(node), eps, &mut buf);
    buf
}

fn plain(value: f64, card: usize) -> OperatorEval {
    OperatorEval {
        value,
        neighborhood_card: card,
        degenerate: card <= 1,
        fallback: false,
    }
}

pub fn eval_l2(u: &[f64], node: usize, params: &GameParams, index: &SpatialIndex) -> OperatorEval {
    let nbhd = neighborhood(index, node, params.eps);
    plain(l2_on(u, &nbhd, u[node], params.eps), nbhd.len())
}

pub fn eval_linf(
    u: &[f64],
    node: usize,
    params: &GameParams,
    index: &SpatialIndex,
) -> OperatorEval {
    let nbhd = neighborhood(index, node, params.eps);
    plain(linf_on(u, &nbhd, u[node], params.eps), nbhd.len())
}

pub fn eval_l(u: &[f64], node: usize, params: &GameParams, index: &SpatialIndex) -> OperatorEval {
    let nbhd = neighborhood(index, node, params.eps);
    let ux = u[node];
    let value = params.alpha * linf_on(u, &nbhd, ux, params.eps)
        + params.beta * l2_on(u, &nbhd, ux, params.eps);
    plain(value, nbhd.len())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extremum {
    Max,
    Min,
}

/// `ext_{Z_i ∈ B̄_R(x)} ext_{Z_j ∈ B̄_r(2x − Z_i)} [u(Z_i) + u(Z_j)]`, skipping
/// outer candidates whose reflected ball holds no cloud point. `None` when
/// every candidate is skipped. `x` need not be a cloud point.
pub fn extremal_pair_bracket(
    index: &SpatialIndex,
    u: &[f64],
    x: &[f64],
    outer_radius: f64,
    inner_radius: f64,
    which: Extremum,
) -> Option<f64> {
    let cloud = index.cloud();
    let mut outer = Vec::new();
    let mut inner = Vec::new();
    index.ball_neighbors_into(x, outer_radius, &mut outer);
    let mut reflected = vec![0.0; x.len()];
    let mut best: Option<f64> = None;
    for &i in &outer {
        let zi = cloud.point(i as usize);
        for k in 0..x.len() {
            reflected[k] = 2.0 * x[k] - zi[k];
        }
        index.ball_neighbors_into(&reflected, inner_radius, &mut inner);
        if inner.is_empty() {
            continue;
        }
        let (lo, hi) = min_max(u, &inner);
        let candidate = u[i as usize]
            + match which {
                Extremum::Max => hi,
                Extremum::Min => lo,
            };
        best = Some(match (best, which) {
            (None, _) => candidate,
            (Some(b), Extremum::Max) => b.max(candidate),
            (Some(b), Extremum::Min) => b.min(candidate),
        });
    }
    best
}

fn eval_pucci(
    u: &[f64],
    node: usize,
    params: &GameParams,
    pucci: &PucciParams,
    index: &SpatialIndex,
    which: Extremum,
) -> OperatorEval {
    let eps = params.eps;
    let x = index.cloud().point(node);
    let ux = u[node];
    let nbhd = neighborhood(index, node, eps);
    let pair = extremal_pair_bracket(
        index,
        u,
        x,
        pucci.lambda * eps,
        pucci.tau * eps * eps,
        which,
    );
    let (bracket, fallback) = match pair {
        Some(s) => (s - 2.0 * ux, false),
        None => {
            let (lo, hi) = min_max(u, &nbhd);
            ((lo - ux) + (hi - ux), true)
        }
    };
    let value = params.alpha * bracket / (2.0 * eps * eps) + params.beta * l2_on(u, &nbhd, ux, eps);
    OperatorEval {
        value,
        neighborhood_card: nbhd.len(),
        degenerate: nbhd.len() <= 1,
        fallback,
    }
}

pub fn eval_lplus(
    u: &[f64],
    node: usize,
    params: &GameParams,
    pucci: &PucciParams,
    index: &SpatialIndex,
) -> OperatorEval {
    eval_pucci(u, node, params, pucci, index, Extremum::Max)
}

pub fn eval_lminus(
    u: &[f64],
    node: usize,
    params: &GameParams,
    pucci: &PucciParams,
    index: &SpatialIndex,
) -> OperatorEval {
    eval_pucci(u, node, params, pucci, index, Extremum::Min)
}

/// One row of the operator export.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorRow {
    pub node: usize,
    pub l: f64,
    pub l2: f64,
    pub linf: f64,
    pub lplus: f64,
    pub lminus: f64,
    pub card: usize,
    pub degenerate: bool,
    pub fallback_plus: bool,
    pub fallback_minus: bool,
}

impl OperatorRow {
    fn flags(&self) -> String {
        let mut flags = Vec::new();
        if self.degenerate {
            flags.push("degenerate");
        }
        if self.fallback_plus {
            flags.push("fallback_plus");
        }
        if self.fallback_minus {
            flags.push("fallback_minus");
        }
        if flags.is_empty() {
            "none".to_string()
        } else {
            flags.join(";")
        }
    }
}

/// Every operator at every node, in id order.
pub fn evaluate_all(
    u: &[f64],
    params: &GameParams,
    pucci: &PucciParams,
    index: &SpatialIndex,
) -> Vec<OperatorRow> {
    (0..index.cloud().len())
        .into_par_iter()
        .map(|node| {
            let l2 = eval_l2(u, node, params, index);
            let linf = eval_linf(u, node, params, index);
            let plus = eval_lplus(u, node, params, pucci, index);
            let minus = eval_lminus(u, node, params, pucci, index);
            OperatorRow {
                node,
                l: params.alpha * linf.value + params.beta * l2.value,
                l2: l2.value,
                linf: linf.value,
                lplus: plus.value,
                lminus: minus.value,
                card: l2.neighborhood_card,
                degenerate: l2.degenerate,
                fallback_plus: plus.fallback,
                fallback_minus: minus.fallback,
            }
        })
        .collect()
}

pub fn write_operator_csv<W: Write>(rows: &[OperatorRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "node_id,L,L2,Linf,Lplus,Lminus,card,flags")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.node,
            fmt_float(r.l),
            fmt_float(r.l2),
            fmt_float(r.linf),
            fmt_float(r.lplus),
            fmt_float(r.lminus),
            r.card,
            r.flags()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DataCloud, Domain};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn line(points: &[f64], eps: f64) -> SpatialIndex {
        let interval = Domain::cuboid(vec![-1.0], vec![2.0]).unwrap();
        let pts: Vec<Vec<f64>> = points.iter().map(|&v| vec![v]).collect();
        let cloud = Arc::new(DataCloud::from_points(interval, &pts).unwrap());
        SpatialIndex::for_radius(cloud, eps)
    }

    #[test]
    fn alpha_beta_examples() {
        assert_eq!(alpha_beta(2.0, 3).unwrap(), (0.0, 1.0));
        assert_eq!(alpha_beta(6.0, 2).unwrap(), (0.5, 0.5));
        assert_eq!(alpha_beta(3.0, 1).unwrap(), (0.25, 0.75));
        let (a, b) = alpha_beta(4.0, 1).unwrap();
        assert_relative_eq!(a, 0.4, epsilon = 1e-15);
        assert_relative_eq!(b, 0.6, epsilon = 1e-15);
        assert!(alpha_beta(1.5, 2).is_err());
        assert!(alpha_beta(f64::NAN, 2).is_err());
        assert!(alpha_beta(3.0, 0).is_err());
        for p in [2.0, 2.5, 3.7, 10.0, 1e6] {
            for n in 1..6 {
                let (a, b) = alpha_beta(p, n).unwrap();
                assert_eq!(a + b, 1.0);
                assert_relative_eq!(b, (n as f64 + 2.0) / (n as f64 + p), epsilon = 1e-14);
                assert!((0.0..1.0).contains(&a) && b > 0.0 && b <= 1.0);
            }
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(GameParams::new(1, 3.0, 0.0).is_err());
        assert!(GameParams::new(1, 3.0, f64::INFINITY).is_err());
        assert!(PucciParams::new(0.5, 1.0).is_err());
        assert!(PucciParams::new(1.0, 0.0).is_err());
        assert!(PucciParams::new(1.5, 2.0).is_ok());
    }

    #[test]
    fn three_point_examples() {
        let index = line(&[0.0, 0.5, 1.0], 0.6);
        let u = [0.0, 1.0, 4.0];
        let params = GameParams::new(1, 3.0, 0.6).unwrap();
        let l2 = eval_l2(&u, 1, &params, &index);
        assert_relative_eq!(l2.value, 1.851851851851852, epsilon = 1e-14);
        assert_eq!(l2.neighborhood_card, 3);
        assert!(!l2.degenerate);
        assert_relative_eq!(
            eval_linf(&u, 1, &params, &index).value,
            2.7777777777777777,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            eval_l(&u, 1, &params, &index).value,
            2.0833333333333335,
            epsilon = 1e-14
        );
    }

    #[test]
    fn pucci_three_point_bracket() {
        // τε² = 0.72 reaches 0.5 from both reflections, so the best pair is
        // u(1) + u(0.5) rather than u(1) + u(0).
        let index = line(&[0.0, 0.5, 1.0], 0.6);
        let u = [0.0, 1.0, 4.0];
        let x = [0.5];
        let hi = extremal_pair_bracket(&index, &u, &x, 0.6, 0.72, Extremum::Max).unwrap();
        let lo = extremal_pair_bracket(&index, &u, &x, 0.6, 0.72, Extremum::Min).unwrap();
        assert_eq!(hi - 2.0, 3.0);
        assert_eq!(lo - 2.0, -1.0);

        let params = GameParams::new(1, 3.0, 0.6).unwrap();
        let pucci = PucciParams::new(1.0, 2.0).unwrap();
        let plus = eval_lplus(&u, 1, &params, &pucci, &index);
        let minus = eval_lminus(&u, 1, &params, &pucci, &index);
        assert!(!plus.fallback && !minus.fallback);
        let avg = 0.75 * 1.851851851851852;
        assert_relative_eq!(plus.value, 0.25 * 3.0 / 0.72 + avg, epsilon = 1e-13);
        assert_relative_eq!(minus.value, -0.25 / 0.72 + avg, epsilon = 1e-13);
        let l = eval_l(&u, 1, &params, &index).value;
        assert!(minus.value <= l && l <= plus.value);
    }

    #[test]
    fn pucci_fallback_off_cloud() {
        // Centered at 0.5, the reflections of 0 and 0.1 land at 1 and 0.9,
        // far from every point.
        let index = line(&[0.0, 0.1], 0.6);
        let u = [1.0, 3.0];
        let x = [0.5];
        assert_eq!(
            extremal_pair_bracket(&index, &u, &x, 0.6, 0.01, Extremum::Max),
            None
        );
        assert_eq!(
            extremal_pair_bracket(&index, &u, &x, 0.6, 0.01, Extremum::Min),
            None
        );
        // At a cloud node the node itself is always an admissible pair.
        let params = GameParams::new(1, 4.0, 0.6).unwrap();
        let pucci = PucciParams::new(1.0, 1e-3).unwrap();
        let plus = eval_lplus(&u, 0, &params, &pucci, &index);
        assert!(!plus.fallback);
    }

    #[test]
    fn singleton_is_degenerate_and_zero() {
        let index = line(&[0.0, 1.0], 0.3);
        let u = [2.0, -7.0];
        let params = GameParams::new(1, 5.0, 0.3).unwrap();
        let pucci = PucciParams::default();
        for e in [
            eval_l2(&u, 0, &params, &index),
            eval_linf(&u, 0, &params, &index),
            eval_l(&u, 0, &params, &index),
            eval_lplus(&u, 0, &params, &pucci, &index),
            eval_lminus(&u, 0, &params, &pucci, &index),
        ] {
            assert_eq!(e.value, 0.0);
            assert!(e.degenerate);
            assert_eq!(e.neighborhood_card, 1);
        }
    }

    #[test]
    fn constants_and_affine() {
        let index = line(&[0.0, 0.2, 0.4], 0.25);
        let params = GameParams::new(1, 4.0, 0.25).unwrap();
        let c = [3.5; 3];
        assert_eq!(eval_l(&c, 1, &params, &index).value, 0.0);
        let pucci = PucciParams::default();
        assert_eq!(eval_lplus(&c, 1, &params, &pucci, &index).value, 0.0);
        assert_eq!(eval_lminus(&c, 1, &params, &pucci, &index).value, 0.0);
        let affine = [1.0, 1.5, 2.0];
        assert_eq!(eval_linf(&affine, 1, &params, &index).value, 0.0);
    }

    #[test]
    fn p2_is_pure_average() {
        let index = line(&[0.0, 0.1, 0.35, 0.4], 0.3);
        let u = [0.3, -1.0, 2.0, 0.7];
        let params = GameParams::new(1, 2.0, 0.3).unwrap();
        for node in 0..4 {
            assert_eq!(
                eval_l(&u, node, &params, &index).value,
                eval_l2(&u, node, &params, &index).value
            );
        }
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        let pw = pairwise_sum(&|i| xs[i], 0, xs.len());
        assert_relative_eq!(pw, naive, epsilon = 1e-12);
        assert_eq!(pairwise_sum(&|i| xs[i], 0, 0), 0.0);
    }

    #[test]
    fn csv_export() {
        let index = line(&[0.0, 0.5, 1.0], 0.6);
        let u = [0.0, 1.0, 4.0];
        let params = GameParams::new(1, 3.0, 0.6).unwrap();
        let rows = evaluate_all(&u, &params, &PucciParams::default(), &index);
        let mut buf = Vec::new();
        write_operator_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "node_id,L,L2,Linf,Lplus,Lminus,card,flags");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("1,2.08333333333333"));
        assert!(lines[2].ends_with(",3,none"));
    }
}
