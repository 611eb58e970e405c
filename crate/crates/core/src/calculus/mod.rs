//! Closed-form scalar fields with exact first and second derivatives, and the
//! analytic differential operators the graph operator is consistent with.
//!
//! A [`SmoothField`] is parsed from a small expression language (see
//! [`expr`]) and evaluated either plainly or as a second-order [`Jet`].
//! The consistency target of the tug-of-war operator is
//!
//! ```text
//! kappa(N, p) * [ phi^-2 div(phi^2 grad u) + (p - 2) * Delta_inf u ],   kappa = 1 / (2 (N + p)),
//! ```
//!
//! which splits as `alpha * (1/2) * Delta_inf u + beta * wlap(u) / (2 (N + 2))`.

pub mod expr;
mod jet;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use self::expr::{Func, Node};
pub use self::jet::Jet;
use crate::geometry::Domain;
use crate::operator::GameParams;

/// Smallest gradient norm at which the infinity Laplacian is evaluated.
pub const GRADIENT_FLOOR: f64 = 1e-12;

/// Minimum `|grad u*|` accepted on the probe grid of a manufactured solution.
pub const MANUFACTURED_GRADIENT_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum CalculusError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier '{name}' at offset {offset} (variables are x1..x{dim})")]
    UnknownIdentifier {
        offset: usize,
        name: String,
        dim: usize,
    },
    #[error("weight must be positive, got {value} at {point:?}")]
    NonPositiveWeight { value: f64, point: Vec<f64> },
    #[error("gradient vanishes (|grad u| = {norm:e}) at {point:?}")]
    VanishingGradient { norm: f64, point: Vec<f64> },
    #[error("dimension mismatch: field has {field}, point has {point}")]
    DimensionMismatch { field: usize, point: usize },
}

/// Anything that can be sampled pointwise on a cloud.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
}

/// A parsed closed-form field on `R^N`.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothField {
    root: Arc<Node>,
    dim: usize,
    source: String,
}

impl SmoothField {
    pub fn parse(text: &str, dim: usize) -> Result<Self, CalculusError> {
        let root = expr::parse(text, dim)?;
        Ok(SmoothField {
            root: Arc::new(root),
            dim,
            source: text.to_string(),
        })
    }

    pub fn constant(value: f64, dim: usize) -> Self {
        SmoothField {
            root: Arc::new(Node::Const(value)),
            dim,
            source: format!("{value:?}"),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn node(&self) -> &Node {
        &self.root
    }

    /// True when the tree divides (or raises to a negative power) somewhere,
    /// so callers should check the evaluation domain.
    pub fn has_division(&self) -> bool {
        self.root.contains_division()
    }

    pub fn is_constant(&self) -> bool {
        self.root.is_constant()
    }

    pub fn jet(&self, x: &[f64]) -> Jet {
        debug_assert_eq!(x.len(), self.dim);
        jet::evaluate(&self.root, x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.jet(x).gradient
    }

    /// Row-major Hessian.
    pub fn hessian(&self, x: &[f64]) -> Vec<f64> {
        self.jet(x).hessian
    }
}

impl ScalarField for SmoothField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.root.eval(x)
    }
}

impl fmt::Display for SmoothField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

/// Parse `text` as a field in `dim` variables.
pub fn parse_expression(text: &str, dim: usize) -> Result<SmoothField, CalculusError> {
    SmoothField::parse(text, dim)
}

fn check_dim(field: &SmoothField, x: &[f64]) -> Result<(), CalculusError> {
    if field.dim != x.len() {
        return Err(CalculusError::DimensionMismatch {
            field: field.dim,
            point: x.len(),
        });
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `phi^-2 div(phi^2 grad u) = Delta u + 2 grad(phi).grad(u) / phi`.
pub fn weighted_laplacian(
    phi: &SmoothField,
    u: &SmoothField,
    x: &[f64],
) -> Result<f64, CalculusError> {
    check_dim(phi, x)?;
    check_dim(u, x)?;
    let phi_jet = phi.jet(x);
    if !(phi_jet.value > 0.0) {
        return Err(CalculusError::NonPositiveWeight {
            value: phi_jet.value,
            point: x.to_vec(),
        });
    }
    let u_jet = u.jet(x);
    Ok(u_jet.laplacian() + 2.0 * dot(&phi_jet.gradient, &u_jet.gradient) / phi_jet.value)
}

fn infinity_laplacian_of(jet: &Jet, x: &[f64]) -> Result<f64, CalculusError> {
    let norm2 = dot(&jet.gradient, &jet.gradient);
    let norm = norm2.sqrt();
    if !(norm > GRADIENT_FLOOR) {
        return Err(CalculusError::VanishingGradient {
            norm,
            point: x.to_vec(),
        });
    }
    let dim = jet.dim();
    let mut acc = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            acc += jet.hess(i, j) * jet.gradient[i] * jet.gradient[j];
        }
    }
    Ok(acc / norm2)
}

/// Second derivative of `u` in its normalized gradient direction.
pub fn infinity_laplacian(u: &SmoothField, x: &[f64]) -> Result<f64, CalculusError> {
    check_dim(u, x)?;
    infinity_laplacian_of(&u.jet(x), x)
}

/// Consistency constants of the graph operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PdeTarget {
    pub dim: usize,
    pub p: f64,
    /// Multiplies the whole target; `1` is the Taylor-derived normalization.
    pub target_scale: f64,
}

impl PdeTarget {
    pub fn new(dim: usize, p: f64) -> Self {
        PdeTarget {
            dim,
            p,
            target_scale: 1.0,
        }
    }

    pub fn from_params(params: &GameParams) -> Self {
        PdeTarget::new(params.dim, params.p)
    }

    pub fn with_scale(mut self, target_scale: f64) -> Self {
        self.target_scale = target_scale;
        self
    }

    /// Limit constant of the neighborhood average: `1 / (2 (N + 2))`.
    pub fn kappa2(&self) -> f64 {
        1.0 / (2.0 * (self.dim as f64 + 2.0))
    }

    /// Limit constant of the inf/sup bracket.
    pub fn kappa_inf(&self) -> f64 {
        0.5
    }

    /// `1 / (2 (N + p))`.
    pub fn kappa(&self) -> f64 {
        1.0 / (2.0 * (self.dim as f64 + self.p))
    }

    fn alpha_beta(&self) -> (f64, f64) {
        let n = self.dim as f64;
        ((self.p - 2.0) / (n + self.p), (n + 2.0) / (n + self.p))
    }

    /// The value `eval_L(u)` approaches at `x` under refinement.
    pub fn p_target(
        &self,
        phi: &SmoothField,
        u: &SmoothField,
        x: &[f64],
    ) -> Result<f64, CalculusError> {
        Ok(self.split(phi, u, x)?.combined)
    }

    /// Both parts of the target separately, plus their combination.
    pub fn split(
        &self,
        phi: &SmoothField,
        u: &SmoothField,
        x: &[f64],
    ) -> Result<TargetSplit, CalculusError> {
        let wlap = weighted_laplacian(phi, u, x)?;
        let inf_lap = if self.p > 2.0 {
            Some(infinity_laplacian(u, x)?)
        } else {
            None
        };
        let (alpha, beta) = self.alpha_beta();
        let average_part = self.kappa2() * wlap;
        let bracket_part = inf_lap.map(|d| self.kappa_inf() * d);
        let combined =
            self.target_scale * (alpha * bracket_part.unwrap_or(0.0) + beta * average_part);
        Ok(TargetSplit {
            weighted_laplacian: wlap,
            infinity_laplacian: inf_lap,
            average_part,
            bracket_part,
            combined,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetSplit {
    pub weighted_laplacian: f64,
    /// `None` when `p = 2` (the bracket carries zero weight).
    pub infinity_laplacian: Option<f64>,
    /// `kappa2 * wlap`, the limit of the average part alone.
    pub average_part: f64,
    /// `kappa_inf * Delta_inf u`, the limit of the bracket part alone.
    pub bracket_part: Option<f64>,
    pub combined: f64,
}

/// Pointwise right-hand side `f* = p_target(u*)` for a manufactured solution.
#[derive(Clone, Debug)]
pub struct ManufacturedRhs {
    target: PdeTarget,
    phi: SmoothField,
    u_star: SmoothField,
}

impl ManufacturedRhs {
    pub fn target(&self) -> &PdeTarget {
        &self.target
    }

    pub fn u_star(&self) -> &SmoothField {
        &self.u_star
    }

    pub fn try_value(&self, x: &[f64]) -> Result<f64, CalculusError> {
        self.target.p_target(&self.phi, &self.u_star, x)
    }
}

impl ScalarField for ManufacturedRhs {
    fn dim(&self) -> usize {
        self.u_star.dim
    }

    /// NaN where the target is undefined; the solver rejects non-finite data.
    fn value(&self, x: &[f64]) -> f64 {
        self.try_value(x).unwrap_or(f64::NAN)
    }
}

/// Probe points per axis used to vet manufactured solutions.
const MANUFACTURED_PROBES_PER_AXIS: usize = 41;

/// Build `f*` so that `u*` solves the limit equation exactly.
///
/// Rejects `u*` whose gradient drops below [`MANUFACTURED_GRADIENT_FLOOR`]
/// anywhere on a probe grid of the closed domain.
pub fn manufactured_f(
    target: PdeTarget,
    phi: &SmoothField,
    u_star: &SmoothField,
    domain: &Domain,
) -> Result<ManufacturedRhs, CalculusError> {
    let per_axis = match domain.dim() {
        1 => 401,
        2 => MANUFACTURED_PROBES_PER_AXIS,
        3 => 17,
        _ => 7,
    };
    for x in domain.grid_points(per_axis, true) {
        let grad = u_star.gradient(&x);
        let norm = dot(&grad, &grad).sqrt();
        if !(norm >= MANUFACTURED_GRADIENT_FLOOR) {
            return Err(CalculusError::VanishingGradient { norm, point: x });
        }
        if !(phi.value(&x) > 0.0) {
            return Err(CalculusError::NonPositiveWeight {
                value: phi.value(&x),
                point: x,
            });
        }
    }
    Ok(ManufacturedRhs {
        target,
        phi: phi.clone(),
        u_star: u_star.clone(),
    })
}
