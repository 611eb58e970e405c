use serde::{Deserialize, Serialize};

use super::ExperimentError;

/// Largest cloud a theoretical schedule may request in dimension two or more.
pub const THEORETICAL_N_LIMIT: f64 = 1e7;
/// Level-0 cloud size of a practical schedule.
pub const PRACTICAL_N0: f64 = 500.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    /// `n_k = ceil(ε_k^-(3N+5+(N+2)a))`, which satisfies the admissibility
    /// condition.
    Theoretical,
    /// `n_k ∝ ε_k^-(N+2) ln(1/ε_k)`, desk-feasible in two dimensions but
    /// outside the admissibility condition.
    Practical,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub k: usize,
    pub n: usize,
    pub eps: f64,
    /// `2 n exp(−c0 n ε^(3N+4+(N+2)a))`.
    pub condition: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub levels: Vec<Level>,
    pub dim: usize,
    pub a: f64,
    pub c0: f64,
    pub mode: ScheduleMode,
}

pub fn condition_value(n: usize, eps: f64, dim: usize, a: f64, c0: f64) -> f64 {
    let exponent = 3.0 * dim as f64 + 4.0 + (dim as f64 + 2.0) * a;
    let n = n as f64;
    2.0 * n * (-c0 * n * eps.powf(exponent)).exp()
}

pub fn make_schedule(
    eps0: f64,
    ratio: f64,
    levels: usize,
    dim: usize,
    a: f64,
    c0: f64,
    mode: ScheduleMode,
) -> Result<Schedule, ExperimentError> {
    let bad = |m: String| Err(ExperimentError::Schedule(m));
    if levels < 2 {
        return bad(format!("a ladder needs at least 2 levels, got {levels}"));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return bad(format!("ratio must lie in (0, 1), got {ratio}"));
    }
    if !(eps0 > 0.0) || !eps0.is_finite() {
        return bad(format!("eps0 must be positive, got {eps0}"));
    }
    if dim == 0 {
        return bad("dimension must be at least 1".into());
    }
    if !(a > 0.0) || !(c0 > 0.0) {
        return bad(format!("a and c0 must be positive, got a = {a}, c0 = {c0}"));
    }
    let nd = dim as f64;
    let eps: Vec<f64> = (0..levels).map(|k| eps0 * ratio.powi(k as i32)).collect();
    let sizes: Vec<f64> = match mode {
        ScheduleMode::Theoretical => {
            let exponent = 3.0 * nd + 5.0 + (nd + 2.0) * a;
            eps.iter().map(|e| e.powf(-exponent).ceil()).collect()
        }
        ScheduleMode::Practical => {
            if eps0 >= 1.0 {
                return bad(format!("practical schedules need eps0 < 1, got {eps0}"));
            }
            let shape = |e: f64| e.powf(-(nd + 2.0)) * (1.0 / e).ln();
            let base = shape(eps0);
            // The 1e-9 slack keeps level 0 at exactly PRACTICAL_N0.
            eps.iter()
                .map(|&e| (PRACTICAL_N0 * shape(e) / base - 1e-9).ceil())
                .collect()
        }
    };
    let last = *sizes.last().unwrap();
    if mode == ScheduleMode::Theoretical && dim >= 2 && last > THEORETICAL_N_LIMIT {
        return bad(format!(
            "theoretical schedule needs n = {last:.3e} points at the finest level in dimension \
             {dim}; use mode = \"practical\""
        ));
    }
    if !last.is_finite() || last > 2f64.powi(53) {
        return bad(format!("finest level needs {last:.3e} points"));
    }
    let levels: Vec<Level> = eps
        .iter()
        .zip(&sizes)
        .enumerate()
        .map(|(k, (&eps, &n))| {
            let n = n as usize;
            Level {
                k,
                n,
                eps,
                condition: condition_value(n, eps, dim, a, c0),
            }
        })
        .collect();
    if levels.windows(2).any(|w| w[1].n <= w[0].n) {
        return bad("cloud sizes are not strictly increasing; lower eps0 or ratio".into());
    }
    Ok(Schedule {
        levels,
        dim,
        a,
        c0,
        mode,
    })
}

impl Schedule {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// One-line statement of whether the ladder satisfies the admissibility
    /// condition; carried in every report header.
    pub fn honesty_note(&self) -> String {
        match self.mode {
            ScheduleMode::Theoretical => format!(
                "schedule=theoretical: n_k = ceil(eps_k^-(3N+5+(N+2)a)), a={}, c0={}; satisfies \
                 the admissibility condition",
                self.a, self.c0
            ),
            ScheduleMode::Practical => format!(
                "schedule=practical: n_k ~ eps_k^-(N+2) ln(1/eps_k) with n_0={PRACTICAL_N0}; \
                 OUTSIDE the admissibility condition (a={}, c0={})",
                self.a, self.c0
            ),
        }
    }
}
