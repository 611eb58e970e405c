use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use towcloud::experiments::{make_schedule, Schedule, ScheduleMode};
use towcloud::{Density, Domain, GameParams, PucciParams, SmoothField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainConfig {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Annulus {
        center: Vec<f64>,
        inner_radius: f64,
        outer_radius: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PucciConfig {
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "one")]
    pub tau: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub eps0: f64,
    pub ratio: f64,
    pub levels: usize,
    pub mode: ScheduleMode,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "one")]
    pub c0: f64,
}

/// One run. Expressions use the calculus grammar in `x1..xN`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dim: usize,
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Unnormalized density expression; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_g: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rhs_f: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manufactured_u: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud_file: Option<PathBuf>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "one")]
    pub target_scale: f64,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default = "default_probe_grid")]
    pub probe_grid: usize,
    #[serde(default = "default_holder_gamma")]
    pub holder_gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub domain: DomainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pucci: Option<PucciConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleConfig>,
}

fn one() -> f64 {
    1.0
}
fn default_a() -> f64 {
    0.1
}
fn default_seeds() -> Vec<u64> {
    vec![1]
}
fn default_tol() -> f64 {
    1e-9
}
fn default_max_iter() -> usize {
    1_000_000
}
fn default_probes() -> usize {
    20
}
fn default_probe_grid() -> usize {
    41
}
fn default_holder_gamma() -> f64 {
    0.5
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let config: RunConfig = toml::from_str(text)?;
        if config.seeds.is_empty() {
            anyhow::bail!("seeds must list at least one seed");
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn domain(&self) -> anyhow::Result<Domain> {
        let domain = match &self.domain {
            DomainConfig::Ball { center, radius } => Domain::ball(center.clone(), *radius)?,
            DomainConfig::Box { lower, upper } => Domain::cuboid(lower.clone(), upper.clone())?,
            DomainConfig::Annulus {
                center,
                inner_radius,
                outer_radius,
            } => Domain::annulus(center.clone(), *inner_radius, *outer_radius)?,
        };
        if domain.dim() != self.dim {
            anyhow::bail!(
                "domain has dimension {} but dim = {}",
                domain.dim(),
                self.dim
            );
        }
        Ok(domain)
    }

    pub fn density(&self, domain: &Domain) -> anyhow::Result<Density> {
        match self.density.as_deref() {
            None | Some("uniform") => Ok(Density::uniform(domain)),
            Some(text) => Ok(Density::new(self.field("density", text)?, domain)?),
        }
    }

    pub fn field(&self, key: &str, text: &str) -> anyhow::Result<SmoothField> {
        SmoothField::parse(text, self.dim).map_err(|e| anyhow::anyhow!("{key} = {text:?}: {e}"))
    }

    /// The expression under `key`, or an error naming the missing key.
    pub fn required_field(&self, key: &str, value: &Option<String>) -> anyhow::Result<SmoothField> {
        match value {
            Some(text) => self.field(key, text),
            None => anyhow::bail!("this command needs `{key}`"),
        }
    }

    pub fn params(&self, eps: f64) -> anyhow::Result<GameParams> {
        Ok(GameParams::new(self.dim, self.p, eps)?)
    }

    pub fn pucci(&self) -> anyhow::Result<PucciParams> {
        Ok(match &self.pucci {
            Some(c) => PucciParams::new(c.lambda, c.tau)?,
            None => PucciParams::default(),
        })
    }

    pub fn schedule(&self) -> anyhow::Result<Schedule> {
        let Some(s) = &self.schedule else {
            anyhow::bail!("this command needs a [schedule] table");
        };
        Ok(make_schedule(
            s.eps0, s.ratio, s.levels, self.dim, s.a, s.c0, s.mode,
        )?)
    }

    /// Parse every expression the config carries, so syntax errors surface
    /// before any work starts.
    pub fn validate(&self) -> anyhow::Result<()> {
        let domain = self.domain()?;
        self.density(&domain)?;
        for (key, value) in [
            ("boundary_g", &self.boundary_g),
            ("rhs_f", &self.rhs_f),
            ("manufactured_u", &self.manufactured_u),
        ] {
            if let Some(text) = value {
                self.field(key, text)?;
            }
        }
        self.pucci()?;
        if self.tol.is_nan() || self.tol <= 0.0 {
            anyhow::bail!("tol must be positive, got {}", self.tol);
        }
        Ok(())
    }
}
