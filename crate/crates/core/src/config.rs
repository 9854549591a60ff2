//! Structured-text (TOML) descriptions of barriers, potentials and tracker
//! knobs. Parse errors cite the offending line (syntax) or field path
//! (schema).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer};

use crate::barriers::{Barrier, PolytopeBarrier, QuadConstraint, QuadraticBarrier, SumBarrier};
use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::tracker::{EpsSchedule, Mode, Policy, TrackerConfig};

/// Parses a TOML document into a config type. Syntax errors cite the line,
/// schema errors cite the offending field path.
pub fn from_toml_str<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    let value: toml::Value =
        toml::from_str(text).map_err(|e| Error::Config(format!("{origin}: {e}")))?;
    serde_path_to_error::deserialize(value)
        .map_err(|e| Error::Config(format!("{origin}: field `{}`: {}", e.path(), e.inner())))
}

/// Barrier description.
///
/// ```toml
/// [barrier]
/// type = "polytope"            # polytope | quadratic | sum
/// dimension = 2
/// enclosing_radius = 1.4142135623730951
/// rows = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
/// offsets = [1.0, 1.0, 1.0, 1.0]
/// ```
#[derive(Clone, Debug)]
pub enum BarrierConfig {
    Polytope(PolytopeConfig),
    Quadratic(QuadraticConfig),
    Sum(SumConfig),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolytopeConfig {
    pub dimension: usize,
    pub enclosing_radius: f64,
    pub rows: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
    #[serde(default)]
    pub start: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticConfig {
    pub dimension: usize,
    pub enclosing_radius: f64,
    pub constraints: Vec<QuadConstraintConfig>,
    #[serde(default)]
    pub start: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SumConfig {
    pub parts: Vec<BarrierConfig>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadConstraintConfig {
    pub q: Vec<Vec<f64>>,
    pub p: Vec<f64>,
    pub c: f64,
}

/// Dispatches on a string tag, then deserializes the remaining fields with
/// path-preserving errors.
fn tagged_table<'de, D: Deserializer<'de>>(
    d: D,
    tag_field: &'static str,
) -> std::result::Result<(String, toml::Value), D::Error> {
    let value = toml::Value::deserialize(d)?;
    let table = value
        .as_table()
        .ok_or_else(|| D::Error::custom("expected a table"))?;
    let tag = table
        .get(tag_field)
        .and_then(|v| v.as_str())
        .ok_or_else(|| D::Error::custom(format!("needs a string `{tag_field}` field")))?
        .to_owned();
    let mut rest = table.clone();
    rest.remove(tag_field);
    Ok((tag, toml::Value::Table(rest)))
}

fn fields<'de, D: Deserializer<'de>, T: serde::de::DeserializeOwned>(
    rest: toml::Value,
) -> std::result::Result<T, D::Error> {
    serde_path_to_error::deserialize(rest)
        .map_err(|e| D::Error::custom(format!("field `{}`: {}", e.path(), e.inner())))
}

impl<'de> Deserialize<'de> for BarrierConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (tag, rest) = tagged_table(d, "type")?;
        match tag.as_str() {
            "polytope" => fields::<D, _>(rest).map(BarrierConfig::Polytope),
            "quadratic" => fields::<D, _>(rest).map(BarrierConfig::Quadratic),
            "sum" => fields::<D, _>(rest).map(BarrierConfig::Sum),
            other => Err(D::Error::custom(format!(
                "field `type`: unknown barrier type `{other}` (expected polytope | quadratic | sum)"
            ))),
        }
    }
}

impl BarrierConfig {
    pub fn build(&self) -> Result<Arc<dyn Barrier>> {
        match self {
            BarrierConfig::Polytope(cfg) => {
                let a = matrix_from_rows(&cfg.rows, cfg.dimension, "barrier.rows")?;
                if cfg.offsets.len() != cfg.rows.len() {
                    return Err(Error::Config(format!(
                        "barrier.offsets has {} entries for {} rows",
                        cfg.offsets.len(),
                        cfg.rows.len()
                    )));
                }
                let b = DVector::from_vec(cfg.offsets.clone());
                let mut barrier = PolytopeBarrier::new(a, b, cfg.enclosing_radius)?;
                if let Some(x0) = &cfg.start {
                    barrier = barrier.with_start(DVector::from_vec(x0.clone()))?;
                }
                Ok(Arc::new(barrier))
            }
            BarrierConfig::Quadratic(cfg) => {
                let cons = cfg
                    .constraints
                    .iter()
                    .enumerate()
                    .map(|(j, c)| {
                        Ok(QuadConstraint {
                            q: matrix_from_rows(
                                &c.q,
                                cfg.dimension,
                                &format!("barrier.constraints[{j}].q"),
                            )?,
                            p: expect_len(&c.p, cfg.dimension, &format!("barrier.constraints[{j}].p"))?,
                            c: c.c,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut barrier = QuadraticBarrier::new(cons, cfg.enclosing_radius)?;
                if let Some(x0) = &cfg.start {
                    barrier = barrier.with_start(DVector::from_vec(x0.clone()))?;
                }
                Ok(Arc::new(barrier))
            }
            BarrierConfig::Sum(cfg) => {
                let built = cfg.parts.iter().map(|p| p.build()).collect::<Result<Vec<_>>>()?;
                Ok(Arc::new(SumBarrier::new(built)?))
            }
        }
    }
}

fn matrix_from_rows(rows: &[Vec<f64>], dim: usize, field: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(Error::Config(format!("{field}: needs at least one row")));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(Error::Config(format!(
                "{field}[{i}]: expected {dim} entries, found {}",
                row.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]))
}

fn expect_len(v: &[f64], dim: usize, field: &str) -> Result<DVector<f64>> {
    if v.len() != dim {
        return Err(Error::Config(format!("{field}: expected {dim} entries, found {}", v.len())));
    }
    Ok(DVector::from_vec(v.to_vec()))
}

/// Potential description.
///
/// ```toml
/// [potential]
/// kind = "linear"              # uniform | linear | quadratic
/// b = [0.5, 0.0]
/// c = 0.0
/// ```
#[derive(Clone, Debug)]
pub enum PotentialConfig {
    Uniform,
    Linear(LinearPotentialConfig),
    Quadratic(QuadraticPotentialConfig),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearPotentialConfig {
    pub b: Vec<f64>,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub lipschitz_l: Option<f64>,
    #[serde(default)]
    pub smooth_sigma: Option<f64>,
    #[serde(default)]
    pub custom_r_star: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticPotentialConfig {
    pub center: Vec<f64>,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default)]
    pub lipschitz_l: Option<f64>,
    #[serde(default)]
    pub smooth_sigma: Option<f64>,
    #[serde(default)]
    pub custom_r_star: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl<'de> Deserialize<'de> for PotentialConfig {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (tag, rest) = tagged_table(d, "kind")?;
        match tag.as_str() {
            "uniform" => Ok(PotentialConfig::Uniform),
            "linear" => fields::<D, _>(rest).map(PotentialConfig::Linear),
            "quadratic" => fields::<D, _>(rest).map(PotentialConfig::Quadratic),
            other => Err(D::Error::custom(format!(
                "field `kind`: unknown potential kind `{other}` (expected uniform | linear | quadratic)"
            ))),
        }
    }
}

impl PotentialConfig {
    pub fn build(&self, dim: usize) -> Result<Potential> {
        match self {
            PotentialConfig::Uniform => Ok(Potential::uniform()),
            PotentialConfig::Linear(cfg) => {
                let coeff = expect_len(&cfg.b, dim, "potential.b")?;
                let mut p = Potential::linear(coeff, cfg.c);
                if let Some(l) = cfg.lipschitz_l {
                    p = p.with_lipschitz(l);
                }
                if let Some(s) = cfg.smooth_sigma {
                    p = p.with_smoothness(s);
                }
                Ok(p)
            }
            PotentialConfig::Quadratic(cfg) => {
                let c = expect_len(&cfg.center, dim, "potential.center")?;
                let mut p = Potential::gaussian_weighted(c, cfg.weight);
                if let Some(l) = cfg.lipschitz_l {
                    p = p.with_lipschitz(l);
                }
                if let Some(s) = cfg.smooth_sigma {
                    p = p.with_smoothness(s);
                }
                Ok(p)
            }
        }
    }
}

/// Tracker knobs as they appear in run configs.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerKnobs {
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_policy")]
    pub policy: String,
}

fn default_mode() -> String {
    "supnorm".into()
}

fn default_eps() -> f64 {
    0.1
}

fn default_policy() -> String {
    "accuracy".into()
}

impl Default for TrackerKnobs {
    fn default() -> Self {
        Self { c: 1.0, mode: default_mode(), eps: default_eps(), policy: default_policy() }
    }
}

impl TrackerKnobs {
    pub fn mode(&self) -> Result<Mode> {
        match self.mode.as_str() {
            "supnorm" => Ok(Mode::SupNorm),
            "l2" => Ok(Mode::L2),
            other => Err(Error::Config(format!("tracker.mode: unknown mode `{other}`"))),
        }
    }

    pub fn policy(&self) -> Result<Policy> {
        match self.policy.as_str() {
            "accuracy" => Ok(Policy::Accuracy),
            "onestep" => Ok(Policy::OneStep),
            other => Err(Error::Config(format!("tracker.policy: unknown policy `{other}`"))),
        }
    }

    pub fn build(&self, dim: usize, nu: f64) -> Result<TrackerConfig> {
        Ok(TrackerConfig::new(dim, nu, self.mode()?, EpsSchedule::Constant(self.eps))?
            .with_constant(self.c)?
            .with_policy(self.policy()?))
    }
}
