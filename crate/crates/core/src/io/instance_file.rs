use std::collections::HashSet;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AgentProfile, BenefitFunction, Instance, Model};

pub const SCHEMA_VERSION: u32 = 1;

/// On-disk instance.
///
/// ```json
/// {
///   "schema_version": 1,
///   "sigma2": 1.0,
///   "model": {"privacy_constrained": {"g": {"linear": {"a": 1.0, "b": 0.1}}}},
///   "agents": [{"id": "x", "tau": 0.8}]
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema_version: u32,
    pub sigma2: f64,
    pub model: ModelSpec,
    pub agents: Vec<AgentSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    QuasiLinear {
        f: FunctionSpec,
        outside_option: f64,
    },
    PrivacyConstrained {
        g: FunctionSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Linear { a: f64, b: f64 },
    Piecewise(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

impl From<&BenefitFunction> for FunctionSpec {
    fn from(f: &BenefitFunction) -> Self {
        match f {
            BenefitFunction::Linear { a, b } => FunctionSpec::Linear { a: *a, b: *b },
            BenefitFunction::PiecewiseConcave { breakpoints } => {
                FunctionSpec::Piecewise(breakpoints.clone())
            }
        }
    }
}

impl FunctionSpec {
    fn to_benefit(&self, path: &str) -> Result<BenefitFunction> {
        let f = match self {
            FunctionSpec::Linear { a, b } => BenefitFunction::linear(*a, *b),
            FunctionSpec::Piecewise(points) => BenefitFunction::piecewise(points.clone()),
        };
        f.map_err(|e| Error::schema(path, strip_domain(e)))
    }
}

impl From<&Model> for ModelSpec {
    fn from(m: &Model) -> Self {
        match m {
            Model::QuasiLinear { f, outside_option } => ModelSpec::QuasiLinear {
                f: f.into(),
                outside_option: *outside_option,
            },
            Model::PrivacyConstrained { g } => ModelSpec::PrivacyConstrained { g: g.into() },
        }
    }
}

fn strip_domain(e: Error) -> String {
    match e {
        Error::Domain(m) => m,
        other => other.to_string(),
    }
}

impl InstanceFile {
    /// Input-order snapshot of an instance.
    pub fn from_instance(instance: &Instance) -> Self {
        let (agents, ids) = instance.input_agents();
        let agents = agents
            .iter()
            .zip(ids)
            .map(|(a, id)| {
                let (c, budget) = (a.cost_coeff(), a.budget());
                let tau = if c.is_some() && budget.is_some() {
                    None
                } else {
                    a.threshold()
                };
                AgentSpec { id, c, budget, tau }
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            sigma2: instance.sigma2(),
            model: instance.model().into(),
            agents,
        }
    }

    pub fn into_instance(self) -> Result<Instance> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::schema(
                "schema_version",
                format!(
                    "unsupported schema version {}, expected {SCHEMA_VERSION}",
                    self.schema_version
                ),
            ));
        }
        if !self.sigma2.is_finite() || self.sigma2 <= 0.0 {
            return Err(Error::schema(
                "sigma2",
                format!("must be finite and > 0, got {}", self.sigma2),
            ));
        }
        if self.agents.is_empty() {
            return Err(Error::schema("agents", "at least one agent is required"));
        }
        let (model, privacy) = match &self.model {
            ModelSpec::QuasiLinear { f, outside_option } => {
                if !outside_option.is_finite() {
                    return Err(Error::schema(
                        "model.quasi_linear.outside_option",
                        "must be finite",
                    ));
                }
                let f = f.to_benefit("model.quasi_linear.f")?;
                (
                    Model::QuasiLinear {
                        f,
                        outside_option: *outside_option,
                    },
                    false,
                )
            }
            ModelSpec::PrivacyConstrained { g } => (
                Model::PrivacyConstrained {
                    g: g.to_benefit("model.privacy_constrained.g")?,
                },
                true,
            ),
        };
        let mut seen = HashSet::new();
        let mut agents = Vec::with_capacity(self.agents.len());
        let mut ids = Vec::with_capacity(self.agents.len());
        for (i, spec) in self.agents.into_iter().enumerate() {
            if !seen.insert(spec.id.clone()) {
                return Err(Error::schema(
                    format!("agents[{i}].id"),
                    format!("duplicate agent id {:?}", spec.id),
                ));
            }
            if privacy && spec.tau.is_none() && (spec.c.is_none() || spec.budget.is_none()) {
                return Err(Error::schema(
                    format!("agents[{i}]"),
                    format!("agent {:?} needs tau, or both c and B", spec.id),
                ));
            }
            if !privacy && spec.c.is_none() {
                return Err(Error::schema(
                    format!("agents[{i}].c"),
                    format!("agent {:?} needs a cost coefficient c", spec.id),
                ));
            }
            let profile = AgentProfile::new(spec.c, spec.budget, spec.tau).map_err(|e| {
                let field = if spec.tau.is_some_and(|t| !(t > 0.0)) {
                    ".tau"
                } else {
                    ""
                };
                Error::schema(
                    format!("agents[{i}]{field}"),
                    format!("agent {:?}: {}", spec.id, strip_domain(e)),
                )
            })?;
            agents.push(profile);
            ids.push(spec.id);
        }
        Instance::with_ids(self.sigma2, agents, ids, model)
            .map_err(|e| Error::schema("", strip_domain(e)))
    }
}

/// Parses and validates an instance from JSON text.
pub fn parse_instance(text: &str) -> Result<Instance> {
    parse_json::<InstanceFile>(text)?.into_instance()
}

/// Strict JSON decoding: syntax errors carry line and column, type and
/// field errors carry the field path.
pub(crate) fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        match inner.classify() {
            serde_json::error::Category::Data => Error::schema(path, strip_location(&inner)),
            _ => Error::Parse {
                line: inner.line(),
                column: inner.column(),
                message: strip_location(&inner),
            },
        }
    })?;
    de.end().map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: strip_location(&e),
    })?;
    Ok(value)
}

fn strip_location(e: &serde_json::Error) -> String {
    let s = e.to_string();
    match s.rfind(" at line ") {
        Some(k) => s[..k].to_string(),
        None => s,
    }
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    parse_instance(&text)
}

/// Pretty-printed JSON with a trailing newline.
pub fn instance_json(instance: &Instance) -> String {
    let mut s =
        serde_json::to_string_pretty(&InstanceFile::from_instance(instance)).expect("serializable");
    s.push('\n');
    s
}

pub fn write_instance(path: impl AsRef<Path>, instance: &Instance) -> Result<()> {
    std::fs::write(path, instance_json(instance))?;
    Ok(())
}
