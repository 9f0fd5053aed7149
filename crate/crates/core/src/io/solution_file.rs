use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::io::instance_file::{parse_json, ModelSpec, SCHEMA_VERSION};
use crate::model::{variance_unchecked, EtaSearch, FixedEtaSolution, Instance, Model};
use crate::oracle::KktReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub schema_version: u32,
    pub model: ModelSpec,
    pub eta: f64,
    pub objective: f64,
    /// Keyed by agent id, in input order.
    pub weights: IndexMap<String, f64>,
    pub per_agent: IndexMap<String, AgentResult>,
    pub structure: Structure,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentResult {
    pub weight: f64,
    pub epsilon: f64,
    /// `tau_i - w_i eta` or `f(Var) - o - c_i w_i eta`.
    pub constraint_slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Structure {
    pub t: usize,
    #[serde(rename = "W")]
    pub pooled_weight: f64,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    pub eta_search: EtaSearchInfo,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kkt: Option<KktSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_gap: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtaSearchInfo {
    /// `closed_form`, `grid_search` or `fixed`.
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket: Option<(f64, f64)>,
}

impl From<Option<&EtaSearch>> for EtaSearchInfo {
    fn from(search: Option<&EtaSearch>) -> Self {
        match search {
            None => EtaSearchInfo {
                method: "fixed".into(),
                ..Default::default()
            },
            Some(EtaSearch::ClosedForm { t }) => EtaSearchInfo {
                method: "closed_form".into(),
                t: Some(*t),
                ..Default::default()
            },
            Some(EtaSearch::GridSearch {
                grid_points,
                bracket,
            }) => EtaSearchInfo {
                method: "grid_search".into(),
                grid_points: Some(*grid_points),
                bracket: Some(*bracket),
                ..Default::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KktSummary {
    pub stationarity: f64,
    pub complementary_slackness: f64,
    pub primal_feasibility: f64,
    pub dual_feasible: bool,
    pub inconclusive: bool,
}

impl From<&KktReport> for KktSummary {
    fn from(r: &KktReport) -> Self {
        Self {
            stationarity: r.stationarity_residual,
            complementary_slackness: r.complementary_slackness_residual,
            primal_feasibility: r.primal_feasibility_residual,
            dual_feasible: r.dual_feasibility_ok,
            inconclusive: r.inconclusive,
        }
    }
}

/// Assembles the output record for a solved instance, restoring input order.
pub fn solution_file(
    instance: &Instance,
    solution: &FixedEtaSolution,
    eta_search: Option<&EtaSearch>,
    kkt: Option<&KktReport>,
    oracle_gap: Option<f64>,
) -> SolutionFile {
    let eta = solution.eta;
    let w = &solution.weights;
    let slack: Vec<f64> = match instance.model() {
        Model::PrivacyConstrained { .. } => instance
            .agents()
            .iter()
            .zip(w)
            .map(|(a, wi)| a.threshold().unwrap_or(f64::NAN) - wi * eta)
            .collect(),
        Model::QuasiLinear { f, outside_option } => {
            let surplus = f.eval(variance_unchecked(w, instance.sigma2(), eta)) - outside_option;
            instance
                .agents()
                .iter()
                .zip(w)
                .map(|(a, wi)| surplus - a.cost_coeff().unwrap_or(f64::NAN) * wi * eta)
                .collect()
        }
    };
    let mut weights = IndexMap::new();
    let mut per_agent = IndexMap::new();
    for input_pos in 0..instance.n() {
        let k = instance.sorted_position(input_pos).expect("in range");
        let id = instance.ids()[k].clone();
        weights.insert(id.clone(), w[k]);
        per_agent.insert(
            id,
            AgentResult {
                weight: w[k],
                epsilon: w[k] * eta,
                constraint_slack: slack[k],
            },
        );
    }
    SolutionFile {
        schema_version: SCHEMA_VERSION,
        model: instance.model().into(),
        eta,
        objective: solution.objective,
        weights,
        per_agent,
        structure: Structure {
            t: solution.pool_size,
            pooled_weight: solution.pooled_weight,
            scale: solution.scale,
        },
        diagnostics: Diagnostics {
            eta_search: eta_search.into(),
            kkt: kkt.map(KktSummary::from),
            oracle_gap,
        },
    }
}

/// Pretty-printed JSON with a trailing newline. Numbers use the shortest
/// decimal form that parses back to the same binary64 value.
pub fn solution_json(file: &SolutionFile) -> String {
    let mut s = serde_json::to_string_pretty(file).expect("serializable");
    s.push('\n');
    s
}

pub fn write_solution(path: impl AsRef<Path>, file: &SolutionFile) -> Result<()> {
    std::fs::write(path, solution_json(file))?;
    Ok(())
}

pub fn read_solution(path: impl AsRef<Path>) -> Result<SolutionFile> {
    parse_json(&std::fs::read_to_string(path)?)
}
