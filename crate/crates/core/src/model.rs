//! Domain types and the closed-form quantities every solver shares:
//! estimator variance, per-agent privacy level, agent utilities and the
//! Laplace-noised weighted mean itself.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Relative slack used whenever a solution sits exactly on a constraint
/// boundary (`w_i * eta <= tau_i` and friends).
pub const BOUNDARY_RTOL: f64 = 1e-12;

/// Privacy parameters of a single agent.
///
/// `threshold` is the largest privacy level `w_i * eta` the agent tolerates.
/// When both a cost coefficient and a budget are given it is derived as
/// `budget / cost_coeff`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentProfile {
    cost_coeff: Option<f64>,
    budget: Option<f64>,
    threshold: Option<f64>,
}

impl AgentProfile {
    /// Quasi-linear agent: only the linear privacy cost `c * eps` matters.
    pub fn with_cost(cost_coeff: f64) -> Result<Self> {
        Self::new(Some(cost_coeff), None, None)
    }

    pub fn with_threshold(threshold: f64) -> Result<Self> {
        Self::new(None, None, Some(threshold))
    }

    pub fn with_budget(cost_coeff: f64, budget: f64) -> Result<Self> {
        Self::new(Some(cost_coeff), Some(budget), None)
    }

    /// General constructor. Supplying all three fields requires
    /// `threshold == budget / cost_coeff` to 1e-9 relative.
    pub fn new(
        cost_coeff: Option<f64>,
        budget: Option<f64>,
        threshold: Option<f64>,
    ) -> Result<Self> {
        if let Some(c) = cost_coeff {
            if !c.is_finite() || c < 0.0 {
                return Err(Error::domain(format!(
                    "cost coefficient must be finite and >= 0, got {c}"
                )));
            }
        }
        if let Some(b) = budget {
            if !b.is_finite() || b < 0.0 {
                return Err(Error::domain(format!(
                    "budget must be finite and >= 0, got {b}"
                )));
            }
        }
        let derived = match (cost_coeff, budget) {
            (Some(c), Some(b)) => {
                if c == 0.0 {
                    return Err(Error::domain(
                        "a zero cost coefficient with a budget gives an unbounded threshold",
                    ));
                }
                Some(b / c)
            }
            _ => None,
        };
        let threshold = match (threshold, derived) {
            (Some(t), Some(d)) => {
                if (t - d).abs() > 1e-9 * t.abs().max(d.abs()) {
                    return Err(Error::domain(format!(
                        "threshold {t} disagrees with budget / cost = {d}"
                    )));
                }
                Some(t)
            }
            (Some(t), None) => Some(t),
            (None, d) => d,
        };
        if let Some(t) = threshold {
            if !t.is_finite() || t <= 0.0 {
                return Err(Error::domain(format!(
                    "privacy threshold must be finite and > 0, got {t} (agents with a zero threshold must receive zero weight and should be dropped)"
                )));
            }
        }
        Ok(Self {
            cost_coeff,
            budget,
            threshold,
        })
    }

    pub fn cost_coeff(&self) -> Option<f64> {
        self.cost_coeff
    }

    pub fn budget(&self) -> Option<f64> {
        self.budget
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }
}

/// A nonincreasing benefit of the estimator variance, `f(v)` or `g(v)`.
#[derive(Debug, Clone, PartialEq)]
pub enum BenefitFunction {
    /// `a - b * v` with `b >= 0`.
    Linear { a: f64, b: f64 },
    /// Linear interpolation through `(x, value)` breakpoints, extended
    /// linearly beyond the first and last breakpoint.
    PiecewiseConcave { breakpoints: Vec<(f64, f64)> },
}

impl BenefitFunction {
    pub fn linear(a: f64, b: f64) -> Result<Self> {
        let f = BenefitFunction::Linear { a, b };
        f.validate()?;
        Ok(f)
    }

    pub fn piecewise(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        let f = BenefitFunction::PiecewiseConcave { breakpoints };
        f.validate()?;
        Ok(f)
    }

    /// Checks finiteness, monotonicity and concavity.
    pub fn validate(&self) -> Result<()> {
        match self {
            BenefitFunction::Linear { a, b } => {
                if !a.is_finite() || !b.is_finite() || *b < 0.0 {
                    return Err(Error::domain(format!(
                        "linear benefit needs finite a and b >= 0, got a={a}, b={b}"
                    )));
                }
            }
            BenefitFunction::PiecewiseConcave { breakpoints } => {
                if breakpoints.is_empty() {
                    return Err(Error::domain(
                        "piecewise benefit needs at least one breakpoint",
                    ));
                }
                if breakpoints
                    .iter()
                    .any(|(x, v)| !x.is_finite() || !v.is_finite())
                {
                    return Err(Error::domain(
                        "piecewise benefit breakpoints must be finite",
                    ));
                }
                for pair in breakpoints.windows(2) {
                    if pair[1].0 <= pair[0].0 {
                        return Err(Error::domain(
                            "piecewise breakpoints must have strictly increasing x",
                        ));
                    }
                    if pair[1].1 > pair[0].1 {
                        return Err(Error::domain("piecewise benefit must be nonincreasing"));
                    }
                }
                let slopes: Vec<f64> = breakpoints
                    .windows(2)
                    .map(|p| (p[1].1 - p[0].1) / (p[1].0 - p[0].0))
                    .collect();
                for s in slopes.windows(2) {
                    // second differences <= 0, up to rounding in the slopes
                    if s[1] > s[0] + 1e-12 * s[0].abs().max(1.0) {
                        return Err(Error::domain("piecewise benefit must be concave"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, v: f64) -> f64 {
        match self {
            BenefitFunction::Linear { a, b } => a - b * v,
            BenefitFunction::PiecewiseConcave { breakpoints } => {
                if breakpoints.len() == 1 {
                    return breakpoints[0].1;
                }
                let k = segment_index(breakpoints, v);
                let (x0, y0) = breakpoints[k];
                let (x1, y1) = breakpoints[k + 1];
                y0 + (y1 - y0) * (v - x0) / (x1 - x0)
            }
        }
    }

    /// Right-derivative at `v`.
    pub fn derivative(&self, v: f64) -> f64 {
        match self {
            BenefitFunction::Linear { b, .. } => -b,
            BenefitFunction::PiecewiseConcave { breakpoints } => {
                if breakpoints.len() == 1 {
                    return 0.0;
                }
                let k = segment_index(breakpoints, v);
                let (x0, y0) = breakpoints[k];
                let (x1, y1) = breakpoints[k + 1];
                (y1 - y0) / (x1 - x0)
            }
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, BenefitFunction::Linear { .. })
    }
}

// Index k of the segment [x_k, x_{k+1}) used at v, clamped to the end segments.
fn segment_index(bp: &[(f64, f64)], v: f64) -> usize {
    let last = bp.len() - 2;
    match bp.iter().rposition(|&(x, _)| x <= v) {
        None => 0,
        Some(k) => k.min(last),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    /// Agents join iff `f(Var) - c_i w_i eta >= outside_option`.
    QuasiLinear {
        f: BenefitFunction,
        outside_option: f64,
    },
    /// Agents join iff `w_i eta <= tau_i`, and then enjoy `g(Var)`.
    PrivacyConstrained { g: BenefitFunction },
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::QuasiLinear { .. } => "quasi_linear",
            Model::PrivacyConstrained { .. } => "privacy_constrained",
        }
    }

    pub fn benefit(&self) -> &BenefitFunction {
        match self {
            Model::QuasiLinear { f, .. } => f,
            Model::PrivacyConstrained { g } => g,
        }
    }
}

/// A full problem instance in canonical (sorted) agent order.
///
/// Quasi-linear populations are sorted by nondecreasing cost coefficient,
/// privacy-constrained ones by nonincreasing threshold. The sort is stable,
/// and `input_index[k]` is the input position of the agent stored at `k`.
#[derive(Debug, Clone)]
pub struct Instance {
    sigma2: f64,
    agents: Vec<AgentProfile>,
    ids: Vec<String>,
    input_index: Vec<usize>,
    model: Model,
}

impl Instance {
    /// Builds an instance with ids `a0, a1, ...` in input order.
    pub fn new(sigma2: f64, agents: Vec<AgentProfile>, model: Model) -> Result<Self> {
        let ids = (0..agents.len()).map(|i| format!("a{i}")).collect();
        Self::with_ids(sigma2, agents, ids, model)
    }

    pub fn with_ids(
        sigma2: f64,
        agents: Vec<AgentProfile>,
        ids: Vec<String>,
        model: Model,
    ) -> Result<Self> {
        if !sigma2.is_finite() || sigma2 <= 0.0 {
            return Err(Error::domain(format!(
                "sigma2 must be finite and > 0, got {sigma2}"
            )));
        }
        if agents.is_empty() {
            return Err(Error::domain("an instance needs at least one agent"));
        }
        if ids.len() != agents.len() {
            return Err(Error::domain("one id per agent is required"));
        }
        model.benefit().validate()?;
        let key: Vec<f64> = match &model {
            Model::QuasiLinear { outside_option, .. } => {
                if !outside_option.is_finite() {
                    return Err(Error::domain("outside option must be finite"));
                }
                agents
                    .iter()
                    .enumerate()
                    .map(|(i, a)| {
                        a.cost_coeff().ok_or_else(|| {
                            Error::domain(format!("agent {} has no cost coefficient", ids[i]))
                        })
                    })
                    .collect::<Result<_>>()?
            }
            Model::PrivacyConstrained { .. } => agents
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    a.threshold().map(|t| -t).ok_or_else(|| {
                        Error::domain(format!("agent {} has no privacy threshold", ids[i]))
                    })
                })
                .collect::<Result<_>>()?,
        };
        let mut order: Vec<usize> = (0..agents.len()).collect();
        order.sort_by(|&i, &j| key[i].total_cmp(&key[j]));
        let sorted_agents = order.iter().map(|&i| agents[i].clone()).collect();
        let sorted_ids = order.iter().map(|&i| ids[i].clone()).collect();
        Ok(Self {
            sigma2,
            agents: sorted_agents,
            ids: sorted_ids,
            input_index: order,
            model,
        })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn agents(&self) -> &[AgentProfile] {
        &self.agents
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn input_index(&self) -> &[usize] {
        &self.input_index
    }

    pub fn is_privacy_constrained(&self) -> bool {
        matches!(self.model, Model::PrivacyConstrained { .. })
    }

    /// Thresholds in sorted order (nonincreasing). Privacy-constrained only.
    pub fn thresholds(&self) -> Result<Vec<f64>> {
        self.agents
            .iter()
            .map(|a| {
                a.threshold()
                    .ok_or_else(|| Error::domain("agent has no privacy threshold"))
            })
            .collect()
    }

    /// Cost coefficients in sorted order (nondecreasing for quasi-linear).
    pub fn costs(&self) -> Result<Vec<f64>> {
        self.agents
            .iter()
            .map(|a| {
                a.cost_coeff()
                    .ok_or_else(|| Error::domain("agent has no cost coefficient"))
            })
            .collect()
    }

    /// Re-orders per-agent values from sorted order back to input order.
    pub fn to_input_order<T: Clone>(&self, sorted: &[T]) -> Vec<T> {
        let mut out: Vec<Option<T>> = vec![None; sorted.len()];
        for (k, &i) in self.input_index.iter().enumerate() {
            out[i] = Some(sorted[k].clone());
        }
        out.into_iter().map(|v| v.expect("permutation")).collect()
    }

    /// Sorted position of the agent that was at `input_pos` in the input.
    pub fn sorted_position(&self, input_pos: usize) -> Option<usize> {
        self.input_index.iter().position(|&i| i == input_pos)
    }

    /// Agents and ids in their original input order.
    pub fn input_agents(&self) -> (Vec<AgentProfile>, Vec<String>) {
        (
            self.to_input_order(&self.agents),
            self.to_input_order(&self.ids),
        )
    }
}

/// Optimum of a fixed-η program. Weights are in sorted-instance order.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedEtaSolution {
    pub eta: f64,
    pub weights: Vec<f64>,
    /// Number `t` of agents in the pooled prefix.
    pub pool_size: usize,
    /// Common weight `W` of the pooled prefix.
    pub pooled_weight: f64,
    /// Common tight-constraint level `K = c_i w_i` of the capped suffix
    /// (quasi-linear only).
    pub scale: Option<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EtaSearch {
    /// Exact outer loop over the pool size; `t` is the winning pool size.
    ClosedForm { t: usize },
    GridSearch {
        grid_points: usize,
        bracket: (f64, f64),
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub eta: f64,
    pub objective: f64,
    pub pool_size: usize,
}

/// The η-optimized mechanism.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismSolution {
    pub best: FixedEtaSolution,
    pub eta_search: EtaSearch,
    /// `eps_i = w_i * eta`, sorted order.
    pub per_agent_privacy: Vec<f64>,
    /// Every `(eta, OPT(eta))` evaluation made by a grid search, in
    /// evaluation order. Empty for the closed-form path.
    pub trace: Vec<TracePoint>,
}

impl MechanismSolution {
    pub fn new(best: FixedEtaSolution, eta_search: EtaSearch, trace: Vec<TracePoint>) -> Self {
        let per_agent_privacy = best.weights.iter().map(|w| w * best.eta).collect();
        Self {
            best,
            eta_search,
            per_agent_privacy,
            trace,
        }
    }
}

/// `sigma2 * sum(w_i^2) + 2 / eta^2`.
pub fn variance(weights: &[f64], sigma2: f64, eta: f64) -> Result<f64> {
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::domain("weights must be finite"));
    }
    if !sigma2.is_finite() || sigma2 <= 0.0 {
        return Err(Error::domain(format!(
            "sigma2 must be finite and > 0, got {sigma2}"
        )));
    }
    if !eta.is_finite() || eta <= 0.0 {
        return Err(Error::domain(format!(
            "eta must be finite and > 0, got {eta}"
        )));
    }
    Ok(variance_unchecked(weights, sigma2, eta))
}

#[inline]
pub(crate) fn variance_unchecked(weights: &[f64], sigma2: f64, eta: f64) -> f64 {
    sigma2 * weights.iter().map(|w| w * w).sum::<f64>() + 2.0 / (eta * eta)
}

/// Privacy level `eps_i = w_i * eta` granted by the Laplace mechanism to an
/// agent whose data enters the mean with weight `w_i` (its sensitivity).
pub fn privacy_level(weight: f64, eta: f64) -> Result<f64> {
    if !weight.is_finite() || weight < 0.0 {
        return Err(Error::domain(format!(
            "weight must be finite and >= 0, got {weight}"
        )));
    }
    if !eta.is_finite() || eta <= 0.0 {
        return Err(Error::domain(format!(
            "eta must be finite and > 0, got {eta}"
        )));
    }
    Ok(weight * eta)
}

/// `f(Var(w, eta)) - c_agent * w_agent * eta`. The outside option is not
/// subtracted.
pub fn utility_quasilinear(
    instance: &Instance,
    weights: &[f64],
    eta: f64,
    agent: usize,
) -> Result<f64> {
    let Model::QuasiLinear { f, .. } = instance.model() else {
        return Err(Error::domain(
            "utility_quasilinear needs a quasi-linear instance",
        ));
    };
    check_agent(instance, weights, agent)?;
    let v = variance(weights, instance.sigma2(), eta)?;
    let c = instance.agents()[agent].cost_coeff().unwrap_or(0.0);
    Ok(f.eval(v) - c * weights[agent] * eta)
}

/// `g(Var(w, eta))` if the agent's true threshold is respected, otherwise
/// `f64::NEG_INFINITY`.
pub fn utility_privacyconstrained(
    instance: &Instance,
    weights: &[f64],
    eta: f64,
    agent: usize,
    true_threshold: f64,
) -> Result<f64> {
    let Model::PrivacyConstrained { g } = instance.model() else {
        return Err(Error::domain(
            "utility_privacyconstrained needs a privacy-constrained instance",
        ));
    };
    check_agent(instance, weights, agent)?;
    let v = variance(weights, instance.sigma2(), eta)?;
    Ok(pc_utility(g, v, weights[agent] * eta, true_threshold))
}

pub(crate) fn pc_utility(g: &BenefitFunction, variance: f64, eps: f64, threshold: f64) -> f64 {
    if eps <= threshold * (1.0 + BOUNDARY_RTOL) {
        g.eval(variance)
    } else {
        f64::NEG_INFINITY
    }
}

fn check_agent(instance: &Instance, weights: &[f64], agent: usize) -> Result<()> {
    if weights.len() != instance.n() {
        return Err(Error::domain(format!(
            "expected {} weights, got {}",
            instance.n(),
            weights.len()
        )));
    }
    if agent >= instance.n() {
        return Err(Error::domain(format!(
            "agent index {agent} out of range for {} agents",
            instance.n()
        )));
    }
    Ok(())
}

/// Zero-mean Laplace noise with density `(eta / 2) exp(-eta |z|)`, i.e.
/// scale `1 / eta` and variance `2 / eta^2`.
#[derive(Debug, Clone, Copy)]
pub struct LaplaceNoise {
    eta: f64,
}

impl LaplaceNoise {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta > 0.0) || eta.is_nan() {
            return Err(Error::domain(format!("eta must be > 0, got {eta}")));
        }
        Ok(Self { eta })
    }

    /// Inverse-CDF draw: `u ~ U(-1/2, 1/2)`,
    /// `z = -sign(u) * ln(1 - 2|u|) / eta`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = loop {
            // [0, 1) shifted to [-1/2, 1/2); the open endpoint is rejected
            let u = rng.random::<f64>() - 0.5;
            if u != -0.5 {
                break u;
            }
        };
        -u.signum() * (1.0 - 2.0 * u.abs()).ln() / self.eta
    }
}

/// The PRNG behind every seeded draw in this crate: ChaCha20 seeded with
/// `seed_from_u64(seed)` on stream 0.
pub fn seeded_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// One draw of the estimator `sum(w_i d_i) + Z(eta)`.
pub fn sample_estimate(data: &[f64], weights: &[f64], eta: f64, rng_seed: u64) -> Result<f64> {
    if data.len() != weights.len() {
        return Err(Error::domain(format!(
            "data has {} entries but weights has {}",
            data.len(),
            weights.len()
        )));
    }
    let noise = LaplaceNoise::new(eta)?;
    let mut rng = seeded_rng(rng_seed);
    Ok(weighted_sum(data, weights) + noise.sample(&mut rng))
}

pub(crate) fn weighted_sum(data: &[f64], weights: &[f64]) -> f64 {
    data.iter().zip(weights).map(|(d, w)| d * w).sum()
}
