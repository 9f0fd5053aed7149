//! Agent behaviour: participation decisions, misreporting audits and Monte
//! Carlo checks of the estimator.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{
    pc_utility, seeded_rng, weighted_sum, AgentProfile, Instance, LaplaceNoise, Model,
    BOUNDARY_RTOL,
};
use crate::pc::{solve_fixed_eta_pc, solve_pc};

/// Agents (sorted-instance indices, ascending) who participate given the
/// announced `weights` and `eta`.
///
/// Privacy-constrained agents join iff `w_i eta <= tau_i`. Quasi-linear
/// agents start from full participation; while someone's utility
/// `f(Var_S) - c_i w_i eta` is below the outside option, the agent with the
/// lowest utility leaves. Announced weights are never renormalized, so
/// `Var_S = sigma2 sum_{i in S} w_i^2 + 2 / eta^2`. Ties with the outside
/// option count as participating.
pub fn participation_fixed_point(
    instance: &Instance,
    weights: &[f64],
    eta: f64,
) -> Result<Vec<usize>> {
    if weights.len() != instance.n() {
        return Err(Error::domain(format!(
            "expected {} weights, got {}",
            instance.n(),
            weights.len()
        )));
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::domain(format!(
            "eta must be finite and > 0, got {eta}"
        )));
    }
    match instance.model() {
        Model::PrivacyConstrained { .. } => {
            let taus = instance.thresholds()?;
            Ok((0..weights.len())
                .filter(|&i| weights[i] * eta <= taus[i] * (1.0 + BOUNDARY_RTOL))
                .collect())
        }
        Model::QuasiLinear { f, outside_option } => {
            let costs = instance.costs()?;
            let mut inside = vec![true; weights.len()];
            loop {
                let v = instance.sigma2()
                    * (0..weights.len())
                        .filter(|&i| inside[i])
                        .map(|i| weights[i] * weights[i])
                        .sum::<f64>()
                    + 2.0 / (eta * eta);
                let fv = f.eval(v);
                let worst = (0..weights.len())
                    .filter(|&i| inside[i])
                    .map(|i| (i, fv - costs[i] * weights[i] * eta))
                    .filter(|&(_, u)| u < outside_option - 1e-10)
                    .min_by(|x, y| x.1.total_cmp(&y.1));
                match worst {
                    Some((i, _)) => inside[i] = false,
                    None => break,
                }
            }
            Ok((0..weights.len()).filter(|&i| inside[i]).collect())
        }
    }
}

/// How the platform reacts to a misreport.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditMode {
    /// Re-solve the weights at the noise level chosen for truthful reports.
    FixedEta,
    /// Re-run the full noise-level optimization.
    Optimized,
}

/// Multiplicative grid of reported thresholds, `[lo_frac tau, hi_frac tau]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportGrid {
    pub lo_frac: f64,
    pub hi_frac: f64,
    pub points: usize,
}

impl Default for ReportGrid {
    fn default() -> Self {
        Self {
            lo_frac: 0.2,
            hi_frac: 5.0,
            points: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditResult {
    /// Input-order index of the audited agent.
    pub agent: usize,
    pub mode: AuditMode,
    pub true_threshold: f64,
    /// Ascending; always contains the truthful report.
    pub reports_tested: Vec<f64>,
    /// The agent's true utility per report; `-inf` when the realized
    /// privacy level exceeds the true threshold or the platform has no
    /// feasible program.
    pub utilities: Vec<f64>,
    /// Platform objective per report; `+inf` when infeasible.
    pub platform_objectives: Vec<f64>,
    pub truthful_utility: f64,
    /// Largest `utility - truthful_utility` over reports with finite
    /// utility.
    pub max_gain: f64,
}

/// Lets agent `agent` (input order) report every threshold on `grid` while
/// everyone else stays truthful, and records the agent's true utility.
pub fn misreport_audit_pc(
    instance: &Instance,
    agent: usize,
    grid: &ReportGrid,
    mode: AuditMode,
) -> Result<AuditResult> {
    let Model::PrivacyConstrained { g } = instance.model() else {
        return Err(Error::domain(
            "misreport audits need a privacy-constrained instance",
        ));
    };
    if agent >= instance.n() {
        return Err(Error::domain(format!(
            "agent index {agent} out of range for {} agents",
            instance.n()
        )));
    }
    if grid.points < 3
        || !(grid.lo_frac > 0.0)
        || !(grid.hi_frac > grid.lo_frac)
        || !grid.hi_frac.is_finite()
    {
        return Err(Error::domain(
            "report grid needs 0 < lo_frac < hi_frac < inf and points >= 3",
        ));
    }
    let (agents, ids) = instance.input_agents();
    let tau = agents[agent]
        .threshold()
        .expect("validated privacy-constrained instance");
    let truthful_eta = solve_pc(instance)?.best.eta;

    let ratio = grid.hi_frac / grid.lo_frac;
    let mut reports: Vec<f64> = (0..grid.points)
        .map(|k| tau * grid.lo_frac * ratio.powf(k as f64 / (grid.points - 1) as f64))
        .collect();
    if !reports.contains(&tau) {
        reports.push(tau);
    }
    reports.sort_by(f64::total_cmp);

    let mut utilities = Vec::with_capacity(reports.len());
    let mut platform_objectives = Vec::with_capacity(reports.len());
    let mut truthful_utility = f64::NEG_INFINITY;
    for &report in &reports {
        let mut reported = agents.clone();
        reported[agent] = AgentProfile::with_threshold(report)?;
        let inst = Instance::with_ids(
            instance.sigma2(),
            reported,
            ids.clone(),
            instance.model().clone(),
        )?;
        let pos = inst.sorted_position(agent).expect("agent index in range");
        let solved = match mode {
            AuditMode::FixedEta => {
                solve_fixed_eta_pc(&inst.thresholds()?, inst.sigma2(), truthful_eta)
            }
            AuditMode::Optimized => solve_pc(&inst).map(|s| s.best),
        };
        let (u, obj) = match solved {
            Ok(s) => (
                pc_utility(g, s.objective, s.weights[pos] * s.eta, tau),
                s.objective,
            ),
            Err(e) if e.is_infeasible() => (f64::NEG_INFINITY, f64::INFINITY),
            Err(e) => return Err(e),
        };
        if report == tau {
            truthful_utility = u;
        }
        utilities.push(u);
        platform_objectives.push(obj);
    }
    let max_gain = utilities
        .iter()
        .filter(|u| u.is_finite())
        .map(|u| u - truthful_utility)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(AuditResult {
        agent,
        mode,
        true_threshold: tau,
        reports_tested: reports,
        utilities,
        platform_objectives,
        truthful_utility,
        max_gain,
    })
}

/// Two-moment-matched data distributions for the Monte Carlo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DataDistribution {
    #[default]
    Gaussian,
    /// Uniform on `mean +- sqrt(3 sigma2)`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceEstimate {
    pub mean: f64,
    pub variance: f64,
    /// Jackknife standard error of `variance`.
    pub stderr_variance: f64,
}

pub const MIN_TRIALS: usize = 1000;

/// Monte Carlo mean and variance of the estimator.
///
/// Trial `k` draws from its own ChaCha20 stream (`seed_from_u64(seed)`,
/// stream `k`), so results do not depend on how trials are scheduled.
pub fn empirical_variance(
    instance: &Instance,
    weights: &[f64],
    eta: f64,
    trials: usize,
    rng_seed: u64,
    data_mean: f64,
    distribution: DataDistribution,
) -> Result<VarianceEstimate> {
    if trials < MIN_TRIALS {
        return Err(Error::domain(format!(
            "need at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    if weights.len() != instance.n() {
        return Err(Error::domain(format!(
            "expected {} weights, got {}",
            instance.n(),
            weights.len()
        )));
    }
    if !data_mean.is_finite() {
        return Err(Error::domain("data mean must be finite"));
    }
    let noise = LaplaceNoise::new(eta)?;
    let sd = instance.sigma2().sqrt();
    let draw = |rng: &mut ChaCha20Rng| -> f64 {
        match distribution {
            DataDistribution::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                data_mean + sd * z
            }
            DataDistribution::Uniform => {
                let u: f64 = rng.random();
                data_mean + 3f64.sqrt() * sd * (2.0 * u - 1.0)
            }
        }
    };
    let mut data = vec![0.0; weights.len()];
    let xs: Vec<f64> = (0..trials)
        .map(|k| {
            let mut rng = seeded_rng(rng_seed);
            rng.set_stream(k as u64);
            for d in data.iter_mut() {
                *d = draw(&mut rng);
            }
            weighted_sum(&data, weights) + noise.sample(&mut rng)
        })
        .collect();
    Ok(summarize(&xs))
}

fn summarize(xs: &[f64]) -> VarianceEstimate {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    let variance = m2 / (n - 1.0);
    // leave-one-out sample variances
    let loo: Vec<f64> = xs
        .iter()
        .map(|x| (m2 - (x - mean) * (x - mean) * n / (n - 1.0)) / (n - 2.0))
        .collect();
    let loo_mean = loo.iter().sum::<f64>() / n;
    let spread: f64 = loo.iter().map(|s| (s - loo_mean) * (s - loo_mean)).sum();
    VarianceEstimate {
        mean,
        variance,
        stderr_variance: ((n - 1.0) / n * spread).sqrt(),
    }
}
