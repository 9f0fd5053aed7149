//! Structured solver for the quasi-linear model.
//!
//! At a fixed `eta` an optimal weight vector has a pooled prefix sharing a
//! common weight `W` and a suffix on which every participation constraint is
//! tight, `c_i w_i = K`. For each pool size `t` the sum constraint gives
//! `W(K) = (1 - K A_t) / t` with `A_t = sum_{i>t} 1/c_i`, and `K` solves the
//! scalar tight equation
//!
//! ```text
//! K eta = f(sigma2 (t W(K)^2 + K^2 B_t) + 2 / eta^2) - o,   B_t = sum_{i>t} 1/c_i^2.
//! ```
//!
//! Linear `f` turns this into a quadratic; otherwise the roots are bracketed
//! by a sign scan and refined by bisection.

use crate::error::{Error, Result};
use crate::model::{
    variance_unchecked, BenefitFunction, EtaSearch, FixedEtaSolution, Instance, MechanismSolution,
    Model, TracePoint,
};
use crate::oracle::{oracle_fixed_eta_ql, QlOracleConfig, QlOracleOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleCheck {
    /// Always for `n <= 32`, for a deterministic 1-in-16 sample of `eta`
    /// values above.
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone)]
pub struct QlConfig {
    pub root_scan_points: usize,
    pub feasibility_tol: f64,
    pub oracle_check: OracleCheck,
    /// Largest tolerated objective gap between the structured solver and the
    /// oracle.
    pub oracle_gap_tol: f64,
    pub oracle: QlOracleConfig,
}

impl Default for QlConfig {
    fn default() -> Self {
        Self {
            root_scan_points: 512,
            feasibility_tol: 1e-10,
            oracle_check: OracleCheck::Auto,
            oracle_gap_tol: 1e-5,
            oracle: QlOracleConfig::default(),
        }
    }
}

const AUTO_ORACLE_MAX_N: usize = 32;

fn oracle_due(check: OracleCheck, n: usize, eta: f64) -> bool {
    match check {
        OracleCheck::Always => true,
        OracleCheck::Never => false,
        OracleCheck::Auto => {
            if n <= AUTO_ORACLE_MAX_N {
                return true;
            }
            let h = eta.to_bits().wrapping_mul(0x9E37_79B9_7F4A_7C15);
            h >> 60 == 0
        }
    }
}

/// One structured candidate: pool size `t`, tight level `k` and pooled
/// weight `w`. Weights are in sorted-instance order.
#[derive(Debug, Clone, PartialEq)]
pub struct QlCandidate {
    pub t: usize,
    /// `None` for `t = n`.
    pub k: Option<f64>,
    /// Zero for `t = 0`.
    pub w: f64,
    pub weights: Vec<f64>,
    pub feasible: bool,
    pub objective: f64,
}

/// Everything the fixed-η search saw.
#[derive(Debug, Clone, PartialEq)]
pub struct QlFixedEtaReport {
    pub solution: FixedEtaSolution,
    pub candidates: Vec<QlCandidate>,
    /// Pool sizes whose tight equation had more than one admissible root,
    /// with the root count.
    pub root_multiplicity: Vec<(usize, usize)>,
    /// `|structured - oracle|` when the oracle ran.
    pub oracle_gap: Option<f64>,
}

struct Sums {
    /// `inv[t] = sum_{i>=t} 1/c_i` over 0-based indices.
    inv: Vec<f64>,
    inv_sq: Vec<f64>,
    /// Number of zero-cost agents; they sort first.
    zeros: usize,
}

impl Sums {
    fn new(costs: &[f64]) -> Self {
        let n = costs.len();
        let mut inv = vec![0.0; n + 1];
        let mut inv_sq = vec![0.0; n + 1];
        for i in (0..n).rev() {
            let (a, b) = if costs[i] > 0.0 {
                (1.0 / costs[i], 1.0 / (costs[i] * costs[i]))
            } else {
                (f64::INFINITY, f64::INFINITY)
            };
            inv[i] = inv[i + 1] + a;
            inv_sq[i] = inv_sq[i + 1] + b;
        }
        let zeros = costs.iter().take_while(|&&c| c == 0.0).count();
        Self { inv, inv_sq, zeros }
    }
}

fn ql_parts(instance: &Instance) -> Result<(&BenefitFunction, f64, Vec<f64>)> {
    match instance.model() {
        Model::QuasiLinear { f, outside_option } => Ok((f, *outside_option, instance.costs()?)),
        Model::PrivacyConstrained { .. } => Err(Error::domain("needs a quasi-linear instance")),
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta.is_finite() && eta > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "eta must be finite and > 0, got {eta}"
        )))
    }
}

/// Nonnegative roots of `alpha x^2 + beta x + gamma = 0`, ascending.
fn nonneg_quadratic_roots(alpha: f64, beta: f64, gamma: f64) -> Vec<f64> {
    let mut roots = Vec::with_capacity(2);
    if alpha == 0.0 {
        if beta != 0.0 {
            roots.push(-gamma / beta);
        } else if gamma == 0.0 {
            roots.push(0.0);
        }
    } else {
        let mut disc = beta * beta - 4.0 * alpha * gamma;
        if disc < 0.0 && disc > -1e-14 * beta * beta {
            disc = 0.0;
        }
        if disc >= 0.0 {
            let q = -0.5 * (beta + beta.signum() * disc.sqrt());
            if q == 0.0 {
                roots.push(0.0);
            } else {
                roots.push(q / alpha);
                roots.push(gamma / q);
            }
        }
    }
    roots.retain(|r| r.is_finite() && *r >= 0.0);
    roots.sort_by(f64::total_cmp);
    roots.dedup();
    roots
}

/// Real nonnegative roots of the tight equation for linear `f(v) = a - b v`.
///
/// Substituting `W(K)` gives `alpha K^2 + beta K + gamma = 0` with
/// `alpha = b sigma2 (A^2 / t + B)`, `beta = eta - 2 b sigma2 A / t`,
/// `gamma = b sigma2 / t + 2 b / eta^2 - a + o`; for `t = 0` the pooled terms
/// vanish.
pub fn solve_k_linear_f(instance: &Instance, eta: f64, t: usize) -> Result<Vec<f64>> {
    check_eta(eta)?;
    let (f, o, costs) = ql_parts(instance)?;
    let BenefitFunction::Linear { a, b } = *f else {
        return Err(Error::domain(
            "solve_k_linear_f needs a linear benefit function",
        ));
    };
    let n = costs.len();
    if t > n {
        return Err(Error::domain(format!("pool size {t} exceeds n = {n}")));
    }
    if t == n {
        return Ok(Vec::new());
    }
    let sums = Sums::new(&costs);
    if t < sums.zeros {
        return Ok(Vec::new());
    }
    Ok(linear_roots(
        a,
        b,
        o,
        instance.sigma2(),
        eta,
        t,
        sums.inv[t],
        sums.inv_sq[t],
    ))
}

#[allow(clippy::too_many_arguments)]
fn linear_roots(
    a: f64,
    b: f64,
    o: f64,
    sigma2: f64,
    eta: f64,
    t: usize,
    big_a: f64,
    big_b: f64,
) -> Vec<f64> {
    let noise = 2.0 * b / (eta * eta) - a + o;
    if t == 0 {
        nonneg_quadratic_roots(b * sigma2 * big_b, eta, noise)
    } else {
        let tf = t as f64;
        let alpha = b * sigma2 * (big_a * big_a / tf + big_b);
        let beta = eta - 2.0 * b * sigma2 * big_a / tf;
        let gamma = b * sigma2 / tf + noise;
        nonneg_quadratic_roots(alpha, beta, gamma)
    }
}

/// Roots of the tight equation on `[0, k_max]` by a sign scan over
/// `points` cells followed by bisection. Works for any benefit function.
pub fn solve_k_bisection(
    instance: &Instance,
    eta: f64,
    t: usize,
    points: usize,
) -> Result<Vec<f64>> {
    check_eta(eta)?;
    let (f, o, costs) = ql_parts(instance)?;
    let n = costs.len();
    if t > n {
        return Err(Error::domain(format!("pool size {t} exceeds n = {n}")));
    }
    let sums = Sums::new(&costs);
    if t == n || t < sums.zeros {
        return Ok(Vec::new());
    }
    Ok(bisection_roots(
        f,
        o,
        instance.sigma2(),
        eta,
        t,
        sums.inv[t],
        sums.inv_sq[t],
        points.max(2),
    ))
}

#[allow(clippy::too_many_arguments)]
fn bisection_roots(
    f: &BenefitFunction,
    o: f64,
    sigma2: f64,
    eta: f64,
    t: usize,
    big_a: f64,
    big_b: f64,
    points: usize,
) -> Vec<f64> {
    let k_max = 1.0 / big_a;
    let residual = |k: f64| -> f64 {
        let pooled = if t == 0 {
            0.0
        } else {
            let w = (1.0 - k * big_a) / t as f64;
            t as f64 * w * w
        };
        k * eta - f.eval(sigma2 * (pooled + k * k * big_b) + 2.0 / (eta * eta)) + o
    };
    let mut roots = Vec::new();
    let grid: Vec<f64> = (0..=points)
        .map(|j| {
            if j == points {
                k_max
            } else {
                k_max * j as f64 / points as f64
            }
        })
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&k| residual(k)).collect();
    for j in 0..points {
        let (mut lo, mut hi) = (grid[j], grid[j + 1]);
        let (mut rlo, rhi) = (vals[j], vals[j + 1]);
        if rlo == 0.0 {
            roots.push(lo);
            continue;
        }
        if j + 1 == points && rhi == 0.0 {
            roots.push(hi);
            continue;
        }
        if rlo.signum() == rhi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let rm = residual(mid);
            if rm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if rm.signum() == rlo.signum() {
                lo = mid;
                rlo = rm;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    roots
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    f: &BenefitFunction,
    o: f64,
    costs: &[f64],
    sigma2: f64,
    eta: f64,
    t: usize,
    k: Option<f64>,
    w: f64,
    tol: f64,
) -> QlCandidate {
    let n = costs.len();
    let weights: Vec<f64> = (0..n)
        .map(|i| {
            if i < t {
                w
            } else {
                k.unwrap_or(0.0) / costs[i]
            }
        })
        .collect();
    let objective = variance_unchecked(&weights, sigma2, eta);
    let surplus = f.eval(objective) - o;
    let slack_tol = tol * surplus.abs().max(1.0);
    let participation = weights
        .iter()
        .zip(costs)
        .all(|(wi, c)| c * wi * eta - surplus <= slack_tol);
    let nonneg = weights.iter().all(|&x| x >= 0.0) && w >= 0.0;
    let sums_to_one = (weights.iter().sum::<f64>() - 1.0).abs() <= 1e-10;
    // pooled agents carry at least the capped weight of the next agent
    let monotone = match k {
        Some(k) if t >= 1 && t < n => w >= k / costs[t] - 1e-12,
        _ => true,
    };
    QlCandidate {
        t,
        k,
        w,
        weights,
        feasible: participation && nonneg && sums_to_one && monotone && objective.is_finite(),
        objective,
    }
}

/// Optimal weights of the fixed-η quasi-linear program with the default
/// configuration.
pub fn solve_fixed_eta_ql(instance: &Instance, eta: f64) -> Result<FixedEtaSolution> {
    solve_fixed_eta_ql_with(instance, eta, &QlConfig::default()).map(|r| r.solution)
}

pub fn solve_fixed_eta_ql_with(
    instance: &Instance,
    eta: f64,
    cfg: &QlConfig,
) -> Result<QlFixedEtaReport> {
    check_eta(eta)?;
    let (f, o, costs) = ql_parts(instance)?;
    let sigma2 = instance.sigma2();
    let n = costs.len();
    let sums = Sums::new(&costs);
    let tol = cfg.feasibility_tol;

    let mut candidates = Vec::new();
    let mut root_multiplicity = Vec::new();
    candidates.push(evaluate(
        f,
        o,
        &costs,
        sigma2,
        eta,
        n,
        None,
        1.0 / n as f64,
        tol,
    ));
    for t in sums.zeros..n {
        let (big_a, big_b) = (sums.inv[t], sums.inv_sq[t]);
        if t == 0 {
            let k = 1.0 / big_a;
            let mut c = evaluate(f, o, &costs, sigma2, eta, 0, Some(k), 0.0, tol);
            let surplus = f.eval(c.objective) - o;
            c.feasible &= (k * eta - surplus).abs() <= tol * surplus.abs().max(1.0);
            candidates.push(c);
            continue;
        }
        let k_max = 1.0 / big_a;
        let roots = match *f {
            BenefitFunction::Linear { a, b } => linear_roots(a, b, o, sigma2, eta, t, big_a, big_b),
            BenefitFunction::PiecewiseConcave { .. } => {
                bisection_roots(f, o, sigma2, eta, t, big_a, big_b, cfg.root_scan_points)
            }
        };
        let admissible: Vec<f64> = roots
            .into_iter()
            .filter(|&k| k <= k_max * (1.0 + 1e-12))
            .map(|k| k.min(k_max))
            .collect();
        if admissible.len() > 1 {
            root_multiplicity.push((t, admissible.len()));
        }
        for k in admissible {
            let w = ((1.0 - k * big_a) / t as f64).max(0.0);
            candidates.push(evaluate(f, o, &costs, sigma2, eta, t, Some(k), w, tol));
        }
    }

    // best objective; ties go to the larger pool
    let best = candidates
        .iter()
        .filter(|c| c.feasible)
        .min_by(|x, y| x.objective.total_cmp(&y.objective).then(y.t.cmp(&x.t)));
    let solution = best.map(|c| FixedEtaSolution {
        eta,
        weights: c.weights.clone(),
        pool_size: c.t,
        pooled_weight: c.w,
        scale: c.k,
        objective: c.objective,
    });

    let mut oracle_gap = None;
    if oracle_due(cfg.oracle_check, n, eta) {
        let outcome = oracle_fixed_eta_ql(instance, eta, &cfg.oracle)?;
        match (&solution, &outcome) {
            (Some(s), QlOracleOutcome::Feasible { objective, .. }) => {
                let gap = (s.objective - objective).abs();
                oracle_gap = Some(gap);
                if gap > cfg.oracle_gap_tol {
                    return Err(Error::Inconsistent(format!(
                        "structured optimum {} differs from oracle optimum {} at eta = {eta}",
                        s.objective, objective
                    )));
                }
            }
            (None, QlOracleOutcome::Feasible { objective, .. }) => {
                return Err(Error::Inconsistent(format!(
                    "no structured candidate is feasible but the oracle found objective {objective} at eta = {eta}"
                )));
            }
            (Some(s), QlOracleOutcome::Infeasible { min_violation }) => {
                return Err(Error::Inconsistent(format!(
                    "oracle reports infeasible (violation {min_violation}) but the structured solver found objective {} at eta = {eta}",
                    s.objective
                )));
            }
            (None, QlOracleOutcome::Infeasible { .. }) => {}
        }
    }
    let solution = solution.ok_or_else(|| {
        Error::Infeasible(format!(
            "no weights satisfy every participation constraint at eta = {eta}"
        ))
    })?;
    Ok(QlFixedEtaReport {
        solution,
        candidates,
        root_multiplicity,
        oracle_gap,
    })
}

/// Uniform η grid with golden-section refinement around the best cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub refine_rounds: usize,
}

impl SweepGrid {
    /// `lo = 1e-3`, 64 points, 3 refinement rounds; `hi = 100 / min c_i`
    /// over positive costs (quasi-linear) or `sum tau_i` (privacy-constrained).
    pub fn default_for(instance: &Instance) -> Self {
        let hi = match instance.model() {
            Model::QuasiLinear { .. } => {
                let c_min = instance
                    .costs()
                    .unwrap_or_default()
                    .into_iter()
                    .filter(|&c| c > 0.0)
                    .fold(f64::INFINITY, f64::min);
                if c_min.is_finite() {
                    100.0 / c_min
                } else {
                    100.0
                }
            }
            Model::PrivacyConstrained { .. } => {
                instance.thresholds().map(|t| t.iter().sum()).unwrap_or(1.0)
            }
        };
        Self {
            lo: 1e-3,
            hi,
            points: 64,
            refine_rounds: 3,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo > 0.0 && self.lo < self.hi && self.hi.is_finite()) || self.points < 2 {
            return Err(Error::domain(format!(
                "sweep grid needs 0 < lo < hi < inf and points >= 2, got lo = {}, hi = {}, points = {}",
                self.lo, self.hi, self.points
            )));
        }
        Ok(())
    }
}

const GOLDEN_STEP: f64 = 0.381_966_011_250_105_1;

/// Grid scan plus golden-section refinement of a fixed-η solver. Infeasible
/// η values are skipped; any other error aborts the sweep.
pub(crate) fn grid_sweep<F>(grid: &SweepGrid, mut eval: F) -> Result<MechanismSolution>
where
    F: FnMut(f64) -> Result<FixedEtaSolution>,
{
    grid.validate()?;
    let mut trace = Vec::new();
    let mut best: Option<FixedEtaSolution> = None;
    let mut probe = |eta: f64,
                     trace: &mut Vec<TracePoint>,
                     best: &mut Option<FixedEtaSolution>|
     -> Result<f64> {
        match eval(eta) {
            Ok(s) => {
                trace.push(TracePoint {
                    eta,
                    objective: s.objective,
                    pool_size: s.pool_size,
                });
                let obj = s.objective;
                if best.as_ref().is_none_or(|b| obj < b.objective) {
                    *best = Some(s);
                }
                Ok(obj)
            }
            Err(e) if e.is_infeasible() => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    };

    let step = (grid.hi - grid.lo) / (grid.points - 1) as f64;
    let etas: Vec<f64> = (0..grid.points)
        .map(|k| {
            if k + 1 == grid.points {
                grid.hi
            } else {
                grid.lo + step * k as f64
            }
        })
        .collect();
    let mut values = Vec::with_capacity(etas.len());
    for &eta in &etas {
        values.push(probe(eta, &mut trace, &mut best)?);
    }
    let Some(kb) = (0..values.len())
        .filter(|&k| values[k].is_finite())
        .min_by(|&x, &y| values[x].total_cmp(&values[y]))
    else {
        return Err(Error::Infeasible(format!(
            "no feasible eta in [{}, {}] over {} grid points",
            grid.lo, grid.hi, grid.points
        )));
    };

    let mut a = etas[kb.saturating_sub(1)];
    let mut b = etas[(kb + 1).min(etas.len() - 1)];
    let (mut x, mut fx) = (etas[kb], values[kb]);
    for _ in 0..grid.refine_rounds {
        let (left, right) = (x - a, b - x);
        if left <= 0.0 && right <= 0.0 {
            break;
        }
        let p = if right >= left {
            x + GOLDEN_STEP * right
        } else {
            x - GOLDEN_STEP * left
        };
        let fp = probe(p, &mut trace, &mut best)?;
        if fp < fx {
            if p > x {
                a = x;
            } else {
                b = x;
            }
            x = p;
            fx = fp;
        } else if p > x {
            b = p;
        } else {
            a = p;
        }
    }

    let best = best.expect("at least one feasible evaluation");
    Ok(MechanismSolution::new(
        best,
        EtaSearch::GridSearch {
            grid_points: grid.points,
            bracket: (grid.lo, grid.hi),
        },
        trace,
    ))
}

/// η sweep for a quasi-linear instance.
pub fn sweep_eta_ql(instance: &Instance, grid: &SweepGrid) -> Result<MechanismSolution> {
    sweep_eta_ql_with(instance, grid, &QlConfig::default())
}

pub fn sweep_eta_ql_with(
    instance: &Instance,
    grid: &SweepGrid,
    cfg: &QlConfig,
) -> Result<MechanismSolution> {
    ql_parts(instance)?;
    grid_sweep(grid, |eta| {
        solve_fixed_eta_ql_with(instance, eta, cfg).map(|r| r.solution)
    })
}

/// True when the trace, ordered by η, decreases and then increases
/// (plateaus allowed, relative slack `rtol`).
pub fn trace_is_unimodal(trace: &[TracePoint], rtol: f64) -> bool {
    let mut pts: Vec<&TracePoint> = trace.iter().collect();
    pts.sort_by(|x, y| x.eta.total_cmp(&y.eta));
    let mut rising = false;
    for pair in pts.windows(2) {
        let (p, q) = (pair[0].objective, pair[1].objective);
        let slack = rtol * p.abs().max(q.abs()).max(1.0);
        if q > p + slack {
            rising = true;
        } else if q < p - slack && rising {
            return false;
        }
    }
    true
}
