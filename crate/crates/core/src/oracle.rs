//! Independent reference solvers and KKT certificates.
//!
//! Nothing here shares code with the structured solvers in [`crate::pc`] and
//! [`crate::ql`]: the capped-simplex projection below finds its shift by
//! bisection rather than by the sorted level scan, and the quasi-linear
//! oracle searches over the largest privacy cost instead of enumerating pool
//! sizes.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{FixedEtaSolution, Instance, Model};

/// Cooperative cancellation flag, polled every 1024 iterations by the
/// iterative oracles.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, Ordering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(Ordering::Relaxed)
    }
}

fn poll(cancel: &Option<CancelToken>, iter: usize) -> Result<()> {
    if iter.is_multiple_of(1024) {
        if let Some(c) = cancel {
            if c.is_cancelled() {
                return Err(Error::Cancelled);
            }
        }
    }
    Ok(())
}

/// Euclidean projection of `y` onto `{w : sum w = 1, 0 <= w_i <= caps_i}`.
///
/// `w_i = clamp(y_i - theta, 0, caps_i)` with `theta` found by bisection.
/// Caps may be `+inf`.
pub fn project_capped_simplex(y: &[f64], caps: &[f64]) -> Result<Vec<f64>> {
    if y.is_empty() || y.len() != caps.len() {
        return Err(Error::domain(
            "projection needs matching, nonempty y and caps",
        ));
    }
    if caps.iter().any(|c| c.is_nan() || *c < 0.0) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(
            "projection needs finite y and nonnegative caps",
        ));
    }
    let cap_total: f64 = caps.iter().sum();
    if cap_total < 1.0 - 1e-12 {
        return Err(Error::Infeasible(format!(
            "caps sum to {cap_total} < 1, the capped simplex is empty"
        )));
    }
    let fill = |theta: f64| -> f64 {
        y.iter()
            .zip(caps)
            .map(|(&v, &c)| (v - theta).max(0.0).min(c))
            .sum()
    };
    let ymax = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ymin = y.iter().cloned().fold(f64::INFINITY, f64::min);
    // fill(hi) = 0 and fill(lo) >= min(1, cap_total)
    let mut lo = ymin - 1.0;
    let mut hi = ymax;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if fill(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w: Vec<f64> = y
        .iter()
        .zip(caps)
        .map(|(&v, &c)| (v - lo).max(0.0).min(c))
        .collect();
    Ok(w)
}

#[derive(Debug, Clone)]
pub struct PgdConfig {
    /// Step size as a multiple of `1 / L`, `L = 2 sigma2`.
    pub step_scale: f64,
    /// Stop once the gradient mapping `|w - P(w - s grad)| / s` is at most
    /// `tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub cancel: Option<CancelToken>,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            step_scale: 0.5,
            tol: 1e-10,
            max_iter: 1_000_000,
            cancel: None,
        }
    }
}

/// Projected gradient descent on `sigma2 sum w_i^2` over
/// `{w >= 0, sum w = 1, w_i <= tau_i / eta}`.
pub fn oracle_fixed_eta_pc(
    thresholds: &[f64],
    sigma2: f64,
    eta: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    let cfg = PgdConfig {
        tol,
        ..PgdConfig::default()
    };
    oracle_fixed_eta_pc_with(thresholds, sigma2, eta, &cfg)
}

pub fn oracle_fixed_eta_pc_with(
    thresholds: &[f64],
    sigma2: f64,
    eta: f64,
    cfg: &PgdConfig,
) -> Result<Vec<f64>> {
    if !(sigma2 > 0.0) || !(eta > 0.0) || !(cfg.step_scale > 0.0 && cfg.step_scale <= 1.0) {
        return Err(Error::domain(
            "oracle needs sigma2 > 0, eta > 0 and a step scale in (0, 1]",
        ));
    }
    let n = thresholds.len();
    let caps: Vec<f64> = thresholds.iter().map(|t| t / eta).collect();
    let step = cfg.step_scale / (2.0 * sigma2);
    let mut w = project_capped_simplex(&vec![1.0 / n as f64; n], &caps)?;
    for iter in 0..cfg.max_iter {
        poll(&cfg.cancel, iter)?;
        let y: Vec<f64> = w.iter().map(|wi| wi - step * 2.0 * sigma2 * wi).collect();
        let next = project_capped_simplex(&y, &caps)?;
        let moved = next
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        w = next;
        if moved / step <= cfg.tol {
            return Ok(w);
        }
    }
    Err(Error::OracleFailure(format!(
        "projected gradient did not converge in {} iterations",
        cfg.max_iter
    )))
}

#[derive(Debug, Clone)]
pub struct QlOracleConfig {
    /// Largest tolerated participation violation for a point to count as
    /// feasible.
    pub feasibility_tol: f64,
    /// Iteration cap for each of the golden-section and bisection phases.
    pub max_iter: usize,
    pub cancel: Option<CancelToken>,
}

impl Default for QlOracleConfig {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-10,
            max_iter: 400,
            cancel: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QlOracleOutcome {
    Feasible {
        /// Sorted-instance order.
        weights: Vec<f64>,
        objective: f64,
        /// Largest privacy cost `max_i c_i w_i eta` at the optimum.
        cost_level: f64,
    },
    Infeasible {
        /// Smallest achievable `max_i c_i w_i eta + o - f(Var)`.
        min_violation: f64,
    },
}

impl QlOracleOutcome {
    pub fn objective(&self) -> Option<f64> {
        match self {
            QlOracleOutcome::Feasible { objective, .. } => Some(*objective),
            QlOracleOutcome::Infeasible { .. } => None,
        }
    }
}

/// Reference solver for the fixed-η quasi-linear program.
///
/// Parametrizes candidate solutions by the largest privacy cost `k`. For a
/// given `k` the least-variance weights respecting `c_i w_i eta <= k` are the
/// projection of the origin onto a capped simplex, with variance `m(k)`;
/// they satisfy every participation constraint iff
/// `phi(k) = k + o - f(m(k)) <= 0`. `m` is convex and nonincreasing and `-f`
/// is convex and nondecreasing, so `phi` is convex: its zero sublevel set is
/// an interval and the optimum is `m` at the interval's right end.
pub fn oracle_fixed_eta_ql(
    instance: &Instance,
    eta: f64,
    cfg: &QlOracleConfig,
) -> Result<QlOracleOutcome> {
    let Model::QuasiLinear { f, outside_option } = instance.model() else {
        return Err(Error::domain(
            "the quasi-linear oracle needs a quasi-linear instance",
        ));
    };
    if !eta.is_finite() || eta <= 0.0 {
        return Err(Error::domain(format!(
            "eta must be finite and > 0, got {eta}"
        )));
    }
    let costs = instance.costs()?;
    let sigma2 = instance.sigma2();
    let n = costs.len();
    let zeros = vec![0.0; n];
    let weights_at = |k: f64| -> Result<Vec<f64>> {
        let caps: Vec<f64> = costs
            .iter()
            .map(|&c| {
                if c == 0.0 {
                    f64::INFINITY
                } else {
                    k / (c * eta)
                }
            })
            .collect();
        project_capped_simplex(&zeros, &caps)
    };
    let var_of = |w: &[f64]| sigma2 * w.iter().map(|x| x * x).sum::<f64>() + 2.0 / (eta * eta);
    let phi = |k: f64| -> Result<f64> {
        let w = weights_at(k)?;
        Ok(k + outside_option - f.eval(var_of(&w)))
    };

    let k_min = if costs.contains(&0.0) {
        0.0
    } else {
        1.0 / costs.iter().map(|&c| 1.0 / (c * eta)).sum::<f64>()
    };
    let c_max = costs.iter().cloned().fold(0.0, f64::max);
    let k_sat = (c_max * eta / n as f64).max(k_min);
    let tol = cfg.feasibility_tol;
    let finish = |k: f64| -> Result<QlOracleOutcome> {
        let w = weights_at(k)?;
        let objective = var_of(&w);
        let cost_level = w
            .iter()
            .zip(&costs)
            .map(|(wi, c)| c * wi * eta)
            .fold(0.0, f64::max);
        Ok(QlOracleOutcome::Feasible {
            weights: w,
            objective,
            cost_level,
        })
    };

    if phi(k_sat)? <= tol {
        return finish(k_sat);
    }

    // golden-section minimization of the convex phi on [k_min, k_sat]
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (k_min, k_sat);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = phi(x1)?;
    let mut f2 = phi(x2)?;
    for iter in 0..cfg.max_iter {
        poll(&cfg.cancel, iter)?;
        if b - a <= 1e-15 * b.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = phi(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = phi(x2)?;
        }
    }
    let mut k_best = if f1 <= f2 { x1 } else { x2 };
    let mut phi_best = f1.min(f2);
    for k in [a, b] {
        let v = phi(k)?;
        if v < phi_best {
            phi_best = v;
            k_best = k;
        }
    }
    if phi_best > tol {
        return Ok(QlOracleOutcome::Infeasible {
            min_violation: phi_best,
        });
    }

    // right end of {phi <= 0}: bisection between a feasible and an
    // infeasible cost level
    let (mut lo, mut hi) = (k_best, k_sat);
    for iter in 0..cfg.max_iter {
        poll(&cfg.cancel, iter)?;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid)? <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    finish(lo)
}

/// KKT certificate for a fixed-η solution. Residuals are absolute.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// `max_i |dL/dw_i|`.
    pub stationarity_residual: f64,
    /// `max_i |lambda_i * slack_i|`.
    pub complementary_slackness_residual: f64,
    pub primal_feasibility_residual: f64,
    pub dual_feasibility_ok: bool,
    /// Multipliers of the per-agent privacy / participation constraints.
    pub multipliers: Vec<f64>,
    /// Multiplier of `sum w = 1` (`mu` or `gamma`).
    pub equality_multiplier: f64,
    /// Multipliers of `w >= 0`; zero since certified weights are positive.
    pub nonneg_multipliers: Vec<f64>,
    /// Set when the multiplier reconstruction would divide by a value too
    /// close to zero; residuals are then not meaningful.
    pub inconclusive: bool,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.stationarity_residual
            .max(self.complementary_slackness_residual)
            .max(self.primal_feasibility_residual)
    }

    pub fn certifies(&self, tol: f64) -> bool {
        !self.inconclusive && self.dual_feasibility_ok && self.max_residual() <= tol
    }
}

fn reference_level(solution: &FixedEtaSolution) -> f64 {
    if solution.pool_size >= 1 {
        solution.pooled_weight
    } else {
        solution
            .weights
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn sum_residual(weights: &[f64]) -> f64 {
    (weights.iter().sum::<f64>() - 1.0).abs()
}

/// Certifies a claimed optimum of the fixed-η privacy-constrained program.
///
/// Lagrangian stationarity reads `2 sigma2 w_i + lambda_i eta + mu -
/// lambda0_i = 0`. With `lambda0 = 0` and `mu = -2 sigma2 W` from the pooled
/// agents, `lambda_i = max(0, 2 sigma2 (W - w_i) / eta)`.
pub fn kkt_certify_pc(solution: &FixedEtaSolution, thresholds: &[f64], sigma2: f64) -> KktReport {
    let eta = solution.eta;
    let w = &solution.weights;
    let level = reference_level(solution);
    let mu = -2.0 * sigma2 * level;
    let multipliers: Vec<f64> = w
        .iter()
        .map(|wi| (2.0 * sigma2 * (level - wi) / eta).max(0.0))
        .collect();
    let mut stationarity: f64 = 0.0;
    let mut slackness: f64 = 0.0;
    let mut primal = sum_residual(w);
    for i in 0..w.len() {
        let tau = thresholds.get(i).copied().unwrap_or(f64::NAN);
        let lam = multipliers[i];
        stationarity = stationarity.max((2.0 * sigma2 * w[i] + lam * eta + mu).abs());
        slackness = slackness.max((lam * (w[i] * eta - tau)).abs());
        primal = primal.max(w[i] * eta - tau).max(-w[i]);
    }
    if thresholds.len() != w.len() {
        primal = f64::INFINITY;
    }
    KktReport {
        stationarity_residual: stationarity,
        complementary_slackness_residual: slackness,
        primal_feasibility_residual: primal.max(0.0),
        dual_feasibility_ok: multipliers.iter().all(|&l| l >= -1e-12),
        multipliers,
        equality_multiplier: mu,
        nonneg_multipliers: vec![0.0; w.len()],
        inconclusive: false,
    }
}

/// Certifies a claimed optimum of the fixed-η quasi-linear program.
///
/// Stationarity of the Lagrangian reads
/// `2 sigma2 w_i + lambda_i c_i eta - gamma - lambda0_i
///  - 2 sigma2 (sum_j lambda_j) w_i f'(V) = 0`.
/// Agents in the pooled prefix get `lambda_i = 0`; for the capped suffix
/// the multipliers follow from the pooled level `W`:
/// with `D = 1 - (sum_j lambda_j) f'(V)`, `gamma = 2 sigma2 W D` and
/// `lambda_i = 2 sigma2 D (W - w_i) / (c_i eta)`. Summing the latter gives
/// `D = 1 / (1 + M f'(V))` where `M = 2 sigma2 sum_i (W - w_i) / (c_i eta)`.
pub fn kkt_certify_ql(solution: &FixedEtaSolution, instance: &Instance, eta: f64) -> KktReport {
    let (f, o) = match instance.model() {
        Model::QuasiLinear { f, outside_option } => (f, *outside_option),
        Model::PrivacyConstrained { .. } => {
            return KktReport {
                stationarity_residual: f64::INFINITY,
                complementary_slackness_residual: f64::INFINITY,
                primal_feasibility_residual: f64::INFINITY,
                dual_feasibility_ok: false,
                multipliers: Vec::new(),
                equality_multiplier: f64::NAN,
                nonneg_multipliers: Vec::new(),
                inconclusive: true,
            }
        }
    };
    let sigma2 = instance.sigma2();
    let costs = instance.costs().unwrap_or_default();
    let w = &solution.weights;
    let n = w.len();
    let v = sigma2 * w.iter().map(|x| x * x).sum::<f64>() + 2.0 / (eta * eta);
    let fv = f.eval(v);
    let fp = f.derivative(v);
    let level = reference_level(solution);
    let t = solution.pool_size.min(n);

    let m: f64 = (t..n)
        .filter(|&i| costs.get(i).is_some_and(|&c| c > 0.0))
        .map(|i| 2.0 * sigma2 * (level - w[i]) / (costs[i] * eta))
        .sum();
    let denom = 1.0 + m * fp;
    let inconclusive = denom.abs() < 1e-10 || costs.len() != n;
    let d = if inconclusive { 1.0 } else { 1.0 / denom };
    let gamma = 2.0 * sigma2 * level * d;
    let multipliers: Vec<f64> = (0..n)
        .map(|i| {
            let c = costs.get(i).copied().unwrap_or(0.0);
            if i < t || c == 0.0 {
                0.0
            } else {
                2.0 * sigma2 * d * (level - w[i]) / (c * eta)
            }
        })
        .collect();
    let lambda_sum: f64 = multipliers.iter().sum();

    let mut stationarity: f64 = 0.0;
    let mut slackness: f64 = 0.0;
    let mut primal = sum_residual(w);
    for i in 0..n {
        let c = costs.get(i).copied().unwrap_or(f64::NAN);
        let lam = multipliers[i];
        let grad =
            2.0 * sigma2 * w[i] + lam * c * eta - gamma - 2.0 * sigma2 * lambda_sum * w[i] * fp;
        stationarity = stationarity.max(grad.abs());
        let slack = c * w[i] * eta - fv + o;
        slackness = slackness.max((lam * slack).abs());
        primal = primal.max(slack).max(-w[i]);
    }
    KktReport {
        stationarity_residual: stationarity,
        complementary_slackness_residual: slackness,
        primal_feasibility_residual: primal.max(0.0),
        dual_feasibility_ok: d > 0.0 && multipliers.iter().all(|&l| l >= -1e-12),
        multipliers,
        equality_multiplier: gamma,
        nonneg_multipliers: vec![0.0; n],
        inconclusive,
    }
}

/// Dense-grid minimizer on `[lo, hi]` with one parabolic refinement step.
/// Non-finite objective values are skipped.
pub fn grid_min_1d<F: Fn(f64) -> f64>(
    objective: F,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<(f64, f64)> {
    if !(lo < hi) || points < 2 || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::domain(
            "grid_min_1d needs finite lo < hi and at least 2 points",
        ));
    }
    let step = (hi - lo) / (points - 1) as f64;
    let xs: Vec<f64> = (0..points)
        .map(|k| {
            if k + 1 == points {
                hi
            } else {
                lo + step * k as f64
            }
        })
        .collect();
    let fs: Vec<f64> = xs.iter().map(|&x| objective(x)).collect();
    let mut best: Option<usize> = None;
    for (k, &v) in fs.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b| v < fs[b]) {
            best = Some(k);
        }
    }
    let k = best.ok_or_else(|| Error::domain("objective is non-finite on the whole grid"))?;
    if k == 0 || k + 1 == points || !fs[k - 1].is_finite() || !fs[k + 1].is_finite() {
        return Ok((xs[k], fs[k]));
    }
    let (f0, f1, f2) = (fs[k - 1], fs[k], fs[k + 1]);
    let curvature = f0 - 2.0 * f1 + f2;
    if curvature > 0.0 {
        let x = xs[k] + 0.5 * step * (f0 - f2) / curvature;
        let v = objective(x);
        if v.is_finite() && v <= f1 && x >= xs[k - 1] && x <= xs[k + 1] {
            return Ok((x, v));
        }
    }
    Ok((xs[k], fs[k]))
}
