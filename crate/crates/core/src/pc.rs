//! Exact solver for the privacy-constrained model.
//!
//! For a fixed noise level `eta` the optimal weights water-fill the caps
//! `tau_i / eta`: a pooled prefix shares a common weight `W` and every other
//! agent sits exactly on its cap. With the pool size `t` fixed, the objective
//! as a function of `eta` is
//!
//! ```text
//! h(eta; t) = (sigma2 / t) (1 - S_t / eta)^2 + sigma2 Q_t / eta^2 + 2 / eta^2
//! ```
//!
//! where `S_t` and `Q_t` are the sum and the sum of squares of the tail
//! thresholds `tau_{t+1..n}`. `h` is unimodal with a closed-form stationary
//! point, so the outer problem is an O(n) scan over `t`.

use crate::error::{Error, Result};
use crate::model::{
    variance_unchecked, EtaSearch, FixedEtaSolution, Instance, MechanismSolution, Model,
    BOUNDARY_RTOL,
};
use crate::ql::{grid_sweep, SweepGrid};

/// Candidate produced for one pool size during the outer scan.
#[derive(Debug, Clone, PartialEq)]
pub struct PcEtaCandidate {
    pub t: usize,
    /// Stationary point of `h(.; t)`; absent for `t = n` where `h` is
    /// strictly decreasing.
    pub eta_unconstrained: Option<f64>,
    pub eta_clamped: f64,
    /// `h(eta_clamped; t)`.
    pub objective: f64,
    /// Interval on which the `t`-form is feasible: `[S_t, t tau_t + S_t]`.
    pub interval: (f64, f64),
    /// The same interval written with head sums `[sum_{i<=t+1} tau_i,
    /// t tau_t + sum_{i<=t+1} tau_i]`, kept for diagnostics only.
    pub head_sum_interval: (f64, f64),
}

/// Suffix sums of the thresholds and of their squares.
///
/// `sum(t)` is `S_t = sum_{i > t} tau_i` with 1-based `t`, so `sum(0)` is the
/// total and `sum(n)` is zero.
#[derive(Debug, Clone)]
pub struct TailSums {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl TailSums {
    pub fn new(thresholds: &[f64]) -> Self {
        let n = thresholds.len();
        let mut sum = vec![0.0; n + 1];
        let mut sum_sq = vec![0.0; n + 1];
        for i in (0..n).rev() {
            sum[i] = sum[i + 1] + thresholds[i];
            sum_sq[i] = sum_sq[i + 1] + thresholds[i] * thresholds[i];
        }
        Self { sum, sum_sq }
    }

    pub fn sum(&self, t: usize) -> f64 {
        self.sum[t]
    }

    pub fn sum_sq(&self, t: usize) -> f64 {
        self.sum_sq[t]
    }
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::domain("thresholds must be nonempty"));
    }
    if thresholds.iter().any(|t| !t.is_finite() || *t <= 0.0) {
        return Err(Error::domain("thresholds must be finite and > 0"));
    }
    if thresholds.windows(2).any(|p| p[1] > p[0]) {
        return Err(Error::domain("thresholds must be sorted nonincreasing"));
    }
    Ok(())
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(format!(
            "{name} must be finite and > 0, got {x}"
        )));
    }
    Ok(())
}

/// Largest feasible noise level: the fixed-η program is feasible iff
/// `0 < eta <= sum(tau)`.
pub fn feasible_eta_upper(thresholds: &[f64]) -> Result<f64> {
    check_thresholds(thresholds)?;
    Ok(TailSums::new(thresholds).sum(0))
}

/// Water-filling solution of the fixed-η program
/// `min sigma2 sum w_i^2  s.t.  w_i eta <= tau_i, sum w_i = 1, w >= 0`.
///
/// `w_i = min(W, tau_i / eta)` with `W` the unique level making the weights
/// sum to one. Agents whose cap equals `W` are counted in the pool.
pub fn solve_fixed_eta_pc(thresholds: &[f64], sigma2: f64, eta: f64) -> Result<FixedEtaSolution> {
    check_thresholds(thresholds)?;
    check_positive("sigma2", sigma2)?;
    check_positive("eta", eta)?;
    let tails = TailSums::new(thresholds);
    solve_fixed_eta_with(thresholds, &tails, sigma2, eta)
}

pub(crate) fn solve_fixed_eta_with(
    thresholds: &[f64],
    tails: &TailSums,
    sigma2: f64,
    eta: f64,
) -> Result<FixedEtaSolution> {
    let n = thresholds.len();
    let bound = tails.sum(0);
    if eta > bound * (1.0 + BOUNDARY_RTOL) {
        return Err(Error::InfeasibleEta { eta, bound });
    }
    // The level lies in [tau_{t+1}, tau_t] / eta exactly when
    // eta <= t tau_t + S_t, and that bound is nonincreasing in t; take the
    // largest t satisfying it. t = 1 always does since its bound is sum(tau).
    let t = (1..=n)
        .rev()
        .find(|&t| eta <= (t as f64 * thresholds[t - 1] + tails.sum(t)) * (1.0 + BOUNDARY_RTOL))
        .unwrap_or(1);
    let level = (1.0 - tails.sum(t) / eta) / t as f64;
    let mut weights = Vec::with_capacity(n);
    weights.extend(std::iter::repeat_n(level, t));
    weights.extend(thresholds[t..].iter().map(|tau| tau / eta));
    let objective = variance_unchecked(&weights, sigma2, eta);
    Ok(FixedEtaSolution {
        eta,
        weights,
        pool_size: t,
        pooled_weight: level,
        scale: None,
        objective,
    })
}

/// `h(eta; t)`, the objective of the `t`-pooled closed form at noise `eta`.
pub fn h_objective(eta: f64, thresholds: &[f64], sigma2: f64, t: usize) -> Result<f64> {
    check_thresholds(thresholds)?;
    check_positive("sigma2", sigma2)?;
    check_positive("eta", eta)?;
    check_pool_size(t, thresholds.len())?;
    Ok(h_with(eta, &TailSums::new(thresholds), sigma2, t))
}

fn check_pool_size(t: usize, n: usize) -> Result<()> {
    if t == 0 || t > n {
        return Err(Error::domain(format!(
            "pool size must be in 1..={n}, got {t}"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn h_with(eta: f64, tails: &TailSums, sigma2: f64, t: usize) -> f64 {
    let s = tails.sum(t);
    let q = tails.sum_sq(t);
    let pooled = 1.0 - s / eta;
    sigma2 / t as f64 * pooled * pooled + (sigma2 * q + 2.0) / (eta * eta)
}

/// Stationary point of `h(.; t)`:
/// `eta* = (S_t^2 + t Q_t + 2 t / sigma2) / S_t`.
pub fn eta_star_closed_form(thresholds: &[f64], sigma2: f64, t: usize) -> Result<f64> {
    check_thresholds(thresholds)?;
    check_positive("sigma2", sigma2)?;
    check_pool_size(t, thresholds.len())?;
    if t == thresholds.len() {
        return Err(Error::domain(
            "empty tail: h is strictly decreasing for t = n, use the interval's upper end",
        ));
    }
    Ok(eta_star_with(&TailSums::new(thresholds), sigma2, t))
}

#[inline]
fn eta_star_with(tails: &TailSums, sigma2: f64, t: usize) -> f64 {
    let s = tails.sum(t);
    let q = tails.sum_sq(t);
    let tf = t as f64;
    s + tf * (q + 2.0 / sigma2) / s
}

fn candidate_for(thresholds: &[f64], tails: &TailSums, sigma2: f64, t: usize) -> PcEtaCandidate {
    let n = thresholds.len();
    let s = tails.sum(t);
    let lo = s;
    let hi = t as f64 * thresholds[t - 1] + s;
    let head = tails.sum(0) - tails.sum((t + 1).min(n));
    let head_sum_interval = (head, t as f64 * thresholds[t - 1] + head);
    let eta_unconstrained = (t < n).then(|| eta_star_with(tails, sigma2, t));
    let mut best: Option<(f64, f64)> = None;
    let probes = [
        eta_unconstrained.map(|e| e.clamp(lo, hi)),
        Some(lo),
        Some(hi),
    ];
    for eta in probes.into_iter().flatten() {
        if eta <= 0.0 {
            continue;
        }
        let value = h_with(eta, tails, sigma2, t);
        let better = match best {
            None => true,
            Some((be, bv)) => value < bv || (value == bv && eta < be),
        };
        if better {
            best = Some((eta, value));
        }
    }
    // hi > 0 always, so at least one probe survives
    let (eta_clamped, objective) = best.expect("upper endpoint is positive");
    PcEtaCandidate {
        t,
        eta_unconstrained,
        eta_clamped,
        objective,
        interval: (lo, hi),
        head_sum_interval,
    }
}

/// All per-`t` candidates of the outer scan, deduplicated by
/// `(eta, objective)`; the first (smallest `t`) copy is kept.
pub fn pc_candidates(thresholds: &[f64], sigma2: f64) -> Result<Vec<PcEtaCandidate>> {
    check_thresholds(thresholds)?;
    check_positive("sigma2", sigma2)?;
    let tails = TailSums::new(thresholds);
    let mut out: Vec<PcEtaCandidate> = Vec::with_capacity(thresholds.len());
    for t in 1..=thresholds.len() {
        let c = candidate_for(thresholds, &tails, sigma2, t);
        if !out
            .iter()
            .any(|o| o.eta_clamped == c.eta_clamped && o.objective == c.objective)
        {
            out.push(c);
        }
    }
    Ok(out)
}

/// Optimal mechanism for a privacy-constrained instance.
///
/// Scans `t = 1..=n`, evaluating `h` at the clamped stationary point and both
/// ends of the `t`-interval, keeps the best by (objective, eta, t), then
/// re-derives the weights with the fixed-η water-filler at the winning eta.
pub fn solve_pc(instance: &Instance) -> Result<MechanismSolution> {
    if !matches!(instance.model(), Model::PrivacyConstrained { .. }) {
        return Err(Error::domain(
            "solve_pc needs a privacy-constrained instance",
        ));
    }
    let thresholds = instance.thresholds()?;
    let sigma2 = instance.sigma2();
    let tails = TailSums::new(&thresholds);
    let mut best: Option<PcEtaCandidate> = None;
    for t in 1..=thresholds.len() {
        let c = candidate_for(&thresholds, &tails, sigma2, t);
        let better = match &best {
            None => true,
            Some(b) => (c.objective, c.eta_clamped) < (b.objective, b.eta_clamped),
        };
        if better {
            best = Some(c);
        }
    }
    let best = best.expect("n >= 1");
    let eta = best.eta_clamped.min(tails.sum(0));
    let fixed = solve_fixed_eta_with(&thresholds, &tails, sigma2, eta)?;
    Ok(MechanismSolution::new(
        fixed,
        EtaSearch::ClosedForm { t: best.t },
        Vec::new(),
    ))
}

/// Grid search over η for a privacy-constrained instance, for trace output
/// and cross-checks; the exact path is [`solve_pc`].
pub fn sweep_eta_pc(instance: &Instance, grid: &SweepGrid) -> Result<MechanismSolution> {
    if !matches!(instance.model(), Model::PrivacyConstrained { .. }) {
        return Err(Error::domain(
            "sweep_eta_pc needs a privacy-constrained instance",
        ));
    }
    let thresholds = instance.thresholds()?;
    let tails = TailSums::new(&thresholds);
    let sigma2 = instance.sigma2();
    grid_sweep(grid, |eta| {
        solve_fixed_eta_with(&thresholds, &tails, sigma2, eta)
    })
}
