use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{seeded_rng, AgentProfile, BenefitFunction, Instance, Model};

#[derive(Debug, Clone, PartialEq)]
pub enum GenModel {
    /// Thresholds log-uniform on `[tau_lo, tau_hi]`.
    PrivacyConstrained {
        tau_lo: f64,
        tau_hi: f64,
        g: BenefitFunction,
    },
    /// Cost coefficients log-uniform on `[c_lo, c_hi]`.
    QuasiLinear {
        c_lo: f64,
        c_hi: f64,
        f: BenefitFunction,
        outside_option: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub sigma2: f64,
    pub model: GenModel,
}

fn check_range(lo: f64, hi: f64, what: &str) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{what} range needs 0 < lo <= hi < inf, got [{lo}, {hi}]"
        )))
    }
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    (lo.ln() + u * (hi.ln() - lo.ln())).exp().clamp(lo, hi)
}

/// Seeded random instance; agents get ids `a0, a1, ...`.
pub fn gen_instance(n: usize, seed: u64, spec: &GenSpec) -> Result<Instance> {
    if n == 0 {
        return Err(Error::domain("n must be >= 1"));
    }
    let mut rng = seeded_rng(seed);
    let (agents, model) = match &spec.model {
        GenModel::PrivacyConstrained { tau_lo, tau_hi, g } => {
            check_range(*tau_lo, *tau_hi, "tau")?;
            let agents = (0..n)
                .map(|_| AgentProfile::with_threshold(log_uniform(&mut rng, *tau_lo, *tau_hi)))
                .collect::<Result<Vec<_>>>()?;
            (agents, Model::PrivacyConstrained { g: g.clone() })
        }
        GenModel::QuasiLinear {
            c_lo,
            c_hi,
            f,
            outside_option,
        } => {
            check_range(*c_lo, *c_hi, "c")?;
            let agents = (0..n)
                .map(|_| AgentProfile::with_cost(log_uniform(&mut rng, *c_lo, *c_hi)))
                .collect::<Result<Vec<_>>>()?;
            (
                agents,
                Model::QuasiLinear {
                    f: f.clone(),
                    outside_option: *outside_option,
                },
            )
        }
    };
    Instance::new(spec.sigma2, agents, model)
}
