//! Instance builders shared by the benchmarks.

use dpacq_core::io::{gen_instance, GenModel, GenSpec};
use dpacq_core::{BenefitFunction, Instance};

/// Privacy-constrained instance with log-uniform thresholds on `[0.01, 1]`.
pub fn pc_instance(n: usize, seed: u64) -> Instance {
    let spec = GenSpec {
        sigma2: 1.0,
        model: GenModel::PrivacyConstrained {
            tau_lo: 0.01,
            tau_hi: 1.0,
            g: BenefitFunction::linear(1.0, 0.1).expect("valid benefit"),
        },
    };
    gen_instance(n, seed, &spec).expect("valid generator spec")
}

/// Quasi-linear instance with log-uniform costs on `[0.1, 10]`.
pub fn ql_instance(n: usize, seed: u64, f: BenefitFunction) -> Instance {
    let spec = GenSpec {
        sigma2: 1.0,
        model: GenModel::QuasiLinear {
            c_lo: 0.1,
            c_hi: 10.0,
            f,
            outside_option: 0.1,
        },
    };
    gen_instance(n, seed, &spec).expect("valid generator spec")
}
