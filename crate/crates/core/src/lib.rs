//! Differentially private acquisition of agents' data: optimal weighting of
//! the reports and calibration of the Laplace noise level, under a
//! quasi-linear or a privacy-constrained model of agent behaviour.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod model;
pub mod oracle;
pub mod pc;
pub mod ql;
pub mod simulation;

pub use error::{Error, Result};
pub use model::*;
pub use oracle::{
    kkt_certify_pc, kkt_certify_ql, oracle_fixed_eta_pc, oracle_fixed_eta_ql, CancelToken,
    KktReport, PgdConfig, QlOracleConfig, QlOracleOutcome,
};
pub use pc::{solve_fixed_eta_pc, solve_pc, sweep_eta_pc};
pub use ql::{solve_fixed_eta_ql, sweep_eta_ql, QlConfig, SweepGrid};
pub use simulation::{
    empirical_variance, misreport_audit_pc, participation_fixed_point, AuditMode, AuditResult,
    DataDistribution, ReportGrid, VarianceEstimate,
};
