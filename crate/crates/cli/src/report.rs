//! Human-readable stdout summaries.

use std::fmt::Write;

use dpacq_core::io::SolutionFile;
use dpacq_core::KktReport;

pub fn value(x: f64) -> String {
    // no "-0.0000000000" for round-off below the printed precision
    let x = if x.abs() < 5e-11 { 0.0 } else { x };
    format!("{x:.10}")
}

pub fn small(x: f64) -> String {
    format!("{x:.3e}")
}

pub fn solution_table(file: &SolutionFile) -> String {
    let model = match file.model {
        dpacq_core::io::instance_file::ModelSpec::QuasiLinear { .. } => "quasi_linear",
        dpacq_core::io::instance_file::ModelSpec::PrivacyConstrained { .. } => {
            "privacy_constrained"
        }
    };
    let mut out = String::new();
    let _ = writeln!(out, "model      {model}");
    let _ = writeln!(out, "eta        {}", value(file.eta));
    let _ = writeln!(out, "objective  {}", value(file.objective));
    let _ = write!(
        out,
        "structure  t={} W={}",
        file.structure.t,
        value(file.structure.pooled_weight)
    );
    if let Some(k) = file.structure.scale {
        let _ = write!(out, " K={}", value(k));
    }
    let _ = writeln!(out, "\nsearch     {}", file.diagnostics.eta_search.method);
    let width = file
        .per_agent
        .keys()
        .map(String::len)
        .max()
        .unwrap_or(2)
        .max(2);
    let _ = writeln!(
        out,
        "{:<width$}  {:>14}  {:>14}  {:>14}",
        "id", "weight", "epsilon", "slack"
    );
    for (id, a) in &file.per_agent {
        let _ = writeln!(
            out,
            "{id:<width$}  {:>14}  {:>14}  {:>14}",
            value(a.weight),
            value(a.epsilon),
            value(a.constraint_slack)
        );
    }
    out
}

pub fn kkt_lines(report: &KktReport) -> String {
    format!(
        "kkt stationarity={} complementary_slackness={} primal_feasibility={} dual_feasible={} inconclusive={}\n",
        small(report.stationarity_residual),
        small(report.complementary_slackness_residual),
        small(report.primal_feasibility_residual),
        report.dual_feasibility_ok,
        report.inconclusive
    )
}
