use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dpacq_core::io::{self, GenModel, GenSpec};
use dpacq_core::ql::{
    solve_fixed_eta_ql_with, sweep_eta_ql, trace_is_unimodal, OracleCheck, QlConfig, SweepGrid,
};
use dpacq_core::{
    empirical_variance, kkt_certify_pc, kkt_certify_ql, misreport_audit_pc, oracle_fixed_eta_pc,
    solve_fixed_eta_pc, solve_pc, sweep_eta_pc, variance, AuditMode, BenefitFunction,
    DataDistribution, FixedEtaSolution, Instance, MechanismSolution, Model, ReportGrid,
};

use crate::exit::{CheckFailed, Usage, OK};
use crate::report::{kkt_lines, small, solution_table, value};

/// Environment variable overriding the default verification tolerance.
pub const TOL_ENV: &str = "DPACQ_TOL";
const DEFAULT_TOL: f64 = 1e-8;
const AUDIT_GAIN_TOL: f64 = 1e-9;
const PC_OBJECTIVE_GAP: f64 = 1e-6;
const PC_WEIGHT_GAP: f64 = 1e-5;

/// Optimal weighting and noise calibration for private data acquisition.
#[derive(Debug, Parser)]
#[command(name = "dpacq", version)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve an instance, optionally at a fixed noise level.
    Solve {
        instance: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        eta: Option<f64>,
        /// Write the solution JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid search over the noise level, writing the (eta, objective, t) trace.
    Sweep {
        instance: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check the structured solver against the oracle and certify KKT.
    Verify {
        instance: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        eta: Option<f64>,
        /// Residual tolerance; defaults to $DPACQ_TOL or 1e-8.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Misreporting audit of the privacy thresholds.
    Audit {
        instance: PathBuf,
        /// Agent id; all agents when omitted.
        #[arg(long)]
        agent: Option<String>,
        /// Report grid as lo_frac,hi_frac,points.
        #[arg(long, default_value = "0.2,5,50")]
        grid: String,
        #[arg(long, value_enum, default_value_t = AuditModeArg::Both)]
        mode: AuditModeArg,
    },
    /// Monte Carlo check of the estimator's mean and variance.
    Simulate {
        instance: PathBuf,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, allow_negative_numbers = true)]
        mean: f64,
        #[arg(long, allow_negative_numbers = true)]
        eta: Option<f64>,
        #[arg(long, value_enum, default_value_t = DistArg::Gaussian)]
        dist: DistArg,
    },
    /// Generate a random instance.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Lower end of the log-uniform tau (or c) range.
        #[arg(long, allow_negative_numbers = true)]
        lo: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        hi: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
        /// Benefit a - b * variance.
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        a: f64,
        #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
        b: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        outside_option: f64,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long, allow_negative_numbers = true)]
    lo: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    hi: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    refine: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AuditModeArg {
    FixedEta,
    Optimized,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DistArg {
    Gaussian,
    Uniform,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    PrivacyConstrained,
    QuasiLinear,
}

pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Solve { instance, eta, out } => solve(&load(&instance)?, eta, out),
        Command::Sweep {
            instance,
            grid,
            trace,
            out,
        } => sweep(&load(&instance)?, &grid, trace, out),
        Command::Verify { instance, eta, tol } => verify(&load(&instance)?, eta, tolerance(tol)?),
        Command::Audit {
            instance,
            agent,
            grid,
            mode,
        } => audit(&load(&instance)?, agent, &grid, mode),
        Command::Simulate {
            instance,
            trials,
            seed,
            mean,
            eta,
            dist,
        } => simulate(&load(&instance)?, trials, seed, mean, eta, dist),
        Command::Gen {
            n,
            seed,
            model,
            lo,
            hi,
            sigma2,
            a,
            b,
            outside_option,
            out,
        } => {
            let g = BenefitFunction::linear(a, b)?;
            let model = match model {
                ModelArg::PrivacyConstrained => GenModel::PrivacyConstrained {
                    tau_lo: lo.unwrap_or(0.01),
                    tau_hi: hi.unwrap_or(1.0),
                    g,
                },
                ModelArg::QuasiLinear => GenModel::QuasiLinear {
                    c_lo: lo.unwrap_or(0.1),
                    c_hi: hi.unwrap_or(10.0),
                    f: g,
                    outside_option,
                },
            };
            let inst = io::gen_instance(n, seed, &GenSpec { sigma2, model })?;
            let text = io::instance_json(&inst);
            match out {
                Some(path) => std::fs::write(&path, text)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            Ok(OK)
        }
    }
}

fn load(path: &PathBuf) -> Result<Instance> {
    io::load_instance(path).with_context(|| format!("loading {}", path.display()))
}

fn tolerance(flag: Option<f64>) -> Result<f64> {
    let tol = match flag {
        Some(t) => t,
        None => match std::env::var(TOL_ENV) {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| Usage(format!("{TOL_ENV}={s:?} is not a number")))?,
            Err(_) => DEFAULT_TOL,
        },
    };
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Usage(format!("tolerance must be finite and > 0, got {tol}")).into());
    }
    Ok(tol)
}

fn check_eta(eta: Option<f64>) -> Result<()> {
    if let Some(e) = eta {
        if !(e > 0.0) || !e.is_finite() {
            return Err(Usage(format!("--eta must be finite and > 0, got {e}")).into());
        }
    }
    Ok(())
}

fn ql_config(check: OracleCheck) -> QlConfig {
    QlConfig {
        oracle_check: check,
        ..QlConfig::default()
    }
}

/// The optimal mechanism: exact for privacy-constrained, default sweep for
/// quasi-linear.
fn optimize(instance: &Instance) -> Result<MechanismSolution> {
    Ok(match instance.model() {
        Model::PrivacyConstrained { .. } => solve_pc(instance)?,
        Model::QuasiLinear { .. } => sweep_eta_ql(instance, &SweepGrid::default_for(instance))?,
    })
}

fn solve(instance: &Instance, eta: Option<f64>, out: Option<PathBuf>) -> Result<u8> {
    check_eta(eta)?;
    let (best, search, oracle_gap) = match (eta, instance.model()) {
        (Some(eta), Model::PrivacyConstrained { .. }) => (
            solve_fixed_eta_pc(&instance.thresholds()?, instance.sigma2(), eta)?,
            None,
            None,
        ),
        (Some(eta), Model::QuasiLinear { .. }) => {
            let r = solve_fixed_eta_ql_with(instance, eta, &ql_config(OracleCheck::Auto))?;
            (r.solution, None, r.oracle_gap)
        }
        (None, _) => {
            let m = optimize(instance)?;
            (m.best, Some(m.eta_search), None)
        }
    };
    let kkt = certify(instance, &best)?;
    let file = io::solution_file(instance, &best, search.as_ref(), Some(&kkt), oracle_gap);
    if let Some(path) = out {
        io::write_solution(&path, &file).with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{}", solution_table(&file));
    Ok(OK)
}

fn certify(instance: &Instance, s: &FixedEtaSolution) -> Result<dpacq_core::KktReport> {
    Ok(match instance.model() {
        Model::PrivacyConstrained { .. } => {
            kkt_certify_pc(s, &instance.thresholds()?, instance.sigma2())
        }
        Model::QuasiLinear { .. } => kkt_certify_ql(s, instance, s.eta),
    })
}

fn sweep(instance: &Instance, args: &GridArgs, trace: PathBuf, out: Option<PathBuf>) -> Result<u8> {
    let d = SweepGrid::default_for(instance);
    let grid = SweepGrid {
        lo: args.lo.unwrap_or(d.lo),
        hi: args.hi.unwrap_or(d.hi),
        points: args.points.unwrap_or(d.points),
        refine_rounds: args.refine.unwrap_or(d.refine_rounds),
    };
    let m = match instance.model() {
        Model::PrivacyConstrained { .. } => sweep_eta_pc(instance, &grid)?,
        Model::QuasiLinear { .. } => sweep_eta_ql(instance, &grid)?,
    };
    io::emit_trace_csv(&m.trace, &trace).with_context(|| format!("writing {}", trace.display()))?;
    let kkt = certify(instance, &m.best)?;
    let file = io::solution_file(instance, &m.best, Some(&m.eta_search), Some(&kkt), None);
    if let Some(path) = out {
        io::write_solution(&path, &file).with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{}", solution_table(&file));
    println!("trace_rows {}", m.trace.len());
    println!("unimodal   {}", trace_is_unimodal(&m.trace, 1e-12));
    Ok(OK)
}

fn verify(instance: &Instance, eta: Option<f64>, tol: f64) -> Result<u8> {
    check_eta(eta)?;
    let eta = match eta {
        Some(e) => e,
        None => optimize(instance)?.best.eta,
    };
    let mut out = String::new();
    let mut failures = Vec::new();
    let _ = writeln!(out, "eta {}", value(eta));
    match instance.model() {
        Model::PrivacyConstrained { .. } => {
            let taus = instance.thresholds()?;
            let s = solve_fixed_eta_pc(&taus, instance.sigma2(), eta)?;
            let w = oracle_fixed_eta_pc(&taus, instance.sigma2(), eta, 1e-10)?;
            let oracle_obj = variance(&w, instance.sigma2(), eta)?;
            let obj_gap = (s.objective - oracle_obj).abs();
            let w_gap = s
                .weights
                .iter()
                .zip(&w)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let kkt = kkt_certify_pc(&s, &taus, instance.sigma2());
            let _ = writeln!(
                out,
                "objective structured={} oracle={}",
                value(s.objective),
                value(oracle_obj)
            );
            let _ = writeln!(
                out,
                "oracle objective_gap={} weight_gap={}",
                small(obj_gap),
                small(w_gap)
            );
            out.push_str(&kkt_lines(&kkt));
            if obj_gap > PC_OBJECTIVE_GAP {
                failures.push(format!("objective gap {obj_gap:e} > {PC_OBJECTIVE_GAP:e}"));
            }
            if w_gap > PC_WEIGHT_GAP {
                failures.push(format!("weight gap {w_gap:e} > {PC_WEIGHT_GAP:e}"));
            }
            if !kkt.certifies(tol) {
                failures.push(format!(
                    "kkt residual {:e} above tolerance {tol:e}",
                    kkt.max_residual()
                ));
            }
        }
        Model::QuasiLinear { f, .. } => {
            let r = solve_fixed_eta_ql_with(instance, eta, &ql_config(OracleCheck::Always))?;
            let gap = r.oracle_gap.unwrap_or(f64::NAN);
            let kkt = kkt_certify_ql(&r.solution, instance, eta);
            let _ = writeln!(out, "objective structured={}", value(r.solution.objective));
            let _ = writeln!(out, "oracle objective_gap={}", small(gap));
            out.push_str(&kkt_lines(&kkt));
            // piecewise f has kinks where the KKT conditions need a
            // subgradient; the certificate is only enforced for linear f
            if f.is_linear() && !kkt.certifies(tol) {
                failures.push(format!(
                    "kkt residual {:e} above tolerance {tol:e}",
                    kkt.max_residual()
                ));
            }
        }
    }
    let _ = writeln!(
        out,
        "verdict {}",
        if failures.is_empty() { "pass" } else { "fail" }
    );
    print!("{out}");
    if failures.is_empty() {
        Ok(OK)
    } else {
        Err(CheckFailed(failures.join("; ")).into())
    }
}

fn parse_grid(s: &str) -> Result<ReportGrid> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Usage(format!("--grid expects lo_frac,hi_frac,points, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad().into());
    }
    Ok(ReportGrid {
        lo_frac: parts[0].parse().map_err(|_| bad())?,
        hi_frac: parts[1].parse().map_err(|_| bad())?,
        points: parts[2].parse().map_err(|_| bad())?,
    })
}

fn audit(instance: &Instance, agent: Option<String>, grid: &str, mode: AuditModeArg) -> Result<u8> {
    if !instance.is_privacy_constrained() {
        return Err(Usage("audit applies to privacy-constrained instances only".into()).into());
    }
    let grid = parse_grid(grid)?;
    let (_, ids) = instance.input_agents();
    let agents: Vec<usize> = match agent {
        Some(id) => vec![ids
            .iter()
            .position(|x| *x == id)
            .ok_or_else(|| Usage(format!("no agent with id {id:?}")))?],
        None => (0..ids.len()).collect(),
    };
    let modes: &[AuditMode] = match mode {
        AuditModeArg::FixedEta => &[AuditMode::FixedEta],
        AuditModeArg::Optimized => &[AuditMode::Optimized],
        AuditModeArg::Both => &[AuditMode::FixedEta, AuditMode::Optimized],
    };
    let mut worst = f64::NEG_INFINITY;
    for &a in &agents {
        for &m in modes {
            let r = misreport_audit_pc(instance, a, &grid, m)?;
            let label = match m {
                AuditMode::FixedEta => "fixed_eta",
                AuditMode::Optimized => "optimized",
            };
            println!(
                "agent={} mode={label} tau={} reports={} truthful_utility={} max_gain={}",
                ids[a],
                value(r.true_threshold),
                r.reports_tested.len(),
                value(r.truthful_utility),
                small(r.max_gain)
            );
            worst = worst.max(r.max_gain);
        }
    }
    let pass = worst <= AUDIT_GAIN_TOL;
    println!("verdict {}", if pass { "pass" } else { "fail" });
    if pass {
        Ok(OK)
    } else {
        Err(CheckFailed(format!(
            "misreporting gains up to {worst:e} > {AUDIT_GAIN_TOL:e}"
        ))
        .into())
    }
}

fn simulate(
    instance: &Instance,
    trials: usize,
    seed: u64,
    mean: f64,
    eta: Option<f64>,
    dist: DistArg,
) -> Result<u8> {
    check_eta(eta)?;
    let best = match eta {
        Some(eta) => match instance.model() {
            Model::PrivacyConstrained { .. } => {
                solve_fixed_eta_pc(&instance.thresholds()?, instance.sigma2(), eta)?
            }
            Model::QuasiLinear { .. } => {
                solve_fixed_eta_ql_with(instance, eta, &ql_config(OracleCheck::Auto))?.solution
            }
        },
        None => optimize(instance)?.best,
    };
    let dist = match dist {
        DistArg::Gaussian => DataDistribution::Gaussian,
        DistArg::Uniform => DataDistribution::Uniform,
    };
    let est = empirical_variance(instance, &best.weights, best.eta, trials, seed, mean, dist)?;
    let analytic = best.objective;
    println!("eta                {}", value(best.eta));
    println!("trials             {trials}");
    println!("empirical_mean     {}", value(est.mean));
    println!("empirical_variance {}", value(est.variance));
    println!("stderr_variance    {}", value(est.stderr_variance));
    println!("analytic_variance  {}", value(analytic));
    println!(
        "z_variance         {:.3}",
        (est.variance - analytic) / est.stderr_variance
    );
    println!(
        "z_mean             {:.3}",
        (est.mean - mean) / (analytic / trials as f64).sqrt()
    );
    Ok(OK)
}
