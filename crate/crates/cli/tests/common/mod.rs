//! Golden-file cases for the `dpacq` binary, shared by the golden test and
//! the acceptance runner. Set `UPDATE_GOLDEN=1` to rewrite the goldens.

use std::path::{Path, PathBuf};
use std::process::Command;

pub struct Case {
    pub name: &'static str,
    pub args: &'static [&'static str],
    pub expect_exit: i32,
    /// Files the command writes under `$OUT`, captured into the golden.
    pub outputs: &'static [&'static str],
}

pub const CASES: &[Case] = &[
    Case {
        name: "solve_pc3_eta1",
        args: &[
            "solve",
            "pc3.json",
            "--eta",
            "1",
            "--out",
            "$OUT/solution.json",
        ],
        expect_exit: 0,
        outputs: &["solution.json"],
    },
    Case {
        name: "solve_pc3",
        args: &["solve", "pc3.json", "--out", "$OUT/solution.json"],
        expect_exit: 0,
        outputs: &["solution.json"],
    },
    Case {
        name: "solve_pc_budget",
        args: &["solve", "pc_budget.json", "--out", "$OUT/solution.json"],
        expect_exit: 0,
        outputs: &["solution.json"],
    },
    Case {
        name: "solve_ql4",
        args: &["solve", "ql4.json", "--out", "$OUT/solution.json"],
        expect_exit: 0,
        outputs: &["solution.json"],
    },
    Case {
        name: "solve_ql4_eta1",
        args: &[
            "solve",
            "ql4.json",
            "--eta",
            "1",
            "--out",
            "$OUT/solution.json",
        ],
        expect_exit: 0,
        outputs: &["solution.json"],
    },
    Case {
        name: "sweep_pc3",
        args: &[
            "sweep",
            "pc3.json",
            "--lo",
            "0.2",
            "--hi",
            "1.8",
            "--points",
            "9",
            "--refine",
            "3",
            "--trace",
            "$OUT/trace.csv",
        ],
        expect_exit: 0,
        outputs: &["trace.csv"],
    },
    Case {
        name: "sweep_pc_budget",
        args: &[
            "sweep",
            "pc_budget.json",
            "--trace",
            "$OUT/trace.csv",
            "--out",
            "$OUT/solution.json",
        ],
        expect_exit: 0,
        outputs: &["trace.csv", "solution.json"],
    },
    Case {
        name: "sweep_ql4",
        args: &[
            "sweep",
            "ql4.json",
            "--lo",
            "0.5",
            "--hi",
            "10",
            "--points",
            "20",
            "--refine",
            "3",
            "--trace",
            "$OUT/trace.csv",
        ],
        expect_exit: 0,
        outputs: &["trace.csv"],
    },
    Case {
        name: "verify_pc3",
        args: &["verify", "pc3.json"],
        expect_exit: 0,
        outputs: &[],
    },
    Case {
        name: "verify_pc3_eta1",
        args: &["verify", "pc3.json", "--eta", "1"],
        expect_exit: 0,
        outputs: &[],
    },
    Case {
        name: "verify_pc_budget",
        args: &["verify", "pc_budget.json"],
        expect_exit: 0,
        outputs: &[],
    },
    Case {
        name: "verify_ql4",
        args: &["verify", "ql4.json"],
        expect_exit: 0,
        outputs: &[],
    },
    Case {
        name: "verify_ql4_eta1",
        args: &["verify", "ql4.json", "--eta", "1"],
        expect_exit: 0,
        outputs: &[],
    },
    Case {
        name: "audit_pc3",
        args: &["audit", "pc3.json"],
        expect_exit: 0,
        outputs: &[],
    },
    Case {
        name: "audit_pc_budget",
        args: &["audit", "pc_budget.json", "--grid", "0.2,5,50"],
        expect_exit: 0,
        outputs: &[],
    },
    Case {
        name: "audit_pc_budget_erin",
        args: &[
            "audit",
            "pc_budget.json",
            "--agent",
            "erin",
            "--mode",
            "fixed-eta",
        ],
        expect_exit: 0,
        outputs: &[],
    },
    Case {
        name: "audit_ql4",
        args: &["audit", "ql4.json"],
        expect_exit: 2,
        outputs: &[],
    },
    Case {
        name: "exit_infeasible_pc",
        args: &["solve", "pc3.json", "--eta", "1.9"],
        expect_exit: 1,
        outputs: &[],
    },
    Case {
        name: "exit_infeasible_ql",
        args: &["solve", "ql4.json", "--eta", "0.3"],
        expect_exit: 1,
        outputs: &[],
    },
    Case {
        name: "exit_malformed",
        args: &["solve", "malformed.json"],
        expect_exit: 2,
        outputs: &[],
    },
    Case {
        name: "exit_zero_tau",
        args: &["solve", "zero_tau.json"],
        expect_exit: 2,
        outputs: &[],
    },
    Case {
        name: "exit_missing_file",
        args: &["verify", "absent.json"],
        expect_exit: 2,
        outputs: &[],
    },
    Case {
        name: "exit_bad_flag",
        args: &[
            "sweep",
            "pc3.json",
            "--points",
            "many",
            "--trace",
            "$OUT/trace.csv",
        ],
        expect_exit: 2,
        outputs: &[],
    },
    Case {
        name: "exit_verify_fails",
        args: &["verify", "pc_budget.json", "--tol", "1e-30"],
        expect_exit: 3,
        outputs: &[],
    },
];

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn data_dir() -> PathBuf {
    manifest_dir().join("tests").join("data")
}

pub fn golden_dir() -> PathBuf {
    manifest_dir().join("tests").join("golden")
}

/// Runs one case and renders everything it produced as a single text
/// block: the command, exit code, stdout, stderr and output files.
pub fn render(case: &Case) -> (i32, String) {
    let out_dir = tempfile::tempdir().expect("tempdir");
    let out = out_dir.path().to_str().expect("utf-8 temp path");
    let args: Vec<String> = case.args.iter().map(|a| a.replace("$OUT", out)).collect();
    let output = Command::new(env!("CARGO_BIN_EXE_dpacq"))
        .args(&args)
        .current_dir(data_dir())
        .env_remove("DPACQ_TOL")
        .output()
        .expect("spawn dpacq");
    let code = output.status.code().unwrap_or(-1);
    let mut text = format!("$ dpacq {}\nexit: {code}\n", case.args.join(" "));
    text.push_str("--- stdout\n");
    text.push_str(&String::from_utf8_lossy(&output.stdout).replace(out, "$OUT"));
    text.push_str("--- stderr\n");
    text.push_str(&String::from_utf8_lossy(&output.stderr).replace(out, "$OUT"));
    for name in case.outputs {
        text.push_str(&format!("--- $OUT/{name}\n"));
        match std::fs::read_to_string(Path::new(out).join(name)) {
            Ok(body) => text.push_str(&body),
            Err(e) => text.push_str(&format!("<missing: {e}>\n")),
        }
    }
    (code, text)
}

/// Compares a case against its golden file byte for byte.
pub fn check(case: &Case) -> Result<(), String> {
    let (code, text) = render(case);
    let path = golden_dir().join(format!("{}.txt", case.name));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &text).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if code != case.expect_exit {
        return Err(format!(
            "{}: exit code {code}, expected {}",
            case.name, case.expect_exit
        ));
    }
    let golden = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if golden != text {
        let line = golden
            .lines()
            .zip(text.lines())
            .position(|(a, b)| a != b)
            .unwrap_or_else(|| golden.lines().count().min(text.lines().count()));
        return Err(format!(
            "{}: output differs from golden at line {}",
            case.name,
            line + 1
        ));
    }
    Ok(())
}
