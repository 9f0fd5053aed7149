use dpacq_core::Error;

pub const OK: u8 = 0;
pub const INFEASIBLE: u8 = 1;
pub const USAGE: u8 = 2;
pub const INCONSISTENT: u8 = 3;

/// Bad flag values caught by the CLI itself.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Exit code and machine-readable kind for an error chain.
pub fn classify(e: &anyhow::Error) -> (u8, &'static str) {
    for cause in e.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return (USAGE, "usage");
        }
        if cause.downcast_ref::<CheckFailed>().is_some() {
            return (INCONSISTENT, "check_failed");
        }
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::InfeasibleEta { .. } | Error::Infeasible(_) => (INFEASIBLE, "infeasible"),
                Error::Inconsistent(_) | Error::OracleFailure(_) | Error::Cancelled => {
                    (INCONSISTENT, "inconsistency")
                }
                Error::Parse { .. } | Error::Csv(_) => (USAGE, "parse"),
                Error::Schema { .. } => (USAGE, "schema"),
                Error::Domain(_) => (USAGE, "domain"),
                Error::Io(_) => (USAGE, "io"),
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return (USAGE, "io");
        }
    }
    (INCONSISTENT, "internal")
}

/// Verification or audit checks that ran but did not pass.
#[derive(Debug)]
pub struct CheckFailed(pub String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailed {}
