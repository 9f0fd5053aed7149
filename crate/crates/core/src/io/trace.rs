use std::path::Path;

use crate::error::{Error, Result};
use crate::model::TracePoint;

const HEADER: [&str; 3] = ["eta", "objective", "pool_size"];

/// CSV text for a sweep trace: header `eta,objective,pool_size`, rows sorted
/// by ascending `eta`, reals in `{:.16e}` (17 significant digits), LF line
/// endings, one LF after the last row.
pub fn trace_csv_string(trace: &[TracePoint]) -> Result<String> {
    if trace.is_empty() {
        return Err(Error::domain("cannot emit an empty trace"));
    }
    let mut rows = trace.to_vec();
    rows.sort_by(|a, b| a.eta.total_cmp(&b.eta));
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    wtr.write_record(HEADER)?;
    for p in &rows {
        wtr.write_record([
            format!("{:.16e}", p.eta),
            format!("{:.16e}", p.objective),
            p.pool_size.to_string(),
        ])?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("ascii"))
}

pub fn emit_trace_csv(trace: &[TracePoint], path: impl AsRef<Path>) -> Result<()> {
    let text = trace_csv_string(trace)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<Vec<TracePoint>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != HEADER {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: format!(
                "expected header {}, got {}",
                HEADER.join(","),
                header.join(",")
            ),
        });
    }
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |col: usize, what: &str| Error::Parse {
            line: k + 2,
            column: col,
            message: format!("invalid {what}"),
        };
        let field = |i: usize| rec.get(i).unwrap_or_default();
        out.push(TracePoint {
            eta: field(0).parse().map_err(|_| bad(1, "eta"))?,
            objective: field(1).parse().map_err(|_| bad(2, "objective"))?,
            pool_size: field(2).parse().map_err(|_| bad(3, "pool_size"))?,
        });
    }
    Ok(out)
}
