use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use tvhom::json::{fmt_f64, to_string_pretty};
use tvhom::verify::{CheckStatus, LemmaReport};

fn sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> io::Result<()> {
    let text = to_string_pretty(value).map_err(io::Error::other)?;
    let mut w = sink(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()
}

fn csv_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        fmt_f64(x)
    }
}

/// One row per check: `instance_id,check,lhs,rhs,margin,status`.
pub fn write_check_csv(path: Option<&Path>, reports: &[LemmaReport]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(sink(path)?);
    w.write_record(["instance_id", "check", "lhs", "rhs", "margin", "status"])?;
    for r in reports {
        for c in &r.checks {
            let status = match c.status {
                CheckStatus::Pass => "pass",
                CheckStatus::Fail => "fail",
                CheckStatus::Skip => "skip",
            };
            w.write_record([
                r.instance_id.to_string(),
                c.name.clone(),
                csv_f64(c.lhs),
                csv_f64(c.rhs),
                csv_f64(c.margin),
                status.to_string(),
            ])?;
        }
    }
    w.flush()
}
