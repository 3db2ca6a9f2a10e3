//! `param_history.csv`: one row per attempted continuation step.

use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::homotopy::SolveTrace;

pub const HISTORY_HEADER: &str = "it,t,mu";

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("trace is empty")]
    EmptyTrace,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub it: usize,
    pub t: f64,
    pub mu: f64,
}

pub fn format_param_history(trace: &SolveTrace) -> Result<String, HistoryError> {
    if trace.is_empty() {
        return Err(HistoryError::EmptyTrace);
    }
    let mut out = String::with_capacity(32 * (trace.len() + 1));
    out.push_str(HISTORY_HEADER);
    out.push('\n');
    for rec in &trace.records {
        let mu = rec.mu.unwrap_or(f64::NAN);
        out.push_str(&format!("{},{:?},{:?}\n", rec.index, rec.t, mu));
    }
    Ok(out)
}

pub fn write_param_history(trace: &SolveTrace, path: &Path) -> Result<(), HistoryError> {
    let text = format_param_history(trace)?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}

pub fn parse_param_history(text: &str) -> Result<Vec<HistoryRow>, HistoryError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HISTORY_HEADER => {}
        Some((_, h)) => {
            return Err(HistoryError::Parse {
                line: 1,
                message: format!("expected header `{HISTORY_HEADER}`, got `{h}`"),
            })
        }
        None => {
            return Err(HistoryError::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let bad = |message: String| HistoryError::Parse { line, message };
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        let [it, t, mu] = fields[..] else {
            return Err(bad(format!("expected 3 fields, got {}", fields.len())));
        };
        let it: usize = it.parse().map_err(|_| bad(format!("bad iteration `{it}`")))?;
        if it != rows.len() + 1 {
            return Err(bad(format!("iteration {it} out of sequence")));
        }
        let t: f64 = t.parse().map_err(|_| bad(format!("bad t `{t}`")))?;
        let mu: f64 = mu.parse().map_err(|_| bad(format!("bad mu `{mu}`")))?;
        rows.push(HistoryRow { it, t, mu });
    }
    Ok(rows)
}

pub fn read_param_history(path: &Path) -> Result<Vec<HistoryRow>, HistoryError> {
    parse_param_history(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homotopy::TraceRecord;
    use proptest::prelude::*;

    fn record(index: usize, t: f64, mu: f64, accepted: bool) -> TraceRecord {
        TraceRecord {
            index,
            t,
            dt: 0.25,
            mu: Some(mu),
            newton_iters: 3,
            residual_norm: 1e-10,
            accepted,
            predictor_fallback: false,
            divergence: None,
        }
    }

    #[test]
    fn two_rows_give_three_lines() {
        let trace = SolveTrace {
            records: vec![record(1, 0.25, 37.50025, true), record(2, 0.5, 25.0005, false)],
        };
        let text = format_param_history(&trace).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(text.lines().next(), Some("it,t,mu"));
        assert_eq!(text.lines().nth(1), Some("1,0.25,37.50025"));
    }

    #[test]
    fn empty_trace_is_an_error() {
        assert!(matches!(
            format_param_history(&SolveTrace::default()),
            Err(HistoryError::EmptyTrace)
        ));
    }

    #[test]
    fn written_file_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("param_history.csv");
        let trace = SolveTrace {
            records: vec![record(1, 0.1, 1.0 / 3.0, true)],
        };
        write_param_history(&trace, &path).unwrap();
        let rows = read_param_history(&path).unwrap();
        assert_eq!(rows, vec![HistoryRow { it: 1, t: 0.1, mu: 1.0 / 3.0 }]);
    }

    #[test]
    fn reader_rejects_malformed() {
        assert!(parse_param_history("").is_err());
        assert!(parse_param_history("i,t,mu\n").is_err());
        assert!(parse_param_history("it,t,mu\n2,0.1,1\n").is_err());
        assert!(parse_param_history("it,t,mu\n1,0.1\n").is_err());
        assert!(parse_param_history("it,t,mu\n1,x,1\n").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(values in prop::collection::vec((0.0f64..=1.0, 1e-6f64..1e3), 1..30)) {
            let trace = SolveTrace {
                records: values
                    .iter()
                    .enumerate()
                    .map(|(i, &(t, mu))| record(i + 1, t, mu, i % 3 != 0))
                    .collect(),
            };
            let rows = parse_param_history(&format_param_history(&trace).unwrap()).unwrap();
            prop_assert_eq!(rows.len(), values.len());
            for (row, (t, mu)) in rows.iter().zip(values) {
                prop_assert_eq!(row.t, t);
                prop_assert_eq!(row.mu, mu);
            }
        }
    }
}
