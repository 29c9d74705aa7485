//! Deterministic report emission: identical reports serialize to identical
//! bytes (fixed field order, 12-digit numeric formatting, LF endings).

use otlimits_core::limits::{LiminfRow, SweepReport};
use std::fmt::Write as _;

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.12}")
    } else {
        format!("{v}")
    }
}

/// CSV table for a sweep: n, scaled_value, gap (to the previous level), rate.
pub fn emit_table(report: &SweepReport) -> String {
    let mut out = String::from("n,scaled_value,gap,rate\n");
    for (k, (&n, &v)) in report
        .n_values
        .iter()
        .zip(&report.scaled_values)
        .enumerate()
    {
        let gap = if k == 0 {
            f64::NAN
        } else {
            v - report.scaled_values[k - 1]
        };
        let gap = if gap.is_nan() { String::new() } else { num(gap) };
        let rate = if k + 1 == report.n_values.len() {
            num(report.observed_rate)
        } else {
            String::new()
        };
        let _ = writeln!(out, "{n},{},{gap},{rate}", num(v));
    }
    out
}

/// Two-column data file (n, scaled value) for external plotting.
pub fn emit_plotdata(report: &SweepReport) -> String {
    let mut out = String::new();
    for (&n, &v) in report.n_values.iter().zip(&report.scaled_values) {
        let _ = writeln!(out, "{n} {}", num(v));
    }
    out
}

/// CSV table for liminf margin rows.
pub fn emit_liminf_table(rows: &[LiminfRow]) -> String {
    let mut out = String::from("n,f_n,lower_bound,margin,slack\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.n,
            num(r.f_n),
            num(r.lower_bound),
            num(r.margin),
            num(r.slack)
        );
    }
    out
}

/// CSV table of measure weights by grid index.
pub fn emit_weights_table(weights: &[f64]) -> String {
    let mut out = String::from("index,weight\n");
    for (i, w) in weights.iter().enumerate() {
        let _ = writeln!(out, "{i},{}", num(*w));
    }
    out
}
