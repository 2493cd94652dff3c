//! Per-step metrics CSV.
//!
//! One row per recorded step `t = 0..T−1` plus a final row `t = T` for the
//! output iterate, whose estimator and residual columns are empty. Reals are
//! written with 17 significant digits so identical runs give identical bytes.

use std::io::{self, BufRead, Write};

use anyhow::{anyhow, Context};
use ecx_core::RunTrace;

pub const HEADER: &str =
    "step,loss,grad_norm_sq,v_norm,worker_delta_norm,server_delta_norm,ghost_residual_norm,cum_bits";

/// `x` with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

pub fn write_csv<W: Write>(trace: &RunTrace, mut out: W) -> io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for r in &trace.records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.t,
            fmt17(r.loss),
            fmt17(r.grad_norm_sq),
            fmt17(r.v_norm),
            fmt17(r.worker_delta_norm),
            fmt17(r.server_delta_norm),
            opt(r.ghost_residual_norm),
            r.cum_bits
        )?;
    }
    let bits = trace.records.last().map_or(0, |r| r.cum_bits);
    writeln!(
        out,
        "{},{},{},,,,{},{}",
        trace.t_effective,
        fmt17(trace.final_loss),
        fmt17(trace.final_grad_norm_sq),
        opt(trace.final_ghost_residual_norm),
        bits
    )
}

pub fn csv_bytes(trace: &RunTrace) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(trace, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

/// One parsed CSV row; empty cells are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub step: u64,
    pub loss: f64,
    pub grad_norm_sq: f64,
    pub v_norm: Option<f64>,
    pub worker_delta_norm: Option<f64>,
    pub server_delta_norm: Option<f64>,
    pub ghost_residual_norm: Option<f64>,
    pub cum_bits: u64,
}

pub fn read_csv<R: BufRead>(input: R) -> anyhow::Result<Vec<MetricsRow>> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| anyhow!("empty metrics file"))??;
    if header != HEADER {
        return Err(anyhow!("unexpected header {header:?}"));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 8 {
            return Err(anyhow!("line {lineno}: expected 8 fields, got {}", cells.len()));
        }
        let real = |j: usize| -> anyhow::Result<Option<f64>> {
            if cells[j].is_empty() {
                return Ok(None);
            }
            cells[j]
                .parse()
                .map(Some)
                .with_context(|| format!("line {lineno}, field {}", j + 1))
        };
        let required = |j: usize| -> anyhow::Result<f64> {
            real(j)?.ok_or_else(|| anyhow!("line {lineno}: field {} is empty", j + 1))
        };
        rows.push(MetricsRow {
            step: cells[0].parse().with_context(|| format!("line {lineno}, field 1"))?,
            loss: required(1)?,
            grad_norm_sq: required(2)?,
            v_norm: real(3)?,
            worker_delta_norm: real(4)?,
            server_delta_norm: real(5)?,
            ghost_residual_norm: real(6)?,
            cum_bits: cells[7].parse().with_context(|| format!("line {lineno}, field 8"))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ecx_core::{run, AlphaSchedule, CompressorSpec, EstimatorKind, ProblemSpec, RunConfig, SchemeKind};

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2e-300, 123456.789, -7.0e15] {
            let s = fmt17(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn csv_round_trips_the_trace() {
        let mut cfg = RunConfig::new(
            ProblemSpec::default_linreg(),
            EstimatorKind::Momentum,
            AlphaSchedule::constant(0.2),
            0.01,
            30,
        )
        .with_compressor(CompressorSpec::one_bit())
        .with_scheme(SchemeKind::SingleCompensation, 0.5)
        .with_workers(2);
        cfg.record.ghost = true;
        let trace = run(&cfg).unwrap();
        let bytes = csv_bytes(&trace);
        let rows = read_csv(bytes.as_slice()).unwrap();
        assert_eq!(rows.len(), 31);
        for (row, rec) in rows.iter().zip(&trace.records) {
            assert_eq!(row.grad_norm_sq.to_bits(), rec.grad_norm_sq.to_bits());
            assert_eq!(row.worker_delta_norm, Some(rec.worker_delta_norm));
            assert_eq!(row.cum_bits, rec.cum_bits);
        }
        let last = rows.last().unwrap();
        assert_eq!(last.step, 30);
        assert_eq!(last.v_norm, None);
        assert_eq!(last.ghost_residual_norm, trace.final_ghost_residual_norm);
    }

    #[test]
    fn malformed_rows_report_the_line() {
        let text = format!("{HEADER}\n0,1,2,3,4,5,,6\n1,x,2,3,4,5,,6\n");
        let err = format!("{:#}", read_csv(text.as_bytes()).unwrap_err());
        assert!(err.contains("line 3"), "{err}");
    }
}
