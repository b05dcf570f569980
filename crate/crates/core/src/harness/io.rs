use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::json;

use super::{HarnessError, RunResult, SweepPoint};
use crate::diagnostics::TrajectoryRow;

pub const CSV_HEADER: &str = "iter,loss,minibatch_loss,grad_norm,g_norm,beta_hat,mhat_norm,alpha,wall_ns";

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// 17 significant digits, which round-trips every `f64`.
fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        // `NaN`, `inf`, `-inf` all parse back through `str::parse`
        v.to_string()
    }
}

pub fn write_csv<W: Write>(rows: &[TrajectoryRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.iter,
            fmt_f64(r.loss),
            fmt_f64(r.minibatch_loss),
            fmt_f64(r.grad_norm),
            fmt_f64(r.g_norm),
            fmt_f64(r.beta_hat),
            fmt_f64(r.mhat_norm),
            fmt_f64(r.alpha),
            r.wall_ns
        )?;
    }
    out.flush()
}

pub fn emit_csv(rows: &[TrajectoryRow], path: &Path) -> Result<(), HarnessError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    write_csv(rows, BufWriter::new(file)).map_err(io_err(path))
}

/// Parses a file produced by [`write_csv`].
pub fn parse_csv<R: BufRead>(input: R) -> Result<Vec<TrajectoryRow>, String> {
    let mut lines = input.lines();
    match lines.next() {
        Some(Ok(h)) if h == CSV_HEADER => {}
        Some(Ok(h)) => return Err(format!("unexpected header `{h}`")),
        Some(Err(e)) => return Err(e.to_string()),
        None => return Err("empty file".into()),
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(format!("line {}: expected 9 fields, found {}", k + 2, fields.len()));
        }
        let f = |i: usize| -> Result<f64, String> {
            fields[i]
                .parse()
                .map_err(|_| format!("line {}: bad number `{}`", k + 2, fields[i]))
        };
        let u = |i: usize| -> Result<u64, String> {
            fields[i]
                .parse()
                .map_err(|_| format!("line {}: bad integer `{}`", k + 2, fields[i]))
        };
        rows.push(TrajectoryRow {
            iter: u(0)? as usize,
            loss: f(1)?,
            minibatch_loss: f(2)?,
            grad_norm: f(3)?,
            g_norm: f(4)?,
            beta_hat: f(5)?,
            mhat_norm: f(6)?,
            alpha: f(7)?,
            wall_ns: u(8)?,
        });
    }
    Ok(rows)
}

/// `{"config_hash", "trials", "bound_reports"}`.
pub fn summary_json(result: &RunResult) -> serde_json::Value {
    let (mean, std) = result.final_loss_stats();
    json!({
        "config_hash": result.config_hash,
        "trials": result.trials,
        "bound_reports": result.merged_reports(),
        "final_loss_mean": mean,
        "final_loss_std": std,
    })
}

fn write_json(value: &serde_json::Value, path: &Path) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).expect("summary serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Writes `trial_<k>.csv` for every trial and `summary.json` into `dir`.
pub fn write_outputs(result: &RunResult, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for t in &result.trials {
        let path = dir.join(format!("trial_{}.csv", t.trial));
        emit_csv(&t.trajectory.rows, &path)?;
        written.push(path);
    }
    let path = dir.join("summary.json");
    write_json(&summary_json(result), &path)?;
    written.push(path);
    Ok(written)
}

/// One CSV per grid point and trial, plus a `summary.json` with one row per
/// grid point.
pub fn write_sweep_outputs(points: &[SweepPoint], config_hash: &str, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    let mut rows = Vec::new();
    for p in points {
        for t in &p.result.trials {
            let path = dir.join(format!("{}_trial_{}.csv", p.label, t.trial));
            emit_csv(&t.trajectory.rows, &path)?;
            written.push(path);
        }
        let (mean, std) = p.result.final_loss_stats();
        rows.push(json!({
            "label": p.label,
            "optimizer": p.optimizer,
            "alpha0": p.alpha0,
            "config_hash": p.result.config_hash,
            "final_loss_mean": mean,
            "final_loss_std": std,
            "bound_reports": p.result.merged_reports(),
        }));
    }
    let path = dir.join("summary.json");
    write_json(&json!({"config_hash": config_hash, "rows": rows}), &path)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(iter: usize, x: f64) -> TrajectoryRow {
        TrajectoryRow {
            iter,
            loss: x,
            minibatch_loss: x / 3.0,
            grad_norm: std::f64::consts::PI * x,
            g_norm: 1e-300 * x,
            beta_hat: f64::NAN,
            mhat_norm: f64::INFINITY,
            alpha: 0.1,
            wall_ns: 17,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let rows: Vec<_> = (1..=5).map(|k| row(k, 1.0 / k as f64)).collect();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), 6);
        let back = parse_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            assert!(a.same_numbers(b));
            assert_eq!(a.wall_ns, b.wall_ns);
        }
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_csv(&b"a,b\n"[..]).is_err());
        let bad = format!("{CSV_HEADER}\n1,2,3\n");
        assert!(parse_csv(bad.as_bytes()).is_err());
    }
}
