use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{acquisition_str, parse_acquisition, ExperimentSpec, ResultRow};
use crate::error::{Error, Result};
use crate::learn::{Metrics, RepetitionReport};

pub const CSV_HEADER: &str = "mode,stats,calib_phantom,acquisition,snr,mean_acc,std_acc,mean_auc,std_auc,n_reps";

pub fn render_report(rows: &[ResultRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut s = String::new();
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let (spec, rep) = (&r.spec, &r.report);
        // `{:.4}` always uses '.', independent of locale
        writeln!(
            s,
            "{},{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{}",
            spec.mode,
            spec.stats,
            spec.calib_phantom,
            acquisition_str(spec.acquisition),
            spec.snr,
            rep.mean_accuracy,
            rep.std_accuracy,
            rep.mean_auc,
            rep.std_auc,
            rep.n_repetitions
        )
        .unwrap();
    }
    Ok(s)
}

/// Writes the rows as CSV, in the order given.
pub fn cmd_report(rows: &[ResultRow], out_csv: &Path) -> Result<()> {
    let text = render_report(rows)?;
    fs::write(out_csv, text).map_err(|e| Error::io(format!("writing {}", out_csv.display()), e))
}

/// Parses a report back; per-run metrics are not stored and come back empty.
pub fn parse_report(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::BadConfig("report header does not match".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 10 {
                return Err(Error::BadConfig(format!("report row has {} fields: {line}", f.len())));
            }
            let num = |i: usize| -> Result<f64> {
                f[i].parse()
                    .map_err(|_| Error::BadConfig(format!("bad number {:?} in report", f[i])))
            };
            let n_reps: usize = f[9]
                .parse()
                .map_err(|_| Error::BadConfig(format!("bad repetition count {:?}", f[9])))?;
            Ok(ResultRow {
                spec: ExperimentSpec {
                    mode: f[0].parse()?,
                    stats: f[1].parse()?,
                    calib_phantom: f[2].parse()?,
                    acquisition: parse_acquisition(f[3])?,
                    snr: num(4)?,
                    n_repetitions: n_reps,
                    seed: 0,
                },
                report: RepetitionReport {
                    mean_accuracy: num(5)?,
                    std_accuracy: num(6)?,
                    mean_auc: num(7)?,
                    std_auc: num(8)?,
                    n_repetitions: n_reps,
                    per_run: Vec::<Metrics>::new(),
                },
            })
        })
        .collect()
}
