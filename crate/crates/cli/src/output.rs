//! CSV emitters. All floats are written with 17 significant digits so runs
//! are byte-reproducible and lossless to read back.

use nexcp_core::experiments::{ExperimentReport, Method, MethodSummary, rolling_mean};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_results(path: &Path, reports: &[ExperimentReport]) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "trial,time,method,covered,width")?;
    for (trial, report) in reports.iter().enumerate() {
        for r in &report.records {
            writeln!(
                w,
                "{},{},{},{},{}",
                trial + 1,
                r.time,
                r.method.label(),
                u8::from(r.covered),
                fmt_f64(r.width)
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(path: &Path, summaries: &[MethodSummary]) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "method,mean_coverage,mean_width")?;
    for s in summaries {
        writeln!(
            w,
            "{},{},{}",
            s.method.label(),
            fmt_f64(s.mean_coverage),
            fmt_f64(s.mean_width)
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Rolling means of the trial-averaged per-step coverage and width. The
/// time column is the last step inside each trailing window.
pub fn write_rolling(
    path: &Path,
    reports: &[ExperimentReport],
    methods: &[Method],
    window: usize,
) -> anyhow::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "time,method,rolling_coverage,rolling_width")?;
    let mut blocks = Vec::new();
    for &method in methods {
        let times: Vec<usize> = reports[0]
            .records
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.time)
            .collect();
        let mut cov = vec![0.0; times.len()];
        let mut wid = vec![0.0; times.len()];
        for report in reports {
            for (j, r) in report
                .records
                .iter()
                .filter(|r| r.method == method)
                .enumerate()
            {
                cov[j] += if r.covered { 1.0 } else { 0.0 };
                wid[j] += r.width;
            }
        }
        let t = reports.len() as f64;
        cov.iter_mut().for_each(|v| *v /= t);
        wid.iter_mut().for_each(|v| *v /= t);
        let roll_cov = rolling_mean(&cov, window)?;
        let roll_wid = rolling_mean(&wid, window)?;
        blocks.push((method, times, roll_cov, roll_wid));
    }
    for (method, times, roll_cov, roll_wid) in blocks {
        for (j, (c, wd)) in roll_cov.iter().zip(&roll_wid).enumerate() {
            writeln!(
                w,
                "{},{},{},{}",
                times[window - 1 + j],
                method.label(),
                fmt_f64(*c),
                fmt_f64(*wd)
            )?;
        }
    }
    w.flush()?;
    Ok(())
}
