use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::run::{ConvergenceReport, ExperimentRun, TheorySummary};
use crate::error::{Error, Result};
use crate::shotnoise::centralize_scale;

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::from(e).context(path.display().to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn write_report(report: &ConvergenceReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("report.json"), report)
}

pub fn read_report(path: &Path) -> Result<ConvergenceReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
    Ok(serde_json::from_str(&text)?)
}

/// `theory.json` plus `theory.csv` with the limit CF on the test grid.
pub fn write_theory(theory: &TheorySummary, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("theory.json"), theory)?;
    let mut out = create(&dir.join("theory.csv"))?;
    writeln!(out, "t,re,im")?;
    for (t, c) in &theory.cf_grid {
        writeln!(out, "{t},{},{}", c.re, c.im)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Timing<'a> {
    lambdas: &'a [f64],
    seconds: &'a [f64],
    total: f64,
}

/// Writes `report.json`, `samples.csv`, `theory.csv`, `timing.json` and the
/// `plotdata/` tables into `dir`.
pub fn write_outputs(run: &ExperimentRun, dir: &Path) -> Result<()> {
    let report = &run.report;
    let config = &report.config;
    write_report(report, dir)?;
    write_theory(&report.theory, dir)?;

    let response = config.response_fn()?;
    let query = config.fdd_query()?;
    let plot = dir.join("plotdata");
    fs::create_dir_all(&plot)?;

    let mut samples = create(&dir.join("samples.csv"))?;
    writeln!(samples, "replicate_id,lambda,z_index,I,I_tilde")?;
    let mut variance = create(&plot.join("variance.csv"))?;
    writeln!(variance, "lambda,empirical,theory,relative_gap")?;
    let mut ecf = create(&plot.join("ecf.csv"))?;
    writeln!(ecf, "lambda,t,ecf_re,ecf_im,theory_re,theory_im")?;

    for (index, (raw, row)) in run.samples.iter().zip(&report.rows).enumerate() {
        let lambda = row.lambda;
        let mut combined = Vec::with_capacity(raw.len());
        for (k, values) in raw.iter().enumerate() {
            let tilde = centralize_scale(values, lambda, &config.amplitudes, &response);
            for (j, (i, t)) in values.iter().zip(&tilde).enumerate() {
                writeln!(samples, "{k},{lambda},{j},{i},{t}")?;
            }
            combined.push(query.combine(&tilde));
        }
        let j = &row.joint;
        writeln!(
            variance,
            "{lambda},{},{},{}",
            j.empirical_variance,
            j.theory_variance.map_or(String::new(), |v| v.to_string()),
            row.variance_gap.map_or(String::new(), |v| v.to_string()),
        )?;
        for ((t, e), th) in j.ts.iter().zip(&j.ecf).zip(&j.theory_cf) {
            writeln!(ecf, "{lambda},{t},{},{},{},{}", e.re, e.im, th.re, th.im)?;
        }
        combined.sort_by(f64::total_cmp);
        let n = combined.len() as f64;
        let mut ecdf = create(&plot.join(format!("ecdf_{index}.csv")))?;
        writeln!(ecdf, "value,probability")?;
        for (k, v) in combined.iter().enumerate() {
            writeln!(ecdf, "{v},{}", (k + 1) as f64 / n)?;
        }
        ecdf.flush()?;
    }
    samples.flush()?;
    variance.flush()?;
    ecf.flush()?;

    write_json(
        &dir.join("timing.json"),
        &Timing {
            lambdas: &config.lambdas,
            seconds: &run.seconds,
            total: run.seconds.iter().sum(),
        },
    )
}
