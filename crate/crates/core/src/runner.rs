//! Subcommand implementations shared by the CLI and the test suites.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::closedform::{ModelKind, TrajectoryRecord};
use crate::config::{Experiment, Product};
use crate::diagnostics::{
    convergence_study, timechange_equivalence_test, verify_run, ConvergenceRow, EnsembleSummary, Report,
    TimechangeResult,
};
use crate::ensemble::{full_records, run_ensemble};
use crate::error::{Error, Result};

/// Tolerance on the finest-grid time-change discrepancy.
pub const TIMECHANGE_TOLERANCE: f64 = 1e-2;

/// Command-line overrides of the config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub threads: Option<usize>,
}

impl Overrides {
    fn seed(&self, exp: &Experiment) -> u64 {
        self.seed.unwrap_or(exp.config.ensemble.seed)
    }

    fn paths(&self, default: usize) -> usize {
        self.paths.unwrap_or(default)
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trajectory_csv(records: &[TrajectoryRecord], indices: Option<&[usize]>) -> String {
    let n_levels = records.first().map_or(0, |r| r.pi.len());
    let mut out = String::from("path_index,t,xi,H,V,S,W");
    for i in 0..n_levels {
        let _ = write!(out, ",pi_{i}");
    }
    out.push('\n');
    for (p, r) in records.iter().enumerate() {
        let all: Vec<usize>;
        let idx = match indices {
            Some(i) => i,
            None => {
                all = (0..r.grid.len()).collect();
                &all
            }
        };
        for &k in idx {
            let _ = write!(
                out,
                "{p},{},{},{},{},{},{}",
                fmt_f64(r.grid.time(k)),
                fmt_f64(r.xi[k]),
                fmt_f64(r.h[k]),
                fmt_f64(r.v[k]),
                fmt_f64(r.s[k]),
                fmt_f64(r.w[k])
            );
            for level in &r.pi {
                let _ = write!(out, ",{}", fmt_f64(level[k]));
            }
            out.push('\n');
        }
    }
    out
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    let mut out = String::from(
        "steps,dt,rms_state_error,order,rms_density_error,density_order,rms_density_error_left_point,density_order_left_point\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.steps,
            fmt_f64(r.dt),
            fmt_f64(r.rms_state_error),
            opt(r.state_order),
            fmt_f64(r.rms_density_error),
            opt(r.density_order),
            fmt_f64(r.rms_density_error_left_point),
            opt(r.density_order_left_point)
        );
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryDocument<'a> {
    pub seed: u64,
    pub config_hash: String,
    #[serde(flatten)]
    pub summary: &'a EnsembleSummary,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Everything a `simulate` run produced.
#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub summary: EnsembleSummary,
    pub report: Option<Report>,
    pub files: Vec<PathBuf>,
}

/// Runs the ensemble and writes the products selected in the config to `out_dir`.
pub fn simulate(exp: &Experiment, ov: &Overrides, out_dir: &Path) -> Result<SimulateOutput> {
    let seed = ov.seed(exp);
    let n_paths = ov.paths(exp.config.ensemble.paths);
    fs::create_dir_all(out_dir)?;
    let products = &exp.config.output.products;
    let mut files = Vec::new();

    if products.contains(&Product::Trajectories) {
        let n = exp.config.output.trajectory_paths.min(n_paths);
        let records = full_records(exp, n, seed, ov.threads)?;
        let idx = exp.output_indices()?;
        let indices = if exp.config.output.full_resolution { None } else { Some(idx.as_slice()) };
        let path = out_dir.join("trajectories.csv");
        fs::write(&path, trajectory_csv(&records, indices))?;
        files.push(path);
    }

    let run = run_ensemble(exp, n_paths, seed, ov.threads)?;
    let summary = EnsembleSummary::from_run(exp, &run);
    if products.contains(&Product::Summary) {
        let path = out_dir.join("summary.json");
        write_json(
            &path,
            &SummaryDocument {
                seed,
                config_hash: exp.config.hash(),
                summary: &summary,
            },
        )?;
        files.push(path);
    }
    let report = if products.contains(&Product::Verify) {
        let report = Report::new(seed, exp.config.hash(), n_paths, verify_run(exp, &run, seed)?);
        let path = out_dir.join("report.json");
        write_json(&path, &report)?;
        files.push(path);
        Some(report)
    } else {
        None
    };
    Ok(SimulateOutput {
        summary,
        report,
        files,
    })
}

/// Runs the ensemble and the full verification suite.
pub fn verify(exp: &Experiment, ov: &Overrides) -> Result<Report> {
    let seed = ov.seed(exp);
    let n_paths = ov.paths(exp.config.ensemble.paths);
    let run = run_ensemble(exp, n_paths, seed, ov.threads)?;
    Ok(Report::new(seed, exp.config.hash(), n_paths, verify_run(exp, &run, seed)?))
}

pub fn write_report(report: &Report, out_dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("report.json");
    write_json(&path, report)?;
    Ok(path)
}

/// Euler-vs-closed-form refinement study on the config's asymptotic model.
pub fn convergence(exp: &Experiment, ov: &Overrides) -> Result<Vec<ConvergenceRow>> {
    let ModelKind::Asymptotic { sigma } = exp.model else {
        return Err(Error::Config("convergence runs on the asymptotic model".into()));
    };
    let cfg = &exp.config.convergence;
    let n_paths = ov.paths(cfg.paths.unwrap_or(exp.config.ensemble.paths));
    convergence_study(
        &exp.spectrum,
        &exp.psi0,
        &exp.dec,
        sigma,
        exp.grid.t_end,
        &cfg.steps,
        n_paths,
        ov.seed(exp),
        ov.threads,
    )
}

/// Time-change equivalence on the config's finite-time model.
pub fn timechange(exp: &Experiment, ov: &Overrides) -> Result<TimechangeResult> {
    let ModelKind::FiniteTime { sigma, horizon } = exp.model else {
        return Err(Error::Config("timechange runs on the finite_time model".into()));
    };
    let cfg = &exp.config.timechange;
    let n_paths = ov.paths(cfg.paths.unwrap_or(exp.config.ensemble.paths));
    timechange_equivalence_test(
        &exp.spectrum,
        &exp.dec,
        sigma,
        horizon,
        &cfg.steps,
        cfg.horizon_fraction,
        n_paths,
        ov.seed(exp),
        ov.threads,
        TIMECHANGE_TOLERANCE,
    )
}

pub fn write_timechange(result: &TimechangeResult, out_dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("timechange.json");
    write_json(&path, result)?;
    Ok(path)
}

pub fn write_convergence(rows: &[ConvergenceRow], out_dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("convergence.csv");
    fs::write(&path, convergence_csv(rows))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
    }
}
