use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stats::Stat;
use crate::config::Experiment;
use crate::ensemble::{EnsembleRun, PathSummary};
use crate::spectrum::{initial_moments, InitialMoments};

/// Per-output-time ensemble statistics plus the terminal outcome table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_paths: usize,
    pub times: Vec<f64>,
    pub initial: InitialMoments,
    /// Series name → statistics at every output time.
    pub series: BTreeMap<String, Vec<Stat>>,
    /// Counts of the terminal level: the one-hot level at `T` in the
    /// finite-time model, the most probable level at `t_end` otherwise.
    pub terminal_frequencies: Vec<usize>,
    /// Counts of the drawn hidden energy.
    pub drawn_frequencies: Vec<usize>,
}

/// `series[j][p]` view of one per-path quantity.
pub fn transpose(paths: &[PathSummary], f: impl Fn(&PathSummary) -> &[f64]) -> Vec<Vec<f64>> {
    let m = paths.first().map_or(0, |p| f(p).len());
    (0..m).map(|j| paths.iter().map(|p| f(p)[j]).collect()).collect()
}

pub fn level_series(paths: &[PathSummary], level: usize) -> Vec<Vec<f64>> {
    let m = paths.first().map_or(0, |p| p.pi.len());
    (0..m)
        .map(|j| paths.iter().map(|p| p.pi[j][level]).collect())
        .collect()
}

pub fn observable_series(paths: &[PathSummary], variance: bool) -> Option<Vec<Vec<f64>>> {
    let first = paths.first()?.observable.as_ref()?;
    Some(
        (0..first.len())
            .map(|j| {
                paths
                    .iter()
                    .map(|p| {
                        let m = p.observable.as_ref().expect("observable on every path")[j];
                        if variance { m.variance } else { m.mean }
                    })
                    .collect()
            })
            .collect(),
    )
}

pub fn counts(levels: impl Iterator<Item = usize>, n_levels: usize) -> Vec<usize> {
    let mut c = vec![0; n_levels];
    for l in levels {
        c[l] += 1;
    }
    c
}

impl EnsembleSummary {
    pub fn from_run(exp: &Experiment, run: &EnsembleRun) -> Self {
        let stats = |s: Vec<Vec<f64>>| s.iter().map(|x| Stat::of(x)).collect::<Vec<_>>();
        let mut series = BTreeMap::new();
        series.insert("xi".to_string(), stats(transpose(&run.paths, |p| &p.xi)));
        series.insert("H".to_string(), stats(transpose(&run.paths, |p| &p.h)));
        series.insert("V".to_string(), stats(transpose(&run.paths, |p| &p.v)));
        series.insert("S".to_string(), stats(transpose(&run.paths, |p| &p.s)));
        series.insert("W".to_string(), stats(transpose(&run.paths, |p| &p.w)));
        let n_levels = exp.spectrum.n_levels();
        for i in 0..n_levels {
            series.insert(format!("pi_{i}"), stats(level_series(&run.paths, i)));
        }
        if let Some(g) = observable_series(&run.paths, false) {
            series.insert("G".to_string(), stats(g));
        }
        if let Some(vg) = observable_series(&run.paths, true) {
            series.insert("VG".to_string(), stats(vg));
        }
        let terminal = run.paths.iter().map(|p| p.final_level);
        Self {
            n_paths: run.paths.len(),
            times: run.times.clone(),
            initial: initial_moments(&exp.dec, &exp.spectrum),
            series,
            terminal_frequencies: counts(terminal, n_levels),
            drawn_frequencies: counts(run.paths.iter().map(|p| p.terminal_level), n_levels),
        }
    }
}
