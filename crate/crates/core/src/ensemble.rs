//! Parallel ensemble evaluation with results returned in path-index order.
//!
//! Each path is a pure function of the seed and its index, so the thread
//! count only changes how fast the vector is filled, never its contents.

use rayon::prelude::*;

use crate::closedform::{simulate_path, state_vector, Filter, ModelKind, TrajectoryRecord};
use crate::config::Experiment;
use crate::error::{Error, Result};
use crate::integrator::{observable_moments, ObservableMoments};
use crate::noise::SeedPolicy;

/// Evaluates `f` for every path index in `0..n_paths` on a pool of `threads`
/// workers (all cores when `None` or zero).
pub fn map_paths<T, F>(n_paths: usize, threads: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads.filter(|&n| n > 0) {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        (0..n_paths)
            .into_par_iter()
            .with_min_len(8)
            .map(|i| f(i as u64))
            .collect()
    })
}

/// What one path contributes to the ensemble statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSummary {
    pub path_index: u64,
    /// Level of the drawn terminal energy.
    pub terminal_level: usize,
    /// Most probable level at the last grid point.
    pub final_level: usize,
    pub xi: Vec<f64>,
    pub h: Vec<f64>,
    pub v: Vec<f64>,
    pub s: Vec<f64>,
    pub w: Vec<f64>,
    /// `pi[j][i]`: probability of level `i` at output point `j`.
    pub pi: Vec<Vec<f64>>,
    pub observable: Option<Vec<ObservableMoments>>,
    /// `Σ(ΔW)²` over the innovation window.
    pub qv_w: f64,
    /// End time of the innovation window and W there.
    pub w_window_t: f64,
    pub w_window_end: f64,
    /// Left-point sums of `½σₜ²Vₜdt` at full and at half resolution.
    pub entropy_quadrature: f64,
    pub entropy_quadrature_half: f64,
    /// Sums for the regression of `ΔSₜ` on `−½σₜ²Vₜdt`.
    pub entropy_reg_xy: f64,
    pub entropy_reg_xx: f64,
}

/// Last grid index of the innovation window: the whole grid for the
/// asymptotic model, one step short of `T` for the finite-time model.
pub fn innovation_window_end(model: &ModelKind, steps: usize) -> usize {
    match model {
        ModelKind::Asymptotic { .. } => steps,
        ModelKind::FiniteTime { .. } => steps - 1,
    }
}

pub fn summarize_path(
    record: &TrajectoryRecord,
    exp: &Experiment,
    output_idx: &[usize],
    path_index: u64,
) -> Result<PathSummary> {
    let grid = record.grid;
    let dt = grid.dt();
    let model = &exp.model;
    let pick = |v: &[f64]| output_idx.iter().map(|&k| v[k]).collect::<Vec<_>>();

    let observable = match &exp.observable {
        Some(g) => Some(
            output_idx
                .iter()
                .map(|&k| {
                    let p = record.probabilities_at(k);
                    let psi = state_vector(&p, &exp.dec, &exp.spectrum, grid.time(k))?;
                    observable_moments(&psi, g, &exp.spectrum)
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };

    let wend = innovation_window_end(model, grid.steps);
    let qv_w = record.w[..=wend]
        .windows(2)
        .map(|w| (w[1] - w[0]) * (w[1] - w[0]))
        .sum();

    // ½σₜ²Vₜ at every left point; t < T throughout.
    let weight = |k: usize| {
        let st = model.sigma_t(grid.time(k));
        0.5 * st * st * record.v[k]
    };
    let mut quad = 0.0;
    let mut reg_xy = 0.0;
    let mut reg_xx = 0.0;
    for k in 0..grid.steps {
        let x = weight(k) * dt;
        quad += x;
        if k < wend {
            let y = record.s[k + 1] - record.s[k];
            reg_xy += -x * y;
            reg_xx += x * x;
        }
    }
    let mut quad_half = 0.0;
    for k in (0..grid.steps).step_by(2) {
        let width = if k + 1 < grid.steps { 2.0 * dt } else { dt };
        quad_half += weight(k) * width;
    }

    Ok(PathSummary {
        path_index,
        terminal_level: record.terminal_level,
        final_level: record.final_argmax_level(),
        xi: pick(&record.xi),
        h: pick(&record.h),
        v: pick(&record.v),
        s: pick(&record.s),
        w: pick(&record.w),
        pi: output_idx.iter().map(|&k| record.probabilities_at(k)).collect(),
        observable,
        qv_w,
        w_window_t: grid.time(wend),
        w_window_end: record.w[wend],
        entropy_quadrature: quad,
        entropy_quadrature_half: quad_half,
        entropy_reg_xy: reg_xy,
        entropy_reg_xx: reg_xx,
    })
}

/// Simulated ensemble reduced to output points.
#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub output_idx: Vec<usize>,
    pub times: Vec<f64>,
    pub paths: Vec<PathSummary>,
}

/// Runs `n_paths` closed-form trajectories and summarizes each one.
pub fn run_ensemble(exp: &Experiment, n_paths: usize, seed: u64, threads: Option<usize>) -> Result<EnsembleRun> {
    let output_idx = exp.output_indices()?;
    let filter = Filter::new(exp.model, &exp.spectrum, exp.dec.probabilities())?;
    let seed = SeedPolicy::new(seed);
    let paths = map_paths(n_paths, threads, |i| {
        let record = simulate_path(&filter, &exp.spectrum, &exp.dec, exp.grid, seed, i)?;
        summarize_path(&record, exp, &output_idx, i)
    })?;
    let times = output_idx.iter().map(|&k| exp.grid.time(k)).collect();
    Ok(EnsembleRun {
        output_idx,
        times,
        paths,
    })
}

/// Full records for the first `n` paths, used for trajectory output.
pub fn full_records(exp: &Experiment, n: usize, seed: u64, threads: Option<usize>) -> Result<Vec<TrajectoryRecord>> {
    let filter = Filter::new(exp.model, &exp.spectrum, exp.dec.probabilities())?;
    let seed = SeedPolicy::new(seed);
    map_paths(n, threads, |i| {
        simulate_path(&filter, &exp.spectrum, &exp.dec, exp.grid, seed, i)
    })
}
