//! The clock map `τ = tT/(T−t)` between the finite-time and asymptotic models.
//!
//! A single Brownian path `B` drives both sides. The finite-time side uses the
//! bridge `βₜ = (T−t)∫dB_s/(T−s)`, its closed-form energy `Hₜ` and its
//! innovation `W`. The asymptotic side is an Euler integration in `τ` of
//! `dη = σH̃(η, τ)dτ + dW̃` with `dW̃ = T dW/(T−t)`, where `H̃` is the
//! asymptotic closed-form energy. `H̃_{τ(t)}` must track `Hₜ`.

use serde::{Deserialize, Serialize};

use crate::closedform::{energy_and_variance_of, Filter, ModelKind};
use crate::ensemble::map_paths;
use crate::error::{Error, Result};
use crate::noise::{sample_brownian, sample_terminal_energy, PathGrid, SeedPolicy};
use crate::spectrum::{LudersDecomposition, Spectrum};

/// `τ(t) = tT/(T−t)`.
pub fn clock(t: f64, horizon: f64) -> f64 {
    t * horizon / (horizon - t)
}

/// Inverse clock `t(τ) = τT/(T+τ)`.
pub fn clock_inverse(tau: f64, horizon: f64) -> f64 {
    tau * horizon / (horizon + tau)
}

/// The information process seen on the asymptotic clock, `η = Tξₜ/(T−t)`.
pub fn clock_information(xi_t: f64, t: f64, horizon: f64) -> f64 {
    horizon * xi_t / (horizon - t)
}

/// Largest `|H̃_{τ(t)} − Hₜ|` and the RMS over the window, for one path on one grid.
fn path_discrepancy(
    finite: &Filter,
    asym: &Filter,
    level: usize,
    db_fine: &[f64],
    steps: usize,
    horizon: f64,
    window: usize,
) -> Result<(f64, f64, f64)> {
    let factor = db_fine.len() / steps;
    let grid = PathGrid::new(horizon, steps)?;
    let dt = grid.dt();
    let sigma = finite.model().sigma();
    let e = finite.energies()[level];
    let n_levels = finite.energies().len();
    let mut buf = vec![0.0; n_levels];

    // information process on t_0..t_{steps-1}
    let mut xi = Vec::with_capacity(steps);
    let mut integral = 0.0;
    for k in 0..steps {
        let t = grid.time(k);
        xi.push(sigma * t * e + (horizon - t) * integral);
        let db: f64 = db_fine[k * factor..(k + 1) * factor].iter().sum();
        integral += db / (horizon - t);
    }
    let mut h = Vec::with_capacity(steps);
    for (k, &x) in xi.iter().enumerate() {
        finite.probabilities_into(x, grid.time(k), &mut buf)?;
        h.push(energy_and_variance_of(&buf, finite.energies()).0);
    }

    let mut eta = 0.0;
    let mut max_err = 0.0f64;
    let mut sq = 0.0;
    let mut algebraic = 0.0f64;
    for k in 0..=window {
        let t = grid.time(k);
        let tau = clock(t, horizon);
        asym.probabilities_into(eta, tau, &mut buf)?;
        let ht = energy_and_variance_of(&buf, asym.energies()).0;
        let err = (ht - h[k]).abs();
        max_err = max_err.max(err);
        sq += err * err;

        asym.probabilities_into(clock_information(xi[k], t, horizon), tau, &mut buf)?;
        let direct = energy_and_variance_of(&buf, asym.energies()).0;
        algebraic = algebraic.max((direct - h[k]).abs());

        if k < window {
            let dw = xi[k + 1] - xi[k] + (xi[k] - sigma * horizon * h[k]) / (horizon - t) * dt;
            let dtau = clock(grid.time(k + 1), horizon) - tau;
            eta += sigma * ht * dtau + horizon * dw / (horizon - t);
        }
    }
    Ok((max_err, (sq / (window + 1) as f64).sqrt(), algebraic))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimechangeRow {
    pub steps: usize,
    pub max_discrepancy: f64,
    pub rms_discrepancy: f64,
    /// `|H̃(Tξₜ/(T−t), τ(t)) − Hₜ|` without any integration; rounding only.
    pub algebraic_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimechangeResult {
    pub passed: bool,
    pub horizon_fraction: f64,
    pub tolerance: f64,
    pub rows: Vec<TimechangeRow>,
    pub decreasing: bool,
}

/// Runs the shared-noise comparison for every grid in `ladder` on
/// `[0, horizon_fraction·T]`. Every grid must divide the finest.
#[allow(clippy::too_many_arguments)]
pub fn timechange_equivalence_test(
    spectrum: &Spectrum,
    dec: &LudersDecomposition,
    sigma: f64,
    horizon: f64,
    ladder: &[usize],
    horizon_fraction: f64,
    n_paths: usize,
    seed: u64,
    threads: Option<usize>,
    tolerance: f64,
) -> Result<TimechangeResult> {
    if ladder.is_empty() {
        return Err(Error::InvalidParameter("empty step ladder".into()));
    }
    if !(horizon_fraction > 0.0 && horizon_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "horizon fraction must lie in (0, 1), got {horizon_fraction}"
        )));
    }
    let finest = *ladder.iter().max().expect("non-empty");
    if ladder.iter().any(|&s| s < 2 || finest % s != 0) {
        return Err(Error::GridMismatch(format!(
            "every grid in {ladder:?} must divide the finest"
        )));
    }
    let finite = Filter::new(ModelKind::finite_time(sigma, horizon)?, spectrum, dec.probabilities())?;
    let asym = Filter::new(ModelKind::asymptotic(sigma)?, spectrum, dec.probabilities())?;
    let seed = SeedPolicy::new(seed);
    let fine = PathGrid::new(horizon, finest)?;
    let per_path = map_paths(n_paths, threads, |i| {
        let level = sample_terminal_energy(dec, seed, i);
        let db = sample_brownian(fine, seed, i).increments();
        ladder
            .iter()
            .map(|&steps| {
                let window = ((horizon_fraction * steps as f64).floor() as usize).min(steps - 1);
                path_discrepancy(&finite, &asym, level, &db, steps, horizon, window)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut rows = Vec::with_capacity(ladder.len());
    for (j, &steps) in ladder.iter().enumerate() {
        let mut max_discrepancy = 0.0f64;
        let mut sq = 0.0;
        let mut algebraic_discrepancy = 0.0f64;
        for p in &per_path {
            max_discrepancy = max_discrepancy.max(p[j].0);
            sq += p[j].1 * p[j].1;
            algebraic_discrepancy = algebraic_discrepancy.max(p[j].2);
        }
        rows.push(TimechangeRow {
            steps,
            max_discrepancy,
            rms_discrepancy: (sq / per_path.len().max(1) as f64).sqrt(),
            algebraic_discrepancy,
        });
    }
    let mut ordered = rows.clone();
    ordered.sort_by_key(|r| r.steps);
    let decreasing = ordered
        .windows(2)
        .all(|w| w[1].max_discrepancy < w[0].max_discrepancy);
    let finest_ok = ordered.last().is_some_and(|r| r.max_discrepancy <= tolerance);
    Ok(TimechangeResult {
        passed: decreasing && finest_ok,
        horizon_fraction,
        tolerance,
        rows,
        decreasing,
    })
}
