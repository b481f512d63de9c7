//! Grid-refinement studies and exact identity probes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::closedform::{
    conditional_probabilities, energy_and_variance_of, information_path, log_density_discrete,
    log_density_exact, log_density_milstein, state_vector, Filter, ModelKind,
};
use crate::ensemble::map_paths;
use crate::error::{Error, Result};
use crate::integrator::{ancillary_exact, coupled_terminal_error};
use crate::noise::{sample_brownian, sample_terminal_energy, PathGrid, SeedPolicy, Stream};
use crate::spectrum::{InitialState, LudersDecomposition, Spectrum};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub steps: usize,
    pub dt: f64,
    /// RMS of `‖ψ_Euler − ψ_closed‖` at the end of the window.
    pub rms_state_error: f64,
    /// Empirical order against the previous (coarser) row.
    pub state_order: Option<f64>,
    /// RMS relative error of the change-of-measure density with the
    /// second-order corrected Itô sum.
    pub rms_density_error: f64,
    pub density_order: Option<f64>,
    /// Same with the plain left-point sum.
    pub rms_density_error_left_point: f64,
    pub density_order_left_point: Option<f64>,
}

fn check_ladder(ladder: &[usize]) -> Result<usize> {
    let finest = *ladder
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidParameter("empty step ladder".into()))?;
    if ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("step ladder must be increasing".into()));
    }
    if ladder.iter().any(|&s| s == 0 || finest % s != 0) {
        return Err(Error::GridMismatch(format!(
            "every grid in {ladder:?} must divide the finest"
        )));
    }
    Ok(finest)
}

fn order(prev: f64, cur: f64, prev_dt: f64, cur_dt: f64) -> f64 {
    (prev / cur).ln() / (prev_dt / cur_dt).ln()
}

/// Relative errors `Φ_disc/Φ_exact − 1` at `t_end` for one path on one grid,
/// corrected and left-point.
fn density_error(
    filter: &Filter,
    spectrum: &Spectrum,
    dec: &LudersDecomposition,
    fine: PathGrid,
    steps: usize,
    seed: SeedPolicy,
    path_index: u64,
) -> Result<(f64, f64)> {
    let model = *filter.model();
    let sigma = model.sigma();
    let level = sample_terminal_energy(dec, seed, path_index);
    let noise = sample_brownian(fine, seed, path_index).coarsen(fine.steps / steps)?;
    let grid = noise.grid;
    let xi = information_path(&model, level, &noise, spectrum)?;
    let mut buf = vec![0.0; spectrum.n_levels()];
    let mut h = Vec::with_capacity(grid.len());
    let mut v = Vec::with_capacity(grid.len());
    for (k, &x) in xi.iter().enumerate() {
        filter.probabilities_into(x, grid.time(k), &mut buf)?;
        let (hk, vk) = energy_and_variance_of(&buf, filter.energies());
        h.push(hk);
        v.push(vk);
    }
    let exact = log_density_exact(spectrum, dec.probabilities(), sigma, xi[grid.steps], grid.t_end);
    let corrected = log_density_milstein(sigma, &grid, &xi, &h, &v)?[grid.steps];
    let left = log_density_discrete(sigma, &grid, &xi, &h)?[grid.steps];
    Ok(((corrected - exact).exp_m1(), (left - exact).exp_m1()))
}

/// Euler-vs-closed-form and change-of-measure refinement study for the
/// asymptotic model. All grids are coarsenings of one Brownian path per index.
#[allow(clippy::too_many_arguments)]
pub fn convergence_study(
    spectrum: &Spectrum,
    psi0: &InitialState,
    dec: &LudersDecomposition,
    sigma: f64,
    t_end: f64,
    ladder: &[usize],
    n_paths: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<Vec<ConvergenceRow>> {
    let finest = check_ladder(ladder)?;
    let fine = PathGrid::new(t_end, finest)?;
    let filter = Filter::new(ModelKind::asymptotic(sigma)?, spectrum, dec.probabilities())?;
    let seed = SeedPolicy::new(seed);
    let per_path = map_paths(n_paths, threads, |i| {
        ladder
            .iter()
            .map(|&steps| {
                let e = coupled_terminal_error(sigma, spectrum, psi0, dec, fine, steps, seed, i)?;
                let (d, l) = density_error(&filter, spectrum, dec, fine, steps, seed, i)?;
                Ok([e, d * d, l * l])
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let n = per_path.len().max(1) as f64;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(ladder.len());
    for (j, &steps) in ladder.iter().enumerate() {
        let rms = |c: usize| (per_path.iter().map(|p| p[j][c]).sum::<f64>() / n).sqrt();
        let dt = t_end / steps as f64;
        let rms_state_error = rms(0);
        let rms_density_error = rms(1);
        let rms_density_error_left_point = rms(2);
        let prev = rows.last();
        rows.push(ConvergenceRow {
            steps,
            dt,
            rms_state_error,
            state_order: prev.map(|p| order(p.rms_state_error, rms_state_error, p.dt, dt)),
            rms_density_error,
            density_order: prev.map(|p| order(p.rms_density_error, rms_density_error, p.dt, dt)),
            rms_density_error_left_point,
            density_order_left_point: prev.map(|p| {
                order(p.rms_density_error_left_point, rms_density_error_left_point, p.dt, dt)
            }),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AncillaryResult {
    pub passed: bool,
    pub probes: usize,
    /// Largest relative error of the ancillary squared norm against the level sum.
    pub max_norm_error: f64,
    /// Largest componentwise gap between the normalized ancillary and closed-form states.
    pub max_state_error: f64,
}

/// Random `(ξ, t)` probes of the ancillary-state identities, `t ∈ [0, t_max]`,
/// `ξ ∈ [−ξ_max, ξ_max]`.
pub fn ancillary_identity_test(
    spectrum: &Spectrum,
    psi0: &InitialState,
    dec: &LudersDecomposition,
    sigma: f64,
    probes: usize,
    t_max: f64,
    xi_max: f64,
    seed: u64,
) -> Result<AncillaryResult> {
    let mut rng = SeedPolicy::new(seed).rng(0, Stream::Probe);
    let model = ModelKind::asymptotic(sigma)?;
    let mut max_norm_error = 0.0f64;
    let mut max_state_error = 0.0f64;
    for _ in 0..probes {
        let t = rng.random::<f64>() * t_max;
        let xi = (2.0 * rng.random::<f64>() - 1.0) * xi_max;
        let a = ancillary_exact(psi0, sigma, xi, t, spectrum)?;
        let direct: f64 = dec
            .probabilities()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let e = spectrum.energy(i);
                p * (sigma * e * xi - 0.5 * sigma * sigma * e * e * t).exp()
            })
            .sum();
        max_norm_error = max_norm_error.max((a.norm_sqr() / direct - 1.0).abs());
        let p = conditional_probabilities(&model, spectrum, dec.probabilities(), xi, t)?;
        let closed = state_vector(&p, dec, spectrum, t)?;
        let normalized = a.normalized()?;
        for (x, y) in normalized.amplitudes.iter().zip(&closed.amplitudes) {
            max_state_error = max_state_error.max((x - y).norm());
        }
    }
    Ok(AncillaryResult {
        passed: max_norm_error <= 1e-12 && max_state_error <= 1e-12,
        probes,
        max_norm_error,
        max_state_error,
    })
}
