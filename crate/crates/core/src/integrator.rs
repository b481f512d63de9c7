//! Euler–Maruyama integration of the nonlinear state equation and exact
//! propagation of the ancillary linear equation.
//!
//! The standard and the general stationary equation share one diagonal
//! kernel: with per-basis volatility `iKⱼ + Dⱼ`, where `Dⱼ = Lⱼ − ⟨L⟩`, each
//! amplitude is multiplied by `1 + (−iEⱼ − ½(Kⱼ² + Dⱼ²))dt + (iKⱼ + Dⱼ)dW`
//! and the result is renormalized.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::closedform::ModelKind;
use crate::error::{Error, Result};
use crate::noise::{sample_brownian, sample_terminal_energy, PathGrid, SeedPolicy};
use crate::spectrum::{InitialState, LudersDecomposition, Spectrum};
pub use crate::state::StateVector;

/// Tolerance on the input norm of every Euler step.
pub const STEP_NORM_TOL: f64 = 1e-10;

type EnergyFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `K̂ = K(Ĥ)` and `L̂ = L(Ĥ)` of the general stationary equation.
#[derive(Clone)]
pub struct GeneralModel {
    pub k: EnergyFn,
    pub l: EnergyFn,
}

impl GeneralModel {
    pub fn new(
        k: impl Fn(f64) -> f64 + Send + Sync + 'static,
        l: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            k: Arc::new(k),
            l: Arc::new(l),
        }
    }

    /// The standard model: `K = 0`, `L(x) = ½σx`.
    pub fn standard(sigma: f64) -> Self {
        Self::new(|_| 0.0, move |x| 0.5 * sigma * x)
    }

    pub fn validate(&self, spectrum: &Spectrum) -> Result<()> {
        for e in spectrum.energies() {
            if !(self.k)(e).is_finite() || !(self.l)(e).is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "K or L is not finite at energy {e}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Debug for GeneralModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralModel").finish_non_exhaustive()
    }
}

fn check_state(state: &StateVector, spectrum: &Spectrum) -> Result<()> {
    if state.dimension() != spectrum.dimension() {
        return Err(Error::DimensionMismatch {
            expected: spectrum.dimension(),
            actual: state.dimension(),
        });
    }
    let norm_sq = state.norm_sqr();
    if (norm_sq - 1.0).abs() > STEP_NORM_TOL {
        return Err(Error::NotNormalized {
            norm_sq,
            tol: STEP_NORM_TOL,
        });
    }
    Ok(())
}

/// Unnormalized Euler update. `l` and `k` are per level.
fn kernel(state: &StateVector, spectrum: &Spectrum, l: &[f64], k: &[f64], dw: f64, dt: f64) -> StateVector {
    let mut lbar = 0.0;
    for (i, li) in l.iter().enumerate() {
        let p: f64 = state.amplitudes[spectrum.block(i)]
            .iter()
            .map(|a| a.norm_sqr())
            .sum();
        lbar += p * li;
    }
    let mut out = state.clone();
    for i in 0..spectrum.n_levels() {
        let e = spectrum.energy(i);
        let d = l[i] - lbar;
        let ki = k[i];
        let factor = Complex64::new(1.0 - 0.5 * (ki * ki + d * d) * dt + d * dw, -e * dt + ki * dw);
        for a in &mut out.amplitudes[spectrum.block(i)] {
            *a *= factor;
        }
    }
    out
}

/// One Euler step of the standard equation from time `t`, without renormalization.
pub fn euler_step_standard_raw(
    state: &StateVector,
    model: &ModelKind,
    t: f64,
    dw: f64,
    dt: f64,
    spectrum: &Spectrum,
) -> Result<StateVector> {
    check_state(state, spectrum)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if let Some(horizon) = model.collapse_time() {
        // the last interval before T is left to the terminal rule
        let guard = horizon - dt;
        if t + dt > guard * (1.0 + 1e-12) {
            return Err(Error::BeyondCollapse {
                t: t + dt,
                collapse_time: guard,
            });
        }
    }
    let sigma = model.sigma();
    let scale = model.coupling_scale(t);
    let l: Vec<f64> = spectrum
        .energies()
        .iter()
        .map(|&e| scale * (0.5 * sigma * e))
        .collect();
    let k = vec![0.0; spectrum.n_levels()];
    Ok(kernel(state, spectrum, &l, &k, dw, dt))
}

/// One Euler step of `dψ = −iĤψdt − ⅛σₜ²(Ĥ−H)²ψdt + ½σₜ(Ĥ−H)ψdW`, renormalized.
///
/// In the finite-time model the step must end no later than `T − dt`.
pub fn euler_step_standard(
    state: &StateVector,
    model: &ModelKind,
    t: f64,
    dw: f64,
    dt: f64,
    spectrum: &Spectrum,
) -> Result<StateVector> {
    euler_step_standard_raw(state, model, t, dw, dt, spectrum)?.normalized()
}

/// One Euler step of the general stationary equation with volatility
/// `sigma_scale·(iK̂ + L̂ − ⟨L̂⟩)`, renormalized.
pub fn euler_step_general(
    state: &StateVector,
    gm: &GeneralModel,
    sigma_scale: f64,
    dw: f64,
    dt: f64,
    spectrum: &Spectrum,
) -> Result<StateVector> {
    check_state(state, spectrum)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let energies = spectrum.energies();
    let l: Vec<f64> = energies.iter().map(|&e| sigma_scale * (gm.l)(e)).collect();
    let k: Vec<f64> = energies.iter().map(|&e| sigma_scale * (gm.k)(e)).collect();
    kernel(state, spectrum, &l, &k, dw, dt).normalized()
}

/// `exp(−iĤt + ½σĤξ − ¼σ²Ĥ²t)|ψ₀⟩`, unnormalized.
pub fn ancillary_exact(
    psi0: &InitialState,
    sigma: f64,
    xi_t: f64,
    t: f64,
    spectrum: &Spectrum,
) -> Result<StateVector> {
    if psi0.dimension() != spectrum.dimension() {
        return Err(Error::DimensionMismatch {
            expected: spectrum.dimension(),
            actual: psi0.dimension(),
        });
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("time must be non-negative, got {t}")));
    }
    let mut out = StateVector::from(psi0);
    for i in 0..spectrum.n_levels() {
        let e = spectrum.energy(i);
        let f = Complex64::from_polar(
            (0.5 * sigma * e * xi_t - 0.25 * sigma * sigma * e * e * t).exp(),
            -e * t,
        );
        for a in &mut out.amplitudes[spectrum.block(i)] {
            *a *= f;
        }
    }
    Ok(out)
}

/// `exp(−iĤt − (ξ − σĤt)²/(4t))|ψ₀⟩`, unnormalized. Differs from the ancillary
/// state only by the scalar `exp(−ξ²/(4t))`.
pub fn pearle_state(
    psi0: &InitialState,
    sigma: f64,
    xi_t: f64,
    t: f64,
    spectrum: &Spectrum,
) -> Result<StateVector> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("time must be positive, got {t}")));
    }
    if psi0.dimension() != spectrum.dimension() {
        return Err(Error::DimensionMismatch {
            expected: spectrum.dimension(),
            actual: psi0.dimension(),
        });
    }
    let mut out = StateVector::from(psi0);
    for i in 0..spectrum.n_levels() {
        let e = spectrum.energy(i);
        let r = xi_t - sigma * e * t;
        let f = Complex64::from_polar((-r * r / (4.0 * t)).exp(), -e * t);
        for a in &mut out.amplitudes[spectrum.block(i)] {
            *a *= f;
        }
    }
    Ok(out)
}

/// Moments of a diagonal observable `Ĝ` in a normalized state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservableMoments {
    /// `Gₜ = ⟨Ĝ⟩`
    pub mean: f64,
    /// `Vₜᴳ = ⟨(Ĝ−G)²⟩`
    pub variance: f64,
    /// `γₜ = ⟨(Ĝ−G)(Ĥ−H)⟩`
    pub gamma: f64,
    /// `δₜ = ⟨(Ĝ−G)²(Ĥ−H)⟩`
    pub delta: f64,
    /// `κₜ = ⟨(Ĥ−H)³⟩`
    pub kappa: f64,
}

fn check_observable(state: &StateVector, g: &[f64], spectrum: &Spectrum) -> Result<()> {
    for n in [state.dimension(), g.len()] {
        if n != spectrum.dimension() {
            return Err(Error::DimensionMismatch {
                expected: spectrum.dimension(),
                actual: n,
            });
        }
    }
    Ok(())
}

/// `⟨Ĝ⟩` for `Ĝ` diagonal in the energy basis.
pub fn observable_expectation(state: &StateVector, g: &[f64], spectrum: &Spectrum) -> Result<f64> {
    check_observable(state, g, spectrum)?;
    Ok(state
        .amplitudes
        .iter()
        .zip(g)
        .map(|(a, gj)| a.norm_sqr() * gj)
        .sum())
}

pub fn observable_moments(state: &StateVector, g: &[f64], spectrum: &Spectrum) -> Result<ObservableMoments> {
    check_observable(state, g, spectrum)?;
    let e = spectrum.basis_energies();
    let p: Vec<f64> = state.amplitudes.iter().map(|a| a.norm_sqr()).collect();
    let mean: f64 = p.iter().zip(g).map(|(p, g)| p * g).sum();
    let h: f64 = p.iter().zip(&e).map(|(p, e)| p * e).sum();
    let mut m = ObservableMoments {
        mean,
        variance: 0.0,
        gamma: 0.0,
        delta: 0.0,
        kappa: 0.0,
    };
    for j in 0..p.len() {
        let dg = g[j] - mean;
        let dh = e[j] - h;
        m.variance += p[j] * dg * dg;
        m.gamma += p[j] * dg * dh;
        m.delta += p[j] * dg * dg * dh;
        m.kappa += p[j] * dh * dh * dh;
    }
    Ok(m)
}

/// Integrates the general model from `psi0` with independent Brownian increments.
/// Returns the level weights at every grid point, `weights[k][i]`.
pub fn integrate_general(
    psi0: &InitialState,
    gm: &GeneralModel,
    grid: PathGrid,
    seed: SeedPolicy,
    path_index: u64,
    spectrum: &Spectrum,
) -> Result<Vec<Vec<f64>>> {
    let noise = sample_brownian(grid, seed, path_index);
    let dt = grid.dt();
    let mut state = StateVector::from(psi0);
    let mut out = Vec::with_capacity(grid.len());
    out.push(state.level_weights(spectrum));
    for dw in noise.increments() {
        state = euler_step_general(&state, gm, 1.0, dw, dt, spectrum)?;
        out.push(state.level_weights(spectrum));
    }
    Ok(out)
}

/// Squared terminal-state error `‖ψ_Euler − ψ_closed‖²` for one coupled path
/// of the asymptotic model: the closed-form trajectory supplies the innovation
/// increments that drive the Euler scheme.
pub fn coupled_terminal_error(
    sigma: f64,
    spectrum: &Spectrum,
    psi0: &InitialState,
    dec: &LudersDecomposition,
    fine: PathGrid,
    steps: usize,
    seed: SeedPolicy,
    path_index: u64,
) -> Result<f64> {
    use crate::closedform::{information_path, innovation_path, state_vector, Filter};

    if steps == 0 || fine.steps % steps != 0 {
        return Err(Error::GridMismatch(format!(
            "{steps} steps do not divide the fine grid of {}",
            fine.steps
        )));
    }
    let model = ModelKind::asymptotic(sigma)?;
    let filter = Filter::new(model, spectrum, dec.probabilities())?;
    let level = sample_terminal_energy(dec, seed, path_index);
    let noise = sample_brownian(fine, seed, path_index).coarsen(fine.steps / steps)?;
    let grid = noise.grid;
    let xi = information_path(&model, level, &noise, spectrum)?;
    let mut h = Vec::with_capacity(grid.len());
    let mut buf = vec![0.0; spectrum.n_levels()];
    for (k, &x) in xi.iter().enumerate() {
        filter.probabilities_into(x, grid.time(k), &mut buf)?;
        h.push(crate::closedform::energy_and_variance_of(&buf, filter.energies()).0);
    }
    let w = innovation_path(&model, &grid, &xi, &h)?;
    let dt = grid.dt();
    let mut state = StateVector::from(psi0);
    for k in 0..grid.steps {
        state = euler_step_standard(&state, &model, grid.time(k), w[k + 1] - w[k], dt, spectrum)?;
    }
    filter.probabilities_into(xi[grid.steps], grid.t_end, &mut buf)?;
    let exact = state_vector(&buf, dec, spectrum, grid.t_end)?;
    Ok(state.distance(&exact).powi(2))
}
