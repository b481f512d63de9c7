//! Exact filtering solutions for the asymptotic and finite-time reduction models.
//!
//! Given the information process ξₜ, the conditional level probabilities are
//! known in closed form, and the state vector follows from them by reweighting
//! the frozen Lüders states. All exponential weights go through log-sum-exp.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{
    sample_bridge, sample_brownian, sample_terminal_energy, NoiseKind, NoisePath, PathGrid,
    SeedPolicy,
};
use crate::spectrum::{LudersDecomposition, Spectrum};
use crate::state::StateVector;

/// Tolerance for the probability simplex checks.
pub const SIMPLEX_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Asymptotic { sigma: f64 },
    FiniteTime { sigma: f64, horizon: f64 },
}

impl ModelKind {
    pub fn asymptotic(sigma: f64) -> Result<Self> {
        let m = ModelKind::Asymptotic { sigma };
        m.validate()?;
        Ok(m)
    }

    pub fn finite_time(sigma: f64, horizon: f64) -> Result<Self> {
        let m = ModelKind::FiniteTime { sigma, horizon };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let sigma = self.sigma();
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        if let ModelKind::FiniteTime { horizon, .. } = *self {
            if !(horizon > 0.0 && horizon.is_finite()) {
                return Err(Error::InvalidParameter(format!("T must be positive, got {horizon}")));
            }
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            ModelKind::Asymptotic { sigma } | ModelKind::FiniteTime { sigma, .. } => sigma,
        }
    }

    pub fn collapse_time(&self) -> Option<f64> {
        match *self {
            ModelKind::Asymptotic { .. } => None,
            ModelKind::FiniteTime { horizon, .. } => Some(horizon),
        }
    }

    /// Effective coupling σₜ; `σT/(T−t)` in the finite-time model, infinite at T.
    pub fn sigma_t(&self, t: f64) -> f64 {
        match *self {
            ModelKind::Asymptotic { sigma } => sigma,
            ModelKind::FiniteTime { sigma, horizon } => sigma * horizon / (horizon - t),
        }
    }

    /// Ratio σₜ/σ.
    pub fn coupling_scale(&self, t: f64) -> f64 {
        match *self {
            ModelKind::Asymptotic { .. } => 1.0,
            ModelKind::FiniteTime { horizon, .. } => horizon / (horizon - t),
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!("time must be non-negative, got {t}")));
        }
        if let Some(collapse_time) = self.collapse_time() {
            if t > collapse_time {
                return Err(Error::BeyondCollapse { t, collapse_time });
            }
        }
        Ok(())
    }

    fn check_noise(&self, noise: &NoisePath) -> Result<()> {
        match (*self, noise.kind) {
            (ModelKind::Asymptotic { .. }, NoiseKind::Brownian) => Ok(()),
            (ModelKind::FiniteTime { horizon, .. }, NoiseKind::Bridge { horizon: h }) => {
                if h != horizon {
                    return Err(Error::NoiseMismatch(format!(
                        "bridge pinned at {h}, model collapses at {horizon}"
                    )));
                }
                if noise.grid.t_end > horizon {
                    return Err(Error::BeyondCollapse {
                        t: noise.grid.t_end,
                        collapse_time: horizon,
                    });
                }
                Ok(())
            }
            (ModelKind::Asymptotic { .. }, kind) => Err(Error::NoiseMismatch(format!(
                "asymptotic model needs Brownian noise, got {kind:?}"
            ))),
            (ModelKind::FiniteTime { .. }, kind) => Err(Error::NoiseMismatch(format!(
                "finite-time model needs bridge noise, got {kind:?}"
            ))),
        }
    }
}

/// ξₜ = σ E_level t + noiseₜ.
pub fn information_path(
    model: &ModelKind,
    level: usize,
    noise: &NoisePath,
    spectrum: &Spectrum,
) -> Result<Vec<f64>> {
    model.check_noise(noise)?;
    if level >= spectrum.n_levels() {
        return Err(Error::InvalidParameter(format!("level {level} out of range")));
    }
    let drift = model.sigma() * spectrum.energy(level);
    Ok(noise
        .values
        .iter()
        .enumerate()
        .map(|(k, b)| drift * noise.grid.time(k) + b)
        .collect())
}

/// Precomputed Bayes filter for one model and initial distribution.
#[derive(Debug, Clone)]
pub struct Filter {
    model: ModelKind,
    energies: Vec<f64>,
    log_pi: Vec<f64>,
}

impl Filter {
    pub fn new(model: ModelKind, spectrum: &Spectrum, pi0: &[f64]) -> Result<Self> {
        model.validate()?;
        if pi0.len() != spectrum.n_levels() {
            return Err(Error::DimensionMismatch {
                expected: spectrum.n_levels(),
                actual: pi0.len(),
            });
        }
        if pi0.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidParameter("negative probability".into()));
        }
        let total: f64 = pi0.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidParameter(format!("probabilities sum to {total}")));
        }
        Ok(Self {
            model,
            energies: spectrum.energies(),
            log_pi: pi0.iter().map(|p| p.ln()).collect(),
        })
    }

    pub fn model(&self) -> &ModelKind {
        &self.model
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Writes πᵢₜ for information value `xi` at time `t` into `out`.
    pub fn probabilities_into(&self, xi: f64, t: f64, out: &mut [f64]) -> Result<()> {
        self.model.check_time(t)?;
        let sigma = self.model.sigma();
        match self.model {
            ModelKind::FiniteTime { horizon, .. } if t == horizon => {
                let mut best = None;
                let mut best_score = f64::NEG_INFINITY;
                for (i, (&e, &lp)) in self.energies.iter().zip(&self.log_pi).enumerate() {
                    if lp == f64::NEG_INFINITY {
                        continue;
                    }
                    let score = sigma * xi * e - 0.5 * sigma * sigma * e * e * horizon;
                    if best.is_none() || score > best_score {
                        best = Some(i);
                        best_score = score;
                    }
                }
                out.fill(0.0);
                out[best.expect("at least one level has positive probability")] = 1.0;
                Ok(())
            }
            ModelKind::FiniteTime { horizon, .. } => {
                let scale = horizon / (horizon - t);
                softmax_into(
                    self.energies.iter().zip(&self.log_pi).map(|(&e, &lp)| {
                        lp + (sigma * xi * e - 0.5 * sigma * sigma * e * e * t) * scale
                    }),
                    out,
                );
                Ok(())
            }
            ModelKind::Asymptotic { .. } => {
                softmax_into(
                    self.energies.iter().zip(&self.log_pi).map(|(&e, &lp)| {
                        lp + sigma * e * xi - 0.5 * sigma * sigma * e * e * t
                    }),
                    out,
                );
                Ok(())
            }
        }
    }

    pub fn probabilities(&self, xi: f64, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.energies.len()];
        self.probabilities_into(xi, t, &mut out)?;
        Ok(out)
    }
}

fn softmax_into(log_weights: impl Iterator<Item = f64>, out: &mut [f64]) {
    for (o, w) in out.iter_mut().zip(log_weights) {
        *o = w;
    }
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// `log Σᵢ exp(xᵢ)`, ignoring `-inf` entries.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn conditional_probabilities(
    model: &ModelKind,
    spectrum: &Spectrum,
    pi0: &[f64],
    xi_t: f64,
    t: f64,
) -> Result<Vec<f64>> {
    Filter::new(*model, spectrum, pi0)?.probabilities(xi_t, t)
}

/// `(Hₜ, Vₜ)`.
pub fn energy_and_variance(probabilities: &[f64], spectrum: &Spectrum) -> (f64, f64) {
    energy_and_variance_of(probabilities, &spectrum.energies())
}

pub(crate) fn energy_and_variance_of(probabilities: &[f64], energies: &[f64]) -> (f64, f64) {
    let h: f64 = probabilities.iter().zip(energies).map(|(p, e)| p * e).sum();
    let v: f64 = probabilities
        .iter()
        .zip(energies)
        .map(|(p, e)| p * (e - h) * (e - h))
        .sum();
    (h, v)
}

/// `E[f(H) | ξ up to t] = Σᵢ πᵢₜ f(Eᵢ)`.
pub fn conditional_expectation_of(
    f: impl Fn(f64) -> f64,
    probabilities: &[f64],
    spectrum: &Spectrum,
) -> f64 {
    probabilities
        .iter()
        .enumerate()
        .map(|(i, p)| p * f(spectrum.energy(i)))
        .sum()
}

pub fn shannon_entropy(probabilities: &[f64]) -> f64 {
    let s = -probabilities
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>();
    s.max(0.0)
}

/// `|ψₜ⟩ = Σᵢ e^{−iEᵢt} √πᵢₜ |φᵢ⟩`.
pub fn state_vector(
    probabilities: &[f64],
    dec: &LudersDecomposition,
    spectrum: &Spectrum,
    t: f64,
) -> Result<StateVector> {
    if probabilities.len() != dec.n_levels() {
        return Err(Error::DimensionMismatch {
            expected: dec.n_levels(),
            actual: probabilities.len(),
        });
    }
    let mut out = StateVector::zeros(spectrum.dimension());
    for (i, &p) in probabilities.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let phi = dec.state(i).ok_or(Error::ZeroProbabilityLevel(i))?;
        let w = Complex64::from_polar(p.sqrt(), -spectrum.energy(i) * t);
        for j in spectrum.block(i) {
            out.amplitudes[j] = phi[j] * w;
        }
    }
    Ok(out)
}

/// Reconstructs the innovation Brownian motion from ξ and H with left-point sums.
///
/// Asymptotic: `Wₜ = ξₜ − σ∫H ds`. Finite-time: `Wₜ = ξₜ + ∫(ξ_s − σT H_s)/(T−s) ds`.
pub fn innovation_path(model: &ModelKind, grid: &PathGrid, xi: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    if xi.len() != grid.len() || h.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "grid has {} points, xi {} and H {}",
            grid.len(),
            xi.len(),
            h.len()
        )));
    }
    if let Some(horizon) = model.collapse_time() {
        if grid.t_end > horizon {
            return Err(Error::BeyondCollapse {
                t: grid.t_end,
                collapse_time: horizon,
            });
        }
    }
    let sigma = model.sigma();
    let dt = grid.dt();
    let mut w = Vec::with_capacity(grid.len());
    let mut integral = 0.0;
    w.push(xi[0]);
    for k in 1..grid.len() {
        let j = k - 1;
        integral += match *model {
            ModelKind::Asymptotic { .. } => -sigma * h[j] * dt,
            ModelKind::FiniteTime { horizon, .. } => {
                (xi[j] - sigma * horizon * h[j]) / (horizon - grid.time(j)) * dt
            }
        };
        w.push(xi[k] + integral);
    }
    Ok(w)
}

/// Per-path time series produced by the closed-form solution.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub grid: PathGrid,
    pub xi: Vec<f64>,
    /// `pi[i][k]` is the probability of level `i` at grid point `k`.
    pub pi: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    pub v: Vec<f64>,
    pub s: Vec<f64>,
    pub w: Vec<f64>,
    /// Level drawn for the hidden terminal energy.
    pub terminal_level: usize,
}

impl TrajectoryRecord {
    pub fn probabilities_at(&self, k: usize) -> Vec<f64> {
        self.pi.iter().map(|p| p[k]).collect()
    }

    /// Level with the largest probability at the last grid point, lowest index on ties.
    pub fn final_argmax_level(&self) -> usize {
        let last = self.grid.steps;
        let mut best = 0;
        for i in 1..self.pi.len() {
            if self.pi[i][last] > self.pi[best][last] {
                best = i;
            }
        }
        best
    }
}

/// Builds the full record from a given level and noise path.
pub fn trajectory_from_noise(
    filter: &Filter,
    level: usize,
    noise: &NoisePath,
    spectrum: &Spectrum,
) -> Result<TrajectoryRecord> {
    let model = filter.model();
    let grid = noise.grid;
    let xi = information_path(model, level, noise, spectrum)?;
    let n = spectrum.n_levels();
    let mut pi = vec![Vec::with_capacity(grid.len()); n];
    let mut h = Vec::with_capacity(grid.len());
    let mut v = Vec::with_capacity(grid.len());
    let mut s = Vec::with_capacity(grid.len());
    let mut buf = vec![0.0; n];
    for (k, &x) in xi.iter().enumerate() {
        filter.probabilities_into(x, grid.time(k), &mut buf)?;
        let (hk, vk) = energy_and_variance_of(&buf, filter.energies());
        h.push(hk);
        v.push(vk);
        s.push(shannon_entropy(&buf));
        for (col, &p) in pi.iter_mut().zip(&buf) {
            col.push(p);
        }
    }
    let w = innovation_path(model, &grid, &xi, &h)?;
    Ok(TrajectoryRecord {
        grid,
        xi,
        pi,
        h,
        v,
        s,
        w,
        terminal_level: level,
    })
}

/// Draws H and the noise for `path_index` and evaluates the closed-form trajectory.
pub fn simulate_path(
    filter: &Filter,
    spectrum: &Spectrum,
    dec: &LudersDecomposition,
    grid: PathGrid,
    seed: SeedPolicy,
    path_index: u64,
) -> Result<TrajectoryRecord> {
    let level = sample_terminal_energy(dec, seed, path_index);
    let noise = match filter.model() {
        ModelKind::Asymptotic { .. } => sample_brownian(grid, seed, path_index),
        ModelKind::FiniteTime { horizon, .. } => {
            if grid.t_end != *horizon {
                return Err(Error::GridMismatch(format!(
                    "finite-time grid must end at T = {horizon}, got {}",
                    grid.t_end
                )));
            }
            sample_bridge(grid, seed, path_index)
        }
    };
    trajectory_from_noise(filter, level, &noise, spectrum)
}

/// Hₜ computed along the path where the hidden energy is fixed to `E_k`.
pub fn conditioned_energy_curve(
    model: &ModelKind,
    spectrum: &Spectrum,
    pi0: &[f64],
    level: usize,
    noise: &NoisePath,
) -> Result<Vec<f64>> {
    if pi0.get(level).copied().unwrap_or(0.0) <= 0.0 {
        return Err(Error::ZeroProbabilityLevel(level));
    }
    let filter = Filter::new(*model, spectrum, pi0)?;
    let xi = information_path(model, level, noise, spectrum)?;
    let mut buf = vec![0.0; spectrum.n_levels()];
    xi.iter()
        .enumerate()
        .map(|(k, &x)| {
            filter.probabilities_into(x, noise.grid.time(k), &mut buf)?;
            Ok(energy_and_variance_of(&buf, filter.energies()).0)
        })
        .collect()
}

/// `log Σᵢ πᵢ exp(σEᵢξ − ½σ²Eᵢ²t)`, the exact log change-of-measure density.
pub fn log_density_exact(spectrum: &Spectrum, pi0: &[f64], sigma: f64, xi: f64, t: f64) -> f64 {
    log_sum_exp(pi0.iter().enumerate().map(|(i, p)| {
        let e = spectrum.energy(i);
        p.ln() + sigma * e * xi - 0.5 * sigma * sigma * e * e * t
    }))
}

/// Left-point discretization of `σ∫H dξ − ½σ²∫H² ds` at every grid point.
pub fn log_density_discrete(sigma: f64, grid: &PathGrid, xi: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    if xi.len() != grid.len() || h.len() != grid.len() {
        return Err(Error::GridMismatch("xi and H must cover the grid".into()));
    }
    let dt = grid.dt();
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..grid.len() {
        let hj = h[k - 1];
        acc += sigma * hj * (xi[k] - xi[k - 1]) - 0.5 * sigma * sigma * hj * hj * dt;
        out.push(acc);
    }
    Ok(out)
}

/// Itô sum of the same exponent with the second-order correction
/// `½σ²Vₖ(Δξₖ² − dt)` on each step, from `dHₜ = σVₜdWₜ`. Strong order one
/// where the plain left-point sum is order one half.
pub fn log_density_milstein(sigma: f64, grid: &PathGrid, xi: &[f64], h: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if xi.len() != grid.len() || h.len() != grid.len() || v.len() != grid.len() {
        return Err(Error::GridMismatch("xi, H and V must cover the grid".into()));
    }
    let dt = grid.dt();
    let s2 = sigma * sigma;
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..grid.len() {
        let (hj, vj) = (h[k - 1], v[k - 1]);
        let dxi = xi[k] - xi[k - 1];
        acc += sigma * hj * dxi - 0.5 * s2 * hj * hj * dt + 0.5 * s2 * vj * (dxi * dxi - dt);
        out.push(acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{decompose, InitialState, Level};

    fn two_level() -> (Spectrum, LudersDecomposition) {
        let s = Spectrum::nondegenerate(&[0.0, 1.0]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let dec = decompose(&s, &InitialState::from_real(&[h, h]).unwrap()).unwrap();
        (s, dec)
    }

    #[test]
    fn information_path_examples() {
        let s = Spectrum::nondegenerate(&[0.0, 1.0]).unwrap();
        let g = PathGrid::new(1.0, 10).unwrap();
        let noise = sample_brownian(g, SeedPolicy::new(1), 0);
        let m = ModelKind::asymptotic(1.0).unwrap();
        assert_eq!(information_path(&m, 0, &noise, &s).unwrap(), noise.values);

        let zero = NoisePath {
            grid: g,
            values: vec![0.0; 11],
            kind: NoiseKind::Bridge { horizon: 1.0 },
        };
        let m = ModelKind::finite_time(1.0, 1.0).unwrap();
        let xi = information_path(&m, 1, &zero, &s).unwrap();
        for (k, x) in xi.iter().enumerate() {
            assert_eq!(*x, g.time(k));
        }
        assert!(matches!(
            information_path(&m, 1, &noise, &s),
            Err(Error::NoiseMismatch(_))
        ));

        let m = ModelKind::asymptotic(2.0).unwrap();
        let zero = NoisePath {
            kind: NoiseKind::Brownian,
            ..zero
        };
        let xi = information_path(&m, 1, &zero, &s).unwrap();
        assert!((xi[10] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn conditional_probability_examples() {
        let (s, dec) = two_level();
        let pi0 = dec.probabilities();
        for m in [
            ModelKind::asymptotic(1.0).unwrap(),
            ModelKind::finite_time(1.0, 1.0).unwrap(),
        ] {
            let p = conditional_probabilities(&m, &s, pi0, 0.0, 0.0).unwrap();
            assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        }
        let m = ModelKind::asymptotic(1.0).unwrap();
        let p = conditional_probabilities(&m, &s, pi0, 1.0, 1.0).unwrap();
        let e = 0.5f64.exp();
        assert!((p[1] - e / (1.0 + e)).abs() < 1e-15);
        assert!((p[1] - 0.622_459_331_201_854_6).abs() < 1e-15);
        assert!((p[0] - 0.377_540_668_798_145_4).abs() < 1e-15);

        let m = ModelKind::finite_time(1.0, 1.0).unwrap();
        assert_eq!(conditional_probabilities(&m, &s, pi0, 1.0, 1.0).unwrap(), vec![0.0, 1.0]);
        assert!(matches!(
            conditional_probabilities(&m, &s, pi0, 1.0, 1.5),
            Err(Error::BeyondCollapse { .. })
        ));
    }

    #[test]
    fn terminal_tie_goes_to_lowest_index() {
        let (s, dec) = two_level();
        let m = ModelKind::finite_time(1.0, 1.0).unwrap();
        // scores 0 and ξ − ½ tie at ξ = ½
        let p = conditional_probabilities(&m, &s, dec.probabilities(), 0.5, 1.0).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
    }

    #[test]
    fn terminal_rule_skips_zero_probability_levels() {
        let s = Spectrum::nondegenerate(&[0.0, 1.0, 2.0]).unwrap();
        let m = ModelKind::finite_time(1.0, 1.0).unwrap();
        let p = conditional_probabilities(&m, &s, &[0.5, 0.0, 0.5], 1.0, 1.0).unwrap();
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn log_sum_exp_survives_huge_exponents() {
        let s = Spectrum::nondegenerate(&[0.0, 10.0]).unwrap();
        let m = ModelKind::asymptotic(10.0).unwrap();
        let p = conditional_probabilities(&m, &s, &[0.5, 0.5], 1e4, 100.0).unwrap();
        assert!(p.iter().all(|x| x.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_and_variance_examples() {
        let s = Spectrum::nondegenerate(&[0.0, 1.0]).unwrap();
        assert_eq!(energy_and_variance(&[1.0, 0.0], &s), (0.0, 0.0));
        assert_eq!(energy_and_variance(&[0.5, 0.5], &s), (0.5, 0.25));
        let (h, v) = energy_and_variance(&[0.377541, 0.622459], &s);
        assert!((h - 0.622459).abs() < 1e-12);
        assert!((v - 0.377541 * 0.622459).abs() < 1e-12);
        assert!((v - 0.235004).abs() < 1e-6);
    }

    #[test]
    fn conditional_expectation_examples() {
        let s = Spectrum::nondegenerate(&[0.0, 2.0]).unwrap();
        let p = [0.5, 0.5];
        assert_eq!(conditional_expectation_of(|x| x * x, &p, &s), 2.0);
        assert_eq!(conditional_expectation_of(|x| x, &p, &s), energy_and_variance(&p, &s).0);
        let ind = |x: f64| if x == 2.0 { 1.0 } else { 0.0 };
        assert_eq!(conditional_expectation_of(ind, &[0.3, 0.7], &s), 0.7);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(shannon_entropy(&[0.0, 1.0, 0.0]), 0.0);
        assert!((shannon_entropy(&[0.25; 4]) - 4f64.ln()).abs() < 1e-15);
        assert!((shannon_entropy(&[0.25, 0.5, 0.25]) - 1.039_720_770_839_917_9).abs() < 1e-15);
    }

    #[test]
    fn state_vector_examples() {
        let s = Spectrum::new(vec![
            Level { energy: -1.0, multiplicity: 1 },
            Level { energy: 0.0, multiplicity: 2 },
            Level { energy: 2.0, multiplicity: 1 },
        ])
        .unwrap();
        let psi0 = InitialState::new(vec![
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, 0.5),
            Complex64::new(-0.5, 0.0),
            Complex64::new(0.3, 0.4),
        ])
        .unwrap();
        let dec = decompose(&s, &psi0).unwrap();
        let sv = state_vector(dec.probabilities(), &dec, &s, 0.0).unwrap();
        for (a, b) in sv.amplitudes.iter().zip(psi0.amplitudes()) {
            assert!((a - b).norm() < 1e-15);
        }
        let sv = state_vector(&[0.0, 1.0, 0.0], &dec, &s, 0.7).unwrap();
        let phi = dec.state(1).unwrap();
        for (a, b) in sv.amplitudes.iter().zip(phi) {
            assert!((a - b).norm() < 1e-15);
        }
        let sv = state_vector(&[0.0, 0.0, 1.0], &dec, &s, 0.7).unwrap();
        let rot = Complex64::from_polar(1.0, -1.4);
        assert!((sv.amplitudes[3] - dec.state(2).unwrap()[3] * rot).norm() < 1e-15);
        let sv = state_vector(&[0.1, 0.6, 0.3], &dec, &s, 3.3).unwrap();
        assert!((sv.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn state_vector_rejects_absent_level() {
        let s = Spectrum::nondegenerate(&[0.0, 1.0]).unwrap();
        let dec = decompose(&s, &InitialState::from_real(&[1.0, 0.0]).unwrap()).unwrap();
        assert!(matches!(
            state_vector(&[0.5, 0.5], &dec, &s, 0.0),
            Err(Error::ZeroProbabilityLevel(1))
        ));
    }

    #[test]
    fn innovation_of_single_level_is_noise() {
        let s = Spectrum::nondegenerate(&[0.0]).unwrap();
        let dec = decompose(&s, &InitialState::from_real(&[1.0]).unwrap()).unwrap();
        let m = ModelKind::asymptotic(1.3).unwrap();
        let f = Filter::new(m, &s, dec.probabilities()).unwrap();
        let g = PathGrid::new(1.0, 100).unwrap();
        let r = simulate_path(&f, &s, &dec, g, SeedPolicy::new(4), 9).unwrap();
        let noise = sample_brownian(g, SeedPolicy::new(4), 9);
        assert_eq!(r.w, noise.values);
        assert_eq!(r.xi, noise.values);
        assert!(r.h.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn innovation_quadratic_variation() {
        let (s, dec) = two_level();
        let m = ModelKind::asymptotic(1.0).unwrap();
        let f = Filter::new(m, &s, dec.probabilities()).unwrap();
        let g = PathGrid::new(1.0, 10_000).unwrap();
        let r = simulate_path(&f, &s, &dec, g, SeedPolicy::new(8), 0).unwrap();
        let qv: f64 = r.w.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
        assert!((qv - 1.0).abs() < 0.05, "qv {qv}");
        assert_eq!(r.w[0], 0.0);
    }

    #[test]
    fn conditioned_curves() {
        let s = Spectrum::nondegenerate(&[0.0]).unwrap();
        let g = PathGrid::new(1.0, 50).unwrap();
        let noise = sample_brownian(g, SeedPolicy::new(1), 0);
        let m = ModelKind::asymptotic(1.0).unwrap();
        let c = conditioned_energy_curve(&m, &s, &[1.0], 0, &noise).unwrap();
        assert!(c.iter().all(|&h| h == 0.0));

        let (s, _) = two_level();
        let g = PathGrid::new(1.0, 256).unwrap();
        let bridge = sample_bridge(g, SeedPolicy::new(1), 0);
        let m = ModelKind::finite_time(1.0, 1.0).unwrap();
        let c = conditioned_energy_curve(&m, &s, &[0.5, 0.5], 1, &bridge).unwrap();
        assert_eq!(c[256], 1.0);
        let c = conditioned_energy_curve(&m, &s, &[0.5, 0.5], 0, &bridge).unwrap();
        assert_eq!(c[256], 0.0);
        assert!(matches!(
            conditioned_energy_curve(&m, &s, &[1.0, 0.0], 1, &bridge),
            Err(Error::ZeroProbabilityLevel(1))
        ));

        // Oracle: Hₜ = 1/(1 + M) with M = exp(−σBₜ − ½σ²t) for two levels (0, 1)
        // conditioned on E = 1 with equal prior weights.
        let g = PathGrid::new(40.0, 4000).unwrap();
        let b = sample_brownian(g, SeedPolicy::new(2), 0);
        let m = ModelKind::asymptotic(1.0).unwrap();
        let c = conditioned_energy_curve(&m, &s, &[0.5, 0.5], 1, &b).unwrap();
        for k in [0, 100, 1000, 4000] {
            let t = g.time(k);
            let mk = (-b.values[k] - 0.5 * t).exp();
            assert!((c[k] - 1.0 / (1.0 + mk)).abs() < 1e-12);
        }
        assert!((1.0 - c[4000]) < 1e-6);
    }

    #[test]
    fn density_identity_at_fixed_point() {
        let (s, dec) = two_level();
        let g = PathGrid::new(1.0, 4).unwrap();
        let xi = [0.0; 5];
        let h = [0.5; 5];
        let d = log_density_discrete(1.0, &g, &xi, &h).unwrap();
        assert!((d[4] + 0.125).abs() < 1e-15);
        let e = log_density_exact(&s, dec.probabilities(), 1.0, 0.0, 0.0);
        assert!(e.abs() < 1e-15);
    }
}
