//! Von Neumann and Shannon density matrices of the ensemble.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::closedform::{state_vector, ModelKind};
use crate::ensemble::EnsembleRun;
use crate::error::Result;
use crate::spectrum::{LudersDecomposition, Spectrum};

/// Eigenvalues below this are treated as zero in entropies.
const EIGEN_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone)]
pub struct DensityMatrices {
    pub times: Vec<f64>,
    /// `ρₜ = E[|ψₜ⟩⟨ψₜ|]`.
    pub von_neumann: Vec<DMatrix<Complex64>>,
    /// `R̂₀ = Σᵢ πᵢ |φᵢ⟩⟨φᵢ|`, the Shannon state at time zero.
    pub shannon_initial: DMatrix<Complex64>,
    /// Exact `E[|ψₜ⟩⟨ψₜ|]` at each time.
    pub expected: Vec<DMatrix<Complex64>>,
    /// `−tr ρₜ ln ρₜ`.
    pub von_neumann_entropy: Vec<f64>,
    /// Ensemble mean of `−tr R̂ₜ ln R̂ₜ`.
    pub shannon_entropy: Vec<f64>,
}

/// Entropy `−Σλ ln λ` of a Hermitian matrix, from its eigenvalues.
pub fn matrix_entropy(m: &DMatrix<Complex64>) -> f64 {
    let eig = m.clone().symmetric_eigenvalues();
    let s = -eig
        .iter()
        .filter(|&&l| l > EIGEN_FLOOR)
        .map(|l| l * l.ln())
        .sum::<f64>();
    s.max(0.0)
}

/// `Σᵢ pᵢ |φᵢ⟩⟨φᵢ|`.
pub fn shannon_state(p: &[f64], dec: &LudersDecomposition, dim: usize) -> DMatrix<Complex64> {
    let mut r = DMatrix::zeros(dim, dim);
    for (i, &pi) in p.iter().enumerate() {
        if pi == 0.0 {
            continue;
        }
        if let Some(phi) = dec.state(i) {
            add_outer(&mut r, phi, pi);
        }
    }
    r
}

fn add_outer(m: &mut DMatrix<Complex64>, v: &[Complex64], weight: f64) {
    for (a, va) in v.iter().enumerate() {
        if *va == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (b, vb) in v.iter().enumerate() {
            m[(a, b)] += va * vb.conj() * weight;
        }
    }
}

/// `∫₀ᵗ σₛ² ds`.
fn integrated_coupling(model: &ModelKind, t: f64) -> f64 {
    match *model {
        ModelKind::Asymptotic { sigma } => sigma * sigma * t,
        ModelKind::FiniteTime { sigma, horizon } => {
            if t >= horizon {
                f64::INFINITY
            } else {
                sigma * sigma * horizon * t / (horizon - t)
            }
        }
    }
}

/// Ensemble mean of `|ψₜ⟩⟨ψₜ|`: the coherence between levels `i` and `j`
/// rotates at `Eᵢ − Eⱼ` and decays as `exp(−⅛(Eᵢ − Eⱼ)² ∫σₛ² ds)`.
pub fn expected_density(
    model: &ModelKind,
    dec: &LudersDecomposition,
    spectrum: &Spectrum,
    t: f64,
) -> DMatrix<Complex64> {
    let dim = spectrum.dimension();
    let lambda = integrated_coupling(model, t);
    let p = dec.probabilities();
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..p.len() {
        let Some(phi_i) = dec.state(i) else { continue };
        for j in 0..p.len() {
            let Some(phi_j) = dec.state(j) else { continue };
            let gap = spectrum.energy(i) - spectrum.energy(j);
            let decay = if i == j { 1.0 } else { (-0.125 * gap * gap * lambda).exp() };
            if decay == 0.0 {
                continue;
            }
            let c = Complex64::from_polar((p[i] * p[j]).sqrt() * decay, -gap * t);
            for a in spectrum.block(i) {
                for b in spectrum.block(j) {
                    m[(a, b)] += phi_i[a] * phi_j[b].conj() * c;
                }
            }
        }
    }
    m
}

pub fn density_matrices(
    run: &EnsembleRun,
    model: &ModelKind,
    dec: &LudersDecomposition,
    spectrum: &Spectrum,
) -> Result<DensityMatrices> {
    let dim = spectrum.dimension();
    let n = run.paths.len() as f64;
    let mut von_neumann = Vec::with_capacity(run.times.len());
    let mut von_neumann_entropy = Vec::with_capacity(run.times.len());
    let mut shannon_entropy = Vec::with_capacity(run.times.len());
    for (j, &t) in run.times.iter().enumerate() {
        let mut rho = DMatrix::zeros(dim, dim);
        let mut s_sum = 0.0;
        for path in &run.paths {
            let p = &path.pi[j];
            let psi = state_vector(p, dec, spectrum, t)?;
            add_outer(&mut rho, &psi.amplitudes, 1.0);
            s_sum += matrix_entropy(&shannon_state(p, dec, dim));
        }
        rho /= Complex64::new(n, 0.0);
        von_neumann_entropy.push(matrix_entropy(&rho));
        shannon_entropy.push(s_sum / n);
        von_neumann.push(rho);
    }
    Ok(DensityMatrices {
        times: run.times.clone(),
        von_neumann,
        shannon_initial: shannon_state(dec.probabilities(), dec, dim),
        expected: run.times.iter().map(|&t| expected_density(model, dec, spectrum, t)).collect(),
        von_neumann_entropy,
        shannon_entropy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityResult {
    pub passed: bool,
    pub initial_von_neumann_entropy: f64,
    pub initial_shannon_entropy: f64,
    pub final_von_neumann_entropy: f64,
    pub final_shannon_entropy: f64,
    /// `‖ρ_end − E[ρ_end]‖_F` against its tolerance.
    pub terminal_distance: f64,
    pub terminal_tolerance: f64,
    /// `‖ρ_end − R̂₀‖_F`.
    pub distance_to_shannon_initial: f64,
    /// `‖E[ρ_end] − R̂₀‖_F`, the coherence not yet destroyed at the end of the window.
    pub residual_coherence: f64,
}

fn frobenius(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// `S(ρ₀) = 0`, `E[S(R̂₀)] = S₀`, and `ρ_end` matches its exact mean within
/// Monte Carlo error. For pure states `E‖ρ̂ − ρ‖²_F = (1 − ‖ρ‖²_F)/n`.
pub fn density_test(dm: &DensityMatrices, s0: f64, n_paths: usize, z_crit: f64) -> DensityResult {
    let last = dm.times.len() - 1;
    let expected = &dm.expected[last];
    let terminal_distance = frobenius(&(&dm.von_neumann[last] - expected));
    let purity = frobenius(expected).powi(2);
    let terminal_tolerance = z_crit * ((1.0 - purity).max(0.0) / n_paths as f64).sqrt() + 1e-8;
    let initial_von_neumann_entropy = dm.von_neumann_entropy[0];
    let initial_shannon_entropy = dm.shannon_entropy[0];
    let passed = initial_von_neumann_entropy <= 1e-8
        && (initial_shannon_entropy - s0).abs() <= 1e-8
        && terminal_distance <= terminal_tolerance;
    DensityResult {
        passed,
        initial_von_neumann_entropy,
        initial_shannon_entropy,
        final_von_neumann_entropy: dm.von_neumann_entropy[last],
        final_shannon_entropy: dm.shannon_entropy[last],
        terminal_distance,
        terminal_tolerance,
        distance_to_shannon_initial: frobenius(&(&dm.von_neumann[last] - &dm.shannon_initial)),
        residual_coherence: frobenius(&(expected - &dm.shannon_initial)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{decompose, InitialState, Level};

    #[test]
    fn shannon_state_entropy_matches_probabilities() {
        let s = Spectrum::new(vec![
            Level { energy: -1.0, multiplicity: 1 },
            Level { energy: 0.0, multiplicity: 2 },
            Level { energy: 2.0, multiplicity: 1 },
        ])
        .unwrap();
        let dec = decompose(&s, &InitialState::from_real(&[0.5; 4]).unwrap()).unwrap();
        let r = shannon_state(dec.probabilities(), &dec, 4);
        assert!((matrix_entropy(&r) - 1.039_720_770_839_917_9).abs() < 1e-12);
        let pure = shannon_state(&[0.0, 1.0, 0.0], &dec, 4);
        assert!(matrix_entropy(&pure).abs() < 1e-12);
    }

    #[test]
    fn expected_density_limits() {
        let s = Spectrum::new(vec![
            Level { energy: -1.0, multiplicity: 1 },
            Level { energy: 0.0, multiplicity: 2 },
            Level { energy: 2.0, multiplicity: 1 },
        ])
        .unwrap();
        let psi = InitialState::from_real(&[0.5; 4]).unwrap();
        let dec = decompose(&s, &psi).unwrap();
        let model = ModelKind::finite_time(1.0, 1.0).unwrap();
        let rho0 = expected_density(&model, &dec, &s, 0.0);
        for a in 0..4 {
            for b in 0..4 {
                assert!((rho0[(a, b)] - Complex64::new(0.25, 0.0)).norm() < 1e-15);
            }
        }
        let end = expected_density(&model, &dec, &s, 1.0);
        let r0 = shannon_state(dec.probabilities(), &dec, 4);
        assert!(frobenius(&(end - r0)).abs() < 1e-15);
        // one coherence between E = -1 and E = 0 at t = 8 in the asymptotic model
        let asym = ModelKind::asymptotic(1.0).unwrap();
        let m = expected_density(&asym, &dec, &s, 8.0);
        let want = Complex64::from_polar(0.25 * (-1.0f64).exp(), 8.0);
        assert!((m[(0, 1)] - want).norm() < 1e-15);
    }
}
