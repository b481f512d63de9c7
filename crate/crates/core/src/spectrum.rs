//! Hamiltonian spectrum, initial state and its Lüders decomposition.
//!
//! The Hamiltonian is given in its eigenbasis: basis vectors are grouped into
//! consecutive blocks, one block per energy level, with block length equal to
//! the level's multiplicity.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used for every normalization check on input states.
pub const NORM_TOL: f64 = 1e-12;

/// One energy level `E` with its degeneracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub energy: f64,
    pub multiplicity: usize,
}

/// Ordered list of distinct energy levels.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    levels: Vec<Level>,
    offsets: Vec<usize>,
    dimension: usize,
}

impl Spectrum {
    pub fn new(levels: Vec<Level>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidSpectrum("no levels".into()));
        }
        for (i, level) in levels.iter().enumerate() {
            if !level.energy.is_finite() {
                return Err(Error::InvalidSpectrum(format!("level {i} has non-finite energy")));
            }
            if level.multiplicity == 0 {
                return Err(Error::InvalidSpectrum(format!("level {i} has zero multiplicity")));
            }
        }
        if levels.windows(2).any(|w| w[1].energy <= w[0].energy) {
            return Err(Error::InvalidSpectrum(
                "energies must be strictly increasing".into(),
            ));
        }
        let mut offsets = Vec::with_capacity(levels.len() + 1);
        let mut acc = 0;
        for level in &levels {
            offsets.push(acc);
            acc += level.multiplicity;
        }
        offsets.push(acc);
        Ok(Self {
            levels,
            offsets,
            dimension: acc,
        })
    }

    /// Non-degenerate spectrum from a list of energies.
    pub fn nondegenerate(energies: &[f64]) -> Result<Self> {
        Self::new(
            energies
                .iter()
                .map(|&energy| Level {
                    energy,
                    multiplicity: 1,
                })
                .collect(),
        )
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn energy(&self, level: usize) -> f64 {
        self.levels[level].energy
    }

    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy).collect()
    }

    /// Basis index range belonging to `level`.
    pub fn block(&self, level: usize) -> std::ops::Range<usize> {
        self.offsets[level]..self.offsets[level + 1]
    }

    /// Energy of every basis vector, i.e. the diagonal of the Hamiltonian.
    pub fn basis_energies(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dimension);
        for level in &self.levels {
            out.extend(std::iter::repeat_n(level.energy, level.multiplicity));
        }
        out
    }

    /// Level index of every basis vector.
    pub fn basis_levels(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.dimension);
        for (i, level) in self.levels.iter().enumerate() {
            out.extend(std::iter::repeat_n(i, level.multiplicity));
        }
        out
    }
}

/// Initial pure state, coefficients in the Hamiltonian eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    amplitudes: Vec<Complex64>,
}

impl InitialState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidParameter("non-finite amplitude".into()));
        }
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized {
                norm_sq,
                tol: NORM_TOL,
            });
        }
        Ok(Self { amplitudes })
    }

    /// Builds a state from real amplitudes.
    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::new(amplitudes.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    /// Rescales arbitrary non-zero amplitudes to unit norm.
    pub fn normalized(mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidParameter("cannot normalize a zero state".into()));
        }
        for a in &mut amplitudes {
            *a /= norm;
        }
        Self::new(amplitudes)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn dimension(&self) -> usize {
        self.amplitudes.len()
    }
}

/// Per-level transition probabilities and normalized Lüders states.
///
/// The phase of each Lüders state is inherited from the initial state's
/// projection, so `Σ √πᵢ |φᵢ⟩` reproduces the initial state exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct LudersDecomposition {
    probabilities: Vec<f64>,
    /// Full-dimension vectors supported on the level block; `None` when πᵢ = 0.
    states: Vec<Option<Vec<Complex64>>>,
}

impl LudersDecomposition {
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn state(&self, level: usize) -> Option<&[Complex64]> {
        self.states[level].as_deref()
    }

    pub fn n_levels(&self) -> usize {
        self.probabilities.len()
    }

    /// `Σᵢ √πᵢ |φᵢ⟩`.
    pub fn reconstruct(&self) -> Vec<Complex64> {
        let dim = self
            .states
            .iter()
            .flatten()
            .map(|s| s.len())
            .next()
            .unwrap_or(0);
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for (p, state) in self.probabilities.iter().zip(&self.states) {
            if let Some(state) = state {
                let w = p.sqrt();
                for (o, s) in out.iter_mut().zip(state) {
                    *o += s * w;
                }
            }
        }
        out
    }
}

/// Projects `psi0` onto each energy eigenspace.
pub fn decompose(spectrum: &Spectrum, psi0: &InitialState) -> Result<LudersDecomposition> {
    if psi0.dimension() != spectrum.dimension() {
        return Err(Error::DimensionMismatch {
            expected: spectrum.dimension(),
            actual: psi0.dimension(),
        });
    }
    let amps = psi0.amplitudes();
    let mut probabilities = Vec::with_capacity(spectrum.n_levels());
    let mut states = Vec::with_capacity(spectrum.n_levels());
    for level in 0..spectrum.n_levels() {
        let block = spectrum.block(level);
        let p: f64 = amps[block.clone()].iter().map(|a| a.norm_sqr()).sum();
        probabilities.push(p);
        if p > 0.0 {
            let norm = p.sqrt();
            let mut state = vec![Complex64::new(0.0, 0.0); spectrum.dimension()];
            for j in block {
                state[j] = amps[j] / norm;
            }
            states.push(Some(state));
        } else {
            states.push(None);
        }
    }
    // the input norm is 1 only to within NORM_TOL; an eigenstate gets π = 1 exactly
    let total: f64 = probabilities.iter().sum();
    for p in &mut probabilities {
        *p /= total;
    }
    Ok(LudersDecomposition {
        probabilities,
        states,
    })
}

/// Initial energy mean, variance, Shannon entropy and unscaled reduction time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialMoments {
    pub energy: f64,
    pub variance: f64,
    pub entropy: f64,
    /// `1/V₀`; the reduction timescale is this divided by σ². Infinite for eigenstates.
    pub reduction_time: f64,
}

pub fn initial_moments(dec: &LudersDecomposition, spectrum: &Spectrum) -> InitialMoments {
    let pi = dec.probabilities();
    let energy: f64 = pi
        .iter()
        .enumerate()
        .map(|(i, p)| p * spectrum.energy(i))
        .sum();
    let variance: f64 = pi
        .iter()
        .enumerate()
        .map(|(i, p)| p * (spectrum.energy(i) - energy).powi(2))
        .sum();
    let entropy = -pi
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>();
    InitialMoments {
        energy,
        variance,
        entropy: entropy.max(0.0),
        reduction_time: 1.0 / variance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn symmetric_two_level() {
        let s = Spectrum::nondegenerate(&[0.0, 1.0]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let psi = InitialState::from_real(&[h, h]).unwrap();
        let dec = decompose(&s, &psi).unwrap();
        assert!((dec.probabilities()[0] - 0.5).abs() < 1e-15);
        assert!((dec.probabilities()[1] - 0.5).abs() < 1e-15);
        assert!((dec.state(0).unwrap()[0] - c(1.0)).norm() < 1e-15);
        assert_eq!(dec.state(0).unwrap()[1], c(0.0));
        assert!((dec.state(1).unwrap()[1] - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn single_degenerate_level_keeps_state() {
        let s = Spectrum::new(vec![Level {
            energy: 0.0,
            multiplicity: 2,
        }])
        .unwrap();
        let psi = InitialState::from_real(&[0.6, 0.8]).unwrap();
        let dec = decompose(&s, &psi).unwrap();
        assert!((dec.probabilities()[0] - 1.0).abs() < 1e-15);
        let phi = dec.state(0).unwrap();
        assert!((phi[0] - c(0.6)).norm() < 1e-15);
        assert!((phi[1] - c(0.8)).norm() < 1e-15);
    }

    #[test]
    fn three_levels_with_degeneracy() {
        let s = Spectrum::new(vec![
            Level { energy: -1.0, multiplicity: 1 },
            Level { energy: 0.0, multiplicity: 2 },
            Level { energy: 2.0, multiplicity: 1 },
        ])
        .unwrap();
        let psi = InitialState::from_real(&[0.5; 4]).unwrap();
        let dec = decompose(&s, &psi).unwrap();
        let pi = dec.probabilities();
        assert!((pi[0] - 0.25).abs() < 1e-15);
        assert!((pi[1] - 0.5).abs() < 1e-15);
        assert!((pi[2] - 0.25).abs() < 1e-15);
        let phi1 = dec.state(1).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let expected = [0.0, h, h, 0.0];
        for (a, e) in phi1.iter().zip(expected) {
            assert!((a - c(e)).norm() < 1e-15);
        }
    }

    #[test]
    fn moments_examples() {
        let s = Spectrum::nondegenerate(&[0.0, 1.0]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let dec = decompose(&s, &InitialState::from_real(&[h, h]).unwrap()).unwrap();
        let m = initial_moments(&dec, &s);
        assert!((m.energy - 0.5).abs() < 1e-15);
        assert!((m.variance - 0.25).abs() < 1e-15);
        assert!((m.entropy - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((m.reduction_time - 4.0).abs() < 1e-12);

        let s = Spectrum::nondegenerate(&[3.0]).unwrap();
        let dec = decompose(&s, &InitialState::from_real(&[1.0]).unwrap()).unwrap();
        let m = initial_moments(&dec, &s);
        assert_eq!(m.energy, 3.0);
        assert_eq!(m.variance, 0.0);
        assert_eq!(m.entropy, 0.0);
        assert!(m.reduction_time.is_infinite());

        // H0 = 0.25, V0 = 0.25*1.5625 + 0.5*0.0625 + 0.25*3.0625 = 1.1875,
        // S0 = 1.5 ln 2 = 1.0397207708399179.
        let s = Spectrum::new(vec![
            Level { energy: -1.0, multiplicity: 1 },
            Level { energy: 0.0, multiplicity: 2 },
            Level { energy: 2.0, multiplicity: 1 },
        ])
        .unwrap();
        let dec = decompose(&s, &InitialState::from_real(&[0.5; 4]).unwrap()).unwrap();
        let m = initial_moments(&dec, &s);
        assert!((m.energy - 0.25).abs() < 1e-15);
        assert!((m.variance - 1.1875).abs() < 1e-14);
        assert!((m.entropy - 1.039_720_770_839_917_9).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Spectrum::nondegenerate(&[1.0, 1.0]).is_err());
        assert!(Spectrum::nondegenerate(&[]).is_err());
        assert!(Spectrum::new(vec![Level { energy: 0.0, multiplicity: 0 }]).is_err());
        assert!(matches!(
            InitialState::from_real(&[1.0, 1.0]),
            Err(Error::NotNormalized { .. })
        ));
        let s = Spectrum::nondegenerate(&[0.0, 1.0]).unwrap();
        let psi = InitialState::from_real(&[1.0]).unwrap();
        assert!(matches!(
            decompose(&s, &psi),
            Err(Error::DimensionMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn zero_probability_level_is_absent() {
        let s = Spectrum::nondegenerate(&[0.0, 1.0, 2.0]).unwrap();
        let dec = decompose(&s, &InitialState::from_real(&[0.6, 0.0, 0.8]).unwrap()).unwrap();
        assert_eq!(dec.probabilities()[1], 0.0);
        assert!(dec.state(1).is_none());
        let m = initial_moments(&dec, &s);
        assert!(m.variance > 0.0);
    }
}
