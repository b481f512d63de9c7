//! Experiment configuration, read from a single TOML document.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::closedform::ModelKind;
use crate::error::{Error, Result};
use crate::noise::PathGrid;
use crate::spectrum::{decompose, initial_moments, InitialState, Level, LudersDecomposition, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    Asymptotic,
    FiniteTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelName,
    pub sigma: f64,
    /// Collapse time `T` of the finite-time model.
    #[serde(default, rename = "T", alias = "horizon")]
    pub horizon: Option<f64>,
    /// End of the simulated window for the asymptotic model.
    #[serde(default)]
    pub t_end: Option<f64>,
    /// Alternative to `t_end`: the window in units of the reduction time `1/(σ²V₀)`.
    #[serde(default)]
    pub reduction_times: Option<f64>,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub paths: usize,
    pub seed: u64,
    /// Multiple-comparison threshold for the z-score tests.
    #[serde(default = "default_z_crit")]
    pub z_crit: f64,
}

fn default_z_crit() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    /// `[energy, multiplicity]` pairs in increasing energy order.
    pub levels: Vec<(f64, usize)>,
    /// `[re, im]` amplitude pairs over the basis.
    pub psi0: Vec<(f64, f64)>,
    /// Rescale `psi0` to unit norm instead of rejecting it.
    #[serde(default)]
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSection {
    pub diagonal: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Product {
    Trajectories,
    Summary,
    Verify,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_products")]
    pub products: Vec<Product>,
    /// Times at which series are recorded; snapped to the nearest grid point.
    #[serde(default)]
    pub output_times: Option<Vec<f64>>,
    /// Number of evenly spaced intervals when `output_times` is absent.
    #[serde(default = "default_output_points")]
    pub output_points: usize,
    /// Write every grid point to the trajectory CSV.
    #[serde(default)]
    pub full_resolution: bool,
    /// How many paths, starting from index 0, go to the trajectory CSV.
    #[serde(default = "default_trajectory_paths")]
    pub trajectory_paths: usize,
}

fn default_products() -> Vec<Product> {
    vec![Product::Trajectories, Product::Summary]
}

fn default_output_points() -> usize {
    64
}

fn default_trajectory_paths() -> usize {
    4
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            products: default_products(),
            output_times: None,
            output_points: default_output_points(),
            full_resolution: false,
            trajectory_paths: default_trajectory_paths(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Relative tolerance for the per-path quadratic variation of W.
    #[serde(default = "default_qv_tolerance")]
    pub qv_tolerance: f64,
    /// Additive tolerance for the quadrature in the entropy identity.
    #[serde(default = "default_quadrature_tolerance")]
    pub quadrature_tolerance: f64,
    /// Relative tolerance for the noise variance in the independence test.
    #[serde(default = "default_variance_tolerance")]
    pub variance_tolerance: f64,
    /// Times at which the independence test probes the noise; defaults to quarters of the window.
    #[serde(default)]
    pub probe_times: Option<Vec<f64>>,
    /// Extra times at which the variance decay bound is checked.
    #[serde(default)]
    pub bound_times: Option<Vec<f64>>,
}

fn default_qv_tolerance() -> f64 {
    0.05
}

fn default_quadrature_tolerance() -> f64 {
    0.01
}

fn default_variance_tolerance() -> f64 {
    0.05
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            qv_tolerance: default_qv_tolerance(),
            quadrature_tolerance: default_quadrature_tolerance(),
            variance_tolerance: default_variance_tolerance(),
            probe_times: None,
            bound_times: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    /// Step counts; each must divide the largest.
    pub steps: Vec<usize>,
    #[serde(default)]
    pub paths: Option<usize>,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self {
            steps: vec![64, 256, 1024, 4096],
            paths: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimechangeSection {
    pub steps: Vec<usize>,
    #[serde(default)]
    pub paths: Option<usize>,
    /// Fraction of `[0, T]` over which the two clocks are compared.
    #[serde(default = "default_horizon_fraction")]
    pub horizon_fraction: f64,
}

fn default_horizon_fraction() -> f64 {
    0.9
}

impl Default for TimechangeSection {
    fn default() -> Self {
        Self {
            steps: vec![1024, 2048, 4096],
            paths: None,
            horizon_fraction: default_horizon_fraction(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub ensemble: EnsembleSection,
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub observable: Option<ObservableSection>,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub convergence: ConvergenceSection,
    #[serde(default)]
    pub timechange: TimechangeSection,
}

/// Validated, ready-to-run form of a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: RunConfig,
    pub model: ModelKind,
    pub spectrum: Spectrum,
    pub psi0: InitialState,
    pub dec: LudersDecomposition,
    pub grid: PathGrid,
    pub observable: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let location = e
                .span()
                .map(|span| {
                    let (line, col) = line_col(text, span.start);
                    format!(" at line {line}, column {col}")
                })
                .unwrap_or_default();
            Error::Config(format!("{}{location}", e.message()))
        })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn build(&self) -> Result<Experiment> {
        let levels = self
            .spectrum
            .levels
            .iter()
            .map(|&(energy, multiplicity)| Level {
                energy,
                multiplicity,
            })
            .collect();
        let spectrum = Spectrum::new(levels)?;
        let amps: Vec<Complex64> = self
            .spectrum
            .psi0
            .iter()
            .map(|&(re, im)| Complex64::new(re, im))
            .collect();
        let psi0 = if self.spectrum.normalize {
            InitialState::normalized(amps)?
        } else {
            InitialState::new(amps)?
        };
        let dec = decompose(&spectrum, &psi0)?;

        let m = &self.model;
        if m.steps < 2 {
            return Err(Error::Config("model.steps must be at least 2".into()));
        }
        if self.ensemble.paths < 1 {
            return Err(Error::Config("ensemble.paths must be at least 1".into()));
        }
        let (model, t_end) = match m.kind {
            ModelName::Asymptotic => {
                if m.horizon.is_some() {
                    return Err(Error::Config("model.T applies only to the finite_time model".into()));
                }
                let t_end = match (m.t_end, m.reduction_times) {
                    (Some(t), None) => t,
                    (None, Some(n)) => {
                        let v0 = initial_moments(&dec, &spectrum).variance;
                        if v0 == 0.0 {
                            return Err(Error::Config(
                                "model.reduction_times needs a state with non-zero energy variance".into(),
                            ));
                        }
                        n / (m.sigma * m.sigma * v0)
                    }
                    _ => {
                        return Err(Error::Config(
                            "asymptotic model needs exactly one of model.t_end and model.reduction_times".into(),
                        ))
                    }
                };
                (ModelKind::asymptotic(m.sigma)?, t_end)
            }
            ModelName::FiniteTime => {
                if m.t_end.is_some() || m.reduction_times.is_some() {
                    return Err(Error::Config(
                        "finite_time model takes model.T, not model.t_end".into(),
                    ));
                }
                let horizon = m
                    .horizon
                    .ok_or_else(|| Error::Config("finite_time model needs model.T".into()))?;
                (ModelKind::finite_time(m.sigma, horizon)?, horizon)
            }
        };
        let grid = PathGrid::new(t_end, m.steps)?;
        let observable = match &self.observable {
            Some(o) => {
                if o.diagonal.len() != spectrum.dimension() {
                    return Err(Error::Config(format!(
                        "observable.diagonal has {} entries, the basis has {}",
                        o.diagonal.len(),
                        spectrum.dimension()
                    )));
                }
                Some(o.diagonal.clone())
            }
            None => None,
        };
        Ok(Experiment {
            config: self.clone(),
            model,
            spectrum,
            psi0,
            dec,
            grid,
            observable,
        })
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

impl Experiment {
    /// Nearest grid index of time `t`.
    pub fn grid_index(&self, t: f64) -> usize {
        ((t / self.grid.dt()).round() as usize).min(self.grid.steps)
    }

    /// Times at which the independence test probes the noise.
    pub fn probe_times(&self) -> Vec<f64> {
        match &self.config.verify.probe_times {
            Some(t) => t.clone(),
            None => [0.25, 0.5, 0.75].iter().map(|f| f * self.grid.t_end).collect(),
        }
    }

    /// Times at which the variance decay bound is checked besides the output times.
    pub fn bound_times(&self) -> Vec<f64> {
        self.config.verify.bound_times.clone().unwrap_or_default()
    }

    /// Grid indices of the recorded output times, increasing and deduplicated.
    pub fn output_indices(&self) -> Result<Vec<usize>> {
        let steps = self.grid.steps;
        let mut idx: Vec<usize> = match &self.config.output.output_times {
            Some(times) => {
                let mut out = Vec::with_capacity(times.len());
                for &t in times {
                    if !(t >= 0.0 && t <= self.grid.t_end * (1.0 + 1e-12)) {
                        return Err(Error::Config(format!(
                            "output time {t} lies outside [0, {}]",
                            self.grid.t_end
                        )));
                    }
                    out.push(self.grid_index(t));
                }
                out
            }
            None => {
                let m = self.config.output.output_points.clamp(1, steps);
                (0..=m)
                    .map(|j| ((j as f64 * steps as f64 / m as f64).round() as usize).min(steps))
                    .collect()
            }
        };
        for &t in self.probe_times().iter().chain(self.bound_times().iter()) {
            if t >= 0.0 && t <= self.grid.t_end {
                idx.push(self.grid_index(t));
            }
        }
        idx.push(0);
        idx.push(steps);
        idx.sort_unstable();
        idx.dedup();
        Ok(idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[model]
kind = "asymptotic"
sigma = 1.0
reduction_times = 30.0
steps = 64

[ensemble]
paths = 10
seed = 3

[spectrum]
levels = [[0.0, 1], [1.0, 1]]
psi0 = [[0.7071067811865476, 0.0], [0.7071067811865476, 0.0]]
"#;

    #[test]
    fn parses_and_builds() {
        let c = RunConfig::from_toml_str(BASIC).unwrap();
        let e = c.build().unwrap();
        assert!((e.grid.t_end - 120.0).abs() < 1e-9);
        assert_eq!(e.output_indices().unwrap().len(), 65);
        assert_eq!(c.hash(), RunConfig::from_toml_str(BASIC).unwrap().hash());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn reports_line_of_bad_field() {
        let text = BASIC.replace("seed = 3", "seed = 3\ncolour = 1");
        let err = RunConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("line 11"), "{err}");
        assert!(err.contains("colour"), "{err}");
    }

    #[test]
    fn rejects_mixed_model_fields() {
        let text = BASIC.replace("reduction_times = 30.0", "T = 1.0");
        let c = RunConfig::from_toml_str(&text).unwrap();
        assert!(matches!(c.build(), Err(Error::Config(_))));

        let text = BASIC.replace("kind = \"asymptotic\"", "kind = \"finite_time\"");
        let c = RunConfig::from_toml_str(&text).unwrap();
        assert!(matches!(c.build(), Err(Error::Config(_))));

        let text = BASIC.replace("reduction_times = 30.0", "reduction_times = 30.0\nt_end = 2.0");
        let c = RunConfig::from_toml_str(&text).unwrap();
        assert!(matches!(c.build(), Err(Error::Config(_))));

        let text = BASIC.replace("steps = 64", "steps = 1");
        assert!(RunConfig::from_toml_str(&text).unwrap().build().is_err());
    }

    #[test]
    fn output_times_snap_to_grid() {
        let text = BASIC.replace("reduction_times = 30.0", "t_end = 1.0")
            + "\n[output]\noutput_times = [0.5, 0.26, 0.25]\n";
        let e = RunConfig::from_toml_str(&text).unwrap().build().unwrap();
        assert_eq!(e.output_indices().unwrap(), vec![0, 16, 17, 32, 48, 64]);
        let text = BASIC.replace("reduction_times = 30.0", "t_end = 1.0")
            + "\n[output]\noutput_times = [2.0]\n";
        let e = RunConfig::from_toml_str(&text).unwrap().build().unwrap();
        assert!(e.output_indices().is_err());
    }
}
