//! Ensemble-level statistical checks.
//!
//! Series are passed as `series[j][p]`: output point `j`, path `p`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::stats::{exact_tol, mean, Stat};
use crate::error::{Error, Result};

/// Minimum ensemble size for the z-score tests.
pub const MIN_PATHS: usize = 100;

fn check_paths(series: &[Vec<f64>]) -> Result<usize> {
    let n = series.first().map_or(0, |s| s.len());
    if n < MIN_PATHS {
        return Err(Error::InvalidParameter(format!(
            "at least {MIN_PATHS} paths are needed, got {n}"
        )));
    }
    if series.iter().any(|s| s.len() != n) {
        return Err(Error::InvalidParameter("ragged ensemble series".into()));
    }
    Ok(n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleResult {
    pub passed: bool,
    pub z: Vec<f64>,
    pub max_abs_z: f64,
    /// First output point at which the check fails.
    pub first_failure: Option<usize>,
}

/// `|mean − reference| ≤ z_crit·SE` at every output point. A series with no
/// spread at some point must equal the reference there.
pub fn martingale_test(series: &[Vec<f64>], reference: f64, z_crit: f64) -> Result<MartingaleResult> {
    check_paths(series)?;
    let z: Vec<f64> = series.iter().map(|s| Stat::of(s).z(reference)).collect();
    let first_failure = z.iter().position(|z| !(z.abs() <= z_crit));
    let max_abs_z = z.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    Ok(MartingaleResult {
        passed: first_failure.is_none(),
        z,
        max_abs_z,
        first_failure,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialResult {
    pub passed: bool,
    /// Largest z-score of an increase between consecutive output points.
    pub max_increase_z: f64,
    pub monotone: bool,
    /// Largest `mean − bound − 3·SE` over the bound checks; negative means satisfied.
    pub worst_bound_margin: Option<f64>,
    pub bound_ok: bool,
    pub means: Vec<f64>,
}

/// Non-increase of the ensemble mean between consecutive output points
/// (paired differences, 3 SE) and, when `bound` = `(V₀, σ)` is given,
/// `E[Vₜ] ≤ √(V₀/(σ²t)) + 3·SE` at every `t > 0`.
pub fn potential_test(times: &[f64], series: &[Vec<f64>], bound: Option<(f64, f64)>) -> Result<PotentialResult> {
    check_paths(series)?;
    if times.len() != series.len() {
        return Err(Error::InvalidParameter("times and series differ in length".into()));
    }
    let stats: Vec<Stat> = series.iter().map(|s| Stat::of(s)).collect();
    let mut max_increase_z = f64::NEG_INFINITY;
    let mut monotone = true;
    for j in 1..series.len() {
        let diff: Vec<f64> = series[j].iter().zip(&series[j - 1]).map(|(b, a)| b - a).collect();
        let d = Stat::of(&diff);
        let z = if d.se == 0.0 {
            if d.mean <= exact_tol(stats[j - 1].mean) { 0.0 } else { f64::INFINITY }
        } else {
            d.mean / d.se
        };
        max_increase_z = max_increase_z.max(z);
        if z > 3.0 {
            monotone = false;
        }
    }
    let mut worst_bound_margin = None;
    let mut bound_ok = true;
    if let Some((v0, sigma)) = bound {
        for (t, st) in times.iter().zip(&stats) {
            if *t <= 0.0 {
                continue;
            }
            let b = (v0 / (sigma * sigma * t)).sqrt();
            let margin = st.mean - b - 3.0 * st.se;
            worst_bound_margin = Some(worst_bound_margin.map_or(margin, |m: f64| m.max(margin)));
            if margin > exact_tol(b) {
                bound_ok = false;
            }
        }
    }
    Ok(PotentialResult {
        passed: monotone && bound_ok,
        max_increase_z: max_increase_z.max(0.0),
        monotone,
        worst_bound_margin,
        bound_ok,
        means: stats.iter().map(|s| s.mean).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BornResult {
    pub passed: bool,
    pub frequencies: Vec<f64>,
    pub z: Vec<f64>,
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    pub quantile_999: f64,
}

/// Per-level binomial z-scores within `z_crit` and Pearson chi-square below
/// its 99.9% quantile. Levels with πᵢ ∈ {0, 1} must match exactly.
pub fn born_rule_test(counts: &[usize], pi0: &[f64], z_crit: f64) -> Result<BornResult> {
    if counts.len() != pi0.len() {
        return Err(Error::DimensionMismatch {
            expected: pi0.len(),
            actual: counts.len(),
        });
    }
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::InvalidParameter("no terminal outcomes".into()));
    }
    let nf = n as f64;
    let mut z = Vec::with_capacity(counts.len());
    let mut chi = 0.0;
    let mut positive = 0;
    let mut exact_ok = true;
    for (&c, &p) in counts.iter().zip(pi0) {
        let expected = nf * p;
        let sd = (nf * p * (1.0 - p)).sqrt();
        if sd == 0.0 || p < 1e-15 || p > 1.0 - 1e-15 {
            let d = c as f64 - expected;
            if d.abs() > 0.5 {
                exact_ok = false;
                z.push(d.signum() * f64::INFINITY);
            } else {
                z.push(0.0);
            }
        } else {
            z.push((c as f64 - expected) / sd);
        }
        if p > 0.0 {
            positive += 1;
            chi += (c as f64 - expected).powi(2) / expected;
        }
    }
    let df = positive.max(1) - 1;
    let quantile_999 = if df == 0 {
        0.0
    } else {
        ChiSquared::new(df as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.999)
    };
    let chi_ok = if df == 0 { exact_ok } else { chi <= quantile_999 };
    let z_ok = z.iter().all(|z| z.abs() <= z_crit);
    Ok(BornResult {
        passed: exact_ok && z_ok && chi_ok,
        frequencies: counts.iter().map(|&c| c as f64 / nf).collect(),
        z,
        chi_square: chi,
        degrees_of_freedom: df,
        quantile_999,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyIdentityResult {
    pub passed: bool,
    /// Ensemble mean of `½∫σₜ²Vₜdt + S_end`.
    pub lhs: f64,
    pub se: f64,
    pub s0: f64,
    pub tolerance: f64,
    /// Mean of the quadrature alone and of `S_end`.
    pub quadrature: f64,
    pub terminal_entropy: f64,
    /// Full- vs half-resolution difference of the quadrature.
    pub quadrature_error_estimate: f64,
}

/// `E[½∫₀^t σ_s²V_s ds] + E[Sₜ] = S₀`, tested with `3·SE + quadrature_tol`.
pub fn entropy_identity_test(
    quadrature: &[f64],
    quadrature_half: &[f64],
    s_end: &[f64],
    s0: f64,
    quadrature_tol: f64,
) -> Result<EntropyIdentityResult> {
    if quadrature.len() != s_end.len() || quadrature_half.len() != s_end.len() || s_end.is_empty() {
        return Err(Error::InvalidParameter("entropy identity inputs differ in length".into()));
    }
    let lhs: Vec<f64> = quadrature.iter().zip(s_end).map(|(q, s)| q + s).collect();
    let st = Stat::of(&lhs);
    let tolerance = 3.0 * st.se + quadrature_tol;
    Ok(EntropyIdentityResult {
        passed: (st.mean - s0).abs() <= tolerance,
        lhs: st.mean,
        se: st.se,
        s0,
        tolerance,
        quadrature: mean(quadrature),
        terminal_entropy: mean(s_end),
        quadrature_error_estimate: (mean(quadrature) - mean(quadrature_half)).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeResult {
    pub passed: bool,
    pub slope: f64,
}

/// Pooled least-squares slope through the origin of `ΔSₜ` on `−½σₜ²Vₜdt`,
/// from per-path sums; must be 1 within 10%.
pub fn entropy_slope_test(xy: &[f64], xx: &[f64]) -> SlopeResult {
    let sxx = super::stats::sum(xx.iter().copied());
    let sxy = super::stats::sum(xy.iter().copied());
    if sxx == 0.0 {
        // no variance anywhere: ΔS ≡ 0 as well
        return SlopeResult {
            passed: sxy == 0.0,
            slope: f64::NAN,
        };
    }
    let slope = sxy / sxx;
    SlopeResult {
        passed: (slope - 1.0).abs() <= 0.1,
        slope,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableVarianceResult {
    pub passed: bool,
    pub mean_martingale: MartingaleResult,
    /// Largest `|Vᴳ_end − Vᴳ(φᵢ)|` on paths ending at level i.
    pub max_terminal_deviation: f64,
    pub terminal_ok: bool,
    /// Smallest z-score of `E[Vₜᴳ] − E[Vᴳ_end]`; below −3 breaks the supermartingale direction.
    pub min_excess_z: f64,
    pub supermartingale_ok: bool,
}

/// Commuting-observable relations:
/// (a) `Gₜ` is a martingale; (b) the terminal `Vᴳ` equals the Lüders-state
/// value of the terminal level, exactly when `exact_terminal`, otherwise in
/// ensemble mean; (c) `E[Vₜᴳ] ≥ E[Vᴳ_end]` within 3 SE.
pub fn observable_variance_test(
    g_series: &[Vec<f64>],
    vg_series: &[Vec<f64>],
    g0: f64,
    terminal_levels: &[usize],
    luders_vg: &[f64],
    exact_terminal: bool,
    z_crit: f64,
) -> Result<ObservableVarianceResult> {
    let n = check_paths(vg_series)?;
    if terminal_levels.len() != n {
        return Err(Error::InvalidParameter("terminal levels differ from path count".into()));
    }
    let mean_martingale = martingale_test(g_series, g0, z_crit)?;
    let last = vg_series.last().expect("non-empty series");
    let expected: Vec<f64> = terminal_levels.iter().map(|&l| luders_vg[l]).collect();
    let deviation: Vec<f64> = last.iter().zip(&expected).map(|(v, e)| v - e).collect();
    let max_terminal_deviation = deviation.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let terminal_ok = if exact_terminal {
        max_terminal_deviation <= 1e-10
    } else {
        let d = Stat::of(&deviation);
        d.z(0.0).abs() <= z_crit
    };
    let mut min_excess_z = f64::INFINITY;
    for s in vg_series {
        let diff: Vec<f64> = s.iter().zip(last).map(|(a, b)| a - b).collect();
        let d = Stat::of(&diff);
        let z = if d.se == 0.0 {
            if d.mean >= -exact_tol(d.mean) { 0.0 } else { f64::NEG_INFINITY }
        } else {
            d.mean / d.se
        };
        min_excess_z = min_excess_z.min(z);
    }
    let supermartingale_ok = min_excess_z >= -3.0;
    Ok(ObservableVarianceResult {
        passed: mean_martingale.passed && terminal_ok && supermartingale_ok,
        mean_martingale,
        max_terminal_deviation,
        terminal_ok,
        min_excess_z,
        supermartingale_ok,
    })
}

/// MGF probe points for the factorization check.
pub const MGF_PROBES: [f64; 3] = [-1.0, 0.5, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub t: f64,
    /// Largest `|E[e^{xB+yH}] − E[e^{xB}]E[e^{yH}]|/SE` over the probe pairs.
    pub max_mgf_z: f64,
    pub variance: f64,
    pub expected_variance: f64,
    pub relative_variance_error: f64,
    /// Largest `|E[B | H = Eᵢ]|/SE` over levels.
    pub max_conditional_mean_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceResult {
    pub passed: bool,
    pub mgf_ok: bool,
    pub variance_ok: bool,
    pub conditional_mean_ok: bool,
    pub probes: Vec<ProbeResult>,
}

/// Reverse construction: `Bₜ = ξₜ − σ_used·t·H` must be independent of `H`
/// with variance `expected_variance(t)`.
///
/// `xi[j][p]` is ξ at `times[j]` on path `p`; `levels[p]` is the terminal level.
pub fn independence_test(
    times: &[f64],
    xi: &[Vec<f64>],
    levels: &[usize],
    energies: &[f64],
    sigma_used: f64,
    expected_variance: impl Fn(f64) -> f64,
    variance_tol: f64,
    z_crit: f64,
) -> Result<IndependenceResult> {
    let n = check_paths(xi)?;
    if times.len() != xi.len() || levels.len() != n {
        return Err(Error::InvalidParameter("independence inputs differ in shape".into()));
    }
    let h: Vec<f64> = levels.iter().map(|&l| energies[l]).collect();
    let mut probes = Vec::with_capacity(times.len());
    let (mut mgf_ok, mut variance_ok, mut conditional_mean_ok) = (true, true, true);
    for (&t, x) in times.iter().zip(xi) {
        let b: Vec<f64> = x.iter().zip(&h).map(|(x, h)| x - sigma_used * t * h).collect();
        let mut max_mgf_z = 0.0f64;
        for &px in &MGF_PROBES {
            let a: Vec<f64> = b.iter().map(|b| (px * b).exp()).collect();
            let abar = mean(&a);
            for &py in &MGF_PROBES {
                let c: Vec<f64> = h.iter().map(|h| (py * h).exp()).collect();
                let cbar = mean(&c);
                let joint = mean(&a.iter().zip(&c).map(|(a, c)| a * c).collect::<Vec<_>>());
                let d = joint - abar * cbar;
                let influence: Vec<f64> = a
                    .iter()
                    .zip(&c)
                    .map(|(a, c)| (a - abar) * (c - cbar) - d)
                    .collect();
                let se = Stat::of(&influence).sd() / (n as f64).sqrt();
                let z = if se == 0.0 {
                    if d.abs() <= exact_tol(joint) { 0.0 } else { f64::INFINITY }
                } else {
                    d / se
                };
                max_mgf_z = max_mgf_z.max(z.abs());
            }
        }
        if max_mgf_z > z_crit {
            mgf_ok = false;
        }
        let st = Stat::of(&b);
        let ev = expected_variance(t);
        let rel = if ev == 0.0 { st.variance } else { (st.variance - ev).abs() / ev };
        if rel > variance_tol {
            variance_ok = false;
        }
        let mut max_conditional_mean_z = 0.0f64;
        for level in 0..energies.len() {
            let sub: Vec<f64> = b
                .iter()
                .zip(levels)
                .filter(|(_, &l)| l == level)
                .map(|(b, _)| *b)
                .collect();
            if sub.len() < 2 {
                continue;
            }
            max_conditional_mean_z = max_conditional_mean_z.max(Stat::of(&sub).z(0.0).abs());
        }
        if max_conditional_mean_z > z_crit {
            conditional_mean_ok = false;
        }
        probes.push(ProbeResult {
            t,
            max_mgf_z,
            variance: st.variance,
            expected_variance: ev,
            relative_variance_error: rel,
            max_conditional_mean_z,
        });
    }
    Ok(IndependenceResult {
        passed: mgf_ok && variance_ok && conditional_mean_ok,
        mgf_ok,
        variance_ok,
        conditional_mean_ok,
        probes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_passes_with_zero_z() {
        let series = vec![vec![0.5; 200]; 5];
        let r = martingale_test(&series, 0.5, 4.0).unwrap();
        assert!(r.passed);
        assert!(r.z.iter().all(|&z| z == 0.0));
        let r = martingale_test(&series, 0.6, 4.0).unwrap();
        assert!(!r.passed);
        assert!(martingale_test(&[vec![0.0; 10]], 0.0, 4.0).is_err());
    }

    #[test]
    fn born_rule_degenerate_distribution() {
        let r = born_rule_test(&[100, 0], &[1.0, 0.0], 4.0).unwrap();
        assert!(r.passed);
        let r = born_rule_test(&[99, 1], &[1.0, 0.0], 4.0).unwrap();
        assert!(!r.passed);
    }

    #[test]
    fn born_rule_quantile() {
        let r = born_rule_test(&[5000, 3000, 2000], &[0.5, 0.3, 0.2], 4.0).unwrap();
        assert!(r.passed);
        assert_eq!(r.degrees_of_freedom, 2);
        // −2 ln(0.001)
        assert!((r.quantile_999 - 13.815_510_557_964_274).abs() < 1e-9);
        let r = born_rule_test(&[5500, 2700, 1800], &[0.5, 0.3, 0.2], 4.0).unwrap();
        assert!(!r.passed);
    }

    #[test]
    fn potential_of_constant_zero() {
        let series = vec![vec![0.0; 150]; 4];
        let r = potential_test(&[0.0, 1.0, 2.0, 3.0], &series, Some((0.0, 1.0))).unwrap();
        assert!(r.passed);
        let mut rising = series.clone();
        rising[3] = vec![1.0; 150];
        assert!(!potential_test(&[0.0, 1.0, 2.0, 3.0], &rising, None).unwrap().passed);
    }

    #[test]
    fn slope_regression() {
        let r = entropy_slope_test(&[1.0, 2.0], &[1.0, 2.05]);
        assert!(r.passed);
        let r = entropy_slope_test(&[1.0], &[2.0]);
        assert!(!r.passed);
    }
}
