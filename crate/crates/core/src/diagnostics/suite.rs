//! The verification suite run by `reduction verify`.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::checks::{
    born_rule_test, entropy_identity_test, entropy_slope_test, independence_test, martingale_test,
    observable_variance_test, potential_test,
};
use super::convergence::ancillary_identity_test;
use super::density::{density_matrices, density_test};
use super::stats::Stat;
use super::summary::{counts, level_series, observable_series, transpose};
use crate::closedform::ModelKind;
use crate::config::Experiment;
use crate::ensemble::EnsembleRun;
use crate::error::Result;
use crate::spectrum::initial_moments;

/// Precondition on `σ²V₀·t_end` for reading the asymptotic terminal level off `t_end`.
pub const MIN_REDUCTION_TIMES: f64 = 25.0;

/// Per-path quadratic variation is only checked when the tolerance spans this many standard deviations.
const QV_MIN_SIGMAS: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
    /// A deliberately corrupted input; it is expected to fail and never affects the exit status.
    pub negative_control: bool,
    /// Why the test did not run, if it did not.
    pub skipped: Option<String>,
    pub details: serde_json::Value,
}

impl TestOutcome {
    pub fn new(name: &str, statistic: f64, threshold: f64, passed: bool, details: serde_json::Value) -> Self {
        Self {
            name: name.to_string(),
            statistic,
            threshold,
            passed,
            negative_control: false,
            skipped: None,
            details,
        }
    }

    pub fn skipped(name: &str, reason: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            statistic: f64::NAN,
            threshold: f64::NAN,
            passed: true,
            negative_control: false,
            skipped: Some(reason.into()),
            details: serde_json::Value::Null,
        }
    }

    fn control(mut self) -> Self {
        self.negative_control = true;
        self
    }

    /// Whether this outcome should make the run fail.
    pub fn is_failure(&self) -> bool {
        !self.negative_control && self.skipped.is_none() && !self.passed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub config_hash: String,
    pub n_paths: usize,
    pub passed: bool,
    pub tests: Vec<TestOutcome>,
}

impl Report {
    pub fn new(seed: u64, config_hash: String, n_paths: usize, tests: Vec<TestOutcome>) -> Self {
        let passed = tests.iter().all(|t| !t.is_failure());
        Self {
            seed,
            config_hash,
            n_paths,
            passed,
            tests,
        }
    }

    pub fn get(&self, name: &str) -> Option<&TestOutcome> {
        self.tests.iter().find(|t| t.name == name)
    }
}

fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("serializable result")
}

/// Runs every diagnostic that applies to the experiment's model on a simulated ensemble.
pub fn verify_run(exp: &Experiment, run: &EnsembleRun, seed: u64) -> Result<Vec<TestOutcome>> {
    let z_crit = exp.config.ensemble.z_crit;
    let vcfg = &exp.config.verify;
    let paths = &run.paths;
    let n = paths.len();
    let moments = initial_moments(&exp.dec, &exp.spectrum);
    let pi0 = exp.dec.probabilities();
    let sigma = exp.model.sigma();
    let energies = exp.spectrum.energies();
    let finite = matches!(exp.model, ModelKind::FiniteTime { .. });
    let mut out = Vec::new();

    if n < super::checks::MIN_PATHS {
        out.push(TestOutcome::skipped(
            "ensemble",
            format!("{n} paths; the statistical tests need at least {}", super::checks::MIN_PATHS),
        ));
        let anc = ancillary_identity_test(&exp.spectrum, &exp.psi0, &exp.dec, sigma, 100, 2.0, 3.0, seed)?;
        out.push(TestOutcome::new(
            "ancillary_identity",
            anc.max_norm_error.max(anc.max_state_error),
            1e-12,
            anc.passed,
            to_json(&anc),
        ));
        return Ok(out);
    }

    let h = transpose(paths, |p| &p.h);
    let r = martingale_test(&h, moments.energy, z_crit)?;
    out.push(TestOutcome::new("energy_martingale", r.max_abs_z, z_crit, r.passed, to_json(&r)));

    for i in 0..exp.spectrum.n_levels() {
        let r = martingale_test(&level_series(paths, i), pi0[i], z_crit)?;
        out.push(TestOutcome::new(
            &format!("probability_martingale_{i}"),
            r.max_abs_z,
            z_crit,
            r.passed,
            to_json(&r),
        ));
    }

    // Var(Hₜ) ≤ V₀, so a drift reaching 10·√(V₀/n) at the window end sits ten standard errors out.
    let t_last = run.times.last().copied().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let drift = if moments.variance > 0.0 { 10.0 * (moments.variance / n as f64).sqrt() } else { 0.1 };
    let biased: Vec<Vec<f64>> = h
        .iter()
        .zip(&run.times)
        .map(|(s, t)| s.iter().map(|x| x + drift * t / t_last).collect())
        .collect();
    let r = martingale_test(&biased, moments.energy, z_crit)?;
    out.push(TestOutcome::new("control_biased_energy_martingale", r.max_abs_z, z_crit, r.passed, to_json(&r)).control());

    let v = transpose(paths, |p| &p.v);
    let r = potential_test(&run.times, &v, Some((moments.variance, sigma)))?;
    out.push(TestOutcome::new("variance_potential", r.max_increase_z, 3.0, r.passed, to_json(&r)));

    let s = transpose(paths, |p| &p.s);
    let r = potential_test(&run.times, &s, None)?;
    out.push(TestOutcome::new("entropy_supermartingale", r.max_increase_z, 3.0, r.passed, to_json(&r)));

    // terminal outcomes
    let terminal = counts(paths.iter().map(|p| p.final_level), energies.len());
    let reduction_times = sigma * sigma * moments.variance * exp.grid.t_end;
    if !finite && moments.variance > 0.0 && reduction_times < MIN_REDUCTION_TIMES {
        out.push(TestOutcome::skipped(
            "born_rule",
            format!("σ²V₀t_end = {reduction_times:.3} is below {MIN_REDUCTION_TIMES}"),
        ));
    } else {
        let r = born_rule_test(&terminal, pi0, z_crit)?;
        out.push(TestOutcome::new("born_rule", r.chi_square, r.quantile_999, r.passed, to_json(&r)));
        if let Some(shifted) = shifted_distribution(pi0) {
            let r = born_rule_test(&terminal, &shifted, z_crit)?;
            out.push(
                TestOutcome::new("control_shifted_born_rule", r.chi_square, r.quantile_999, r.passed, to_json(&r))
                    .control(),
            );
        }
    }

    if finite {
        let last = v.last().expect("output points");
        let max_v = last.iter().fold(0.0f64, |m, x| m.max(*x));
        let mismatched = paths.iter().filter(|p| p.final_level != p.terminal_level).count();
        out.push(TestOutcome::new(
            "exact_collapse",
            max_v,
            0.0,
            max_v == 0.0 && mismatched == 0,
            json!({ "max_terminal_variance": max_v, "mismatched_levels": mismatched }),
        ));
    }

    // entropy identity and entropy SDE
    let quad: Vec<f64> = paths.iter().map(|p| p.entropy_quadrature).collect();
    let quad_half: Vec<f64> = paths.iter().map(|p| p.entropy_quadrature_half).collect();
    let s_end: Vec<f64> = s.last().expect("output points").clone();
    let r = entropy_identity_test(&quad, &quad_half, &s_end, moments.entropy, vcfg.quadrature_tolerance)?;
    out.push(TestOutcome::new(
        "entropy_identity",
        (r.lhs - r.s0).abs(),
        r.tolerance,
        r.passed,
        to_json(&r),
    ));
    let xy: Vec<f64> = paths.iter().map(|p| p.entropy_reg_xy).collect();
    let xx: Vec<f64> = paths.iter().map(|p| p.entropy_reg_xx).collect();
    let r = entropy_slope_test(&xy, &xx);
    if r.slope.is_nan() && r.passed {
        out.push(TestOutcome::skipped("entropy_slope", "no energy variance on any path"));
    } else {
        out.push(TestOutcome::new("entropy_slope", (r.slope - 1.0).abs(), 0.1, r.passed, to_json(&r)));
    }

    // innovation
    let w_end: Vec<f64> = paths.iter().map(|p| p.w_window_end).collect();
    let t_w = paths[0].w_window_t;
    let st = Stat::of(&w_end);
    let z = st.z(0.0);
    out.push(TestOutcome::new(
        "innovation_mean",
        z.abs(),
        z_crit,
        z.abs() <= z_crit,
        json!({ "t": t_w, "mean": st.mean, "se": st.se }),
    ));
    let rel = (st.variance - t_w).abs() / t_w;
    out.push(TestOutcome::new(
        "innovation_variance",
        rel,
        vcfg.variance_tolerance,
        rel <= vcfg.variance_tolerance,
        json!({ "t": t_w, "variance": st.variance }),
    ));
    let window_steps = (t_w / exp.grid.dt()).round();
    let qv_sd = (2.0 / window_steps).sqrt();
    if vcfg.qv_tolerance < QV_MIN_SIGMAS * qv_sd {
        out.push(TestOutcome::skipped(
            "innovation_quadratic_variation",
            format!(
                "{window_steps} steps give a relative spread of {qv_sd:.4}; the tolerance {} needs at least {} steps",
                vcfg.qv_tolerance,
                (2.0 * (QV_MIN_SIGMAS / vcfg.qv_tolerance).powi(2)).ceil()
            ),
        ));
    } else {
        let worst = paths
            .iter()
            .map(|p| (p.qv_w / t_w - 1.0).abs())
            .fold(0.0f64, f64::max);
        out.push(TestOutcome::new(
            "innovation_quadratic_variation",
            worst,
            vcfg.qv_tolerance,
            worst <= vcfg.qv_tolerance,
            json!({ "t": t_w, "max_relative_deviation": worst }),
        ));
    }

    // reverse construction
    let probe_idx: Vec<usize> = exp
        .probe_times()
        .iter()
        .map(|&t| exp.grid_index(t))
        .filter(|&k| k > 0 && (!finite || k < exp.grid.steps))
        .collect();
    let probe_j: Vec<usize> = probe_idx
        .iter()
        .map(|k| run.output_idx.iter().position(|o| o == k).expect("probe times are recorded"))
        .collect();
    let probe_t: Vec<f64> = probe_idx.iter().map(|&k| exp.grid.time(k)).collect();
    let xi_all = transpose(paths, |p| &p.xi);
    let xi_probe: Vec<Vec<f64>> = probe_j.iter().map(|&j| xi_all[j].clone()).collect();
    let levels: Vec<usize> = paths.iter().map(|p| p.terminal_level).collect();
    let horizon = exp.model.collapse_time();
    let expected_var = |t: f64| match horizon {
        Some(big_t) => t * (big_t - t) / big_t,
        None => t,
    };
    if probe_t.is_empty() {
        out.push(TestOutcome::skipped("independence", "no probe time inside the window"));
    } else {
        let r = independence_test(
            &probe_t,
            &xi_probe,
            &levels,
            &energies,
            sigma,
            expected_var,
            vcfg.variance_tolerance,
            z_crit,
        )?;
        let worst_mgf = r.probes.iter().fold(0.0f64, |m, p| m.max(p.max_mgf_z));
        out.push(TestOutcome::new("independence", worst_mgf, z_crit, r.passed, to_json(&r)));
        if moments.variance > 0.0 {
            let r = independence_test(
                &probe_t,
                &xi_probe,
                &levels,
                &energies,
                2.0 * sigma,
                expected_var,
                vcfg.variance_tolerance,
                z_crit,
            )?;
            let worst = r.probes.iter().fold(0.0f64, |m, p| m.max(p.relative_variance_error));
            out.push(
                TestOutcome::new("control_wrong_sigma_independence", worst, vcfg.variance_tolerance, r.passed, to_json(&r))
                    .control(),
            );
        }
    }

    // commuting observable
    if let Some(g) = &exp.observable {
        let g_series = observable_series(paths, false).expect("observable recorded");
        let vg_series = observable_series(paths, true).expect("observable recorded");
        let luders_vg: Vec<f64> = (0..exp.spectrum.n_levels())
            .map(|i| match exp.dec.state(i) {
                Some(phi) => {
                    let m1: f64 = phi.iter().zip(g).map(|(a, g)| a.norm_sqr() * g).sum();
                    let m2: f64 = phi.iter().zip(g).map(|(a, g)| a.norm_sqr() * g * g).sum();
                    m2 - m1 * m1
                }
                None => 0.0,
            })
            .collect();
        let g0 = exp
            .psi0
            .amplitudes()
            .iter()
            .zip(g)
            .map(|(a, g)| a.norm_sqr() * g)
            .sum();
        let final_levels: Vec<usize> = paths.iter().map(|p| p.final_level).collect();
        let r = observable_variance_test(&g_series, &vg_series, g0, &final_levels, &luders_vg, finite, z_crit)?;
        out.push(TestOutcome::new(
            "observable_variance",
            r.max_terminal_deviation,
            if finite { 1e-10 } else { f64::NAN },
            r.passed,
            json!({ "result": to_json(&r), "luders_variance": luders_vg }),
        ));
    }

    let dm = density_matrices(run, &exp.model, &exp.dec, &exp.spectrum)?;
    let r = density_test(&dm, moments.entropy, n, z_crit);
    out.push(TestOutcome::new(
        "density_matrices",
        r.terminal_distance,
        r.terminal_tolerance,
        r.passed,
        json!({
            "result": to_json(&r),
            "von_neumann_entropy": dm.von_neumann_entropy,
            "shannon_entropy": dm.shannon_entropy,
        }),
    ));

    let anc = ancillary_identity_test(&exp.spectrum, &exp.psi0, &exp.dec, sigma, 100, 2.0, 3.0, seed)?;
    out.push(TestOutcome::new(
        "ancillary_identity",
        anc.max_norm_error.max(anc.max_state_error),
        1e-12,
        anc.passed,
        to_json(&anc),
    ));

    Ok(out)
}

/// A distribution noticeably different from `pi0`, or `None` for a single
/// occupied level, where no distinct reference exists.
fn shifted_distribution(pi0: &[f64]) -> Option<Vec<f64>> {
    let occupied: Vec<usize> = (0..pi0.len()).filter(|&i| pi0[i] > 0.0).collect();
    if occupied.len() < 2 {
        return None;
    }
    let mut out = pi0.to_vec();
    let (a, b) = (occupied[0], occupied[1]);
    let delta = 0.5 * out[a].min(out[b]);
    out[a] += delta;
    out[b] -= delta;
    Some(out)
}
