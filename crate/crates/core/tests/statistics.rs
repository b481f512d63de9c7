//! Monte Carlo checks of the sampling, filtering and integration layers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use reduction_core::closedform::{
    conditional_probabilities, conditioned_energy_curve, simulate_path, Filter, ModelKind,
};
use reduction_core::diagnostics::checks::potential_test;
use reduction_core::diagnostics::stats::Stat;
use reduction_core::ensemble::map_paths;
use reduction_core::integrator::{integrate_general, GeneralModel};
use reduction_core::noise::{sample_bridge, sample_brownian, sample_terminal_energy, PathGrid, SeedPolicy};
use reduction_core::spectrum::{decompose, initial_moments, InitialState, Spectrum};

fn uniform(dim: usize) -> InitialState {
    InitialState::from_real(&vec![1.0 / (dim as f64).sqrt(); dim]).unwrap()
}

#[test]
fn posterior_matches_kernel_regression() {
    // P(H = 1 | ξ₁ ≈ 1) from simulated (H, ξ₁) pairs with ξ₁ = H + B₁
    let n = 2_000_000;
    let bw = 0.05f64;
    let mut rng = ChaCha20Rng::seed_from_u64(314);
    let (mut sw, mut sw2, mut swy) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..n {
        let h: f64 = if rng.random::<f64>() < 0.5 { 0.0 } else { 1.0 };
        let z: f64 = rng.sample(StandardNormal);
        let u = (h + z - 1.0) / bw;
        let w = (-0.5 * u * u).exp();
        sw += w;
        sw2 += w * w;
        swy += w * h;
    }
    let estimate = swy / sw;
    let se = (sw2 * estimate * (1.0 - estimate)).sqrt() / sw;

    let s = Spectrum::nondegenerate(&[0.0, 1.0]).unwrap();
    let model = ModelKind::asymptotic(1.0).unwrap();
    let p = conditional_probabilities(&model, &s, &[0.5, 0.5], 1.0, 1.0).unwrap();
    assert!(
        (estimate - p[1]).abs() <= 4.0 * se + bw * bw,
        "kernel estimate {estimate} ± {se}, closed form {}",
        p[1]
    );
    // e^{1/2}/(1 + e^{1/2}) evaluated at 50 digits
    assert!((p[1] - 0.622_459_331_201_854_6).abs() <= 1e-15);
    assert!((p[0] - 0.377_540_668_798_145_4).abs() <= 1e-15);
}

#[test]
fn terminal_energy_is_independent_of_noise() {
    let s = Spectrum::nondegenerate(&[-1.0, 0.0, 2.0]).unwrap();
    let psi = InitialState::from_real(&[0.5f64.sqrt(), 0.3f64.sqrt(), 0.2f64.sqrt()]).unwrap();
    let dec = decompose(&s, &psi).unwrap();
    let grid = PathGrid::new(1.0, 16).unwrap();
    let seed = SeedPolicy::new(2718);
    let n = 10_000;
    let draws: Vec<(usize, f64)> = (0..n as u64)
        .map(|i| (sample_terminal_energy(&dec, seed, i), sample_brownian(grid, seed, i).values[16]))
        .collect();
    for level in 0..3 {
        let x: Vec<f64> = draws.iter().map(|d| if d.0 == level { 1.0 } else { 0.0 }).collect();
        let y: Vec<f64> = draws.iter().map(|d| d.1).collect();
        let (mx, my) = (Stat::of(&x).mean, Stat::of(&y).mean);
        let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n as f64;
        let corr = cov / (Stat::of(&x).sd() * Stat::of(&y).sd());
        assert!(corr.abs() <= 4.0 / (n as f64).sqrt(), "level {level}: correlation {corr}");
    }
}

#[test]
fn brownian_increments_are_uncorrelated() {
    let grid = PathGrid::new(1.0, 8).unwrap();
    let seed = SeedPolicy::new(99);
    let n = 20_000;
    let inc: Vec<Vec<f64>> = (0..n as u64).map(|i| sample_brownian(grid, seed, i).increments()).collect();
    let dt = grid.dt();
    for a in 0..8 {
        let col: Vec<f64> = inc.iter().map(|v| v[a]).collect();
        let st = Stat::of(&col);
        assert!(st.mean.abs() <= 4.0 * (dt / n as f64).sqrt());
        // Var of a sample variance of normals is 2dt²/n
        assert!((st.variance - dt).abs() <= 4.0 * dt * (2.0 / n as f64).sqrt());
        for b in a + 1..8 {
            let prod: Vec<f64> = inc.iter().map(|v| v[a] * v[b]).collect();
            let st = Stat::of(&prod);
            assert!(st.mean.abs() <= 4.0 * st.se, "increments {a} and {b}");
        }
    }
}

#[test]
fn bridge_covariance_on_grid() {
    let horizon = 2.0;
    let grid = PathGrid::new(horizon, 8).unwrap();
    let seed = SeedPolicy::new(1234);
    let n = 40_000;
    let paths: Vec<Vec<f64>> = (0..n as u64).map(|i| sample_bridge(grid, seed, i).values).collect();
    let idx = [2usize, 4, 6];
    for &a in &idx {
        for &b in &idx {
            if b < a {
                continue;
            }
            let (s, t) = (grid.time(a), grid.time(b));
            let prod: Vec<f64> = paths.iter().map(|p| p[a] * p[b]).collect();
            let st = Stat::of(&prod);
            let want = s * (1.0 - t / horizon);
            assert!(
                (st.mean - want).abs() <= 3.0 * st.se,
                "cov({s}, {t}) = {} vs {want} ± {}",
                st.mean,
                st.se
            );
        }
    }
}

#[test]
fn energy_process_is_a_martingale_with_decaying_variance() {
    let s = Spectrum::nondegenerate(&[-1.0, 0.0, 2.0]).unwrap();
    let psi = InitialState::from_real(&[0.5f64.sqrt(), 0.3f64.sqrt(), 0.2f64.sqrt()]).unwrap();
    let dec = decompose(&s, &psi).unwrap();
    let m0 = initial_moments(&dec, &s);
    let sigma = 1.5;
    let model = ModelKind::asymptotic(sigma).unwrap();
    let filter = Filter::new(model, &s, dec.probabilities()).unwrap();
    let grid = PathGrid::new(4.0, 256).unwrap();
    let seed = SeedPolicy::new(77);
    let recs = map_paths(10_000, None, |i| simulate_path(&filter, &s, &dec, grid, seed, i)).unwrap();
    let points: Vec<usize> = (0..=16).map(|j| 16 * j).collect();
    let mut v_series = Vec::new();
    let mut times = Vec::new();
    for &k in &points {
        let h: Vec<f64> = recs.iter().map(|r| r.h[k]).collect();
        let st = Stat::of(&h);
        assert!((st.mean - m0.energy).abs() <= 3.0 * st.se.max(1e-15), "t = {}", grid.time(k));
        v_series.push(recs.iter().map(|r| r.v[k]).collect::<Vec<f64>>());
        times.push(grid.time(k));
    }
    let r = potential_test(&times, &v_series, Some((m0.variance, sigma))).unwrap();
    assert!(r.passed, "{r:?}");
}

#[test]
fn conditioned_energy_approaches_its_level() {
    let s = Spectrum::nondegenerate(&[0.0, 1.0, 3.0]).unwrap();
    let pi0 = [0.3, 0.4, 0.3];
    let model = ModelKind::asymptotic(1.0).unwrap();
    let grid = PathGrid::new(32.0, 1024).unwrap();
    let seed = SeedPolicy::new(5);
    let checkpoints = [64usize, 256, 1024];
    for level in 0..3 {
        let mut dev = [0.0; 3];
        for i in 0..200u64 {
            let noise = sample_brownian(grid, seed, i);
            let h = conditioned_energy_curve(&model, &s, &pi0, level, &noise).unwrap();
            for (d, &k) in dev.iter_mut().zip(&checkpoints) {
                *d += (h[k] - s.energy(level)).abs() / 200.0;
            }
        }
        assert!(dev[0] > dev[1] && dev[1] > dev[2], "level {level}: {dev:?}");
        assert!(dev[2] < 0.05, "level {level}: {dev:?}");
    }
    let fmodel = ModelKind::finite_time(1.0, 1.0).unwrap();
    let fgrid = PathGrid::new(1.0, 64).unwrap();
    for level in 0..3 {
        let noise = sample_bridge(fgrid, seed, level as u64);
        let h = conditioned_energy_curve(&fmodel, &s, &pi0, level, &noise).unwrap();
        assert_eq!(h[64], s.energy(level));
    }
}

fn weights_at(
    gm: &GeneralModel,
    s: &Spectrum,
    psi: &InitialState,
    grid: PathGrid,
    n: usize,
    every: usize,
) -> Vec<Vec<Vec<f64>>> {
    let seed = SeedPolicy::new(4242);
    let runs = map_paths(n, None, |i| integrate_general(psi, gm, grid, seed, i, s)).unwrap();
    (0..=grid.steps / every)
        .map(|j| runs.iter().map(|w| w[j * every].clone()).collect())
        .collect()
}

#[test]
fn phase_noise_alone_does_not_move_energy() {
    let s = Spectrum::nondegenerate(&[0.0, 1.0, 2.0]).unwrap();
    let psi = uniform(3);
    let e = s.energies();
    let k_of = |x: f64| x - 1.0;
    let gm = GeneralModel::new(k_of, |_| 0.0);
    let grid = PathGrid::new(1.0, 2000).unwrap();
    let w = weights_at(&gm, &s, &psi, grid, 10_000, 200);
    let h0: f64 = e.iter().sum::<f64>() / 3.0;
    let h20: f64 = e.iter().map(|x| x * x).sum::<f64>() / 3.0;
    // Euler inflates level i by (Eᵢ² + ¼Kᵢ⁴)dt² per step
    let g: Vec<f64> = e.iter().map(|&x| x * x + 0.25 * k_of(x).powi(4)).collect();
    let spread = g.iter().cloned().fold(f64::MIN, f64::max) - g.iter().cloned().fold(f64::MAX, f64::min);
    for (j, ws) in w.iter().enumerate() {
        let t = grid.time(j * 200);
        let allowance = spread * t * grid.dt() + 1e-12;
        let h: Vec<f64> = ws.iter().map(|p| p.iter().zip(&e).map(|(p, x)| p * x).sum()).collect();
        let h2: Vec<f64> = ws.iter().map(|p| p.iter().zip(&e).map(|(p, x)| p * x * x).sum()).collect();
        let (sh, sh2) = (Stat::of(&h), Stat::of(&h2));
        assert!((sh.mean - h0).abs() <= 4.0 * sh.se + 2.0 * allowance, "⟨H⟩ at {t}: {sh:?}");
        assert!((sh2.mean - h20).abs() <= 4.0 * sh2.se + 4.0 * allowance, "⟨H²⟩ at {t}: {sh2:?}");
    }
}

#[test]
fn general_reduction_has_non_increasing_variance() {
    let s = Spectrum::nondegenerate(&[0.0, 1.0, 2.0]).unwrap();
    let psi = uniform(3);
    let e = s.energies();
    for gm in [
        GeneralModel::new(|x| 0.3 * x, |x| x * x),
        GeneralModel::new(|_| 0.0, |x| (2.0 * x).sin()),
        GeneralModel::standard(1.0),
    ] {
        let grid = PathGrid::new(2.0, 1000).unwrap();
        let w = weights_at(&gm, &s, &psi, grid, 10_000, 50);
        let v: Vec<Vec<f64>> = w
            .iter()
            .map(|ws| {
                ws.iter()
                    .map(|p| {
                        let h: f64 = p.iter().zip(&e).map(|(p, x)| p * x).sum();
                        p.iter().zip(&e).map(|(p, x)| p * (x - h).powi(2)).sum()
                    })
                    .collect()
            })
            .collect();
        let times: Vec<f64> = (0..v.len()).map(|j| grid.time(j * 50)).collect();
        let r = potential_test(&times, &v, None).unwrap();
        assert!(r.monotone, "{gm:?}: {:?}", r.means);
        assert!(r.means.last().unwrap() < &r.means[0]);
    }
}
