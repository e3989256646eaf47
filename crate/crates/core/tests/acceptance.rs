//! Acceptance suite. Each test prints a single `ACCEPTANCE <id> PASS|FAIL`
//! line with the measured quantities, then asserts the criterion.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sparse_limits::bounds::{error_bound_linear, error_bound_noisy, f_rho, snr_cutoff};
use sparse_limits::decoders::{default_lambda, lasso, LassoSettings};
use sparse_limits::exponent::{
    derivative_check, error_bound_general, exponent_curve, ml_decode_discrete, simulate_discrete,
    DiscreteChannelModel,
};
use sparse_limits::harness::{normalized_to_n, run_sweep, DecoderKind, SweepSpec, SweepVar};
use sparse_limits::model::{CoeffModel, Dataset, ProblemConfig};

fn report(id: &str, name: &str, pass: bool, detail: String) {
    println!("ACCEPTANCE {id} {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{id} {name}: {detail}");
}

fn random_config(rng: &mut ChaCha8Rng) -> ProblemConfig {
    let d = rng.random_range(1..=1000);
    let k = rng.random_range(1..=d.min(64));
    ProblemConfig {
        n_samples: rng.random_range(1..=100_000),
        dimension: d,
        sparsity: k,
        snr: 10f64.powf(rng.random_range(-2.0..5.0)),
        sigma2: 10f64.powf(rng.random_range(-1.0..1.0)),
        rho: rng.random_range(0.0..1.0),
        nu: 0.0,
        coeff_model: CoeffModel::FixedSigns,
        seed: 0,
    }
}

fn binomial_se(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

#[test]
fn a01_degenerate_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut bad = Vec::new();
    for j in 0..100 {
        let cfg = ProblemConfig {
            rho: 1.0,
            ..random_config(&mut rng)
        };
        let all_negative = (1..=cfg.sparsity).all(|i| f_rho(i, &cfg).unwrap() < 0.0);
        let bound = error_bound_linear(&cfg).unwrap().value;
        if !all_negative || bound != 1.0 {
            bad.push(j);
        }
    }
    report(
        "A01",
        "degenerate correlation",
        bad.is_empty(),
        format!("100 configs with rho = 1, violations at {bad:?}"),
    );
}

#[test]
fn a02_noisy_model_reduction() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let configs: Vec<ProblemConfig> = (0..1000).map(|_| random_config(&mut rng)).collect();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for cfg in &configs {
        let a = error_bound_linear(cfg).unwrap().value;
        let b = error_bound_noisy(cfg).unwrap().value;
        worst = worst.max((a - b).abs());
    }
    let elapsed = start.elapsed();
    report(
        "A02",
        "noisy-model reduction at nu = 0",
        worst <= 1e-12 && elapsed < Duration::from_secs(1),
        format!("max |difference| {worst:e} over 1000 configs in {elapsed:?}"),
    );
}

#[test]
fn a03_snr_cutoff() {
    let start = Instant::now();
    let base = ProblemConfig {
        n_samples: 1,
        dimension: 512,
        sparsity: 32,
        snr: 1.0,
        sigma2: 1.0,
        rho: 0.0,
        nu: 0.0,
        coeff_model: CoeffModel::FixedSigns,
        seed: 0,
    };
    let cutoff = snr_cutoff(&base).unwrap();
    let grid: Vec<usize> = (0..=80).map(|e| 10f64.powf(e as f64 / 10.0).round() as usize).collect();
    let curve = |snr: f64| -> Vec<f64> {
        grid.iter()
            .map(|&n| error_bound_linear(&ProblemConfig { snr, n_samples: n, ..base }).unwrap().value)
            .collect()
    };
    let below = curve(0.9 * cutoff);
    let above = curve(1.1 * cutoff);
    let below_ok = below.iter().all(|&v| v == 1.0);
    let above_min = above.iter().copied().fold(f64::INFINITY, f64::min);
    let elapsed = start.elapsed();
    report(
        "A03",
        "SNR cutoff (K = 32, D = 512)",
        below_ok && above_min < 1e-3 && elapsed < Duration::from_secs(10),
        format!(
            "cutoff {cutoff:.6}; at 0.9x bound = 1 for all N <= 1e8: {below_ok}; \
             at 1.1x min bound over N <= 1e8 = {above_min:.6} (needs < 1e-3); {elapsed:?}"
        ),
    );
}

#[test]
fn a04_derivative_identity() {
    let start = Instant::now();
    let grid: Vec<f64> = (0..=100).map(|j| j as f64 / 100.0).collect();
    let (mut worst_gap, mut worst_zero, mut monotone) = (0.0f64, 0.0f64, true);
    for seed in 0..50 {
        let m = DiscreteChannelModel::random(seed, 3, 4, 3);
        for i in 1..=m.k {
            let (lhs, rhs) = derivative_check(&m, i, 1e-4).unwrap();
            worst_gap = worst_gap.max((lhs - rhs).abs());
            let c = exponent_curve(&m, i, &grid).unwrap();
            worst_zero = worst_zero.max(c.values[0].abs());
            monotone &= c.values.windows(2).all(|w| w[1] >= w[0]);
        }
    }
    let elapsed = start.elapsed();
    report(
        "A04",
        "derivative identity",
        worst_gap <= 1e-3 && worst_zero <= 1e-10 && monotone && elapsed < Duration::from_secs(30),
        format!(
            "50 models: max |E_o'(0) - I| {worst_gap:e}, max |E_o(0)| {worst_zero:e}, \
             nondecreasing {monotone}, {elapsed:?}"
        ),
    );
}

#[test]
fn a05_bound_soundness() {
    let start = Instant::now();
    let trials = 2000;
    let mut rows = Vec::new();
    let mut pass = true;
    for n in [30, 60, 90] {
        let spec = SweepSpec {
            base: ProblemConfig {
                n_samples: n,
                dimension: 12,
                sparsity: 2,
                snr: 200.0,
                sigma2: 1.0,
                rho: 0.0,
                nu: 0.0,
                coeff_model: CoeffModel::FixedSigns,
                seed: 500 + n as u64,
            },
            sweep_var: SweepVar::Rho,
            sweep_values: vec![0.0, 0.5],
            decoders: vec![DecoderKind::MlMarginal],
            trials,
            emit_bounds: true,
            ..SweepSpec::default()
        };
        let curve = run_sweep(&spec).unwrap();
        let bound_success = curve.bound_success.as_ref().unwrap();
        for (p, rho) in spec.sweep_values.iter().enumerate() {
            let pe = 1.0 - curve.decoders[0].success[p];
            let se = curve.decoders[0].stderr[p];
            let bound = 1.0 - bound_success[p];
            pass &= pe <= bound + 3.0 * se;
            rows.push(format!("N={n} rho={rho}: P(E)={pe:.4} bound={bound:.3e}"));
        }
    }
    let elapsed = start.elapsed();
    report(
        "A05",
        "bound soundness (D = 12, K = 2, 2000 trials)",
        pass && elapsed < Duration::from_secs(300),
        format!("{}; {elapsed:?}", rows.join(", ")),
    );
}

#[test]
fn a06_group_testing_bound() {
    let start = Instant::now();
    let (k, d, n, trials) = (2, 8, 40, 2000);
    let model = DiscreteChannelModel::group_testing(k, 0.5, 0.0).unwrap();
    let bound = error_bound_general(&model, n, d, false).unwrap().value;
    let errors: usize = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let s = simulate_discrete(&model, n, d, 6000 + t).unwrap();
            (ml_decode_discrete(&model, &s.x, &s.y, d).unwrap() != s.support) as usize
        })
        .sum();
    let pe = errors as f64 / trials as f64;
    let se = binomial_se(pe, trials);
    let elapsed = start.elapsed();
    report(
        "A06",
        "group-testing general bound",
        pe <= bound + 3.0 * se && elapsed < Duration::from_secs(120),
        format!("P(E) = {pe:.4} (se {se:.4}), bound = {bound:.4}; {elapsed:?}"),
    );
}

#[test]
fn a07_lasso_kkt() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let (mut checked, mut violations, mut worst) = (0, 0, 0.0f64);
    for seed in 0..200 {
        let d = rng.random_range(10..200);
        let k = rng.random_range(1..=(d / 4).max(1));
        let cfg = ProblemConfig {
            n_samples: rng.random_range(10..150),
            dimension: d,
            sparsity: k,
            snr: 10f64.powf(rng.random_range(0.0..3.0)),
            sigma2: 1.0,
            rho: rng.random_range(0.0..0.7),
            nu: 0.0,
            coeff_model: CoeffModel::FixedSigns,
            seed,
        };
        let ds = Dataset::generate(&cfg).unwrap();
        let lambda = default_lambda(d, cfg.snr) * rng.random_range(0.2..2.0);
        let out = lasso(&ds.x, &ds.y, k, &LassoSettings::new(lambda)).unwrap();
        if !out.converged {
            continue;
        }
        checked += 1;
        let b = out.beta_estimate.unwrap();
        let g = ds.x.tr_mul(&(&ds.y - &ds.x * &b));
        for j in 0..d {
            let excess = if b[j] == 0.0 {
                g[j].abs() - lambda
            } else {
                (g[j] - lambda * b[j].signum()).abs()
            };
            worst = worst.max(excess);
            if excess > 1e-6 {
                violations += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        "A07",
        "lasso KKT",
        checked == 200 && violations == 0 && elapsed < Duration::from_secs(60),
        format!("{checked}/200 converged, {violations} violations, worst excess {worst:e}; {elapsed:?}"),
    );
}

fn fig3_base(d: usize, k: usize, seed: u64) -> ProblemConfig {
    ProblemConfig {
        n_samples: 1,
        dimension: d,
        sparsity: k,
        snr: 100.0 * (d as f64).log2(),
        sigma2: 1.0,
        rho: 0.0,
        nu: 0.0,
        coeff_model: CoeffModel::FixedSigns,
        seed,
    }
}

#[test]
fn a08_measurement_trend() {
    let start = Instant::now();
    let spec = SweepSpec {
        base: fig3_base(128, 8, 808),
        sweep_var: SweepVar::NormalizedN,
        sweep_values: vec![1.0, 2.0, 4.0, 6.0, 8.0, 12.0, 16.0],
        decoders: vec![DecoderKind::Lasso, DecoderKind::ReweightedLasso],
        trials: 40,
        emit_bounds: true,
        ..SweepSpec::default()
    };
    let curve = run_sweep(&spec).unwrap();
    let (l, r) = (&curve.decoders[0], &curve.decoders[1]);
    let mut dominance = true;
    for (p, nn) in spec.sweep_values.iter().enumerate() {
        if [2.0, 4.0, 6.0, 8.0].contains(nn) {
            let se = (l.stderr[p].powi(2) + r.stderr[p].powi(2)).sqrt();
            dominance &= r.success[p] >= l.success[p] - 2.0 * se;
        }
    }
    let transitions = |s: &[f64]| s.iter().any(|&v| v < 0.2) && s.iter().any(|&v| v > 0.8);
    let elapsed = start.elapsed();
    report(
        "A08",
        "measurement trend (D = 128, K = 8, 20 dB)",
        dominance && transitions(&l.success) && transitions(&r.success) && elapsed < Duration::from_secs(600),
        format!(
            "N_n {:?}: lasso {:?}, reweighted {:?}, bound {:?}; {elapsed:?}",
            spec.sweep_values,
            l.success,
            r.success,
            curve.bound_success.as_ref().unwrap().iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn a09_correlation_gap() {
    let spec = SweepSpec {
        base: fig3_base(128, 8, 909),
        sweep_var: SweepVar::Rho,
        sweep_values: vec![0.0, 0.2, 0.4, 0.5, 0.6, 0.8],
        normalized_n: Some(8.0),
        decoders: vec![DecoderKind::Lasso],
        trials: 50,
        emit_bounds: true,
        ..SweepSpec::default()
    };
    let curve = run_sweep(&spec).unwrap();
    let last = spec.sweep_values.len() - 1;
    let lasso_at = curve.decoders[0].success[last];
    let bound_at = curve.bound_success.as_ref().unwrap()[last];
    report(
        "A09",
        "correlation gap (D = 128, K = 8, N_n = 8)",
        lasso_at < 0.2 && bound_at > 0.9,
        format!(
            "rho {:?}: lasso {:?}; at rho = 0.8 lasso {lasso_at}, 1 - bound {bound_at:.6}",
            spec.sweep_values, curve.decoders[0].success
        ),
    );
}

#[test]
fn a10_noisy_data_trend() {
    let spec = SweepSpec {
        base: fig3_base(128, 8, 1010),
        sweep_var: SweepVar::Nu,
        sweep_values: vec![0.0, 0.5, 1.0, 2.0, 4.0],
        normalized_n: Some(8.0),
        decoders: vec![DecoderKind::Omp],
        trials: 40,
        emit_bounds: true,
        ..SweepSpec::default()
    };
    assert_eq!(spec.config_at(0).n_samples, normalized_to_n(8.0, 128, 8));
    let curve = run_sweep(&spec).unwrap();
    let omp = &curve.decoders[0];
    let bound = curve.bound_success.as_ref().unwrap();
    let monotone = omp.success.windows(2).zip(omp.stderr.windows(2)).all(|(s, e)| {
        let se = (e[0].powi(2) + e[1].powi(2)).sqrt();
        s[1] <= s[0] + 2.0 * se
    });
    let gap = (0..spec.sweep_values.len()).any(|p| omp.success[p] < 0.2 && bound[p] > 0.8);
    report(
        "A10",
        "noisy-data trend (D = 128, K = 8, N_n = 8)",
        monotone && gap,
        format!(
            "nu {:?}: omp {:?}, 1 - bound {:?}",
            spec.sweep_values,
            omp.success,
            bound.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    );
}
