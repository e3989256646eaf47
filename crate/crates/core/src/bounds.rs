//! Closed-form bounds for the Gaussian linear model.
//!
//! Every exponent is handled as `N·f_i` (bits) so that the probability bound
//! `Σ_i 2^(−N f_i)` can be summed in the log domain without underflow.

use std::f64::consts::LN_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CoeffModel, ProblemConfig};
use crate::special::{gamma_expectation, log2_1p, log2_sum_exp2};

/// Upper end of the integer search range for sample-complexity solves.
pub const MAX_SAMPLES: u64 = 1_000_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundResult {
    /// `min(1, Σ 2^(−exponent_terms[j]))`.
    pub value: f64,
    /// Per-error-count exponents `N·f_i` in bits, for `i = first_i, …, K`.
    pub exponent_terms: Vec<f64>,
    /// Whether the unclamped sum exceeded 1.
    pub clamped: bool,
    /// Error count of `exponent_terms[0]` (1 unless a partial-recovery range is used).
    pub first_i: usize,
}

impl BoundResult {
    pub(crate) fn from_terms(exponent_terms: Vec<f64>, first_i: usize) -> Self {
        let neg: Vec<f64> = exponent_terms.iter().map(|e| -e).collect();
        let log2_sum = log2_sum_exp2(&neg);
        let clamped = log2_sum > 0.0;
        let value = if clamped { 1.0 } else { log2_sum.exp2() };
        BoundResult {
            value,
            exponent_terms,
            clamped,
            first_i,
        }
    }

    /// `1 − value`, the implied lower bound on the success probability.
    pub fn success(&self) -> f64 {
        1.0 - self.value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Criterion {
    Necessary,
    Sufficient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SampleComplexityResult {
    pub n_required: Option<u64>,
    pub feasible: bool,
    pub binding_i: usize,
    pub criterion: Criterion,
}

/// `log₂ C(n, k)`.
pub fn log2_binomial(n: i64, k: i64) -> Result<f64> {
    if n < 0 || k < 0 {
        return Err(Error::param("n, k", format!("must be nonnegative, got n = {n}, k = {k}")));
    }
    if k > n {
        return Err(Error::param("k", format!("k = {k} exceeds n = {n}")));
    }
    let k = k.min(n - k);
    if k <= 1000 {
        let nk = (n - k) as f64;
        let ln: f64 = (1..=k).map(|j| (1.0 + nk / j as f64).ln()).sum();
        return Ok(ln / LN_2);
    }
    let (n, k) = (n as f64, k as f64);
    Ok((libm::lgamma(n + 1.0) - libm::lgamma(k + 1.0) - libm::lgamma(n - k + 1.0)) / LN_2)
}

/// `log₂(C(D−K, i)·C(K, i))`, taken as 0 when no wrong set of size `i` exists.
fn penalty(cfg: &ProblemConfig, i: usize) -> f64 {
    let (d, k) = (cfg.dimension as i64, cfg.sparsity as i64);
    let i = i as i64;
    if i > d - k {
        return 0.0;
    }
    log2_binomial(d - k, i).unwrap() + log2_binomial(k, i).unwrap()
}

fn check_i(i: usize, cfg: &ProblemConfig) -> Result<()> {
    if i == 0 || i > cfg.sparsity {
        return Err(Error::param("i", format!("must lie in [1, {}], got {i}", cfg.sparsity)));
    }
    Ok(())
}

/// `N·f` for error count `i`, where the information term is `½log₂(1 + a/N)`.
fn scaled_exponent(cfg: &ProblemConfig, i: usize, a: f64) -> f64 {
    let n = cfg.n_samples as f64;
    let info = if a == 0.0 { 0.0 } else { n * 0.5 * log2_1p(a / n) };
    info - (i as f64 / 4.0) * 4f64.log2() - penalty(cfg, i)
}

fn linear_gain(cfg: &ProblemConfig, i: usize) -> f64 {
    (1.0 - cfg.rho) * 2.0 * i as f64 * cfg.sigma2 * cfg.snr
}

fn noisy_gain(cfg: &ProblemConfig, i: usize) -> f64 {
    let n = cfg.n_samples as f64;
    let xi = 1.0 + ((1.0 - cfg.rho) * cfg.nu / (1.0 + cfg.nu)) * cfg.sparsity as f64 * cfg.snr * cfg.sigma2 / n;
    ((1.0 - cfg.rho) / (1.0 + cfg.nu)) * 2.0 * i as f64 * cfg.sigma2 * cfg.snr / xi
}

/// `f(ρ) = ½log₂(1 + (1−ρ)·2iσ²SNR/N) − (i/(4N))·log₂4 − log₂(C(D−K,i)C(K,i))/N`.
pub fn f_rho(i: usize, cfg: &ProblemConfig) -> Result<f64> {
    cfg.validate()?;
    check_i(i, cfg)?;
    Ok(scaled_exponent(cfg, i, linear_gain(cfg, i)) / cfg.n_samples as f64)
}

/// Noisy-data exponent `f(ρ, ν)`; equals [`f_rho`] at `ν = 0`.
pub fn f_rho_nu(i: usize, cfg: &ProblemConfig) -> Result<f64> {
    cfg.validate()?;
    check_i(i, cfg)?;
    Ok(scaled_exponent(cfg, i, noisy_gain(cfg, i)) / cfg.n_samples as f64)
}

pub(crate) fn bound_range(cfg: &ProblemConfig, first_i: usize, noisy: bool) -> BoundResult {
    let terms = (first_i..=cfg.sparsity)
        .map(|i| {
            let a = if noisy { noisy_gain(cfg, i) } else { linear_gain(cfg, i) };
            scaled_exponent(cfg, i, a)
        })
        .collect();
    BoundResult::from_terms(terms, first_i)
}

/// Exact-recovery error bound `min(1, Σ_{i=1}^K 2^(−N f(ρ)))`; ν is ignored.
pub fn error_bound_linear(cfg: &ProblemConfig) -> Result<BoundResult> {
    cfg.validate()?;
    Ok(bound_range(cfg, 1, false))
}

/// Exact-recovery error bound when decoders only observe `Z = X + V`.
pub fn error_bound_noisy(cfg: &ProblemConfig) -> Result<BoundResult> {
    cfg.validate()?;
    Ok(bound_range(cfg, 1, true))
}

/// Bound on the probability of at least `⌊αK⌋` support errors.
pub fn partial_recovery_bound(cfg: &ProblemConfig, alpha: f64) -> Result<BoundResult> {
    cfg.validate()?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param("alpha", format!("must lie in (0, 1], got {alpha}")));
    }
    Ok(bound_range(cfg, partial_first_i(cfg.sparsity, alpha), false))
}

pub(crate) fn partial_first_i(k: usize, alpha: f64) -> usize {
    ((alpha * k as f64).floor() as usize).clamp(1, k)
}

fn mi_bits(i: usize, cfg: &ProblemConfig) -> f64 {
    let c = (1.0 - cfg.rho) * cfg.snr / cfg.n_samples as f64;
    if c == 0.0 {
        return 0.0;
    }
    match cfg.coeff_model {
        CoeffModel::FixedSigns => 0.5 * log2_1p(c * i as f64 * cfg.sigma2),
        // ‖β_{S¹}‖² = σ²·χ²(i) = 2σ²·T with T ~ Gamma(i/2, 1).
        CoeffModel::GaussianIid => {
            let b = 2.0 * c * cfg.sigma2;
            gamma_expectation(i as f64 / 2.0, |t| 0.5 * log2_1p(b * t))
        }
    }
}

/// `I_i = ½E[log₂(1 + (1−ρ)‖β_{S¹}‖²SNR/N)]` in bits.
pub fn mutual_info_linear(i: usize, cfg: &ProblemConfig) -> Result<f64> {
    cfg.validate()?;
    check_i(i, cfg)?;
    Ok(mi_bits(i, cfg))
}

/// Smallest `n` in `[lo, hi]` with `pred(n)`, assuming `pred` is monotone.
fn bisect(mut lo: u64, mut hi: u64, pred: impl Fn(u64) -> bool) -> Option<u64> {
    if !pred(hi) {
        return None;
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Some(lo)
}

/// Fano-type necessary number of samples: the smallest `N` with
/// `N·I_i(N) ≥ log₂C(D−K+i, i)` for every `i`.
pub fn necessary_samples(cfg: &ProblemConfig) -> Result<SampleComplexityResult> {
    cfg.validate()?;
    let k = cfg.sparsity;
    let free = (cfg.dimension - k) as i64;
    let needed: Vec<f64> = (1..=k)
        .map(|i| log2_binomial(free + i as i64, i as i64).unwrap())
        .collect();
    let at = |n: u64| cfg.with_n(n as usize);
    let holds = |n: u64| {
        let c = at(n);
        (1..=k).all(|i| n as f64 * mi_bits(i, &c) >= needed[i - 1])
    };
    let n_required = bisect(1, MAX_SAMPLES, holds);
    let probe = at(n_required.unwrap_or(MAX_SAMPLES));
    let mut binding_i = 1;
    let mut worst = f64::NEG_INFINITY;
    for i in 1..=k {
        let mi = mi_bits(i, &probe);
        let ratio = if mi > 0.0 { needed[i - 1] / mi } else { f64::INFINITY };
        if ratio > worst {
            worst = ratio;
            binding_i = i;
        }
    }
    Ok(SampleComplexityResult {
        n_required,
        feasible: n_required.is_some(),
        binding_i,
        criterion: Criterion::Necessary,
    })
}

/// Index (1-based) of the largest term `2^(−e_i)`, i.e. the smallest exponent.
fn dominant_i(bound: &BoundResult) -> usize {
    let mut best = 0;
    for (j, e) in bound.exponent_terms.iter().enumerate() {
        if *e < bound.exponent_terms[best] {
            best = j;
        }
    }
    bound.first_i + best
}

/// Smallest `N` whose exact-recovery bound is at most `target_pe`.
pub fn sufficient_samples(cfg: &ProblemConfig, target_pe: f64) -> Result<SampleComplexityResult> {
    cfg.validate()?;
    if !(target_pe > 0.0 && target_pe <= 1.0) {
        return Err(Error::param("target_pe", format!("must lie in (0, 1], got {target_pe}")));
    }
    let infeasible = |binding_i| SampleComplexityResult {
        n_required: None,
        feasible: false,
        binding_i,
        criterion: Criterion::Sufficient,
    };
    let at = |n: u64| bound_range(&cfg.with_n(n as usize), 1, false);
    if target_pe < 1.0 {
        // Large-N limit: N·½log₂(1 + a/N) → a/(2 ln 2).
        let limit_terms: Vec<f64> = (1..=cfg.sparsity)
            .map(|i| linear_gain(cfg, i) / (2.0 * LN_2) - i as f64 / 2.0 - penalty(cfg, i))
            .collect();
        let limit = BoundResult::from_terms(limit_terms, 1);
        if limit.value > target_pe {
            return Ok(infeasible(dominant_i(&limit)));
        }
    }
    match bisect(1, MAX_SAMPLES, |n| at(n).value <= target_pe) {
        Some(n) => Ok(SampleComplexityResult {
            n_required: Some(n),
            feasible: true,
            binding_i: dominant_i(&at(n)),
            criterion: Criterion::Sufficient,
        }),
        None => Ok(infeasible(dominant_i(&at(MAX_SAMPLES)))),
    }
}

/// Smallest SNR at which every exponent `N·f_i` is positive for large `N`:
/// `max_i [(i/4)·log₂4 + log₂(C(D−K,i)C(K,i))]·ln2 / ((1−ρ)·i·σ²)`.
///
/// Returns `f64::INFINITY` when no SNR suffices (ρ = 1). `N` and `snr` in
/// `cfg` are ignored.
pub fn snr_cutoff(cfg: &ProblemConfig) -> Result<f64> {
    cfg.validate()?;
    if cfg.rho >= 1.0 {
        return Ok(f64::INFINITY);
    }
    let mut cutoff = 0.0f64;
    for i in 1..=cfg.sparsity {
        let fi = i as f64;
        let c = ((fi / 4.0) * 4f64.log2() + penalty(cfg, i)) * LN_2 / ((1.0 - cfg.rho) * fi * cfg.sigma2);
        cutoff = cutoff.max(c);
    }
    Ok(cutoff)
}
