//! Support-recovery decoders.

use itertools::Itertools;
use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bounds::log2_binomial;
use crate::error::{Error, Result};
use crate::model::{CoeffModel, Dataset, ProblemConfig, SupportSet};
use crate::special::ln_sum_exp;

/// Maximum number of candidate supports for the exhaustive decoders.
pub const SUBSET_LIMIT: f64 = 1e6;
/// Maximum number of sign patterns averaged by the fixed-sign ML decoder.
pub const SIGN_PATTERN_LIMIT: usize = 4096;

const CHOLESKY_JITTER: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderOutput {
    pub support_estimate: SupportSet,
    pub beta_estimate: Option<DVector<f64>>,
    pub iterations: usize,
    pub objective: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LassoSettings {
    pub lambda: f64,
    /// Stop once the largest coordinate change in a full cycle is below this.
    pub tol: f64,
    /// Maximum number of full coordinate cycles.
    pub max_iter: usize,
}

impl LassoSettings {
    pub const DEFAULT_TOL: f64 = 1e-8;
    pub const DEFAULT_MAX_ITER: usize = 10_000;

    pub fn new(lambda: f64) -> Self {
        LassoSettings {
            lambda,
            tol: Self::DEFAULT_TOL,
            max_iter: Self::DEFAULT_MAX_ITER,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::param("lambda", format!("must be nonnegative and finite, got {}", self.lambda)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param("tol", format!("must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

/// Outer-loop controls for [`reweighted_lasso`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReweightSettings {
    /// Base threshold `λ_r` scaled by the per-coordinate weights.
    pub lambda_r: f64,
    pub eps: f64,
    pub outer_max: usize,
    pub outer_tol: f64,
}

impl ReweightSettings {
    pub const DEFAULT_OUTER_MAX: usize = 10;
    pub const DEFAULT_OUTER_TOL: f64 = 1e-6;

    /// `ε = 0.1σ` and `λ_r = ε·λ`, so a zero coefficient keeps the plain
    /// lasso threshold `λ` and well-supported ones are barely shrunk.
    pub fn defaults(lambda: f64, sigma2: f64) -> Self {
        let eps = 0.1 * sigma2.sqrt();
        ReweightSettings {
            lambda_r: eps * lambda,
            eps,
            outer_max: Self::DEFAULT_OUTER_MAX,
            outer_tol: Self::DEFAULT_OUTER_TOL,
        }
    }
}

/// `2√(2 ln D)/√SNR`.
pub fn default_lambda(d: usize, snr: f64) -> f64 {
    2.0 * (2.0 * (d as f64).ln()).sqrt() / snr.sqrt()
}

/// Indices of the `k` largest magnitudes, ties to the lower index.
pub fn top_k_support(beta: &DVector<f64>, k: usize) -> SupportSet {
    let mut order: Vec<usize> = (0..beta.len()).collect();
    order.sort_by(|&a, &b| beta[b].abs().total_cmp(&beta[a].abs()).then(a.cmp(&b)));
    order.truncate(k);
    SupportSet::from_unsorted(order)
}

fn check_shapes(x: &DMatrix<f64>, y: &DVector<f64>, k: usize) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::param(
            "y",
            format!("length {} does not match {} matrix rows", y.len(), x.nrows()),
        ));
    }
    if k == 0 || k > x.ncols() {
        return Err(Error::param("k", format!("must lie in [1, {}], got {k}", x.ncols())));
    }
    Ok(())
}

fn subset_guard(d: usize, k: usize, what: &'static str) -> Result<()> {
    let subsets = log2_binomial(d as i64, k as i64)?.exp2();
    if subsets > SUBSET_LIMIT * (1.0 + 1e-9) {
        return Err(Error::Capacity {
            what,
            size: subsets,
            limit: SUBSET_LIMIT,
        });
    }
    Ok(())
}

fn sub_gram(gram: &DMatrix<f64>, s: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(s.len(), s.len(), |a, b| gram[(s[a], s[b])])
}

fn sub_vec(v: &DVector<f64>, s: &[usize]) -> DVector<f64> {
    DVector::from_iterator(s.len(), s.iter().map(|&j| v[j]))
}

/// Cholesky of `m`, retried once with a diagonal jitter.
fn cholesky_jittered(m: DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let scale = m.diagonal().amax().max(1.0);
    let n = m.nrows();
    Cholesky::new(m + DMatrix::identity(n, n) * (CHOLESKY_JITTER * scale))
}

/// Least-squares coefficients on the columns `s`; the flag reports a
/// pseudo-inverse fallback.
fn ls_fit(x: &DMatrix<f64>, y: &DVector<f64>, s: &[usize]) -> (DVector<f64>, bool) {
    let xs = x.select_columns(s);
    let gram = xs.transpose() * &xs;
    if let Some(c) = Cholesky::new(gram) {
        let sol = c.solve(&(xs.transpose() * y));
        if sol.iter().all(|v| v.is_finite()) {
            return (sol, false);
        }
    }
    let pinv = xs
        .pseudo_inverse(1e-12)
        .expect("pseudo-inverse tolerance is nonnegative");
    (pinv * y, true)
}

fn embed(d: usize, s: &[usize], coef: &DVector<f64>) -> DVector<f64> {
    let mut beta = DVector::zeros(d);
    for (j, &idx) in s.iter().enumerate() {
        beta[idx] = coef[j];
    }
    beta
}

/// Exhaustive maximum-marginal-likelihood support estimate.
///
/// The likelihood of `y` given `X_S` is marginalized over `β_S`: an average
/// over all `2^K` sign patterns for fixed-sign coefficients, or the exact
/// Gaussian `N(0, σ²X_S X_Sᵀ + I/SNR)` density for IID Gaussian ones. The
/// decoder sees `Z` when the dataset carries one.
pub fn ml_decode_marginal(ds: &Dataset, cfg: &ProblemConfig) -> Result<DecoderOutput> {
    cfg.validate()?;
    let x = ds.observed_matrix();
    let y = &ds.y;
    let k = cfg.sparsity;
    check_shapes(x, y, k)?;
    let d = x.ncols();
    subset_guard(d, k, "ML marginal decoder")?;
    if cfg.coeff_model == CoeffModel::FixedSigns && (k >= 63 || (1usize << k) > SIGN_PATTERN_LIMIT) {
        return Err(Error::Capacity {
            what: "ML marginal decoder sign patterns",
            size: 2f64.powi(k as i32),
            limit: SIGN_PATTERN_LIMIT as f64,
        });
    }
    let gram = x.transpose() * x;
    let xty = x.transpose() * y;
    let yy = y.norm_squared();
    let snr = cfg.snr;
    let sigma = cfg.sigma2.sqrt();
    let patterns = if cfg.coeff_model == CoeffModel::FixedSigns { 1usize << k } else { 0 };
    let signs: Vec<DVector<f64>> = (0..patterns)
        .map(|mask| DVector::from_fn(k, |j, _| if mask >> j & 1 == 1 { -sigma } else { sigma }))
        .collect();

    let score = |s: &[usize]| -> f64 {
        let g = sub_gram(&gram, s);
        let b = sub_vec(&xty, s);
        match cfg.coeff_model {
            CoeffModel::FixedSigns => {
                // ‖y − X_S β‖² = ‖y‖² − 2bᵀβ + βᵀGβ
                let terms: Vec<f64> = signs
                    .iter()
                    .map(|beta| -0.5 * snr * (yy - 2.0 * b.dot(beta) + beta.dot(&(&g * beta))))
                    .collect();
                ln_sum_exp(&terms)
            }
            CoeffModel::GaussianIid => {
                // Woodbury with M = I/σ² + SNR·G:
                // yᵀΣ⁻¹y = SNR‖y‖² − SNR²·bᵀM⁻¹b, det Σ ∝ σ^{2K}·det M.
                let m = DMatrix::identity(k, k) / cfg.sigma2 + &g * snr;
                let Some(chol) = cholesky_jittered(m) else {
                    return f64::NEG_INFINITY;
                };
                let ln_det_m: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
                let quad = snr * yy - snr * snr * b.dot(&chol.solve(&b));
                -0.5 * (k as f64 * cfg.sigma2.ln() + ln_det_m + quad)
            }
        }
    };

    let mut best: Option<(f64, Vec<usize>)> = None;
    for s in (0..d).combinations(k) {
        let v = score(&s);
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, s));
        }
    }
    let (loglik, s) = best.expect("at least one candidate support");
    Ok(DecoderOutput {
        support_estimate: SupportSet::from_unsorted(s),
        beta_estimate: None,
        iterations: 1,
        objective: Some(loglik),
        converged: true,
    })
}

/// Exhaustive ℓ₀-constrained least squares: the `K`-subset with the smallest
/// residual after a per-subset LS fit.
pub fn ml_decode_ls(x: &DMatrix<f64>, y: &DVector<f64>, k: usize) -> Result<DecoderOutput> {
    check_shapes(x, y, k)?;
    let d = x.ncols();
    subset_guard(d, k, "ML least-squares decoder")?;
    let mut best: Option<(f64, Vec<usize>, DVector<f64>)> = None;
    for s in (0..d).combinations(k) {
        let (coef, _) = ls_fit(x, y, &s);
        let resid = (y - x.select_columns(&s) * &coef).norm_squared();
        if best.as_ref().is_none_or(|(r, _, _)| resid < *r) {
            best = Some((resid, s, coef));
        }
    }
    let (resid, s, coef) = best.expect("at least one candidate support");
    Ok(DecoderOutput {
        beta_estimate: Some(embed(d, &s, &coef)),
        support_estimate: SupportSet::from_unsorted(s),
        iterations: 1,
        objective: Some(resid),
        converged: true,
    })
}

#[inline]
fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

fn weighted_objective(r: &DVector<f64>, beta: &DVector<f64>, thresholds: &[f64]) -> f64 {
    0.5 * r.norm_squared() + beta.iter().zip(thresholds).map(|(b, t)| t * b.abs()).sum::<f64>()
}

struct CdResult {
    beta: DVector<f64>,
    cycles: usize,
    converged: bool,
    objective: f64,
}

/// Cyclic coordinate descent on `½‖y − Xβ‖² + Σ_k t_k|β_k|` from `beta`.
fn coordinate_descent(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    thresholds: &[f64],
    mut beta: DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> CdResult {
    let d = x.ncols();
    let col_sq: Vec<f64> = (0..d).map(|j| x.column(j).norm_squared()).collect();
    let mut r = y - x * &beta;
    let mut prev_obj = weighted_objective(&r, &beta, thresholds);
    let mut cycles = 0;
    let mut converged = false;
    while cycles < max_iter {
        cycles += 1;
        let mut max_change = 0.0f64;
        for j in 0..d {
            if col_sq[j] == 0.0 {
                beta[j] = 0.0;
                continue;
            }
            let col = x.column(j);
            let old = beta[j];
            let z = col.dot(&r) + col_sq[j] * old;
            let new = soft_threshold(z, thresholds[j]) / col_sq[j];
            let delta = new - old;
            if delta != 0.0 {
                r.axpy(-delta, &col, 1.0);
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        let obj = weighted_objective(&r, &beta, thresholds);
        debug_assert!(
            obj <= prev_obj + 1e-10 * prev_obj.abs().max(1.0),
            "coordinate descent objective increased: {prev_obj} -> {obj}"
        );
        prev_obj = obj;
        if max_change < tol {
            converged = true;
            break;
        }
    }
    CdResult {
        beta,
        cycles,
        converged,
        objective: prev_obj,
    }
}

/// Lasso `argmin ½‖y − Xβ‖² + λ‖β‖₁` by cyclic coordinate descent; the
/// support estimate is the `k` largest magnitudes.
pub fn lasso(x: &DMatrix<f64>, y: &DVector<f64>, k: usize, settings: &LassoSettings) -> Result<DecoderOutput> {
    check_shapes(x, y, k)?;
    settings.validate()?;
    let d = x.ncols();
    let thresholds = vec![settings.lambda; d];
    let cd = coordinate_descent(x, y, &thresholds, DVector::zeros(d), settings.tol, settings.max_iter);
    Ok(DecoderOutput {
        support_estimate: top_k_support(&cd.beta, k),
        beta_estimate: Some(cd.beta),
        iterations: cd.cycles,
        objective: Some(cd.objective),
        converged: cd.converged,
    })
}

/// Iteratively reweighted lasso: starts from the plain lasso solution and
/// re-solves with thresholds `λ_r/(|β_n| + ε)`, warm-started, until
/// successive solutions differ by less than `outer_tol` in ℓ₂.
pub fn reweighted_lasso(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    k: usize,
    settings: &LassoSettings,
    reweight: &ReweightSettings,
) -> Result<DecoderOutput> {
    if !(reweight.eps > 0.0) {
        return Err(Error::param("eps", format!("must be positive, got {}", reweight.eps)));
    }
    if !(reweight.lambda_r >= 0.0 && reweight.lambda_r.is_finite()) {
        return Err(Error::param("lambda_r", format!("must be nonnegative and finite, got {}", reweight.lambda_r)));
    }
    let mut out = lasso(x, y, k, settings)?;
    let mut beta = out.beta_estimate.take().expect("lasso returns coefficients");
    let mut inner_converged = out.converged;
    let mut outer_converged = reweight.outer_max == 0;
    for _ in 0..reweight.outer_max {
        let thresholds: Vec<f64> = beta.iter().map(|b| reweight.lambda_r / (b.abs() + reweight.eps)).collect();
        let cd = coordinate_descent(x, y, &thresholds, beta.clone(), settings.tol, settings.max_iter);
        out.iterations += cd.cycles;
        out.objective = Some(cd.objective);
        inner_converged = cd.converged;
        let change = (&cd.beta - &beta).norm();
        beta = cd.beta;
        if change < reweight.outer_tol {
            outer_converged = true;
            break;
        }
    }
    out.support_estimate = top_k_support(&beta, k);
    out.beta_estimate = Some(beta);
    out.converged = inner_converged && outer_converged;
    Ok(out)
}

/// Orthogonal matching pursuit on the observed matrix: `k` greedy selections
/// of `argmax |z_jᵀr|` (ties to the lower index), each followed by an LS
/// refit. `converged` is false if any refit needed the pseudo-inverse.
pub fn omp(z: &DMatrix<f64>, y: &DVector<f64>, k: usize) -> Result<DecoderOutput> {
    check_shapes(z, y, k)?;
    let d = z.ncols();
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    let mut chosen = vec![false; d];
    let mut r = y.clone();
    let mut coef = DVector::zeros(0);
    let mut clean = true;
    for _ in 0..k {
        let corr = z.tr_mul(&r);
        let mut pick = None;
        let mut best = f64::NEG_INFINITY;
        for j in 0..d {
            if !chosen[j] && corr[j].abs() > best {
                best = corr[j].abs();
                pick = Some(j);
            }
        }
        let j = pick.expect("k ≤ D leaves a candidate");
        chosen[j] = true;
        selected.push(j);
        let (c, used_pinv) = ls_fit(z, y, &selected);
        clean &= !used_pinv;
        r = y - z.select_columns(&selected) * &c;
        coef = c;
    }
    Ok(DecoderOutput {
        beta_estimate: Some(embed(d, &selected, &coef)),
        support_estimate: SupportSet::from_unsorted(selected),
        iterations: k,
        objective: Some(r.norm_squared()),
        converged: clean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }

    #[test]
    fn top_k_ties_prefer_lower_index() {
        let b = DVector::from_vec(vec![0.0, -2.0, 1.0, 2.0, 1.0]);
        assert_eq!(top_k_support(&b, 3).indices(), &[1, 2, 3]);
    }

    #[test]
    fn lambda_rule() {
        assert_abs_diff_eq!(default_lambda(512, 900.0), 2.0 * (2.0 * 512f64.ln()).sqrt() / 30.0, epsilon = 1e-15);
    }

    #[test]
    fn settings_validation() {
        assert!(LassoSettings { tol: 0.0, ..LassoSettings::new(0.1) }.validate().is_err());
        assert!(LassoSettings { max_iter: 0, ..LassoSettings::new(0.1) }.validate().is_err());
        assert!(LassoSettings::new(-1.0).validate().is_err());
    }
}
