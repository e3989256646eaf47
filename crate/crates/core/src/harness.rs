//! Seeded Monte Carlo sweeps over one problem parameter.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{bound_range, log2_binomial, partial_first_i};
use crate::decoders::{self, LassoSettings, ReweightSettings, SIGN_PATTERN_LIMIT, SUBSET_LIMIT};
use crate::error::{Error, Result};
use crate::io::fmt_sig10;
use crate::model::{CoeffModel, Dataset, ProblemConfig, SupportSet};
use crate::rng::trial_seed;

pub const DEFAULT_TRIALS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVar {
    /// `N_n = N / (K log₂(D/K))`.
    NormalizedN,
    Snr,
    Rho,
    Nu,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::NormalizedN => "normalized_n",
            SweepVar::Snr => "snr",
            SweepVar::Rho => "rho",
            SweepVar::Nu => "nu",
        }
    }

    /// `base` with the swept parameter set to `value`.
    pub fn apply(self, base: &ProblemConfig, value: f64) -> ProblemConfig {
        let mut cfg = *base;
        match self {
            SweepVar::NormalizedN => cfg.n_samples = normalized_to_n(value, cfg.dimension, cfg.sparsity),
            SweepVar::Snr => cfg.snr = value,
            SweepVar::Rho => cfg.rho = value,
            SweepVar::Nu => cfg.nu = value,
        }
        cfg
    }
}

impl std::str::FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized_n" | "nn" | "n_n" => Ok(SweepVar::NormalizedN),
            "snr" => Ok(SweepVar::Snr),
            "rho" => Ok(SweepVar::Rho),
            "nu" => Ok(SweepVar::Nu),
            other => Err(Error::param(
                "sweep",
                format!("unknown sweep variable `{other}` (expected normalized_n, snr, rho or nu)"),
            )),
        }
    }
}

/// `N_n·K·log₂(D/K)` before rounding.
fn raw_samples(nn: f64, d: usize, k: usize) -> f64 {
    nn * k as f64 * (d as f64 / k as f64).log2()
}

/// `N = round-half-up(N_n·K·log₂(D/K))`, at least 1.
pub fn normalized_to_n(nn: f64, d: usize, k: usize) -> usize {
    ((raw_samples(nn, d, k) + 0.5).floor() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    MlMarginal,
    MlLeastSquares,
    Lasso,
    ReweightedLasso,
    Omp,
}

impl DecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::MlMarginal => "ml_marginal",
            DecoderKind::MlLeastSquares => "ml_least_squares",
            DecoderKind::Lasso => "lasso",
            DecoderKind::ReweightedLasso => "reweighted_lasso",
            DecoderKind::Omp => "omp",
        }
    }

    fn exhaustive(self) -> bool {
        matches!(self, DecoderKind::MlMarginal | DecoderKind::MlLeastSquares)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SuccessMetric {
    #[default]
    Exact,
    /// At least `(1 − α)K` true indices recovered.
    PartialAlpha(f64),
}

impl SuccessMetric {
    pub fn success(self, truth: &SupportSet, estimate: &SupportSet) -> bool {
        match self {
            SuccessMetric::Exact => truth == estimate,
            SuccessMetric::PartialAlpha(alpha) => {
                let k = truth.len() as f64;
                truth.overlap(estimate) as f64 >= (1.0 - alpha) * k - 1e-9
            }
        }
    }
}

/// Lasso controls; `lambda` defaults to `2√(2 ln D)/√SNR` at each sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoConfig {
    pub lambda: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LassoConfig {
    fn default() -> Self {
        LassoConfig {
            lambda: None,
            tol: LassoSettings::DEFAULT_TOL,
            max_iter: LassoSettings::DEFAULT_MAX_ITER,
        }
    }
}

/// Reweighting controls; `eps` defaults to `0.1σ` and `lambda_r` to `eps·λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReweightConfig {
    pub lambda_r: Option<f64>,
    pub eps: Option<f64>,
    pub outer_max: usize,
    pub outer_tol: f64,
}

impl Default for ReweightConfig {
    fn default() -> Self {
        ReweightConfig {
            lambda_r: None,
            eps: None,
            outer_max: ReweightSettings::DEFAULT_OUTER_MAX,
            outer_tol: ReweightSettings::DEFAULT_OUTER_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub base: ProblemConfig,
    pub sweep_var: SweepVar,
    pub sweep_values: Vec<f64>,
    /// Fixes `N` through `N_n` when the sweep is over another variable.
    pub normalized_n: Option<f64>,
    pub decoders: Vec<DecoderKind>,
    pub trials: usize,
    pub emit_bounds: bool,
    pub success_metric: SuccessMetric,
    pub lasso: LassoConfig,
    pub reweight: ReweightConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            base: ProblemConfig::default(),
            sweep_var: SweepVar::NormalizedN,
            sweep_values: Vec::new(),
            normalized_n: None,
            decoders: Vec::new(),
            trials: DEFAULT_TRIALS,
            emit_bounds: true,
            success_metric: SuccessMetric::Exact,
            lasso: LassoConfig::default(),
            reweight: ReweightConfig::default(),
        }
    }
}

fn field_error(prefix: &str, e: Error) -> Error {
    match e {
        Error::Parameter { name, reason } => Error::config(format!("{prefix}{name}"), reason),
        other => other,
    }
}

impl SweepSpec {
    /// Problem configuration at sweep index `point` (seed left as in `base`).
    pub fn config_at(&self, point: usize) -> ProblemConfig {
        let mut base = self.base;
        if let (Some(nn), false) = (self.normalized_n, self.sweep_var == SweepVar::NormalizedN) {
            base.n_samples = normalized_to_n(nn, base.dimension, base.sparsity);
        }
        self.sweep_var.apply(&base, self.sweep_values[point])
    }

    /// Range and capacity checks; errors carry the key path of the offending field.
    pub fn validate(&self) -> Result<()> {
        self.base.validate().map_err(|e| field_error("base.", e))?;
        if self.sweep_values.is_empty() {
            return Err(Error::config("sweep_values", "must be nonempty"));
        }
        for (j, w) in self.sweep_values.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(Error::config(
                    format!("sweep_values[{}]", j + 1),
                    "values must be strictly ascending",
                ));
            }
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if let SuccessMetric::PartialAlpha(alpha) = self.success_metric {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(Error::config("success_metric.partial_alpha", format!("must lie in (0, 1], got {alpha}")));
            }
        }
        let (d, k) = (self.base.dimension, self.base.sparsity);
        let check_nn = |nn: f64, path: String| -> Result<()> {
            let raw = raw_samples(nn, d, k);
            if !((raw + 0.5).floor() >= 1.0) {
                return Err(Error::config(
                    path,
                    format!("N_n = {nn} gives N = round({raw}) < 1 for D = {d}, K = {k}"),
                ));
            }
            Ok(())
        };
        if let Some(nn) = self.normalized_n {
            check_nn(nn, "normalized_n".into())?;
        }
        for (j, &v) in self.sweep_values.iter().enumerate() {
            let path = format!("sweep_values[{j}]");
            if self.sweep_var == SweepVar::NormalizedN {
                check_nn(v, path.clone())?;
            }
            self.config_at(j).validate().map_err(|e| match e {
                Error::Parameter { reason, .. } => Error::config(path.clone(), reason),
                other => other,
            })?;
        }
        if let Some(l) = self.lasso.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::config("lasso.lambda", format!("must be nonnegative, got {l}")));
            }
        }
        if !(self.lasso.tol > 0.0) {
            return Err(Error::config("lasso.tol", "must be positive"));
        }
        if self.lasso.max_iter == 0 {
            return Err(Error::config("lasso.max_iter", "must be at least 1"));
        }
        if let Some(eps) = self.reweight.eps {
            if !(eps > 0.0) {
                return Err(Error::config("reweight.eps", format!("must be positive, got {eps}")));
            }
        }
        if let Some(l) = self.reweight.lambda_r {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::config("reweight.lambda_r", format!("must be nonnegative, got {l}")));
            }
        }
        if self.decoders.iter().any(|dk| dk.exhaustive()) {
            let subsets = log2_binomial(d as i64, k as i64)?.exp2();
            if subsets > SUBSET_LIMIT * (1.0 + 1e-9) {
                return Err(Error::Capacity {
                    what: "exhaustive ML decoder",
                    size: subsets,
                    limit: SUBSET_LIMIT,
                });
            }
            let signs = 2f64.powi(k as i32);
            if self.decoders.contains(&DecoderKind::MlMarginal)
                && self.base.coeff_model == CoeffModel::FixedSigns
                && signs > SIGN_PATTERN_LIMIT as f64
            {
                return Err(Error::Capacity {
                    what: "ML marginal decoder sign patterns",
                    size: signs,
                    limit: SIGN_PATTERN_LIMIT as f64,
                });
            }
        }
        Ok(())
    }
}

/// Parses and validates a JSON sweep document.
pub fn validate_config(text: &str) -> Result<SweepSpec> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let spec: SweepSpec = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { String::from("<root>") } else { path }, e.inner().to_string())
    })?;
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecoderCurve {
    pub decoder: DecoderKind,
    pub success: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCurve {
    pub sweep_var: SweepVar,
    pub sweep_values: Vec<f64>,
    pub decoders: Vec<DecoderCurve>,
    /// `1 − bound` at each sweep point.
    pub bound_success: Option<Vec<f64>>,
}

/// Success indicators of every decoder on one trial.
fn run_trial(spec: &SweepSpec, cfg: &ProblemConfig) -> Result<Vec<bool>> {
    let ds = Dataset::generate(cfg)?;
    let x = ds.observed_matrix();
    let k = cfg.sparsity;
    let lambda = spec.lasso.lambda.unwrap_or_else(|| decoders::default_lambda(cfg.dimension, cfg.snr));
    let settings = LassoSettings {
        lambda,
        tol: spec.lasso.tol,
        max_iter: spec.lasso.max_iter,
    };
    spec.decoders
        .iter()
        .map(|kind| {
            let out = match kind {
                DecoderKind::MlMarginal => decoders::ml_decode_marginal(&ds, cfg)?,
                DecoderKind::MlLeastSquares => decoders::ml_decode_ls(x, &ds.y, k)?,
                DecoderKind::Lasso => decoders::lasso(x, &ds.y, k, &settings)?,
                DecoderKind::ReweightedLasso => {
                    let eps = spec.reweight.eps.unwrap_or(0.1 * cfg.sigma2.sqrt());
                    let rw = ReweightSettings {
                        lambda_r: spec.reweight.lambda_r.unwrap_or(eps * lambda),
                        eps,
                        outer_max: spec.reweight.outer_max,
                        outer_tol: spec.reweight.outer_tol,
                    };
                    decoders::reweighted_lasso(x, &ds.y, k, &settings, &rw)?
                }
                DecoderKind::Omp => decoders::omp(x, &ds.y, k)?,
            };
            Ok(spec.success_metric.success(&ds.support, &out.support_estimate))
        })
        .collect()
}

fn bound_success_at(spec: &SweepSpec, cfg: &ProblemConfig) -> f64 {
    let first_i = match spec.success_metric {
        SuccessMetric::Exact => 1,
        SuccessMetric::PartialAlpha(alpha) => partial_first_i(cfg.sparsity, alpha),
    };
    bound_range(cfg, first_i, cfg.nu > 0.0).success()
}

/// Runs every trial of every sweep point on the current rayon pool.
///
/// Trial `t` at sweep index `p` uses the master seed
/// `trial_seed(base.seed, p, t)`, so results do not depend on scheduling.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepCurve> {
    spec.validate()?;
    let points = spec.sweep_values.len();
    let trials = if spec.decoders.is_empty() { 0 } else { spec.trials };
    let jobs: Vec<(usize, usize)> = (0..points).flat_map(|p| (0..trials).map(move |t| (p, t))).collect();
    let outcomes: Vec<Vec<bool>> = jobs
        .par_iter()
        .map(|&(p, t)| {
            let mut cfg = spec.config_at(p);
            cfg.seed = trial_seed(spec.base.seed, p, t);
            run_trial(spec, &cfg)
        })
        .collect::<Result<_>>()?;

    let mut curves: Vec<DecoderCurve> = spec
        .decoders
        .iter()
        .map(|&decoder| DecoderCurve {
            decoder,
            success: Vec::with_capacity(points),
            stderr: Vec::with_capacity(points),
        })
        .collect();
    for p in 0..points {
        let rows = &outcomes[p * trials..(p + 1) * trials];
        for (j, curve) in curves.iter_mut().enumerate() {
            let hits = rows.iter().filter(|r| r[j]).count();
            let phat = hits as f64 / trials as f64;
            curve.success.push(phat);
            curve.stderr.push((phat * (1.0 - phat) / trials as f64).sqrt());
        }
    }
    let bound_success = spec
        .emit_bounds
        .then(|| (0..points).map(|p| bound_success_at(spec, &spec.config_at(p))).collect());
    Ok(SweepCurve {
        sweep_var: spec.sweep_var,
        sweep_values: spec.sweep_values.clone(),
        decoders: curves,
        bound_success,
    })
}

/// [`run_sweep`] on a dedicated pool of `threads` workers.
pub fn run_sweep_with_threads(spec: &SweepSpec, threads: usize) -> Result<SweepCurve> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::param("threads", e.to_string()))?;
    pool.install(|| run_sweep(spec))
}

impl SweepCurve {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec![self.sweep_var.name().to_string()];
        for c in &self.decoders {
            h.push(format!("{}_success", c.decoder.name()));
            h.push(format!("{}_stderr", c.decoder.name()));
        }
        if self.bound_success.is_some() {
            h.push("bound_success".into());
        }
        h
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.sweep_values.len())
            .map(|p| {
                let mut row = vec![self.sweep_values[p]];
                for c in &self.decoders {
                    row.push(c.success[p]);
                    row.push(c.stderr[p]);
                }
                if let Some(b) = &self.bound_success {
                    row.push(b[p]);
                }
                row
            })
            .collect()
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header()).expect("in-memory write");
        for row in self.rows() {
            w.write_record(row.iter().map(|v| fmt_sig10(*v))).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
    }
}

pub fn emit_csv(curve: &SweepCurve, path: &Path) -> Result<()> {
    crate::io::write_file(path, curve.to_csv_string().as_bytes())
}

/// Header and numeric rows of a CSV written by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let parse_err = |reason: String| Error::Parse {
        path: path.into(),
        reason,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| parse_err(e.to_string()))?;
    let header = r
        .headers()
        .map_err(|e| parse_err(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| parse_err(format!("`{f}` is not a number"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_half_up() {
        // D = 128, K = 8: N = 32·N_n
        assert_eq!(normalized_to_n(1.0, 128, 8), 32);
        assert_eq!(normalized_to_n(1.0 / 64.0, 128, 8), 1);
        assert_eq!(normalized_to_n(0.001, 128, 8), 1);
        assert_eq!(normalized_to_n(3.0 / 64.0, 128, 8), 2);
    }

    #[test]
    fn sweep_var_names_round_trip() {
        for v in [SweepVar::NormalizedN, SweepVar::Snr, SweepVar::Rho, SweepVar::Nu] {
            assert_eq!(v.name().parse::<SweepVar>().unwrap(), v);
        }
    }

    #[test]
    fn partial_metric() {
        let truth = SupportSet::from_unsorted(vec![0, 1, 2, 3]);
        let est = SupportSet::from_unsorted(vec![0, 1, 2, 9]);
        assert!(!SuccessMetric::Exact.success(&truth, &est));
        assert!(SuccessMetric::PartialAlpha(0.25).success(&truth, &est));
        assert!(!SuccessMetric::PartialAlpha(0.2).success(&truth, &est));
    }
}
