//! Synthetic instances of the normalized sparse linear model.
//!
//! Rows of the sensing matrix are IID. Within a row every entry is
//! `μ + U_k`, with a shared `μ ~ N(0, ρ/N)` and independent
//! `U_k ~ N(0, (1 − ρ)/N)`, so each entry has variance `1/N` and two columns
//! have covariance `ρ/N`. Observations are `y = Xβ + w` with
//! `w ~ N(0, 1/SNR)`; the noisy-data variant exposes `Z = X + V`,
//! `V ~ N(0, ν/N)`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::rng::{self, Stream};

/// Distribution of the on-support coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoeffModel {
    /// `β_k ∈ {−σ, +σ}` with equal probability.
    FixedSigns,
    /// `β_k ~ N(0, σ²)`.
    GaussianIid,
}

impl std::str::FromStr for CoeffModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed_signs" | "fixed-signs" | "fixed" => Ok(CoeffModel::FixedSigns),
            "gaussian_iid" | "gaussian-iid" | "gaussian" => Ok(CoeffModel::GaussianIid),
            other => Err(Error::param(
                "coeff_model",
                format!("unknown coefficient model `{other}` (expected fixed_signs or gaussian_iid)"),
            )),
        }
    }
}

/// Scalar parameters of one recovery problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub n_samples: usize,
    pub dimension: usize,
    pub sparsity: usize,
    /// Linear scale; the observation noise variance is `1/snr`.
    pub snr: f64,
    pub sigma2: f64,
    pub rho: f64,
    pub nu: f64,
    pub coeff_model: CoeffModel,
    pub seed: u64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            n_samples: 256,
            dimension: 512,
            sparsity: 32,
            snr: 100.0 * 9.0,
            sigma2: 1.0,
            rho: 0.0,
            nu: 0.0,
            coeff_model: CoeffModel::FixedSigns,
            seed: 0,
        }
    }
}

impl ProblemConfig {
    /// Checks every field invariant; the error names the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::param("n_samples", "must be at least 1"));
        }
        if self.dimension == 0 {
            return Err(Error::param("dimension", "must be at least 1"));
        }
        if self.sparsity == 0 {
            return Err(Error::param("sparsity", "must be at least 1"));
        }
        if self.sparsity > self.dimension {
            return Err(Error::param(
                "sparsity",
                format!("K = {} exceeds D = {}", self.sparsity, self.dimension),
            ));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return Err(Error::param("snr", format!("must be positive and finite, got {}", self.snr)));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::param("sigma2", format!("must be positive and finite, got {}", self.sigma2)));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::param("rho", format!("must lie in [0, 1], got {}", self.rho)));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::param("nu", format!("must be nonnegative and finite, got {}", self.nu)));
        }
        Ok(())
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n_samples = n;
        self
    }
}

/// Sorted, duplicate-free set of column indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SupportSet(Vec<usize>);

impl SupportSet {
    /// Builds a support from strictly increasing indices below `dimension`.
    pub fn new(indices: Vec<usize>, dimension: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("support", "indices must be strictly increasing"));
        }
        if let Some(&last) = indices.last() {
            if last >= dimension {
                return Err(Error::param(
                    "support",
                    format!("index {last} out of range for dimension {dimension}"),
                ));
            }
        }
        Ok(SupportSet(indices))
    }

    /// Sorts and deduplicates arbitrary indices.
    pub fn from_unsorted(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        SupportSet(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    /// Number of indices shared with `other`.
    pub fn overlap(&self, other: &SupportSet) -> usize {
        let (mut a, mut b, mut n) = (0, 0, 0);
        while a < self.0.len() && b < other.0.len() {
            match self.0[a].cmp(&other.0[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    a += 1;
                    b += 1;
                }
            }
        }
        n
    }
}

/// One realized problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    /// Noisy observation `Z = X + V` of the sensing matrix, present when ν > 0.
    pub z: Option<DMatrix<f64>>,
    pub y: DVector<f64>,
    pub support: SupportSet,
    pub beta: DVector<f64>,
}

impl Dataset {
    /// Draws a full instance from `cfg`, one substream per component.
    pub fn generate(cfg: &ProblemConfig) -> Result<Self> {
        cfg.validate()?;
        let seed = cfg.seed;
        let x = generate_sensing_matrix(cfg.n_samples, cfg.dimension, cfg.rho, seed)?;
        let (support, beta) =
            generate_signal(cfg.dimension, cfg.sparsity, cfg.sigma2, cfg.coeff_model, seed)?;
        let y = generate_observations(&x, &beta, cfg.snr, seed)?;
        let z = if cfg.nu > 0.0 {
            Some(corrupt_matrix(&x, cfg.nu, seed)?)
        } else {
            None
        };
        Ok(Dataset { x, z, y, support, beta })
    }

    /// The matrix a decoder is allowed to see: `Z` when present, else `X`.
    pub fn observed_matrix(&self) -> &DMatrix<f64> {
        self.z.as_ref().unwrap_or(&self.x)
    }

    /// Writes `header.json`, `x.csv`, `y.csv`, `beta.csv` and (if present) `z.csv`.
    pub fn write_debug(&self, cfg: &ProblemConfig, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let header = serde_json::json!({
            "config": cfg,
            "rows": self.x.nrows(),
            "cols": self.x.ncols(),
            "support": self.support,
            "has_z": self.z.is_some(),
            "files": {"x": "x.csv", "y": "y.csv", "beta": "beta.csv", "z": self.z.as_ref().map(|_| "z.csv")},
        });
        let text = serde_json::to_string_pretty(&header).expect("header serializes");
        io::write_file(&dir.join("header.json"), text.as_bytes())?;
        io::write_matrix(&dir.join("x.csv"), &self.x)?;
        io::write_vector(&dir.join("y.csv"), &self.y)?;
        io::write_vector(&dir.join("beta.csv"), &self.beta)?;
        if let Some(z) = &self.z {
            io::write_matrix(&dir.join("z.csv"), z)?;
        }
        Ok(())
    }
}

/// N×D sensing matrix with unit-`1/N` entry variance and column correlation ρ.
pub fn generate_sensing_matrix(n: usize, d: usize, rho: f64, seed: u64) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::param("rho", format!("must lie in [0, 1], got {rho}")));
    }
    if n == 0 || d == 0 {
        return Err(Error::param("dimensions", "N and D must be positive"));
    }
    let mut rng = rng::substream(seed, Stream::Matrix, 0);
    let shared_sd = (rho / n as f64).sqrt();
    let own_sd = ((1.0 - rho) / n as f64).sqrt();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let mu = rng::gaussian(&mut rng, shared_sd);
        for _ in 0..d {
            data.push(mu + rng::gaussian(&mut rng, own_sd));
        }
    }
    Ok(DMatrix::from_row_slice(n, d, &data))
}

/// Uniform K-subset support with coefficients drawn from `coeff_model`.
pub fn generate_signal(
    d: usize,
    k: usize,
    sigma2: f64,
    coeff_model: CoeffModel,
    seed: u64,
) -> Result<(SupportSet, DVector<f64>)> {
    if k > d {
        return Err(Error::param("sparsity", format!("K = {k} exceeds D = {d}")));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::param("sigma2", "must be positive"));
    }
    let mut rng = rng::substream(seed, Stream::Signal, 0);
    // Partial Fisher–Yates: the first k slots are a uniform k-subset.
    let mut pool: Vec<usize> = (0..d).collect();
    for j in 0..k {
        let r = rng.random_range(j..d);
        pool.swap(j, r);
    }
    pool.truncate(k);
    let support = SupportSet::from_unsorted(pool);
    let sigma = sigma2.sqrt();
    let mut beta = DVector::zeros(d);
    for &idx in support.indices() {
        beta[idx] = match coeff_model {
            CoeffModel::FixedSigns => {
                if rng.random::<bool>() {
                    sigma
                } else {
                    -sigma
                }
            }
            CoeffModel::GaussianIid => rng::gaussian(&mut rng, sigma),
        };
    }
    Ok((support, beta))
}

/// `y = xβ + w` with `w ~ N(0, 1/snr)` IID.
pub fn generate_observations(x: &DMatrix<f64>, beta: &DVector<f64>, snr: f64, seed: u64) -> Result<DVector<f64>> {
    if !(snr > 0.0) {
        return Err(Error::param("snr", format!("must be positive, got {snr}")));
    }
    if x.ncols() != beta.len() {
        return Err(Error::param(
            "beta",
            format!("length {} does not match {} matrix columns", beta.len(), x.ncols()),
        ));
    }
    let mut rng = rng::substream(seed, Stream::Noise, 0);
    let noise_sd = snr.recip().sqrt();
    let mut y = x * beta;
    for v in y.iter_mut() {
        *v += rng::gaussian(&mut rng, noise_sd);
    }
    Ok(y)
}

/// `z = x + v` with `v ~ N(0, ν/N)` IID; `ν = 0` returns `x` unchanged.
pub fn corrupt_matrix(x: &DMatrix<f64>, nu: f64, seed: u64) -> Result<DMatrix<f64>> {
    if !(nu >= 0.0) {
        return Err(Error::param("nu", format!("must be nonnegative, got {nu}")));
    }
    if nu == 0.0 {
        return Ok(x.clone());
    }
    let (n, d) = x.shape();
    let mut rng = rng::substream(seed, Stream::Corruption, 0);
    let sd = (nu / n as f64).sqrt();
    let mut z = x.clone();
    // Row-major draw order, matching the sensing matrix.
    for r in 0..n {
        for c in 0..d {
            z[(r, c)] += rng::gaussian(&mut rng, sd);
        }
    }
    Ok(z)
}
