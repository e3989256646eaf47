//! Exact error exponents and mutual information for finite-alphabet
//! observation models, by enumeration.
//!
//! Variables are IID given a latent `θ` drawn from a finite mixture, and the
//! observation depends only on the `K` salient variables through a
//! permutation-symmetric channel `P(y | x_S)`. For an error count `i` the
//! support splits into `S¹` (the first `i` positions) and `S²` (the rest).

use std::f64::consts::LN_2;

use itertools::Itertools;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{log2_binomial, BoundResult};
use crate::error::{Error, Result};
use crate::model::SupportSet;
use crate::rng::{self, Stream};

/// Maximum `|X|^K·|Y|·|Θ|` for a single enumeration.
pub const ENUMERATION_LIMIT: f64 = 1e8;

/// Maximum number of candidate supports scanned by [`ml_decode_discrete`].
pub const SUBSET_LIMIT: f64 = 1e6;

const PMF_TOL: f64 = 1e-12;

/// Finite-alphabet conditionally-IID observation model.
///
/// `y_given_xs` is indexed by the tuple `(x_1, …, x_K)` in mixed radix with
/// the first variable most significant; each entry is a pmf over `y_alphabet`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteChannelModel {
    pub k: usize,
    pub x_alphabet: Vec<String>,
    pub y_alphabet: Vec<String>,
    /// `(θ value, P(θ))` pairs.
    pub theta_support: Vec<(f64, f64)>,
    /// One pmf over `x_alphabet` per entry of `theta_support`.
    pub x_given_theta: Vec<Vec<f64>>,
    pub y_given_xs: Vec<Vec<f64>>,
}

fn check_pmf(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Model(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > PMF_TOL {
        return Err(Error::Model(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

/// Digits of `index` in base `radix`, most significant first.
fn digits(mut index: usize, radix: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = index % radix;
        index /= radix;
    }
    out
}

fn from_digits(d: impl IntoIterator<Item = usize>, radix: usize) -> usize {
    d.into_iter().fold(0, |acc, v| acc * radix + v)
}

impl DiscreteChannelModel {
    /// Checks pmfs, shapes and permutation symmetry of the channel.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Model("k must be at least 1".into()));
        }
        if self.x_alphabet.is_empty() || self.y_alphabet.is_empty() {
            return Err(Error::Model("alphabets must be nonempty".into()));
        }
        if self.theta_support.is_empty() {
            return Err(Error::Model("theta_support must be nonempty".into()));
        }
        let theta_p: Vec<f64> = self.theta_support.iter().map(|t| t.1).collect();
        check_pmf(&theta_p, "theta_support probabilities")?;
        if self.x_given_theta.len() != self.theta_support.len() {
            return Err(Error::Model(format!(
                "x_given_theta has {} pmfs for {} theta values",
                self.x_given_theta.len(),
                self.theta_support.len()
            )));
        }
        let nx = self.x_alphabet.len();
        for (t, p) in self.x_given_theta.iter().enumerate() {
            if p.len() != nx {
                return Err(Error::Model(format!("x_given_theta[{t}] has length {}, expected {nx}", p.len())));
            }
            check_pmf(p, &format!("x_given_theta[{t}]"))?;
        }
        let tuples = (nx as f64).powi(self.k as i32);
        if tuples > ENUMERATION_LIMIT {
            return Err(Error::Capacity {
                what: "channel table",
                size: tuples,
                limit: ENUMERATION_LIMIT,
            });
        }
        let tuples = tuples as usize;
        if self.y_given_xs.len() != tuples {
            return Err(Error::Model(format!(
                "y_given_xs has {} rows, expected |X|^K = {tuples}",
                self.y_given_xs.len()
            )));
        }
        let ny = self.y_alphabet.len();
        for (idx, p) in self.y_given_xs.iter().enumerate() {
            if p.len() != ny {
                return Err(Error::Model(format!("y_given_xs[{idx}] has length {}, expected {ny}", p.len())));
            }
            check_pmf(p, &format!("y_given_xs[{idx}]"))?;
        }
        // Every tuple must share its pmf with the sorted rearrangement.
        for idx in 0..tuples {
            let mut d = digits(idx, nx, self.k);
            d.sort_unstable();
            let canon = from_digits(d, nx);
            let (a, b) = (&self.y_given_xs[idx], &self.y_given_xs[canon]);
            if a.iter().zip(b).any(|(u, v)| (u - v).abs() > PMF_TOL) {
                return Err(Error::Model(format!(
                    "y_given_xs is not permutation symmetric: rows {idx} and {canon} differ"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let model: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::config(e.path().to_string(), e.inner().to_string()))?;
        model.validate()?;
        Ok(model)
    }

    /// Group testing: `X ~ Bernoulli(p)` and `Y = X_1 ∨ … ∨ X_K`, with the
    /// result flipped with probability `flip`.
    pub fn group_testing(k: usize, p: f64, flip: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param("p", format!("must lie in [0, 1], got {p}")));
        }
        if !(0.0..=1.0).contains(&flip) {
            return Err(Error::param("flip", format!("must lie in [0, 1], got {flip}")));
        }
        if k == 0 || k > 26 {
            return Err(Error::param("k", format!("must lie in [1, 26], got {k}")));
        }
        let y_given_xs = (0..1usize << k)
            .map(|idx| if idx == 0 { vec![1.0 - flip, flip] } else { vec![flip, 1.0 - flip] })
            .collect();
        let model = DiscreteChannelModel {
            k,
            x_alphabet: vec!["0".into(), "1".into()],
            y_alphabet: vec!["0".into(), "1".into()],
            theta_support: vec![(p, 1.0)],
            x_given_theta: vec![vec![1.0 - p, p]],
            y_given_xs,
        };
        model.validate()?;
        Ok(model)
    }

    /// Random valid model with `K ≤ max_k`, alphabets of size 2..=`max_alphabet`
    /// and up to `max_theta` mixture atoms, used for property checks.
    pub fn random(seed: u64, max_k: usize, max_alphabet: usize, max_theta: usize) -> Self {
        let mut rng = rng::substream(seed, Stream::Channel, u64::MAX);
        let k = rng.random_range(1..=max_k.max(1));
        let nx = rng.random_range(2..=max_alphabet.max(2));
        let ny = rng.random_range(2..=max_alphabet.max(2));
        let nt = rng.random_range(1..=max_theta.max(1));
        let mut pmf = |len: usize| {
            let w: Vec<f64> = (0..len).map(|_| rng.random::<f64>() + 0.05).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|v| v / s).collect::<Vec<f64>>()
        };
        let theta_p = pmf(nt);
        let x_given_theta = (0..nt).map(|_| pmf(nx)).collect();
        let tuples = nx.pow(k as u32);
        let mut y_given_xs: Vec<Vec<f64>> = vec![Vec::new(); tuples];
        for idx in 0..tuples {
            let mut d = digits(idx, nx, k);
            d.sort_unstable();
            let canon = from_digits(d, nx);
            y_given_xs[idx] = if canon < idx { y_given_xs[canon].clone() } else { pmf(ny) };
        }
        DiscreteChannelModel {
            k,
            x_alphabet: (0..nx).map(|v| v.to_string()).collect(),
            y_alphabet: (0..ny).map(|v| v.to_string()).collect(),
            theta_support: theta_p.into_iter().enumerate().map(|(t, p)| (t as f64, p)).collect(),
            x_given_theta,
            y_given_xs,
        }
    }

    fn enumeration_size(&self) -> f64 {
        (self.x_alphabet.len() as f64).powi(self.k as i32)
            * self.y_alphabet.len() as f64
            * self.theta_support.len() as f64
    }
}

/// Exponent values on a δ grid for one error count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentCurve {
    pub deltas: Vec<f64>,
    pub values: Vec<f64>,
    pub i_errors: usize,
}

/// Streaming `ln Σ exp`.
#[derive(Clone, Copy)]
struct LogSum {
    max: f64,
    scaled: f64,
}

impl LogSum {
    fn new() -> Self {
        LogSum {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    fn add(&mut self, v: f64) {
        if v == f64::NEG_INFINITY {
            return;
        }
        if v > self.max {
            self.scaled = self.scaled * (self.max - v).exp() + 1.0;
            self.max = v;
        } else {
            self.scaled += (v - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        if self.scaled == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// Log-probability tables for one split `(S¹, S²)` with `|S¹| = i`.
struct Tables {
    ln_theta: Vec<f64>,
    /// `[θ][x1]`, `ln P(x_{S¹} | θ)`.
    ln_x1: Vec<Vec<f64>>,
    /// `[θ][x2]`, `ln P(x_{S²} | θ)`.
    ln_x2: Vec<Vec<f64>>,
    /// `[x][y]`, `ln P(y | x_S)` with `x = x1·|X|^{K−i} + x2`.
    ln_y: Vec<Vec<f64>>,
    n1: usize,
    n2: usize,
    ny: usize,
}

impl Tables {
    fn new(model: &DiscreteChannelModel, i: usize) -> Result<Self> {
        model.validate()?;
        if i == 0 || i > model.k {
            return Err(Error::param("i", format!("must lie in [1, {}], got {i}", model.k)));
        }
        let size = model.enumeration_size();
        if size > ENUMERATION_LIMIT {
            return Err(Error::Capacity {
                what: "exponent enumeration",
                size,
                limit: ENUMERATION_LIMIT,
            });
        }
        let nx = model.x_alphabet.len();
        let n1 = nx.pow(i as u32);
        let n2 = nx.pow((model.k - i) as u32);
        let tuple_ln = |pmf: &[f64], len: usize, count: usize| -> Vec<f64> {
            (0..count)
                .map(|idx| digits(idx, nx, len).into_iter().map(|s| pmf[s].ln()).sum())
                .collect()
        };
        Ok(Tables {
            ln_theta: model.theta_support.iter().map(|t| t.1.ln()).collect(),
            ln_x1: model.x_given_theta.iter().map(|p| tuple_ln(p, i, n1)).collect(),
            ln_x2: model.x_given_theta.iter().map(|p| tuple_ln(p, model.k - i, n2)).collect(),
            ln_y: model
                .y_given_xs
                .iter()
                .map(|p| p.iter().map(|v| v.ln()).collect())
                .collect(),
            n1,
            n2,
            ny: model.y_alphabet.len(),
        })
    }

    /// `E_o(δ)` in bits.
    fn eo(&self, delta: f64) -> f64 {
        let s = 1.0 + delta;
        let mut outer = LogSum::new();
        for (t, &lt) in self.ln_theta.iter().enumerate() {
            if lt == f64::NEG_INFINITY {
                continue;
            }
            for x2 in 0..self.n2 {
                let l2 = self.ln_x2[t][x2];
                if l2 == f64::NEG_INFINITY {
                    continue;
                }
                for y in 0..self.ny {
                    let mut inner = LogSum::new();
                    for x1 in 0..self.n1 {
                        inner.add(self.ln_x1[t][x1] + self.ln_y[x1 * self.n2 + x2][y] / s);
                    }
                    outer.add(lt + l2 + s * inner.value());
                }
            }
        }
        -outer.value() / LN_2
    }

    /// `I(X_{S¹}; Y | X_{S²}, θ)` in bits.
    fn mutual_information(&self) -> f64 {
        let mut total = 0.0;
        for (t, &lt) in self.ln_theta.iter().enumerate() {
            let pt = lt.exp();
            if pt == 0.0 {
                continue;
            }
            for x2 in 0..self.n2 {
                let p2 = self.ln_x2[t][x2].exp();
                if p2 == 0.0 {
                    continue;
                }
                for y in 0..self.ny {
                    let mut marginal = LogSum::new();
                    for x1 in 0..self.n1 {
                        marginal.add(self.ln_x1[t][x1] + self.ln_y[x1 * self.n2 + x2][y]);
                    }
                    let ln_q = marginal.value();
                    for x1 in 0..self.n1 {
                        let ln_joint = self.ln_x1[t][x1] + self.ln_y[x1 * self.n2 + x2][y];
                        if ln_joint == f64::NEG_INFINITY {
                            continue;
                        }
                        let ln_py = self.ln_y[x1 * self.n2 + x2][y];
                        total += pt * p2 * ln_joint.exp() * (ln_py - ln_q);
                    }
                }
            }
        }
        (total / LN_2).max(0.0)
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::param("delta", format!("must lie in [0, 1], got {delta}")));
    }
    Ok(())
}

/// `E_o(δ) = −log₂ Σ_θ P(θ) Σ_y Σ_{x2} P(x2|θ) (Σ_{x1} P(x1|θ) P(y|x1,x2)^{1/(1+δ)})^{1+δ}`.
pub fn error_exponent(model: &DiscreteChannelModel, i: usize, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(Tables::new(model, i)?.eo(delta))
}

pub fn exponent_curve(model: &DiscreteChannelModel, i: usize, deltas: &[f64]) -> Result<ExponentCurve> {
    for &d in deltas {
        check_delta(d)?;
    }
    let tables = Tables::new(model, i)?;
    Ok(ExponentCurve {
        deltas: deltas.to_vec(),
        values: deltas.iter().map(|&d| tables.eo(d)).collect(),
        i_errors: i,
    })
}

/// `I(X_{S¹}; Y | X_{S²}, θ)` in bits.
pub fn mutual_information(model: &DiscreteChannelModel, i: usize) -> Result<f64> {
    Ok(Tables::new(model, i)?.mutual_information())
}

/// Second-order forward difference of `E_o` at `δ = 0` alongside the mutual
/// information it should equal.
pub fn derivative_check(model: &DiscreteChannelModel, i: usize, h: f64) -> Result<(f64, f64)> {
    if !(h > 0.0 && h <= 1e-2) {
        return Err(Error::param("h", format!("must lie in (0, 0.01], got {h}")));
    }
    let tables = Tables::new(model, i)?;
    let lhs = (-3.0 * tables.eo(0.0) + 4.0 * tables.eo(h) - tables.eo(2.0 * h)) / (2.0 * h);
    Ok((lhs, tables.mutual_information()))
}

const GRID_POINTS: usize = 101;
const GOLDEN_TOL: f64 = 1e-6;

/// Maximizes a concave-in-practice function on `[0, 1]`: grid scan followed
/// by golden-section refinement around the best grid point.
fn maximize_on_unit(f: impl Fn(f64) -> f64) -> (f64, f64) {
    let step = 1.0 / (GRID_POINTS - 1) as f64;
    let mut best = (0.0, f(0.0));
    let mut best_j = 0;
    for j in 1..GRID_POINTS {
        let d = j as f64 * step;
        let v = f(d);
        if v > best.1 {
            best = (d, v);
            best_j = j;
        }
    }
    let mut a = best_j.saturating_sub(1) as f64 * step;
    let mut b = ((best_j + 1).min(GRID_POINTS - 1)) as f64 * step;
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > GOLDEN_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    if fm > best.1 {
        best = (mid, fm);
    }
    best
}

/// `min(1, Σ_i 2^(−max_δ [N·E_o(δ) − δ·log₂(C(D−K,i)C(K,i))]))`.
///
/// With `weak` the binomial penalty enters without the factor δ.
pub fn error_bound_general(model: &DiscreteChannelModel, n: usize, d: usize, weak: bool) -> Result<BoundResult> {
    model.validate()?;
    let k = model.k;
    if k > d {
        return Err(Error::param("d", format!("D = {d} is smaller than K = {k}")));
    }
    let mut terms = Vec::with_capacity(k);
    for i in 1..=k {
        let tables = Tables::new(model, i)?;
        let penalty = if i > d - k {
            0.0
        } else {
            log2_binomial((d - k) as i64, i as i64)? + log2_binomial(k as i64, i as i64)?
        };
        let nf = n as f64;
        let (_, e) = if weak {
            maximize_on_unit(|delta| nf * tables.eo(delta) - penalty)
        } else {
            maximize_on_unit(|delta| nf * tables.eo(delta) - delta * penalty)
        };
        terms.push(e);
    }
    Ok(BoundResult::from_terms(terms, 1))
}

/// One simulated instance of a discrete model with `n` rows and `d` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSample {
    /// Row-major symbol indices, `n × d`.
    pub x: Vec<Vec<usize>>,
    pub y: Vec<usize>,
    pub support: SupportSet,
}

fn categorical<R: Rng + ?Sized>(rng: &mut R, pmf: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    // Rounding left a sliver above the cumulative sum; take the last positive entry.
    pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Draws a uniform support, then per row a fresh `θ`, `d` IID symbols and an observation.
pub fn simulate_discrete(model: &DiscreteChannelModel, n: usize, d: usize, seed: u64) -> Result<DiscreteSample> {
    model.validate()?;
    if model.k > d {
        return Err(Error::param("d", format!("D = {d} is smaller than K = {}", model.k)));
    }
    let mut rng = rng::substream(seed, Stream::Channel, 0);
    let mut pool: Vec<usize> = (0..d).collect();
    for j in 0..model.k {
        let r = rng.random_range(j..d);
        pool.swap(j, r);
    }
    pool.truncate(model.k);
    let support = SupportSet::from_unsorted(pool);
    let theta_p: Vec<f64> = model.theta_support.iter().map(|t| t.1).collect();
    let nx = model.x_alphabet.len();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let t = categorical(&mut rng, &theta_p);
        let row: Vec<usize> = (0..d).map(|_| categorical(&mut rng, &model.x_given_theta[t])).collect();
        let idx = from_digits(support.indices().iter().map(|&c| row[c]), nx);
        y.push(categorical(&mut rng, &model.y_given_xs[idx]));
        x.push(row);
    }
    Ok(DiscreteSample { x, y, support })
}

/// Exhaustive ML support estimate `argmax_S Σ_n ln P(y_n | x_{n,S})`, ties to
/// the lexicographically smallest set.
pub fn ml_decode_discrete(model: &DiscreteChannelModel, x: &[Vec<usize>], y: &[usize], d: usize) -> Result<SupportSet> {
    let k = model.k;
    if k > d {
        return Err(Error::param("d", format!("D = {d} is smaller than K = {k}")));
    }
    let subsets = log2_binomial(d as i64, k as i64)?.exp2();
    if subsets > SUBSET_LIMIT * (1.0 + 1e-9) {
        return Err(Error::Capacity {
            what: "discrete ML decoder",
            size: subsets,
            limit: SUBSET_LIMIT,
        });
    }
    if x.len() != y.len() || x.iter().any(|r| r.len() != d) {
        return Err(Error::param("x", "shape does not match y and D"));
    }
    let nx = model.x_alphabet.len();
    let ln_y: Vec<Vec<f64>> = model
        .y_given_xs
        .iter()
        .map(|p| p.iter().map(|v| v.ln()).collect())
        .collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for cand in (0..d).combinations(k) {
        let score: f64 = x
            .iter()
            .zip(y)
            .map(|(row, &yn)| ln_y[from_digits(cand.iter().map(|&c| row[c]), nx)][yn])
            .sum();
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, cand));
        }
    }
    Ok(SupportSet::from_unsorted(best.map(|b| b.1).unwrap_or_default()))
}
