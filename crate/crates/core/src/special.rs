//! Log-domain arithmetic and the fixed quadrature rule used for Gamma expectations.

use std::f64::consts::LN_2;

/// `ln Σ exp(v)`; `-inf` for an empty or all `-inf` input.
pub fn ln_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max == f64::INFINITY {
        return max;
    }
    max + values.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// `log2 Σ 2^v`, same conventions as [`ln_sum_exp`].
pub fn log2_sum_exp2(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max == f64::INFINITY {
        return max;
    }
    max + values.iter().map(|&v| (v - max).exp2()).sum::<f64>().log2()
}

/// `ln Γ(x)` for `x > 0`.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `log2(1 + x)` accurate for small `x`.
#[inline]
pub fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

const QUAD_STEP: f64 = 0.05;

/// `E[f(T)]` for `T ~ Gamma(shape, 1)`.
///
/// Substitutes `t = e^v` and applies the trapezoid rule on a truncated line.
/// The transformed integrand `e^{shape v - e^v} f(e^v)` is analytic in a strip
/// of half-width π whenever `f` is analytic off the negative real axis (e.g.
/// `ln(1 + b t)`), so the rule converges geometrically regardless of where `f`
/// bends. Normalizing by the same rule applied to `f = 1` removes Γ(shape).
pub fn gamma_expectation(shape: f64, f: impl Fn(f64) -> f64) -> f64 {
    assert!(shape > 0.0, "Gamma shape must be positive");
    let v_min = -60.0 / shape - 40.0;
    let v_max = (4.0 * shape + 60.0).ln();
    let steps = ((v_max - v_min) / QUAD_STEP).ceil() as usize;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..=steps {
        let v = v_min + k as f64 * QUAD_STEP;
        let t = v.exp();
        let w = (shape * v - t).exp();
        if w == 0.0 {
            continue;
        }
        num += w * f(t);
        den += w;
    }
    num / den
}
