//! Scalar helpers shared by the estimation and quadrature code.

/// Logistic function, stable for large |x|.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(sigmoid(x))` without cancellation.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Numerically stable log-sum-exp. Returns `-inf` for an empty slice or when
/// every term is `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

const SERIES_CUTOFF: f64 = 1e-4;

/// Curvature coefficient of the quadratic logistic lower bound,
/// `(1/2 - sigmoid(xi)) / (2 xi)`. Strictly negative, tends to -1/8 as xi -> 0.
#[inline]
pub fn bound_curvature(xi: f64) -> f64 {
    let a = xi.abs();
    if a < SERIES_CUTOFF {
        -0.125 + a * a / 96.0
    } else {
        // 1/2 - sigmoid(x) = -tanh(x/2)/2
        -(0.5 * a).tanh() / (4.0 * a)
    }
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}
