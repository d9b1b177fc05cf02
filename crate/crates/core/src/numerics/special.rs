//! Error function, normal CDF and its inverse.
//!
//! All three are implemented locally so certification radii do not depend
//! on platform math-library accuracy. `erf`/`erfc` use the rational
//! Chebyshev approximations of Cody (1969), accurate to near machine
//! precision; the inverse CDF uses Acklam's rational initializer refined
//! by Newton steps against the local `erfc`.

// published coefficient tables carry one digit beyond f64 precision
#![allow(clippy::excessive_precision)]

use super::NumericsError;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

// Cody interval 1: |x| <= 0.46875, erf(x) = x * P(x^2)/Q(x^2)
const ERF_A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
const ERF_B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];

// Cody interval 2: 0.46875 < |x| <= 4, erfc(x) = exp(-x^2) * P(x)/Q(x)
const ERFC_C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
const ERFC_D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];

// Cody interval 3: |x| > 4, erfc(x) = exp(-x^2)/x * (1/sqrt(pi) - P(1/x^2)/Q(1/x^2)/x^2)
const ERFC_P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
const ERFC_Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];

const ONE_OVER_SQRT_PI: f64 = 5.6418958354775628695e-1;

/// erfc(y)*exp(y^2) for 0.46875 < y <= 4.
fn erfc_scaled_mid(y: f64) -> f64 {
    let mut num = ERFC_C[8] * y;
    let mut den = y;
    for i in 0..7 {
        num = (num + ERFC_C[i]) * y;
        den = (den + ERFC_D[i]) * y;
    }
    (num + ERFC_C[7]) / (den + ERFC_D[7])
}

/// erfc(y)*exp(y^2) for y > 4.
fn erfc_scaled_high(y: f64) -> f64 {
    let ysq = 1.0 / (y * y);
    let mut num = ERFC_P[5] * ysq;
    let mut den = ysq;
    for i in 0..4 {
        num = (num + ERFC_P[i]) * ysq;
        den = (den + ERFC_Q[i]) * ysq;
    }
    let r = ysq * (num + ERFC_P[4]) / (den + ERFC_Q[4]);
    (ONE_OVER_SQRT_PI - r) / y
}

/// exp(-y^2) evaluated as exp(-hi^2)*exp(-(y-hi)(y+hi)) to limit cancellation.
fn exp_neg_square(y: f64) -> f64 {
    let hi = (y * 16.0).trunc() / 16.0;
    let del = (y - hi) * (y + hi);
    (-hi * hi).exp() * (-del).exp()
}

/// Gauss error function.
pub fn erf(x: f64) -> f64 {
    let y = x.abs();
    if y <= 0.46875 {
        let ysq = if y > 1e-300 { y * y } else { 0.0 };
        let mut num = ERF_A[4] * ysq;
        let mut den = ysq;
        for i in 0..3 {
            num = (num + ERF_A[i]) * ysq;
            den = (den + ERF_B[i]) * ysq;
        }
        return x * (num + ERF_A[3]) / (den + ERF_B[3]);
    }
    let r = 1.0 - erfc(y);
    if x < 0.0 {
        -r
    } else {
        r
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    if y <= 0.46875 {
        return 1.0 - erf(x);
    }
    let scaled = if y <= 4.0 {
        erfc_scaled_mid(y)
    } else if y < 26.6 {
        erfc_scaled_high(y)
    } else {
        0.0
    };
    let r = exp_neg_square(y) * scaled;
    if x < 0.0 {
        2.0 - r
    } else {
        r
    }
}

/// Standard normal cumulative distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal density.
fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

// Acklam's rational approximation for the inverse normal CDF.
const INV_A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const INV_B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const INV_C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const INV_D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];

/// Initial guess for `inv_norm_cdf` on `0 < p <= 0.5` (result is <= 0).
fn inv_norm_lower(p: f64) -> f64 {
    if p < 0.02425 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((INV_C[0] * q + INV_C[1]) * q + INV_C[2]) * q + INV_C[3]) * q + INV_C[4]) * q
            + INV_C[5])
            / ((((INV_D[0] * q + INV_D[1]) * q + INV_D[2]) * q + INV_D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((INV_A[0] * r + INV_A[1]) * r + INV_A[2]) * r + INV_A[3]) * r + INV_A[4]) * r
            + INV_A[5])
            * q
            / (((((INV_B[0] * r + INV_B[1]) * r + INV_B[2]) * r + INV_B[3]) * r + INV_B[4]) * r
                + 1.0)
    }
}

/// Inverse of the standard normal CDF.
///
/// Antisymmetric by construction: the value is always computed on the lower
/// tail and mirrored, so `inv_norm_cdf(1 - p) == -inv_norm_cdf(p)` up to the
/// rounding of `1 - p` itself.
pub fn inv_norm_cdf(p: f64) -> Result<f64, NumericsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(NumericsError::ProbabilityDomain(p));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let (q, sign) = if p < 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
    let mut x = inv_norm_lower(q);
    // Two Newton steps against the local CDF; pdf underflow guard for the far tail.
    for _ in 0..2 {
        let pdf = norm_pdf(x);
        if pdf < 1e-290 {
            break;
        }
        x -= (norm_cdf(x) - q) / pdf;
    }
    Ok(sign * x)
}
