//! Standard normal primitives on the latent scale.
//!
//! Infinite arguments are legal everywhere: `cdf(±∞) = {1, 0}` and
//! `pdf(±∞) = 0`, so the open outer cells of a cumulative-link model need no
//! special casing by callers.

use std::f64::consts::FRAC_1_SQRT_2;

/// `1 / sqrt(2π)`
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this argument `log_cdf` switches to the Mills-ratio expansion.
const LOG_CDF_TAIL: f64 = -30.0;

/// Standard normal CDF.
pub fn cdf(z: f64) -> f64 {
    if z == f64::INFINITY {
        return 1.0;
    }
    if z == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn pdf(z: f64) -> f64 {
    if z.is_infinite() {
        return 0.0;
    }
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// First derivative of the density, `-z N(z)`.
pub fn pdf_d1(z: f64) -> f64 {
    if z.is_infinite() {
        return 0.0;
    }
    -z * pdf(z)
}

/// Second derivative of the density, `(z² - 1) N(z)`.
pub fn pdf_d2(z: f64) -> f64 {
    if z.is_infinite() {
        return 0.0;
    }
    (z * z - 1.0) * pdf(z)
}

pub fn log_pdf(z: f64) -> f64 {
    -0.5 * z * z - HALF_LN_2PI
}

/// `ln Φ(z)`, accurate deep into the lower tail where `Φ` underflows.
pub fn log_cdf(z: f64) -> f64 {
    if z == f64::INFINITY {
        return 0.0;
    }
    if z == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if z > 5.0 {
        return (-cdf(-z)).ln_1p();
    }
    if z >= LOG_CDF_TAIL {
        return cdf(z).ln();
    }
    // Φ(z) = N(z)/(-z) · Σ_k (-1)^k (2k-1)!! / z^{2k}
    let inv_z2 = 1.0 / (z * z);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..=12 {
        term *= -((2 * k - 1) as f64) * inv_z2;
        sum += term;
    }
    log_pdf(z) - (-z).ln() + sum.ln()
}

/// `ln(Φ(b) - Φ(a))` for `a < b`, without cancellation in either tail.
pub fn log_cdf_diff(a: f64, b: f64) -> f64 {
    debug_assert!(a < b, "log_cdf_diff needs a < b (a={a}, b={b})");
    if a == f64::NEG_INFINITY {
        return log_cdf(b);
    }
    if b == f64::INFINITY {
        return log_cdf(-a);
    }
    if a >= 0.0 {
        // upper tail: Φ(b) - Φ(a) = Φ(-a) - Φ(-b)
        let hi = log_cdf(-a);
        let lo = log_cdf(-b);
        return hi + ln_one_minus_exp(lo - hi);
    }
    if b <= 0.0 {
        let hi = log_cdf(b);
        let lo = log_cdf(a);
        return hi + ln_one_minus_exp(lo - hi);
    }
    (-(cdf(a) + cdf(-b))).ln_1p()
}

/// `ln(1 - e^d)` for `d <= 0`.
fn ln_one_minus_exp(d: f64) -> f64 {
    if d > -std::f64::consts::LN_2 {
        (-d.exp_m1()).ln()
    } else {
        (-d.exp()).ln_1p()
    }
}

/// `ψ(z) = ∫_{-∞}^z Φ(u) du = z Φ(z) + N(z)`.
pub fn psi(z: f64) -> f64 {
    if z == f64::NEG_INFINITY {
        return 0.0;
    }
    if z == f64::INFINITY {
        return f64::INFINITY;
    }
    z * cdf(z) + pdf(z)
}
