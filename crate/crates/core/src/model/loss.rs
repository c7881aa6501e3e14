//! Cumulative-link probit probabilities and the two per-match losses.
//!
//! Outcome `y` has probability `P_y(z) = Φ(z + c_y) - Φ(z + c_{y-1})`.
//! The log-score is `-ln P_y(z)`; the implicit FIVB loss is the antiderivative
//! of `ř(z) - r_y`, where `ř` is the model-expected numerical score.

use std::sync::OnceLock;

use super::params::{LossKind, ModelParams};
use super::thresholds::{NumericalScores, Thresholds};
use crate::normal;

/// Outcome probabilities `P_0(z) .. P_{L-1}(z)`.
pub fn outcome_probs(z: f64, c: &Thresholds) -> Vec<f64> {
    (0..c.levels())
        .map(|y| {
            let (lo, hi) = c.cell(y);
            // differences of upper-tail masses are exact when both bounds sit above 0
            if z + lo >= 0.0 {
                normal::cdf(-(z + lo)) - normal::cdf(-(z + hi))
            } else {
                normal::cdf(z + hi) - normal::cdf(z + lo)
            }
        })
        .collect()
}

/// Ratios of the derivatives of `P(a, b) = Φ(b) - Φ(a)` to `P` itself,
/// split by argument (`[a, b]`). `P` is separable, so mixed partials vanish.
struct CellRatios {
    p1: [f64; 2],
    p2: [f64; 2],
    p3: [f64; 2],
}

impl CellRatios {
    fn new(a: f64, b: f64) -> Self {
        let log_p = normal::log_cdf_diff(a, b);
        let ratio = |x: f64| {
            if x.is_infinite() {
                0.0
            } else {
                (normal::log_pdf(x) - log_p).exp()
            }
        };
        let (na, nb) = (ratio(a), ratio(b));
        let poly = |x: f64, n: f64, f: fn(f64) -> f64| if n == 0.0 { 0.0 } else { f(x) * n };
        Self {
            p1: [-na, nb],
            p2: [-poly(a, na, |x| -x), poly(b, nb, |x| -x)],
            p3: [-poly(a, na, |x| x * x - 1.0), poly(b, nb, |x| x * x - 1.0)],
        }
    }

    fn first(&self, u: [f64; 2]) -> f64 {
        u[0] * self.p1[0] + u[1] * self.p1[1]
    }

    fn second(&self, u: [f64; 2], v: [f64; 2]) -> f64 {
        u[0] * v[0] * self.p2[0] + u[1] * v[1] * self.p2[1]
    }

    fn third(&self, u: [f64; 2], v: [f64; 2], w: [f64; 2]) -> f64 {
        u[0] * v[0] * w[0] * self.p3[0] + u[1] * v[1] * w[1] * self.p3[1]
    }

    /// Directional derivatives of `-ln P`.
    fn neg_log_d1(&self, u: [f64; 2]) -> f64 {
        -self.first(u)
    }

    fn neg_log_d2(&self, u: [f64; 2], v: [f64; 2]) -> f64 {
        -self.second(u, v) + self.first(u) * self.first(v)
    }

    fn neg_log_d3(&self, u: [f64; 2], v: [f64; 2], w: [f64; 2]) -> f64 {
        let (pu, pv, pw) = (self.first(u), self.first(v), self.first(w));
        -self.third(u, v, w) + self.second(u, v) * pw + self.second(u, w) * pv + self.second(v, w) * pu
            - 2.0 * pu * pv * pw
    }
}

const ALONG_Z: [f64; 2] = [1.0, 1.0];
const LOWER: [f64; 2] = [1.0, 0.0];
const UPPER: [f64; 2] = [0.0, 1.0];

fn log_cell(y: usize, z: f64, c: &Thresholds) -> CellRatios {
    assert!(y < c.levels(), "outcome {y} out of range");
    let (lo, hi) = c.cell(y);
    CellRatios::new(z + lo, z + hi)
}

const GL_POINTS: usize = 20;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre() -> &'static ([f64; GL_POINTS], [f64; GL_POINTS]) {
    static RULE: OnceLock<([f64; GL_POINTS], [f64; GL_POINTS])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_POINTS;
        let (mut x, mut w) = ([0.0; GL_POINTS], [0.0; GL_POINTS]);
        for i in 0..n {
            let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, t);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
                let step = p1 / dp;
                t -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            x[i] = t;
            w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
        }
        (x, w)
    })
}

/// Cells with `h (|m| + h) <=` this use [`short_cell`].
const SHORT_CELL: f64 = 2.0;

/// `z`-derivatives of `-ln(Φ(b) - Φ(a))` written as moments of the normal
/// restricted to `[a, b]`: `E X`, `1 - Var X` and the third central moment.
/// On short cells the edge-ratio form subtracts nearly equal large terms;
/// this one does not.
fn short_cell(a: f64, b: f64) -> Option<[f64; 3]> {
    if !(a.is_finite() && b.is_finite()) {
        return None;
    }
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    if h * (m.abs() + h) > SHORT_CELL {
        return None;
    }
    let (nodes, weights) = gauss_legendre();
    // density of t = X - m relative to its value at t = 0
    let mut e = [0.0; GL_POINTS];
    let (mut s0, mut s1) = (0.0, 0.0);
    for i in 0..GL_POINTS {
        let t = h * nodes[i];
        e[i] = weights[i] * (-m * t - 0.5 * t * t).exp();
        s0 += e[i];
        s1 += e[i] * t;
    }
    let mean = s1 / s0;
    let (mut s2, mut s3) = (0.0, 0.0);
    for i in 0..GL_POINTS {
        let d = h * nodes[i] - mean;
        s2 += e[i] * d * d;
        s3 += e[i] * d * d * d;
    }
    Some([m + mean, 1.0 - s2 / s0, s3 / s0])
}

fn log_derivs(y: usize, z: f64, c: &Thresholds) -> [f64; 3] {
    assert!(y < c.levels(), "outcome {y} out of range");
    let (lo, hi) = c.cell(y);
    short_cell(z + lo, z + hi).unwrap_or_else(|| {
        let cell = CellRatios::new(z + lo, z + hi);
        [
            cell.neg_log_d1(ALONG_Z),
            cell.neg_log_d2(ALONG_Z, ALONG_Z),
            cell.neg_log_d3(ALONG_Z, ALONG_Z, ALONG_Z),
        ]
    })
}

/// Negated log-score `-ln P_y(z)`, stable far into both tails.
pub fn log_loss(y: usize, z: f64, c: &Thresholds) -> f64 {
    assert!(y < c.levels(), "outcome {y} out of range");
    let (lo, hi) = c.cell(y);
    -normal::log_cdf_diff(z + lo, z + hi)
}

pub fn log_loss_d1(y: usize, z: f64, c: &Thresholds) -> f64 {
    log_derivs(y, z, c)[0]
}

pub fn log_loss_d2(y: usize, z: f64, c: &Thresholds) -> f64 {
    log_derivs(y, z, c)[1]
}

pub fn log_loss_d3(y: usize, z: f64, c: &Thresholds) -> f64 {
    log_derivs(y, z, c)[2]
}

/// Expected numerical score `ř(z) = Σ_y r_y P_y(z)`, evaluated in the
/// telescoped form `Σ_{l<L-1} (r_l - r_{l+1}) Φ(z + c_l) + r_{L-1}`.
pub fn expected_score(z: f64, c: &Thresholds, r: &NumericalScores) -> f64 {
    debug_assert_eq!(c.levels(), r.levels());
    let tail = r.get(r.levels() - 1);
    r.steps()
        .iter()
        .zip(c.interior())
        .map(|(dr, &cl)| dr * normal::cdf(z + cl))
        .sum::<f64>()
        + tail
}

/// Slope of the expected score, `Σ_l (r_l - r_{l+1}) N(z + c_l)`.
pub fn expected_score_d1(z: f64, c: &Thresholds, r: &NumericalScores) -> f64 {
    r.steps()
        .iter()
        .zip(c.interior())
        .map(|(dr, &cl)| dr * normal::pdf(z + cl))
        .sum()
}

/// `ψ(z) = z Φ(z) + N(z)`.
pub fn psi(z: f64) -> f64 {
    normal::psi(z)
}

/// Implicit FIVB loss `Σ_l (r_l - r_{l+1}) ψ(z + c_l) + (r_{L-1} - r_y) z`.
/// The integration constant is zero.
pub fn implicit_loss(y: usize, z: f64, c: &Thresholds, r: &NumericalScores) -> f64 {
    assert!(y < r.levels(), "outcome {y} out of range");
    let l = r.levels();
    r.steps()
        .iter()
        .zip(c.interior())
        .map(|(dr, &cl)| dr * normal::psi(z + cl))
        .sum::<f64>()
        + (r.get(l - 1) - r.get(y)) * z
}

/// `ř(z) - r_y`: the gradient the FIVB update applies.
pub fn implicit_loss_d1(y: usize, z: f64, c: &Thresholds, r: &NumericalScores) -> f64 {
    expected_score(z, c, r) - r.get(y)
}

/// Independent of `y`.
pub fn implicit_loss_d2(_y: usize, z: f64, c: &Thresholds, r: &NumericalScores) -> f64 {
    expected_score_d1(z, c, r)
}

pub fn implicit_loss_d3(_y: usize, z: f64, c: &Thresholds, r: &NumericalScores) -> f64 {
    r.steps()
        .iter()
        .zip(c.interior())
        .map(|(dr, &cl)| dr * normal::pdf_d1(z + cl))
        .sum()
}

/// Value and the first three `z`-derivatives of a loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossDerivs {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

pub fn loss_derivs(kind: LossKind, y: usize, z: f64, p: &ModelParams) -> LossDerivs {
    let c = &p.thresholds;
    match kind {
        LossKind::LogScore => {
            let [d1, d2, d3] = log_derivs(y, z, c);
            LossDerivs {
                value: log_loss(y, z, c),
                d1,
                d2,
                d3,
            }
        }
        LossKind::ImplicitFivb => {
            let r = &p.scores;
            LossDerivs {
                value: implicit_loss(y, z, c, r),
                d1: implicit_loss_d1(y, z, c, r),
                d2: implicit_loss_d2(y, z, c, r),
                d3: implicit_loss_d3(y, z, c, r),
            }
        }
    }
}

/// Partial derivatives of `(ℓ, ℓ̇, ℓ̈)` with respect to one parameter at fixed `z`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Sensitivity {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Sensitivities to each interior threshold `c_0 .. c_{L-2}` (unconstrained).
pub fn threshold_sensitivity(kind: LossKind, y: usize, z: f64, p: &ModelParams) -> Vec<Sensitivity> {
    let c = &p.thresholds;
    let n = c.levels() - 1;
    let mut out = vec![Sensitivity::default(); n];
    match kind {
        LossKind::LogScore => {
            let cell = log_cell(y, z, c);
            let mut fill = |k: usize, dir: [f64; 2]| {
                out[k] = Sensitivity {
                    value: cell.neg_log_d1(dir),
                    d1: cell.neg_log_d2(ALONG_Z, dir),
                    d2: cell.neg_log_d3(ALONG_Z, ALONG_Z, dir),
                };
            };
            if y < n {
                fill(y, UPPER);
            }
            if y >= 1 {
                fill(y - 1, LOWER);
            }
        }
        LossKind::ImplicitFivb => {
            for (k, (dr, &ck)) in p.scores.steps().iter().zip(c.interior()).enumerate() {
                let u = z + ck;
                out[k] = Sensitivity {
                    value: dr * normal::cdf(u),
                    d1: dr * normal::pdf(u),
                    d2: dr * normal::pdf_d1(u),
                };
            }
        }
    }
    out
}

/// Sensitivities to each score `r_0 .. r_{L-1}` (unconstrained). Zero for
/// the log-score, which does not depend on `r`.
pub fn score_sensitivity(kind: LossKind, y: usize, z: f64, p: &ModelParams) -> Vec<Sensitivity> {
    let levels = p.levels();
    let mut out = vec![Sensitivity::default(); levels];
    if kind == LossKind::LogScore {
        return out;
    }
    let c = &p.thresholds;
    for (k, s) in out.iter_mut().enumerate() {
        let hi = c.at(k as isize);
        let lo = c.at(k as isize - 1);
        let own = if k == y { 1.0 } else { 0.0 };
        let last = if k == levels - 1 { 1.0 } else { 0.0 };
        // ∂/∂r_k of Σ_l (r_l - r_{l+1}) f(z + c_l) is f(z + c_k) - f(z + c_{k-1})
        let psi_at = |x: f64| if x.is_infinite() { 0.0 } else { normal::psi(z + x) };
        *s = Sensitivity {
            value: psi_at(hi) - psi_at(lo) + (last - own) * z,
            d1: normal::cdf(z + hi) - normal::cdf(z + lo) - own,
            d2: normal::pdf(z + hi) - normal::pdf(z + lo),
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fivb() -> (Thresholds, NumericalScores) {
        (Thresholds::fivb(), NumericalScores::fivb())
    }

    #[test]
    fn probabilities_at_zero() {
        let (c, _) = fivb();
        let p = outcome_probs(0.0, &c);
        // mpmath differences of ncdf at the FIVB thresholds
        let want = [
            0.144_572_299_664,
            0.202_218_219_954,
            0.153_209_480_383,
            0.153_209_480_383,
            0.202_218_219_954,
            0.144_572_299_664,
        ];
        for (got, want) in p.iter().zip(want) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(outcome_probs(30.0, &c)[0] >= 1.0 - 1e-12);
    }

    #[test]
    fn log_loss_values() {
        let (c, _) = fivb();
        assert!((log_loss(0, 0.0, &c) - 1.933_975_552_864_94).abs() < 1e-12);
        assert!((log_loss(2, 0.0, &c) - log_loss(3, 0.0, &c)).abs() < 1e-14);
        let far = log_loss(0, -25.0, &c);
        assert!(far.is_finite() && far > 0.0);
        assert!(log_loss(5, 30.0, &c).is_finite());
        assert!(log_loss(0, 30.0, &c) >= 0.0);
    }

    #[test]
    fn log_loss_first_derivative_at_zero() {
        let (c, _) = fivb();
        // -N(-1.06)/Φ(-1.06), mpmath
        assert!((log_loss_d1(0, 0.0, &c) + 1.573_397_068_360_88).abs() < 1e-12);
        for z in [-1.3, 0.0, 0.8] {
            assert!((log_loss_d1(5, z, &c) + log_loss_d1(0, -z, &c)).abs() < 1e-13);
        }
    }

    #[test]
    fn expected_score_values() {
        let (c, r) = fivb();
        assert!(expected_score(0.0, &c, &r).abs() < 1e-15);
        assert!((expected_score(30.0, &c, &r) - 2.0).abs() < 1e-9);
        // Σ_y r_y P_y(z) against the telescoped form
        let z = 0.5;
        let direct: f64 = outcome_probs(z, &c)
            .iter()
            .zip(r.values())
            .map(|(p, r)| p * r)
            .sum();
        assert!((direct - expected_score(z, &c, &r)).abs() < 1e-12);
        // mpmath
        assert!((expected_score(z, &c, &r) - 0.675_378_750_838_926).abs() < 1e-13);
        assert!((expected_score(-0.7, &c, &r) + expected_score(0.7, &c, &r)).abs() < 1e-14);
    }

    #[test]
    fn implicit_loss_values() {
        let (c, r) = fivb();
        assert_eq!(implicit_loss_d1(0, 0.0, &c, &r), -2.0);
        // Σ (r_l - r_{l+1}) N(c_l), mpmath: 1.39450259863621
        assert!((implicit_loss_d2(0, 0.0, &c, &r) - 1.394_502_598_636_21).abs() < 1e-12);
        // z = 0 removes the y-dependent linear term
        let at_zero = 1.831_620_496_263_18;
        for y in 0..6 {
            assert!((implicit_loss(y, 0.0, &c, &r) - at_zero).abs() < 1e-12);
        }
    }

    #[test]
    fn narrow_cell_derivatives() {
        // mpmath, 50 digits
        let c = Thresholds::new(vec![
            -0.92602479206281,
            -0.9248698420051324,
            0.03293402877386864,
            0.4095089961347185,
            1.1894304501197759,
        ])
        .unwrap();
        let z = -4.7279;
        assert!((log_loss_d1(1, z, &c) + 5.653_346_688_613_24).abs() < 1e-12);
        assert!((log_loss_d2(1, z, &c) - 0.999_999_888_841_105_6).abs() < 1e-14);
        assert!((log_loss_d3(1, z, &c) + 8.382_541_579_474_98e-14).abs() < 1e-15);
        let c = Thresholds::fivb();
        assert!((log_loss_d1(2, 0.3, &c) - 0.101_674_475_693_624_69).abs() < 1e-14);
        assert!((log_loss_d2(2, 0.3, &c) - 0.987_131_531_645_278).abs() < 1e-14);
        assert!((log_loss_d3(2, 0.3, &c) - 2.037_763_312_984_198e-5).abs() < 1e-14);
    }

    #[test]
    fn gradient_identity_is_exact() {
        let (c, r) = fivb();
        for y in 0..6 {
            for z in [-3.0, -0.1, 0.0, 2.2] {
                assert_eq!(
                    implicit_loss_d1(y, z, &c, &r) - (expected_score(z, &c, &r) - r.get(y)),
                    0.0
                );
            }
        }
    }

    #[test]
    fn sensitivities_match_finite_differences() {
        let h = 1e-6;
        for kind in [LossKind::LogScore, LossKind::ImplicitFivb] {
            let p = ModelParams::fivb();
            for y in 0..6 {
                let z = 0.37 - 0.2 * y as f64;
                let sens = threshold_sensitivity(kind, y, z, &p);
                for k in 0..5 {
                    let shifted = |d: f64| {
                        let mut q = p.clone();
                        let mut v = q.thresholds.interior().to_vec();
                        v[k] += d;
                        q.thresholds = Thresholds::new(v).unwrap();
                        loss_derivs(kind, y, z, &q)
                    };
                    let (up, dn) = (shifted(h), shifted(-h));
                    let fd = [
                        (up.value - dn.value) / (2.0 * h),
                        (up.d1 - dn.d1) / (2.0 * h),
                        (up.d2 - dn.d2) / (2.0 * h),
                    ];
                    let got = [sens[k].value, sens[k].d1, sens[k].d2];
                    for (g, f) in got.iter().zip(fd) {
                        assert!(
                            (g - f).abs() < 1e-6 * (1.0 + f.abs()),
                            "{kind} y={y} k={k}: {g} vs {f}"
                        );
                    }
                }
                let sens = score_sensitivity(kind, y, z, &p);
                for k in 0..6 {
                    let shifted = |d: f64| {
                        let mut q = p.clone();
                        let mut v = q.scores.values().to_vec();
                        v[k] += d;
                        q.scores = NumericalScores::new(v).unwrap();
                        loss_derivs(kind, y, z, &q)
                    };
                    let (up, dn) = (shifted(h), shifted(-h));
                    let fd = [
                        (up.value - dn.value) / (2.0 * h),
                        (up.d1 - dn.d1) / (2.0 * h),
                        (up.d2 - dn.d2) / (2.0 * h),
                    ];
                    let got = [sens[k].value, sens[k].d1, sens[k].d2];
                    for (g, f) in got.iter().zip(fd) {
                        assert!(
                            (g - f).abs() < 1e-6 * (1.0 + f.abs()),
                            "{kind} y={y} r_{k}: {g} vs {f}"
                        );
                    }
                }
            }
        }
    }
}
