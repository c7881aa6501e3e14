use serde::{Deserialize, Serialize};

use super::loss::{expected_score, log_loss_d1};
use super::thresholds::{NumericalScores, Thresholds};
use crate::error::{Error, Result};

/// Numerical scores whose implicit loss has the same slope as the log-score
/// at `z = 0` for every outcome (up to the common factor fixed by `r0`):
/// `r̃_y = r0 · ℓ̇_y(0) / ℓ̇_0(0)`.
pub fn matched_scores(c: &Thresholds, r0: f64) -> Result<NumericalScores> {
    if !c.is_symmetric(1e-12) {
        return Err(Error::AsymmetricThresholds);
    }
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::InvalidScores(format!("r0 = {r0} must be positive")));
    }
    let slope0 = log_loss_d1(0, 0.0, c);
    let levels = c.levels();
    let mut values: Vec<f64> = (0..levels)
        .map(|y| r0 * log_loss_d1(y, 0.0, c) / slope0)
        .collect();
    // exact antisymmetry; the two halves differ only by rounding
    for y in 0..levels / 2 {
        let v = 0.5 * (values[y] - values[levels - 1 - y]);
        values[y] = v;
        values[levels - 1 - y] = -v;
    }
    if levels % 2 == 1 {
        values[levels / 2] = 0.0;
    }
    values[0] = r0;
    values[levels - 1] = -r0;
    NumericalScores::new(values)
}

/// Sample grid for [`check_convexity`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for ZGrid {
    fn default() -> Self {
        Self {
            lo: -8.0,
            hi: 8.0,
            points: 4001,
        }
    }
}

impl ZGrid {
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.points.max(2);
        let step = (self.hi - self.lo) / (n - 1) as f64;
        (0..n).map(move |i| self.lo + step * i as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub convex: bool,
    /// First grid interval on which the expected score decreases.
    pub violation: Option<(f64, f64)>,
    pub min_slope_step: f64,
}

/// Checks the sufficient condition for convexity of every implicit loss:
/// the expected score `ř(z)` must be non-decreasing on the grid.
pub fn check_convexity(c: &Thresholds, r: &NumericalScores, grid: ZGrid) -> ConvexityReport {
    let mut prev: Option<(f64, f64)> = None;
    let mut violation = None;
    let mut min_step = f64::INFINITY;
    for z in grid.iter() {
        let v = expected_score(z, c, r);
        if let Some((pz, pv)) = prev {
            let step = v - pv;
            min_step = min_step.min(step);
            // tolerate rounding on flat tails
            if step < -1e-13 && violation.is_none() {
                violation = Some((pz, z));
            }
        }
        prev = Some((z, v));
    }
    ConvexityReport {
        convex: violation.is_none(),
        violation,
        min_slope_step: min_step,
    }
}
