use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default outcome count for volleyball: 3-0, 3-1, 3-2, 2-3, 1-3, 0-3.
pub const VOLLEYBALL_LEVELS: usize = 6;

/// Cut points `c_{-1} < c_0 < ... < c_{L-2} < c_{L-1}` of a cumulative-link model.
///
/// Only the `L - 1` interior values are stored; `c_{-1} = -∞` and
/// `c_{L-1} = +∞` are implied. Serializes as the list of interior values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Thresholds {
    interior: Vec<f64>,
}

impl Thresholds {
    pub fn new(interior: Vec<f64>) -> Result<Self> {
        if interior.is_empty() {
            return Err(Error::InvalidThresholds(
                "need at least one interior cut point (two outcomes)".into(),
            ));
        }
        if let Some(bad) = interior.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidThresholds(format!(
                "interior cut point {bad} is not finite"
            )));
        }
        if let Some(w) = interior.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidThresholds(format!(
                "cut points must be strictly increasing ({} >= {})",
                w[0], w[1]
            )));
        }
        Ok(Self { interior })
    }

    /// Thresholds used by the official FIVB ranking.
    pub fn fivb() -> Self {
        Self {
            interior: vec![-1.06, -0.394, 0.0, 0.394, 1.06],
        }
    }

    /// Builds symmetric cut points `c_l = -c_{L-2-l}` from the free half.
    ///
    /// `free` holds `c_0 .. c_{n-1}` with `n = floor((L-1)/2)`; for even `L`
    /// the middle point is pinned to zero.
    pub fn symmetric(levels: usize, free: &[f64]) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidThresholds(format!("{levels} outcome levels")));
        }
        let n = Self::symmetric_free_count(levels);
        if free.len() != n {
            return Err(Error::InvalidThresholds(format!(
                "{levels} symmetric levels need {n} free cut points, got {}",
                free.len()
            )));
        }
        let mut interior = vec![0.0; levels - 1];
        for (l, &c) in free.iter().enumerate() {
            interior[l] = c;
            interior[levels - 2 - l] = -c;
        }
        Self::new(interior)
    }

    pub fn symmetric_free_count(levels: usize) -> usize {
        (levels - 1) / 2
    }

    /// Number of outcome levels `L`.
    pub fn levels(&self) -> usize {
        self.interior.len() + 1
    }

    pub fn interior(&self) -> &[f64] {
        &self.interior
    }

    /// `c_k` for `k` in `-1..=L-1`, with the infinite end points.
    pub fn at(&self, k: isize) -> f64 {
        if k < 0 {
            f64::NEG_INFINITY
        } else if k as usize >= self.interior.len() {
            f64::INFINITY
        } else {
            self.interior[k as usize]
        }
    }

    /// Cell `(c_{y-1}, c_y)` of outcome `y`.
    pub fn cell(&self, y: usize) -> (f64, f64) {
        (self.at(y as isize - 1), self.at(y as isize))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.interior.len();
        (0..n).all(|l| (self.interior[l] + self.interior[n - 1 - l]).abs() <= tol)
    }

    /// The free half `c_0 .. c_{n-1}` of symmetric cut points.
    pub fn symmetric_free(&self) -> Vec<f64> {
        self.interior[..Self::symmetric_free_count(self.levels())].to_vec()
    }
}

impl TryFrom<Vec<f64>> for Thresholds {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Thresholds> for Vec<f64> {
    fn from(t: Thresholds) -> Self {
        t.interior
    }
}

/// Numerical score `r_y` attached to each outcome by the implicit FIVB loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct NumericalScores {
    values: Vec<f64>,
}

impl NumericalScores {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidScores(format!(
                "need at least two scores, got {}",
                values.len()
            )));
        }
        if values.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidScores("scores must be finite".into()));
        }
        Ok(Self { values })
    }

    /// `[2.0, 1.5, 1.0, -1.0, -1.5, -2.0]`
    pub fn fivb() -> Self {
        Self {
            values: vec![2.0, 1.5, 1.0, -1.0, -1.5, -2.0],
        }
    }

    /// Antisymmetric scores `r_y = -r_{L-1-y}` from `r_0` and the free
    /// entries `r_1 .. r_{n}` with `n = floor(L/2) - 1`.
    pub fn antisymmetric(levels: usize, r0: f64, free: &[f64]) -> Result<Self> {
        let n = Self::antisymmetric_free_count(levels);
        if free.len() != n {
            return Err(Error::InvalidScores(format!(
                "{levels} antisymmetric scores need {n} free values, got {}",
                free.len()
            )));
        }
        let mut values = vec![0.0; levels];
        values[0] = r0;
        values[levels - 1] = -r0;
        for (i, &r) in free.iter().enumerate() {
            values[i + 1] = r;
            values[levels - 2 - i] = -r;
        }
        Self::new(values)
    }

    pub fn antisymmetric_free_count(levels: usize) -> usize {
        (levels / 2).saturating_sub(1)
    }

    pub fn levels(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, y: usize) -> f64 {
        self.values[y]
    }

    pub fn is_antisymmetric(&self, tol: f64) -> bool {
        let n = self.values.len();
        (0..n).all(|y| (self.values[y] + self.values[n - 1 - y]).abs() <= tol)
    }

    /// `r_l - r_{l+1}` for `l = 0..L-2`.
    pub fn steps(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[0] - w[1]).collect()
    }
}

impl TryFrom<Vec<f64>> for NumericalScores {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<NumericalScores> for Vec<f64> {
    fn from(r: NumericalScores) -> Self {
        r.values
    }
}
