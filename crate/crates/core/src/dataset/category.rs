use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::FIVB_WEIGHTS;

/// Match categories ("prestige") and the label each is written with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryTable {
    pub labels: Vec<String>,
}

impl CategoryTable {
    /// The seven FIVB categories, `v = 0..6`.
    pub fn fivb() -> Self {
        Self {
            labels: [
                "continental",
                "confederation_qualifying",
                "challenger_cup",
                "olympic_qualifying",
                "nations_league",
                "world_championship",
                "olympics",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        }
    }

    pub fn fivb_weights() -> Vec<f64> {
        FIVB_WEIGHTS.to_vec()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Accepts either the numeric index or the label.
    pub fn parse(&self, raw: &str) -> Result<usize> {
        let raw = raw.trim();
        if let Ok(v) = raw.parse::<usize>() {
            if v < self.labels.len() {
                return Ok(v);
            }
            return Err(Error::UnknownCategory(raw.to_string()));
        }
        self.labels
            .iter()
            .position(|l| l.eq_ignore_ascii_case(raw))
            .ok_or_else(|| Error::UnknownCategory(raw.to_string()))
    }
}

impl Default for CategoryTable {
    fn default() -> Self {
        Self::fivb()
    }
}
