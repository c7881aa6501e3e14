use serde::{Serialize, Serializer};

use super::record::Dataset;

/// Outcome counts split by venue. Neutral-venue counts are mirrored
/// (`y` and `L-1-y` share each match) and therefore half-integers; they are
/// kept exactly as numerators over 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeCounts {
    pub k_ntr_twice: Vec<u64>,
    pub k_hfa: Vec<u64>,
    pub t_ntr: u64,
    pub t_hfa: u64,
}

impl OutcomeCounts {
    pub fn k_ntr(&self, y: usize) -> f64 {
        self.k_ntr_twice[y] as f64 / 2.0
    }

    pub fn k_ntr_vec(&self) -> Vec<f64> {
        (0..self.k_ntr_twice.len()).map(|y| self.k_ntr(y)).collect()
    }

    pub fn total(&self) -> u64 {
        self.t_ntr + self.t_hfa
    }
}

impl Serialize for OutcomeCounts {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("OutcomeCounts", 4)?;
        st.serialize_field("k_ntr", &self.k_ntr_vec())?;
        st.serialize_field("k_hfa", &self.k_hfa)?;
        st.serialize_field("T_ntr", &self.t_ntr)?;
        st.serialize_field("T_hfa", &self.t_hfa)?;
        st.end()
    }
}

pub fn outcome_counts(d: &Dataset) -> OutcomeCounts {
    let levels = d.levels;
    let mut k_ntr_twice = vec![0u64; levels];
    let mut k_hfa = vec![0u64; levels];
    let (mut t_ntr, mut t_hfa) = (0, 0);
    for m in &d.matches {
        if m.home_venue {
            k_hfa[m.outcome] += 1;
            t_hfa += 1;
        } else {
            k_ntr_twice[m.outcome] += 1;
            k_ntr_twice[levels - 1 - m.outcome] += 1;
            t_ntr += 1;
        }
    }
    OutcomeCounts {
        k_ntr_twice,
        k_hfa,
        t_ntr,
        t_hfa,
    }
}
