use std::collections::HashMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One match. `home`/`away` are dense team indices into [`Dataset::teams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    /// 1-based chronological position.
    pub t: usize,
    pub date: NaiveDate,
    pub home: usize,
    pub away: usize,
    /// Ordinal outcome, `0` = best for the home team.
    pub outcome: usize,
    /// `true` when played in the home team's country (`h = 1`).
    pub home_venue: bool,
    pub category: usize,
    /// Published rating increment of the home team, when known.
    pub increment: Option<f64>,
}

impl MatchRecord {
    /// `h_t` as a number.
    pub fn venue(&self) -> f64 {
        if self.home_venue {
            1.0
        } else {
            0.0
        }
    }

    pub fn schedule(&self) -> Schedule {
        Schedule {
            plus: self.home,
            minus: self.away,
        }
    }
}

/// Sparse scheduling vector: `+1` at the home team, `-1` at the away team.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub plus: usize,
    pub minus: usize,
}

impl Schedule {
    /// `xᵀθ = θ_home - θ_away`.
    pub fn dot(&self, theta: &[f64]) -> f64 {
        theta[self.plus] - theta[self.minus]
    }

    pub fn dense(&self, teams: usize) -> Vec<f64> {
        let mut x = vec![0.0; teams];
        x[self.plus] = 1.0;
        x[self.minus] = -1.0;
        x
    }
}

/// Dense signed indicator of a match over `teams` teams.
pub fn schedule_vector(rec: &MatchRecord, teams: usize) -> Vec<f64> {
    rec.schedule().dense(teams)
}

/// Maps a set score to the outcome index: 3-0 → 0, 3-1 → 1, 3-2 → 2,
/// 2-3 → 3, 1-3 → 4, 0-3 → 5.
pub fn outcome_from_sets(home: u32, away: u32) -> Result<usize> {
    match (home, away) {
        (3, 0) => Ok(0),
        (3, 1) => Ok(1),
        (3, 2) => Ok(2),
        (2, 3) => Ok(3),
        (1, 3) => Ok(4),
        (0, 3) => Ok(5),
        _ => Err(Error::IllegalSetScore { home, away }),
    }
}

pub fn sets_from_outcome(y: usize) -> Option<(u32, u32)> {
    const SETS: [(u32, u32); 6] = [(3, 0), (3, 1), (3, 2), (2, 3), (1, 3), (0, 3)];
    SETS.get(y).copied()
}

/// Ordered match list with its team index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub matches: Vec<MatchRecord>,
    pub teams: Vec<String>,
    pub levels: usize,
    pub categories: usize,
    /// Warm-start skills aligned with `teams`, on the display scale.
    pub initial_skills: Option<Vec<f64>>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Dataset {
    pub fn empty(levels: usize, categories: usize) -> Self {
        Self {
            matches: Vec::new(),
            teams: Vec::new(),
            levels,
            categories,
            initial_skills: None,
            index: HashMap::new(),
        }
    }

    /// Team count `M`.
    pub fn team_count(&self) -> usize {
        self.teams.len()
    }

    /// Match count `T`.
    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    pub fn team_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Returns the dense index, adding the team if unseen.
    pub fn intern_team(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.teams.len();
        self.teams.push(id.to_string());
        self.index.insert(id.to_string(), i);
        i
    }

    /// Appends a match after the current last one.
    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        date: NaiveDate,
        home: &str,
        away: &str,
        outcome: usize,
        home_venue: bool,
        category: usize,
        increment: Option<f64>,
    ) -> Result<()> {
        if home == away {
            return Err(Error::InvalidParams(format!("team `{home}` plays itself")));
        }
        if outcome >= self.levels {
            return Err(Error::OutcomeOutOfRange {
                y: outcome,
                levels: self.levels,
            });
        }
        if category >= self.categories {
            return Err(Error::UnknownCategory(category.to_string()));
        }
        let home = self.intern_team(home);
        let away = self.intern_team(away);
        let t = self.matches.len() + 1;
        self.matches.push(MatchRecord {
            t,
            date,
            home,
            away,
            outcome,
            home_venue,
            category,
            increment,
        });
        Ok(())
    }

    /// Stable chronological sort; renumbers `t`.
    pub fn sort_chronologically(&mut self) {
        self.matches.sort_by_key(|m| m.date);
        self.renumber();
    }

    fn renumber(&mut self) {
        for (i, m) in self.matches.iter_mut().enumerate() {
            m.t = i + 1;
        }
    }

    /// Keeps the matches for which `keep` returns true and drops teams that
    /// no longer play. Match order is preserved and `t` renumbered.
    pub fn retain(&mut self, mut keep: impl FnMut(&MatchRecord) -> bool) {
        self.matches.retain(|m| keep(m));
        let mut used = vec![false; self.teams.len()];
        for m in &self.matches {
            used[m.home] = true;
            used[m.away] = true;
        }
        let mut remap = vec![usize::MAX; self.teams.len()];
        let mut teams = Vec::new();
        let mut skills = self.initial_skills.as_ref().map(|_| Vec::new());
        for (old, name) in self.teams.iter().enumerate() {
            if used[old] {
                remap[old] = teams.len();
                teams.push(name.clone());
                if let (Some(new), Some(init)) = (skills.as_mut(), self.initial_skills.as_ref()) {
                    new.push(init[old]);
                }
            }
        }
        for m in &mut self.matches {
            m.home = remap[m.home];
            m.away = remap[m.away];
        }
        self.index = teams.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        self.teams = teams;
        self.initial_skills = skills;
        self.renumber();
    }

    /// Attaches warm-start skills by team id; every team must be covered.
    pub fn set_initial_skills(&mut self, skills: &HashMap<String, f64>) -> Result<()> {
        let v = self
            .teams
            .iter()
            .map(|t| {
                skills
                    .get(t)
                    .copied()
                    .ok_or_else(|| Error::UnknownTeam(t.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        self.initial_skills = Some(v);
        Ok(())
    }

    /// Rebuilds the id lookup, e.g. after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .teams
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, n)| (n, i))
            .collect();
    }

    pub fn home_count(&self) -> usize {
        self.matches.iter().filter(|m| m.home_venue).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2023, 1, d).unwrap()
    }

    #[test]
    fn set_score_mapping() {
        let pairs = [(3, 0), (3, 1), (3, 2), (2, 3), (1, 3), (0, 3)];
        for (y, (h, a)) in pairs.iter().enumerate() {
            assert_eq!(outcome_from_sets(*h, *a).unwrap(), y);
            assert_eq!(sets_from_outcome(y), Some((*h, *a)));
        }
        assert!(matches!(
            outcome_from_sets(2, 2),
            Err(Error::IllegalSetScore { home: 2, away: 2 })
        ));
        assert!(outcome_from_sets(3, 3).is_err());
    }

    #[test]
    fn schedule_vector_and_dot() {
        let mut d = Dataset::empty(6, 7);
        d.push(day(1), "A", "B", 0, false, 0, None).unwrap();
        d.push(day(2), "C", "A", 0, false, 0, None).unwrap();
        let m = MatchRecord {
            home: 0,
            away: 2,
            ..d.matches[0].clone()
        };
        assert_eq!(schedule_vector(&m, 3), vec![1.0, 0.0, -1.0]);
        assert_eq!(m.schedule().dot(&[100.0, 0.0, 75.0]), 25.0);
    }

    #[test]
    fn rejects_self_play_and_bad_outcome() {
        let mut d = Dataset::empty(6, 7);
        assert!(d.push(day(1), "A", "A", 0, false, 0, None).is_err());
        assert!(d.push(day(1), "A", "B", 6, false, 0, None).is_err());
        assert!(d.push(day(1), "A", "B", 0, false, 7, None).is_err());
    }

    #[test]
    fn retain_prunes_teams_and_renumbers() {
        let mut d = Dataset::empty(6, 7);
        d.push(day(1), "A", "B", 0, false, 0, None).unwrap();
        d.push(day(2), "C", "D", 1, true, 0, None).unwrap();
        d.push(day(3), "A", "C", 2, false, 0, None).unwrap();
        d.retain(|m| m.t != 2);
        assert_eq!(d.len(), 2);
        assert_eq!(d.teams, vec!["A", "B", "C"]);
        assert_eq!(d.matches[1].t, 2);
        assert_eq!(d.matches[1].away, d.team_index("C").unwrap());
    }
}
