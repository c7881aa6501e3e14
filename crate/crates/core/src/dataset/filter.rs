use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::record::Dataset;
use crate::error::{Error, Result};

/// A forfeited match, identified by date and team ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForfeitKey {
    pub date: NaiveDate,
    pub home: String,
    pub away: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterRules {
    /// Drop matches whose published increment is 0 or ±0.01.
    pub small_increment: bool,
    pub forfeits: Vec<ForfeitKey>,
}

/// One excluded match; `t` is its position before filtering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub t: usize,
    pub rule: String,
    pub detail: String,
}

fn is_small_increment(v: f64) -> bool {
    let a = v.abs();
    a == 0.0 || (a - 0.01).abs() < 1e-9
}

pub fn filter_matches(d: &Dataset, rules: &FilterRules) -> Result<(Dataset, Vec<Exclusion>)> {
    if rules.small_increment && d.matches.iter().any(|m| m.increment.is_none()) {
        return Err(Error::MissingIncrementColumn("small_increment"));
    }
    let mut report = Vec::new();
    for m in &d.matches {
        let (home, away) = (&d.teams[m.home], &d.teams[m.away]);
        if rules
            .forfeits
            .iter()
            .any(|f| f.date == m.date && &f.home == home && &f.away == away)
        {
            report.push(Exclusion {
                t: m.t,
                rule: "forfeit".into(),
                detail: format!("{} {home}-{away}", m.date),
            });
            continue;
        }
        if rules.small_increment {
            let inc = m.increment.unwrap_or_default();
            if is_small_increment(inc) {
                report.push(Exclusion {
                    t: m.t,
                    rule: "small_increment".into(),
                    detail: format!("{} {home}-{away} increment {inc}", m.date),
                });
            }
        }
    }
    let dropped: std::collections::HashSet<usize> = report.iter().map(|e| e.t).collect();
    let mut out = d.clone();
    out.retain(|m| !dropped.contains(&m.t));
    Ok((out, report))
}

/// Writes the report as JSON lines `{t, rule, detail}`.
pub fn write_exclusions<W: Write>(report: &[Exclusion], mut w: W) -> Result<()> {
    for e in report {
        serde_json::to_writer(&mut w, e)?;
        writeln!(w)?;
    }
    Ok(())
}
