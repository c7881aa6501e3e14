//! Match CSV: `date,home,away,sets_home,sets_away,neutral,category[,increment_home]`.
//!
//! `neutral` is `1` for a neutral venue and `0` when the home team plays in
//! its own country. `category` is an index or a label of the category table.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::category::CategoryTable;
use super::record::{outcome_from_sets, sets_from_outcome, Dataset};
use crate::error::{Error, Result};
use crate::model::VOLLEYBALL_LEVELS;

const REQUIRED: [&str; 7] = [
    "date",
    "home",
    "away",
    "sets_home",
    "sets_away",
    "neutral",
    "category",
];
const INCREMENT: &str = "increment_home";

pub fn load_csv(path: impl AsRef<Path>, categories: &CategoryTable) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    read_csv(file, path, categories)
}

/// Reads matches from any reader; `origin` only labels error messages.
pub fn read_csv<R: Read>(reader: R, origin: &Path, categories: &CategoryTable) -> Result<Dataset> {
    let err = |line: u64, msg: String| Error::Csv {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| err(1, e.to_string()))?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let mut cols = [0usize; 7];
    for (slot, name) in cols.iter_mut().zip(REQUIRED) {
        *slot = column(name).ok_or_else(|| err(1, format!("missing column `{name}`")))?;
    }
    let inc_col = column(INCREMENT);

    let mut d = Dataset::empty(VOLLEYBALL_LEVELS, categories.len());
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            err(line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| row.get(i).unwrap_or("");
        let date = NaiveDate::parse_from_str(field(cols[0]), "%Y-%m-%d")
            .map_err(|e| err(line, format!("bad date `{}`: {e}", field(cols[0]))))?;
        let sets = |i: usize| {
            field(cols[i])
                .parse::<u32>()
                .map_err(|_| err(line, format!("bad set count `{}`", field(cols[i]))))
        };
        let outcome = outcome_from_sets(sets(3)?, sets(4)?).map_err(|e| err(line, e.to_string()))?;
        let home_venue = match field(cols[5]) {
            "1" => false,
            "0" => true,
            other => return Err(err(line, format!("neutral must be 0 or 1, got `{other}`"))),
        };
        let category = categories
            .parse(field(cols[6]))
            .map_err(|e| err(line, e.to_string()))?;
        let increment = match inc_col.map(field) {
            None | Some("") => None,
            Some(s) => Some(
                s.parse::<f64>()
                    .map_err(|_| err(line, format!("bad increment `{s}`")))?,
            ),
        };
        d.push(
            date,
            field(cols[1]),
            field(cols[2]),
            outcome,
            home_venue,
            category,
            increment,
        )
        .map_err(|e| err(line, e.to_string()))?;
    }
    d.sort_chronologically();
    Ok(d)
}

/// Writes the canonical form: category as index, increment column only when
/// some match carries one.
pub fn write_csv<W: Write>(d: &Dataset, writer: W) -> Result<()> {
    let with_inc = d.matches.iter().any(|m| m.increment.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = REQUIRED.to_vec();
    if with_inc {
        header.push(INCREMENT);
    }
    w.write_record(&header).map_err(csv_io)?;
    for m in &d.matches {
        let (sh, sa) = sets_from_outcome(m.outcome)
            .ok_or_else(|| Error::Unsupported(format!("outcome {} has no set score", m.outcome)))?;
        let mut rec = vec![
            m.date.format("%Y-%m-%d").to_string(),
            d.teams[m.home].clone(),
            d.teams[m.away].clone(),
            sh.to_string(),
            sa.to_string(),
            if m.home_venue { "0" } else { "1" }.to_string(),
            m.category.to_string(),
        ];
        if with_inc {
            rec.push(m.increment.map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(d, std::io::BufWriter::new(file))
}

/// Initial skills CSV: `team,skill`.
pub fn load_skills(path: impl AsRef<Path>) -> Result<HashMap<String, f64>> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            line: 0,
            msg: e.to_string(),
        })?;
    let mut out = HashMap::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Csv {
            path: path.to_path_buf(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let (team, skill) = (row.get(0).unwrap_or(""), row.get(1).unwrap_or(""));
        let skill = skill.parse::<f64>().map_err(|_| Error::Csv {
            path: path.to_path_buf(),
            line,
            msg: format!("bad skill `{skill}`"),
        })?;
        out.insert(team.to_string(), skill);
    }
    Ok(out)
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
