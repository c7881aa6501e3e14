//! Match records, CSV ingestion, filtering, outcome statistics and
//! synthetic data.

mod category;
mod counts;
mod csv_io;
mod filter;
mod record;
mod synth;

pub use category::CategoryTable;
pub use counts::{outcome_counts, OutcomeCounts};
pub use csv_io::{load_csv, load_skills, read_csv, save_csv, write_csv};
pub use filter::{filter_matches, write_exclusions, Exclusion, FilterRules, ForfeitKey};
pub use record::{outcome_from_sets, schedule_vector, sets_from_outcome, Dataset, MatchRecord, Schedule};
pub use synth::{sample_outcome, synthesize, GroundTruth, SynthOptions, FIVB_HOME_SHARE};
