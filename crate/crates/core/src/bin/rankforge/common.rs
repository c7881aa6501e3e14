use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rankforge::dataset::{filter_matches, load_csv, write_exclusions, CategoryTable, Dataset, FilterRules};
use rankforge::{LossKind, ModelParams, NumericalScores, Thresholds};
use serde::Serialize;
use serde_json::Value;

pub type CliResult<T> = std::result::Result<T, Box<dyn std::error::Error>>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LossArg {
    Log,
    Fivb,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Log => LossKind::LogScore,
            LossArg::Fivb => LossKind::ImplicitFivb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightsArg {
    Fivb,
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoresArg {
    Fivb,
    Matched,
    File,
}

/// Model parameters that any command may override on top of `--config`.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct ParamArgs {
    /// Ridge penalty on the latent skills.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Home advantage.
    #[arg(long, allow_hyphen_values = true)]
    pub eta: Option<f64>,
    /// Interior cut points, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub thresholds: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub weights: Option<WeightsArg>,
    #[arg(long, value_enum)]
    pub scores: Option<ScoresArg>,
    /// JSON list of scores, used with `--scores file`.
    #[arg(long)]
    pub scores_file: Option<PathBuf>,
    /// Display scale of the skills.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Step size of the online update.
    #[arg(long)]
    pub mu: Option<f64>,
}

/// Reads `--config`: either a parameter object, or any output of this tool
/// (the parameters are then taken from its embedded config). Missing fields
/// keep their FIVB values.
fn config_params(path: Option<&Path>) -> CliResult<ModelParams> {
    let mut base = serde_json::to_value(ModelParams::fivb())?;
    let Some(path) = path else {
        return Ok(serde_json::from_value(base)?);
    };
    let raw: Value = serde_json::from_reader(File::open(path)?)?;
    let given = raw
        .pointer("/config/params")
        .or_else(|| raw.get("params"))
        .unwrap_or(&raw);
    let Value::Object(fields) = given else {
        return Err(format!("{}: config must be a JSON object", path.display()).into());
    };
    let target = base.as_object_mut().expect("params serialize as an object");
    for (k, v) in fields {
        if !target.contains_key(k) {
            return Err(format!("{}: unknown parameter `{k}`", path.display()).into());
        }
        target.insert(k.clone(), v.clone());
    }
    Ok(serde_json::from_value(base)?)
}

impl ParamArgs {
    pub fn resolve(&self, config: Option<&Path>) -> CliResult<ModelParams> {
        let mut p = config_params(config)?;
        if let Some(c) = &self.thresholds {
            p.thresholds = Thresholds::new(c.clone())?;
        }
        if let Some(g) = self.gamma {
            p.gamma = g;
        }
        if let Some(e) = self.eta {
            p.eta = e;
        }
        if let Some(s) = self.scale {
            p.scale = s;
        }
        if let Some(m) = self.mu {
            p.mu = m;
        }
        match self.weights {
            Some(WeightsArg::Fivb) => p.weights = CategoryTable::fivb_weights(),
            Some(WeightsArg::Unit) => p.weights.iter_mut().for_each(|w| *w = 1.0),
            None => {}
        }
        match self.scores {
            Some(ScoresArg::Fivb) => p.scores = NumericalScores::fivb(),
            Some(ScoresArg::Matched) => {
                p.scores = rankforge::model::matched_scores(&p.thresholds, p.scores.get(0))?
            }
            Some(ScoresArg::File) => {
                let path = self
                    .scores_file
                    .as_ref()
                    .ok_or("--scores file needs --scores-file")?;
                let v: Vec<f64> = serde_json::from_reader(File::open(path)?)?;
                p.scores = NumericalScores::new(v)?;
            }
            None => {}
        }
        if self.thresholds.is_some() || self.scores.is_some() {
            p.symmetric = p.thresholds.is_symmetric(1e-12) && p.scores.is_antisymmetric(1e-12);
        }
        p.validate()?;
        Ok(p)
    }
}

/// Dataset input shared by the commands that read matches.
#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Match CSV.
    pub data: PathBuf,
    /// Drop matches whose published increment is 0 or ±0.01.
    #[arg(long)]
    pub drop_small_increment: bool,
    /// Where to write the list of dropped matches (CSV).
    #[arg(long)]
    pub exclusions: Option<PathBuf>,
}

impl DataArgs {
    pub fn load(&self, params: &ModelParams) -> CliResult<Dataset> {
        let d = load_csv(&self.data, &CategoryTable::fivb())?;
        let rules = FilterRules {
            small_increment: self.drop_small_increment,
            forfeits: Vec::new(),
        };
        let (d, dropped) = filter_matches(&d, &rules)?;
        if let Some(path) = &self.exclusions {
            write_exclusions(&dropped, BufWriter::new(File::create(path)?))?;
        }
        if d.categories != params.categories() {
            return Err(format!(
                "{} categories in the data but {} weights",
                d.categories,
                params.categories()
            )
            .into());
        }
        Ok(d)
    }
}

/// The fully resolved run, echoed into every output.
#[derive(Debug, Serialize)]
pub struct RunConfig<'a, A: Serialize> {
    pub version: &'static str,
    pub command: &'static str,
    pub threads: usize,
    pub args: &'a A,
    pub params: &'a ModelParams,
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, B: Serialize> {
    version: &'static str,
    config: &'a C,
    #[serde(flatten)]
    body: &'a B,
}

/// Writes `body` with the config embedded, to `path` or stdout.
pub fn emit_json<C: Serialize, B: Serialize>(path: Option<&Path>, config: &C, body: &B) -> CliResult<()> {
    let env = Envelope {
        version: VERSION,
        config,
        body,
    };
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            serde_json::to_writer_pretty(&mut w, &env)?;
            writeln!(w)?;
            w.flush()?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, &env)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn manifest_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Creates a CSV file and its `<file>.manifest.json` carrying the config.
pub fn create_csv<C: Serialize>(path: &Path, config: &C) -> CliResult<BufWriter<File>> {
    #[derive(Serialize)]
    struct Manifest<'a> {
        file: &'a Path,
    }
    emit_json(Some(&manifest_path(path)), config, &Manifest { file: path })?;
    Ok(BufWriter::new(File::create(path)?))
}
