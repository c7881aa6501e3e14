use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::record::Dataset;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::normal;

/// Share of home-venue matches in the FIVB 2021-2023 data (390 of 1151).
pub const FIVB_HOME_SHARE: f64 = 390.0 / 1151.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    /// Probability that a match is played at the home team's venue.
    pub p_home: f64,
    /// Category frequencies; uniform over the parameter weights when absent.
    pub category_probs: Option<Vec<f64>>,
    /// Matches per calendar day in the generated dates.
    pub matches_per_day: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            p_home: FIVB_HOME_SHARE,
            category_probs: None,
            matches_per_day: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub skills: BTreeMap<String, f64>,
    pub seed: u64,
    pub params: ModelParams,
}

impl GroundTruth {
    /// Skills in dataset team order.
    pub fn skill_vector(&self, d: &Dataset) -> Vec<f64> {
        d.teams.iter().map(|t| self.skills[t]).collect()
    }
}

/// Draws one outcome from the cumulative-link model at `z`.
pub fn sample_outcome<R: Rng + ?Sized>(rng: &mut R, z: f64, p: &ModelParams) -> usize {
    let u: f64 = rng.gen();
    let c = p.thresholds.interior();
    c.iter()
        .position(|&cy| u < normal::cdf(z + cy))
        .unwrap_or(c.len())
}

/// Samples a schedule and outcomes from the model.
///
/// Skills default to independent `N(0, 1/γ)` draws (the prior implied by the
/// ridge penalty `γ/2 ‖θ‖²`; unit variance when `γ = 0`). Skills are on the
/// latent scale; `z_t + h_t η` drives the outcome.
pub fn synthesize(
    teams: usize,
    matches: usize,
    params: &ModelParams,
    seed: u64,
    true_skills: Option<&[f64]>,
    opts: &SynthOptions,
) -> Result<(Dataset, GroundTruth)> {
    if teams < 2 {
        return Err(Error::InvalidParams(format!(
            "need at least 2 teams, got {teams}"
        )));
    }
    if matches == 0 {
        return Err(Error::InvalidParams("need at least one match".into()));
    }
    params.validate()?;
    if let Some(s) = true_skills {
        if s.len() != teams {
            return Err(Error::LengthMismatch(s.len(), teams));
        }
    }
    if !(0.0..=1.0).contains(&opts.p_home) {
        return Err(Error::InvalidParams(format!("p_home = {}", opts.p_home)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let skills: Vec<f64> = match true_skills {
        Some(s) => s.to_vec(),
        None => {
            let var = if params.gamma > 0.0 {
                1.0 / params.gamma
            } else {
                1.0
            };
            let dist = Normal::new(0.0, var.sqrt()).expect("finite variance");
            (0..teams).map(|_| dist.sample(&mut rng)).collect()
        }
    };
    let k = params.categories();
    let cat_probs = opts.category_probs.clone().unwrap_or_else(|| vec![1.0; k]);
    if cat_probs.len() != k {
        return Err(Error::LengthMismatch(cat_probs.len(), k));
    }
    let cats = WeightedIndex::new(&cat_probs)
        .map_err(|e| Error::InvalidParams(format!("category probabilities: {e}")))?;

    let width = (teams - 1).to_string().len();
    let names: Vec<String> = (0..teams).map(|i| format!("T{i:0width$}")).collect();
    let mut d = Dataset::empty(params.levels(), k);
    for name in &names {
        d.intern_team(name);
    }
    let start = NaiveDate::from_ymd_opt(2021, 1, 1).expect("valid date");
    let per_day = opts.matches_per_day.max(1);
    for t in 0..matches {
        let home = rng.gen_range(0..teams);
        let mut away = rng.gen_range(0..teams - 1);
        if away >= home {
            away += 1;
        }
        let home_venue = rng.gen_bool(opts.p_home);
        let category = cats.sample(&mut rng);
        let z = skills[home] - skills[away] + if home_venue { params.eta } else { 0.0 };
        let outcome = sample_outcome(&mut rng, z, params);
        let date = start
            .checked_add_days(Days::new((t / per_day) as u64))
            .expect("date in range");
        d.push(
            date,
            &names[home],
            &names[away],
            outcome,
            home_venue,
            category,
            None,
        )?;
    }
    let truth = GroundTruth {
        skills: names.iter().cloned().zip(skills).collect(),
        seed,
        params: params.clone(),
    };
    Ok((d, truth))
}
