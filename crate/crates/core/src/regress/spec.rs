use serde::{Deserialize, Serialize};

use crate::coredata::{Outcome, RegionId, StateCode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedEffect {
    Region,
    Year,
    StateByYear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    #[default]
    Population,
    None,
}

/// Which population weights a row: its own year's, or the region's first-year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PopulationBase {
    #[default]
    Annual,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterBy {
    #[default]
    State,
}

/// Small-sample factor applied to the cluster sandwich.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrType {
    Cr0,
    #[default]
    Cr1,
}

/// Row filter applied before estimation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplePredicate {
    pub year_min: Option<i32>,
    pub year_max: Option<i32>,
    pub exclude_states: Vec<StateCode>,
}

impl SamplePredicate {
    pub fn admits(&self, region: RegionId, year: i32) -> bool {
        self.year_min.is_none_or(|y| year >= y)
            && self.year_max.is_none_or(|y| year <= y)
            && !self.exclude_states.contains(&region.state())
    }
}

/// Declarative regression specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub outcome: Outcome,
    pub regressors: Vec<String>,
    /// Regressors z-scored over the estimation sample before fitting.
    #[serde(default)]
    pub standardize: Vec<String>,
    pub fixed_effects: Vec<FixedEffect>,
    #[serde(default)]
    pub weights: WeightScheme,
    #[serde(default)]
    pub population_base: PopulationBase,
    #[serde(default)]
    pub cluster: ClusterBy,
    #[serde(default)]
    pub cr: CrType,
    #[serde(default)]
    pub sample: SamplePredicate,
}

impl ModelSpec {
    pub fn new(name: &str, outcome: Outcome, regressors: &[&str], fixed_effects: &[FixedEffect]) -> Self {
        ModelSpec {
            name: name.to_string(),
            outcome,
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
            standardize: Vec::new(),
            fixed_effects: fixed_effects.to_vec(),
            weights: WeightScheme::Population,
            population_base: PopulationBase::Annual,
            cluster: ClusterBy::State,
            cr: CrType::Cr1,
            sample: SamplePredicate::default(),
        }
    }

    pub fn standardizing(mut self, names: &[&str]) -> Self {
        self.standardize = names.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.regressors.is_empty() {
            return Err(Error::InvalidSpec(format!("{}: no regressors", self.name)));
        }
        for (i, r) in self.regressors.iter().enumerate() {
            if self.regressors[..i].contains(r) {
                return Err(Error::InvalidSpec(format!("{}: duplicate regressor `{r}`", self.name)));
            }
        }
        for s in &self.standardize {
            if !self.regressors.contains(s) {
                return Err(Error::InvalidSpec(format!("{}: `{s}` is standardized but not a regressor", self.name)));
            }
        }
        let fe = &self.fixed_effects;
        for (i, f) in fe.iter().enumerate() {
            if fe[..i].contains(f) {
                return Err(Error::InvalidSpec(format!("{}: duplicate fixed effect", self.name)));
            }
        }
        if fe.contains(&FixedEffect::Year) && fe.contains(&FixedEffect::StateByYear) {
            return Err(Error::InvalidSpec(format!(
                "{}: year and state_by_year fixed effects are mutually exclusive",
                self.name
            )));
        }
        Ok(())
    }
}
