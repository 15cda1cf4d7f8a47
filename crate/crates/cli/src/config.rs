//! Run configuration: input files, output directory, options and models.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sociospatial::coredata::delimiter_char;
use sociospatial::exposure::{Denominator, ExposureOptions, WeightsBase};
use sociospatial::regress::{CrType, ModelSpec};

use crate::failure::{CliResult, Failure};
use crate::specs;

fn comma() -> u8 {
    b','
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub panel: PathBuf,
    pub sci: PathBuf,
    pub geography: PathBuf,
    pub policy: PathBuf,
    /// When given, `rep_majority` is carried forward from election returns
    /// instead of read from the panel.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elections: Option<PathBuf>,
    /// Age-stratified deaths and population; enables age-adjusted outcomes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<PathBuf>,
    /// Defaults to the 2000 US standard population.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard_population: Option<PathBuf>,
    /// Precomputed series that replace same-named built exposures when fitting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exposures: Option<PathBuf>,
    #[serde(default = "comma", with = "delimiter_char")]
    pub delimiter: u8,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    pub denominator: Denominator,
    pub weights_base: WeightsBase,
    pub cr: CrType,
    pub strict: bool,
}

impl Options {
    pub fn exposure(&self) -> ExposureOptions {
        ExposureOptions { denominator: self.denominator, weights_base: self.weights_base }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_out")]
    pub out: PathBuf,
    pub inputs: Inputs,
    #[serde(default)]
    pub options: Options,
    /// Predefined specifications to fit. Empty means all that the inputs support.
    #[serde(default)]
    pub specs: Vec<String>,
    /// Additional user-defined specifications.
    #[serde(default, rename = "model", skip_serializing_if = "Vec::is_empty")]
    pub models: Vec<ModelSpec>,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| Failure::validation(format!("invalid run config: {e}")))
    }

    /// Reads a config and resolves relative paths against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::validation(format!("cannot read run config: {e}")).in_file(path))?;
        let mut cfg = Self::parse(&text).map_err(|f| f.in_file(path))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let i = &mut self.inputs;
        for p in [&mut i.panel, &mut i.sci, &mut i.geography, &mut i.policy] {
            join(p);
        }
        for p in [&mut i.elections, &mut i.age, &mut i.standard_population, &mut i.exposures].into_iter().flatten() {
            join(p);
        }
        join(&mut self.out);
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Every referenced input exists and the resolved model names are unique.
    pub fn validate(&self) -> CliResult<()> {
        let i = &self.inputs;
        let required = [&i.panel, &i.sci, &i.geography, &i.policy];
        let optional = [&i.elections, &i.age, &i.standard_population, &i.exposures];
        for p in required.into_iter().chain(optional.into_iter().flatten()) {
            if !p.is_file() {
                return Err(Failure::validation("input file not found").in_file(p));
            }
        }
        let models = self.models()?;
        let mut seen = BTreeSet::new();
        for m in &models {
            if !seen.insert(m.name.as_str()) {
                return Err(Failure::validation(format!("duplicate spec name `{}`", m.name)));
            }
            m.validate().map_err(|e| Failure::validation(e.to_string()).in_spec(&m.name))?;
        }
        Ok(())
    }

    /// Predefined specs named in `specs` followed by custom models, with the
    /// configured CR correction applied.
    pub fn models(&self) -> CliResult<Vec<ModelSpec>> {
        let names: Vec<String> = if self.specs.is_empty() && self.models.is_empty() {
            specs::all_names().into_iter().filter(|n| self.inputs.age.is_some() || !specs::is_age_adjusted(n)).collect()
        } else {
            self.specs.clone()
        };
        let mut out = Vec::new();
        for name in &names {
            let spec = specs::predefined(name).ok_or_else(|| Failure::validation(format!("unknown spec `{name}`")))?;
            if specs::is_age_adjusted(name) && self.inputs.age.is_none() {
                return Err(Failure::validation("age-adjusted spec needs an `age` input").in_spec(name));
            }
            out.push(spec);
        }
        out.extend(self.models.iter().cloned());
        for m in &mut out {
            m.cr = self.options.cr;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
out = "results"
specs = ["socio_spatial_m2", "erpo_social"]

[inputs]
panel = "panel.csv"
sci = "sci.csv"
geography = "geography.csv"
policy = "policy.csv"
elections = "elections.csv"

[options]
denominator = "include-self"
cr = "cr0"

[[model]]
name = "custom"
outcome = "crude"
regressors = ["social_proximity", "pop_density"]
fixed_effects = ["region", "year"]
"#;

    #[test]
    fn parses_and_resolves() {
        let mut cfg = RunConfig::parse(TEXT).unwrap();
        cfg.rebase(Path::new("/data"));
        assert_eq!(cfg.inputs.panel, PathBuf::from("/data/panel.csv"));
        assert_eq!(cfg.out, PathBuf::from("/data/results"));
        assert_eq!(cfg.inputs.delimiter, b',');
        assert_eq!(cfg.options.denominator, Denominator::IncludeSelf);
        let models = cfg.models().unwrap();
        assert_eq!(
            models.iter().map(|m| m.name.as_str()).collect::<Vec<_>>(),
            ["socio_spatial_m2", "erpo_social", "custom"]
        );
        assert!(models.iter().all(|m| m.cr == CrType::Cr0));
        let back = RunConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_and_unsupported_specs() {
        let mut cfg = RunConfig::parse(TEXT).unwrap();
        cfg.specs = vec!["nope".into()];
        assert!(cfg.models().is_err());
        cfg.specs = vec!["erpo_social_adj".into()];
        assert!(cfg.models().is_err());
        assert!(RunConfig::parse("out = 1").is_err());
        assert!(RunConfig::parse(&TEXT.replace("cr = \"cr0\"", "cr = \"cr2\"")).is_err());
        assert!(RunConfig::parse(&TEXT.replace("[options]", "[options]\nbogus = 1")).is_err());
    }

    #[test]
    fn default_selection_depends_on_age_input() {
        let mut cfg = RunConfig::parse(TEXT).unwrap();
        cfg.specs.clear();
        cfg.models.clear();
        assert_eq!(cfg.models().unwrap().len(), 6);
        cfg.inputs.age = Some("age.csv".into());
        assert_eq!(cfg.models().unwrap().len(), 12);
    }
}
