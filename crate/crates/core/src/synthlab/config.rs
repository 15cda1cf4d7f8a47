use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coredata::StateCode;
use crate::error::{Error, Result};

/// When a state adopts the policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AdoptionRaw", into = "AdoptionRaw")]
pub enum Adoption {
    Year(i32),
    /// Per-year adoption hazard from the first study year on.
    Random(f64),
    Never,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum AdoptionRaw {
    Year(i32),
    Text(String),
}

impl TryFrom<AdoptionRaw> for Adoption {
    type Error = String;

    fn try_from(raw: AdoptionRaw) -> Result<Self, String> {
        match raw {
            AdoptionRaw::Year(y) => Ok(Adoption::Year(y)),
            AdoptionRaw::Text(s) => {
                let s = s.trim();
                if s == "never" {
                    return Ok(Adoption::Never);
                }
                if let Ok(y) = s.parse() {
                    return Ok(Adoption::Year(y));
                }
                let p = s
                    .strip_prefix("random(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| format!("expected a year, \"never\" or \"random(p)\", got `{s}`"))?;
                let p: f64 = p.trim().parse().map_err(|e| format!("random(p): {e}"))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(format!("random(p) needs 0 <= p <= 1, got {p}"));
                }
                Ok(Adoption::Random(p))
            }
        }
    }
}

impl From<Adoption> for AdoptionRaw {
    fn from(a: Adoption) -> Self {
        match a {
            Adoption::Year(y) => AdoptionRaw::Year(y),
            other => AdoptionRaw::Text(other.to_string()),
        }
    }
}

impl fmt::Display for Adoption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Adoption::Year(y) => write!(f, "{y}"),
            Adoption::Random(p) => write!(f, "random({p})"),
            Adoption::Never => f.write_str("never"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeScales {
    pub region: f64,
    pub year: f64,
    pub state_year: f64,
}

impl Default for FeScales {
    fn default() -> Self {
        FeScales { region: 2.0, year: 1.0, state_year: 0.0 }
    }
}

/// Data-generating process for synthetic panels with planted coefficients.
///
/// Planted effects are in outcome units (deaths per 100,000) per pooled
/// standard deviation of the corresponding exposure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    pub n_regions: usize,
    pub n_states: usize,
    pub n_years: usize,
    pub start_year: i32,
    pub seed: u64,
    pub true_zeta1: f64,
    pub true_zeta2: f64,
    pub true_psi: f64,
    pub true_delta1: f64,
    /// Effect of policy exposure through distance.
    pub true_delta2: f64,
    /// Effects of covariates in their natural units.
    pub covariate_effects: BTreeMap<String, f64>,
    pub fe_scales: FeScales,
    pub noise_sd: f64,
    pub base_rate: f64,
    /// SD of the latent alter rates from which proximity exposures are built.
    pub latent_sd: f64,
    pub network_density: f64,
    /// e-folding distance of connectedness decay.
    pub distance_scale_km: f64,
    /// Keys are two-digit state codes; `"*"` applies to unlisted states.
    pub adoption_schedule: BTreeMap<String, Adoption>,
    pub population_median: f64,
    pub population_sdlog: f64,
    /// Within-period feedback `y = c + rho W y` through social weights.
    pub contagion_rho: f64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        let mut covariate_effects = BTreeMap::new();
        covariate_effects.insert("pct_unemployed".into(), 0.15);
        covariate_effects.insert("pct_less_hs".into(), 0.05);
        covariate_effects.insert("rep_majority".into(), 0.5);
        let mut adoption_schedule = BTreeMap::new();
        adoption_schedule.insert("*".into(), Adoption::Random(0.08));
        DgpConfig {
            n_regions: 100,
            n_states: 50,
            n_years: 13,
            start_year: 2010,
            seed: 0,
            true_zeta1: 3.0,
            true_zeta2: 0.8,
            true_psi: 0.0,
            true_delta1: 0.0,
            true_delta2: 0.0,
            covariate_effects,
            fe_scales: FeScales::default(),
            noise_sd: 1.0,
            base_rate: 30.0,
            latent_sd: 3.0,
            network_density: 0.5,
            distance_scale_km: 600.0,
            adoption_schedule,
            population_median: 60_000.0,
            population_sdlog: 0.6,
            contagion_rho: 0.0,
        }
    }
}

pub const MAX_STATES: usize = 99;
pub const MAX_REGIONS_PER_STATE: usize = 500;

impl DgpConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        DgpConfig { seed, ..self.clone() }
    }

    pub fn years(&self) -> Vec<i32> {
        (0..self.n_years as i32).map(|t| self.start_year + t).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_states < 2 {
            return bad(format!("n_states must be at least 2, got {}", self.n_states));
        }
        if self.n_regions < self.n_states {
            return bad(format!("n_regions ({}) must be at least n_states ({})", self.n_regions, self.n_states));
        }
        if self.n_states > MAX_STATES {
            return bad(format!("n_states must be at most {MAX_STATES}"));
        }
        if self.n_regions.div_ceil(self.n_states) > MAX_REGIONS_PER_STATE {
            return bad(format!("at most {MAX_REGIONS_PER_STATE} regions per state"));
        }
        if self.start_year < crate::coredata::ELECTION_YEARS[0] {
            return bad(format!(
                "start_year must be {} or later so political leaning can be carried forward",
                crate::coredata::ELECTION_YEARS[0]
            ));
        }
        if self.n_years < 3 {
            return bad(format!("n_years must be at least 3, got {}", self.n_years));
        }
        let sds = [
            ("fe_scales.region", self.fe_scales.region),
            ("fe_scales.year", self.fe_scales.year),
            ("fe_scales.state_year", self.fe_scales.state_year),
            ("noise_sd", self.noise_sd),
            ("latent_sd", self.latent_sd),
            ("population_sdlog", self.population_sdlog),
        ];
        for (name, v) in sds {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be a nonnegative number, got {v}"));
            }
        }
        if !(self.network_density > 0.0 && self.network_density <= 1.0) {
            return bad(format!("network_density must lie in (0, 1], got {}", self.network_density));
        }
        if !(self.distance_scale_km.is_finite() && self.distance_scale_km > 0.0) {
            return bad("distance_scale_km must be positive".into());
        }
        if !(self.population_median.is_finite() && self.population_median >= 1.0) {
            return bad("population_median must be at least 1".into());
        }
        if !(self.contagion_rho.is_finite() && self.contagion_rho.abs() < 1.0) {
            return bad("contagion_rho must lie in (-1, 1)".into());
        }
        let effects =
            [self.true_zeta1, self.true_zeta2, self.true_psi, self.true_delta1, self.true_delta2, self.base_rate];
        if effects.iter().any(|v| !v.is_finite()) {
            return bad("planted coefficients must be finite".into());
        }
        for (name, v) in &self.covariate_effects {
            if !crate::coredata::DEFAULT_COVARIATES.contains(&name.as_str()) {
                return bad(format!("unknown covariate `{name}` in covariate_effects"));
            }
            if !v.is_finite() {
                return bad(format!("effect of `{name}` must be finite"));
            }
        }
        for key in self.adoption_schedule.keys() {
            if key != "*" {
                let s = StateCode::parse(key)
                    .map_err(|e| Error::InvalidConfig(format!("adoption_schedule key `{key}`: {e}")))?;
                let n: usize = s.as_str().parse().unwrap_or(0);
                if n == 0 || n > self.n_states {
                    return bad(format!("adoption_schedule names state {key}, outside 01..{:02}", self.n_states));
                }
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: DgpConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("dgp config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        DgpConfig::default().validate().unwrap();
    }

    #[test]
    fn invariants() {
        let c = DgpConfig { n_regions: 3, n_states: 4, ..Default::default() };
        assert!(c.validate().is_err());
        let c = DgpConfig { n_years: 2, ..Default::default() };
        assert!(c.validate().is_err());
        let c = DgpConfig { noise_sd: -1.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = DgpConfig { network_density: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn toml_round_trip_with_schedule() {
        let text = r#"
            n_regions = 40
            n_states = 5
            seed = 7
            [adoption_schedule]
            "01" = 2014
            "02" = "random(0.2)"
            "03" = "never"
            "04" = "2016"
            [fe_scales]
            region = 0.0
        "#;
        let c = DgpConfig::from_toml(text).unwrap();
        assert_eq!(c.adoption_schedule["01"], Adoption::Year(2014));
        assert_eq!(c.adoption_schedule["02"], Adoption::Random(0.2));
        assert_eq!(c.adoption_schedule["03"], Adoption::Never);
        assert_eq!(c.adoption_schedule["04"], Adoption::Year(2016));
        assert_eq!(c.fe_scales.year, 1.0);
        assert_eq!(c.true_zeta1, 3.0);
        let back = DgpConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_schedules() {
        assert!(DgpConfig::from_toml("n_region = 4").is_err());
        assert!(DgpConfig::from_toml("[adoption_schedule]\n\"01\" = \"random(2)\"").is_err());
        assert!(DgpConfig::from_toml("n_states = 3\n[adoption_schedule]\n\"07\" = 2012").is_err());
    }
}
