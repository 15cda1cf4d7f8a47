//! Predefined model specifications, addressed by name.

use sociospatial::coredata::{self as cd, Outcome, AGE_STRUCTURE_COVARIATES, DEFAULT_COVARIATES, REP_MAJORITY};
use sociospatial::exposure as ex;
use sociospatial::regress::{FixedEffect, ModelSpec, ERPO_INDICATOR};

pub const SOCIO_SPATIAL_M1: &str = "socio_spatial_m1";
pub const SOCIO_SPATIAL_M2: &str = "socio_spatial_m2";
pub const ERPO_DIRECT: &str = "erpo_direct";
pub const ERPO_SOCIAL: &str = "erpo_social";
pub const ERPO_SOCIAL_SPATIAL: &str = "erpo_social_spatial";
pub const ROBUSTNESS_SOCIAL_CONTROL: &str = "robustness_social_control";

pub const BASE_NAMES: [&str; 6] =
    [SOCIO_SPATIAL_M1, SOCIO_SPATIAL_M2, ERPO_DIRECT, ERPO_SOCIAL, ERPO_SOCIAL_SPATIAL, ROBUSTNESS_SOCIAL_CONTROL];

const ADJ_SUFFIX: &str = "_adj";

/// Every predefined name, crude variants first.
pub fn all_names() -> Vec<String> {
    let crude = BASE_NAMES.iter().map(|s| s.to_string());
    let adj = BASE_NAMES.iter().map(|s| format!("{s}{ADJ_SUFFIX}"));
    crude.chain(adj).collect()
}

pub fn is_age_adjusted(name: &str) -> bool {
    name.ends_with(ADJ_SUFFIX)
}

/// Heading under which a predefined spec is reported; custom models share one.
pub fn family(name: &str) -> &'static str {
    match name.strip_suffix(ADJ_SUFFIX).unwrap_or(name) {
        SOCIO_SPATIAL_M1 | SOCIO_SPATIAL_M2 => "Socio-spatial correlates of mortality",
        ERPO_DIRECT | ERPO_SOCIAL | ERPO_SOCIAL_SPATIAL => "Direct and indirect ERPO exposure",
        ROBUSTNESS_SOCIAL_CONTROL => "ERPO exposure controlling for deaths in social proximity",
        _ => "Custom models",
    }
}

/// Resolves a predefined name. Crude models carry the age-structure
/// covariates; age-adjusted ones drop them and read the adjusted proximity
/// series. Political affiliation enters the ERPO models only.
pub fn predefined(name: &str) -> Option<ModelSpec> {
    let adjusted = is_age_adjusted(name);
    let base = if adjusted { name.strip_suffix(ADJ_SUFFIX)? } else { name };
    let (s, d) = if adjusted {
        (ex::SOCIAL_PROXIMITY_ADJ, ex::SPATIAL_PROXIMITY_ADJ)
    } else {
        (ex::SOCIAL_PROXIMITY, ex::SPATIAL_PROXIMITY)
    };
    let (lead, political, fe): (Vec<&str>, bool, &[FixedEffect]) = match base {
        SOCIO_SPATIAL_M1 => (vec![s], false, &[FixedEffect::Region, FixedEffect::Year]),
        SOCIO_SPATIAL_M2 => (vec![s, d], false, &[FixedEffect::Region, FixedEffect::Year]),
        ERPO_DIRECT => (vec![ERPO_INDICATOR], true, &[FixedEffect::Region, FixedEffect::Year]),
        ERPO_SOCIAL => (vec![ex::ERPO_SOCIAL_EXPOSURE], true, &[FixedEffect::Region, FixedEffect::StateByYear]),
        ERPO_SOCIAL_SPATIAL => (
            vec![ex::ERPO_SOCIAL_EXPOSURE, ex::ERPO_SPATIAL_EXPOSURE],
            true,
            &[FixedEffect::Region, FixedEffect::StateByYear],
        ),
        ROBUSTNESS_SOCIAL_CONTROL => (
            vec![ex::ERPO_SOCIAL_EXPOSURE, ex::ERPO_SPATIAL_EXPOSURE, s],
            true,
            &[FixedEffect::Region, FixedEffect::StateByYear],
        ),
        _ => return None,
    };
    let covariates = DEFAULT_COVARIATES
        .iter()
        .copied()
        .filter(|c| (political || *c != REP_MAJORITY) && !(adjusted && AGE_STRUCTURE_COVARIATES.contains(c)));
    let regressors: Vec<&str> = lead.iter().copied().chain(covariates).collect();
    let standardize: Vec<&str> =
        lead.iter().copied().filter(|r| *r != ERPO_INDICATOR).chain([cd::POP_DENSITY, cd::MEDIAN_INCOME]).collect();
    let outcome = if adjusted { Outcome::AgeAdjusted } else { Outcome::Crude };
    Some(ModelSpec::new(name, outcome, &regressors, fe).standardizing(&standardize))
}
