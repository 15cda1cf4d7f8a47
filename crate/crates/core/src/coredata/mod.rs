//! Input tables: panel, connectedness network, geography, policy,
//! elections and age strata.

mod age;
mod elections;
mod geography;
pub(crate) mod io;
mod network;
mod panel;
mod policy;
mod region;

pub use age::{AgeCells, AgeStratifiedCounts, StandardPopulation, AGE_GROUP_LABELS, N_AGE_GROUPS};
pub use elections::{carry_forward_political, ElectionTable, PoliticalLeaning, ELECTION_YEARS};
pub use geography::Geography;
pub use network::SocialNetwork;
pub use panel::delimiter_char;
pub use panel::{
    crude_rate, DroppedRow, Outcome, PanelDataset, PanelRow, PanelSchema, AGE_STRUCTURE_COVARIATES, DEFAULT_COVARIATES,
    MEDIAN_INCOME, PCT_AGE_0_17, PCT_AGE_18_44, PCT_AGE_45_64, PCT_ASIAN, PCT_BLACK, PCT_HISPANIC, PCT_LESS_HS,
    PCT_LIMITED_ENGLISH, PCT_OTHER, PCT_UNEMPLOYED, POP_DENSITY, REP_MAJORITY,
};
pub use policy::PolicyTable;
pub use region::{RegionId, StateCode};
