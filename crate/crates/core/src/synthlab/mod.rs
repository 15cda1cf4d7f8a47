//! Synthetic panels with planted coefficients, an independent exposure
//! oracle and Monte Carlo drivers.

mod bundle;
mod config;
mod generate;
mod montecarlo;
mod oracle;

pub use bundle::{
    write_bundle, Manifest, AGE_FILE, DGP_FILE, ELECTIONS_FILE, GEOGRAPHY_FILE, MANIFEST_FILE, PANEL_FILE,
    PLANTED_EXPOSURES_FILE, POLICY_FILE, SCI_FILE, STANDARD_POPULATION_FILE,
};
pub use config::{Adoption, DgpConfig, FeScales, MAX_REGIONS_PER_STATE, MAX_STATES};
pub use generate::{
    generate_network, region_codes, simulate, simulate_panel, state_codes, Simulated, SyntheticNetwork,
};
pub use montecarlo::{monte_carlo, Draw, TargetSummary};
pub use oracle::{brute_force_delta, brute_force_exposures, ORACLE_MAX_REGIONS};
