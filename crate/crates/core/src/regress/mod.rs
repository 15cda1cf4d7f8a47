//! Weighted least squares with absorbed fixed effects and cluster-robust
//! inference.

mod absorb;
mod fit;
mod spec;
mod table;
mod vcov;
mod wls;

pub use absorb::{
    absorb, absorb_with, fixed_effect_rank, Absorbed, Convergence, Factor, ABSORB_MAX_SWEEPS, ABSORB_TOL,
};
pub use fit::{dummy_ols_oracle, fit, FitResult, Standardization, ABSORBED_COLLINEAR_TOL, ERPO_INDICATOR, MAX_DUMMIES};
pub use spec::{ClusterBy, CrType, FixedEffect, ModelSpec, PopulationBase, SamplePredicate, WeightScheme};
pub use table::{format_table, label, stars, TABLE_NOTE};
pub use vcov::{cluster_vcov, hc1_vcov};
pub use wls::{bread_from_r, wls, WlsFit, RANK_TOL};
