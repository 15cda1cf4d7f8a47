use std::path::PathBuf;

use thiserror::Error;

use crate::coredata::RegionId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("parse error at row {row}, field `{field}`: {reason}")]
    ParseError { row: usize, field: String, reason: String },
    #[error("invalid region code `{0}`: expected 5 decimal digits")]
    InvalidRegion(String),
    #[error("duplicate key ({0}, {1})")]
    DuplicateKey(RegionId, i32),
    #[error("region {0} is not observed in every year of the study window")]
    UnbalancedRegion(RegionId),
    #[error("empty dataset: {0}")]
    Empty(String),
    #[error("asymmetric connectedness: ({0},{1}) and ({1},{0}) disagree")]
    AsymmetricPair(RegionId, RegionId),
    #[error("non-positive connectedness for ({0},{1})")]
    NonpositiveSci(RegionId, RegionId),
    #[error("population must be positive")]
    ZeroPopulation,
    #[error("region {0} has no election return at or before {1}")]
    NoPriorElection(RegionId, i32),
    #[error("region {0} has no centroid")]
    MissingCentroid(RegionId),
    #[error("regions {0} and {1} share a centroid")]
    CoincidentCentroid(RegionId, RegionId),
    #[error("region {0} has no positive connectedness to any other region")]
    IsolatedRegion(RegionId),
    #[error("all alters of {0} are suppressed in {1}")]
    AllAltersSuppressed(RegionId, i32),
    #[error("year {0} not present in series")]
    MissingYear(i32),
    #[error("zero variance in `{0}`")]
    ZeroVariance(String),
    #[error("series `{0}` does not cover ({1}, {2})")]
    MissingExposure(String, RegionId, i32),
    #[error("age stratum {0} has deaths but zero population")]
    ZeroStratumPopulation(usize),
    #[error("no age-stratified data for ({0}, {1})")]
    MissingAgeData(RegionId, i32),
    #[error("age-stratified deaths for ({0}, {1}) sum to {2}, panel has {3}")]
    AgeDeathMismatch(RegionId, i32, u64, u64),
    #[error("absorption did not converge after {iterations} sweeps (last delta {last_delta:e})")]
    NoConvergence { iterations: usize, last_delta: f64 },
    #[error("design is rank deficient; pruned columns: {0:?}")]
    RankDeficient(Vec<String>),
    #[error("cluster-robust covariance needs at least two clusters")]
    SingleCluster,
    #[error("unknown regressor `{0}`")]
    UnknownRegressor(String),
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("too few observations: {n} rows for {k} parameters")]
    TooFewObservations { n: usize, k: usize },
    #[error("dummy oracle would need {0} indicator columns (limit 2000)")]
    TooManyDummies(usize),
    #[error("oracle limited to 12 regions, got {0}")]
    OracleScaleExceeded(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(row: usize, field: &str, reason: impl ToString) -> Self {
        Error::ParseError { row, field: field.to_string(), reason: reason.to_string() }
    }
}
