use rayon::prelude::*;
use serde::Serialize;

use super::config::DgpConfig;
use super::generate::simulate;
use crate::error::{Error, Result};
use crate::regress::{fit, ModelSpec};

/// One coefficient's estimate in one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Draw {
    pub seed: u64,
    pub estimate: f64,
    pub se: f64,
    pub ci95: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetSummary {
    pub name: String,
    pub truth: f64,
    pub replications: usize,
    pub mean_estimate: f64,
    pub mean_se: f64,
    pub mean_abs_error: f64,
    /// Share of 95% intervals containing the truth.
    pub coverage: f64,
    /// Share of estimates within three reported SEs of the truth.
    pub within_3se: f64,
    /// Share of estimates with the sign of the truth.
    pub sign_correct: f64,
    pub draws: Vec<Draw>,
}

impl TargetSummary {
    fn from_draws(name: &str, truth: f64, draws: Vec<Draw>) -> Self {
        let n = draws.len() as f64;
        let share = |f: &dyn Fn(&Draw) -> bool| draws.iter().filter(|d| f(d)).count() as f64 / n;
        TargetSummary {
            name: name.to_string(),
            truth,
            replications: draws.len(),
            mean_estimate: draws.iter().map(|d| d.estimate).sum::<f64>() / n,
            mean_se: draws.iter().map(|d| d.se).sum::<f64>() / n,
            mean_abs_error: draws.iter().map(|d| (d.estimate - truth).abs()).sum::<f64>() / n,
            coverage: share(&|d| d.ci95.0 <= truth && truth <= d.ci95.1),
            within_3se: share(&|d| (d.estimate - truth).abs() <= 3.0 * d.se),
            sign_correct: share(&|d| d.estimate.signum() == truth.signum()),
            draws,
        }
    }
}

/// Simulates and fits `spec` once per seed, in parallel. Results are
/// aggregated in seed order, so the summary does not depend on scheduling.
pub fn monte_carlo(
    cfg: &DgpConfig,
    seeds: &[u64],
    spec: &ModelSpec,
    targets: &[(&str, f64)],
) -> Result<Vec<TargetSummary>> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("no Monte Carlo seeds".into()));
    }
    let per_seed: Vec<Vec<Draw>> = seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<Draw>> {
            let sim = simulate(&cfg.with_seed(seed))?;
            let res = fit(&sim.panel, &sim.exposures, spec)?;
            targets
                .iter()
                .map(|(name, _)| {
                    let estimate =
                        *res.coefficients.get(*name).ok_or_else(|| Error::RankDeficient(vec![name.to_string()]))?;
                    Ok(Draw { seed, estimate, se: res.cluster_se[*name], ci95: res.ci95[*name] })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(targets
        .iter()
        .enumerate()
        .map(|(k, (name, truth))| TargetSummary::from_draws(name, *truth, per_seed.iter().map(|d| d[k]).collect()))
        .collect())
}
