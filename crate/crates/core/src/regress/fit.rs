use std::collections::HashMap;

use indexmap::IndexMap;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::absorb::{absorb, fixed_effect_rank, Convergence, Factor};
use super::spec::{CrType, FixedEffect, ModelSpec, PopulationBase, WeightScheme};
use super::vcov::cluster_vcov;
use super::wls::wls;
use crate::coredata::{Outcome, PanelDataset, RegionId, StateCode};
use crate::error::{Error, Result};
use crate::exposure::{zscores, ExposureSeries};

/// Name under which the panel's own policy indicator is addressed.
pub const ERPO_INDICATOR: &str = "erpo";

/// Relative norm below which an absorbed column counts as collinear with
/// the fixed effects.
pub const ABSORBED_COLLINEAR_TOL: f64 = 1e-10;

/// Limit on indicator columns in [`dummy_ols_oracle`].
pub const MAX_DUMMIES: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub sd: f64,
}

/// Estimates, inference and diagnostics for one specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: String,
    pub outcome: Outcome,
    pub fixed_effects: Vec<FixedEffect>,
    pub coefficients: IndexMap<String, f64>,
    pub cluster_se: IndexMap<String, f64>,
    pub ci95: IndexMap<String, (f64, f64)>,
    pub p: IndexMap<String, f64>,
    pub n_obs: usize,
    pub n_clusters: usize,
    pub r2: f64,
    pub adj_r2: f64,
    /// Estimated parameters: retained slopes plus the rank of the
    /// fixed-effect space (intercept included).
    pub dof_model: usize,
    pub fe_dof: usize,
    pub pruned: Vec<String>,
    pub convergence: Convergence,
    pub cr: CrType,
    pub t_critical: f64,
    pub standardization: IndexMap<String, Standardization>,
    /// Covariance of the retained slopes, in coefficient order.
    pub vcov: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
    #[serde(skip)]
    pub sample: Vec<(RegionId, i32)>,
}

/// Estimation sample with resolved, standardized regressors.
pub(crate) struct Prepared {
    pub keys: Vec<(RegionId, i32)>,
    pub y: Vec<f64>,
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub factors: Vec<Factor>,
    pub clusters: Vec<usize>,
    pub standardization: IndexMap<String, Standardization>,
    pub warnings: Vec<String>,
}

enum Source<'a> {
    Exposure(&'a ExposureSeries),
    Covariate(usize),
    Indicator,
}

pub(crate) fn prepare(panel: &PanelDataset, exposures: &[ExposureSeries], spec: &ModelSpec) -> Result<Prepared> {
    spec.validate()?;
    let sources = spec
        .regressors
        .iter()
        .map(|name| {
            if let Some(s) = exposures.iter().find(|s| &s.name == name) {
                Ok(Source::Exposure(s))
            } else if let Some(i) = panel.covariate_index(name) {
                Ok(Source::Covariate(i))
            } else if name == ERPO_INDICATOR {
                Ok(Source::Indicator)
            } else {
                Err(Error::UnknownRegressor(name.clone()))
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let n_years = panel.years().len();
    let mut keys = Vec::new();
    let mut y = Vec::new();
    let mut weights = Vec::new();
    let mut columns = vec![Vec::new(); sources.len()];
    let mut excluded_outcome = 0usize;
    for (k, row) in panel.rows().iter().enumerate() {
        if !spec.sample.admits(row.region, row.year) {
            continue;
        }
        let Some(value) = spec.outcome.value(row) else {
            excluded_outcome += 1;
            continue;
        };
        for (c, src) in sources.iter().enumerate() {
            let v = match src {
                Source::Exposure(s) => s
                    .get(row.region, row.year)
                    .ok_or_else(|| Error::MissingExposure(s.name.clone(), row.region, row.year))?,
                Source::Covariate(i) => row.covariates[*i],
                Source::Indicator => row.erpo as f64,
            };
            if !v.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "`{}` is not finite at ({}, {})",
                    spec.regressors[c], row.region, row.year
                )));
            }
            columns[c].push(v);
        }
        let w = match (spec.weights, spec.population_base) {
            (WeightScheme::None, _) => 1.0,
            (WeightScheme::Population, PopulationBase::Annual) => row.population as f64,
            (WeightScheme::Population, PopulationBase::Fixed) => {
                panel.rows()[(k / n_years) * n_years].population as f64
            }
        };
        keys.push((row.region, row.year));
        y.push(value);
        weights.push(w);
    }
    let mut warnings = Vec::new();
    if excluded_outcome > 0 {
        let msg = format!("{excluded_outcome} region-years excluded because the outcome is suppressed or unavailable");
        log::warn!("{}: {msg}", spec.name);
        warnings.push(msg);
    }
    let n = keys.len();
    if n < spec.regressors.len() + 2 {
        return Err(Error::TooFewObservations { n, k: spec.regressors.len() + 2 });
    }

    let mut standardization = IndexMap::new();
    for (c, name) in spec.regressors.iter().enumerate() {
        if spec.standardize.contains(name) {
            let (z, mean, sd) = zscores(name, &columns[c])?;
            columns[c] = z;
            standardization.insert(name.clone(), Standardization { mean, sd });
        }
    }

    let mut factors = Vec::new();
    for fe in &spec.fixed_effects {
        let f = match fe {
            FixedEffect::Region => Factor::from_keys(&keys.iter().map(|k| k.0).collect::<Vec<_>>()),
            FixedEffect::Year => Factor::from_keys(&keys.iter().map(|k| k.1).collect::<Vec<_>>()),
            FixedEffect::StateByYear => Factor::from_keys(&keys.iter().map(|k| (k.0.state(), k.1)).collect::<Vec<_>>()),
        };
        let singles = f.singletons().len();
        if singles > 0 {
            let msg = format!("{singles} singleton groups in {fe:?} fixed effects (retained)");
            log::warn!("{}: {msg}", spec.name);
            warnings.push(msg);
        }
        factors.push(f);
    }

    let states: Vec<StateCode> = keys.iter().map(|k| k.0.state()).collect();
    let mut state_ids: HashMap<StateCode, usize> = HashMap::new();
    let clusters = states
        .iter()
        .map(|s| {
            let next = state_ids.len();
            *state_ids.entry(*s).or_insert(next)
        })
        .collect();

    Ok(Prepared {
        keys,
        y,
        names: spec.regressors.clone(),
        columns,
        weights,
        factors,
        clusters,
        standardization,
        warnings,
    })
}

fn weighted_norm(col: &[f64], w: &[f64]) -> f64 {
    col.iter().zip(w).map(|(x, w)| w * x * x).sum::<f64>().sqrt()
}

struct Estimates {
    names: Vec<String>,
    beta: Vec<f64>,
    vcov: DMatrix<f64>,
    residuals: Vec<f64>,
    n_params: usize,
    fe_dof: usize,
    pruned: Vec<String>,
    convergence: Convergence,
}

fn finish(spec: &ModelSpec, prep: Prepared, est: Estimates) -> Result<FitResult> {
    let n = prep.y.len();
    let g = prep.clusters.iter().copied().max().map_or(0, |m| m + 1);
    let tdist =
        StudentsT::new(0.0, 1.0, (g - 1) as f64).map_err(|e| Error::InvalidSpec(format!("t distribution: {e}")))?;
    let t_critical = tdist.inverse_cdf(0.975);

    let mut coefficients = IndexMap::new();
    let mut cluster_se = IndexMap::new();
    let mut ci95 = IndexMap::new();
    let mut p = IndexMap::new();
    for (k, name) in est.names.iter().enumerate() {
        let b = est.beta[k];
        let se = est.vcov[(k, k)].max(0.0).sqrt();
        let t = b / se;
        let pv = if se > 0.0 { 2.0 * (1.0 - tdist.cdf(t.abs())) } else { f64::NAN };
        coefficients.insert(name.clone(), b);
        cluster_se.insert(name.clone(), se);
        ci95.insert(name.clone(), (b - t_critical * se, b + t_critical * se));
        p.insert(name.clone(), pv);
    }

    let wsum: f64 = prep.weights.iter().sum();
    let ybar = prep.y.iter().zip(&prep.weights).map(|(y, w)| y * w).sum::<f64>() / wsum;
    let tss: f64 = prep.y.iter().zip(&prep.weights).map(|(y, w)| w * (y - ybar).powi(2)).sum();
    let ssr: f64 = est.residuals.iter().zip(&prep.weights).map(|(e, w)| w * e * e).sum();
    let r2 = 1.0 - ssr / tss;
    let adj_r2 = 1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - est.n_params as f64);

    let vcov = (0..est.names.len()).map(|i| (0..est.names.len()).map(|j| est.vcov[(i, j)]).collect()).collect();
    let mut warnings = prep.warnings;
    if !est.pruned.is_empty() {
        warnings.push(format!("collinear regressors pruned: {}", est.pruned.join(", ")));
    }
    Ok(FitResult {
        spec: spec.name.clone(),
        outcome: spec.outcome,
        fixed_effects: spec.fixed_effects.clone(),
        coefficients,
        cluster_se,
        ci95,
        p,
        n_obs: n,
        n_clusters: g,
        r2,
        adj_r2,
        dof_model: est.n_params,
        fe_dof: est.fe_dof,
        pruned: est.pruned,
        convergence: est.convergence,
        cr: spec.cr,
        t_critical,
        standardization: prep.standardization,
        vcov,
        warnings,
        residuals: est.residuals,
        sample: prep.keys,
    })
}

/// Population-weighted least squares with absorbed fixed effects and
/// cluster-robust inference.
pub fn fit(panel: &PanelDataset, exposures: &[ExposureSeries], spec: &ModelSpec) -> Result<FitResult> {
    let prep = prepare(panel, exposures, spec)?;
    let n = prep.y.len();
    let factors = if prep.factors.is_empty() { vec![Factor::constant(n)] } else { prep.factors.clone() };
    let mut stack = prep.columns.clone();
    stack.push(prep.y.clone());
    let absorbed = absorb(&stack, &factors, &prep.weights)?;
    let mut cols = absorbed.columns;
    let y_tilde = cols.pop().expect("outcome column");

    let mut pruned = Vec::new();
    let mut candidates = Vec::new();
    for (c, name) in prep.names.iter().enumerate() {
        let before = weighted_norm(&prep.columns[c], &prep.weights);
        let after = weighted_norm(&cols[c], &prep.weights);
        if before == 0.0 || after < ABSORBED_COLLINEAR_TOL * before {
            log::warn!("{}: `{name}` is collinear with the fixed effects", spec.name);
            pruned.push(name.clone());
        } else {
            candidates.push(c);
        }
    }
    let design = DMatrix::from_fn(n, candidates.len(), |i, j| cols[candidates[j]][i]);
    let w = wls(&design, &y_tilde, &prep.weights)?;
    for &j in &w.pruned {
        pruned.push(prep.names[candidates[j]].clone());
    }
    if w.kept.is_empty() {
        return Err(Error::RankDeficient(pruned));
    }
    let kept_cols: Vec<usize> = w.kept.iter().map(|&j| candidates[j]).collect();
    let names: Vec<String> = kept_cols.iter().map(|&c| prep.names[c].clone()).collect();
    let xk = DMatrix::from_fn(n, kept_cols.len(), |i, j| cols[kept_cols[j]][i]);
    let fe_dof = fixed_effect_rank(&factors);
    let n_params = kept_cols.len() + fe_dof;
    let vcov = cluster_vcov(&xk, &w.residuals, &prep.weights, &prep.clusters, n_params, spec.cr)?;
    let est = Estimates {
        names,
        beta: w.beta,
        vcov,
        residuals: w.residuals,
        n_params,
        fe_dof,
        pruned,
        convergence: absorbed.convergence,
    };
    finish(spec, prep, est)
}

/// The same model with explicit indicator columns (an intercept plus one
/// column per non-reference level of each factor) instead of absorption.
pub fn dummy_ols_oracle(panel: &PanelDataset, exposures: &[ExposureSeries], spec: &ModelSpec) -> Result<FitResult> {
    let prep = prepare(panel, exposures, spec)?;
    let n = prep.y.len();
    let n_dummies: usize = 1 + prep.factors.iter().map(|f| f.n_levels().saturating_sub(1)).sum::<usize>();
    if n_dummies > MAX_DUMMIES {
        return Err(Error::TooManyDummies(n_dummies));
    }
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
    for f in &prep.factors {
        for level in 1..f.n_levels() as u32 {
            cols.push(f.ids().iter().map(|g| (*g == level) as u8 as f64).collect());
        }
    }
    let first_regressor = cols.len();
    cols.extend(prep.columns.iter().cloned());
    let design = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
    let w = wls(&design, &prep.y, &prep.weights)?;

    let fe_dof = w.kept.iter().filter(|&&j| j < first_regressor).count();
    let pruned: Vec<String> =
        w.pruned.iter().filter(|&&j| j >= first_regressor).map(|&j| prep.names[j - first_regressor].clone()).collect();
    let slots: Vec<usize> = (0..w.kept.len()).filter(|&k| w.kept[k] >= first_regressor).collect();
    if slots.is_empty() {
        return Err(Error::RankDeficient(pruned));
    }
    let xk = DMatrix::from_fn(n, w.kept.len(), |i, j| design[(i, w.kept[j])]);
    let full = cluster_vcov(&xk, &w.residuals, &prep.weights, &prep.clusters, w.kept.len(), spec.cr)?;
    let est = Estimates {
        names: slots.iter().map(|&k| prep.names[w.kept[k] - first_regressor].clone()).collect(),
        beta: slots.iter().map(|&k| w.beta[k]).collect(),
        vcov: DMatrix::from_fn(slots.len(), slots.len(), |a, b| full[(slots[a], slots[b])]),
        residuals: w.residuals,
        n_params: w.kept.len(),
        fe_dof,
        pruned,
        convergence: Convergence { iterations: 0, last_delta: 0.0 },
    };
    finish(spec, prep, est)
}

impl FitResult {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("fit result: {e}")))
    }
}
