//! Derived regressors: outcome rates in social and spatial proximity,
//! policy exposure through social ties and through distance, exposure
//! deltas and pooled z-scores.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coredata::io::{self as tio, DelimitedTable};
use crate::coredata::{Outcome, PanelDataset, PolicyTable, RegionId, SocialNetwork, StateCode};
use crate::error::{Error, Result};
use crate::geo::DistanceMatrix;

pub const SOCIAL_PROXIMITY: &str = "social_proximity";
pub const SPATIAL_PROXIMITY: &str = "spatial_proximity";
pub const SOCIAL_PROXIMITY_ADJ: &str = "social_proximity_adj";
pub const SPATIAL_PROXIMITY_ADJ: &str = "spatial_proximity_adj";
pub const ERPO_SOCIAL_EXPOSURE: &str = "erpo_social_exposure";
pub const ERPO_SPATIAL_EXPOSURE: &str = "erpo_spatial_exposure";

/// Whether the focal region's own connectedness enters the policy-exposure
/// denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Denominator {
    #[default]
    ExcludeSelf,
    IncludeSelf,
}

/// Population used for `n_j` in the social weights: first study year, or
/// the same year as the outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightsBase {
    #[default]
    Fixed,
    Annual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExposureOptions {
    pub denominator: Denominator,
    pub weights_base: WeightsBase,
}

/// One derived value per panel region-year, stored region-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureSeries {
    pub name: String,
    regions: Vec<RegionId>,
    years: Vec<i32>,
    values: Vec<f64>,
    pub standardized: bool,
    /// Natural-unit mean and SD removed by standardization.
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    /// Region-years whose weights were renormalized over unsuppressed alters.
    pub renormalized: usize,
}

impl ExposureSeries {
    pub fn new(name: &str, regions: Vec<RegionId>, years: Vec<i32>, values: Vec<f64>) -> Result<Self> {
        if values.len() != regions.len() * years.len() {
            return Err(Error::InvalidConfig(format!(
                "series `{name}` has {} values for {} x {} keys",
                values.len(),
                regions.len(),
                years.len()
            )));
        }
        Ok(ExposureSeries {
            name: name.to_string(),
            regions,
            years,
            values,
            standardized: false,
            mean: None,
            sd: None,
            renormalized: 0,
        })
    }

    pub fn regions(&self) -> &[RegionId] {
        &self.regions
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, region: RegionId, year: i32) -> Option<f64> {
        let ri = self.regions.binary_search(&region).ok()?;
        let ti = self.years.binary_search(&year).ok()?;
        Some(self.values[ri * self.years.len() + ti])
    }

    pub fn iter(&self) -> impl Iterator<Item = (RegionId, i32, f64)> + '_ {
        let t = self.years.len();
        self.values.iter().enumerate().map(move |(k, v)| (self.regions[k / t], self.years[k % t], *v))
    }

    /// True when the key set equals the panel's.
    pub fn covers(&self, panel: &PanelDataset) -> bool {
        self.regions == panel.regions() && self.years == panel.years()
    }

    pub fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }
}

/// Pooled mean and population standard deviation.
pub fn pooled_moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Z-scores with the population-SD convention.
pub fn zscores(name: &str, values: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
    if values.is_empty() {
        return Err(Error::ZeroVariance(name.to_string()));
    }
    let (mean, sd) = pooled_moments(values);
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !sd.is_finite() || scale == 0.0 || sd <= 1e-14 * scale {
        return Err(Error::ZeroVariance(name.to_string()));
    }
    Ok((values.iter().map(|v| (v - mean) / sd).collect(), mean, sd))
}

/// Pooled standardization over every region-year of the series.
pub fn standardize(series: &ExposureSeries) -> Result<ExposureSeries> {
    let (values, m, s) = zscores(&series.name, &series.values)?;
    let (mean, sd) = match (series.mean, series.sd) {
        // compose with an earlier transform so mean/sd stay in natural units
        (Some(m0), Some(s0)) => (m0 + s0 * m, s0 * s),
        _ => (m, s),
    };
    Ok(ExposureSeries { values, standardized: true, mean: Some(mean), sd: Some(sd), ..series.clone() })
}

/// Change in a standardized series between two years, per region.
pub fn exposure_delta(series: &ExposureSeries, y0: i32, y1: i32) -> Result<BTreeMap<RegionId, f64>> {
    if !series.standardized {
        return Err(Error::InvalidConfig(format!(
            "series `{}` must be standardized before taking deltas",
            series.name
        )));
    }
    let t0 = series.years.binary_search(&y0).map_err(|_| Error::MissingYear(y0))?;
    let t1 = series.years.binary_search(&y1).map_err(|_| Error::MissingYear(y1))?;
    let t = series.years.len();
    Ok(series
        .regions
        .iter()
        .enumerate()
        .map(|(ri, r)| (*r, series.values[ri * t + t1] - series.values[ri * t + t0]))
        .collect())
}

/// Universe-aligned lookup from panel regions into the network.
struct NetworkView<'a> {
    net: &'a SocialNetwork,
    universe_to_net: Vec<Option<usize>>,
    net_to_universe: Vec<Option<usize>>,
}

impl<'a> NetworkView<'a> {
    fn new(net: &'a SocialNetwork, universe: &[RegionId]) -> Self {
        let universe_to_net: Vec<Option<usize>> = universe.iter().map(|r| net.index_of(*r)).collect();
        let mut net_to_universe = vec![None; net.regions().len()];
        for (u, n) in universe_to_net.iter().enumerate() {
            if let Some(n) = n {
                net_to_universe[*n] = Some(u);
            }
        }
        NetworkView { net, universe_to_net, net_to_universe }
    }

    /// `(universe index, sci)` for alters of `focal`, self included.
    fn ties(&self, focal: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let entries = match self.universe_to_net[focal] {
            Some(n) => self.net.neighbors(n),
            None => &[],
        };
        entries.iter().filter_map(|&(k, sci)| self.net_to_universe[k as usize].map(|u| (u, sci)))
    }
}

fn social_weight_row(
    view: &NetworkView<'_>,
    populations: &[f64],
    focal: usize,
    universe: &[RegionId],
) -> Result<Vec<f64>> {
    let mut w = vec![0.0; universe.len()];
    let mut total = 0.0;
    for (u, sci) in view.ties(focal) {
        if u == focal {
            continue;
        }
        let v = populations[u] * sci;
        w[u] = v;
        total += v;
    }
    if total <= 0.0 {
        return Err(Error::IsolatedRegion(universe[focal]));
    }
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// Social weights `n_j SCI_ij / sum_{k != i} n_k SCI_ik` over the regions
/// in `populations`, aligned with that list (the focal entry is 0).
pub fn social_weights(net: &SocialNetwork, populations: &[(RegionId, f64)], focal: RegionId) -> Result<Vec<f64>> {
    let universe: Vec<RegionId> = populations.iter().map(|p| p.0).collect();
    let pops: Vec<f64> = populations.iter().map(|p| p.1).collect();
    let fi = universe.iter().position(|r| *r == focal).ok_or(Error::IsolatedRegion(focal))?;
    social_weight_row(&NetworkView::new(net, &universe), &pops, fi, &universe)
}

fn spatial_weight_row(dm: &DistanceMatrix, dm_index: &[usize], focal: usize) -> Result<Vec<f64>> {
    let row = dm.row(dm_index[focal]);
    let mut w = vec![0.0; dm_index.len()];
    let mut total = 0.0;
    for (u, &k) in dm_index.iter().enumerate() {
        if u == focal {
            continue;
        }
        let d = row[k];
        if d <= 0.0 {
            return Err(Error::CoincidentCentroid(dm.regions()[dm_index[focal]], dm.regions()[k]));
        }
        w[u] = 1.0 / d;
        total += w[u];
    }
    if total <= 0.0 {
        return Err(Error::InvalidConfig("spatial weights need at least two regions".into()));
    }
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

fn dm_indices(dm: &DistanceMatrix, universe: &[RegionId]) -> Result<Vec<usize>> {
    universe.iter().map(|r| dm.index_of(*r).ok_or(Error::MissingCentroid(*r))).collect()
}

/// Rates by year then region; `None` where the outcome is unavailable.
fn rate_grid(panel: &PanelDataset, outcome: Outcome) -> Result<Vec<Vec<Option<f64>>>> {
    if outcome == Outcome::AgeAdjusted && panel.rows().iter().all(|r| r.age_adjusted_rate.is_none()) {
        return Err(Error::InvalidConfig("age-adjusted rates have not been computed".into()));
    }
    let (n, t) = (panel.regions().len(), panel.years().len());
    let mut grid = vec![vec![None; n]; t];
    for ri in 0..n {
        for (ti, col) in grid.iter_mut().enumerate() {
            col[ri] = outcome.value(panel.row(ri, ti));
        }
    }
    Ok(grid)
}

fn weighted_mean(weights: &[f64], rates: &[Option<f64>], focal: RegionId, year: i32) -> Result<(f64, bool)> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut missing = false;
    for (w, y) in weights.iter().zip(rates) {
        if *w == 0.0 {
            continue;
        }
        match y {
            Some(y) => {
                num += w * y;
                den += w;
            }
            None => missing = true,
        }
    }
    if den <= 0.0 {
        return Err(Error::AllAltersSuppressed(focal, year));
    }
    Ok((num / den, missing))
}

fn assemble(name: &str, panel: &PanelDataset, per_region: Vec<Vec<(f64, bool)>>) -> Result<ExposureSeries> {
    let renormalized = per_region.iter().flatten().filter(|c| c.1).count();
    let values = per_region.into_iter().flatten().map(|c| c.0).collect();
    let mut s = ExposureSeries::new(name, panel.regions().to_vec(), panel.years().to_vec(), values)?;
    s.renormalized = renormalized;
    if renormalized > 0 {
        log::info!("{name}: renormalized weights over unsuppressed alters in {renormalized} region-years");
    }
    Ok(s)
}

fn proximity_name(social: bool, outcome: Outcome) -> &'static str {
    match (social, outcome) {
        (true, Outcome::Crude) => SOCIAL_PROXIMITY,
        (true, Outcome::AgeAdjusted) => SOCIAL_PROXIMITY_ADJ,
        (false, Outcome::Crude) => SPATIAL_PROXIMITY,
        (false, Outcome::AgeAdjusted) => SPATIAL_PROXIMITY_ADJ,
    }
}

/// Connectedness-and-population weighted average of other regions' rates.
pub fn deaths_in_social_proximity(
    panel: &PanelDataset,
    net: &SocialNetwork,
    outcome: Outcome,
    opts: ExposureOptions,
) -> Result<ExposureSeries> {
    let universe = panel.regions();
    let years = panel.years();
    let grid = rate_grid(panel, outcome)?;
    let view = NetworkView::new(net, universe);
    let pops_in =
        |ti: usize| -> Vec<f64> { (0..universe.len()).map(|ri| panel.row(ri, ti).population as f64).collect() };
    let fixed_pops = pops_in(0);
    let annual_pops: Vec<Vec<f64>> = match opts.weights_base {
        WeightsBase::Fixed => Vec::new(),
        WeightsBase::Annual => (0..years.len()).map(pops_in).collect(),
    };
    let per_region = (0..universe.len())
        .into_par_iter()
        .map(|i| -> Result<Vec<(f64, bool)>> {
            let fixed = match opts.weights_base {
                WeightsBase::Fixed => Some(social_weight_row(&view, &fixed_pops, i, universe)?),
                WeightsBase::Annual => None,
            };
            (0..years.len())
                .map(|ti| {
                    let annual;
                    let w = match &fixed {
                        Some(w) => w,
                        None => {
                            annual = social_weight_row(&view, &annual_pops[ti], i, universe)?;
                            &annual
                        }
                    };
                    weighted_mean(w, &grid[ti], universe[i], years[ti])
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    assemble(proximity_name(true, outcome), panel, per_region)
}

/// Inverse-distance weighted average of other regions' rates.
pub fn deaths_in_spatial_proximity(
    panel: &PanelDataset,
    dm: &DistanceMatrix,
    outcome: Outcome,
) -> Result<ExposureSeries> {
    let universe = panel.regions();
    let years = panel.years();
    let grid = rate_grid(panel, outcome)?;
    let idx = dm_indices(dm, universe)?;
    let per_region = (0..universe.len())
        .into_par_iter()
        .map(|i| -> Result<Vec<(f64, bool)>> {
            let w = spatial_weight_row(dm, &idx, i)?;
            (0..years.len()).map(|ti| weighted_mean(&w, &grid[ti], universe[i], years[ti])).collect()
        })
        .collect::<Result<Vec<_>>>()?;
    assemble(proximity_name(false, outcome), panel, per_region)
}

/// Share of a region's ties (out of `total`) pointing at each other state.
fn policy_share(
    name: &str,
    regions: &[RegionId],
    years: &[i32],
    policy: &PolicyTable,
    out_of_state_mass: Vec<(BTreeMap<StateCode, f64>, f64)>,
) -> Result<ExposureSeries> {
    let mut values = Vec::with_capacity(regions.len() * years.len());
    for (mass, total) in &out_of_state_mass {
        for &y in years {
            let num: f64 = mass.iter().filter(|(s, _)| policy.is_active(**s, y)).map(|(_, m)| *m).sum();
            // the numerator is a partial sum of the total; clamp rounding overshoot
            values.push((num / total).min(1.0));
        }
    }
    ExposureSeries::new(name, regions.to_vec(), years.to_vec(), values)
}

/// Share of a region's connectedness that points at regions in other states
/// where the policy is active.
pub fn erpo_social_exposure(
    net: &SocialNetwork,
    policy: &PolicyTable,
    regions: &[RegionId],
    years: &[i32],
    denominator: Denominator,
) -> Result<ExposureSeries> {
    let mut regions = regions.to_vec();
    regions.sort_unstable();
    let mut years = years.to_vec();
    years.sort_unstable();
    let view = NetworkView::new(net, &regions);
    let mass = (0..regions.len())
        .into_par_iter()
        .map(|i| -> Result<(BTreeMap<StateCode, f64>, f64)> {
            let home = regions[i].state();
            let mut by_state = BTreeMap::new();
            let mut total = 0.0;
            for (u, sci) in view.ties(i) {
                if u == i {
                    if denominator == Denominator::IncludeSelf {
                        total += sci;
                    }
                    continue;
                }
                total += sci;
                let s = regions[u].state();
                if s != home {
                    *by_state.entry(s).or_insert(0.0) += sci;
                }
            }
            if total <= 0.0 {
                return Err(Error::IsolatedRegion(regions[i]));
            }
            Ok((by_state, total))
        })
        .collect::<Result<Vec<_>>>()?;
    policy_share(ERPO_SOCIAL_EXPOSURE, &regions, &years, policy, mass)
}

/// Inverse-distance mass on regions in other states where the policy is
/// active, normalized by the mass over all other regions.
pub fn erpo_spatial_exposure(
    dm: &DistanceMatrix,
    policy: &PolicyTable,
    regions: &[RegionId],
    years: &[i32],
) -> Result<ExposureSeries> {
    let mut regions = regions.to_vec();
    regions.sort_unstable();
    let mut years = years.to_vec();
    years.sort_unstable();
    let idx = dm_indices(dm, &regions)?;
    let mass = (0..regions.len())
        .into_par_iter()
        .map(|i| -> Result<(BTreeMap<StateCode, f64>, f64)> {
            let home = regions[i].state();
            let row = dm.row(idx[i]);
            let mut by_state = BTreeMap::new();
            let mut total = 0.0;
            for (u, &k) in idx.iter().enumerate() {
                if u == i {
                    continue;
                }
                if row[k] <= 0.0 {
                    return Err(Error::CoincidentCentroid(regions[i], regions[u]));
                }
                let inv = 1.0 / row[k];
                total += inv;
                let s = regions[u].state();
                if s != home {
                    *by_state.entry(s).or_insert(0.0) += inv;
                }
            }
            if total <= 0.0 {
                return Err(Error::InvalidConfig("spatial exposure needs at least two regions".into()));
            }
            Ok((by_state, total))
        })
        .collect::<Result<Vec<_>>>()?;
    policy_share(ERPO_SPATIAL_EXPOSURE, &regions, &years, policy, mass)
}

/// Writes `fips, year, name, value, standardized_flag` rows.
pub fn write_series<W: Write>(writer: W, series: &[&ExposureSeries], delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
    let io_err = |e: csv::Error| Error::io("<exposure output>", e.into());
    w.write_record(["fips", "year", "name", "value", "standardized_flag"]).map_err(io_err)?;
    for s in series {
        let flag = if s.standardized { "1" } else { "0" };
        for (r, y, v) in s.iter() {
            w.write_record([r.as_str(), &y.to_string(), &s.name, &tio::fmt_f64(v), flag]).map_err(io_err)?;
        }
    }
    w.flush().map_err(|e| Error::io("<exposure output>", e))?;
    Ok(())
}

/// Reads series written by [`write_series`]. Each named series must cover
/// a complete region-by-year grid.
pub fn parse_series<R: Read>(reader: R, delimiter: u8) -> Result<Vec<ExposureSeries>> {
    let table = DelimitedTable::read(reader, delimiter)?;
    let c_fips = table.column("fips")?;
    let c_year = table.column("year")?;
    let c_name = table.column("name")?;
    let c_value = table.column("value")?;
    let c_flag = table.column("standardized_flag")?;
    let mut order: Vec<String> = Vec::new();
    let mut data: HashMap<String, (BTreeMap<(RegionId, i32), f64>, u8, usize)> = HashMap::new();
    for (row, rec) in table.rows() {
        let region = RegionId::parse(rec.get(c_fips).unwrap_or("")).map_err(|e| Error::parse(row, "fips", e))?;
        let year: i32 = tio::field(rec, c_year, row, "year")?;
        let name = rec.get(c_name).unwrap_or("").to_string();
        if name.is_empty() {
            return Err(Error::parse(row, "name", "empty series name"));
        }
        let value = tio::finite(rec, c_value, row, "value")?;
        let flag: u8 = tio::field(rec, c_flag, row, "standardized_flag")?;
        if flag > 1 {
            return Err(Error::parse(row, "standardized_flag", "expected 0 or 1"));
        }
        let entry = data.entry(name.clone()).or_insert_with(|| {
            order.push(name.clone());
            (BTreeMap::new(), flag, row)
        });
        if entry.1 != flag {
            return Err(Error::parse(row, "standardized_flag", "mixed flags within a series"));
        }
        if entry.0.insert((region, year), value).is_some() {
            return Err(Error::DuplicateKey(region, year));
        }
    }
    let mut out = Vec::new();
    for name in order {
        let (cells, flag, first_row) = data.remove(&name).expect("recorded name");
        let regions: Vec<RegionId> = {
            let mut v: Vec<_> = cells.keys().map(|k| k.0).collect();
            v.dedup();
            v
        };
        let mut years: Vec<i32> = cells.keys().map(|k| k.1).collect();
        years.sort_unstable();
        years.dedup();
        if regions.len() * years.len() != cells.len() {
            return Err(Error::parse(first_row, "name", format!("series `{name}` is not a complete grid")));
        }
        let values = cells.into_values().collect();
        let mut s = ExposureSeries::new(&name, regions, years, values)?;
        s.standardized = flag == 1;
        out.push(s);
    }
    Ok(out)
}

pub fn load_series(path: &Path, delimiter: u8) -> Result<Vec<ExposureSeries>> {
    parse_series(tio::open(path)?, delimiter)
}

/// Writes `fips, delta`.
pub fn write_delta<W: Write>(writer: W, delta: &BTreeMap<RegionId, f64>, delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
    let io_err = |e: csv::Error| Error::io("<delta output>", e.into());
    w.write_record(["fips", "delta"]).map_err(io_err)?;
    for (r, d) in delta {
        w.write_record([r.as_str(), &tio::fmt_f64(*d)]).map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::io("<delta output>", e))?;
    Ok(())
}
