//! Naive enumeration of the exposure measures, written without reference
//! to the production code paths so the two can check each other.

use std::collections::BTreeMap;

use crate::coredata::{Geography, Outcome, PanelDataset, PolicyTable, RegionId, SocialNetwork};
use crate::error::{Error, Result};
use crate::exposure::{
    ExposureSeries, ERPO_SOCIAL_EXPOSURE, ERPO_SPATIAL_EXPOSURE, SOCIAL_PROXIMITY, SOCIAL_PROXIMITY_ADJ,
    SPATIAL_PROXIMITY, SPATIAL_PROXIMITY_ADJ,
};

pub const ORACLE_MAX_REGIONS: usize = 12;

fn great_circle_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let r = 6371.0088;
    let p1 = a.0 * std::f64::consts::PI / 180.0;
    let p2 = b.0 * std::f64::consts::PI / 180.0;
    let dp = p2 - p1;
    let dl = (b.1 - a.1) * std::f64::consts::PI / 180.0;
    let s = (dp / 2.0).sin() * (dp / 2.0).sin() + p1.cos() * p2.cos() * (dl / 2.0).sin() * (dl / 2.0).sin();
    2.0 * r * s.sqrt().min(1.0).asin()
}

/// Social proximity, spatial proximity, policy exposure through ties and
/// policy exposure through distance, in that order.
pub fn brute_force_exposures(
    panel: &PanelDataset,
    net: &SocialNetwork,
    geo: &Geography,
    policy: &PolicyTable,
    outcome: Outcome,
) -> Result<Vec<ExposureSeries>> {
    let regions = panel.regions().to_vec();
    let years = panel.years().to_vec();
    let n = regions.len();
    if n > ORACLE_MAX_REGIONS {
        return Err(Error::OracleScaleExceeded(n));
    }
    let rate = |i: usize, t: usize| outcome.value(panel.row(i, t));
    let pop0 = |j: usize| panel.row(j, 0).population as f64;
    let mut coords = Vec::new();
    for r in &regions {
        coords.push(geo.centroid(*r)?);
    }

    let mut social = Vec::new();
    let mut spatial = Vec::new();
    let mut e_soc = Vec::new();
    let mut e_sp = Vec::new();
    for i in 0..n {
        for t in 0..years.len() {
            // social proximity
            let mut denom = 0.0;
            for k in 0..n {
                if k != i {
                    denom += pop0(k) * net.lookup(regions[i], regions[k]);
                }
            }
            if denom == 0.0 {
                return Err(Error::IsolatedRegion(regions[i]));
            }
            let mut num = 0.0;
            let mut used = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let w = pop0(j) * net.lookup(regions[i], regions[j]) / denom;
                if w > 0.0 {
                    if let Some(y) = rate(j, t) {
                        num += w * y;
                        used += w;
                    }
                }
            }
            if used == 0.0 {
                return Err(Error::AllAltersSuppressed(regions[i], years[t]));
            }
            social.push(num / used);

            // spatial proximity
            let mut inv_total = 0.0;
            for k in 0..n {
                if k != i {
                    inv_total += 1.0 / great_circle_km(coords[i], coords[k]);
                }
            }
            let mut num = 0.0;
            let mut used = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let a = (1.0 / great_circle_km(coords[i], coords[j])) / inv_total;
                if let Some(y) = rate(j, t) {
                    num += a * y;
                    used += a;
                }
            }
            if used == 0.0 {
                return Err(Error::AllAltersSuppressed(regions[i], years[t]));
            }
            spatial.push(num / used);

            // policy exposure through ties and through distance
            let mut sci_total = 0.0;
            let mut sci_active = 0.0;
            let mut inv_active = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let sci = net.lookup(regions[i], regions[j]);
                sci_total += sci;
                let out_of_state = regions[j].state() != regions[i].state();
                let active = policy.adoption_year(regions[j].state()).is_some_and(|first| years[t] >= first);
                if out_of_state && active {
                    sci_active += sci;
                    inv_active += 1.0 / great_circle_km(coords[i], coords[j]);
                }
            }
            if sci_total == 0.0 {
                return Err(Error::IsolatedRegion(regions[i]));
            }
            e_soc.push(sci_active / sci_total);
            e_sp.push(inv_active / inv_total);
        }
    }
    let (s_name, d_name) = match outcome {
        Outcome::Crude => (SOCIAL_PROXIMITY, SPATIAL_PROXIMITY),
        Outcome::AgeAdjusted => (SOCIAL_PROXIMITY_ADJ, SPATIAL_PROXIMITY_ADJ),
    };
    Ok(vec![
        ExposureSeries::new(s_name, regions.clone(), years.clone(), social)?,
        ExposureSeries::new(d_name, regions.clone(), years.clone(), spatial)?,
        ExposureSeries::new(ERPO_SOCIAL_EXPOSURE, regions.clone(), years.clone(), e_soc)?,
        ExposureSeries::new(ERPO_SPATIAL_EXPOSURE, regions, years, e_sp)?,
    ])
}

/// Per-region change between two years of the pooled z-scores of `series`.
pub fn brute_force_delta(series: &ExposureSeries, y0: i32, y1: i32) -> Result<BTreeMap<RegionId, f64>> {
    let all: Vec<(RegionId, i32, f64)> = series.iter().collect();
    let n = all.len() as f64;
    let mut sum = 0.0;
    for (_, _, v) in &all {
        sum += v;
    }
    let mean = sum / n;
    let mut ss = 0.0;
    for (_, _, v) in &all {
        ss += (v - mean) * (v - mean);
    }
    let sd = (ss / n).sqrt();
    if sd == 0.0 {
        return Err(Error::ZeroVariance(series.name.clone()));
    }
    let mut out = BTreeMap::new();
    for r in series.regions() {
        let mut a = None;
        let mut b = None;
        for (rr, y, v) in &all {
            if rr == r && *y == y0 {
                a = Some((v - mean) / sd);
            }
            if rr == r && *y == y1 {
                b = Some((v - mean) / sd);
            }
        }
        let a = a.ok_or(Error::MissingYear(y0))?;
        let b = b.ok_or(Error::MissingYear(y1))?;
        out.insert(*r, b - a);
    }
    Ok(out)
}
