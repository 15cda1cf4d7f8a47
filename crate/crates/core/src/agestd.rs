//! Direct age standardization with small-count suppression.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::coredata::{AgeCells, AgeStratifiedCounts, PanelDataset, RegionId, StandardPopulation};
use crate::error::{Error, Result};

/// Cells with fewer deaths than this are suppressed.
pub const SUPPRESSION_THRESHOLD: u64 = 10;

/// Age-adjusted rate per 100,000; `value` is `None` when suppressed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjustedRate {
    pub value: Option<f64>,
    pub total_deaths: u64,
}

impl AdjustedRate {
    pub fn is_suppressed(&self) -> bool {
        self.value.is_none()
    }
}

/// `100,000 * sum_a w_a d_a / p_a`. Empty strata (no deaths, no population)
/// contribute zero.
pub fn age_adjusted_rate(cells: &AgeCells, std: &StandardPopulation) -> Result<AdjustedRate> {
    let mut sum = 0.0;
    for (a, w) in std.weights().iter().enumerate() {
        let (d, p) = (cells.deaths[a], cells.population[a]);
        if p == 0 {
            if d > 0 {
                return Err(Error::ZeroStratumPopulation(a));
            }
            continue;
        }
        sum += w * d as f64 / p as f64;
    }
    let total_deaths = cells.total_deaths();
    let value = (total_deaths >= SUPPRESSION_THRESHOLD).then_some(100_000.0 * sum);
    Ok(AdjustedRate { value, total_deaths })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuppressionLog {
    pub suppressed: Vec<(RegionId, i32, u64)>,
    pub n_cells: usize,
}

impl SuppressionLog {
    pub fn share(&self) -> f64 {
        if self.n_cells == 0 {
            0.0
        } else {
            self.suppressed.len() as f64 / self.n_cells as f64
        }
    }

    /// Writes `fips, year, total_deaths`.
    pub fn write<W: Write>(&self, writer: W, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
        let io_err = |e: csv::Error| Error::io("<suppression log>", e.into());
        w.write_record(["fips", "year", "total_deaths"]).map_err(io_err)?;
        for (r, y, d) in &self.suppressed {
            w.write_record([r.as_str(), &y.to_string(), &d.to_string()]).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::io("<suppression log>", e))?;
        Ok(())
    }
}

/// Fills in the age-adjusted rate of every panel row.
pub fn build_age_adjusted_panel(
    panel: &PanelDataset,
    age: &AgeStratifiedCounts,
    std: &StandardPopulation,
) -> Result<(PanelDataset, SuppressionLog)> {
    let mut out = panel.clone();
    let mut log = SuppressionLog { suppressed: Vec::new(), n_cells: panel.len() };
    for row in out.rows_mut() {
        let cells = age.get(row.region, row.year).ok_or(Error::MissingAgeData(row.region, row.year))?;
        if cells.total_deaths() != row.deaths {
            return Err(Error::AgeDeathMismatch(row.region, row.year, cells.total_deaths(), row.deaths));
        }
        let rate = age_adjusted_rate(cells, std)?;
        if rate.is_suppressed() {
            log.suppressed.push((row.region, row.year, rate.total_deaths));
        }
        row.age_adjusted_rate = Some(rate);
    }
    if !log.suppressed.is_empty() {
        log::warn!(
            "{} of {} region-years ({:.2}%) suppressed in age-adjusted rates",
            log.suppressed.len(),
            log.n_cells,
            100.0 * log.share()
        );
    }
    Ok((out, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coredata::N_AGE_GROUPS;
    use proptest::prelude::*;

    fn cells(deaths: [u64; N_AGE_GROUPS], population: [u64; N_AGE_GROUPS]) -> AgeCells {
        AgeCells { deaths, population }
    }

    #[test]
    fn uniform_rate_is_returned_exactly() {
        // 20 per 100,000 in every stratum
        let pop = [50_000u64; N_AGE_GROUPS];
        let deaths = [10u64; N_AGE_GROUPS];
        let r = age_adjusted_rate(&cells(deaths, pop), &StandardPopulation::us_2000()).unwrap();
        assert!((r.value.unwrap() - 20.0).abs() < 1e-10);
    }

    #[test]
    fn suppression_boundary() {
        let pop = [10_000u64; N_AGE_GROUPS];
        let mut d = [0u64; N_AGE_GROUPS];
        d[5] = 9;
        let std = StandardPopulation::us_2000();
        let r = age_adjusted_rate(&cells(d, pop), &std).unwrap();
        assert!(r.is_suppressed());
        assert_eq!(r.total_deaths, 9);
        d[6] = 1;
        let r = age_adjusted_rate(&cells(d, pop), &std).unwrap();
        assert!(!r.is_suppressed());
        assert_eq!(r.total_deaths, 10);
    }

    #[test]
    fn two_strata_hand_example() {
        let mut raw = [0.0; N_AGE_GROUPS];
        raw[0] = 0.6;
        raw[1] = 0.4;
        let std = StandardPopulation::new(raw).unwrap();
        let mut pop = [1_000u64; N_AGE_GROUPS];
        let mut d = [0u64; N_AGE_GROUPS];
        // 10 and 20 per 100,000
        pop[0] = 100_000;
        d[0] = 10;
        pop[1] = 100_000;
        d[1] = 20;
        let r = age_adjusted_rate(&cells(d, pop), &std).unwrap();
        assert!((r.value.unwrap() - 14.0).abs() < 1e-12);
    }

    #[test]
    fn empty_stratum_contributes_zero() {
        let mut pop = [1_000u64; N_AGE_GROUPS];
        pop[17] = 0;
        let d = [1u64; N_AGE_GROUPS];
        let mut d2 = d;
        d2[17] = 0;
        assert!(matches!(
            age_adjusted_rate(&cells(d, pop), &StandardPopulation::us_2000()),
            Err(Error::ZeroStratumPopulation(17))
        ));
        assert!(age_adjusted_rate(&cells(d2, pop), &StandardPopulation::us_2000()).is_ok());
    }

    proptest! {
        #[test]
        fn bounded_by_stratum_rates(
            deaths in prop::array::uniform18(0u64..40),
            pops in prop::array::uniform18(1u64..200_000),
        ) {
            let std = StandardPopulation::us_2000();
            let r = age_adjusted_rate(&cells(deaths, pops), &std).unwrap();
            if let Some(v) = r.value {
                let rates: Vec<f64> = (0..N_AGE_GROUPS)
                    .map(|a| 100_000.0 * deaths[a] as f64 / pops[a] as f64)
                    .collect();
                let lo = rates.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            }
        }

        #[test]
        fn permuting_strata_with_weights(
            deaths in prop::array::uniform18(0u64..40),
            pops in prop::array::uniform18(1u64..200_000),
            shift in 0usize..N_AGE_GROUPS,
        ) {
            let base = StandardPopulation::us_2000();
            let w = *base.weights();
            let mut pw = [0.0; N_AGE_GROUPS];
            let mut pd = [0u64; N_AGE_GROUPS];
            let mut pp = [0u64; N_AGE_GROUPS];
            for a in 0..N_AGE_GROUPS {
                let b = (a + shift) % N_AGE_GROUPS;
                pw[b] = w[a];
                pd[b] = deaths[a];
                pp[b] = pops[a];
            }
            let r1 = age_adjusted_rate(&cells(deaths, pops), &base).unwrap();
            let r2 = age_adjusted_rate(&cells(pd, pp), &StandardPopulation::new(pw).unwrap()).unwrap();
            match (r1.value, r2.value) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0)),
                (None, None) => {}
                _ => prop_assert!(false),
            }
        }
    }
}
