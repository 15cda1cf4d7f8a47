use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::io::{self, DelimitedTable};
use super::RegionId;
use crate::error::{Error, Result};

pub const N_AGE_GROUPS: usize = 18;

/// Labels of the five-year age groups, 0–4 through 85+.
pub const AGE_GROUP_LABELS: [&str; N_AGE_GROUPS] = [
    "0-4", "5-9", "10-14", "15-19", "20-24", "25-29", "30-34", "35-39", "40-44", "45-49", "50-54", "55-59", "60-64",
    "65-69", "70-74", "75-79", "80-84", "85+",
];

/// Deaths and population by age group for one region-year.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgeCells {
    pub deaths: [u64; N_AGE_GROUPS],
    pub population: [u64; N_AGE_GROUPS],
}

impl AgeCells {
    pub fn total_deaths(&self) -> u64 {
        self.deaths.iter().sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgeStratifiedCounts {
    cells: BTreeMap<(RegionId, i32), AgeCells>,
}

impl AgeStratifiedCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, region: RegionId, year: i32, cells: AgeCells) {
        self.cells.insert((region, year), cells);
    }

    pub fn get(&self, region: RegionId, year: i32) -> Option<&AgeCells> {
        self.cells.get(&(region, year))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Reads `fips, year, age_group_index, deaths, population`; every
    /// region-year must list all 18 groups exactly once.
    pub fn parse<R: Read>(reader: R, delimiter: u8) -> Result<Self> {
        let table = DelimitedTable::read(reader, delimiter)?;
        let c_fips = table.column("fips")?;
        let c_year = table.column("year")?;
        let c_age = table.column("age_group_index")?;
        let c_deaths = table.column("deaths")?;
        let c_pop = table.column("population")?;
        let mut partial: BTreeMap<(RegionId, i32), ([Option<(u64, u64)>; N_AGE_GROUPS], usize)> = BTreeMap::new();
        for (row, rec) in table.rows() {
            let region = RegionId::parse(rec.get(c_fips).unwrap_or("")).map_err(|e| Error::parse(row, "fips", e))?;
            let year: i32 = io::field(rec, c_year, row, "year")?;
            let a: usize = io::field(rec, c_age, row, "age_group_index")?;
            if a >= N_AGE_GROUPS {
                return Err(Error::parse(row, "age_group_index", format!("{a} not in 0..18")));
            }
            let d: u64 = io::field(rec, c_deaths, row, "deaths")?;
            let p: u64 = io::field(rec, c_pop, row, "population")?;
            let entry = partial.entry((region, year)).or_insert(([None; N_AGE_GROUPS], row));
            if entry.0[a].replace((d, p)).is_some() {
                return Err(Error::parse(row, "age_group_index", format!("duplicate group {a}")));
            }
        }
        let mut out = AgeStratifiedCounts::new();
        for ((region, year), (groups, first_row)) in partial {
            let mut cells = AgeCells { deaths: [0; N_AGE_GROUPS], population: [0; N_AGE_GROUPS] };
            for (a, g) in groups.iter().enumerate() {
                let (d, p) = g.ok_or_else(|| {
                    Error::parse(first_row, "age_group_index", format!("({region}, {year}) missing group {a}"))
                })?;
                cells.deaths[a] = d;
                cells.population[a] = p;
            }
            out.insert(region, year, cells);
        }
        Ok(out)
    }

    pub fn load(path: &Path, delimiter: u8) -> Result<Self> {
        Self::parse(io::open(path)?, delimiter)
    }

    pub fn write<W: Write>(&self, writer: W, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
        let io_err = |e: csv::Error| Error::io("<age output>", e.into());
        w.write_record(["fips", "year", "age_group_index", "deaths", "population"]).map_err(io_err)?;
        for ((r, y), c) in &self.cells {
            for a in 0..N_AGE_GROUPS {
                w.write_record([
                    r.as_str(),
                    &y.to_string(),
                    &a.to_string(),
                    &c.deaths[a].to_string(),
                    &c.population[a].to_string(),
                ])
                .map_err(io_err)?;
            }
        }
        w.flush().map_err(|e| Error::io("<age output>", e))?;
        Ok(())
    }
}

/// Standard-population weights over the 18 groups, normalized to sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardPopulation {
    /// Weights as supplied, kept so a written file reads back unchanged.
    raw: [f64; N_AGE_GROUPS],
    weights: [f64; N_AGE_GROUPS],
}

impl StandardPopulation {
    pub fn new(raw: [f64; N_AGE_GROUPS]) -> Result<Self> {
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidConfig("standard weights must be finite and nonnegative".into()));
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidConfig("standard weights sum to zero".into()));
        }
        let mut weights = raw;
        for w in &mut weights {
            *w /= total;
        }
        Ok(StandardPopulation { raw, weights })
    }

    /// 2000 US standard population (per million) collapsed to 18 groups.
    pub fn us_2000() -> Self {
        Self::new([
            69_135.0, 72_533.0, 73_032.0, 72_169.0, 66_478.0, 64_529.0, 71_044.0, 80_762.0, 81_851.0, 72_118.0,
            62_716.0, 48_454.0, 38_793.0, 34_264.0, 31_773.0, 26_999.0, 17_842.0, 15_508.0,
        ])
        .expect("reference weights are valid")
    }

    pub fn weights(&self) -> &[f64; N_AGE_GROUPS] {
        &self.weights
    }

    /// Reads `age_group_index, weight`.
    pub fn parse<R: Read>(reader: R, delimiter: u8) -> Result<Self> {
        let table = DelimitedTable::read(reader, delimiter)?;
        let c_age = table.column("age_group_index")?;
        let c_w = table.column("weight")?;
        let mut raw = [None; N_AGE_GROUPS];
        let mut last_row = 1;
        for (row, rec) in table.rows() {
            last_row = row;
            let a: usize = io::field(rec, c_age, row, "age_group_index")?;
            if a >= N_AGE_GROUPS {
                return Err(Error::parse(row, "age_group_index", format!("{a} not in 0..18")));
            }
            let w = io::finite(rec, c_w, row, "weight")?;
            if raw[a].replace(w).is_some() {
                return Err(Error::parse(row, "age_group_index", format!("duplicate group {a}")));
            }
        }
        let mut out = [0.0; N_AGE_GROUPS];
        for (a, w) in raw.iter().enumerate() {
            out[a] = w.ok_or_else(|| Error::parse(last_row, "age_group_index", format!("missing group {a}")))?;
        }
        Self::new(out).map_err(|e| Error::parse(last_row, "weight", e))
    }

    pub fn load(path: &Path, delimiter: u8) -> Result<Self> {
        Self::parse(io::open(path)?, delimiter)
    }

    pub fn write<W: Write>(&self, writer: W, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
        let io_err = |e: csv::Error| Error::io("<standard population output>", e.into());
        w.write_record(["age_group_index", "weight"]).map_err(io_err)?;
        for (a, wt) in self.raw.iter().enumerate() {
            w.write_record([a.to_string(), io::fmt_f64(*wt)]).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::io("<standard population output>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_weights_sum_to_one() {
        let s: f64 = StandardPopulation::us_2000().weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weights_normalized_at_load() {
        let mut text = "age_group_index,weight\n".to_string();
        for a in 0..N_AGE_GROUPS {
            text.push_str(&format!("{a},2\n"));
        }
        let std = StandardPopulation::parse(text.as_bytes(), b',').unwrap();
        assert!(std.weights().iter().all(|w| (w - 1.0 / 18.0).abs() < 1e-15));
    }

    #[test]
    fn missing_group_rejected() {
        let text = "age_group_index,weight\n0,1\n1,1\n";
        assert!(StandardPopulation::parse(text.as_bytes(), b',').is_err());
        let text = "fips,year,age_group_index,deaths,population\n01001,2010,0,1,100\n";
        assert!(AgeStratifiedCounts::parse(text.as_bytes(), b',').is_err());
    }
}
