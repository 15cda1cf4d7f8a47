use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::io::{self, DelimitedTable};
use super::RegionId;
use crate::agestd::AdjustedRate;
use crate::error::{Error, Result};

pub const POP_DENSITY: &str = "pop_density";
pub const PCT_AGE_0_17: &str = "pct_age_0_17";
pub const PCT_AGE_18_44: &str = "pct_age_18_44";
pub const PCT_AGE_45_64: &str = "pct_age_45_64";
pub const PCT_ASIAN: &str = "pct_asian";
pub const PCT_BLACK: &str = "pct_black";
pub const PCT_OTHER: &str = "pct_other";
pub const PCT_HISPANIC: &str = "pct_hispanic";
pub const MEDIAN_INCOME: &str = "median_income";
pub const PCT_LIMITED_ENGLISH: &str = "pct_limited_english";
pub const PCT_UNEMPLOYED: &str = "pct_unemployed";
pub const PCT_LESS_HS: &str = "pct_less_hs";
pub const REP_MAJORITY: &str = "rep_majority";

/// The thirteen county covariates, in table order.
pub const DEFAULT_COVARIATES: [&str; 13] = [
    POP_DENSITY,
    PCT_AGE_0_17,
    PCT_AGE_18_44,
    PCT_AGE_45_64,
    PCT_ASIAN,
    PCT_BLACK,
    PCT_OTHER,
    PCT_HISPANIC,
    MEDIAN_INCOME,
    PCT_LIMITED_ENGLISH,
    PCT_UNEMPLOYED,
    PCT_LESS_HS,
    REP_MAJORITY,
];

pub const AGE_STRUCTURE_COVARIATES: [&str; 3] = [PCT_AGE_0_17, PCT_AGE_18_44, PCT_AGE_45_64];

/// Which mortality rate a computation reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Crude,
    AgeAdjusted,
}

impl Outcome {
    /// The row's rate, or `None` when the adjusted rate is suppressed or
    /// was never computed.
    pub fn value(self, row: &PanelRow) -> Option<f64> {
        match self {
            Outcome::Crude => Some(row.crude_rate),
            Outcome::AgeAdjusted => row.age_adjusted_rate.and_then(|r| r.value),
        }
    }
}

/// Deaths per 100,000 persons.
pub fn crude_rate(deaths: u64, population: u64) -> Result<f64> {
    if population == 0 {
        return Err(Error::ZeroPopulation);
    }
    Ok(100_000.0 * deaths as f64 / population as f64)
}

/// Column names and validation rules for the panel file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PanelSchema {
    pub fips: String,
    pub year: String,
    pub deaths: String,
    pub population: String,
    pub erpo: String,
    pub covariates: Vec<String>,
    /// Subset of `covariates` that must lie in [0, 100].
    pub percent_covariates: Vec<String>,
    /// Subset of `covariates` that must be 0 or 1.
    pub binary_covariates: Vec<String>,
    #[serde(with = "delimiter_char")]
    pub delimiter: u8,
    pub strict: bool,
}

impl Default for PanelSchema {
    fn default() -> Self {
        let covariates: Vec<String> = DEFAULT_COVARIATES.iter().map(|s| s.to_string()).collect();
        let percent_covariates = covariates.iter().filter(|c| c.starts_with("pct_")).cloned().collect();
        PanelSchema {
            fips: "fips".into(),
            year: "year".into(),
            deaths: "deaths".into(),
            population: "population".into(),
            erpo: "erpo".into(),
            covariates,
            percent_covariates,
            binary_covariates: vec![REP_MAJORITY.to_string()],
            delimiter: b',',
            strict: false,
        }
    }
}

impl PanelSchema {
    /// Same schema without a given covariate column (e.g. when political
    /// leaning comes from the elections table instead).
    pub fn without_covariate(mut self, name: &str) -> Self {
        self.covariates.retain(|c| c != name);
        self.percent_covariates.retain(|c| c != name);
        self.binary_covariates.retain(|c| c != name);
        self
    }
}

pub mod delimiter_char {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &u8, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&(*d as char).to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u8, D::Error> {
        let s = String::deserialize(d)?;
        let s = if s == "\\t" { "\t".to_string() } else { s };
        match s.as_bytes() {
            [b] if b.is_ascii() => Ok(*b),
            _ => Err(serde::de::Error::custom("delimiter must be a single ASCII character")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub region: RegionId,
    pub year: i32,
    pub deaths: u64,
    pub population: u64,
    pub crude_rate: f64,
    pub age_adjusted_rate: Option<AdjustedRate>,
    pub covariates: Vec<f64>,
    pub erpo: u8,
}

/// A row or region removed during validation.
#[derive(Debug, Clone, PartialEq)]
pub struct DroppedRow {
    pub line: Option<usize>,
    pub region: Option<RegionId>,
    pub reason: String,
}

/// Balanced county-year panel, stored region-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    covariate_names: Vec<String>,
    regions: Vec<RegionId>,
    years: Vec<i32>,
    rows: Vec<PanelRow>,
}

impl PanelDataset {
    /// Validates uniqueness and balances the panel. In strict mode an
    /// incomplete region is an error; otherwise it is dropped and reported.
    pub fn from_rows(
        covariate_names: Vec<String>,
        rows: Vec<PanelRow>,
        strict: bool,
    ) -> Result<(Self, Vec<DroppedRow>)> {
        let mut by_key: BTreeMap<(RegionId, i32), PanelRow> = BTreeMap::new();
        for row in rows {
            if row.covariates.len() != covariate_names.len() {
                return Err(Error::InvalidConfig(format!(
                    "row ({}, {}) has {} covariates, expected {}",
                    row.region,
                    row.year,
                    row.covariates.len(),
                    covariate_names.len()
                )));
            }
            let key = (row.region, row.year);
            if by_key.insert(key, row).is_some() {
                return Err(Error::DuplicateKey(key.0, key.1));
            }
        }
        if by_key.is_empty() {
            return Err(Error::Empty("panel has no valid rows".into()));
        }
        let years: Vec<i32> = by_key.keys().map(|k| k.1).collect::<BTreeSet<_>>().into_iter().collect();
        let mut per_region: BTreeMap<RegionId, usize> = BTreeMap::new();
        for (r, _) in by_key.keys() {
            *per_region.entry(*r).or_default() += 1;
        }
        let mut drops = Vec::new();
        let mut regions = Vec::new();
        for (r, n) in per_region {
            if n == years.len() {
                regions.push(r);
            } else if strict {
                return Err(Error::UnbalancedRegion(r));
            } else {
                log::warn!("dropping region {r}: observed in {n} of {} years", years.len());
                drops.push(DroppedRow {
                    line: None,
                    region: Some(r),
                    reason: format!("unbalanced: observed in {n} of {} years", years.len()),
                });
            }
        }
        if regions.is_empty() {
            return Err(Error::Empty("no region is observed in every year".into()));
        }
        let keep: BTreeSet<RegionId> = regions.iter().copied().collect();
        let rows = by_key.into_values().filter(|r| keep.contains(&r.region)).collect();
        Ok((PanelDataset { covariate_names, regions, years, rows }, drops))
    }

    pub fn parse<R: Read>(reader: R, schema: &PanelSchema) -> Result<(Self, Vec<DroppedRow>)> {
        let table = DelimitedTable::read(reader, schema.delimiter)?;
        let c_fips = table.column(&schema.fips)?;
        let c_year = table.column(&schema.year)?;
        let c_deaths = table.column(&schema.deaths)?;
        let c_pop = table.column(&schema.population)?;
        let c_erpo = table.column(&schema.erpo)?;
        let c_cov = schema.covariates.iter().map(|c| table.column(c)).collect::<Result<Vec<_>>>()?;
        let is_pct: Vec<bool> = schema.covariates.iter().map(|c| schema.percent_covariates.contains(c)).collect();
        let is_bin: Vec<bool> = schema.covariates.iter().map(|c| schema.binary_covariates.contains(c)).collect();

        let mut rows = Vec::new();
        let mut drops = Vec::new();
        for (line, rec) in table.rows() {
            let parsed = (|| -> Result<PanelRow> {
                let region =
                    RegionId::parse(rec.get(c_fips).unwrap_or("")).map_err(|e| Error::parse(line, &schema.fips, e))?;
                let year: i32 = io::field(rec, c_year, line, &schema.year)?;
                let deaths: u64 = io::field(rec, c_deaths, line, &schema.deaths)?;
                let population: u64 = io::field(rec, c_pop, line, &schema.population)?;
                if population == 0 {
                    return Err(Error::parse(line, &schema.population, "population must be positive"));
                }
                let erpo: u8 = io::field(rec, c_erpo, line, &schema.erpo)?;
                if erpo > 1 {
                    return Err(Error::parse(line, &schema.erpo, "expected 0 or 1"));
                }
                let mut covariates = Vec::with_capacity(c_cov.len());
                for (k, &col) in c_cov.iter().enumerate() {
                    let name = &schema.covariates[k];
                    let v = io::finite(rec, col, line, name)?;
                    if is_pct[k] && !(0.0..=100.0).contains(&v) {
                        return Err(Error::parse(line, name, format!("{v} outside [0, 100]")));
                    }
                    if is_bin[k] && v != 0.0 && v != 1.0 {
                        return Err(Error::parse(line, name, "expected 0 or 1"));
                    }
                    covariates.push(v);
                }
                Ok(PanelRow {
                    region,
                    year,
                    deaths,
                    population,
                    crude_rate: crude_rate(deaths, population)?,
                    age_adjusted_rate: None,
                    covariates,
                    erpo,
                })
            })();
            match parsed {
                Ok(row) => rows.push(row),
                Err(e) if !schema.strict => {
                    log::warn!("dropping panel line {line}: {e}");
                    drops.push(DroppedRow {
                        line: Some(line),
                        region: RegionId::parse(rec.get(c_fips).unwrap_or("")).ok(),
                        reason: e.to_string(),
                    });
                }
                Err(e) => return Err(e),
            }
        }
        let (panel, mut balance_drops) = PanelDataset::from_rows(schema.covariates.clone(), rows, schema.strict)?;
        drops.append(&mut balance_drops);
        Ok((panel, drops))
    }

    pub fn load(path: &Path, schema: &PanelSchema) -> Result<(Self, Vec<DroppedRow>)> {
        Self::parse(io::open(path)?, schema)
    }

    /// Writes the panel with the default column names for
    /// region, year, deaths, population and erpo.
    pub fn write<W: Write>(&self, writer: W, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
        let io_err = |e: csv::Error| Error::io("<panel output>", e.into());
        let mut header = vec!["fips", "year", "deaths", "population"];
        header.extend(self.covariate_names.iter().map(String::as_str));
        header.push("erpo");
        w.write_record(&header).map_err(io_err)?;
        for row in &self.rows {
            let mut rec =
                vec![row.region.to_string(), row.year.to_string(), row.deaths.to_string(), row.population.to_string()];
            rec.extend(row.covariates.iter().map(|v| io::fmt_f64(*v)));
            rec.push(row.erpo.to_string());
            w.write_record(&rec).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::io("<panel output>", e))?;
        Ok(())
    }

    pub fn regions(&self) -> &[RegionId] {
        &self.regions
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn rows(&self) -> &[PanelRow] {
        &self.rows
    }

    pub(crate) fn rows_mut(&mut self) -> &mut [PanelRow] {
        &mut self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|c| c == name)
    }

    pub fn region_index(&self, region: RegionId) -> Option<usize> {
        self.regions.binary_search(&region).ok()
    }

    pub fn year_index(&self, year: i32) -> Option<usize> {
        self.years.binary_search(&year).ok()
    }

    /// Row for the region at `region_idx` in the year at `year_idx`.
    pub fn row(&self, region_idx: usize, year_idx: usize) -> &PanelRow {
        &self.rows[region_idx * self.years.len() + year_idx]
    }

    pub fn get(&self, region: RegionId, year: i32) -> Option<&PanelRow> {
        Some(self.row(self.region_index(region)?, self.year_index(year)?))
    }

    /// Adds or replaces a covariate column.
    pub fn set_covariate(&mut self, name: &str, values: &HashMap<(RegionId, i32), f64>) -> Result<()> {
        let idx = match self.covariate_index(name) {
            Some(i) => i,
            None => {
                self.covariate_names.push(name.to_string());
                for row in &mut self.rows {
                    row.covariates.push(f64::NAN);
                }
                self.covariate_names.len() - 1
            }
        };
        for row in &mut self.rows {
            let v = values
                .get(&(row.region, row.year))
                .ok_or_else(|| Error::MissingExposure(name.to_string(), row.region, row.year))?;
            row.covariates[idx] = *v;
        }
        Ok(())
    }

    /// Removes a covariate column if present.
    pub fn drop_covariate(&mut self, name: &str) {
        if let Some(i) = self.covariate_index(name) {
            self.covariate_names.remove(i);
            for row in &mut self.rows {
                row.covariates.remove(i);
            }
        }
    }

    /// Keeps only the listed regions.
    pub fn retain_regions(&mut self, keep: &BTreeSet<RegionId>) {
        self.regions.retain(|r| keep.contains(r));
        self.rows.retain(|r| keep.contains(&r.region));
    }
}
