use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use super::io::{self, DelimitedTable};
use super::RegionId;
use crate::error::{Error, Result};

pub const ELECTION_YEARS: [i32; 4] = [2008, 2012, 2016, 2020];

/// Presidential returns coded 1 for a Republican majority, 0 otherwise.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ElectionTable {
    returns: BTreeMap<RegionId, BTreeMap<i32, u8>>,
}

/// Carried-forward political leaning and the regions that had to be dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct PoliticalLeaning {
    pub values: HashMap<(RegionId, i32), f64>,
    pub dropped: Vec<RegionId>,
}

impl ElectionTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, region: RegionId, year: i32, rep_majority: u8) -> Result<()> {
        if !ELECTION_YEARS.contains(&year) {
            return Err(Error::InvalidConfig(format!("{year} is not an election year")));
        }
        if rep_majority > 1 {
            return Err(Error::InvalidConfig("rep_majority must be 0 or 1".into()));
        }
        self.returns.entry(region).or_default().insert(year, rep_majority);
        Ok(())
    }

    pub fn get(&self, region: RegionId, year: i32) -> Option<u8> {
        self.returns.get(&region)?.get(&year).copied()
    }

    /// Reads `fips, year, rep_majority`.
    pub fn parse<R: Read>(reader: R, delimiter: u8) -> Result<Self> {
        let table = DelimitedTable::read(reader, delimiter)?;
        let c_fips = table.column("fips")?;
        let c_year = table.column("year")?;
        let c_rep = table.column("rep_majority")?;
        let mut out = ElectionTable::new();
        for (row, rec) in table.rows() {
            let region = RegionId::parse(rec.get(c_fips).unwrap_or("")).map_err(|e| Error::parse(row, "fips", e))?;
            let year: i32 = io::field(rec, c_year, row, "year")?;
            let rep: u8 = io::field(rec, c_rep, row, "rep_majority")?;
            if out.get(region, year).is_some() {
                return Err(Error::parse(row, "fips", format!("duplicate ({region}, {year})")));
            }
            out.insert(region, year, rep).map_err(|e| Error::parse(row, "year/rep_majority", e))?;
        }
        Ok(out)
    }

    pub fn load(path: &Path, delimiter: u8) -> Result<Self> {
        Self::parse(io::open(path)?, delimiter)
    }

    pub fn write<W: Write>(&self, writer: W, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
        let io_err = |e: csv::Error| Error::io("<elections output>", e.into());
        w.write_record(["fips", "year", "rep_majority"]).map_err(io_err)?;
        for (r, by_year) in &self.returns {
            for (y, v) in by_year {
                w.write_record([r.as_str(), &y.to_string(), &v.to_string()]).map_err(io_err)?;
            }
        }
        w.flush().map_err(|e| Error::io("<elections output>", e))?;
        Ok(())
    }
}

/// Assigns every (region, year) the return of the latest election at or
/// before that year. Regions without such an election fail in strict mode
/// and are dropped otherwise.
pub fn carry_forward_political(
    elections: &ElectionTable,
    regions: &[RegionId],
    years: &[i32],
    strict: bool,
) -> Result<PoliticalLeaning> {
    let mut values = HashMap::with_capacity(regions.len() * years.len());
    let mut dropped = Vec::new();
    let Some(&first) = years.iter().min() else {
        return Ok(PoliticalLeaning { values, dropped });
    };
    for &region in regions {
        let returns = elections.returns.get(&region);
        let prior = |year: i32| returns.and_then(|m| m.range(..=year).next_back().map(|(_, v)| *v));
        if prior(first).is_none() {
            if strict {
                return Err(Error::NoPriorElection(region, first));
            }
            log::warn!("dropping region {region}: no election return at or before {first}");
            dropped.push(region);
            continue;
        }
        for &y in years {
            // prior(first) exists, so every later year has one too
            values.insert((region, y), prior(y).unwrap() as f64);
        }
    }
    Ok(PoliticalLeaning { values, dropped })
}
