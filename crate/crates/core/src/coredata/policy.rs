use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use super::io::{self, DelimitedTable};
use super::{RegionId, StateCode};
use crate::error::{Error, Result};

/// First year each state's policy is active. Adoption is absorbing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolicyTable {
    adoption: BTreeMap<StateCode, i32>,
}

impl PolicyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn adopt(&mut self, state: StateCode, first_year: i32) {
        self.adoption.insert(state, first_year);
    }

    pub fn adoption_year(&self, state: StateCode) -> Option<i32> {
        self.adoption.get(&state).copied()
    }

    pub fn is_active(&self, state: StateCode, year: i32) -> bool {
        self.adoption.get(&state).is_some_and(|&first| year >= first)
    }

    pub fn iter(&self) -> impl Iterator<Item = (StateCode, i32)> + '_ {
        self.adoption.iter().map(|(s, y)| (*s, *y))
    }

    /// Reads `state, first_year`; an empty `first_year` means never adopted.
    pub fn parse<R: Read>(reader: R, delimiter: u8) -> Result<Self> {
        let table = DelimitedTable::read(reader, delimiter)?;
        let c_state = table.column("state")?;
        let c_year = table.column("first_year")?;
        let mut out = PolicyTable::new();
        let mut seen = BTreeSet::new();
        for (row, rec) in table.rows() {
            let state = StateCode::parse(rec.get(c_state).unwrap_or("")).map_err(|e| Error::parse(row, "state", e))?;
            if !seen.insert(state) {
                return Err(Error::parse(row, "state", format!("duplicate state {state}")));
            }
            if rec.get(c_year).unwrap_or("").is_empty() {
                continue;
            }
            let year: i32 = io::field(rec, c_year, row, "first_year")?;
            out.adopt(state, year);
        }
        Ok(out)
    }

    pub fn load(path: &Path, delimiter: u8) -> Result<Self> {
        Self::parse(io::open(path)?, delimiter)
    }

    /// Writes adopting states, plus `never` states with an empty year.
    pub fn write<W: Write>(&self, writer: W, delimiter: u8, never: &[StateCode]) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
        let io_err = |e: csv::Error| Error::io("<policy output>", e.into());
        w.write_record(["state", "first_year"]).map_err(io_err)?;
        let mut all: BTreeMap<StateCode, Option<i32>> = never.iter().map(|s| (*s, None)).collect();
        for (s, y) in &self.adoption {
            all.insert(*s, Some(*y));
        }
        for (s, y) in all {
            let y = y.map(|y| y.to_string()).unwrap_or_default();
            w.write_record([s.as_str(), y.as_str()]).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::io("<policy output>", e))?;
        Ok(())
    }

    /// Region-level indicator for every (region, year) pair.
    pub fn indicator_map(&self, regions: &[RegionId], years: &[i32]) -> HashMap<(RegionId, i32), u8> {
        let mut out = HashMap::with_capacity(regions.len() * years.len());
        for &r in regions {
            for &y in years {
                out.insert((r, y), self.is_active(r.state(), y) as u8);
            }
        }
        out
    }
}
