use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use super::io::{self, DelimitedTable};
use super::RegionId;
use crate::error::{Error, Result};

/// Symmetric, sparse region-pair connectedness. Absent pairs are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SocialNetwork {
    regions: Vec<RegionId>,
    index: HashMap<RegionId, usize>,
    // neighbor lists sorted by index; may contain the region itself
    adjacency: Vec<Vec<(u32, f64)>>,
}

impl SocialNetwork {
    /// Builds a network from ordered pairs. Zero values are dropped; a pair
    /// given in both directions must carry the same value.
    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (RegionId, RegionId, f64)>,
    {
        let mut index = HashMap::new();
        let mut regions = Vec::new();
        let mut raw = Vec::new();
        for (a, b, sci) in pairs {
            if sci.is_nan() || sci < 0.0 || sci.is_infinite() {
                return Err(Error::NonpositiveSci(a, b));
            }
            for r in [a, b] {
                index.entry(r).or_insert_with(|| {
                    regions.push(r);
                    regions.len() - 1
                });
            }
            raw.push((a, b, sci));
        }
        regions.sort_unstable();
        let index: HashMap<RegionId, usize> = regions.iter().enumerate().map(|(i, r)| (*r, i)).collect();

        // canonical (lo, hi) keys, both directions checked for agreement
        let mut canon: Vec<(u32, u32, f64)> = raw
            .into_iter()
            .map(|(a, b, sci)| {
                let (ia, ib) = (index[&a] as u32, index[&b] as u32);
                (ia.min(ib), ia.max(ib), sci)
            })
            .collect();
        canon.par_sort_unstable_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        let mut deduped: Vec<(u32, u32, f64)> = Vec::with_capacity(canon.len());
        for (lo, hi, sci) in canon {
            match deduped.last() {
                Some(&(l, h, v)) if l == lo && h == hi => {
                    if v != sci {
                        return Err(Error::AsymmetricPair(regions[lo as usize], regions[hi as usize]));
                    }
                }
                _ => deduped.push((lo, hi, sci)),
            }
        }

        let mut adjacency = vec![Vec::new(); regions.len()];
        for (lo, hi, sci) in deduped {
            if sci == 0.0 {
                continue;
            }
            adjacency[lo as usize].push((hi, sci));
            if lo != hi {
                adjacency[hi as usize].push((lo, sci));
            }
        }
        adjacency.par_iter_mut().for_each(|row| row.sort_unstable_by_key(|e| e.0));
        Ok(SocialNetwork { regions, index, adjacency })
    }

    /// Reads the long format `user_loc, fr_loc, scaled_sci`.
    pub fn parse<R: Read>(reader: R, delimiter: u8) -> Result<Self> {
        let table = DelimitedTable::read(reader, delimiter)?;
        let c_user = table.column("user_loc")?;
        let c_fr = table.column("fr_loc")?;
        let c_sci = table.column("scaled_sci")?;
        let mut pairs = Vec::new();
        for (row, rec) in table.rows() {
            let a = RegionId::parse(rec.get(c_user).unwrap_or("")).map_err(|e| Error::parse(row, "user_loc", e))?;
            let b = RegionId::parse(rec.get(c_fr).unwrap_or("")).map_err(|e| Error::parse(row, "fr_loc", e))?;
            let sci: f64 = io::field(rec, c_sci, row, "scaled_sci")?;
            pairs.push((a, b, sci));
        }
        Self::from_pairs(pairs)
    }

    pub fn load(path: &Path, delimiter: u8) -> Result<Self> {
        Self::parse(io::open(path)?, delimiter)
    }

    /// Writes every stored pair in both directions, in region order.
    pub fn write<W: Write>(&self, writer: W, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
        let io_err = |e: csv::Error| Error::io("<sci output>", e.into());
        w.write_record(["user_loc", "fr_loc", "scaled_sci"]).map_err(io_err)?;
        for (i, row) in self.adjacency.iter().enumerate() {
            for &(j, sci) in row {
                w.write_record([self.regions[i].as_str(), self.regions[j as usize].as_str(), &io::fmt_f64(sci)])
                    .map_err(io_err)?;
            }
        }
        w.flush().map_err(|e| Error::io("<sci output>", e))?;
        Ok(())
    }

    pub fn regions(&self) -> &[RegionId] {
        &self.regions
    }

    pub fn index_of(&self, region: RegionId) -> Option<usize> {
        self.index.get(&region).copied()
    }

    /// Sorted `(neighbor index, sci)` entries for the region at `idx`.
    pub fn neighbors(&self, idx: usize) -> &[(u32, f64)] {
        &self.adjacency[idx]
    }

    pub fn lookup(&self, a: RegionId, b: RegionId) -> f64 {
        let (Some(ia), Some(ib)) = (self.index_of(a), self.index_of(b)) else {
            return 0.0;
        };
        let row = &self.adjacency[ia];
        row.binary_search_by_key(&(ib as u32), |e| e.0).map(|k| row[k].1).unwrap_or(0.0)
    }

    pub fn n_entries(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    /// Every stored value multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for row in &mut out.adjacency {
            for e in row.iter_mut() {
                e.1 *= factor;
            }
        }
        out
    }
}
