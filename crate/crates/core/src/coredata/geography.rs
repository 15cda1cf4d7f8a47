use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::io::{self, DelimitedTable};
use super::RegionId;
use crate::error::{Error, Result};

/// Region centroids in degrees.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Geography {
    centroids: BTreeMap<RegionId, (f64, f64)>,
}

impl Geography {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, region: RegionId, lat: f64, lon: f64) -> Result<()> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::InvalidConfig(format!("centroid of {region} out of range: ({lat}, {lon})")));
        }
        self.centroids.insert(region, (lat, lon));
        Ok(())
    }

    pub fn centroid(&self, region: RegionId) -> Result<(f64, f64)> {
        self.centroids.get(&region).copied().ok_or(Error::MissingCentroid(region))
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (RegionId, (f64, f64))> + '_ {
        self.centroids.iter().map(|(r, c)| (*r, *c))
    }

    /// Checks that every region has a centroid and no two share one.
    pub fn validate_for(&self, regions: &[RegionId]) -> Result<()> {
        let mut seen: BTreeMap<(u64, u64), RegionId> = BTreeMap::new();
        for &r in regions {
            let (lat, lon) = self.centroid(r)?;
            let key = ((lat + 0.0).to_bits(), (lon + 0.0).to_bits());
            if let Some(prev) = seen.insert(key, r) {
                return Err(Error::CoincidentCentroid(prev, r));
            }
        }
        Ok(())
    }

    /// Reads `fips, lat, lon`.
    pub fn parse<R: Read>(reader: R, delimiter: u8) -> Result<Self> {
        let table = DelimitedTable::read(reader, delimiter)?;
        let c_fips = table.column("fips")?;
        let c_lat = table.column("lat")?;
        let c_lon = table.column("lon")?;
        let mut geo = Geography::new();
        for (row, rec) in table.rows() {
            let region = RegionId::parse(rec.get(c_fips).unwrap_or("")).map_err(|e| Error::parse(row, "fips", e))?;
            let lat = io::finite(rec, c_lat, row, "lat")?;
            let lon = io::finite(rec, c_lon, row, "lon")?;
            if geo.centroids.contains_key(&region) {
                return Err(Error::parse(row, "fips", format!("duplicate region {region}")));
            }
            geo.insert(region, lat, lon).map_err(|e| Error::parse(row, "lat/lon", e))?;
        }
        Ok(geo)
    }

    pub fn load(path: &Path, delimiter: u8) -> Result<Self> {
        Self::parse(io::open(path)?, delimiter)
    }

    pub fn write<W: Write>(&self, writer: W, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
        let io_err = |e: csv::Error| Error::io("<geography output>", e.into());
        w.write_record(["fips", "lat", "lon"]).map_err(io_err)?;
        for (r, (lat, lon)) in &self.centroids {
            w.write_record([r.as_str(), &io::fmt_f64(*lat), &io::fmt_f64(*lon)]).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::io("<geography output>", e))?;
        Ok(())
    }
}
