//! Great-circle distances and inverse-distance weights.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::coredata::io::{self as tio, DelimitedTable};
use crate::coredata::{Geography, RegionId};
use crate::error::{Error, Result};

/// IUGG mean Earth radius.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Haversine distance in kilometres between two `(lat, lon)` points in degrees.
pub fn haversine(a: (f64, f64), b: (f64, f64)) -> f64 {
    haversine_with_radius(a, b, EARTH_RADIUS_KM)
}

pub fn haversine_with_radius(a: (f64, f64), b: (f64, f64), radius_km: f64) -> f64 {
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * radius_km * h.sqrt().min(1.0).asin()
}

/// Inverse-distance weights from `focal` to each member of `universe`,
/// normalized to sum to one. The focal region, if listed, gets weight 0.
pub fn spatial_weights(geo: &Geography, focal: RegionId, universe: &[RegionId]) -> Result<Vec<f64>> {
    let origin = geo.centroid(focal)?;
    let mut inv = Vec::with_capacity(universe.len());
    for &j in universe {
        if j == focal {
            inv.push(0.0);
            continue;
        }
        let d = haversine(origin, geo.centroid(j)?);
        if d == 0.0 {
            return Err(Error::CoincidentCentroid(focal, j));
        }
        inv.push(1.0 / d);
    }
    let total: f64 = inv.iter().sum();
    if total == 0.0 {
        return Err(Error::InvalidConfig(format!("{focal} has no other region in the universe")));
    }
    Ok(inv.into_iter().map(|w| w / total).collect())
}

/// Dense symmetric great-circle distances in kilometres.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    regions: Vec<RegionId>,
    index: HashMap<RegionId, usize>,
    radius_km: f64,
    d: Vec<f64>,
}

impl DistanceMatrix {
    pub fn build(geo: &Geography, regions: &[RegionId]) -> Result<Self> {
        Self::build_with_radius(geo, regions, EARTH_RADIUS_KM)
    }

    pub fn build_with_radius(geo: &Geography, regions: &[RegionId], radius_km: f64) -> Result<Self> {
        geo.validate_for(regions)?;
        let coords: Vec<(f64, f64)> = regions.iter().map(|r| geo.centroid(*r)).collect::<Result<_>>()?;
        let n = regions.len();
        let mut d = vec![0.0; n * n];
        d.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
            for (j, cell) in row.iter_mut().enumerate() {
                // evaluate with the lower index first so d[i][j] == d[j][i] bitwise
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                *cell = if i == j { 0.0 } else { haversine_with_radius(coords[a], coords[b], radius_km) };
            }
        });
        for i in 0..n {
            for j in (i + 1)..n {
                if d[i * n + j] <= 0.0 {
                    return Err(Error::CoincidentCentroid(regions[i], regions[j]));
                }
            }
        }
        Ok(Self::from_parts(regions.to_vec(), radius_km, d))
    }

    fn from_parts(regions: Vec<RegionId>, radius_km: f64, d: Vec<f64>) -> Self {
        let index = regions.iter().enumerate().map(|(i, r)| (*r, i)).collect();
        DistanceMatrix { regions, index, radius_km, d }
    }

    pub fn regions(&self) -> &[RegionId] {
        &self.regions
    }

    pub fn radius_km(&self) -> f64 {
        self.radius_km
    }

    pub fn index_of(&self, region: RegionId) -> Option<usize> {
        self.index.get(&region).copied()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.regions.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.regions.len();
        &self.d[i * n..(i + 1) * n]
    }

    /// Every distance multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.d.iter_mut().for_each(|v| *v *= factor);
        out.radius_km *= factor;
        out
    }

    /// Cache format: a `# radius_km=<r>` line, then a delimited square
    /// table whose header is `fips` followed by the region codes.
    pub fn write<W: Write>(&self, mut writer: W, delimiter: u8) -> Result<()> {
        let err = |e: std::io::Error| Error::io("<distance cache>", e);
        writeln!(writer, "# radius_km={}", tio::fmt_f64(self.radius_km)).map_err(err)?;
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
        let mut header = vec!["fips".to_string()];
        header.extend(self.regions.iter().map(|r| r.to_string()));
        w.write_record(&header).map_err(|e| err(e.into()))?;
        for (i, r) in self.regions.iter().enumerate() {
            let mut rec = vec![r.to_string()];
            rec.extend(self.row(i).iter().map(|v| tio::fmt_f64(*v)));
            w.write_record(&rec).map_err(|e| err(e.into()))?;
        }
        w.flush().map_err(err)?;
        Ok(())
    }

    pub fn parse<R: Read>(reader: R, delimiter: u8) -> Result<Self> {
        let mut reader = BufReader::new(reader);
        let mut first = String::new();
        reader.read_line(&mut first).map_err(|e| Error::io("<distance cache>", e))?;
        let radius_km: f64 = first
            .trim()
            .strip_prefix("# radius_km=")
            .ok_or_else(|| Error::parse(1, "radius_km", "missing `# radius_km=` line"))?
            .parse()
            .map_err(|e| Error::parse(1, "radius_km", e))?;
        if !(radius_km.is_finite() && radius_km > 0.0) {
            return Err(Error::parse(1, "radius_km", "must be positive"));
        }
        let table = DelimitedTable::read(reader, delimiter)?;
        let c_fips = table.column("fips")?;
        if c_fips != 0 {
            return Err(Error::parse(2, "fips", "first column must be `fips`"));
        }
        let mut regions = Vec::new();
        let mut d = Vec::new();
        for (row, rec) in table.rows() {
            let line = row + 1;
            let r = RegionId::parse(rec.get(0).unwrap_or("")).map_err(|e| Error::parse(line, "fips", e))?;
            regions.push(r);
            for k in 1..rec.len() {
                d.push(tio::finite(rec, k, line, "distance")?);
            }
        }
        let n = regions.len();
        if d.len() != n * n {
            return Err(Error::parse(2, "fips", format!("expected a {n}x{n} matrix")));
        }
        let m = Self::from_parts(regions, radius_km, d);
        for i in 0..n {
            if m.get(i, i) != 0.0 {
                return Err(Error::parse(i + 3, "distance", "nonzero diagonal"));
            }
            for j in (i + 1)..n {
                let (a, b) = (m.get(i, j), m.get(j, i));
                if a != b {
                    return Err(Error::parse(i + 3, "distance", "matrix is not symmetric"));
                }
                if a <= 0.0 {
                    return Err(Error::CoincidentCentroid(m.regions[i], m.regions[j]));
                }
            }
        }
        if m.index.len() != n {
            return Err(Error::parse(2, "fips", "duplicate region"));
        }
        Ok(m)
    }

    pub fn load(path: &Path, delimiter: u8) -> Result<Self> {
        Self::parse(tio::open(path)?, delimiter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(s: &str) -> RegionId {
        RegionId::parse(s).unwrap()
    }

    /// Spherical law of cosines, an independent route to the same distance.
    fn law_of_cosines(a: (f64, f64), b: (f64, f64)) -> f64 {
        let (p1, p2) = (a.0.to_radians(), b.0.to_radians());
        let dl = (b.1 - a.1).to_radians();
        let c = p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos();
        EARTH_RADIUS_KM * c.clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn identical_points() {
        assert_eq!(haversine((40.0, -80.0), (40.0, -80.0)), 0.0);
    }

    #[test]
    fn antipodal_on_equator() {
        let d = haversine((0.0, 0.0), (0.0, 180.0));
        assert!((d - std::f64::consts::PI * EARTH_RADIUS_KM).abs() < 1e-9);
        assert!((d - 20015.1).abs() < 0.1);
    }

    #[test]
    fn agrees_with_law_of_cosines() {
        let a = (40.4406, -79.9959);
        let b = (37.8715, -122.2730);
        let h = haversine(a, b);
        let c = law_of_cosines(a, b);
        assert!((h - c).abs() < 0.1, "{h} vs {c}");
        assert!((h - haversine(b, a)).abs() < 1e-9);
    }

    fn line_geo(points: &[(&str, f64)]) -> Geography {
        let mut g = Geography::new();
        for (code, lon) in points {
            g.insert(r(code), 0.0, *lon).unwrap();
        }
        g
    }

    #[test]
    fn equidistant_alters_split_evenly() {
        let g = line_geo(&[("01001", 0.0), ("01003", 1.0), ("01005", -1.0)]);
        let w = spatial_weights(&g, r("01001"), &[r("01003"), r("01005")]).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn inverse_distance_ratio() {
        // along the equator distance is linear in longitude
        let g = line_geo(&[("01001", 0.0), ("01003", 1.0), ("01005", 3.0)]);
        let w = spatial_weights(&g, r("01001"), &[r("01001"), r("01003"), r("01005")]).unwrap();
        assert_eq!(w[0], 0.0);
        assert!((w[1] - 0.75).abs() < 1e-12);
        assert!((w[2] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn coincident_alter_is_error() {
        let g = line_geo(&[("01001", 0.0), ("01003", 0.0)]);
        assert!(matches!(spatial_weights(&g, r("01001"), &[r("01003")]), Err(Error::CoincidentCentroid(_, _))));
    }

    #[test]
    fn matrix_cache_round_trip() {
        let g = line_geo(&[("01001", 0.0), ("01003", 1.0), ("02005", 3.5)]);
        let regions: Vec<_> = g.iter().map(|(r, _)| r).collect();
        let m = DistanceMatrix::build(&g, &regions).unwrap();
        assert_eq!(m.get(0, 1), m.get(1, 0));
        let mut buf = Vec::new();
        m.write(&mut buf, b',').unwrap();
        let back = DistanceMatrix::parse(buf.as_slice(), b',').unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn cache_without_radius_rejected() {
        let text = "fips,01001\n01001,0\n";
        assert!(DistanceMatrix::parse(text.as_bytes(), b',').is_err());
    }
}
