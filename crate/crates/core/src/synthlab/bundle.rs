use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::Serialize;

use super::config::DgpConfig;
use super::generate::Simulated;
use crate::coredata::REP_MAJORITY;
use crate::error::{Error, Result};
use crate::exposure::write_series;

pub const PANEL_FILE: &str = "panel.csv";
pub const SCI_FILE: &str = "sci.csv";
pub const GEOGRAPHY_FILE: &str = "geography.csv";
pub const POLICY_FILE: &str = "policy.csv";
pub const ELECTIONS_FILE: &str = "elections.csv";
pub const AGE_FILE: &str = "age.csv";
pub const STANDARD_POPULATION_FILE: &str = "standard_population.csv";
pub const PLANTED_EXPOSURES_FILE: &str = "planted_exposures.csv";
pub const DGP_FILE: &str = "dgp.toml";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Record of what a bundle contains and which truths were planted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub n_regions: usize,
    pub n_states: usize,
    pub years: Vec<i32>,
    pub true_zeta1: f64,
    pub true_zeta2: f64,
    pub true_psi: f64,
    pub true_delta1: f64,
    pub true_delta2: f64,
    pub covariate_effects: IndexMap<String, f64>,
    pub adopting_states: IndexMap<String, i32>,
    pub clipped_outcomes: usize,
    pub files: IndexMap<String, String>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn flush(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a simulated draw as a complete set of comma-delimited inputs.
/// The panel omits `rep_majority`; it is recoverable from the elections file.
pub fn write_bundle(sim: &Simulated, dir: &Path) -> Result<Manifest> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let d = b',';

    let mut panel = sim.panel.clone();
    panel.drop_covariate(REP_MAJORITY);
    let files: [(&str, &str, Box<dyn Fn(&mut BufWriter<File>) -> Result<()> + '_>); 8] = [
        ("panel", PANEL_FILE, Box::new(|w| panel.write(w, d))),
        ("sci", SCI_FILE, Box::new(|w| sim.network.write(w, d))),
        ("geography", GEOGRAPHY_FILE, Box::new(|w| sim.geography.write(w, d))),
        ("policy", POLICY_FILE, Box::new(|w| sim.policy.write(w, d, &sim.never_adopted))),
        ("elections", ELECTIONS_FILE, Box::new(|w| sim.elections.write(w, d))),
        ("age", AGE_FILE, Box::new(|w| sim.age.write(w, d))),
        ("standard_population", STANDARD_POPULATION_FILE, Box::new(|w| sim.standard_population.write(w, d))),
        (
            "planted_exposures",
            PLANTED_EXPOSURES_FILE,
            Box::new(|w| write_series(w, &sim.exposures.iter().collect::<Vec<_>>(), d)),
        ),
    ];
    let mut listing = IndexMap::new();
    for (key, name, write) in &files {
        let path = dir.join(name);
        let mut w = create(&path)?;
        write(&mut w)?;
        flush(w, &path)?;
        listing.insert(key.to_string(), name.to_string());
    }
    let cfg_path = dir.join(DGP_FILE);
    std::fs::write(&cfg_path, sim.config.to_toml()).map_err(|e| Error::io(&cfg_path, e))?;
    listing.insert("dgp".into(), DGP_FILE.into());

    let manifest = manifest(&sim.config, sim, listing);
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn manifest(cfg: &DgpConfig, sim: &Simulated, files: IndexMap<String, String>) -> Manifest {
    Manifest {
        seed: cfg.seed,
        n_regions: cfg.n_regions,
        n_states: cfg.n_states,
        years: cfg.years(),
        true_zeta1: cfg.true_zeta1,
        true_zeta2: cfg.true_zeta2,
        true_psi: cfg.true_psi,
        true_delta1: cfg.true_delta1,
        true_delta2: cfg.true_delta2,
        covariate_effects: cfg.covariate_effects.iter().map(|(k, v)| (k.clone(), *v)).collect(),
        adopting_states: sim.policy.iter().map(|(s, y)| (s.to_string(), y)).collect(),
        clipped_outcomes: sim.clipped,
        files,
    }
}
