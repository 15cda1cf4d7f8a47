//! The four stages: simulate, exposures, fit and report.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sociospatial::agestd::{build_age_adjusted_panel, SuppressionLog};
use sociospatial::coredata::{
    carry_forward_political, AgeStratifiedCounts, DroppedRow, ElectionTable, Geography, PanelDataset, PanelSchema,
    PolicyTable, SocialNetwork, StandardPopulation, REP_MAJORITY,
};
use sociospatial::exposure::{self as ex, ExposureSeries, ERPO_SOCIAL_EXPOSURE};
use sociospatial::geo::DistanceMatrix;
use sociospatial::regress::{fit, format_table, FitResult, ModelSpec};
use sociospatial::synthlab::{self, DgpConfig, Manifest};

use crate::config::{Inputs, Options, RunConfig};
use crate::failure::{CliResult, Context, Failure, Kind};
use crate::specs;

pub const EXPOSURE_DIR: &str = "exposures";
pub const FIT_DIR: &str = "fits";
pub const SOCIAL_FILE: &str = "social_proximity.csv";
pub const SPATIAL_FILE: &str = "spatial_proximity.csv";
pub const ERPO_SOCIAL_FILE: &str = "erpo_social_exposure.csv";
pub const ERPO_SPATIAL_FILE: &str = "erpo_spatial_exposure.csv";
pub const STANDARDIZED_FILE: &str = "exposures_standardized.csv";
pub const DELTA_FILE: &str = "erpo_social_exposure_delta.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SUPPRESSION_FILE: &str = "suppression.csv";
pub const REPORT_TEXT: &str = "report.txt";
pub const REPORT_JSON: &str = "report.json";
pub const RUN_CONFIG: &str = "run.toml";

/// Raw exposure files in the order they are written and read back.
const RAW_FILES: [&str; 4] = [SOCIAL_FILE, SPATIAL_FILE, ERPO_SOCIAL_FILE, ERPO_SPATIAL_FILE];

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> sociospatial::Result<()>) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)
            .map_err(|e| Failure::validation(format!("cannot create directory: {e}")).in_file(dir))?;
    }
    let file = File::create(path).map_err(|e| Failure::validation(format!("cannot create file: {e}")).in_file(path))?;
    let mut w = BufWriter::new(file);
    f(&mut w).in_file(path)?;
    w.flush().map_err(|e| Failure::validation(format!("write failed: {e}")).in_file(path))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    write_file(path, |w| w.write_all(text.as_bytes()).map_err(|e| sociospatial::Error::InvalidConfig(e.to_string())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("summary serializes");
    s.push('\n');
    s
}

/// Validated inputs, with political leaning and age-adjusted rates resolved.
pub struct Loaded {
    pub panel: PanelDataset,
    pub network: SocialNetwork,
    pub geography: Geography,
    pub policy: PolicyTable,
    pub dropped: Vec<DroppedRow>,
    pub suppression: Option<SuppressionLog>,
}

pub fn load_inputs(inputs: &Inputs, opts: &Options) -> CliResult<Loaded> {
    let d = inputs.delimiter;
    let mut schema = PanelSchema { delimiter: d, strict: opts.strict, ..PanelSchema::default() };
    if inputs.elections.is_some() {
        schema = schema.without_covariate(REP_MAJORITY);
    }
    let (mut panel, mut dropped) = PanelDataset::load(&inputs.panel, &schema).in_file(&inputs.panel)?;

    if let Some(path) = &inputs.elections {
        let elections = ElectionTable::load(path, d).in_file(path)?;
        let leaning = carry_forward_political(&elections, panel.regions(), panel.years(), opts.strict).in_file(path)?;
        if !leaning.dropped.is_empty() {
            let gone: BTreeSet<_> = leaning.dropped.iter().copied().collect();
            let keep = panel.regions().iter().copied().filter(|r| !gone.contains(r)).collect();
            panel.retain_regions(&keep);
            dropped.extend(leaning.dropped.iter().map(|r| DroppedRow {
                line: None,
                region: Some(*r),
                reason: "no election return at or before the first study year".into(),
            }));
        }
        panel.set_covariate(REP_MAJORITY, &leaning.values).in_file(path)?;
    }
    if panel.is_empty() {
        return Err(Failure::validation("no usable panel rows").in_file(&inputs.panel));
    }

    let network = SocialNetwork::load(&inputs.sci, d).in_file(&inputs.sci)?;
    let geography = Geography::load(&inputs.geography, d).in_file(&inputs.geography)?;
    geography.validate_for(panel.regions()).in_file(&inputs.geography)?;
    let policy = PolicyTable::load(&inputs.policy, d).in_file(&inputs.policy)?;

    let mut suppression = None;
    if let Some(path) = &inputs.age {
        let age = AgeStratifiedCounts::load(path, d).in_file(path)?;
        let std = match &inputs.standard_population {
            Some(p) => StandardPopulation::load(p, d).in_file(p)?,
            None => StandardPopulation::us_2000(),
        };
        let (adjusted, log) = build_age_adjusted_panel(&panel, &age, &std).in_file(path)?;
        panel = adjusted;
        suppression = Some(log);
    }
    Ok(Loaded { panel, network, geography, policy, dropped, suppression })
}

/// Raw (unstandardized) exposures grouped by output file.
pub fn build_exposures(l: &Loaded, opts: &Options) -> CliResult<Vec<Vec<ExposureSeries>>> {
    use sociospatial::coredata::Outcome;
    let eo = opts.exposure();
    let regions = l.panel.regions();
    let years = l.panel.years();
    let dm = DistanceMatrix::build(&l.geography, regions)?;
    let mut social = vec![ex::deaths_in_social_proximity(&l.panel, &l.network, Outcome::Crude, eo)?];
    let mut spatial = vec![ex::deaths_in_spatial_proximity(&l.panel, &dm, Outcome::Crude)?];
    if l.suppression.is_some() {
        social.push(
            ex::deaths_in_social_proximity(&l.panel, &l.network, Outcome::AgeAdjusted, eo)?
                .renamed(ex::SOCIAL_PROXIMITY_ADJ),
        );
        spatial.push(
            ex::deaths_in_spatial_proximity(&l.panel, &dm, Outcome::AgeAdjusted)?.renamed(ex::SPATIAL_PROXIMITY_ADJ),
        );
    }
    let e_soc = ex::erpo_social_exposure(&l.network, &l.policy, regions, years, eo.denominator)?;
    let e_sp = ex::erpo_spatial_exposure(&dm, &l.policy, regions, years)?;
    Ok(vec![social, spatial, vec![e_soc], vec![e_sp]])
}

#[derive(Serialize)]
struct SeriesSummary {
    name: String,
    mean: f64,
    sd: f64,
    min: f64,
    max: f64,
}

#[derive(Serialize)]
struct ExposureSummary {
    regions: usize,
    years: Vec<i32>,
    dropped_rows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    suppressed_cells: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    suppressed_share: Option<f64>,
    delta_years: (i32, i32),
    series: Vec<SeriesSummary>,
}

fn exposure_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.join(EXPOSURE_DIR)
}

fn write_exposures(cfg: &RunConfig, l: &Loaded, groups: &[Vec<ExposureSeries>]) -> CliResult<()> {
    let dir = exposure_dir(cfg);
    let d = cfg.inputs.delimiter;
    for (file, group) in RAW_FILES.iter().zip(groups) {
        let refs: Vec<&ExposureSeries> = group.iter().collect();
        write_file(&dir.join(file), |w| ex::write_series(w, &refs, d))?;
    }
    let all: Vec<&ExposureSeries> = groups.iter().flatten().collect();
    let standardized = all.iter().map(|s| ex::standardize(s)).collect::<sociospatial::Result<Vec<_>>>()?;
    let refs: Vec<&ExposureSeries> = standardized.iter().collect();
    write_file(&dir.join(STANDARDIZED_FILE), |w| ex::write_series(w, &refs, d))?;

    let years = l.panel.years();
    let (y0, y1) = (years[0], years[years.len() - 1]);
    let e_soc = standardized.iter().find(|s| s.name == ERPO_SOCIAL_EXPOSURE).expect("policy exposure is always built");
    let delta = ex::exposure_delta(e_soc, y0, y1)?;
    write_file(&dir.join(DELTA_FILE), |w| ex::write_delta(w, &delta, d))?;

    if let Some(log) = &l.suppression {
        write_file(&dir.join(SUPPRESSION_FILE), |w| log.write(w, d))?;
    }

    let series = standardized
        .iter()
        .zip(&all)
        .map(|(z, raw)| {
            let v = raw.values();
            SeriesSummary {
                name: raw.name.clone(),
                mean: z.mean.unwrap_or(f64::NAN),
                sd: z.sd.unwrap_or(f64::NAN),
                min: v.iter().copied().fold(f64::INFINITY, f64::min),
                max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect();
    let summary = ExposureSummary {
        regions: l.panel.regions().len(),
        years: years.to_vec(),
        dropped_rows: l.dropped.len(),
        suppressed_cells: l.suppression.as_ref().map(|s| s.suppressed.len()),
        suppressed_share: l.suppression.as_ref().map(|s| s.share()),
        delta_years: (y0, y1),
        series,
    };
    write_text(&dir.join(SUMMARY_FILE), &to_json(&summary))?;
    print_summary(&summary);
    Ok(())
}

fn print_summary(s: &ExposureSummary) {
    println!("{} regions x {} years ({} dropped rows)", s.regions, s.years.len(), s.dropped_rows);
    if let (Some(n), Some(share)) = (s.suppressed_cells, s.suppressed_share) {
        println!("age-adjusted rates suppressed in {n} region-years ({:.2}%)", 100.0 * share);
    }
    println!("{:<28} {:>12} {:>12}", "series", "mean", "sd");
    for x in &s.series {
        println!("{:<28} {:>12.4} {:>12.4}", x.name, x.mean, x.sd);
    }
}

pub fn cmd_exposures(cfg: &RunConfig) -> CliResult<()> {
    cfg.validate()?;
    let l = load_inputs(&cfg.inputs, &cfg.options)?;
    let groups = build_exposures(&l, &cfg.options)?;
    write_exposures(cfg, &l, &groups)
}

/// Exposure series from a previous `exposures` run, or freshly built (and
/// written) when that run has not happened yet.
fn exposures_for_fit(cfg: &RunConfig, l: &Loaded) -> CliResult<Vec<ExposureSeries>> {
    let dir = exposure_dir(cfg);
    let paths: Vec<PathBuf> = RAW_FILES.iter().map(|f| dir.join(f)).collect();
    if paths.iter().all(|p| p.is_file()) {
        let mut out = Vec::new();
        for p in &paths {
            let series = ex::load_series(p, cfg.inputs.delimiter).in_file(p)?;
            for s in series {
                if !s.covers(&l.panel) {
                    return Err(Failure::validation(format!(
                        "series `{}` does not match the panel; rerun `exposures`",
                        s.name
                    ))
                    .in_file(p));
                }
                out.push(s);
            }
        }
        return Ok(out);
    }
    log::info!("no exposure files under {}; building them", dir.display());
    let groups = build_exposures(l, &cfg.options)?;
    write_exposures(cfg, l, &groups)?;
    Ok(groups.into_iter().flatten().collect())
}

fn fit_path(cfg: &RunConfig, name: &str, ext: &str) -> PathBuf {
    cfg.out.join(FIT_DIR).join(format!("{name}.{ext}"))
}

fn selected(cfg: &RunConfig, only: &[String]) -> CliResult<Vec<ModelSpec>> {
    let models = cfg.models()?;
    if only.is_empty() {
        return Ok(models);
    }
    only.iter()
        .map(|name| {
            models
                .iter()
                .find(|m| &m.name == name)
                .cloned()
                .or_else(|| {
                    let mut s = specs::predefined(name)?;
                    s.cr = cfg.options.cr;
                    Some(s)
                })
                .ok_or_else(|| Failure::validation(format!("unknown spec `{name}`")))
        })
        .collect()
}

pub fn cmd_fit(cfg: &RunConfig, only: &[String]) -> CliResult<()> {
    cfg.validate()?;
    let models = selected(cfg, only)?;
    let l = load_inputs(&cfg.inputs, &cfg.options)?;
    let mut exposures = exposures_for_fit(cfg, &l)?;
    if let Some(path) = &cfg.inputs.exposures {
        for s in ex::load_series(path, cfg.inputs.delimiter).in_file(path)? {
            if !s.covers(&l.panel) {
                return Err(Failure::validation(format!("series `{}` does not cover the panel", s.name)).in_file(path));
            }
            log::info!("using precomputed `{}` from {}", s.name, path.display());
            match exposures.iter_mut().find(|e| e.name == s.name) {
                Some(slot) => *slot = s,
                None => exposures.push(s),
            }
        }
    }
    let results: Vec<CliResult<FitResult>> = models
        .par_iter()
        .map(|m| fit(&l.panel, &exposures, m).map_err(|e| Failure::from(e).in_spec(&m.name)))
        .collect();
    let mut first_failure = None;
    for (m, r) in models.iter().zip(results) {
        match r {
            Ok(r) => {
                let json = r.to_json()?;
                write_text(&fit_path(cfg, &m.name, "json"), &(json + "\n"))?;
                let table = format_table(&[&r]);
                write_text(&fit_path(cfg, &m.name, "txt"), &table)?;
                println!("{}", m.name);
                print!("{table}");
            }
            Err(mut f) => {
                if f.kind == Kind::Validation {
                    f.kind = Kind::Estimation;
                }
                log::error!("{f}");
                first_failure.get_or_insert(f);
            }
        }
    }
    first_failure.map_or(Ok(()), Err)
}

#[derive(Serialize)]
struct CoefRow<'a> {
    name: &'a str,
    estimate: f64,
    se: f64,
    ci95: (f64, f64),
    p: f64,
}

#[derive(Serialize)]
struct ReportEntry<'a> {
    spec: &'a str,
    family: &'static str,
    outcome: sociospatial::coredata::Outcome,
    n_obs: usize,
    n_clusters: usize,
    r2: f64,
    adj_r2: f64,
    pruned: &'a [String],
    coefficients: Vec<CoefRow<'a>>,
}

pub fn cmd_report(cfg: &RunConfig) -> CliResult<()> {
    let models = cfg.models()?;
    if models.is_empty() {
        return Err(Failure::new(Kind::MissingArtifact, "no fitted specifications to report"));
    }
    let mut fits = Vec::with_capacity(models.len());
    for m in &models {
        let path = fit_path(cfg, &m.name, "json");
        let text = fs::read_to_string(&path).map_err(|_| {
            Failure::new(Kind::MissingArtifact, "fit artifact not found; run `fit` first")
                .in_file(&path)
                .in_spec(&m.name)
        })?;
        let r = FitResult::from_json(&text).in_file(&path)?;
        fits.push(r);
    }

    // one table per family and outcome, in first-seen order
    let mut groups: Vec<((&'static str, sociospatial::coredata::Outcome), Vec<&FitResult>)> = Vec::new();
    for r in &fits {
        let key = (specs::family(&r.spec), r.outcome);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    let mut text = String::new();
    for (i, ((family, _), members)) in groups.iter().enumerate() {
        if i > 0 {
            text.push('\n');
        }
        text.push_str(family);
        text.push('\n');
        text.push_str(&format_table(members));
    }
    let entries: Vec<ReportEntry> = fits
        .iter()
        .map(|r| ReportEntry {
            spec: &r.spec,
            family: specs::family(&r.spec),
            outcome: r.outcome,
            n_obs: r.n_obs,
            n_clusters: r.n_clusters,
            r2: r.r2,
            adj_r2: r.adj_r2,
            pruned: &r.pruned,
            coefficients: r
                .coefficients
                .iter()
                .map(|(k, b)| CoefRow { name: k, estimate: *b, se: r.cluster_se[k], ci95: r.ci95[k], p: r.p[k] })
                .collect(),
        })
        .collect();
    write_text(&cfg.out.join(REPORT_TEXT), &text)?;
    write_text(&cfg.out.join(REPORT_JSON), &to_json(&entries))?;
    print!("{text}");
    Ok(())
}

/// Writes a synthetic bundle plus a `run.toml` that points the other
/// stages at it. Planted outcomes load on the generator's regressors, so
/// the run config fits against those rather than rebuilt series.
pub fn cmd_simulate(dgp: Option<&Path>, seed: Option<u64>, out: &Path, opts: &Options) -> CliResult<Manifest> {
    let mut cfg = match dgp {
        Some(p) => DgpConfig::load(p).in_file(p)?,
        None => DgpConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let sim = synthlab::simulate(&cfg)?;
    let manifest = synthlab::write_bundle(&sim, out).in_file(out)?;
    let run = RunConfig {
        out: PathBuf::from("results"),
        inputs: Inputs {
            panel: synthlab::PANEL_FILE.into(),
            sci: synthlab::SCI_FILE.into(),
            geography: synthlab::GEOGRAPHY_FILE.into(),
            policy: synthlab::POLICY_FILE.into(),
            elections: Some(synthlab::ELECTIONS_FILE.into()),
            age: Some(synthlab::AGE_FILE.into()),
            standard_population: Some(synthlab::STANDARD_POPULATION_FILE.into()),
            exposures: Some(synthlab::PLANTED_EXPOSURES_FILE.into()),
            delimiter: b',',
        },
        options: *opts,
        specs: specs::all_names(),
        models: Vec::new(),
    };
    write_text(&out.join(RUN_CONFIG), &run.to_toml())?;
    println!(
        "simulated {} regions x {} years (seed {}) into {}",
        manifest.n_regions,
        manifest.years.len(),
        manifest.seed,
        out.display()
    );
    Ok(manifest)
}
