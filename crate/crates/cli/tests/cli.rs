use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sociospatial"));
    c.env("RUST_LOG", "error");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn diagnostic(o: &Output) -> serde_json::Value {
    let err = String::from_utf8_lossy(&o.stderr);
    let last = err.lines().last().expect("diagnostic line");
    serde_json::from_str(last).unwrap_or_else(|_| panic!("not json: {last}"))
}

fn small_dgp(dir: &Path) -> PathBuf {
    let p = dir.join("dgp.toml");
    fs::write(&p, "n_regions = 40\nn_states = 8\nn_years = 6\n").unwrap();
    p
}

fn simulate(dir: &Path, seed: u64) -> PathBuf {
    let dgp = small_dgp(dir);
    let bundle = dir.join(format!("bundle{seed}"));
    let o = run(&[
        "simulate",
        "--config",
        dgp.to_str().unwrap(),
        "--seed",
        &seed.to_string(),
        "--out",
        bundle.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    bundle
}

fn stage(bundle: &Path, args: &[&str]) -> Output {
    let cfg = bundle.join("run.toml");
    let mut all = vec![args[0], "--config", cfg.to_str().unwrap()];
    all.extend(&args[1..]);
    run(&all)
}

fn read_tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn simulate_writes_manifest_with_truths() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("b");
    let o = run(&["simulate", "--seed", "7", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["true_zeta1"], 3.0);
    assert_eq!(m["seed"], 7);
    assert!(out.join("run.toml").is_file());
}

#[test]
fn simulate_rejects_inconsistent_config() {
    let tmp = tempfile::tempdir().unwrap();
    let dgp = tmp.path().join("bad.toml");
    fs::write(&dgp, "n_regions = 5\nn_states = 8\n").unwrap();
    let o = run(&["simulate", "--config", dgp.to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let d = diagnostic(&o);
    assert_eq!(d["exit_code"], 2);
    assert_eq!(d["kind"], "validation");
}

#[test]
fn same_seed_gives_identical_bundles() {
    let tmp = tempfile::tempdir().unwrap();
    let a = simulate(tmp.path(), 3);
    let b_dir = tmp.path().join("again");
    fs::create_dir(&b_dir).unwrap();
    let b = simulate(&b_dir, 3);
    assert_eq!(read_tree(&a), read_tree(&b));
}

#[test]
fn exposures_stage_writes_series_and_delta() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = simulate(tmp.path(), 1);
    let o = stage(&bundle, &["exposures"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = bundle.join("results/exposures");
    for f in [
        "social_proximity.csv",
        "spatial_proximity.csv",
        "erpo_social_exposure.csv",
        "erpo_spatial_exposure.csv",
        "exposures_standardized.csv",
    ] {
        let series = sociospatial::exposure::load_series(&dir.join(f), b',').unwrap();
        assert!(!series.is_empty(), "{f}");
    }
    let delta = fs::read_to_string(dir.join("erpo_social_exposure_delta.csv")).unwrap();
    assert_eq!(delta.lines().count(), 1 + 40);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["regions"], 40);
    assert!(summary["series"][0]["sd"].as_f64().unwrap() > 0.0);
}

#[test]
fn missing_input_names_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = simulate(tmp.path(), 1);
    fs::remove_file(bundle.join("geography.csv")).unwrap();
    let o = stage(&bundle, &["exposures"]);
    assert_eq!(code(&o), 2);
    let d = diagnostic(&o);
    assert!(d["file"].as_str().unwrap().ends_with("geography.csv"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("geography.csv"));
}

#[test]
fn malformed_input_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = simulate(tmp.path(), 1);
    fs::write(bundle.join("sci.csv"), "user_loc,fr_loc,scaled_sci\n01001,01003,-4\n").unwrap();
    let o = stage(&bundle, &["exposures"]);
    assert_eq!(code(&o), 2);
    assert!(diagnostic(&o)["file"].as_str().unwrap().ends_with("sci.csv"));
}

#[test]
fn fit_writes_tables_with_expected_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = simulate(tmp.path(), 2);
    let o = stage(&bundle, &["fit", "--spec", "socio_spatial_m2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(bundle.join("results/fits/socio_spatial_m2.txt")).unwrap();
    for row in [
        "Deaths in social proximity",
        "Deaths in spatial proximity",
        "Population density",
        "Percent aged 0-17",
        "Percent with less than high school education",
        "Observations",
        "Adjusted R²",
        "Robust standard errors in parentheses. * p<0.1; ** p<0.05; *** p<0.01",
    ] {
        assert!(table.contains(row), "missing {row}\n{table}");
    }
    assert!(!table.contains("Political affiliation"));
    let json = fs::read_to_string(bundle.join("results/fits/socio_spatial_m2.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["n_obs"], 240);
}

#[test]
fn unknown_regressor_exits_with_estimation_code() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = simulate(tmp.path(), 2);
    let cfg = bundle.join("run.toml");
    let mut text = fs::read_to_string(&cfg).unwrap();
    text = text.replace("specs = [", "specs = [] # ");
    text.push_str(
        "\n[[model]]\nname = \"odd\"\noutcome = \"crude\"\nregressors = [\"social_proximity\", \"moon_phase\"]\nfixed_effects = [\"region\", \"year\"]\n",
    );
    fs::write(&cfg, text).unwrap();
    let o = stage(&bundle, &["fit"]);
    assert_eq!(code(&o), 3);
    let d = diagnostic(&o);
    assert_eq!(d["kind"], "estimation");
    assert_eq!(d["spec"], "odd");
    assert!(d["message"].as_str().unwrap().contains("moon_phase"));
}

#[test]
fn report_needs_fits() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = simulate(tmp.path(), 4);
    let o = stage(&bundle, &["report"]);
    assert_eq!(code(&o), 4);
    assert_eq!(diagnostic(&o)["kind"], "missing_artifact");
}

#[test]
fn erpo_report_has_three_columns_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = simulate(tmp.path(), 5);
    let cfg = bundle.join("run.toml");
    let text = fs::read_to_string(&cfg).unwrap();
    let start = text.find("specs = [").unwrap();
    let end = start + text[start..].find(']').unwrap() + 1;
    let text = format!(
        "{}specs = [\"erpo_direct\", \"erpo_social\", \"erpo_social_spatial\"]{}",
        &text[..start],
        &text[end..]
    );
    fs::write(&cfg, text).unwrap();
    assert_eq!(code(&stage(&bundle, &["fit"])), 0);
    assert_eq!(code(&stage(&bundle, &["report"])), 0);
    let report = fs::read_to_string(bundle.join("results/report.txt")).unwrap();
    assert!(report.contains("Model 3"));
    assert!(!report.contains("Model 4"));
    for name in ["erpo_direct", "erpo_social", "erpo_social_spatial", "ERPO social exposure", "Political affiliation"] {
        assert!(report.contains(name), "{name}");
    }
    let first = fs::read(bundle.join("results/report.json")).unwrap();
    assert_eq!(code(&stage(&bundle, &["report"])), 0);
    assert_eq!(fs::read_to_string(bundle.join("results/report.txt")).unwrap(), report);
    assert_eq!(fs::read(bundle.join("results/report.json")).unwrap(), first);
}

#[test]
fn exposures_rerun_is_byte_identical_and_flags_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let bundle = simulate(tmp.path(), 6);
    assert_eq!(code(&stage(&bundle, &["exposures"])), 0);
    let a = read_tree(&bundle.join("results"));
    assert_eq!(code(&stage(&bundle, &["exposures", "--threads", "2"])), 0);
    assert_eq!(read_tree(&bundle.join("results")), a);
    let alt = tmp.path().join("alt");
    assert_eq!(code(&stage(&bundle, &["exposures", "--weights-base", "annual", "--out", alt.to_str().unwrap()])), 0);
    let changed = |f: &str| {
        fs::read(alt.join("exposures").join(f)).unwrap() != fs::read(bundle.join("results/exposures").join(f)).unwrap()
    };
    assert!(changed("social_proximity.csv"));
    assert!(!changed("spatial_proximity.csv"));
}

#[test]
fn usage_errors_exit_two() {
    let o = run(&["fit", "--cr", "cr9"]);
    assert_eq!(code(&o), 2);
    assert_eq!(diagnostic(&o)["exit_code"], 2);
    let o = run(&["fit", "--config", "/nonexistent/run.toml"]);
    assert_eq!(code(&o), 2);
    assert!(diagnostic(&o)["file"].as_str().unwrap().contains("nonexistent"));
    assert_eq!(code(&run(&["--help"])), 0);
}
