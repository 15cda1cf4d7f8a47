mod common;

use common::{direct_sandwich, fixture, random_design, rel_close};
use nalgebra::DMatrix;
use sociospatial::coredata::{Outcome, PanelDataset, RegionId};
use sociospatial::exposure::ExposureSeries;
use sociospatial::regress::*;
use sociospatial::Error;

fn spec(fx: &common::Fixture, fe: &[FixedEffect]) -> ModelSpec {
    let mut regs = vec!["expo", "erpo"];
    regs.extend(fx.covariates.iter().map(|s| s.as_str()));
    ModelSpec::new("t", Outcome::Crude, &regs, fe).standardizing(&["expo", "x1"])
}

fn assert_same_fit(a: &FitResult, b: &FitResult, tol: f64) {
    assert_eq!(a.coefficients.keys().collect::<Vec<_>>(), b.coefficients.keys().collect::<Vec<_>>());
    for (name, v) in &a.coefficients {
        assert!(rel_close(*v, b.coefficients[name], tol), "{name}: {v} vs {}", b.coefficients[name]);
        assert!(
            rel_close(a.cluster_se[name], b.cluster_se[name], tol),
            "se {name}: {} vs {}",
            a.cluster_se[name],
            b.cluster_se[name]
        );
    }
    assert_eq!(a.dof_model, b.dof_model);
    assert!(rel_close(a.r2, b.r2, tol) && rel_close(a.adj_r2, b.adj_r2, tol));
}

#[test]
fn two_way_matches_dummy_regression() {
    let fx = fixture(1, 10, 5, 4, 3);
    let s = spec(&fx, &[FixedEffect::Region, FixedEffect::Year]);
    let a = fit(&fx.panel, &fx.exposures, &s).unwrap();
    let b = dummy_ols_oracle(&fx.panel, &fx.exposures, &s).unwrap();
    assert_same_fit(&a, &b, 1e-8);
    // 10 regions + 5 years - 1 redundancy, plus 5 slopes
    assert_eq!(a.fe_dof, 14);
    assert_eq!(a.dof_model, 19);
}

#[test]
fn state_by_year_matches_dummy_regression() {
    let fx = fixture(2, 9, 4, 3, 2);
    let s = spec(&fx, &[FixedEffect::Region, FixedEffect::StateByYear]);
    let a = fit(&fx.panel, &fx.exposures, &s).unwrap();
    let b = dummy_ols_oracle(&fx.panel, &fx.exposures, &s).unwrap();
    // the state-level indicator is absorbed by state-year effects
    assert!(a.pruned.contains(&"erpo".to_string()));
    assert!(b.pruned.contains(&"erpo".to_string()));
    assert_same_fit(&a, &b, 1e-8);
    assert_eq!(a.fe_dof, 9 + 12 - 3);
}

#[test]
fn no_fixed_effects_is_plain_wls_with_intercept() {
    let fx = fixture(3, 8, 4, 4, 2);
    let s = spec(&fx, &[]);
    let a = fit(&fx.panel, &fx.exposures, &s).unwrap();
    let b = dummy_ols_oracle(&fx.panel, &fx.exposures, &s).unwrap();
    assert_same_fit(&a, &b, 1e-10);
    assert_eq!(a.fe_dof, 1);
}

#[test]
fn cluster_vcov_matches_direct_sandwich() {
    for seed in 0..10 {
        let (x, e, w, g) = random_design(seed, 60, 4, 7);
        for cr in [CrType::Cr0, CrType::Cr1] {
            let v = cluster_vcov(&x, &e, &w, &g, 9, cr).unwrap();
            let d = direct_sandwich(&x, &e, &w, &g, 9, cr);
            for a in 0..4 {
                for b in 0..4 {
                    assert!(rel_close(v[(a, b)], d[a][b], 1e-10), "{seed} {a} {b}");
                }
            }
        }
    }
}

#[test]
fn one_row_clusters_equal_hc1() {
    let (x, e, w, _) = random_design(42, 40, 3, 5);
    let g: Vec<usize> = (0..40).collect();
    let v = cluster_vcov(&x, &e, &w, &g, 3, CrType::Cr1).unwrap();
    let h = hc1_vcov(&x, &e, &w, 3).unwrap();
    // with G = N the CR1 factor collapses to N/(N-K)
    for a in 0..3 {
        for b in 0..3 {
            assert!(rel_close(v[(a, b)], h[(a, b)], 1e-10));
        }
    }
    let v0 = cluster_vcov(&x, &e, &w, &g, 3, CrType::Cr0).unwrap();
    for a in 0..3 {
        for b in 0..3 {
            assert!(rel_close(v0[(a, b)] * 40.0 / 37.0, h[(a, b)], 1e-10));
        }
    }
}

#[test]
fn vcov_is_symmetric_psd() {
    let fx = fixture(4, 12, 6, 4, 3);
    let r = fit(&fx.panel, &fx.exposures, &spec(&fx, &[FixedEffect::Region, FixedEffect::Year])).unwrap();
    let k = r.vcov.len();
    let m = DMatrix::from_fn(k, k, |a, b| r.vcov[a][b]);
    assert_eq!(m, m.transpose());
    let eig = m.symmetric_eigen();
    let scale = eig.eigenvalues.amax();
    assert!(eig.eigenvalues.iter().all(|l| *l >= -1e-12 * scale));
}

#[test]
fn single_cluster_is_an_error() {
    let fx = fixture(5, 6, 4, 1, 1);
    let err = fit(&fx.panel, &fx.exposures, &spec(&fx, &[FixedEffect::Region, FixedEffect::Year])).unwrap_err();
    assert!(matches!(err, Error::SingleCluster), "{err}");
}

fn with_rows(panel: &PanelDataset, f: impl Fn(&mut sociospatial::coredata::PanelRow)) -> PanelDataset {
    let mut rows = panel.rows().to_vec();
    rows.iter_mut().for_each(f);
    PanelDataset::from_rows(panel.covariate_names().to_vec(), rows, true).unwrap().0
}

#[test]
fn residuals_are_orthogonal_to_regressors_and_groups() {
    let fx = fixture(6, 10, 6, 3, 2);
    let s = spec(&fx, &[FixedEffect::Region, FixedEffect::Year]);
    let r = fit(&fx.panel, &fx.exposures, &s).unwrap();
    let n = fx.panel.len();
    let w: Vec<f64> = fx.panel.rows().iter().map(|row| row.population as f64).collect();
    // weighted residuals sum to zero within every region and every year
    let t = fx.panel.years().len();
    for ri in 0..fx.panel.regions().len() {
        let s: f64 = (0..t).map(|ti| w[ri * t + ti] * r.residuals[ri * t + ti]).sum();
        assert!(s.abs() < 1e-6, "{s}");
    }
    for ti in 0..t {
        let s: f64 = (0..fx.panel.regions().len()).map(|ri| w[ri * t + ti] * r.residuals[ri * t + ti]).sum();
        assert!(s.abs() < 1e-6, "{s}");
    }
    // and to each raw covariate
    for c in 0..fx.covariates.len() {
        let s: f64 = (0..n).map(|i| w[i] * r.residuals[i] * fx.panel.rows()[i].covariates[c]).sum();
        assert!(s.abs() < 1e-5, "{s}");
    }
}

#[test]
fn rescaling_invariances() {
    let fx = fixture(7, 10, 5, 4, 2);
    let s = spec(&fx, &[FixedEffect::Region, FixedEffect::Year]);
    let base = fit(&fx.panel, &fx.exposures, &s).unwrap();

    // outcome scaled by c: coefficients and SEs scale by c, R² unchanged
    let c = 7.5;
    let scaled = with_rows(&fx.panel, |r| r.crude_rate *= c);
    let r = fit(&scaled, &fx.exposures, &s).unwrap();
    for (k, v) in &base.coefficients {
        assert!(rel_close(r.coefficients[k], c * v, 1e-10));
        assert!(rel_close(r.cluster_se[k], c * base.cluster_se[k], 1e-10));
    }
    assert!(rel_close(r.r2, base.r2, 1e-10));

    // an unstandardized regressor scaled by c: its coefficient scales by 1/c
    let scaled = with_rows(&fx.panel, |r| r.covariates[1] *= c);
    let r = fit(&scaled, &fx.exposures, &s).unwrap();
    assert!(rel_close(r.coefficients["x2"], base.coefficients["x2"] / c, 1e-10));
    assert!(rel_close(r.coefficients["expo"], base.coefficients["expo"], 1e-10));

    // a standardized regressor is unaffected by its units
    let scaled = with_rows(&fx.panel, |r| r.covariates[0] = r.covariates[0] * c + 3.0);
    let r = fit(&scaled, &fx.exposures, &s).unwrap();
    assert!(rel_close(r.coefficients["x1"], base.coefficients["x1"], 1e-10));

    // proportional weights change nothing
    let scaled = with_rows(&fx.panel, |r| r.population *= 3);
    let r = fit(&scaled, &fx.exposures, &s).unwrap();
    for (k, v) in &base.coefficients {
        assert!(rel_close(r.coefficients[k], *v, 1e-10));
        assert!(rel_close(r.cluster_se[k], base.cluster_se[k], 1e-10));
    }
}

#[test]
fn duplicating_rows_at_half_weight_preserves_cr0() {
    let fx = fixture(8, 8, 4, 4, 2);
    let mut s = spec(&fx, &[FixedEffect::StateByYear]).standardizing(&[]);
    s.cr = CrType::Cr0;
    s.regressors.retain(|r| r != "erpo");
    let one = fit(&fx.panel, &fx.exposures, &s).unwrap();

    // every region gets a twin in the same state; the pair shares the
    // original weight because only relative weights matter
    let mut rows = Vec::new();
    let mut expo = std::collections::BTreeMap::new();
    for row in fx.panel.rows() {
        let mut twin = row.clone();
        let county: u32 = row.region.as_str()[2..].parse().unwrap();
        twin.region = RegionId::from_parts(row.region.as_str()[..2].parse().unwrap(), county + 500).unwrap();
        let v = fx.exposures[0].get(row.region, row.year).unwrap();
        expo.insert((row.region, row.year), v);
        expo.insert((twin.region, twin.year), v);
        rows.push(row.clone());
        rows.push(twin);
    }
    let doubled = PanelDataset::from_rows(fx.panel.covariate_names().to_vec(), rows, true).unwrap().0;
    let series = ExposureSeries::new(
        "expo",
        doubled.regions().to_vec(),
        doubled.years().to_vec(),
        expo.values().copied().collect(),
    )
    .unwrap();
    let two = fit(&doubled, &[series], &s).unwrap();
    assert_eq!(two.n_obs, 2 * one.n_obs);
    for (k, v) in &one.coefficients {
        assert!(rel_close(two.coefficients[k], *v, 1e-9), "{k}");
        assert!(rel_close(two.cluster_se[k], one.cluster_se[k], 1e-9), "se {k}");
    }
}

#[test]
fn fitting_is_idempotent() {
    let fx = fixture(9, 10, 5, 4, 3);
    let s = spec(&fx, &[FixedEffect::Region, FixedEffect::Year]);
    let a = fit(&fx.panel, &fx.exposures, &s).unwrap();
    let b = fit(&fx.panel, &fx.exposures, &s).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let back = FitResult::from_json(&a.to_json().unwrap()).unwrap();
    assert_eq!(back.coefficients, a.coefficients);
}

#[test]
fn policy_indicator_collinear_with_year_effects_is_pruned() {
    let fx = fixture(10, 8, 5, 4, 1);
    // every state adopts in 2012: the indicator is a function of the year
    let same = with_rows(&fx.panel, |r| r.erpo = (r.year >= 2012) as u8);
    let s = spec(&fx, &[FixedEffect::Region, FixedEffect::Year]);
    let r = fit(&same, &fx.exposures, &s).unwrap();
    assert_eq!(r.pruned, vec!["erpo".to_string()]);
    assert!(!r.coefficients.contains_key("erpo"));
    assert!(r.warnings.iter().any(|w| w.contains("erpo")));
}

#[test]
fn duplicate_regressor_column_pruned_in_order() {
    let fx = fixture(11, 8, 5, 4, 2);
    let dup = with_rows(&fx.panel, |r| r.covariates[1] = 2.0 * r.covariates[0]);
    let s = ModelSpec::new("d", Outcome::Crude, &["x1", "x2", "expo"], &[FixedEffect::Region, FixedEffect::Year]);
    let r = fit(&dup, &fx.exposures, &s).unwrap();
    assert_eq!(r.pruned, vec!["x2".to_string()]);
    let o = dummy_ols_oracle(&dup, &fx.exposures, &s).unwrap();
    assert_eq!(o.pruned, vec!["x2".to_string()]);
    assert!(rel_close(r.coefficients["x1"], o.coefficients["x1"], 1e-8));
}

#[test]
fn unknown_regressor_and_invalid_spec() {
    let fx = fixture(12, 6, 4, 3, 1);
    let s = ModelSpec::new("u", Outcome::Crude, &["nope"], &[FixedEffect::Region]);
    assert!(matches!(fit(&fx.panel, &fx.exposures, &s), Err(Error::UnknownRegressor(n)) if n == "nope"));
    let s = ModelSpec::new("v", Outcome::Crude, &["x1"], &[FixedEffect::Year, FixedEffect::StateByYear]);
    assert!(matches!(fit(&fx.panel, &fx.exposures, &s), Err(Error::InvalidSpec(_))));
    let s = ModelSpec::new("w", Outcome::AgeAdjusted, &["x1"], &[FixedEffect::Region]);
    assert!(fit(&fx.panel, &fx.exposures, &s).is_err());
}

#[test]
fn sample_predicate_restricts_rows() {
    let fx = fixture(13, 8, 6, 4, 1);
    let mut s = spec(&fx, &[FixedEffect::Region, FixedEffect::Year]);
    s.sample.year_min = Some(2012);
    let r = fit(&fx.panel, &fx.exposures, &s).unwrap();
    assert_eq!(r.n_obs, 8 * 4);
    assert!(r.sample.iter().all(|(_, y)| *y >= 2012));
}

#[test]
fn interval_and_p_value_conventions() {
    let fx = fixture(14, 12, 5, 6, 2);
    let r = fit(&fx.panel, &fx.exposures, &spec(&fx, &[FixedEffect::Region, FixedEffect::Year])).unwrap();
    assert_eq!(r.n_clusters, 6);
    // t(5) 97.5% quantile
    assert!((r.t_critical - 2.570_581_835_636_314).abs() < 1e-9);
    for (k, b) in &r.coefficients {
        let (lo, hi) = r.ci95[k];
        assert!(rel_close(hi - b, r.t_critical * r.cluster_se[k], 1e-12));
        assert!(rel_close(b - lo, r.t_critical * r.cluster_se[k], 1e-12));
        assert!((0.0..=1.0).contains(&r.p[k]));
    }
}

#[test]
fn single_region_states_match_dummy_regression() {
    // 7 regions over 5 states leaves several states with one region, whose
    // region effects collapse into the state-year effects
    let fx = fixture(1011, 7, 5, 5, 3);
    let s = spec(&fx, &[FixedEffect::Region, FixedEffect::StateByYear]);
    let a = fit(&fx.panel, &fx.exposures, &s).unwrap();
    let b = dummy_ols_oracle(&fx.panel, &fx.exposures, &s).unwrap();
    assert_eq!(a.pruned, vec!["erpo".to_string()]);
    assert_eq!(b.pruned, a.pruned);
    assert_eq!(a.fe_dof, b.fe_dof);
    assert_same_fit(&a, &b, 1e-8);
}
