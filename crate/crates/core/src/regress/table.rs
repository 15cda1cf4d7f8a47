//! Plain-text regression tables with significance stars.

use std::fmt::Write;

use super::fit::{FitResult, ERPO_INDICATOR};
use crate::coredata::{self as cd, Outcome};
use crate::exposure as ex;

pub const TABLE_NOTE: &str = "Robust standard errors in parentheses. * p<0.1; ** p<0.05; *** p<0.01";

pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

/// Row label for a regressor name.
pub fn label(name: &str) -> String {
    let known = match name {
        ex::SOCIAL_PROXIMITY => "Deaths in social proximity",
        ex::SPATIAL_PROXIMITY => "Deaths in spatial proximity",
        ex::SOCIAL_PROXIMITY_ADJ => "Deaths in social proximity (age-adjusted)",
        ex::SPATIAL_PROXIMITY_ADJ => "Deaths in spatial proximity (age-adjusted)",
        ex::ERPO_SOCIAL_EXPOSURE => "ERPO social exposure",
        ex::ERPO_SPATIAL_EXPOSURE => "ERPO spatial exposure",
        ERPO_INDICATOR => "ERPO",
        cd::POP_DENSITY => "Population density",
        cd::PCT_AGE_0_17 => "Percent aged 0-17",
        cd::PCT_AGE_18_44 => "Percent aged 18-44",
        cd::PCT_AGE_45_64 => "Percent aged 45-64",
        cd::PCT_ASIAN => "Percent Asian",
        cd::PCT_BLACK => "Percent Black",
        cd::PCT_OTHER => "Percent Other",
        cd::PCT_HISPANIC => "Percent Hispanic",
        cd::MEDIAN_INCOME => "Median household income",
        cd::PCT_LIMITED_ENGLISH => "Percent with limited English proficiency",
        cd::PCT_UNEMPLOYED => "Percent unemployed",
        cd::PCT_LESS_HS => "Percent with less than high school education",
        cd::REP_MAJORITY => "Political affiliation",
        other => other,
    };
    known.to_string()
}

fn thousands(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn outcome_title(results: &[&FitResult]) -> &'static str {
    let crude = results.iter().all(|r| r.outcome == Outcome::Crude);
    let adjusted = results.iter().all(|r| r.outcome == Outcome::AgeAdjusted);
    match (crude, adjusted) {
        (true, _) => "Outcome variable: county-level crude suicide mortality rate",
        (_, true) => "Outcome variable: county-level age-adjusted suicide mortality rate",
        _ => "Outcome variable: county-level suicide mortality rate",
    }
}

/// One column per fit: estimates with stars, SEs in parentheses beneath,
/// then observations, R² and adjusted R².
pub fn format_table(results: &[&FitResult]) -> String {
    let mut rows: Vec<&str> = Vec::new();
    for r in results {
        for name in r.coefficients.keys() {
            if !rows.contains(&name.as_str()) {
                rows.push(name);
            }
        }
    }
    let mut body: Vec<(String, Vec<String>)> = Vec::new();
    for name in &rows {
        let mut est = Vec::new();
        let mut se = Vec::new();
        for r in results {
            match (r.coefficients.get(*name), r.cluster_se.get(*name), r.p.get(*name)) {
                (Some(b), Some(s), Some(p)) => {
                    est.push(format!("{b:.3}{}", stars(*p)));
                    se.push(format!("({s:.3})"));
                }
                _ => {
                    est.push(String::new());
                    se.push(String::new());
                }
            }
        }
        body.push((label(name), est));
        body.push((String::new(), se));
    }
    let footer: Vec<(String, Vec<String>)> = vec![
        ("Observations".into(), results.iter().map(|r| thousands(r.n_obs)).collect()),
        ("R²".into(), results.iter().map(|r| format!("{:.3}", r.r2)).collect()),
        ("Adjusted R²".into(), results.iter().map(|r| format!("{:.3}", r.adj_r2)).collect()),
    ];
    let headers: Vec<String> = (1..=results.len()).map(|i| format!("Model {i}")).collect();
    let names: Vec<String> = results.iter().map(|r| r.spec.clone()).collect();

    let label_w = body.iter().chain(&footer).map(|(l, _)| l.chars().count()).max().unwrap_or(0);
    let col_w = body
        .iter()
        .chain(&footer)
        .flat_map(|(_, c)| c.iter())
        .chain(&headers)
        .chain(&names)
        .map(|c| c.chars().count())
        .max()
        .unwrap_or(0)
        .max(8);
    let width = label_w + results.len() * (col_w + 2);
    let rule = "=".repeat(width);
    let thin = "-".repeat(width);

    let line = |out: &mut String, label: &str, cells: &[String]| {
        let pad = label_w - label.chars().count();
        let _ = write!(out, "{label}{}", " ".repeat(pad));
        for c in cells {
            let pad = col_w - c.chars().count();
            let _ = write!(out, "  {}{c}", " ".repeat(pad));
        }
        out.push('\n');
    };

    let mut out = String::new();
    out.push_str(&rule);
    out.push('\n');
    let _ = writeln!(out, "{}", outcome_title(results));
    out.push_str(&thin);
    out.push('\n');
    line(&mut out, "", &headers);
    line(&mut out, "", &names);
    out.push_str(&thin);
    out.push('\n');
    for (l, cells) in &body {
        line(&mut out, l, cells);
    }
    out.push_str(&thin);
    out.push('\n');
    for (l, cells) in &footer {
        line(&mut out, l, cells);
    }
    out.push_str(&rule);
    out.push('\n');
    out.push_str(TABLE_NOTE);
    out.push('\n');
    out
}
