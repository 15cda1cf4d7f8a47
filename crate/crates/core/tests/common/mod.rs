#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sociospatial::coredata::{PanelDataset, PanelRow, RegionId};
use sociospatial::exposure::ExposureSeries;
use sociospatial::regress::CrType;

pub struct Fixture {
    pub panel: PanelDataset,
    pub exposures: Vec<ExposureSeries>,
    pub covariates: Vec<String>,
}

/// Random balanced panel with `n_cov` covariates named `x1..`, one exposure
/// series `expo`, a policy indicator with staggered state adoption and an
/// outcome that depends on all of them plus region, year and state-year
/// effects.
pub fn fixture(seed: u64, n_regions: usize, n_years: usize, n_states: usize, n_cov: usize) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = move |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let regions: Vec<RegionId> = (0..n_regions)
        .map(|k| RegionId::from_parts((k % n_states) as u32 + 1, 2 * (k / n_states) as u32 + 1).unwrap())
        .collect();
    let years: Vec<i32> = (0..n_years as i32).map(|t| 2010 + t).collect();
    let adopt: Vec<Option<i32>> = (0..n_states)
        .map(|_| if rng.random::<f64>() < 0.6 { Some(2010 + rng.random_range(1..n_years as i32)) } else { None })
        .collect();
    let beta: Vec<f64> = (0..n_cov).map(|_| z(&mut rng)).collect();
    let year_fx: Vec<f64> = (0..n_years).map(|_| z(&mut rng)).collect();
    let sy_fx: Vec<Vec<f64>> = (0..n_states).map(|_| (0..n_years).map(|_| 0.5 * z(&mut rng)).collect()).collect();
    let mut rows = Vec::new();
    let mut expo = Vec::new();
    for (k, r) in regions.iter().enumerate() {
        let s = k % n_states;
        let mu = 2.0 * z(&mut rng);
        let base_pop: f64 = rng.random_range(5_000.0..500_000.0);
        for (t, y) in years.iter().enumerate() {
            let covs: Vec<f64> = (0..n_cov).map(|_| 10.0 + 3.0 * z(&mut rng)).collect();
            let e = mu * 0.3 + z(&mut rng);
            let erpo = adopt[s].is_some_and(|a| *y >= a) as u8;
            let xb: f64 = covs.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let rate = 20.0 + mu + year_fx[t] + sy_fx[s][t] + 1.5 * e - 0.7 * erpo as f64 + xb + z(&mut rng);
            let pop = (base_pop * (1.0 + 0.01 * t as f64)).round() as u64;
            expo.push(e);
            rows.push(PanelRow {
                region: *r,
                year: *y,
                deaths: 0,
                population: pop,
                crude_rate: rate,
                age_adjusted_rate: None,
                covariates: covs,
                erpo,
            });
        }
    }
    let covariates: Vec<String> = (1..=n_cov).map(|i| format!("x{i}")).collect();
    let panel = PanelDataset::from_rows(covariates.clone(), rows, true).unwrap().0;
    // rows were generated region-major in the panel's own sorted order
    let mut sorted = regions.clone();
    sorted.sort_unstable();
    let mut ordered = vec![0.0; expo.len()];
    for (k, r) in regions.iter().enumerate() {
        let ri = sorted.binary_search(r).unwrap();
        for t in 0..n_years {
            ordered[ri * n_years + t] = expo[k * n_years + t];
        }
    }
    let series = ExposureSeries::new("expo", sorted, years, ordered).unwrap();
    Fixture { panel, exposures: vec![series], covariates }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
}

fn naive_inverse(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| (i == j) as u8 as f64));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, p);
        let d = a[c][c];
        for v in a[c].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                for k in 0..2 * n {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    a.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Sandwich written out element by element.
pub fn direct_sandwich(x: &DMatrix<f64>, e: &[f64], w: &[f64], g: &[usize], k: usize, cr: CrType) -> Vec<Vec<f64>> {
    let (n, p) = x.shape();
    let mut gram = vec![vec![0.0; p]; p];
    for i in 0..n {
        for a in 0..p {
            for b in 0..p {
                gram[a][b] += w[i] * x[(i, a)] * x[(i, b)];
            }
        }
    }
    let bread = naive_inverse(&gram);
    let n_g = g.iter().max().unwrap() + 1;
    let mut meat = vec![vec![0.0; p]; p];
    for c in 0..n_g {
        let mut s = vec![0.0; p];
        for i in 0..n {
            if g[i] == c {
                for a in 0..p {
                    s[a] += x[(i, a)] * w[i] * e[i];
                }
            }
        }
        for a in 0..p {
            for b in 0..p {
                meat[a][b] += s[a] * s[b];
            }
        }
    }
    let scale = match cr {
        CrType::Cr0 => 1.0,
        CrType::Cr1 => (n_g as f64 / (n_g as f64 - 1.0)) * ((n as f64 - 1.0) / (n as f64 - k as f64)),
    };
    let mut out = vec![vec![0.0; p]; p];
    for a in 0..p {
        for b in 0..p {
            let mut v = 0.0;
            for c in 0..p {
                for d in 0..p {
                    v += bread[a][c] * meat[c][d] * bread[d][b];
                }
            }
            out[a][b] = scale * v;
        }
    }
    out
}

pub fn random_design(seed: u64, n: usize, p: usize, g: usize) -> (DMatrix<f64>, Vec<f64>, Vec<f64>, Vec<usize>) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-3.0..3.0));
    let e = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
    let c = (0..n).map(|i| if i < g { i } else { rng.random_range(0..g) }).collect();
    (x, e, w, c)
}
