//! Cluster-robust sandwich covariance.

use nalgebra::{DMatrix, DVector};

use super::spec::CrType;
use crate::error::{Error, Result};

/// `c * B (sum_g s_g s_g') B` with `B = (X'WX)^{-1}` and
/// `s_g = sum_{i in g} x_i w_i e_i`. Under CR1,
/// `c = G/(G-1) * (N-1)/(N-K)` where `K` is every estimated parameter,
/// absorbed fixed effects included.
pub fn cluster_vcov(
    x: &DMatrix<f64>,
    residuals: &[f64],
    weights: &[f64],
    clusters: &[usize],
    n_params: usize,
    cr: CrType,
) -> Result<DMatrix<f64>> {
    let (n, p) = x.shape();
    if residuals.len() != n || weights.len() != n || clusters.len() != n {
        return Err(Error::InvalidConfig("vcov inputs differ in length".into()));
    }
    let mut ids: Vec<usize> = clusters.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let g = ids.len();
    if g < 2 {
        return Err(Error::SingleCluster);
    }
    if n <= n_params {
        return Err(Error::TooFewObservations { n, k: n_params });
    }

    let xs = DMatrix::from_fn(n, p, |i, j| x[(i, j)] * weights[i].sqrt());
    let gram = xs.tr_mul(&xs);
    let bread = gram
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| gram.try_inverse())
        .ok_or_else(|| Error::RankDeficient(Vec::new()))?;

    let mut scores = vec![DVector::<f64>::zeros(p); g];
    for i in 0..n {
        let slot = ids.binary_search(&clusters[i]).expect("cluster id present");
        let we = weights[i] * residuals[i];
        for j in 0..p {
            scores[slot][j] += x[(i, j)] * we;
        }
    }
    let mut meat = DMatrix::<f64>::zeros(p, p);
    for s in &scores {
        meat += s * s.transpose();
    }
    let factor = match cr {
        CrType::Cr0 => 1.0,
        CrType::Cr1 => (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n as f64 - n_params as f64)),
    };
    let v = &bread * meat * &bread * factor;
    Ok((&v + v.transpose()) * 0.5)
}

/// Heteroskedasticity-robust HC1 covariance, `n/(n-k)` times the
/// observation-level sandwich.
pub fn hc1_vcov(x: &DMatrix<f64>, residuals: &[f64], weights: &[f64], n_params: usize) -> Result<DMatrix<f64>> {
    let (n, p) = x.shape();
    if n <= n_params {
        return Err(Error::TooFewObservations { n, k: n_params });
    }
    let xtw = DMatrix::from_fn(p, n, |j, i| x[(i, j)] * weights[i]);
    let bread = (&xtw * x).try_inverse().ok_or_else(|| Error::RankDeficient(Vec::new()))?;
    let mut meat = DMatrix::<f64>::zeros(p, p);
    for i in 0..n {
        let u = x.row(i).transpose() * (weights[i] * residuals[i]);
        meat += &u * u.transpose();
    }
    Ok(&bread * meat * &bread * (n as f64 / (n - n_params) as f64))
}
