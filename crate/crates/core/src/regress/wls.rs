//! Weighted least squares via Householder QR of the weight-scaled system,
//! with order-preserving pruning of collinear columns.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative size of a column's orthogonal component below which it is
/// treated as collinear with earlier columns.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct WlsFit {
    /// Estimates for the kept columns, in order.
    pub beta: Vec<f64>,
    /// Indices of kept columns in the input design.
    pub kept: Vec<usize>,
    /// Indices of pruned columns in the input design.
    pub pruned: Vec<usize>,
    pub residuals: Vec<f64>,
    /// Upper-triangular factor of the weight-scaled kept design.
    pub r: DMatrix<f64>,
}

fn scaled_design(x: &DMatrix<f64>, sqrt_w: &[f64], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), cols.len(), |i, j| x[(i, cols[j])] * sqrt_w[i])
}

/// Minimizes `sum_i w_i (y_i - x_i b)^2`. A column is pruned when the part
/// of it orthogonal to the preceding columns is below [`RANK_TOL`] of its
/// norm, so later duplicates go and earlier columns stay.
pub fn wls(x: &DMatrix<f64>, y: &[f64], weights: &[f64]) -> Result<WlsFit> {
    let (n, p) = x.shape();
    if y.len() != n || weights.len() != n {
        return Err(Error::InvalidConfig("wls inputs differ in length".into()));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidConfig("wls weights must be positive".into()));
    }
    let sqrt_w: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let all: Vec<usize> = (0..p).collect();
    let xs = scaled_design(x, &sqrt_w, &all);

    let (kept, pruned) = screen_columns(xs);
    if kept.len() > n {
        return Err(Error::TooFewObservations { n, k: kept.len() });
    }

    let ys = DVector::from_iterator(n, y.iter().zip(&sqrt_w).map(|(v, s)| v * s));
    let (beta, r) = if kept.is_empty() {
        (Vec::new(), DMatrix::zeros(0, 0))
    } else {
        let xk = scaled_design(x, &sqrt_w, &kept);
        let qr = xk.qr();
        let r = qr.r();
        let mut qty = ys.clone();
        qr.q_tr_mul(&mut qty);
        let head = qty.rows(0, kept.len()).into_owned();
        let b = r.solve_upper_triangular(&head).ok_or_else(|| Error::RankDeficient(Vec::new()))?;
        (b.iter().copied().collect::<Vec<_>>(), r)
    };
    let residuals = (0..n)
        .map(|i| {
            let fitted: f64 = kept.iter().zip(&beta).map(|(&j, b)| x[(i, j)] * b).sum();
            y[i] - fitted
        })
        .collect();
    Ok(WlsFit { beta, kept, pruned, residuals, r })
}

/// Householder pass that only accepts a column when its component orthogonal
/// to the already accepted ones is large enough; rejected columns leave no
/// reflector behind, so later decisions are not distorted by them.
fn screen_columns(mut a: DMatrix<f64>) -> (Vec<usize>, Vec<usize>) {
    let (n, p) = a.shape();
    let norms: Vec<f64> = (0..p).map(|j| a.column(j).norm()).collect();
    let mut kept = Vec::new();
    let mut pruned = Vec::new();
    let mut k = 0;
    for j in 0..p {
        let tail = if k < n { a.view((k, j), (n - k, 1)).norm() } else { 0.0 };
        if norms[j] == 0.0 || tail <= RANK_TOL * norms[j] {
            pruned.push(j);
            continue;
        }
        // reflector mapping the tail of column j onto a multiple of e_k
        let mut v: DVector<f64> = a.view((k, j), (n - k, 1)).column(0).into_owned();
        let alpha = if v[0] >= 0.0 { -tail } else { tail };
        v[0] -= alpha;
        let vnorm2 = v.norm_squared();
        if vnorm2 > 0.0 {
            for c in j..p {
                let mut col = a.view_mut((k, c), (n - k, 1));
                let scale = -2.0 * v.dot(&col.column(0)) / vnorm2;
                for (x, vi) in col.iter_mut().zip(v.iter()) {
                    *x += scale * vi;
                }
            }
        }
        kept.push(j);
        k += 1;
    }
    (kept, pruned)
}

/// `(X'WX)^{-1}` from the triangular factor, `R^{-1} R^{-T}`.
pub fn bread_from_r(r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = r.nrows();
    let rinv = r.solve_upper_triangular(&DMatrix::identity(k, k)).ok_or_else(|| Error::RankDeficient(Vec::new()))?;
    let b = &rinv * rinv.transpose();
    Ok((&b + b.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_linear_fit() {
        let x = DMatrix::from_fn(6, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y: Vec<f64> = (0..6).map(|i| 2.0 - 0.5 * i as f64).collect();
        let w = vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0];
        let fit = wls(&x, &y, &w).unwrap();
        assert!((fit.beta[0] - 2.0).abs() < 1e-12);
        assert!((fit.beta[1] + 0.5).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|e| e.abs() < 1e-10));
    }

    #[test]
    fn duplicate_column_pruned() {
        let x = DMatrix::from_fn(8, 3, |i, j| match j {
            0 => 1.0,
            _ => (i * i) as f64,
        });
        let y: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let fit = wls(&x, &y, &[1.0; 8]).unwrap();
        assert_eq!(fit.kept, vec![0, 1]);
        assert_eq!(fit.pruned, vec![2]);
    }

    #[test]
    fn redundant_indicators_do_not_hide_later_columns() {
        // intercept, a full set of group indicators (one redundant), then
        // covariates with little residual variation left
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, groups) = (14, 6);
        let x = DMatrix::from_fn(n, 1 + groups + 3, |i, j| match j {
            0 => 1.0,
            j if j <= groups => (i % groups == j - 1) as u8 as f64,
            _ => rng.random_range(-1.0..1.0),
        });
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fit = wls(&x, &y, &[1.0; 14]).unwrap();
        assert_eq!(fit.pruned, vec![groups]);
        // residuals are orthogonal to every column, pruned ones included
        for j in 0..x.ncols() {
            let dot: f64 = (0..n).map(|i| x[(i, j)] * fit.residuals[i]).sum();
            assert!(dot.abs() < 1e-10, "column {j}: {dot}");
        }
    }

    #[test]
    fn matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 50;
        let x = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-2.0..2.0));
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
        let fit = wls(&x, &y, &w).unwrap();

        // independent route: solve (X'WX) b = X'Wy with LU
        let wd = DMatrix::from_diagonal(&DVector::from_vec(w.clone()));
        let xtwx = x.transpose() * &wd * &x;
        let xtwy = x.transpose() * &wd * DVector::from_vec(y.clone());
        let b = xtwx.lu().solve(&xtwy).unwrap();
        for j in 0..3 {
            assert!((fit.beta[j] - b[j]).abs() < 1e-8 * b[j].abs().max(1.0));
        }
    }

    #[test]
    fn bread_inverts_gram() {
        let x = DMatrix::from_fn(10, 2, |i, j| if j == 0 { 1.0 } else { (i as f64).sin() });
        let w = vec![2.0; 10];
        let fit = wls(&x, &[0.0; 10], &w).unwrap();
        let b = bread_from_r(&fit.r).unwrap();
        let gram = x.transpose() * &x * 2.0;
        let id = gram * b;
        assert!((id - DMatrix::identity(2, 2)).abs().max() < 1e-10);
    }
}
