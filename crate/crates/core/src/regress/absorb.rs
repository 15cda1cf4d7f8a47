//! Projection of fixed effects by iterated weighted group demeaning.

use std::collections::HashMap;
use std::hash::Hash;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ABSORB_TOL: f64 = 1e-10;
pub const ABSORB_MAX_SWEEPS: usize = 10_000;

/// Dense group ids for one fixed-effect factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    ids: Vec<u32>,
    n_levels: usize,
}

impl Factor {
    /// Relabels arbitrary keys to `0..n_levels` in order of first appearance.
    pub fn from_keys<K: Hash + Eq + Clone>(keys: &[K]) -> Self {
        let mut map: HashMap<K, u32> = HashMap::new();
        let ids = keys
            .iter()
            .map(|k| {
                let next = map.len() as u32;
                *map.entry(k.clone()).or_insert(next)
            })
            .collect();
        Factor { ids, n_levels: map.len() }
    }

    pub fn constant(n: usize) -> Self {
        Factor { ids: vec![0; n], n_levels: usize::from(n > 0) }
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Levels observed exactly once.
    pub fn singletons(&self) -> Vec<u32> {
        let mut counts = vec![0usize; self.n_levels];
        for &g in &self.ids {
            counts[g as usize] += 1;
        }
        (0..self.n_levels as u32).filter(|g| counts[*g as usize] == 1).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub iterations: usize,
    pub last_delta: f64,
}

#[derive(Debug, Clone)]
pub struct Absorbed {
    pub columns: Vec<Vec<f64>>,
    pub convergence: Convergence,
}

/// Rank of the span of all factor indicators (intercept included).
/// Exact for up to two factors: levels minus connected components of the
/// bipartite level graph.
pub fn fixed_effect_rank(factors: &[Factor]) -> usize {
    match factors {
        [] => 0,
        [f] => f.n_levels,
        [a, b, rest @ ..] => {
            let mut parent: Vec<usize> = (0..a.n_levels + b.n_levels).collect();
            fn find(p: &mut [usize], mut x: usize) -> usize {
                while p[x] != x {
                    p[x] = p[p[x]];
                    x = p[x];
                }
                x
            }
            for (ga, gb) in a.ids.iter().zip(&b.ids) {
                let (x, y) = (find(&mut parent, *ga as usize), find(&mut parent, a.n_levels + *gb as usize));
                if x != y {
                    parent[x] = y;
                }
            }
            let components = (0..parent.len()).filter(|&i| find(&mut parent, i) == i).count();
            // further factors: one redundancy each with the intercept (lower bound on redundancy)
            a.n_levels + b.n_levels - components + rest.iter().map(|f| f.n_levels.saturating_sub(1)).sum::<usize>()
        }
    }
}

struct FactorWeights<'a> {
    factor: &'a Factor,
    inv_wsum: Vec<f64>,
}

fn demean_column(
    col: &mut [f64],
    factors: &[FactorWeights<'_>],
    weights: &[f64],
    tol: f64,
    max_sweeps: usize,
) -> Result<Convergence> {
    let scale = col.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = tol * scale;
    let mut sums = Vec::new();
    let mut last_delta = f64::INFINITY;
    for sweep in 1..=max_sweeps {
        let mut delta = 0.0f64;
        for fw in factors {
            sums.clear();
            sums.resize(fw.factor.n_levels, 0.0);
            for ((g, x), w) in fw.factor.ids.iter().zip(col.iter()).zip(weights) {
                sums[*g as usize] += w * x;
            }
            for (s, iw) in sums.iter_mut().zip(&fw.inv_wsum) {
                *s *= iw;
                delta = delta.max(s.abs());
            }
            for (g, x) in fw.factor.ids.iter().zip(col.iter_mut()) {
                *x -= sums[*g as usize];
            }
        }
        last_delta = delta;
        // one factor is an exact projection
        if factors.len() <= 1 || delta < tol {
            return Ok(Convergence { iterations: sweep, last_delta });
        }
    }
    Err(Error::NoConvergence { iterations: max_sweeps, last_delta })
}

/// Residualizes every column on the fixed effects so that each has weighted
/// mean zero within every group of every factor.
pub fn absorb(columns: &[Vec<f64>], factors: &[Factor], weights: &[f64]) -> Result<Absorbed> {
    absorb_with(columns, factors, weights, ABSORB_TOL, ABSORB_MAX_SWEEPS)
}

pub fn absorb_with(
    columns: &[Vec<f64>],
    factors: &[Factor],
    weights: &[f64],
    tol: f64,
    max_sweeps: usize,
) -> Result<Absorbed> {
    let n = weights.len();
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::InvalidConfig("absorption weights must be positive".into()));
    }
    if columns.iter().any(|c| c.len() != n) || factors.iter().any(|f| f.len() != n) {
        return Err(Error::InvalidConfig("absorption inputs differ in length".into()));
    }
    let fws: Vec<FactorWeights<'_>> = factors
        .iter()
        .map(|f| {
            let mut wsum = vec![0.0; f.n_levels];
            for (g, w) in f.ids.iter().zip(weights) {
                wsum[*g as usize] += w;
            }
            FactorWeights { factor: f, inv_wsum: wsum.into_iter().map(|s| 1.0 / s).collect() }
        })
        .collect();
    if fws.is_empty() {
        return Ok(Absorbed { columns: columns.to_vec(), convergence: Convergence { iterations: 0, last_delta: 0.0 } });
    }
    let results: Vec<(Vec<f64>, Convergence)> = columns
        .par_iter()
        .map(|c| {
            let mut c = c.clone();
            let conv = demean_column(&mut c, &fws, weights, tol, max_sweeps)?;
            Ok((c, conv))
        })
        .collect::<Result<_>>()?;
    let convergence = results.iter().fold(Convergence { iterations: 0, last_delta: 0.0 }, |acc, (_, c)| Convergence {
        iterations: acc.iterations.max(c.iterations),
        last_delta: acc.last_delta.max(c.last_delta),
    });
    Ok(Absorbed { columns: results.into_iter().map(|r| r.0).collect(), convergence })
}
