//! Finite analogue: couplings of two probability vectors, their matching
//! probability `Σ π²`, and a random-walk check that the indetermination
//! coupling minimizes it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IndetError, Result};
use crate::margins::Margin;
use crate::numerics::RngStream;

/// A `p × q` coupling of `mu` and `nu`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCoupling {
    pub p: usize,
    pub q: usize,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub pi: Vec<Vec<f64>>,
}

impl DiscreteCoupling {
    pub fn row_sums(&self) -> Vec<f64> {
        self.pi.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.q)
            .map(|v| self.pi.iter().map(|r| r[v]).sum())
            .collect()
    }

    /// Matrix as CSV, one row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.pi {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn check_vector(name: &str, w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(IndetError::Domain(format!("{name} is empty")));
    }
    if let Some(x) = w.iter().find(|x| !(**x >= 0.0)) {
        return Err(IndetError::Domain(format!("{name} has entry {x}")));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(IndetError::Domain(format!("{name} sums to {total}")));
    }
    Ok(())
}

/// `π_uv = μ_u / q + ν_v / p - 1 / (pq)`. Cell indices in errors are 0-based.
pub fn discrete_indetermination(mu: &[f64], nu: &[f64]) -> Result<DiscreteCoupling> {
    check_vector("mu", mu)?;
    check_vector("nu", nu)?;
    let (p, q) = (mu.len(), nu.len());
    let (pf, qf) = (p as f64, q as f64);
    let mut worst: Option<(usize, usize, f64)> = None;
    let mut pi = vec![vec![0.0; q]; p];
    for (u, row) in pi.iter_mut().enumerate() {
        for (v, cell) in row.iter_mut().enumerate() {
            let val = mu[u] / qf + nu[v] / pf - 1.0 / (pf * qf);
            if val < -1e-15 && worst.is_none_or(|w| val < w.2) {
                worst = Some((u, v, val));
            }
            *cell = val.max(0.0);
        }
    }
    if let Some((row, col, value)) = worst {
        return Err(IndetError::DiscreteCompatibility { row, col, value });
    }
    Ok(DiscreteCoupling {
        p,
        q,
        mu: mu.to_vec(),
        nu: nu.to_vec(),
        pi,
    })
}

/// `π_uv = μ_u ν_v`.
pub fn discrete_independence(mu: &[f64], nu: &[f64]) -> Result<DiscreteCoupling> {
    check_vector("mu", mu)?;
    check_vector("nu", nu)?;
    Ok(DiscreteCoupling {
        p: mu.len(),
        q: nu.len(),
        mu: mu.to_vec(),
        nu: nu.to_vec(),
        pi: mu.iter().map(|a| nu.iter().map(|b| a * b).collect()).collect(),
    })
}

/// Probability that two independent draws from `c` coincide.
pub fn matching_probability(c: &DiscreteCoupling) -> f64 {
    c.pi.iter().flatten().map(|v| v * v).sum()
}

/// Walks the transportation polytope of `(mu, nu)` with random swap moves
/// `δ (e_uv + e_u'v' - e_uv' - e_u'v)` and checks that no visited coupling
/// has a smaller matching probability than the indetermination coupling.
pub fn verify_discrete_minimality(
    mu: &[f64],
    nu: &[f64],
    trials: usize,
    stream: RngStream,
) -> Result<bool> {
    let base = discrete_indetermination(mu, nu)?;
    let floor = matching_probability(&base);
    let (p, q) = (base.p, base.q);
    if p < 2 || q < 2 {
        return Ok(true);
    }
    let mut rng = stream.rng();
    let mut pi = base.pi.clone();
    for _ in 0..trials {
        let u = rng.random_range(0..p);
        let u2 = (u + rng.random_range(1..p)) % p;
        let v = rng.random_range(0..q);
        let v2 = (v + rng.random_range(1..q)) % q;
        let lo = -pi[u][v].min(pi[u2][v2]);
        let hi = pi[u][v2].min(pi[u2][v]);
        let delta = if hi > lo { rng.random_range(lo..=hi) } else { 0.0 };
        pi[u][v] = (pi[u][v] + delta).max(0.0);
        pi[u2][v2] = (pi[u2][v2] + delta).max(0.0);
        pi[u][v2] = (pi[u][v2] - delta).max(0.0);
        pi[u2][v] = (pi[u2][v] - delta).max(0.0);
        let m: f64 = pi.iter().flatten().map(|x| x * x).sum();
        if m < floor - 1e-12 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Bin masses of `m` on `bins` equal cells of `[0, 1]`.
pub fn discretize_margin(m: &Margin, bins: usize) -> Vec<f64> {
    let mut masses: Vec<f64> = (0..bins)
        .map(|i| m.cdf((i + 1) as f64 / bins as f64) - m.cdf(i as f64 / bins as f64))
        .collect();
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|x| *x /= total);
    masses
}
