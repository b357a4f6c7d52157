//! Average likelihood `L̄(P, Q) = ∫∫ π_P π_Q`, Kullback-Leibler divergence and
//! the sup-distance between bivariate CDFs.

use serde::{Deserialize, Serialize};

use crate::coupling::{couple_indetermination, margins_of, BivariateLaw};
use crate::error::{IndetError, Result};
use crate::margins::{check_compatibility, Margin};
use crate::numerics::{QuadratureGrid, QuadratureSpec};
use crate::sampling::EmpiricalSample;

/// Side of the grid on which [`rho_distance`] compares CDFs.
pub const RHO_GRID: usize = 200;

/// Densities below this value count as zero in [`kl_divergence`].
pub const DENSITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodValue {
    pub value: f64,
    /// Largest integrand value met on the quadrature grid.
    pub integrand_max: f64,
}

fn require_integrable(law: &BivariateLaw) -> Result<()> {
    if law.is_square_integrable() {
        Ok(())
    } else {
        Err(IndetError::Integrability(format!(
            "{} is not square integrable",
            law.describe()
        )))
    }
}

/// `∫∫ π_P π_Q` with the default quadrature.
pub fn avg_likelihood(p: &BivariateLaw, q: &BivariateLaw) -> Result<LikelihoodValue> {
    avg_likelihood_with(p, q, &QuadratureSpec::default())
}

pub fn avg_likelihood_with(
    p: &BivariateLaw,
    q: &BivariateLaw,
    spec: &QuadratureSpec,
) -> Result<LikelihoodValue> {
    require_integrable(p)?;
    require_integrable(q)?;
    let (gx, gy) = p.grids(spec, Some(q));
    let tp = p.density_table(&gx.nodes, &gy.nodes);
    let tq = q.density_table(&gx.nodes, &gy.nodes);
    let (mut value, mut integrand_max) = (0.0, 0.0f64);
    for (i, wx) in gx.weights.iter().enumerate() {
        let mut row = 0.0;
        for (j, wy) in gy.weights.iter().enumerate() {
            let k = i * gy.len() + j;
            let v = tp[k] * tq[k];
            integrand_max = integrand_max.max(v);
            row += wy * v;
        }
        value += wx * row;
    }
    if !value.is_finite() {
        return Err(IndetError::Numerical(format!("average likelihood is {value}")));
    }
    Ok(LikelihoodValue {
        value,
        integrand_max,
    })
}

fn inner_1d(a: &Margin, b: &Margin, spec: &QuadratureSpec) -> Result<(f64, f64)> {
    let mut breaks = a.breakpoints();
    breaks.extend(b.breakpoints());
    let grid = QuadratureGrid::unit(spec, &breaks);
    let mut peak = 0.0f64;
    let value = grid.integrate(|x| {
        let v = a.density(x) * b.density(x);
        peak = peak.max(v);
        v
    })?;
    Ok((value, peak))
}

/// `L̄(h, π⁺) = ∫ f h₁ + ∫ g h₂ - 1`, where `h₁, h₂` are the margins of `h`.
/// Only 1D quadratures are involved.
pub fn avg_likelihood_vs_indet(h: &BivariateLaw, f: &Margin, g: &Margin) -> Result<LikelihoodValue> {
    let report = check_compatibility(f, g);
    if !report.ok {
        return Err(IndetError::Compatibility {
            slack: report.slack,
        });
    }
    let (h1, h2) = margins_of(h)?;
    let spec = QuadratureSpec::default();
    let (a, pa) = inner_1d(f, &h1, &spec)?;
    let (b, pb) = inner_1d(g, &h2, &spec)?;
    Ok(LikelihoodValue {
        value: a + b - 1.0,
        integrand_max: pa.max(pb),
    })
}

/// `∫∫ log(π_P / π_Q) π_P`; `+inf` when `π_Q` vanishes on a grid node where
/// `π_P` does not.
pub fn kl_divergence(p: &BivariateLaw, q: &BivariateLaw) -> f64 {
    let spec = QuadratureSpec::default();
    let (gx, gy) = p.grids(&spec, Some(q));
    let tp = p.density_table(&gx.nodes, &gy.nodes);
    let tq = q.density_table(&gx.nodes, &gy.nodes);
    let mut acc = 0.0;
    for (i, wx) in gx.weights.iter().enumerate() {
        for (j, wy) in gy.weights.iter().enumerate() {
            let k = i * gy.len() + j;
            let (a, b) = (tp[k], tq[k]);
            if a <= DENSITY_FLOOR {
                continue;
            }
            if b <= DENSITY_FLOOR {
                return f64::INFINITY;
            }
            acc += wx * wy * a * (a / b).ln();
        }
    }
    acc
}

fn rho_axis() -> Vec<f64> {
    (0..RHO_GRID)
        .map(|i| i as f64 / (RHO_GRID - 1) as f64)
        .collect()
}

/// `sup |P([0,x]×[0,y]) - Q([0,x]×[0,y])|` over a 200 × 200 grid.
pub fn rho_distance(p: &BivariateLaw, q: &BivariateLaw) -> f64 {
    let axis = rho_axis();
    let mut worst = 0.0f64;
    for &x in &axis {
        for &y in &axis {
            worst = worst.max((p.cdf(x, y) - q.cdf(x, y)).abs());
        }
    }
    worst
}

/// Fenwick tree over `1..=n` counting inserted ranks.
struct Fenwick(Vec<u32>);

impl Fenwick {
    fn new(n: usize) -> Self {
        Self(vec![0; n + 1])
    }

    fn add(&mut self, mut i: usize) {
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    fn prefix(&self, mut i: usize) -> u32 {
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Sup-distance between the empirical CDF of `sample` and the CDF of `q`,
/// on the 200 × 200 grid and at every sample point (both the value and the
/// left limit of the empirical CDF there).
pub fn rho_distance_empirical(sample: &EmpiricalSample, q: &BivariateLaw) -> f64 {
    let pts = &sample.points;
    let n = pts.len();
    if n == 0 {
        return rho_distance_to_zero(q);
    }
    let inv_n = 1.0 / n as f64;
    let axis = rho_axis();
    let m = axis.len();

    // counts[i][j] = #{x <= axis[i], y <= axis[j]} from a cell histogram.
    let cell = |t: f64| ((t * (m - 1) as f64).ceil() as usize).min(m - 1);
    let mut counts = vec![0u32; m * m];
    for &(x, y) in pts {
        counts[cell(x) * m + cell(y)] += 1;
    }
    for i in 0..m {
        for j in 1..m {
            counts[i * m + j] += counts[i * m + j - 1];
        }
    }
    for i in 1..m {
        for j in 0..m {
            counts[i * m + j] += counts[(i - 1) * m + j];
        }
    }
    let mut worst = 0.0f64;
    for (i, &x) in axis.iter().enumerate() {
        for (j, &y) in axis.iter().enumerate() {
            let emp = counts[i * m + j] as f64 * inv_n;
            worst = worst.max((emp - q.cdf(x, y)).abs());
        }
    }

    let mut ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let rank_le = |y: f64| ys.partition_point(|&v| v <= y);
    let rank_lt = |y: f64| ys.partition_point(|&v| v < y);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| pts[a].0.total_cmp(&pts[b].0));
    let mut tree = Fenwick::new(ys.len());
    let mut k = 0;
    while k < n {
        let x = pts[order[k]].0;
        let mut end = k;
        while end < n && pts[order[end]].0 == x {
            end += 1;
        }
        // Strictly-left points are in the tree: left limits first.
        for &idx in &order[k..end] {
            let y = pts[idx].1;
            let below = tree.prefix(rank_lt(y)) as f64 * inv_n;
            worst = worst.max((below - q.cdf(x, y)).abs());
        }
        for &idx in &order[k..end] {
            tree.add(rank_le(pts[idx].1));
        }
        for &idx in &order[k..end] {
            let y = pts[idx].1;
            let at = tree.prefix(rank_le(y)) as f64 * inv_n;
            worst = worst.max((at - q.cdf(x, y)).abs());
        }
        k = end;
    }
    worst
}

fn rho_distance_to_zero(q: &BivariateLaw) -> f64 {
    let axis = rho_axis();
    axis.iter()
        .flat_map(|&x| axis.iter().map(move |&y| (x, y)))
        .map(|(x, y)| q.cdf(x, y).abs())
        .fold(0.0, f64::max)
}

/// `L̄(P, π⁺)` computed both ways, for diagnostics.
pub fn decomposition_gap(h: &BivariateLaw, f: &Margin, g: &Margin) -> Result<f64> {
    let one_d = avg_likelihood_vs_indet(h, f, g)?.value;
    let two_d = avg_likelihood(h, &couple_indetermination(f, g)?)?.value;
    Ok((one_d - two_d).abs())
}
