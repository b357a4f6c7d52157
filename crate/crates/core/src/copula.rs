//! The copula of an indetermination coupling, the λ-family of margin pairs
//! sharing it, and its L¹ spread from the independence copula.
//!
//! With `a(u) = F⁻¹(u) - u` and `b(v) = G⁻¹(v) - v` the copula reads
//! `C⁺(u, v) = uv - a(u) b(v)`, which is why the spread factorizes.

use serde::{Deserialize, Serialize};

use crate::error::{IndetError, Result};
use crate::margins::{check_compatibility, Margin};
use crate::numerics::{integrate_1d_with_breaks, QuadratureSpec};

/// Points of the grid used by [`lambda_share_test`].
pub const LAMBDA_GRID: usize = 200;

/// Copula extracted from the indetermination coupling of `(f, g)`.
#[derive(Debug, Clone)]
pub struct SpecificIndetCopula {
    f: Margin,
    g: Margin,
}

impl SpecificIndetCopula {
    pub fn new(f: &Margin, g: &Margin) -> Result<Self> {
        let report = check_compatibility(f, g);
        if !report.ok {
            return Err(IndetError::Compatibility {
                slack: report.slack,
            });
        }
        Ok(Self {
            f: f.clone(),
            g: g.clone(),
        })
    }

    pub fn margins(&self) -> (&Margin, &Margin) {
        (&self.f, &self.g)
    }

    /// `v F⁻¹(u) + u G⁻¹(v) - F⁻¹(u) G⁻¹(v)`.
    pub fn eval(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (u.clamp(0.0, 1.0), v.clamp(0.0, 1.0));
        let (a, b) = (self.f.quantile(u), self.g.quantile(v));
        v * a + u * b - a * b
    }

    /// Crossed derivative `1/g + 1/f - 1/(f g)` at the pulled-back points.
    pub fn density(&self, u: f64, v: f64) -> Result<f64> {
        let fa = self.f.density(self.f.quantile(u));
        let gb = self.g.density(self.g.quantile(v));
        if !(fa > 0.0) {
            return Err(IndetError::SingularDensity(u));
        }
        if !(gb > 0.0) {
            return Err(IndetError::SingularDensity(v));
        }
        Ok(1.0 / gb + 1.0 / fa - 1.0 / (fa * gb))
    }

    /// `∫∫_{[u1,u2]×[v1,v2]} (C⁺ - C×)`.
    pub fn rectangle_spread(&self, u1: f64, u2: f64, v1: f64, v2: f64) -> Result<f64> {
        let spec = QuadratureSpec::default();
        let ia = deviation_integral(&self.f, u1, u2, &spec, false)?;
        let ib = deviation_integral(&self.g, v1, v2, &spec, false)?;
        Ok(-ia * ib)
    }

    /// Copula values on the `n × n` grid `{i / (n - 1)}`.
    pub fn grid(&self, n: usize) -> Vec<CopulaGridRow> {
        let n = n.max(2);
        let step = 1.0 / (n - 1) as f64;
        let mut rows = Vec::with_capacity(n * n);
        for i in 0..n {
            let u = i as f64 * step;
            for j in 0..n {
                let v = j as f64 * step;
                let c_indet = self.eval(u, v);
                let c_indep = u * v;
                rows.push(CopulaGridRow {
                    u,
                    v,
                    c_indet,
                    c_indep,
                    difference: c_indet - c_indep,
                });
            }
        }
        rows
    }
}

/// One row of the copula surface export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaGridRow {
    pub u: f64,
    pub v: f64,
    pub c_indet: f64,
    pub c_indep: f64,
    pub difference: f64,
}

/// Outcome of [`lambda_share_test`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaReport {
    pub exists: bool,
    pub lambda: Option<f64>,
    pub lower: f64,
    pub upper: f64,
    pub residual: f64,
}

/// Admissible range `[1 - 1/max f, max g / (max g - 1)]` of the linking
/// coefficient.
pub fn lambda_bounds(f: &Margin, g: &Margin) -> (f64, f64) {
    let fm = f.f_max();
    let gm = g.f_max();
    let lower = if fm.is_infinite() { 1.0 } else { 1.0 - 1.0 / fm };
    let upper = if gm.is_infinite() {
        1.0
    } else if gm <= 1.0 {
        f64::INFINITY
    } else {
        gm / (gm - 1.0)
    };
    (lower, upper)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Looks for `λ` with `F⁻¹ - id = λ (R⁻¹ - id)` and `G⁻¹ - id = (S⁻¹ - id) / λ`.
///
/// `λ` is the median of the pointwise ratios on a 200-point grid, then both
/// equations are checked on the whole grid. When no ratio is usable the
/// report carries `exists = false` and the residual of the best fit.
pub fn lambda_share_test(
    f: &Margin,
    g: &Margin,
    r: &Margin,
    s: &Margin,
    tol: f64,
) -> Result<LambdaReport> {
    let report = check_compatibility(f, g);
    if !report.ok {
        return Err(IndetError::Compatibility {
            slack: report.slack,
        });
    }
    let (lower, upper) = lambda_bounds(f, g);
    let xs: Vec<f64> = (0..LAMBDA_GRID)
        .map(|i| (i as f64 + 0.5) / LAMBDA_GRID as f64)
        .collect();
    let dev = |m: &Margin| xs.iter().map(|&x| m.quantile(x) - x).collect::<Vec<_>>();
    let (df, dg, dr, ds) = (dev(f), dev(g), dev(r), dev(s));

    let ratios = |num: &[f64], den: &[f64]| {
        num.iter()
            .zip(den)
            .filter(|(_, d)| d.abs() > 1e-8)
            .map(|(n, d)| n / d)
            .collect::<Vec<_>>()
    };
    let from_x = ratios(&df, &dr);
    let from_y = ratios(&ds, &dg);
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let lambda = if !from_x.is_empty() {
        median(from_x)
    } else if !from_y.is_empty() {
        median(from_y)
    } else {
        1.0
    };
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Ok(LambdaReport {
            exists: false,
            lambda: None,
            lower,
            upper,
            residual: max_abs(&df).max(max_abs(&dg)),
        });
    }
    let mut residual: f64 = 0.0;
    for i in 0..xs.len() {
        residual = residual
            .max((df[i] - lambda * dr[i]).abs())
            .max((dg[i] - ds[i] / lambda).abs());
    }
    let in_bounds = lambda >= lower - 1e-12 && lambda <= upper + 1e-12;
    let exists = residual <= tol && in_bounds;
    Ok(LambdaReport {
        exists,
        lambda: exists.then_some(lambda),
        lower,
        upper,
        residual,
    })
}

/// Margins `(R, S)` with `R⁻¹ = id + (F⁻¹ - id)/λ` and `S⁻¹ = id + λ (G⁻¹ - id)`,
/// which share the copula of `(F, G)`.
pub fn shared_family(f: &Margin, g: &Margin, lambda: f64) -> Result<(Margin, Margin)> {
    let (lower, upper) = lambda_bounds(f, g);
    let open = lambda > lower && lambda < upper;
    if !(lambda > 0.0) || !(open || lambda == 1.0) {
        return Err(IndetError::Domain(format!(
            "lambda {lambda} outside ({lower}, {upper})"
        )));
    }
    if lambda == 1.0 {
        return Ok((f.clone(), g.clone()));
    }
    let r = Margin::quantile_blend(1.0 / lambda, f)?;
    let s = Margin::quantile_blend(lambda, g)?;
    Ok((r, s))
}

/// Roots of `F(x) = x` in `(0, 1)`: the kinks of `|F⁻¹(u) - u|`.
fn diagonal_crossings(m: &Margin) -> Vec<f64> {
    const N: usize = 2000;
    let h = |x: f64| m.cdf(x) - x;
    let mut roots = Vec::new();
    let mut prev_x = 1.0 / N as f64;
    let mut prev = h(prev_x);
    for i in 2..N {
        let x = i as f64 / N as f64;
        let cur = h(x);
        if prev == 0.0 {
            roots.push(prev_x);
        } else if prev.signum() != cur.signum() && cur != 0.0 {
            let (mut a, mut b) = (prev_x, x);
            for _ in 0..80 {
                let mid = 0.5 * (a + b);
                if h(mid).signum() == prev.signum() {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev_x = x;
        prev = cur;
    }
    roots
}

/// `∫_{lo}^{hi} (F⁻¹(u) - u) du`, or of its absolute value.
fn deviation_integral(
    m: &Margin,
    lo: f64,
    hi: f64,
    spec: &QuadratureSpec,
    absolute: bool,
) -> Result<f64> {
    let (lo, hi) = (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0));
    if hi <= lo || m.is_uniform() {
        return Ok(0.0);
    }
    let mut breaks: Vec<f64> = m.breakpoints().into_iter().map(|b| m.cdf(b)).collect();
    breaks.extend(diagonal_crossings(m));
    breaks.retain(|&b| b > lo && b < hi);
    let map = |t: f64| lo + (hi - lo) * t;
    let unit_breaks: Vec<f64> = breaks.iter().map(|b| (b - lo) / (hi - lo)).collect();
    let val = integrate_1d_with_breaks(
        |t| {
            let u = map(t);
            let d = m.quantile(u) - u;
            if absolute {
                d.abs()
            } else {
                d
            }
        },
        spec,
        &unit_breaks,
    )?;
    Ok(val * (hi - lo))
}

/// `Δ₁ = ∫|F⁻¹(u) - u| du · ∫|G⁻¹(v) - v| dv`, the L¹ distance between the
/// indetermination and independence copulas. Never exceeds 1/16.
pub fn spread_delta1(f: &Margin, g: &Margin) -> Result<f64> {
    let report = check_compatibility(f, g);
    if !report.ok {
        return Err(IndetError::Compatibility {
            slack: report.slack,
        });
    }
    let spec = QuadratureSpec::default();
    let a = deviation_integral(f, 0.0, 1.0, &spec, true)?;
    let b = deviation_integral(g, 0.0, 1.0, &spec, true)?;
    Ok(a * b)
}

/// Half of the mass spread evenly on `[0, ε]`, half uniform on `[0, 1]`.
pub fn extremal_margin(epsilon: f64) -> Result<Margin> {
    if !(epsilon > 0.0 && epsilon <= 0.1) {
        return Err(IndetError::Domain(format!(
            "extremal margin needs 0 < epsilon <= 0.1, got {epsilon}"
        )));
    }
    Margin::histogram(
        vec![0.0, epsilon, 1.0],
        vec![0.5 + 0.5 * epsilon, 0.5 * (1.0 - epsilon)],
    )
}

/// Smoothed version of the pair attaining the maximal spread.
pub fn extremal_pair(epsilon: f64) -> Result<(Margin, Margin)> {
    let m = extremal_margin(epsilon)?;
    Ok((m.clone(), m))
}
