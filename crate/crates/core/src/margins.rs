//! Univariate laws on `[0, 1]`.
//!
//! A [`Margin`] exposes its density, CDF, quantile function and exact density
//! bounds. Families with closed forms (uniform, power, linear, histogram) are
//! evaluated directly; mixtures with the uniform law and quantile blends fall
//! back to bisection for whichever of CDF/quantile has no closed form.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{IndetError, Result};
use crate::numerics::{gauss_legendre, integrate_1d_with_breaks, panel_edges, QuadratureSpec};

/// Absolute slack accepted on `f_min + g_min - 1` before declaring margins
/// incompatible; covers rounding in mixture weights.
pub const COMPATIBILITY_SLACK: f64 = 1e-12;

/// Serializable description of a margin, as read from JSON configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MarginSpec {
    Uniform,
    /// `F(x) = x^alpha`, `0 < alpha <= 1`.
    Power { alpha: f64 },
    /// `f(x) = 1 + slope * (x - 1/2)`, `|slope| <= 2`.
    Linear { slope: f64 },
    /// Step density; `edges` run from 0 to 1, one mass per bin.
    Histogram { edges: Vec<f64>, masses: Vec<f64> },
    /// One side of the constructive decomposition:
    /// `first` gives `(1 - alpha) r + alpha`, `second` gives `alpha s + (1 - alpha)`.
    Constructive {
        alpha: f64,
        side: ConstructiveSide,
        base: Box<MarginSpec>,
    },
    /// Half of the mass spread on `[0, epsilon]`, half uniform.
    Extremal { epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstructiveSide {
    First,
    Second,
}

type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A univariate law on `[0, 1]` with a density.
#[derive(Clone)]
pub struct Margin {
    family: Family,
}

#[derive(Clone)]
enum Family {
    Uniform,
    Power { alpha: f64 },
    Linear { slope: f64 },
    Histogram(Arc<Histogram>),
    /// `weight * base + (1 - weight)`; `weight > 1` is allowed as long as the
    /// result stays nonnegative (inverse mixtures).
    Mixture { weight: f64, base: Arc<Margin> },
    /// Quantile `(1 - weight) u + weight * base^{-1}(u)`.
    QuantileBlend { weight: f64, base: Arc<Margin> },
    Tabulated(Arc<Tabulated>),
}

#[derive(Debug)]
struct Histogram {
    edges: Vec<f64>,
    heights: Vec<f64>,
    cum: Vec<f64>,
}

struct Tabulated {
    label: String,
    density: DensityFn,
    edges: Vec<f64>,
    cum: Vec<f64>,
    f_min: f64,
    f_max: f64,
    breakpoints: Vec<f64>,
}

impl fmt::Debug for Margin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Margin({})", self.describe())
    }
}

impl Margin {
    pub fn uniform() -> Self {
        Self {
            family: Family::Uniform,
        }
    }

    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(IndetError::Domain(format!(
                "power margin needs 0 < alpha <= 1, got {alpha}"
            )));
        }
        if alpha == 1.0 {
            return Ok(Self::uniform());
        }
        Ok(Self {
            family: Family::Power { alpha },
        })
    }

    pub fn linear(slope: f64) -> Result<Self> {
        if !(slope.abs() <= 2.0) {
            return Err(IndetError::Domain(format!(
                "linear margin needs |slope| <= 2, got {slope}"
            )));
        }
        if slope == 0.0 {
            return Ok(Self::uniform());
        }
        Ok(Self {
            family: Family::Linear { slope },
        })
    }

    pub fn histogram(edges: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || masses.len() != edges.len() - 1 {
            return Err(IndetError::Domain(format!(
                "histogram needs len(edges) = len(masses) + 1 >= 2, got {} edges and {} masses",
                edges.len(),
                masses.len()
            )));
        }
        if edges[0] != 0.0 || edges[edges.len() - 1] != 1.0 {
            return Err(IndetError::Domain("histogram edges must span [0, 1]".into()));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(IndetError::Domain(
                "histogram edges must be strictly increasing".into(),
            ));
        }
        if masses.iter().any(|m| !(*m >= 0.0)) {
            return Err(IndetError::Domain("histogram masses must be nonnegative".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(IndetError::Domain(format!(
                "histogram masses sum to {total}, expected 1"
            )));
        }
        let masses: Vec<f64> = masses.iter().map(|m| m / total).collect();
        Ok(Self::histogram_unchecked(edges, masses))
    }

    fn histogram_unchecked(edges: Vec<f64>, masses: Vec<f64>) -> Self {
        let heights = masses
            .iter()
            .zip(edges.windows(2))
            .map(|(m, w)| m / (w[1] - w[0]))
            .collect();
        let mut cum = Vec::with_capacity(edges.len());
        cum.push(0.0);
        let mut acc = 0.0;
        for m in &masses {
            acc += m;
            cum.push(acc);
        }
        *cum.last_mut().unwrap() = 1.0;
        Self {
            family: Family::Histogram(Arc::new(Histogram {
                edges,
                heights,
                cum,
            })),
        }
    }

    /// Histogram given by bin heights (densities) instead of masses.
    pub fn step(edges: Vec<f64>, heights: Vec<f64>) -> Result<Self> {
        if heights.len() + 1 != edges.len() {
            return Err(IndetError::Domain("one height per bin expected".into()));
        }
        let masses = heights
            .iter()
            .zip(edges.windows(2))
            .map(|(h, w)| h * (w[1] - w[0]))
            .collect();
        Self::histogram(edges, masses)
    }

    /// Density `weight * base + (1 - weight)`.
    ///
    /// Weights above one are accepted when the result is still a density
    /// (`weight * base_min + 1 - weight >= 0`); this is how the constructive
    /// decomposition peels the uniform part off a margin.
    pub fn mixture_with_uniform(weight: f64, base: &Margin) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(IndetError::Domain(format!("mixture weight {weight}")));
        }
        let new_min = weight * base.f_min() + 1.0 - weight;
        if new_min < -1e-12 {
            return Err(IndetError::Domain(format!(
                "mixture weight {weight} makes the density negative ({new_min})"
            )));
        }
        if weight == 0.0 {
            return Ok(Self::uniform());
        }
        if weight == 1.0 {
            return Ok(base.clone());
        }
        Ok(match &base.family {
            Family::Uniform => Self::uniform(),
            Family::Linear { slope } => Self::linear((weight * slope).clamp(-2.0, 2.0))?,
            Family::Histogram(h) => {
                let masses = h
                    .heights
                    .iter()
                    .zip(h.edges.windows(2))
                    .map(|(ht, w)| ((weight * ht + 1.0 - weight).max(0.0)) * (w[1] - w[0]))
                    .collect::<Vec<_>>();
                let total: f64 = masses.iter().sum();
                Self::histogram_unchecked(
                    h.edges.clone(),
                    masses.into_iter().map(|m| m / total).collect(),
                )
            }
            Family::Mixture {
                weight: inner,
                base: inner_base,
            } => Self::mixture_with_uniform(weight * inner, inner_base)?,
            _ => Self {
                family: Family::Mixture {
                    weight,
                    base: Arc::new(base.clone()),
                },
            },
        })
    }

    /// Margin whose quantile is `(1 - weight) u + weight * base^{-1}(u)`.
    pub fn quantile_blend(weight: f64, base: &Margin) -> Result<Self> {
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(IndetError::Domain(format!(
                "quantile blend weight must be positive, got {weight}"
            )));
        }
        // Q'(u) = (1 - c) + c / b, minimal where b is maximal.
        let slope_floor = (1.0 - weight) + weight / base.f_max();
        if slope_floor < -1e-12 {
            return Err(IndetError::Monotonicity(format!(
                "weight {weight} with max density {} gives quantile slope {slope_floor}",
                base.f_max()
            )));
        }
        if weight == 1.0 {
            return Ok(base.clone());
        }
        Ok(match &base.family {
            Family::Uniform => Self::uniform(),
            Family::Histogram(h) => {
                let edges: Vec<f64> = h
                    .cum
                    .iter()
                    .zip(&h.edges)
                    .map(|(u, e)| (1.0 - weight) * u + weight * e)
                    .collect();
                let mut masses: Vec<f64> = h.cum.windows(2).map(|w| w[1] - w[0]).collect();
                // Drop bins squeezed to zero width; their mass is zero as well.
                let mut e2 = vec![edges[0]];
                let mut m2 = Vec::new();
                for (i, m) in masses.drain(..).enumerate() {
                    if edges[i + 1] - e2[e2.len() - 1] > 1e-15 {
                        e2.push(edges[i + 1]);
                        m2.push(m);
                    } else if let Some(last) = m2.last_mut() {
                        *last += m;
                    }
                }
                *e2.last_mut().unwrap() = 1.0;
                e2[0] = 0.0;
                if m2.is_empty() {
                    return Err(IndetError::Monotonicity("blend collapsed every bin".into()));
                }
                Self::histogram_unchecked(e2, m2)
            }
            Family::QuantileBlend {
                weight: inner,
                base: inner_base,
            } => {
                // (1-c)u + c((1-d)u + d B^{-1}) = (1 - cd)u + cd B^{-1}
                Self::quantile_blend(weight * inner, inner_base)?
            }
            _ => Self {
                family: Family::QuantileBlend {
                    weight,
                    base: Arc::new(base.clone()),
                },
            },
        })
    }

    /// Margin from an arbitrary density callable. The CDF is tabulated by
    /// composite quadrature on `panels` panels aligned with `breakpoints`;
    /// density bounds come from a grid of `10^4` points plus breakpoints.
    pub fn from_density_fn(
        label: impl Into<String>,
        density: DensityFn,
        breakpoints: Vec<f64>,
        panels: usize,
    ) -> Result<Self> {
        let edges = panel_edges(0.0, 1.0, panels.max(1), &breakpoints);
        let (z, w) = gauss_legendre(8);
        let mut cum = vec![0.0];
        let mut acc = 0.0;
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            let mut s = 0.0;
            for (zi, wi) in z.iter().zip(&w) {
                let v = density(mid + half * zi);
                if !v.is_finite() {
                    return Err(IndetError::Numerical(format!(
                        "density is {v} at {}",
                        mid + half * zi
                    )));
                }
                s += wi * v;
            }
            acc += half * s;
            cum.push(acc);
        }
        let (mut f_min, mut f_max) = (f64::INFINITY, f64::NEG_INFINITY);
        let probe = (0..=10_000)
            .map(|i| i as f64 / 10_000.0)
            .chain(breakpoints.iter().copied());
        for x in probe {
            let v = density(x);
            f_min = f_min.min(v);
            f_max = f_max.max(v);
        }
        Ok(Self {
            family: Family::Tabulated(Arc::new(Tabulated {
                label: label.into(),
                density,
                edges,
                cum,
                f_min,
                f_max,
                breakpoints,
            })),
        })
    }

    pub fn from_spec(spec: &MarginSpec) -> Result<Self> {
        match spec {
            MarginSpec::Uniform => Ok(Self::uniform()),
            MarginSpec::Power { alpha } => Self::power(*alpha),
            MarginSpec::Linear { slope } => Self::linear(*slope),
            MarginSpec::Histogram { edges, masses } => Self::histogram(edges.clone(), masses.clone()),
            MarginSpec::Constructive { alpha, side, base } => {
                if !(0.0..=1.0).contains(alpha) {
                    return Err(IndetError::Domain(format!("alpha {alpha} outside [0, 1]")));
                }
                let base = Self::from_spec(base)?;
                match side {
                    ConstructiveSide::First => Self::mixture_with_uniform(1.0 - alpha, &base),
                    ConstructiveSide::Second => Self::mixture_with_uniform(*alpha, &base),
                }
            }
            MarginSpec::Extremal { epsilon } => crate::copula::extremal_margin(*epsilon),
        }
    }

    /// Density value; `+inf` where the density is unbounded.
    pub fn density(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match &self.family {
            Family::Uniform => 1.0,
            Family::Power { alpha } => {
                if x == 0.0 {
                    f64::INFINITY
                } else {
                    alpha * x.powf(alpha - 1.0)
                }
            }
            Family::Linear { slope } => 1.0 + slope * (x - 0.5),
            Family::Histogram(h) => h.heights[h.bin(x)],
            Family::Mixture { weight, base } => {
                (weight * base.density(x) + 1.0 - weight).max(0.0)
            }
            Family::QuantileBlend { weight, base } => {
                let u = self.cdf(x);
                let y = base.quantile(u);
                let b = base.density(y);
                let denom = (1.0 - weight) + weight / b;
                if denom <= 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / denom
                }
            }
            Family::Tabulated(t) => (t.density)(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        match &self.family {
            Family::Uniform => x,
            Family::Power { alpha } => x.powf(*alpha),
            Family::Linear { slope } => x + 0.5 * slope * (x * x - x),
            Family::Histogram(h) => {
                let i = h.bin(x);
                (h.cum[i] + h.heights[i] * (x - h.edges[i])).min(1.0)
            }
            Family::Mixture { weight, base } => {
                (weight * base.cdf(x) + (1.0 - weight) * x).clamp(0.0, 1.0)
            }
            Family::QuantileBlend { .. } => bisect(|u| self.quantile(u), x),
            Family::Tabulated(t) => t.cdf(x),
        }
    }

    /// Left-continuous inverse of the CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        match &self.family {
            Family::Uniform => u,
            Family::Power { alpha } => u.powf(1.0 / alpha),
            Family::Linear { slope } => {
                let b = 1.0 - 0.5 * slope;
                // Root of (s/2) x^2 + b x - u = 0 in [0, 1], cancellation-free form.
                2.0 * u / (b + (b * b + 2.0 * slope * u).max(0.0).sqrt())
            }
            Family::Histogram(h) => {
                let n = h.heights.len();
                let i = h.cum[1..].partition_point(|&c| c < u).min(n - 1);
                if h.heights[i] == 0.0 {
                    return h.edges[i];
                }
                (h.edges[i] + (u - h.cum[i]) / h.heights[i]).clamp(h.edges[i], h.edges[i + 1])
            }
            Family::Mixture { .. } | Family::Tabulated(_) => bisect(|x| self.cdf(x), u),
            Family::QuantileBlend { weight, base } => {
                ((1.0 - weight) * u + weight * base.quantile(u)).clamp(0.0, 1.0)
            }
        }
    }

    /// Exact infimum of the density.
    pub fn f_min(&self) -> f64 {
        match &self.family {
            Family::Uniform => 1.0,
            Family::Power { alpha } => *alpha,
            Family::Linear { slope } => 1.0 - 0.5 * slope.abs(),
            Family::Histogram(h) => h.heights.iter().copied().fold(f64::INFINITY, f64::min),
            Family::Mixture { weight, base } => (weight * base.f_min() + 1.0 - weight).max(0.0),
            Family::QuantileBlend { weight, base } => {
                let b = base.f_min();
                if b <= 0.0 {
                    0.0
                } else {
                    1.0 / ((1.0 - weight) + weight / b)
                }
            }
            Family::Tabulated(t) => t.f_min,
        }
    }

    /// Exact supremum of the density; `+inf` when unbounded.
    pub fn f_max(&self) -> f64 {
        match &self.family {
            Family::Uniform => 1.0,
            Family::Power { .. } => f64::INFINITY,
            Family::Linear { slope } => 1.0 + 0.5 * slope.abs(),
            Family::Histogram(h) => h.heights.iter().copied().fold(0.0, f64::max),
            Family::Mixture { weight, base } => weight * base.f_max() + 1.0 - weight,
            Family::QuantileBlend { weight, base } => {
                let denom = (1.0 - weight) + weight / base.f_max();
                if denom <= 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / denom
                }
            }
            Family::Tabulated(t) => t.f_max,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.f_max().is_finite()
    }

    /// A density with infimum one is the uniform density almost everywhere.
    pub fn is_uniform(&self) -> bool {
        (self.f_min() - 1.0).abs() <= 1e-12
    }

    /// Interior abscissae where the density jumps or has a kink.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.family {
            Family::Uniform | Family::Power { .. } | Family::Linear { .. } => Vec::new(),
            Family::Histogram(h) => h.edges[1..h.edges.len() - 1].to_vec(),
            Family::Mixture { base, .. } => base.breakpoints(),
            Family::QuantileBlend { base, .. } => {
                // Interior edges of the base map through u = B(b), x = Q(u).
                base.breakpoints()
                    .into_iter()
                    .map(|b| self.quantile(base.cdf(b)))
                    .collect()
            }
            Family::Tabulated(t) => t.breakpoints.clone(),
        }
    }

    /// `∫ f^2`, exact where the family allows it.
    pub fn square_integral(&self) -> Result<f64> {
        match &self.family {
            Family::Uniform => Ok(1.0),
            Family::Power { alpha } => {
                if *alpha <= 0.5 {
                    Err(IndetError::Integrability(format!(
                        "power({alpha}) density is not square integrable (needs alpha > 1/2)"
                    )))
                } else {
                    Ok(alpha * alpha / (2.0 * alpha - 1.0))
                }
            }
            Family::Linear { slope } => Ok(1.0 + slope * slope / 12.0),
            Family::Histogram(h) => Ok(h
                .heights
                .iter()
                .zip(h.edges.windows(2))
                .map(|(ht, w)| ht * ht * (w[1] - w[0]))
                .sum()),
            Family::Mixture { weight, base } => {
                let b2 = base.square_integral()?;
                Ok(weight * weight * b2 + 2.0 * weight * (1.0 - weight) + (1.0 - weight).powi(2))
            }
            _ => {
                self.require_square_integrable()?;
                let bp = self.breakpoints();
                integrate_1d_with_breaks(
                    |x| self.density(x).powi(2),
                    &QuadratureSpec::default(),
                    &bp,
                )
            }
        }
    }

    pub fn is_square_integrable(&self) -> bool {
        match &self.family {
            Family::Power { alpha } => *alpha > 0.5,
            Family::Mixture { weight, base } => *weight == 0.0 || base.is_square_integrable(),
            Family::QuantileBlend { .. } | Family::Tabulated(_) => self.is_bounded(),
            _ => true,
        }
    }

    pub fn require_square_integrable(&self) -> Result<()> {
        if self.is_square_integrable() {
            Ok(())
        } else {
            Err(IndetError::Integrability(format!(
                "{} is not square integrable",
                self.describe()
            )))
        }
    }

    /// Short human-readable name.
    pub fn describe(&self) -> String {
        match &self.family {
            Family::Uniform => "uniform".into(),
            Family::Power { alpha } => format!("power({alpha})"),
            Family::Linear { slope } => format!("linear({slope})"),
            Family::Histogram(h) => format!("histogram({} bins)", h.heights.len()),
            Family::Mixture { weight, base } => {
                format!("mixture({weight}, {})", base.describe())
            }
            Family::QuantileBlend { weight, base } => {
                format!("quantile_blend({weight}, {})", base.describe())
            }
            Family::Tabulated(t) => t.label.clone(),
        }
    }

    /// Serializable form when the family has one.
    pub fn to_spec(&self) -> Option<MarginSpec> {
        match &self.family {
            Family::Uniform => Some(MarginSpec::Uniform),
            Family::Power { alpha } => Some(MarginSpec::Power { alpha: *alpha }),
            Family::Linear { slope } => Some(MarginSpec::Linear { slope: *slope }),
            Family::Histogram(h) => Some(MarginSpec::Histogram {
                edges: h.edges.clone(),
                masses: h.cum.windows(2).map(|w| w[1] - w[0]).collect(),
            }),
            _ => None,
        }
    }

    /// Quadrature check of `∫ f = 1` and of the density bounds on a grid.
    pub fn validate(&self, spec: &QuadratureSpec) -> Result<()> {
        let bp = self.breakpoints();
        if self.is_bounded() {
            let total = integrate_1d_with_breaks(|x| self.density(x), spec, &bp)?;
            if (total - 1.0).abs() > 1e-9 {
                return Err(IndetError::Numerical(format!(
                    "{} integrates to {total}",
                    self.describe()
                )));
            }
        }
        if self.cdf(0.0) != 0.0 || self.cdf(1.0) != 1.0 {
            return Err(IndetError::Numerical("CDF does not span [0, 1]".into()));
        }
        Ok(())
    }
}

impl Histogram {
    /// Right-continuous bin lookup; `x = 1` falls in the last bin.
    fn bin(&self, x: f64) -> usize {
        let n = self.heights.len();
        self.edges[1..n].partition_point(|&e| e <= x)
    }
}

impl Tabulated {
    fn cdf(&self, x: f64) -> f64 {
        let k = self.edges[1..self.edges.len() - 1].partition_point(|&e| e <= x);
        let a = self.edges[k];
        if x <= a {
            return self.cum[k];
        }
        let (z, w) = gauss_legendre(8);
        let half = 0.5 * (x - a);
        let mid = 0.5 * (x + a);
        let part: f64 = z
            .iter()
            .zip(&w)
            .map(|(zi, wi)| wi * (self.density)(mid + half * zi))
            .sum();
        (self.cum[k] + half * part).clamp(0.0, 1.0)
    }
}

/// Bisection for the smallest `x` in `[0, 1]` with `g(x) >= level`, where
/// `g` is nondecreasing with `g(0) = 0` and `g(1) = 1`.
fn bisect<G: Fn(f64) -> f64>(g: G, level: f64) -> f64 {
    let (mut a, mut b) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if g(m) >= level {
            b = m;
        } else {
            a = m;
        }
    }
    b
}

/// Outcome of [`check_compatibility`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub ok: bool,
    pub slack: f64,
}

/// Checks `min f + min g >= 1`, which makes `f(x) + g(y) - 1` a density.
pub fn check_compatibility(mu: &Margin, nu: &Margin) -> CompatibilityReport {
    let slack = mu.f_min() + nu.f_min() - 1.0;
    CompatibilityReport {
        ok: slack >= -COMPATIBILITY_SLACK,
        slack,
    }
}

/// `f = (1 - alpha) r + alpha`, `g = alpha s + (1 - alpha)`.
pub fn constructive_compose(alpha: f64, r: &Margin, s: &Margin) -> Result<(Margin, Margin)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(IndetError::Domain(format!("alpha {alpha} outside [0, 1]")));
    }
    let f = Margin::mixture_with_uniform(1.0 - alpha, r)?;
    let g = Margin::mixture_with_uniform(alpha, s)?;
    Ok((f, g))
}

/// Inverse of [`constructive_compose`] with `alpha = min f`.
pub fn constructive_decompose(f: &Margin, g: &Margin) -> Result<(f64, Margin, Margin)> {
    let report = check_compatibility(f, g);
    if !report.ok {
        return Err(IndetError::Compatibility {
            slack: report.slack,
        });
    }
    let alpha = f.f_min();
    if alpha <= 0.0 || alpha >= 1.0 - 1e-15 {
        return Err(IndetError::Degenerate(format!(
            "min f = {alpha}: one margin is uniform or vanishes, the decomposition is degenerate"
        )));
    }
    let r = Margin::mixture_with_uniform(1.0 / (1.0 - alpha), f)?;
    let s = Margin::mixture_with_uniform(1.0 / alpha, g)?;
    Ok((alpha, r, s))
}

/// Affine map between `[lo, hi]` and `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub lo: f64,
    pub hi: f64,
    /// `du/dx = 1 / (hi - lo)`, the factor applied to densities on the unit segment.
    pub jacobian: f64,
}

impl AffineMap {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(IndetError::Domain(format!("segment [{lo}, {hi}] is empty")));
        }
        Ok(Self {
            lo,
            hi,
            jacobian: 1.0 / (hi - lo),
        })
    }

    pub fn to_unit(&self, x: f64) -> f64 {
        (x - self.lo) * self.jacobian
    }

    pub fn from_unit(&self, u: f64) -> f64 {
        self.lo + (self.hi - self.lo) * u
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// A law on a general segment `[lo, hi]`, stored as the push-forward of a
/// unit margin.
#[derive(Debug, Clone)]
pub struct SegmentMargin {
    unit: Margin,
    map: AffineMap,
}

impl SegmentMargin {
    pub fn stretch(unit: Margin, lo: f64, hi: f64) -> Result<Self> {
        Ok(Self {
            unit,
            map: AffineMap::new(lo, hi)?,
        })
    }

    pub fn map(&self) -> AffineMap {
        self.map
    }

    pub fn density(&self, x: f64) -> f64 {
        if x < self.map.lo || x > self.map.hi {
            return 0.0;
        }
        self.unit.density(self.map.to_unit(x)) * self.map.jacobian
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.unit.cdf(self.map.to_unit(x))
    }
}

/// Result of [`rescale_affine`].
#[derive(Debug, Clone)]
pub struct RescaledPair {
    pub f: Margin,
    pub g: Margin,
    pub x_map: AffineMap,
    pub y_map: AffineMap,
}

impl RescaledPair {
    /// Indetermination density on the original rectangle
    /// `f(x)/(B-b) + g(y)/(A-a) - 1/((A-a)(B-b))` with `f, g` the segment densities.
    pub fn segment_indetermination_density(&self, x: f64, y: f64) -> f64 {
        let (la, lb) = (self.x_map.length(), self.y_map.length());
        let fx = self.f.density(self.x_map.to_unit(x)) / la;
        let gy = self.g.density(self.y_map.to_unit(y)) / lb;
        fx / lb + gy / la - 1.0 / (la * lb)
    }
}

/// Brings two segment laws back to `[0, 1]` and records the maps.
pub fn rescale_affine(f: &SegmentMargin, g: &SegmentMargin) -> Result<RescaledPair> {
    Ok(RescaledPair {
        f: f.unit.clone(),
        g: g.unit.clone(),
        x_map: f.map,
        y_map: g.map,
    })
}
