//! Quadrature, monotone inversion, concave maximization and seeded random
//! streams shared by the rest of the crate.
//!
//! Integration is composite Gauss-Legendre on a fixed set of panels over
//! `[0, 1]`. Callers may add breakpoints (discontinuities of a density) which
//! are merged into the panel edges so that piecewise-smooth integrands are
//! integrated panel-by-panel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IndetError, Result};

/// Composite Gauss-Legendre settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub nodes_1d: usize,
    pub panels: usize,
    pub abs_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            nodes_1d: 16,
            panels: 64,
            abs_tol: 1e-12,
        }
    }
}

impl QuadratureSpec {
    pub fn new(nodes_1d: usize, panels: usize) -> Result<Self> {
        let spec = Self {
            nodes_1d,
            panels,
            abs_tol: 1e-12,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes_1d < 2 {
            return Err(IndetError::Domain(format!(
                "nodes_1d must be >= 2, got {}",
                self.nodes_1d
            )));
        }
        if self.panels < 1 {
            return Err(IndetError::Domain("panels must be >= 1".into()));
        }
        if !(self.abs_tol >= 0.0) {
            return Err(IndetError::Domain("abs_tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, computed by Newton
/// iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Sorted panel edges on `[lo, hi]`: a uniform subdivision merged with the
/// breakpoints that fall strictly inside.
pub fn panel_edges(lo: f64, hi: f64, panels: usize, breakpoints: &[f64]) -> Vec<f64> {
    let width = hi - lo;
    let mut edges: Vec<f64> = (0..=panels)
        .map(|k| lo + width * k as f64 / panels as f64)
        .collect();
    edges.extend(breakpoints.iter().copied().filter(|&b| b > lo && b < hi));
    edges.sort_by(f64::total_cmp);
    let tiny = 1e-14 * width.max(1.0);
    edges.dedup_by(|a, b| (*a - *b).abs() <= tiny);
    *edges.last_mut().unwrap() = hi;
    edges
}

/// Tabulated composite rule: absolute nodes and weights on an interval.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureGrid {
    /// Composite rule on `[0, 1]`.
    pub fn unit(spec: &QuadratureSpec, breakpoints: &[f64]) -> Self {
        Self::on(0.0, 1.0, spec, breakpoints)
    }

    pub fn on(lo: f64, hi: f64, spec: &QuadratureSpec, breakpoints: &[f64]) -> Self {
        let (ref_nodes, ref_weights) = gauss_legendre(spec.nodes_1d);
        let edges = panel_edges(lo, hi, spec.panels, breakpoints);
        let mut nodes = Vec::with_capacity((edges.len() - 1) * spec.nodes_1d);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for pair in edges.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (z, w) in ref_nodes.iter().zip(&ref_weights) {
                nodes.push(mid + half * z);
                weights.push(half * w);
            }
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> Result<f64> {
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(x);
            if !v.is_finite() {
                return Err(IndetError::Numerical(format!(
                    "integrand is {v} at node {x}"
                )));
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// Weighted sum of precomputed node values.
    pub fn sum(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Panel-composite Gauss-Legendre approximation of the integral of `f` over `[0, 1]`.
pub fn integrate_1d<F: FnMut(f64) -> f64>(f: F, spec: &QuadratureSpec) -> Result<f64> {
    spec.validate()?;
    QuadratureGrid::unit(spec, &[]).integrate(f)
}

/// Like [`integrate_1d`] with panel edges aligned to `breakpoints`.
pub fn integrate_1d_with_breaks<F: FnMut(f64) -> f64>(
    f: F,
    spec: &QuadratureSpec,
    breakpoints: &[f64],
) -> Result<f64> {
    spec.validate()?;
    QuadratureGrid::unit(spec, breakpoints).integrate(f)
}

/// Tensor-product integral over `[0, 1]^2`.
pub fn integrate_2d<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    spec: &QuadratureSpec,
    breaks_x: &[f64],
    breaks_y: &[f64],
) -> Result<f64> {
    spec.validate()?;
    let gx = QuadratureGrid::unit(spec, breaks_x);
    let gy = QuadratureGrid::unit(spec, breaks_y);
    let mut acc = 0.0;
    for (&x, &wx) in gx.nodes.iter().zip(&gx.weights) {
        let mut row = 0.0;
        for (&y, &wy) in gy.nodes.iter().zip(&gy.weights) {
            let v = f(x, y);
            if !v.is_finite() {
                return Err(IndetError::Numerical(format!(
                    "integrand is {v} at node ({x}, {y})"
                )));
            }
            row += wy * v;
        }
        acc += wx * row;
    }
    Ok(acc)
}

/// Smallest `x` in `[0, 1]` with `cdf(x) >= u`, by bisection.
///
/// For a continuous nondecreasing `cdf` the result satisfies
/// `|cdf(x) - u| <= tol`; on a flat stretch at level `u` the left end of the
/// stretch is returned.
pub fn invert_monotone<F: Fn(f64) -> f64>(cdf: F, u: f64, tol: f64) -> Result<f64> {
    invert_monotone_on(cdf, u, 0.0, 1.0, tol)
}

pub fn invert_monotone_on<F: Fn(f64) -> f64>(
    cdf: F,
    u: f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64> {
    let (f_lo, f_hi) = (cdf(lo), cdf(hi));
    let slack = tol.max(4.0 * f64::EPSILON);
    if !(u >= f_lo - slack && u <= f_hi + slack) {
        return Err(IndetError::Domain(format!(
            "level {u} outside [{f_lo}, {f_hi}]"
        )));
    }
    if u <= f_lo {
        return Ok(lo);
    }
    if u >= f_hi {
        // Leftmost point reaching the top level.
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if cdf(m) >= f_hi {
                b = m;
            } else {
                a = m;
            }
        }
        return Ok(b);
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if cdf(m) >= u {
            b = m;
        } else {
            a = m;
        }
    }
    let err = (cdf(b) - u).abs().min((cdf(a) - u).abs());
    if err > tol && (b - a) > 4.0 * f64::EPSILON {
        return Err(IndetError::Numerical(format!(
            "bisection stalled with residual {err:.3e}"
        )));
    }
    Ok(b)
}

/// Golden-section search for the maximum of a concave function on
/// `[lo, hi]`. Returns `(argmax, max)`.
pub fn maximize_concave_1d<F: FnMut(f64) -> f64>(
    mut h: F,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    if !(lo <= hi) {
        return Err(IndetError::Domain(format!("empty bracket [{lo}, {hi}]")));
    }
    let mut eval = |t: f64| -> Result<f64> {
        let v = h(t);
        if v.is_nan() || v == f64::INFINITY {
            Err(IndetError::Numerical(format!("objective is {v} at {t}")))
        } else {
            Ok(v)
        }
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    while (b - a) > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d)?;
        }
        if b - a <= f64::EPSILON * (a.abs() + b.abs()) {
            break;
        }
    }
    // Endpoints are candidates too: the maximum of a concave function may sit there.
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for t in [lo, hi] {
        let v = eval(t)?;
        if v > best.1 {
            best = (t, v);
        }
    }
    Ok(best)
}

/// Reproducible random stream: a ChaCha8 generator keyed by `seed` and
/// positioned on the independent stream `stream_id`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Child stream for worker or replication `index`; same seed, distinct
    /// stream id.
    pub fn substream(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: splitmix64(splitmix64(self.stream_id) ^ index.wrapping_add(1)),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
