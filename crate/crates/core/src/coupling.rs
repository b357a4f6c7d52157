//! Bivariate laws on the unit square built from two margins.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{IndetError, Result};
use crate::margins::{check_compatibility, Margin};
use crate::numerics::{integrate_1d_with_breaks, QuadratureGrid, QuadratureSpec};

/// Side of the positivity/validation grid.
pub const VALIDATION_GRID: usize = 200;

type Density2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type Density1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Which construction produced a [`BivariateLaw`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "coupling", rename_all = "lowercase")]
pub enum CouplingKind {
    Indetermination,
    Independence,
    Fgm { theta: f64 },
    Perturbation { eps: f64 },
    Custom,
}

/// A zero-mean function on `[0, 1]` used to perturb a law without moving its
/// margins.
#[derive(Clone)]
pub struct ZeroMeanProfile {
    label: String,
    func: Density1,
    primitive: Density1,
    sup_abs: f64,
    square_integral: f64,
    breakpoints: Vec<f64>,
}

impl fmt::Debug for ZeroMeanProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ZeroMeanProfile({})", self.label)
    }
}

impl ZeroMeanProfile {
    /// `cos(2π k x)`.
    pub fn cosine(k: u32) -> Result<Self> {
        Self::cosine_on(0.0, 1.0, k)
    }

    /// `k` full cosine periods on `[lo, hi)`, zero outside.
    pub fn cosine_on(lo: f64, hi: f64, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(IndetError::Domain("cosine profile needs k >= 1".into()));
        }
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(IndetError::Domain(format!(
                "cosine support [{lo}, {hi}] is not inside [0, 1]"
            )));
        }
        let len = hi - lo;
        let w = 2.0 * PI * k as f64 / len;
        let inside = move |x: f64| lo <= x && (x < hi || hi == 1.0);
        let label = if lo == 0.0 && hi == 1.0 {
            format!("cos(2pi*{k}x)")
        } else {
            format!("cos(2pi*{k}x) on [{lo}, {hi}]")
        };
        let breakpoints = [lo, hi].into_iter().filter(|b| *b > 0.0 && *b < 1.0).collect();
        Ok(Self {
            label,
            func: Arc::new(move |x| if inside(x) { (w * (x - lo)).cos() } else { 0.0 }),
            primitive: Arc::new(move |x| {
                if inside(x) {
                    (w * (x - lo)).sin() / w
                } else {
                    0.0
                }
            }),
            sup_abs: 1.0,
            square_integral: 0.5 * len,
            breakpoints,
        })
    }

    /// Arbitrary callable; its mean must vanish within `1e-10`.
    pub fn from_fn(
        label: impl Into<String>,
        func: Density1,
        breakpoints: Vec<f64>,
        spec: &QuadratureSpec,
    ) -> Result<Self> {
        let mean = integrate_1d_with_breaks(|x| func(x), spec, &breakpoints)?;
        if mean.abs() > 1e-10 {
            return Err(IndetError::Domain(format!(
                "perturbation profile has mean {mean:.3e}, expected 0"
            )));
        }
        let square_integral = integrate_1d_with_breaks(|x| func(x).powi(2), spec, &breakpoints)?;
        let sup_abs = (0..=10_000)
            .map(|i| i as f64 / 1e4)
            .chain(breakpoints.iter().copied())
            .map(|x| func(x).abs())
            .fold(0.0, f64::max);
        let spec = *spec;
        let (f2, bp2) = (func.clone(), breakpoints.clone());
        let primitive: Density1 = Arc::new(move |x: f64| {
            if x <= 0.0 {
                return 0.0;
            }
            let grid = QuadratureGrid::on(0.0, x.min(1.0), &spec, &bp2);
            grid.nodes
                .iter()
                .zip(&grid.weights)
                .map(|(t, w)| w * f2(*t))
                .sum()
        });
        Ok(Self {
            label: label.into(),
            func,
            primitive,
            sup_abs,
            square_integral,
            breakpoints,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.func)(x)
    }

    /// `∫_0^x φ`.
    pub fn primitive(&self, x: f64) -> f64 {
        (self.primitive)(x)
    }

    pub fn sup_abs(&self) -> f64 {
        self.sup_abs
    }

    pub fn square_integral(&self) -> f64 {
        self.square_integral
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

#[derive(Clone)]
enum LawKind {
    Indetermination,
    Independence,
    Fgm {
        theta: f64,
    },
    Perturbation {
        base: Arc<BivariateLaw>,
        eps: f64,
        phi: ZeroMeanProfile,
        psi: ZeroMeanProfile,
    },
    Custom {
        label: String,
        density: Density2,
        breaks_x: Vec<f64>,
        breaks_y: Vec<f64>,
        sup: f64,
    },
}

/// A probability law on `[0, 1]^2` with a density and known margins.
#[derive(Clone)]
pub struct BivariateLaw {
    margin_x: Margin,
    margin_y: Margin,
    kind: LawKind,
}

impl fmt::Debug for BivariateLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "BivariateLaw({}, {:?}, {:?})",
            self.describe(),
            self.margin_x,
            self.margin_y
        )
    }
}

impl BivariateLaw {
    pub fn margin_x(&self) -> &Margin {
        &self.margin_x
    }

    pub fn margin_y(&self) -> &Margin {
        &self.margin_y
    }

    pub fn kind(&self) -> CouplingKind {
        match &self.kind {
            LawKind::Indetermination => CouplingKind::Indetermination,
            LawKind::Independence => CouplingKind::Independence,
            LawKind::Fgm { theta } => CouplingKind::Fgm { theta: *theta },
            LawKind::Perturbation { eps, .. } => CouplingKind::Perturbation { eps: *eps },
            LawKind::Custom { .. } => CouplingKind::Custom,
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            LawKind::Indetermination => "indetermination".into(),
            LawKind::Independence => "independence".into(),
            LawKind::Fgm { theta } => format!("fgm({theta})"),
            LawKind::Perturbation { base, eps, phi, psi } => format!(
                "perturbation({} + {eps}*{}x{})",
                base.describe(),
                phi.label(),
                psi.label()
            ),
            LawKind::Custom { label, .. } => format!("custom({label})"),
        }
    }

    pub fn density(&self, x: f64, y: f64) -> f64 {
        match &self.kind {
            LawKind::Indetermination => {
                self.margin_x.density(x) + self.margin_y.density(y) - 1.0
            }
            LawKind::Independence => self.margin_x.density(x) * self.margin_y.density(y),
            LawKind::Fgm { theta } => {
                let (fx, gy) = (self.margin_x.density(x), self.margin_y.density(y));
                let (cx, cy) = (self.margin_x.cdf(x), self.margin_y.cdf(y));
                fx * gy * (1.0 + theta * (1.0 - 2.0 * cx) * (1.0 - 2.0 * cy))
            }
            LawKind::Perturbation { base, eps, phi, psi } => {
                base.density(x, y) + eps * phi.eval(x) * psi.eval(y)
            }
            LawKind::Custom { density, .. } => density(x, y),
        }
    }

    /// Mass of `[0, x] × [0, y]`.
    pub fn cdf(&self, x: f64, y: f64) -> f64 {
        let (x, y) = (x.clamp(0.0, 1.0), y.clamp(0.0, 1.0));
        match &self.kind {
            LawKind::Indetermination => {
                y * self.margin_x.cdf(x) + x * self.margin_y.cdf(y) - x * y
            }
            LawKind::Independence => self.margin_x.cdf(x) * self.margin_y.cdf(y),
            LawKind::Fgm { theta } => {
                let (cx, cy) = (self.margin_x.cdf(x), self.margin_y.cdf(y));
                cx * cy + theta * cx * (1.0 - cx) * cy * (1.0 - cy)
            }
            LawKind::Perturbation { base, eps, phi, psi } => {
                base.cdf(x, y) + eps * phi.primitive(x) * psi.primitive(y)
            }
            LawKind::Custom {
                density,
                breaks_x,
                breaks_y,
                ..
            } => {
                if x == 0.0 || y == 0.0 {
                    return 0.0;
                }
                let spec = QuadratureSpec {
                    nodes_1d: 8,
                    panels: 8,
                    abs_tol: 0.0,
                };
                let gx = QuadratureGrid::on(0.0, x, &spec, breaks_x);
                let gy = QuadratureGrid::on(0.0, y, &spec, breaks_y);
                let mut acc = 0.0;
                for (xi, wx) in gx.nodes.iter().zip(&gx.weights) {
                    for (yj, wy) in gy.nodes.iter().zip(&gy.weights) {
                        acc += wx * wy * density(*xi, *yj);
                    }
                }
                acc
            }
        }
    }

    /// Density breakpoints along each axis.
    pub fn breakpoints(&self) -> (Vec<f64>, Vec<f64>) {
        let (mut bx, mut by) = (self.margin_x.breakpoints(), self.margin_y.breakpoints());
        match &self.kind {
            LawKind::Perturbation { base, phi, psi, .. } => {
                let (b1, b2) = base.breakpoints();
                bx.extend(b1);
                by.extend(b2);
                bx.extend(phi.breakpoints.iter().copied());
                by.extend(psi.breakpoints.iter().copied());
            }
            LawKind::Custom {
                breaks_x, breaks_y, ..
            } => {
                bx.extend(breaks_x.iter().copied());
                by.extend(breaks_y.iter().copied());
            }
            _ => {}
        }
        bx.sort_by(f64::total_cmp);
        by.sort_by(f64::total_cmp);
        bx.dedup();
        by.dedup();
        (bx, by)
    }

    /// Supremum of the density, analytic for the closed-form kinds.
    pub fn sup_density(&self) -> f64 {
        let (fm, gm) = (self.margin_x.f_max(), self.margin_y.f_max());
        match &self.kind {
            LawKind::Indetermination => fm + gm - 1.0,
            LawKind::Independence => fm * gm,
            LawKind::Fgm { theta } => fm * gm * (1.0 + theta.abs()),
            LawKind::Perturbation { base, eps, phi, psi } => {
                base.sup_density() + eps.abs() * phi.sup_abs() * psi.sup_abs()
            }
            LawKind::Custom { sup, .. } => *sup,
        }
    }

    pub fn is_square_integrable(&self) -> bool {
        match &self.kind {
            LawKind::Custom { sup, .. } => sup.is_finite(),
            LawKind::Perturbation { base, .. } => base.is_square_integrable(),
            _ => self.margin_x.is_square_integrable() && self.margin_y.is_square_integrable(),
        }
    }

    /// Densities on the tensor grid `xs × ys`, row-major in `x`.
    pub fn density_table(&self, xs: &[f64], ys: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(xs.len() * ys.len());
        match &self.kind {
            LawKind::Indetermination | LawKind::Independence | LawKind::Fgm { .. } => {
                let fx: Vec<f64> = xs.iter().map(|&x| self.margin_x.density(x)).collect();
                let gy: Vec<f64> = ys.iter().map(|&y| self.margin_y.density(y)).collect();
                match &self.kind {
                    LawKind::Indetermination => {
                        for a in &fx {
                            out.extend(gy.iter().map(|b| a + b - 1.0));
                        }
                    }
                    LawKind::Independence => {
                        for a in &fx {
                            out.extend(gy.iter().map(|b| a * b));
                        }
                    }
                    LawKind::Fgm { theta } => {
                        let cx: Vec<f64> =
                            xs.iter().map(|&x| 1.0 - 2.0 * self.margin_x.cdf(x)).collect();
                        let cy: Vec<f64> =
                            ys.iter().map(|&y| 1.0 - 2.0 * self.margin_y.cdf(y)).collect();
                        for (a, ca) in fx.iter().zip(&cx) {
                            out.extend(
                                gy.iter()
                                    .zip(&cy)
                                    .map(|(b, cb)| a * b * (1.0 + theta * ca * cb)),
                            );
                        }
                    }
                    _ => unreachable!(),
                }
            }
            LawKind::Perturbation { base, eps, phi, psi } => {
                let b = base.density_table(xs, ys);
                let px: Vec<f64> = xs.iter().map(|&x| phi.eval(x)).collect();
                let py: Vec<f64> = ys.iter().map(|&y| psi.eval(y)).collect();
                for (i, a) in px.iter().enumerate() {
                    for (j, c) in py.iter().enumerate() {
                        out.push(b[i * ys.len() + j] + eps * a * c);
                    }
                }
            }
            LawKind::Custom { density, .. } => {
                for &x in xs {
                    out.extend(ys.iter().map(|&y| density(x, y)));
                }
            }
        }
        out
    }

    /// Quadrature grids aligned with this law's breakpoints and `extra` ones.
    pub fn grids(
        &self,
        spec: &QuadratureSpec,
        extra: Option<&BivariateLaw>,
    ) -> (QuadratureGrid, QuadratureGrid) {
        let (mut bx, mut by) = self.breakpoints();
        if let Some(other) = extra {
            let (ox, oy) = other.breakpoints();
            bx.extend(ox);
            by.extend(oy);
        }
        (
            QuadratureGrid::unit(spec, &bx),
            QuadratureGrid::unit(spec, &by),
        )
    }

    /// Validation points along one axis: a uniform grid plus both sides of
    /// every breakpoint.
    fn probe_points(breaks: &[f64]) -> Vec<f64> {
        let mut pts: Vec<f64> = (0..VALIDATION_GRID)
            .map(|i| i as f64 / (VALIDATION_GRID - 1) as f64)
            .collect();
        for &b in breaks {
            pts.push(b);
            pts.push((b - 1e-12).max(0.0));
        }
        pts
    }

    /// Most negative density value on the validation grid, if any.
    pub fn check_positivity(&self) -> Result<()> {
        let (bx, by) = self.breakpoints();
        let xs = Self::probe_points(&bx);
        let ys = Self::probe_points(&by);
        let table = self.density_table(&xs, &ys);
        let mut worst: Option<(f64, f64, f64)> = None;
        for (i, &x) in xs.iter().enumerate() {
            for (j, &y) in ys.iter().enumerate() {
                let v = table[i * ys.len() + j];
                if v < -1e-12 && worst.is_none_or(|w| v < w.2) {
                    worst = Some((x, y, v));
                }
            }
        }
        match worst {
            Some((x, y, value)) => Err(IndetError::Positivity { x, y, value }),
            None => Ok(()),
        }
    }

    /// Positivity, unit mass and margin recovery checks.
    pub fn validate(&self, spec: &QuadratureSpec) -> Result<()> {
        self.check_positivity()?;
        let (gx, gy) = self.grids(spec, None);
        let table = self.density_table(&gx.nodes, &gy.nodes);
        let mut total = 0.0;
        for (i, wx) in gx.weights.iter().enumerate() {
            let row = &table[i * gy.len()..(i + 1) * gy.len()];
            total += wx * gy.sum(row);
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(IndetError::Numerical(format!("total mass {total}")));
        }
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let rows = self.density_table(&xs, &gy.nodes);
        for (i, &x) in xs.iter().enumerate() {
            let m = gy.sum(&rows[i * gy.len()..(i + 1) * gy.len()]);
            let err = (m - self.margin_x.density(x)).abs();
            if err > 1e-9 {
                return Err(IndetError::MarginMismatch(err));
            }
        }
        let cols = self.density_table(&gx.nodes, &xs);
        for (j, &y) in xs.iter().enumerate() {
            let m: f64 = gx
                .weights
                .iter()
                .enumerate()
                .map(|(i, w)| w * cols[i * xs.len() + j])
                .sum();
            let err = (m - self.margin_y.density(y)).abs();
            if err > 1e-9 {
                return Err(IndetError::MarginMismatch(err));
            }
        }
        Ok(())
    }
}

/// `π⁺(x, y) = f(x) + g(y) - 1`.
pub fn couple_indetermination(f: &Margin, g: &Margin) -> Result<BivariateLaw> {
    let report = check_compatibility(f, g);
    if !report.ok {
        return Err(IndetError::Compatibility {
            slack: report.slack,
        });
    }
    Ok(BivariateLaw {
        margin_x: f.clone(),
        margin_y: g.clone(),
        kind: LawKind::Indetermination,
    })
}

/// `π×(x, y) = f(x) g(y)`.
pub fn couple_independence(f: &Margin, g: &Margin) -> BivariateLaw {
    BivariateLaw {
        margin_x: f.clone(),
        margin_y: g.clone(),
        kind: LawKind::Independence,
    }
}

/// Farlie-Gumbel-Morgenstern coupling with parameter `theta`.
pub fn couple_fgm(f: &Margin, g: &Margin, theta: f64) -> Result<BivariateLaw> {
    if !(theta.abs() <= 1.0) {
        return Err(IndetError::Domain(format!(
            "fgm parameter must lie in [-1, 1], got {theta}"
        )));
    }
    Ok(BivariateLaw {
        margin_x: f.clone(),
        margin_y: g.clone(),
        kind: LawKind::Fgm { theta },
    })
}

/// `base + eps * φ(x) ψ(y)`; margins are unchanged since `∫φ = ∫ψ = 0`.
pub fn couple_perturbation(
    base: &BivariateLaw,
    eps: f64,
    phi: ZeroMeanProfile,
    psi: ZeroMeanProfile,
) -> Result<BivariateLaw> {
    if !eps.is_finite() {
        return Err(IndetError::Domain(format!("eps = {eps}")));
    }
    if eps == 0.0 {
        return Ok(base.clone());
    }
    let law = BivariateLaw {
        margin_x: base.margin_x.clone(),
        margin_y: base.margin_y.clone(),
        kind: LawKind::Perturbation {
            base: Arc::new(base.clone()),
            eps,
            phi,
            psi,
        },
    };
    law.check_positivity()?;
    Ok(law)
}

/// User-supplied density with declared margins; see [`margins_of`] for the
/// consistency check.
pub fn couple_custom(
    label: impl Into<String>,
    density: Density2,
    margin_x: &Margin,
    margin_y: &Margin,
    breaks_x: Vec<f64>,
    breaks_y: Vec<f64>,
) -> Result<BivariateLaw> {
    let mut sup: f64 = 0.0;
    let probe = |b: &[f64]| BivariateLaw::probe_points(b);
    for x in probe(&breaks_x) {
        for y in probe(&breaks_y) {
            sup = sup.max(density(x, y));
        }
    }
    let law = BivariateLaw {
        margin_x: margin_x.clone(),
        margin_y: margin_y.clone(),
        kind: LawKind::Custom {
            label: label.into(),
            density,
            breaks_x,
            breaks_y,
            sup,
        },
    };
    law.check_positivity()?;
    Ok(law)
}

/// Margins of `law`. Stored margins are returned for every closed-form kind;
/// custom densities are marginalized by quadrature and compared with their
/// declared margins.
pub fn margins_of(law: &BivariateLaw) -> Result<(Margin, Margin)> {
    let LawKind::Custom {
        density,
        breaks_x,
        breaks_y,
        label,
        ..
    } = &law.kind
    else {
        return Ok((law.margin_x.clone(), law.margin_y.clone()));
    };
    let spec = QuadratureSpec::default();
    let gy = Arc::new(QuadratureGrid::unit(&spec, breaks_y));
    let gx = Arc::new(QuadratureGrid::unit(&spec, breaks_x));
    let (d1, g1) = (density.clone(), gy.clone());
    let fx: Density1 = Arc::new(move |x| {
        g1.nodes
            .iter()
            .zip(&g1.weights)
            .map(|(y, w)| w * d1(x, *y))
            .sum()
    });
    let (d2, g2) = (density.clone(), gx.clone());
    let gyf: Density1 = Arc::new(move |y| {
        g2.nodes
            .iter()
            .zip(&g2.weights)
            .map(|(x, w)| w * d2(*x, y))
            .sum()
    });
    let mx = Margin::from_density_fn(format!("{label}:x"), fx.clone(), breaks_x.clone(), 128)?;
    let my = Margin::from_density_fn(format!("{label}:y"), gyf.clone(), breaks_y.clone(), 128)?;
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let t = (i as f64 + 0.5) / 100.0;
        worst = worst
            .max((fx(t) - law.margin_x.density(t)).abs())
            .max((gyf(t) - law.margin_y.density(t)).abs());
    }
    if worst > 1e-6 {
        return Err(IndetError::MarginMismatch(worst));
    }
    Ok((mx, my))
}

/// `∫∫ π²` by tensor quadrature.
pub fn square_integral(law: &BivariateLaw, spec: &QuadratureSpec) -> f64 {
    let (gx, gy) = law.grids(spec, None);
    let table = law.density_table(&gx.nodes, &gy.nodes);
    gx.weights
        .iter()
        .enumerate()
        .map(|(i, wx)| {
            let row = &table[i * gy.len()..(i + 1) * gy.len()];
            wx * row
                .iter()
                .zip(&gy.weights)
                .map(|(v, w)| w * v * v)
                .sum::<f64>()
        })
        .sum()
}
