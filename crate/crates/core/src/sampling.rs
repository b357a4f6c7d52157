//! Exact samplers for margins and bivariate laws.
//!
//! The indetermination density splits as a two-component mixture: writing
//! `f = (1 - α) r + α` and `g = α s + (1 - α)` with `α = min f`,
//!
//! ```text
//! f(x) + g(y) - 1 = (1 - α) r(x) · 1 + α · 1 · s(y)
//! ```
//!
//! so a point is drawn from `r ⊗ U` with probability `1 - α` and from
//! `U ⊗ s` otherwise. No rejection step is needed.
//!
//! Work is split into fixed-size blocks, each with its own substream, so the
//! output does not depend on the number of worker threads.

use std::io::{self, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{BivariateLaw, CouplingKind};
use crate::error::{IndetError, Result};
use crate::margins::{check_compatibility, constructive_decompose, Margin};
use crate::numerics::{panel_edges, RngStream};

/// Draws per substream block.
pub const BLOCK: usize = 4096;

/// Rejection samplers give up when fewer than this fraction of proposals
/// is accepted.
pub const MIN_ACCEPTANCE: f64 = 1e-6;

/// An i.i.d. sample on the unit square together with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSample {
    pub points: Vec<(f64, f64)>,
    pub stream: RngStream,
    pub source: String,
    /// Fraction of proposals kept, for rejection-based samplers.
    pub acceptance_rate: Option<f64>,
}

impl EmpiricalSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(1/n) Σ h(W_i)`.
    pub fn mean_of<H: Fn(f64, f64) -> f64>(&self, h: H) -> f64 {
        let s: f64 = self.points.iter().map(|&(x, y)| h(x, y)).sum();
        s / self.points.len() as f64
    }

    /// CSV with a `#` header recording seed, stream and source.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "# seed={} stream={} source={}",
            self.stream.seed, self.stream.stream_id, self.source
        )?;
        writeln!(out, "x,y")?;
        for (x, y) in &self.points {
            writeln!(out, "{x},{y}")?;
        }
        Ok(())
    }
}

/// The empirical measure `h ↦ (1/n) Σ h(W_i)`.
pub fn empirical_measure(sample: &EmpiricalSample) -> impl Fn(&dyn Fn(f64, f64) -> f64) -> f64 + '_ {
    move |h| sample.mean_of(h)
}

/// Runs `draw` on consecutive blocks of at most [`BLOCK`] items, block `b`
/// using substream `b`, and concatenates the results in block order.
pub(crate) fn par_blocks<T, F>(n: usize, stream: RngStream, draw: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> Result<Vec<T>> + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    let parts: Result<Vec<Vec<T>>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let len = BLOCK.min(n - b * BLOCK);
            let mut rng = stream.substream(b as u64).rng();
            draw(&mut rng, len)
        })
        .collect();
    Ok(parts?.into_iter().flatten().collect())
}

/// `n` draws `F⁻¹(U_i)`.
pub fn sample_margin(m: &Margin, n: usize, stream: RngStream) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(IndetError::Domain("sample size must be at least 1".into()));
    }
    par_blocks(n, stream, |rng, len| {
        Ok((0..len).map(|_| m.quantile(rng.random::<f64>())).collect())
    })
}

/// Per-point sampler for a bivariate law.
#[derive(Clone)]
pub(crate) enum PointSampler {
    Product {
        f: Margin,
        g: Margin,
    },
    Mixture {
        alpha: f64,
        r: Margin,
        s: Margin,
    },
    Fgm {
        theta: f64,
        f: Margin,
        g: Margin,
    },
    Grid(GridProposal),
}

impl PointSampler {
    pub(crate) fn for_law(law: &BivariateLaw) -> Result<Self> {
        let (f, g) = (law.margin_x().clone(), law.margin_y().clone());
        Ok(match law.kind() {
            CouplingKind::Independence => Self::Product { f, g },
            CouplingKind::Indetermination => Self::indetermination(&f, &g)?,
            CouplingKind::Fgm { theta } => Self::Fgm { theta, f, g },
            CouplingKind::Perturbation { .. } | CouplingKind::Custom => {
                Self::Grid(GridProposal::new(law)?)
            }
        })
    }

    pub(crate) fn indetermination(f: &Margin, g: &Margin) -> Result<Self> {
        let report = check_compatibility(f, g);
        if !report.ok {
            return Err(IndetError::Compatibility {
                slack: report.slack,
            });
        }
        match constructive_decompose(f, g) {
            Ok((alpha, r, s)) => Ok(Self::Mixture { alpha, r, s }),
            // One margin is uniform, so π⁺ is the product law.
            Err(IndetError::Degenerate(_)) => Ok(Self::Product {
                f: f.clone(),
                g: g.clone(),
            }),
            Err(e) => Err(e),
        }
    }

    #[inline]
    pub(crate) fn draw(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        match self {
            Self::Product { f, g } => (f.quantile(rng.random()), g.quantile(rng.random())),
            Self::Mixture { alpha, r, s } => {
                let pick: f64 = rng.random();
                let (a, b): (f64, f64) = (rng.random(), rng.random());
                if pick < 1.0 - alpha {
                    (r.quantile(a), b)
                } else {
                    (a, s.quantile(b))
                }
            }
            Self::Fgm { theta, f, g } => {
                let u: f64 = rng.random();
                let w: f64 = rng.random();
                let a = theta * (1.0 - 2.0 * u);
                // Solves v + a v (1 - v) = w for v in [0, 1].
                let v = if a.abs() < 1e-12 {
                    w
                } else {
                    let b = 1.0 + a;
                    2.0 * w / (b + (b * b - 4.0 * a * w).max(0.0).sqrt())
                };
                (f.quantile(u), g.quantile(v))
            }
            Self::Grid(grid) => loop {
                if let Some(p) = grid.try_draw(rng) {
                    break p;
                }
            },
        }
    }
}

/// Rejection from a piecewise-constant envelope on cells aligned with the
/// density breakpoints.
#[derive(Clone)]
pub(crate) struct GridProposal {
    law: BivariateLaw,
    xs: Vec<f64>,
    ys: Vec<f64>,
    env: Vec<f64>,
    cum: Vec<f64>,
}

const GRID_CELLS: usize = 32;
const GRID_PROBE: usize = 6;

impl GridProposal {
    fn new(law: &BivariateLaw) -> Result<Self> {
        let sup = law.sup_density();
        if !sup.is_finite() {
            return Err(IndetError::Integrability(format!(
                "{} has an unbounded density",
                law.describe()
            )));
        }
        let (bx, by) = law.breakpoints();
        let xs = panel_edges(0.0, 1.0, GRID_CELLS, &bx);
        let ys = panel_edges(0.0, 1.0, GRID_CELLS, &by);
        let (nx, ny) = (xs.len() - 1, ys.len() - 1);
        let mut env = Vec::with_capacity(nx * ny);
        let mut cum = Vec::with_capacity(nx * ny);
        let mut total = 0.0;
        for i in 0..nx {
            let (x0, x1) = (xs[i], xs[i + 1]);
            let px: Vec<f64> = (0..GRID_PROBE)
                .map(|k| x0 + (x1 - x0) * k as f64 / (GRID_PROBE - 1) as f64)
                .map(|x| x.min(x1 - 1e-12 * (x1 - x0)))
                .collect();
            for j in 0..ny {
                let (y0, y1) = (ys[j], ys[j + 1]);
                let py: Vec<f64> = (0..GRID_PROBE)
                    .map(|k| y0 + (y1 - y0) * k as f64 / (GRID_PROBE - 1) as f64)
                    .map(|y| y.min(y1 - 1e-12 * (y1 - y0)))
                    .collect();
                let peak = law
                    .density_table(&px, &py)
                    .into_iter()
                    .fold(0.0f64, f64::max);
                // Cells are smooth inside; pad the probe maximum, capped by
                // the analytic bound.
                let e = (1.1 * peak + 1e-3 * sup).min(sup);
                env.push(e);
                total += e * (x1 - x0) * (y1 - y0);
                cum.push(total);
            }
        }
        Ok(Self {
            law: law.clone(),
            xs,
            ys,
            env,
            cum,
        })
    }

    fn try_draw(&self, rng: &mut ChaCha8Rng) -> Option<(f64, f64)> {
        let total = *self.cum.last().expect("nonempty grid");
        let t = rng.random::<f64>() * total;
        let k = self.cum.partition_point(|&c| c <= t).min(self.cum.len() - 1);
        let ny = self.ys.len() - 1;
        let (i, j) = (k / ny, k % ny);
        let x = self.xs[i] + (self.xs[i + 1] - self.xs[i]) * rng.random::<f64>();
        let y = self.ys[j] + (self.ys[j + 1] - self.ys[j]) * rng.random::<f64>();
        let u: f64 = rng.random();
        (u * self.env[k] <= self.law.density(x, y)).then_some((x, y))
    }
}

/// Exact sample of the indetermination coupling of `(f, g)` through the
/// constructive mixture. When one margin is uniform the coupling is the
/// product law and the product sampler is used instead.
pub fn sample_indetermination(
    f: &Margin,
    g: &Margin,
    n: usize,
    stream: RngStream,
) -> Result<EmpiricalSample> {
    let sampler = PointSampler::indetermination(f, g)?;
    run_sampler(
        &sampler,
        n,
        stream,
        format!("indetermination({}, {})", f.describe(), g.describe()),
    )
}

/// Sample of any [`BivariateLaw`].
pub fn sample_law(law: &BivariateLaw, n: usize, stream: RngStream) -> Result<EmpiricalSample> {
    let sampler = PointSampler::for_law(law)?;
    run_sampler(&sampler, n, stream, law.describe())
}

fn run_sampler(
    sampler: &PointSampler,
    n: usize,
    stream: RngStream,
    source: String,
) -> Result<EmpiricalSample> {
    if n == 0 {
        return Err(IndetError::Domain("sample size must be at least 1".into()));
    }
    let points = par_blocks(n, stream, |rng, len| {
        Ok((0..len).map(|_| sampler.draw(rng)).collect())
    })?;
    Ok(EmpiricalSample {
        points,
        stream,
        source,
        acceptance_rate: None,
    })
}

/// Sample of density `π² / ∫π²`: draw `X ~ π` and keep it when
/// `π(X) >= U ‖π‖_∞`.
pub fn sample_square_density(
    law: &BivariateLaw,
    n: usize,
    stream: RngStream,
) -> Result<EmpiricalSample> {
    if n == 0 {
        return Err(IndetError::Domain("sample size must be at least 1".into()));
    }
    let sup = law.sup_density();
    if !sup.is_finite() {
        return Err(IndetError::Integrability(format!(
            "{} has an unbounded density",
            law.describe()
        )));
    }
    let sampler = PointSampler::for_law(law)?;
    let blocks = par_blocks(n, stream, |rng, len| {
        let mut kept = Vec::with_capacity(len);
        let mut proposed: u64 = 0;
        while kept.len() < len {
            let (x, y) = sampler.draw(rng);
            proposed += 1;
            if law.density(x, y) >= rng.random::<f64>() * sup {
                kept.push((x, y));
            }
            if proposed >= 1_000_000 && (kept.len() as f64) < MIN_ACCEPTANCE * proposed as f64 {
                return Err(IndetError::Efficiency {
                    rate: kept.len() as f64 / proposed as f64,
                });
            }
        }
        Ok(vec![(kept, proposed)])
    })?;
    let mut points = Vec::with_capacity(n);
    let mut proposed = 0u64;
    for (chunk, p) in blocks {
        points.extend(chunk);
        proposed += p;
    }
    Ok(EmpiricalSample {
        acceptance_rate: Some(n as f64 / proposed as f64),
        points,
        stream,
        source: format!("square({})", law.describe()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{
        couple_custom, couple_fgm, couple_independence, couple_indetermination,
        couple_perturbation,
    };
    use crate::fixtures;
    use std::sync::Arc;

    /// Kolmogorov statistic of `xs` against `cdf`.
    fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = cdf(x);
                (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Mass of a rectangle under `law` from its CDF.
    fn cell_mass(law: &BivariateLaw, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        law.cdf(x1, y1) - law.cdf(x0, y1) - law.cdf(x1, y0) + law.cdf(x0, y0)
    }

    fn count_in(s: &EmpiricalSample, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        s.points
            .iter()
            .filter(|&&(x, y)| x >= x0 && x < x1 && y >= y0 && y < y1)
            .count() as f64
    }

    #[test]
    fn margin_sampler_examples() {
        let u = sample_margin(&Margin::uniform(), 10, RngStream::new(1, 0)).unwrap();
        let mut rng = RngStream::new(1, 0).substream(0).rng();
        for v in u {
            assert_eq!(v, rng.random::<f64>());
        }

        let p = Margin::power(0.75).unwrap();
        let n = 100_000;
        let xs = sample_margin(&p, n, RngStream::new(2, 0)).unwrap();
        assert!(ks(xs, |x| p.cdf(x)) < 1.63 / (n as f64).sqrt());

        let (f, _) = fixtures::spike_pair();
        let xs = sample_margin(&f, n, RngStream::new(3, 0)).unwrap();
        let low = xs.iter().filter(|&&x| x < 0.2).count() as f64;
        let sd = (n as f64 * 0.6 * 0.4).sqrt();
        assert!((low - 0.6 * n as f64).abs() < 4.0 * sd);
    }

    #[test]
    fn indetermination_sampler_uniform_margins() {
        let u = Margin::uniform();
        let s = sample_indetermination(&u, &u, 50_000, RngStream::new(4, 0)).unwrap();
        let q = count_in(&s, 0.0, 0.5, 0.0, 0.5);
        let sd = (50_000.0f64 * 0.25 * 0.75).sqrt();
        assert!((q - 12_500.0).abs() < 4.0 * sd);
    }

    #[test]
    fn indetermination_sampler_spike() {
        let (f, g) = fixtures::spike_pair();
        let n = 100_000;
        let s = sample_indetermination(&f, &g, n, RngStream::new(5, 0)).unwrap();
        let xs: Vec<f64> = s.points.iter().map(|p| p.0).collect();
        assert!(ks(xs, |x| f.cdf(x)) < 1.63 / (n as f64).sqrt());

        let law = couple_indetermination(&f, &g).unwrap();
        let p = cell_mass(&law, 0.0, 0.2, 0.8, 1.0);
        assert!((p - 0.2).abs() < 1e-15);
        let c = count_in(&s, 0.0, 0.2, 0.8, 1.0);
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((c - n as f64 * p).abs() < 4.0 * sd);
    }

    #[test]
    fn indetermination_component_split() {
        // For the spike pair, alpha = 1/2: r lives on [0, 0.2], s on [0.8, 1].
        let (f, g) = fixtures::spike_pair();
        let (alpha, r, s) = constructive_decompose(&f, &g).unwrap();
        assert!((alpha - 0.5).abs() < 1e-15);
        assert!((r.density(0.1) - 5.0).abs() < 1e-12 && r.density(0.5) == 0.0);
        assert!((s.density(0.9) - 5.0).abs() < 1e-12 && s.density(0.5) == 0.0);
    }

    #[test]
    fn determinism() {
        let (f, g) = fixtures::spike_pair();
        let a = sample_indetermination(&f, &g, 10_000, RngStream::new(6, 1)).unwrap();
        let b = sample_indetermination(&f, &g, 10_000, RngStream::new(6, 1)).unwrap();
        let c = sample_indetermination(&f, &g, 10_000, RngStream::new(6, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.points, c.points);
    }

    fn chi_square_5x5(law: &BivariateLaw, s: &EmpiricalSample) -> f64 {
        let n = s.len() as f64;
        let mut stat = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                let (x0, x1) = (i as f64 / 5.0, (i + 1) as f64 / 5.0);
                let (y0, y1) = (j as f64 / 5.0, (j + 1) as f64 / 5.0);
                let p = cell_mass(law, x0, x1, y0, y1);
                let c = count_in(s, x0, x1, y0, y1);
                if p > 0.0 {
                    stat += (c - n * p).powi(2) / (n * p);
                } else {
                    assert_eq!(c, 0.0);
                }
            }
        }
        stat
    }

    #[test]
    fn fgm_and_perturbation_samplers() {
        let (f, g) = fixtures::linear_pair();
        // 24 degrees of freedom: the 0.1% critical value is 51.18.
        let fgm = couple_fgm(&f, &g, 0.9).unwrap();
        let s = sample_law(&fgm, 50_000, RngStream::new(7, 0)).unwrap();
        assert!(chi_square_5x5(&fgm, &s) < 51.18);

        let (sf, sg) = fixtures::spike_pair();
        let plus = couple_indetermination(&sf, &sg).unwrap();
        let (eps, phi, psi) = fixtures::spike_perturbations().remove(2);
        let pert = couple_perturbation(&plus, eps, phi, psi).unwrap();
        let s = sample_law(&pert, 50_000, RngStream::new(8, 0)).unwrap();
        assert!(chi_square_5x5(&pert, &s) < 51.18);
    }

    #[test]
    fn custom_sampler() {
        let u = Margin::uniform();
        let law = couple_custom(
            "checkerboard",
            Arc::new(|x: f64, y: f64| if (x < 0.5) == (y < 0.5) { 1.5 } else { 0.5 }),
            &u,
            &u,
            vec![0.5],
            vec![0.5],
        )
        .unwrap();
        let s = sample_law(&law, 40_000, RngStream::new(9, 0)).unwrap();
        let c = count_in(&s, 0.0, 0.5, 0.0, 0.5);
        let sd = (40_000.0f64 * 0.375 * 0.625).sqrt();
        assert!((c - 15_000.0).abs() < 4.0 * sd);
    }

    #[test]
    fn square_density_uniform_always_accepts() {
        let u = Margin::uniform();
        let flat = couple_independence(&u, &u);
        let s = sample_square_density(&flat, 1000, RngStream::new(10, 0)).unwrap();
        assert_eq!(s.acceptance_rate, Some(1.0));
    }

    #[test]
    fn square_density_spike_rate_and_concentration() {
        let (f, g) = fixtures::spike_pair();
        let plus = couple_indetermination(&f, &g).unwrap();
        assert_eq!(plus.sup_density(), 5.0);
        let n = 60_000;
        let s = sample_square_density(&plus, n, RngStream::new(11, 0)).unwrap();
        let rate = s.acceptance_rate.unwrap();
        let proposed = n as f64 / rate;
        let sd = (0.6 * 0.4 / proposed).sqrt();
        assert!((rate - 0.6).abs() < 4.0 * sd, "{rate}");

        // The mode cell [0,0.2]x[0.8,1] has density 5: π-mass 0.2, π²-mass 1/3.
        let c = count_in(&s, 0.0, 0.2, 0.8, 1.0);
        let p = 0.2 * 0.2 * 25.0 / 3.0;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((c - n as f64 * p).abs() < 4.0 * sd);
        assert!(p > 0.2);
    }

    #[test]
    fn empirical_measure_examples() {
        let (f, g) = fixtures::spike_pair();
        let s = sample_indetermination(&f, &g, 1000, RngStream::new(12, 0)).unwrap();
        let m = empirical_measure(&s);
        assert_eq!(m(&|_, _| 1.0), 1.0);
        assert_eq!(
            m(&|x, y| if (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y) { 1.0 } else { 0.0 }),
            1.0
        );
    }

    #[test]
    fn csv_header() {
        let (f, g) = fixtures::spike_pair();
        let s = sample_indetermination(&f, &g, 3, RngStream::new(13, 4)).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# seed=13 stream=4 source=indetermination"));
        assert_eq!(lines.next(), Some("x,y"));
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn unbounded_law_rejected_by_square_sampler() {
        let p = Margin::power(0.75).unwrap();
        let law = couple_independence(&p, &p);
        assert!(matches!(
            sample_square_density(&law, 10, RngStream::new(1, 0)),
            Err(IndetError::Integrability(_))
        ));
    }
}
