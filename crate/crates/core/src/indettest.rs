//! Test of indetermination (H0: the law is π⁺) against independence
//! (H1: the law is π×) with the statistic `t_n = (1/n) Σ π×(W_i)`.
//!
//! Under H0, `t_n → l0 = L̄(π×, π⁺)`; under H1, `t_n → l1 = L̄(π×, π×)`.
//! Tail probabilities under H0 decay like `exp(-n I(t))`, where `I` is the
//! Legendre transform of the log moment generating function of `π×(W)`.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{couple_independence, couple_indetermination, BivariateLaw};
use crate::error::{IndetError, Result};
use crate::likelihood::{avg_likelihood, avg_likelihood_vs_indet};
use crate::margins::{check_compatibility, Margin};
use crate::numerics::{maximize_concave_1d, QuadratureSpec, RngStream};
use crate::sampling::{EmpiricalSample, PointSampler};

/// Everything the test needs about a margin pair.
#[derive(Debug, Clone)]
pub struct TestSetup {
    pub f: Margin,
    pub g: Margin,
    pub pi_plus: BivariateLaw,
    pub pi_times: BivariateLaw,
    pub l0: f64,
    pub l1: f64,
    pub eta: f64,
    /// Law of `π×(W)` under H0 as `(value, probability)` pairs from the
    /// quadrature grid, normalized to unit mass; equal values are merged.
    tilt: Vec<(f64, f64)>,
    ess_sup: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    #[serde(rename = "reject_H0")]
    RejectH0,
    #[serde(rename = "accept_H0")]
    AcceptH0,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdPolicy {
    /// `(l0 + l1) / 2`.
    Midpoint,
    Fixed(f64),
}

/// Monte Carlo estimate of `P0(t_n >= t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub p_hat: f64,
    /// Binomial standard error; `3 / reps` when no exceedance was seen.
    pub stderr: f64,
    pub reps: usize,
    pub exceedances: usize,
    pub zero_exceedances: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub n: usize,
    pub l0: f64,
    pub l1: f64,
    pub eta: f64,
    pub t_n: f64,
    pub threshold: f64,
    pub decision: Decision,
    #[serde(rename = "I_threshold")]
    pub i_threshold: f64,
    pub bahadur_slope: f64,
    pub tail: Option<TailEstimate>,
}

/// Constants of the separation argument between the two hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityWitness {
    /// `η / (2 ‖π×‖_∞)`.
    pub epsilon: f64,
    pub sup_norm: f64,
    /// Largest `∫π× dP` allowed within `ε ‖π×‖_∞` of `l0`.
    pub upper_reach: f64,
    /// `upper_reach < l1`.
    pub separated: bool,
}

/// Which law the replications of [`simulate_statistics`] draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    Null,
    Alternative,
}

/// Builds the test for margins `(f, g)`.
pub fn setup(f: &Margin, g: &Margin) -> Result<TestSetup> {
    setup_with(f, g, &QuadratureSpec::default())
}

pub fn setup_with(f: &Margin, g: &Margin, spec: &QuadratureSpec) -> Result<TestSetup> {
    let report = check_compatibility(f, g);
    if !report.ok {
        return Err(IndetError::Compatibility {
            slack: report.slack,
        });
    }
    if !f.is_bounded() || !g.is_bounded() {
        return Err(IndetError::Integrability(
            "the test needs bounded margin densities".into(),
        ));
    }
    if f.is_uniform() || g.is_uniform() {
        return Err(IndetError::Degenerate(
            "a uniform margin makes both hypotheses coincide (eta = 0)".into(),
        ));
    }
    let pi_plus = couple_indetermination(f, g)?;
    let pi_times = couple_independence(f, g);
    let l0 = avg_likelihood_vs_indet(&pi_times, f, g)?.value;
    let l1 = avg_likelihood(&pi_times, &pi_times)?.value;

    let (gx, gy) = pi_plus.grids(spec, None);
    let fx: Vec<f64> = gx.nodes.iter().map(|&x| f.density(x)).collect();
    let gyv: Vec<f64> = gy.nodes.iter().map(|&y| g.density(y)).collect();
    let mut tilt = Vec::with_capacity(gx.len() * gy.len());
    for (a, wx) in fx.iter().zip(&gx.weights) {
        for (b, wy) in gyv.iter().zip(&gy.weights) {
            let w = wx * wy * (a + b - 1.0);
            if w > 0.0 {
                tilt.push((a * b, w));
            }
        }
    }
    tilt.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(tilt.len());
    for (v, w) in tilt {
        match merged.last_mut() {
            Some(last) if (v - last.0).abs() <= 1e-13 * v.abs().max(1.0) => last.1 += w,
            _ => merged.push((v, w)),
        }
    }
    let mass: f64 = merged.iter().map(|p| p.1).sum();
    merged.iter_mut().for_each(|p| p.1 /= mass);
    let ess_sup = merged.last().map(|p| p.0).unwrap_or(0.0);
    Ok(TestSetup {
        f: f.clone(),
        g: g.clone(),
        pi_plus,
        pi_times,
        l0,
        l1,
        eta: l1 - l0,
        tilt: merged,
        ess_sup,
    })
}

impl TestSetup {
    /// Essential supremum of `π×(W)` under H0.
    pub fn ess_sup(&self) -> f64 {
        self.ess_sup
    }

    /// `‖π×‖_∞ = max f · max g`.
    pub fn sup_norm(&self) -> f64 {
        self.f.f_max() * self.g.f_max()
    }

    /// Number of atoms in the tabulated law of `π×(W)`.
    pub fn tilt_len(&self) -> usize {
        self.tilt.len()
    }

    fn pi_times_at(&self, x: f64, y: f64) -> f64 {
        self.f.density(x) * self.g.density(y)
    }

    /// `(ln E e^{θ π×(W)}, E[π×(W) e^{θ π×(W)}] / E e^{θ π×(W)})`.
    fn mgf_parts(&self, theta: f64) -> (f64, f64) {
        let shift = self
            .tilt
            .iter()
            .map(|p| theta * p.0)
            .fold(f64::NEG_INFINITY, f64::max);
        let (mut z, mut m) = (0.0, 0.0);
        for &(v, w) in &self.tilt {
            let e = w * (theta * v - shift).exp();
            z += e;
            m += e * v;
        }
        (z.ln() + shift, m / z)
    }
}

/// `t_n = (1/n) Σ π×(W_i)`.
pub fn statistic(setup: &TestSetup, sample: &EmpiricalSample) -> f64 {
    sample.mean_of(|x, y| setup.pi_times_at(x, y))
}

/// `φ₀(θ) = ln ∫∫ exp(θ π×) π⁺`.
pub fn log_mgf(setup: &TestSetup, theta: f64) -> f64 {
    setup.mgf_parts(theta).0
}

/// `φ₀'(θ)`, the mean of `π×(W)` under the tilted law.
pub fn tilted_mean(setup: &TestSetup, theta: f64) -> f64 {
    setup.mgf_parts(theta).1
}

/// `I(t) = sup_θ {tθ - φ₀(θ)}` for `t >= l0`; `+inf` from the essential
/// supremum of `π×(W)` on.
pub fn rate_function(setup: &TestSetup, t: f64) -> Result<f64> {
    if !t.is_finite() || t < setup.l0 - 1e-12 {
        return Err(IndetError::Domain(format!(
            "rate function is one-sided: t = {t} is below l0 = {}",
            setup.l0
        )));
    }
    if t <= setup.l0 {
        return Ok(0.0);
    }
    if t >= setup.ess_sup {
        return Ok(f64::INFINITY);
    }
    let mut hi = 8.0 / setup.ess_sup;
    while tilted_mean(setup, hi) <= t {
        hi *= 2.0;
        if hi > 1e6 {
            return Ok(f64::INFINITY);
        }
    }
    let (_, best) = maximize_concave_1d(|th| t * th - log_mgf(setup, th), 0.0, hi, 1e-12 * hi)?;
    Ok(best.max(0.0))
}

/// Bahadur slope `2 I(l1)`.
pub fn bahadur_slope(setup: &TestSetup) -> Result<f64> {
    Ok(2.0 * rate_function(setup, setup.l1)?)
}

/// `reps` independent values of `t_n` for samples of size `n` drawn under
/// `hypothesis`. Replication `k` uses substream `k`.
pub fn simulate_statistics(
    setup: &TestSetup,
    hypothesis: Hypothesis,
    n: usize,
    reps: usize,
    stream: RngStream,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(IndetError::Domain("sample size must be at least 1".into()));
    }
    let sampler = match hypothesis {
        Hypothesis::Null => PointSampler::indetermination(&setup.f, &setup.g)?,
        Hypothesis::Alternative => PointSampler::for_law(&setup.pi_times)?,
    };
    Ok((0..reps)
        .into_par_iter()
        .map(|k| {
            let mut rng: ChaCha8Rng = stream.substream(k as u64).rng();
            let mut s = 0.0;
            for _ in 0..n {
                let (x, y) = sampler.draw(&mut rng);
                s += setup.pi_times_at(x, y);
            }
            s / n as f64
        })
        .collect())
}

fn tail_from(stats: &[f64], t: f64) -> TailEstimate {
    let reps = stats.len();
    let hits = stats.iter().filter(|&&v| v >= t).count();
    let p = hits as f64 / reps as f64;
    if hits == 0 {
        TailEstimate {
            p_hat: 0.0,
            stderr: 3.0 / reps as f64,
            reps,
            exceedances: 0,
            zero_exceedances: true,
        }
    } else {
        TailEstimate {
            p_hat: p,
            stderr: (p * (1.0 - p) / reps as f64).sqrt(),
            reps,
            exceedances: hits,
            zero_exceedances: false,
        }
    }
}

/// Monte Carlo estimate of `P0(t_n >= t)` from `reps` H0 samples of size `n`.
pub fn tail_probability_mc(
    setup: &TestSetup,
    n: usize,
    t: f64,
    reps: usize,
    stream: RngStream,
) -> Result<TailEstimate> {
    Ok(tail_probability_mc_multi(setup, n, &[t], reps, stream)?.remove(0))
}

/// Same as [`tail_probability_mc`] for several thresholds sharing the same
/// replications.
pub fn tail_probability_mc_multi(
    setup: &TestSetup,
    n: usize,
    thresholds: &[f64],
    reps: usize,
    stream: RngStream,
) -> Result<Vec<TailEstimate>> {
    if reps < 1000 {
        return Err(IndetError::Domain(format!(
            "tail estimation needs at least 1000 replications, got {reps}"
        )));
    }
    if let Some(&t) = thresholds.iter().find(|&&t| !(t >= setup.l0 - 1e-12)) {
        return Err(IndetError::Domain(format!(
            "threshold {t} is below l0 = {}",
            setup.l0
        )));
    }
    let stats = simulate_statistics(setup, Hypothesis::Null, n, reps, stream)?;
    Ok(thresholds.iter().map(|&t| tail_from(&stats, t)).collect())
}

/// Runs the test on `sample`. With `tail = Some((reps, stream))` the report
/// also carries a Monte Carlo estimate of the attained tail `P0(t_n' >= t_n)`.
pub fn run_test(
    setup: &TestSetup,
    sample: &EmpiricalSample,
    policy: ThresholdPolicy,
    tail: Option<(usize, RngStream)>,
) -> Result<TestReport> {
    if sample.is_empty() {
        return Err(IndetError::Domain("empty sample".into()));
    }
    let t_n = statistic(setup, sample);
    let threshold = match policy {
        ThresholdPolicy::Midpoint => 0.5 * (setup.l0 + setup.l1),
        ThresholdPolicy::Fixed(t) => t,
    };
    let decision = if t_n >= threshold {
        Decision::RejectH0
    } else {
        Decision::AcceptH0
    };
    let i_threshold = rate_function(setup, threshold.max(setup.l0))?;
    let tail = match tail {
        Some((reps, stream)) => {
            let stats = simulate_statistics(setup, Hypothesis::Null, sample.len(), reps, stream)?;
            Some(tail_from(&stats, t_n))
        }
        None => None,
    };
    Ok(TestReport {
        n: sample.len(),
        l0: setup.l0,
        l1: setup.l1,
        eta: setup.eta,
        t_n,
        threshold,
        decision,
        i_threshold,
        bahadur_slope: bahadur_slope(setup)?,
        tail,
    })
}

/// Checks that laws whose mean of `π×` stays within `ε ‖π×‖_∞` of `l0`,
/// with `ε = η / (2 ‖π×‖_∞)`, cannot reach `l1`.
pub fn separability_witness(setup: &TestSetup) -> SeparabilityWitness {
    let sup_norm = setup.sup_norm();
    let epsilon = setup.eta / (2.0 * sup_norm);
    let upper_reach = setup.l0 + epsilon * sup_norm;
    SeparabilityWitness {
        epsilon,
        sup_norm,
        upper_reach,
        separated: upper_reach < setup.l1,
    }
}

/// `(l, I(l))` with `l = L̄(π×, alternative)`.
pub fn rate_for_alternative(setup: &TestSetup, alternative: &BivariateLaw) -> Result<(f64, f64)> {
    let l = avg_likelihood(&setup.pi_times, alternative)?.value;
    let rate = if l <= setup.l0 {
        0.0
    } else {
        rate_function(setup, l)?
    };
    Ok((l, rate))
}
