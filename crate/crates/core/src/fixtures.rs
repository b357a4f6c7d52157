//! Reference margins and random generators shared by tests, benches and the CLI.

use rand::Rng;

use crate::copula::extremal_margin;
use crate::coupling::ZeroMeanProfile;
use crate::margins::{constructive_compose, Margin};

/// `f = 3` on `[0, 0.2]`, `0.5` elsewhere; `g` is its mirror image.
pub fn spike_pair() -> (Margin, Margin) {
    let f = Margin::histogram(vec![0.0, 0.2, 1.0], vec![0.6, 0.4]).expect("valid histogram");
    let g = Margin::histogram(vec![0.0, 0.8, 1.0], vec![0.4, 0.6]).expect("valid histogram");
    (f, g)
}

/// `f(x) = x + 1/2`, `g(y) = 3/2 - y`.
pub fn linear_pair() -> (Margin, Margin) {
    (
        Margin::linear(1.0).expect("valid slope"),
        Margin::linear(-1.0).expect("valid slope"),
    )
}

/// Perturbations `(eps, φ, ψ)` that keep the spike indetermination density
/// nonnegative. It vanishes on `[0.2, 1] × [0, 0.8]`, so `φ` lives on `[0, 0.2]`
/// where the density is at least 2.5.
pub fn spike_perturbations() -> Vec<(f64, ZeroMeanProfile, ZeroMeanProfile)> {
    [(0.5, 1, 1), (1.0, 2, 1), (2.0, 1, 3)]
        .into_iter()
        .map(|(eps, k1, k2)| {
            (
                eps,
                ZeroMeanProfile::cosine_on(0.0, 0.2, k1).expect("valid profile"),
                ZeroMeanProfile::cosine(k2).expect("valid profile"),
            )
        })
        .collect()
}

/// Smoothed extremal margins, identical on both axes.
pub fn extremal(epsilon: f64) -> (Margin, Margin) {
    let m = extremal_margin(epsilon).expect("epsilon in (0, 0.1]");
    (m.clone(), m)
}

/// Histogram with `1..=max_bins` random bins and random masses.
pub fn random_histogram<R: Rng + ?Sized>(rng: &mut R, max_bins: usize) -> Margin {
    let bins = rng.random_range(1..=max_bins.max(1));
    let mut cuts: Vec<f64> = (0..bins - 1).map(|_| rng.random_range(0.02..0.98)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let mut edges = vec![0.0];
    edges.extend(cuts);
    edges.push(1.0);
    let raw: Vec<f64> = (0..edges.len() - 1)
        .map(|_| rng.random_range(0.05..1.0))
        .collect();
    let total: f64 = raw.iter().sum();
    Margin::histogram(edges, raw.into_iter().map(|m| m / total).collect())
        .expect("valid histogram")
}

fn random_base<R: Rng + ?Sized>(rng: &mut R) -> Margin {
    match rng.random_range(0..4) {
        0 => Margin::linear(rng.random_range(-2.0..2.0)).expect("valid slope"),
        _ => random_histogram(rng, 6),
    }
}

/// Compatible pair built through the constructive decomposition with a
/// random `alpha` and random bases.
pub fn random_compatible_pair<R: Rng + ?Sized>(rng: &mut R) -> (Margin, Margin) {
    let alpha = rng.random_range(0.1..0.9);
    let r = random_base(rng);
    let s = random_base(rng);
    constructive_compose(alpha, &r, &s).expect("constructive pair")
}

/// Probability vectors of lengths `p` and `q` with `p min(mu) + q min(nu) >= 1`.
pub fn random_discrete_pair<R: Rng + ?Sized>(rng: &mut R, p: usize, q: usize) -> (Vec<f64>, Vec<f64>) {
    let a: f64 = rng.random_range(0.0..1.0);
    let b: f64 = a * rng.random::<f64>();
    let simplex = |rng: &mut R, k: usize| {
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0) + 1e-9).collect();
        let t: f64 = w.iter().sum();
        w.into_iter().map(|x| x / t).collect::<Vec<_>>()
    };
    let w = simplex(rng, p);
    let v = simplex(rng, q);
    let mu = w.iter().map(|x| a / p as f64 + (1.0 - a) * x).collect();
    let nu = v.iter().map(|y| (1.0 - b) / q as f64 + b * y).collect();
    (mu, nu)
}
