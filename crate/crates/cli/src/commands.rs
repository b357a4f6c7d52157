use clap::Subcommand;
use indet_core::copula::lambda_bounds;
use indet_core::discrete::verify_discrete_minimality;
use indet_core::indettest::{rate_function, separability_witness, setup_with};
use indet_core::likelihood::{avg_likelihood_with, kl_divergence, rho_distance};
use indet_core::{
    avg_likelihood_vs_indet, bahadur_slope, check_compatibility, couple_indetermination,
    discrete_independence, discrete_indetermination, lambda_share_test, matching_probability,
    rho_distance_empirical, run_test, sample_indetermination, sample_law, sample_square_density,
    shared_family, spread_delta1, CouplingKind, QuadratureSpec, RngStream, SpecificIndetCopula,
    ThresholdPolicy,
};

use crate::config::{HypothesisName, RunConfig, Threshold};
use crate::error::CliError;
use crate::inputs::{discrete_pair, law, required_margins};
use crate::output::Record;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check that the margins admit an indetermination coupling.
    Check,
    /// Build a coupling and report its density summary; CSV gives the density grid.
    Couple,
    /// Margin-dependent copula; CSV gives u, v, C_indet, C_indep, difference.
    Copula,
    /// Spread functional of the copula.
    Spread,
    /// Average likelihoods, KL divergence and rho distance against the indetermination law.
    Likelihood,
    /// Draw a sample; CSV gives the points.
    Sample,
    /// Run the indeterminacy test on a simulated sample.
    Test,
    /// Rate function and Bahadur slope; CSV gives the rate curve.
    Slope,
    /// Finite indetermination coupling; CSV gives the matrix.
    Discrete,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Couple => "couple",
            Command::Copula => "copula",
            Command::Spread => "spread",
            Command::Likelihood => "likelihood",
            Command::Sample => "sample",
            Command::Test => "test",
            Command::Slope => "slope",
            Command::Discrete => "discrete",
        }
    }

    pub fn run(self, cfg: &RunConfig, quad: &QuadratureSpec) -> Result<Record, CliError> {
        match self {
            Command::Check => check(cfg),
            Command::Couple => couple(cfg, quad),
            Command::Copula => copula(cfg),
            Command::Spread => spread(cfg),
            Command::Likelihood => likelihood(cfg, quad),
            Command::Sample => sample(cfg),
            Command::Test => test(cfg, quad),
            Command::Slope => slope(cfg, quad),
            Command::Discrete => discrete(cfg),
        }
    }
}

fn check(cfg: &RunConfig) -> Result<Record, CliError> {
    let (f, g) = required_margins(cfg)?;
    let report = check_compatibility(&f, &g);
    let mut rec = Record::new();
    rec.extend(report)
        .set("f_min", f.f_min())
        .set("g_min", g.f_min())
        .set("margins", [f.describe(), g.describe()]);
    Ok(rec)
}

fn midpoints(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}

fn couple(cfg: &RunConfig, quad: &QuadratureSpec) -> Result<Record, CliError> {
    let (_, _, law) = law(cfg)?;
    law.validate(quad)?;
    let mut rec = Record::new();
    rec.set("law", law.describe())
        .set("kind", law.kind())
        .set("sup_density", law.sup_density())
        .set(
            "margins",
            [law.margin_x().describe(), law.margin_y().describe()],
        );
    if law.is_square_integrable() {
        rec.set("square_integral", avg_likelihood_with(&law, &law, quad)?.value);
    }
    let n = cfg.grid_or(50)?;
    let xs = midpoints(n);
    let table = law.density_table(&xs, &xs);
    let mut csv = String::from("x,y,density\n");
    for (i, x) in xs.iter().enumerate() {
        for (j, y) in xs.iter().enumerate() {
            csv.push_str(&format!("{x},{y},{}\n", table[i * n + j]));
        }
    }
    rec.table(csv);
    Ok(rec)
}

fn copula(cfg: &RunConfig) -> Result<Record, CliError> {
    let (f, g) = required_margins(cfg)?;
    let cop = SpecificIndetCopula::new(&f, &g)?;
    let n = cfg.grid_or(21)?;
    let rows = cop.grid(n);
    let (lower, upper) = lambda_bounds(&f, &g);
    let mut rec = Record::new();
    rec.set("grid", n)
        .set("lambda_lower", lower)
        .set("lambda_upper", upper)
        .set(
            "max_abs_difference",
            rows.iter().map(|r| r.difference.abs()).fold(0.0, f64::max),
        );
    if let Some(lambda) = cfg.lambda {
        let (r, s) = shared_family(&f, &g, lambda)?;
        let report = lambda_share_test(&f, &g, &r, &s, 1e-9)?;
        rec.set("shared_margins", [r.describe(), s.describe()])
            .set("lambda_test", report);
    }
    let mut csv = String::from("u,v,C_indet,C_indep,difference\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.u, r.v, r.c_indet, r.c_indep, r.difference
        ));
    }
    rec.set("rows", &rows).table(csv);
    Ok(rec)
}

fn spread(cfg: &RunConfig) -> Result<Record, CliError> {
    let (f, g) = required_margins(cfg)?;
    let mut rec = Record::new();
    rec.set("delta1", spread_delta1(&f, &g)?)
        .set("margins", [f.describe(), g.describe()]);
    Ok(rec)
}

fn likelihood(cfg: &RunConfig, quad: &QuadratureSpec) -> Result<Record, CliError> {
    let (f, g, h) = law(cfg)?;
    let plus = couple_indetermination(&f, &g)?;
    let mut rec = Record::new();
    rec.set("law", h.describe())
        .set("l_vs_indet", avg_likelihood_vs_indet(&h, &f, &g)?.value)
        .set("l_vs_indet_2d", avg_likelihood_with(&h, &plus, quad)?.value)
        .set("l_self", avg_likelihood_with(&h, &h, quad)?.value)
        .set("l_indet_self", avg_likelihood_with(&plus, &plus, quad)?.value)
        .set("kl_to_indet", kl_divergence(&h, &plus))
        .set("rho_to_indet", rho_distance(&h, &plus));
    Ok(rec)
}

fn sample(cfg: &RunConfig) -> Result<Record, CliError> {
    let (f, g, law) = law(cfg)?;
    let n = cfg.n.unwrap_or(1000);
    let stream = RngStream::new(cfg.seed(), 0);
    let sample = if cfg.square.unwrap_or(false) {
        sample_square_density(&law, n, stream)?
    } else if law.kind() == CouplingKind::Indetermination {
        sample_indetermination(&f, &g, n, stream)?
    } else {
        sample_law(&law, n, stream)?
    };
    let mut csv = Vec::new();
    sample.write_csv(&mut csv)?;
    let mut rec = Record::new();
    rec.set("n", sample.len())
        .set("source", &sample.source)
        .set("stream", sample.stream)
        .set("acceptance_rate", sample.acceptance_rate)
        .set("mean_x", sample.mean_of(|x, _| x))
        .set("mean_y", sample.mean_of(|_, y| y))
        .set("points", &sample.points)
        .table(String::from_utf8(csv).expect("CSV is UTF-8"));
    if !cfg.square.unwrap_or(false) {
        rec.set("rho_to_law", rho_distance_empirical(&sample, &law));
    }
    Ok(rec)
}

fn test(cfg: &RunConfig, quad: &QuadratureSpec) -> Result<Record, CliError> {
    let (f, g) = required_margins(cfg)?;
    let setup = setup_with(&f, &g, quad)?;
    let n = cfg.n.unwrap_or(10_000);
    let hypothesis = cfg.hypothesis.unwrap_or(HypothesisName::Null);
    let stream = RngStream::new(cfg.seed(), 0);
    let sample = match hypothesis {
        HypothesisName::Null => sample_indetermination(&f, &g, n, stream)?,
        HypothesisName::Alternative => sample_law(&setup.pi_times, n, stream)?,
    };
    let policy = match cfg.threshold.unwrap_or(Threshold::Mid) {
        Threshold::Mid => ThresholdPolicy::Midpoint,
        Threshold::Fixed(t) => ThresholdPolicy::Fixed(t),
    };
    let tail = match cfg.reps.unwrap_or(0) {
        0 => None,
        reps => Some((reps, RngStream::new(cfg.seed(), 1))),
    };
    let report = run_test(&setup, &sample, policy, tail)?;
    let mut rec = Record::new();
    rec.extend(&report).set("hypothesis", hypothesis_label(hypothesis));
    if let Some(t) = report.tail {
        rec.set("tail_p_hat", t.p_hat).set("tail_stderr", t.stderr);
    }
    Ok(rec)
}

fn hypothesis_label(h: HypothesisName) -> &'static str {
    match h {
        HypothesisName::Null => "null",
        HypothesisName::Alternative => "alternative",
    }
}

fn slope(cfg: &RunConfig, quad: &QuadratureSpec) -> Result<Record, CliError> {
    let (f, g) = required_margins(cfg)?;
    let setup = setup_with(&f, &g, quad)?;
    let mut rec = Record::new();
    rec.set("l0", setup.l0)
        .set("l1", setup.l1)
        .set("eta", setup.eta)
        .set("ess_sup", setup.ess_sup())
        .set("I_l1", rate_function(&setup, setup.l1)?)
        .set("bahadur_slope", bahadur_slope(&setup)?)
        .set("separability", separability_witness(&setup));
    let points = cfg.grid_or(50)?;
    let top = setup.ess_sup().min(2.0 * setup.l1 - setup.l0);
    let mut csv = String::from("t,I\n");
    for k in 0..points {
        let t = setup.l0 + (top - setup.l0) * k as f64 / points as f64;
        csv.push_str(&format!("{t},{}\n", rate_function(&setup, t)?));
    }
    rec.table(csv);
    Ok(rec)
}

fn discrete(cfg: &RunConfig) -> Result<Record, CliError> {
    let (mu, nu) = discrete_pair(cfg)?;
    let c = discrete_indetermination(&mu, &nu)?;
    let ind = discrete_independence(&mu, &nu)?;
    let mut rec = Record::new();
    rec.set("pi", &c.pi)
        .set("matching", matching_probability(&c))
        .set("matching_independence", matching_probability(&ind));
    if let Some(trials) = cfg.trials.filter(|&t| t > 0) {
        let minimal = verify_discrete_minimality(&mu, &nu, trials, RngStream::new(cfg.seed(), 0))?;
        rec.set("trials", trials).set("minimal", minimal);
    }
    rec.table(c.to_csv());
    Ok(rec)
}
