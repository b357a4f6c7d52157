//! Run configuration: command-line flags, optionally overridden by a JSON
//! config file with the same field names.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use indet_core::QuadratureSpec;
use serde::{Deserialize, Deserializer};
use serde_json::Value;

use crate::error::CliError;

/// Margins as given on the command line or in a config file: a shorthand
/// such as `power:0.75,power:0.75`, or a JSON document.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginsInput {
    Text(String),
    Json(Value),
}

impl FromStr for MarginsInput {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.starts_with('{') || t.starts_with('[') {
            serde_json::from_str(t)
                .map(MarginsInput::Json)
                .map_err(|e| format!("margins JSON: {e}"))
        } else if let Some(path) = t.strip_prefix('@') {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
            serde_json::from_str(&text)
                .map(MarginsInput::Json)
                .map_err(|e| format!("{path}: {e}"))
        } else if t.is_empty() {
            Err("empty margin specification".into())
        } else {
            Ok(MarginsInput::Text(t.to_string()))
        }
    }
}

impl<'de> Deserialize<'de> for MarginsInput {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            other => Ok(MarginsInput::Json(other)),
        }
    }
}

/// Decision threshold: `mid` for `(l0 + l1) / 2`, or a fixed value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Mid,
    Fixed(f64),
}

impl FromStr for Threshold {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "mid" | "midpoint" => Ok(Threshold::Mid),
            t => t
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Threshold::Fixed)
                .ok_or_else(|| format!("threshold must be `mid` or a finite number, got `{t}`")),
        }
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            Value::Number(n) => n
                .as_f64()
                .map(Threshold::Fixed)
                .ok_or_else(|| serde::de::Error::custom("threshold out of range")),
            other => Err(serde::de::Error::custom(format!(
                "threshold must be \"mid\" or a number, got {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingName {
    Indetermination,
    Independence,
    Fgm,
    Perturbation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HypothesisName {
    Null,
    Alternative,
}

/// Every setting a command may read. All fields are optional so that a
/// config file can override any subset of the flags.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Command name; only checked against the subcommand when set in a file.
    #[arg(skip)]
    pub command: Option<String>,

    /// Margin pair: `spike`, `extremal:EPS`, `F,G` with F and G among
    /// `uniform`, `power:A`, `linear:S`, `extremal:EPS`, or JSON (`[spec, spec]`,
    /// a coupling object, `{"mu": [..], "nu": [..]}`), or `@file.json`.
    #[arg(long, global = true, value_name = "SPEC")]
    pub margins: Option<MarginsInput>,

    /// Coupling of the margins.
    #[arg(long, global = true, value_enum)]
    pub coupling: Option<CouplingName>,

    /// FGM parameter in [-1, 1].
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub theta: Option<f64>,

    /// Perturbation size.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub eps: Option<f64>,

    /// Frequency of the cosine perturbation in x.
    #[arg(long, global = true)]
    pub k1: Option<u32>,

    /// Frequency of the cosine perturbation in y.
    #[arg(long, global = true)]
    pub k2: Option<u32>,

    /// Sample size.
    #[arg(long, global = true)]
    pub n: Option<usize>,

    /// Monte Carlo replications for tail estimates (0 disables them).
    #[arg(long, global = true)]
    pub reps: Option<usize>,

    /// Random-walk steps for the discrete minimality check.
    #[arg(long, global = true)]
    pub trials: Option<usize>,

    /// Decision threshold: `mid` or a number.
    #[arg(long, global = true, value_name = "mid|REAL")]
    pub threshold: Option<Threshold>,

    /// Law the test sample is drawn from.
    #[arg(long, global = true, value_enum)]
    pub hypothesis: Option<HypothesisName>,

    /// Sample the squared density instead of the law itself.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub square: Option<bool>,

    /// Grid resolution for CSV surfaces and curves.
    #[arg(long, global = true)]
    pub grid: Option<usize>,

    /// Linking coefficient for the shared-copula family.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,

    /// Gauss-Legendre nodes per panel.
    #[arg(long, global = true)]
    pub nodes: Option<usize>,

    /// Quadrature panels on [0, 1].
    #[arg(long, global = true)]
    pub panels: Option<usize>,

    /// Master seed.
    #[arg(long, global = true, env = "INDET_SEED")]
    pub seed: Option<u64>,

    /// Output format.
    #[arg(long, global = true, value_enum)]
    pub out: Option<Format>,

    /// Output file; standard output when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,

    /// JSON config file whose fields override the flags.
    #[arg(long, global = true, value_name = "PATH")]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Worker threads for sampling and Monte Carlo.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),+) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field; } )+
    };
}

impl RunConfig {
    /// Fields set in `top` replace those of `self`.
    pub fn overlay(mut self, top: RunConfig) -> RunConfig {
        overlay!(
            self, top, command, margins, coupling, theta, eps, k1, k2, n, reps, trials,
            threshold, hypothesis, square, grid, lambda, nodes, panels, seed, out, output,
            workers
        );
        self
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            CliError::Validation(format!("{}: field `{}`: {}", path.display(), e.path(), e.inner()))
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn format(&self) -> Format {
        self.out.unwrap_or(Format::Json)
    }

    pub fn quadrature(&self) -> Result<QuadratureSpec, CliError> {
        let d = QuadratureSpec::default();
        Ok(QuadratureSpec::new(
            self.nodes.unwrap_or(d.nodes_1d),
            self.panels.unwrap_or(d.panels),
        )?)
    }

    pub fn grid_or(&self, default: usize) -> Result<usize, CliError> {
        match self.grid.unwrap_or(default) {
            0 | 1 => Err(CliError::Validation("grid must be at least 2".into())),
            g => Ok(g),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_forms() {
        assert_eq!("mid".parse::<Threshold>().unwrap(), Threshold::Mid);
        assert_eq!("3.5".parse::<Threshold>().unwrap(), Threshold::Fixed(3.5));
        assert!("nan".parse::<Threshold>().is_err());
        let t: Threshold = serde_json::from_str("3.25").unwrap();
        assert_eq!(t, Threshold::Fixed(3.25));
    }

    #[test]
    fn margins_forms() {
        assert!(matches!("spike".parse().unwrap(), MarginsInput::Text(_)));
        assert!(matches!("[{\"kind\":\"uniform\"}]".parse().unwrap(), MarginsInput::Json(_)));
        assert!("[oops".parse::<MarginsInput>().is_err());
    }

    #[test]
    fn file_overrides_flags() {
        let flags = RunConfig {
            n: Some(10),
            seed: Some(1),
            ..Default::default()
        };
        let file: RunConfig = serde_json::from_str(r#"{"seed": 9, "threshold": "mid"}"#).unwrap();
        let merged = flags.overlay(file);
        assert_eq!(merged.n, Some(10));
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.threshold, Some(Threshold::Mid));
    }

    #[test]
    fn unknown_field_is_named() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("config.json");
        std::fs::write(&dir, r#"{"n": 5, "sead": 3}"#).unwrap();
        let err = RunConfig::load(&dir).unwrap_err().to_string();
        assert!(err.contains("sead"), "{err}");
        std::fs::write(&dir, r#"{"n": "five"}"#).unwrap();
        let err = RunConfig::load(&dir).unwrap_err().to_string();
        assert!(err.contains("`n`"), "{err}");
    }
}
