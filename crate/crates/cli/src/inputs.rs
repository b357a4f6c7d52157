//! Turns margin and coupling descriptions into core objects.

use indet_core::fixtures;
use indet_core::margins::MarginSpec;
use indet_core::{
    couple_fgm, couple_independence, couple_indetermination, couple_perturbation, BivariateLaw,
    Margin, ZeroMeanProfile,
};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use crate::config::{CouplingName, MarginsInput, RunConfig};
use crate::error::CliError;

/// Cosine profile `cos(2πk(x - lo)/(hi - lo))` on `[lo, hi]`, zero elsewhere.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub k: u32,
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
}

impl ProfileSpec {
    fn build(&self) -> Result<ZeroMeanProfile, CliError> {
        Ok(ZeroMeanProfile::cosine_on(
            self.lo.unwrap_or(0.0),
            self.hi.unwrap_or(1.0),
            self.k,
        )?)
    }
}

/// `{"coupling": .., "margins": .., ...params}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingSpec {
    #[serde(default)]
    coupling: Option<CouplingName>,
    margins: MarginsInput,
    #[serde(default)]
    theta: Option<f64>,
    #[serde(default)]
    eps: Option<f64>,
    #[serde(default)]
    phi: Option<ProfileSpec>,
    #[serde(default)]
    psi: Option<ProfileSpec>,
}

fn from_value<T: DeserializeOwned>(what: &str, v: &Value) -> Result<T, CliError> {
    serde_path_to_error::deserialize(v.clone()).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            CliError::Validation(format!("{what}: {}", e.inner()))
        } else {
            CliError::Validation(format!("{what}: field `{path}`: {}", e.inner()))
        }
    })
}

fn parse_number(token: &str, text: &str) -> Result<f64, CliError> {
    text.parse::<f64>()
        .map_err(|_| CliError::Validation(format!("`{token}`: `{text}` is not a number")))
}

fn margin_token(token: &str) -> Result<Margin, CliError> {
    let (name, arg) = match token.split_once(':') {
        Some((n, a)) => (n.trim(), Some(a.trim())),
        None => (token.trim(), None),
    };
    let m = match (name, arg) {
        ("uniform", None) => Margin::uniform(),
        ("power", Some(a)) => Margin::power(parse_number(token, a)?)?,
        ("linear", Some(a)) => Margin::linear(parse_number(token, a)?)?,
        ("extremal", Some(a)) => indet_core::extremal_margin(parse_number(token, a)?)?,
        _ => {
            return Err(CliError::Validation(format!(
                "unknown margin `{token}`; expected uniform, power:A, linear:S or extremal:EPS"
            )))
        }
    };
    Ok(m)
}

fn pair_from_text(text: &str) -> Result<(Margin, Margin), CliError> {
    if text == "spike" {
        return Ok(fixtures::spike_pair());
    }
    let tokens: Vec<&str> = text.split(',').collect();
    match tokens.as_slice() {
        [one] => {
            let m = margin_token(one)?;
            Ok((m.clone(), m))
        }
        [a, b] => Ok((margin_token(a)?, margin_token(b)?)),
        _ => Err(CliError::Validation(format!(
            "margins `{text}`: expected one or two comma-separated margins"
        ))),
    }
}

fn pair_from_json(v: &Value) -> Result<(Margin, Margin), CliError> {
    if let Value::Object(map) = v {
        if map.contains_key("margins") {
            let spec: CouplingSpec = from_value("coupling", v)?;
            return margin_pair(&spec.margins);
        }
    }
    let specs: [MarginSpec; 2] = from_value("margins", v)?;
    Ok((Margin::from_spec(&specs[0])?, Margin::from_spec(&specs[1])?))
}

pub fn margin_pair(input: &MarginsInput) -> Result<(Margin, Margin), CliError> {
    match input {
        MarginsInput::Text(t) => pair_from_text(t),
        MarginsInput::Json(v) => pair_from_json(v),
    }
}

pub fn required_margins(cfg: &RunConfig) -> Result<(Margin, Margin), CliError> {
    let input = cfg
        .margins
        .as_ref()
        .ok_or_else(|| CliError::Validation("--margins is required".into()))?;
    margin_pair(input)
}

/// The law selected by `--coupling` and its parameters. A JSON coupling
/// object given as `--margins` takes precedence over the flags.
pub fn law(cfg: &RunConfig) -> Result<(Margin, Margin, BivariateLaw), CliError> {
    let (f, g) = required_margins(cfg)?;
    let json = match &cfg.margins {
        Some(MarginsInput::Json(v @ Value::Object(map))) if map.contains_key("margins") => {
            Some(from_value::<CouplingSpec>("coupling", v)?)
        }
        _ => None,
    };
    let pick = |j: Option<f64>, flag: Option<f64>| j.or(flag);
    let kind = json
        .as_ref()
        .and_then(|j| j.coupling)
        .or(cfg.coupling)
        .unwrap_or(CouplingName::Indetermination);
    let law = match kind {
        CouplingName::Indetermination => couple_indetermination(&f, &g)?,
        CouplingName::Independence => couple_independence(&f, &g),
        CouplingName::Fgm => {
            let theta = pick(json.as_ref().and_then(|j| j.theta), cfg.theta)
                .ok_or_else(|| CliError::Validation("fgm coupling needs `theta`".into()))?;
            couple_fgm(&f, &g, theta)?
        }
        CouplingName::Perturbation => {
            let eps = pick(json.as_ref().and_then(|j| j.eps), cfg.eps)
                .ok_or_else(|| CliError::Validation("perturbation needs `eps`".into()))?;
            let flag_profile = |k: Option<u32>| ProfileSpec {
                k: k.unwrap_or(1),
                lo: None,
                hi: None,
            };
            let phi = json
                .as_ref()
                .and_then(|j| j.phi)
                .unwrap_or(flag_profile(cfg.k1));
            let psi = json
                .as_ref()
                .and_then(|j| j.psi)
                .unwrap_or(flag_profile(cfg.k2));
            let base = couple_indetermination(&f, &g)?;
            couple_perturbation(&base, eps, phi.build()?, psi.build()?)?
        }
    };
    Ok((f, g, law))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscreteSpec {
    mu: Vec<f64>,
    nu: Vec<f64>,
}

/// `{"mu": [..], "nu": [..]}`, `[[..], [..]]`, or `0.6 0.4,0.7 0.3` on the
/// command line.
pub fn discrete_pair(cfg: &RunConfig) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    match &cfg.margins {
        Some(MarginsInput::Json(v @ Value::Object(_))) => {
            let s: DiscreteSpec = from_value("discrete margins", v)?;
            Ok((s.mu, s.nu))
        }
        Some(MarginsInput::Json(v)) => {
            let [mu, nu]: [Vec<f64>; 2] = from_value("discrete margins", v)?;
            Ok((mu, nu))
        }
        Some(MarginsInput::Text(t)) => {
            let parts: Vec<&str> = t.split(',').collect();
            let [a, b] = parts.as_slice() else {
                return Err(CliError::Validation(format!(
                    "discrete margins `{t}`: expected `MU,NU` with space-separated weights"
                )));
            };
            let weights = |s: &str| -> Result<Vec<f64>, CliError> {
                s.split_whitespace().map(|w| parse_number(t, w)).collect()
            };
            Ok((weights(a)?, weights(b)?))
        }
        None => Err(CliError::Validation("--margins is required".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(margins: &str) -> RunConfig {
        RunConfig {
            margins: Some(margins.parse().unwrap()),
            ..Default::default()
        }
    }

    #[test]
    fn shorthand_pairs() {
        let (f, g) = required_margins(&cfg("power:0.75,power:0.75")).unwrap();
        assert_eq!(f.f_min(), 0.75);
        assert_eq!(g.f_min(), 0.75);
        let (f, g) = required_margins(&cfg("spike")).unwrap();
        assert!((f.f_max() - 3.0).abs() < 1e-12);
        assert!((g.f_max() - 3.0).abs() < 1e-12);
        let (f, _) = required_margins(&cfg("linear:1")).unwrap();
        assert!((f.density(1.0) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn bad_token_named() {
        let err = required_margins(&cfg("power:x,uniform")).unwrap_err().to_string();
        assert!(err.contains("power:x"), "{err}");
        let err = required_margins(&cfg("gamma:2")).unwrap_err().to_string();
        assert!(err.contains("gamma:2"), "{err}");
    }

    #[test]
    fn json_pair_and_field_errors() {
        let (f, _) =
            required_margins(&cfg(r#"[{"kind":"power","alpha":0.5},{"kind":"uniform"}]"#)).unwrap();
        assert_eq!(f.f_min(), 0.5);
        let err = required_margins(&cfg(r#"[{"kind":"power","alpah":0.5},{"kind":"uniform"}]"#))
            .unwrap_err()
            .to_string();
        assert!(err.contains("alpah"), "{err}");
    }

    #[test]
    fn coupling_object() {
        let c = cfg(
            r#"{"coupling":"perturbation","margins":"spike","eps":0.5,
                "phi":{"k":1,"hi":0.2},"psi":{"k":1}}"#,
        );
        let (_, _, h) = law(&c).unwrap();
        assert!(h.describe().contains("perturbation"), "{}", h.describe());
        let c = cfg(r#"{"coupling":"fgm","margins":"spike"}"#);
        assert!(law(&c).unwrap_err().to_string().contains("theta"));
    }

    #[test]
    fn discrete_forms() {
        let (mu, nu) = discrete_pair(&cfg(r#"{"mu":[0.6,0.4],"nu":[0.7,0.3]}"#)).unwrap();
        assert_eq!((mu, nu), (vec![0.6, 0.4], vec![0.7, 0.3]));
        let (mu, _) = discrete_pair(&cfg("0.5 0.5,0.2 0.8")).unwrap();
        assert_eq!(mu, vec![0.5, 0.5]);
    }
}
