//! Result records: a JSON object with a `meta` block, or CSV behind `#`
//! header lines carrying the same metadata.

use std::io::Write;

use indet_core::QuadratureSpec;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{Format, RunConfig};
use crate::error::CliError;

pub struct Record {
    pub fields: Map<String, Value>,
    /// Table body with its header row, for `--out csv`.
    pub table: Option<String>,
}

impl Record {
    pub fn new() -> Self {
        Self {
            fields: Map::new(),
            table: None,
        }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        let v = serde_json::to_value(value).expect("result records serialize");
        self.fields.insert(key.to_string(), v);
        self
    }

    pub fn extend(&mut self, value: impl Serialize) -> &mut Self {
        if let Value::Object(map) = serde_json::to_value(value).expect("result records serialize") {
            self.fields.extend(map);
        }
        self
    }

    pub fn table(&mut self, csv: String) -> &mut Self {
        self.table = Some(csv);
        self
    }
}

/// Sorts object keys recursively so output does not depend on insertion order.
fn canonical(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, canonical(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonical).collect()),
        other => other,
    }
}

fn meta(command: &str, cfg: &RunConfig, quad: &QuadratureSpec) -> Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed(),
        "quadrature": quad,
    })
}

fn scalar_table(fields: &Map<String, Value>) -> String {
    let mut out = String::from("key,value\n");
    for (k, v) in fields {
        match v {
            Value::Object(_) | Value::Array(_) => {}
            Value::String(s) => out.push_str(&format!("{k},{s}\n")),
            other => out.push_str(&format!("{k},{other}\n")),
        }
    }
    out
}

pub fn render(command: &str, cfg: &RunConfig, quad: &QuadratureSpec, rec: Record) -> String {
    let meta = canonical(meta(command, cfg, quad));
    match cfg.format() {
        Format::Json => {
            let mut fields = rec.fields;
            fields.insert("meta".into(), meta);
            let mut text = serde_json::to_string_pretty(&canonical(Value::Object(fields)))
                .expect("JSON values serialize");
            text.push('\n');
            text
        }
        Format::Csv => {
            let quad = &meta["quadrature"];
            let mut text = format!(
                "# indet {} command={command} seed={} nodes_1d={} panels={}\n",
                meta["version"].as_str().unwrap_or_default(),
                cfg.seed(),
                quad["nodes_1d"],
                quad["panels"],
            );
            let canon = canonical(Value::Object(rec.fields));
            let body = match rec.table {
                Some(t) => t,
                None => scalar_table(canon.as_object().expect("object")),
            };
            text.push_str(&body);
            text
        }
    }
}

pub fn emit(cfg: &RunConfig, text: &str) -> Result<(), CliError> {
    match &cfg.output {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_sorted_recursively() {
        let v = json!({"b": 1, "a": {"z": 0, "c": [ {"y": 1, "x": 2} ]}});
        let text = serde_json::to_string(&canonical(v)).unwrap();
        assert_eq!(text, r#"{"a":{"c":[{"x":2,"y":1}],"z":0},"b":1}"#);
    }

    #[test]
    fn csv_header_carries_seed() {
        let cfg = RunConfig {
            seed: Some(7),
            out: Some(Format::Csv),
            ..Default::default()
        };
        let mut rec = Record::new();
        rec.set("ok", true);
        let text = render("check", &cfg, &QuadratureSpec::default(), rec);
        assert!(text.starts_with("# indet "));
        assert!(text.lines().next().unwrap().contains("seed=7"));
        assert!(text.contains("ok,true"));
    }
}
