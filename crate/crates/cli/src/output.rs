//! Run manifests and the json / csv / text renderings of command records.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` overrides the clock.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(command: &str, parameters: Value, seed: Option<u64>) -> Self {
        let timestamp = std::env::var("SOURCE_DATE_EPOCH")
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .unwrap_or_else(|| {
                SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            });
        Self {
            command: command.to_string(),
            parameters,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<R> {
    pub manifest: RunManifest,
    pub result: R,
}

/// A record with a fixed csv column order.
pub trait Tabular {
    fn columns() -> &'static [&'static str];
    fn rows(&self) -> Vec<Vec<String>>;
    /// Human-readable lines.
    fn text(&self) -> String;
}

/// Rounds to 12 significant digits.
pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Four significant digits, for human tables.
pub fn sig4(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let r: f64 = format!("{x:.3e}").parse().unwrap_or(x);
    format!("{r}")
}

pub fn csv_num(x: f64) -> String {
    if x.is_finite() {
        format!("{}", sig12(x))
    } else {
        String::new()
    }
}

pub fn csv_opt(x: Option<f64>) -> String {
    x.map(csv_num).unwrap_or_default()
}

fn round_numbers(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(r) = n.as_f64().and_then(|f| serde_json::Number::from_f64(sig12(f))) {
                    *n = r;
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_numbers),
        Value::Object(o) => o.values_mut().for_each(round_numbers),
        _ => {}
    }
}

pub fn render<R: Serialize + Tabular>(format: Format, manifest: RunManifest, result: &R) -> String {
    match format {
        Format::Json => {
            let mut v = serde_json::to_value(Envelope { manifest, result }).expect("serializable record");
            round_numbers(&mut v);
            let mut s = serde_json::to_string_pretty(&v).expect("json");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = R::columns().join(",");
            s.push('\n');
            for row in result.rows() {
                s.push_str(&row.join(","));
                s.push('\n');
            }
            s
        }
        Format::Text => {
            let mut s = format!(
                "# {} (prophetcomp {}){}\n",
                manifest.command,
                manifest.tool_version,
                manifest.seed.map(|x| format!(", seed {x}")).unwrap_or_default()
            );
            s.push_str(&result.text());
            if !s.ends_with('\n') {
                s.push('\n');
            }
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(sig12(0.1 + 0.2), 0.3);
        assert_eq!(sig12(1.0 / 3.0), 0.333333333333);
        assert_eq!(sig12(f64::INFINITY), f64::INFINITY);
        assert_eq!(sig4(1.37623), "1.376");
        assert_eq!(csv_num(f64::NAN), "");
    }

    #[test]
    fn source_date_epoch_fixes_timestamp() {
        // only read here, so setting it in-process is harmless
        std::env::set_var("SOURCE_DATE_EPOCH", "1700000000");
        assert_eq!(RunManifest::new("x", Value::Null, None).timestamp, 1_700_000_000);
    }
}
