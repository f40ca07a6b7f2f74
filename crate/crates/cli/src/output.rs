//! Report serialization: rounded, key-sorted JSON and CSV tables.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::Common;

const SIGNIFICANT: usize = 12;

/// Rounds to 12 significant digits; integers and non-finite values pass through.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT - 1, x).parse().unwrap_or(x)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round_sig(x)) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Serializes with sorted keys, rounding floats unless `raw`.
pub fn to_json<T: Serialize>(value: &T, raw: bool) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    if !raw {
        round_value(&mut v);
    }
    let mut text = serde_json::to_string_pretty(&v)?;
    text.push('\n');
    Ok(text)
}

pub fn emit<T: Serialize>(value: &T, output: Option<&Path>, raw: bool) -> Result<()> {
    let text = to_json(value, raw)?;
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub fn emit_common<T: Serialize>(value: &T, common: &Common) -> Result<()> {
    emit(value, common.output.as_deref(), common.raw)
}

/// Formats a float cell the same way as the JSON report.
pub fn cell(x: f64, raw: bool) -> String {
    if raw {
        format!("{x}")
    } else {
        format!("{}", round_sig(x))
    }
}

pub fn opt_cell(x: Option<f64>, raw: bool) -> String {
    x.map(|v| cell(v, raw)).unwrap_or_default()
}

/// Writes a CSV table into `dir/name`, creating the directory.
pub fn write_csv(dir: &Path, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        assert_eq!(round_sig(-2.5e-20), -2.5e-20);
        assert_eq!(round_sig(0.0), 0.0);
    }

    #[test]
    fn keys_are_sorted() {
        let v = serde_json::json!({"b": 1.0, "a": [0.1 + 0.2]});
        let text = to_json(&v, false).unwrap();
        assert!(text.find("\"a\"").unwrap() < text.find("\"b\"").unwrap());
        assert!(text.contains("0.3"));
        assert!(!text.contains("0.30000000000000004"));
    }
}
