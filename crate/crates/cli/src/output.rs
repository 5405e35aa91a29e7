use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Jsonl,
    Csv,
}

pub fn render(records: &[Value], format: Format) -> String {
    match format {
        Format::Json => {
            let v = match records {
                [one] => one.clone(),
                many => Value::Array(many.to_vec()),
            };
            let mut s = serde_json::to_string_pretty(&v).expect("json values serialize");
            s.push('\n');
            s
        }
        Format::Jsonl => records.iter().map(|r| serde_json::to_string(r).expect("json values serialize") + "\n").collect(),
        Format::Csv => csv(records),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&key(k), x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&key(&i.to_string()), x, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// One row per record with dotted column paths; columns appear in first-seen order.
fn csv(records: &[Value]) -> String {
    let rows: Vec<Vec<(String, String)>> = records
        .iter()
        .map(|r| {
            let mut row = Vec::new();
            flatten("", r, &mut row);
            row
        })
        .collect();
    let mut columns: Vec<String> = Vec::new();
    for row in &rows {
        for (k, _) in row {
            if !columns.contains(k) {
                columns.push(k.clone());
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&columns).expect("in-memory write");
    for row in &rows {
        let m: Map<String, Value> = row.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
        w.write_record(columns.iter().map(|c| m.get(c).and_then(Value::as_str).unwrap_or(""))).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn write(text: &str, out: Option<&Path>) -> std::io::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn csv_flattens_nested_records() {
        let recs = vec![json!({"a": 1, "b": {"c": [2, 3]}}), json!({"a": 4, "d": "x,y"})];
        assert_eq!(render(&recs, Format::Csv), "a,b.c.0,b.c.1,d\n1,2,3,\n4,,,\"x,y\"\n");
    }

    #[test]
    fn json_single_record_is_not_wrapped() {
        assert_eq!(render(&[json!({"a": 1})], Format::Json), "{\n  \"a\": 1\n}\n");
        assert_eq!(render(&[json!(1), json!(2)], Format::Jsonl), "1\n2\n");
    }
}
