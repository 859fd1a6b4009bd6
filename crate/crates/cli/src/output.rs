use serde::Serialize;
use serde_json::{Map, Value};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Serialize)]
pub struct ChannelInfo {
    pub sha256: String,
    pub inputs: usize,
    pub outputs: usize,
}

#[derive(Serialize)]
pub struct Report<C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub channel: ChannelInfo,
    pub config: C,
    pub results: Vec<Value>,
}

pub fn write<C: Serialize>(report: &Report<C>, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, report)?;
            writeln!(out)
        }
        Format::Csv => write_csv(report, out),
    }
}

fn write_csv<C: Serialize>(report: &Report<C>, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "# {} {} {}", report.tool, report.version, report.command)?;
    writeln!(out, "# channel_sha256 {}", report.channel.sha256)?;
    writeln!(out, "# config {}", serde_json::to_string(&report.config)?)?;

    let rows: Vec<Vec<(String, String)>> = report
        .results
        .iter()
        .map(|r| {
            let mut cells = Vec::new();
            flatten("", r, &mut cells);
            cells
        })
        .collect();
    // Union of columns in first-seen order.
    let mut header: Vec<String> = Vec::new();
    for row in &rows {
        for (k, _) in row {
            if !header.contains(k) {
                header.push(k.clone());
            }
        }
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    for row in rows {
        let rec: Vec<&str> = header
            .iter()
            .map(|h| row.iter().find(|(k, _)| k == h).map_or("", |(_, v)| v.as_str()))
            .collect();
        w.write_record(&rec)?;
    }
    w.flush()
}

/// Nested objects become dotted columns; arrays of scalars join with `;`.
fn flatten(prefix: &str, v: &Value, cells: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => flatten_map(prefix, m, cells),
        _ => cells.push((prefix.to_string(), scalar(v))),
    }
}

fn flatten_map(prefix: &str, m: &Map<String, Value>, cells: &mut Vec<(String, String)>) {
    for (k, v) in m {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        flatten(&key, v, cells);
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(a) if a.iter().all(|x| !x.is_array() && !x.is_object()) => {
            a.iter().map(scalar).collect::<Vec<_>>().join(";")
        }
        other => other.to_string(),
    }
}
