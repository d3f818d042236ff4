//! Tables rendered as JSON or CSV with floats at 17 significant digits.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};
use serde_json::{Map, Value};

use crate::error::CliError;

pub const OUTPUT_DIR_ENV: &str = "BERGMAN_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

/// Rows sharing one column set. A `single` table is written as one JSON
/// object instead of an array.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub single: bool,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            single: false,
        }
    }

    /// Columns taken from the keys of a serialized struct.
    pub fn from_records<T: Serialize>(name: &str, records: &[T]) -> Result<Self, CliError> {
        let mut table = Table { name: name.to_string(), columns: Vec::new(), rows: Vec::new(), single: false };
        for r in records {
            let v = serde_json::to_value(r).map_err(|e| CliError::Numeric(e.to_string()))?;
            let Value::Object(map) = v else {
                return Err(CliError::Numeric("record did not serialize to an object".into()));
            };
            if table.columns.is_empty() {
                table.columns = map.keys().cloned().collect();
            }
            table.rows.push(table.columns.iter().map(|c| map.get(c).cloned().unwrap_or(Value::Null)).collect());
        }
        Ok(table)
    }

    pub fn single(mut self) -> Self {
        self.single = true;
        self
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn objects(&self) -> Vec<Value> {
        self.rows
            .iter()
            .map(|row| {
                let mut m = Map::new();
                for (c, v) in self.columns.iter().zip(row) {
                    m.insert(c.clone(), v.clone());
                }
                Value::Object(m)
            })
            .collect()
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>, CliError> {
        let mut out = Vec::new();
        match format {
            Format::Json => {
                let objs = self.objects();
                let v = if self.single && objs.len() == 1 { objs[0].clone() } else { Value::Array(objs) };
                write_json(&v, &mut out, true)?;
                out.push(b'\n');
            }
            Format::Csv => {
                writeln!(out, "{}", self.columns.join(","))?;
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(csv_cell).collect::<Result<_, _>>()?;
                    writeln!(out, "{}", cells.join(","))?;
                }
            }
        }
        Ok(out)
    }
}

pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct Digits<F>(F);

impl<F: Formatter> Formatter for Digits<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_f64(value).as_bytes())
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

fn write_json(v: &Value, out: &mut Vec<u8>, pretty: bool) -> Result<(), CliError> {
    let res = if pretty {
        let mut ser = serde_json::Serializer::with_formatter(&mut *out, Digits(PrettyFormatter::new()));
        v.serialize(&mut ser)
    } else {
        let mut ser = serde_json::Serializer::with_formatter(&mut *out, Digits(CompactFormatter));
        v.serialize(&mut ser)
    };
    res.map_err(|e| CliError::Numeric(e.to_string()))
}

fn csv_cell(v: &Value) -> Result<String, CliError> {
    let raw = match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => match (n.as_i64(), n.as_u64(), n.as_f64()) {
            (Some(i), _, _) => i.to_string(),
            (_, Some(u), _) => u.to_string(),
            (_, _, Some(f)) => format_f64(f),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        other => {
            let mut buf = Vec::new();
            write_json(other, &mut buf, false)?;
            String::from_utf8(buf).expect("JSON is UTF-8")
        }
    };
    if raw.contains([',', '"', '\n']) {
        Ok(format!("\"{}\"", raw.replace('"', "\"\"")))
    } else {
        Ok(raw)
    }
}

/// Writes to `--output`, else to `$BERGMAN_OUTPUT_DIR/<name>.<ext>`, else
/// to stdout.
pub fn emit(table: &Table, format: Format, output: Option<&PathBuf>) -> Result<(), CliError> {
    let bytes = table.render(format)?;
    let path = match output {
        Some(p) => Some(p.clone()),
        None => std::env::var_os(OUTPUT_DIR_ENV)
            .filter(|d| !d.is_empty())
            .map(|d| PathBuf::from(d).join(format!("{}.{}", table.name, format.extension()))),
    };
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(&p, bytes)?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(&bytes)?;
            lock.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_use_seventeen_digits() {
        let mut t = Table::new("t", &["k", "v", "note"]);
        t.push(vec![json!(12), json!(0.1), json!("a,b")]);
        let csv = String::from_utf8(t.render(Format::Csv).unwrap()).unwrap();
        assert_eq!(csv, "k,v,note\n12,1.0000000000000001e-1,\"a,b\"\n");
        let js = String::from_utf8(t.clone().single().render(Format::Json).unwrap()).unwrap();
        assert!(js.contains("\"v\": 1.0000000000000001e-1"));
        let back: Value = serde_json::from_str(&js).unwrap();
        assert_eq!(back["v"].as_f64().unwrap(), 0.1);
    }

    #[test]
    fn empty_table_keeps_header() {
        let t = Table::new("t", &["a", "b"]);
        assert_eq!(t.render(Format::Csv).unwrap(), b"a,b\n");
    }
}
