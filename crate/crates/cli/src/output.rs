//! Byte-stable text outputs: every number carries 17 significant digits.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// Formats `x` with 17 significant digits, dropping trailing zeros.
/// Positional notation for `1e-5 <= |x| < 1e16`, scientific otherwise.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..16).contains(&exp) {
        let decimals = (16 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// One output file held in memory until the whole run has succeeded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

/// CSV text with a header row.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer }
    }

    pub fn row(&mut self, fields: &[Cell]) {
        let text: Vec<String> = fields.iter().map(Cell::render).collect();
        self.writer.write_record(&text).expect("in-memory write");
    }

    pub fn into_file(self, name: &str) -> OutputFile {
        let bytes = self.writer.into_inner().expect("in-memory flush");
        OutputFile {
            name: name.into(),
            contents: String::from_utf8(bytes).expect("utf-8 fields"),
        }
    }
}

/// A CSV field.
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    /// Missing value, written as `NA`.
    Missing,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => "NA".into(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<u32> for Cell {
    fn from(i: u32) -> Self {
        Cell::Int(i64::from(i))
    }
}

impl From<u8> for Cell {
    fn from(i: u8) -> Self {
        Cell::Int(i64::from(i))
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

/// Pretty JSON whose floating point numbers go through [`fmt_num`].
pub fn json_file(name: &str, value: &impl Serialize) -> Result<OutputFile> {
    let value = serde_json::to_value(value)?;
    let mut out = String::new();
    write_json(&value, 0, &mut out);
    out.push('\n');
    Ok(OutputFile {
        name: name.into(),
        contents: out,
    })
}

fn write_json(v: &Value, depth: usize, out: &mut String) {
    let pad = |d: usize| "  ".repeat(d);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => out.push_str(&i.to_string()),
            (_, Some(u)) => out.push_str(&u.to_string()),
            _ => out.push_str(&fmt_num(n.as_f64().expect("finite number"))),
        },
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                write_json(item, depth + 1, out);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(depth));
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            for (k, (key, item)) in map.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_json(item, depth + 1, out);
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(depth));
            out.push('}');
        }
    }
}

/// Writes all files into `dir`, creating it if needed.
pub fn write_all(dir: &Path, files: &[OutputFile]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for f in files {
        let path = dir.join(&f.name);
        fs::write(&path, &f.contents).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_num(0.1), "0.10000000000000001");
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(-3.0), "-3");
        assert_eq!(fmt_num(1.0 / 3.0), "0.33333333333333331");
        assert_eq!(fmt_num(12563553.0), "12563553");
        assert_eq!(fmt_num(1e-7), "9.9999999999999995e-8");
        assert_eq!(fmt_num(2.5e20), "2.5e20");
        assert_eq!(fmt_num(-0.0), "0");
        for x in [0.1, 1.0 / 3.0, 1e-7, 123.456, 6.02e23, 5e-324] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_numbers_and_nesting() {
        #[derive(Serialize)]
        struct R {
            a: f64,
            b: Vec<f64>,
            c: &'static str,
            d: Option<u32>,
        }
        let f = json_file(
            "r.json",
            &R {
                a: 0.1,
                b: vec![1.0, 2.5],
                c: "x\"y",
                d: None,
            },
        )
        .unwrap();
        assert_eq!(
            f.contents,
            "{\n  \"a\": 0.10000000000000001,\n  \"b\": [\n    1,\n    2.5\n  ],\n  \"c\": \"x\\\"y\",\n  \"d\": null\n}\n"
        );
    }

    #[test]
    fn table_rows() {
        let mut t = Table::new(&["t", "value"]);
        t.row(&[0.25.into(), Cell::Missing]);
        t.row(&[3usize.into(), "LL".into()]);
        assert_eq!(t.into_file("x.csv").contents, "t,value\n0.25,NA\n3,LL\n");
    }
}
