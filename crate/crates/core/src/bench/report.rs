use std::fmt::Write as _;
use std::path::Path;

use super::config::ReportFormat;
use crate::error::{Error, Result};

/// One report field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Str(String),
    Int(u64),
    Float(f64),
}

impl Cell {
    fn csv_text(&self) -> String {
        match self {
            Cell::Str(s) => s.clone(),
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
        }
    }

    fn json_text(&self) -> String {
        match self {
            Cell::Str(s) => serde_json::to_string(s).expect("strings always serialize"),
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) if v.is_finite() => format_float(*v),
            Cell::Float(_) => "null".into(),
        }
    }

    /// Equality that treats two NaNs as equal.
    pub fn same(&self, other: &Cell) -> bool {
        match (self, other) {
            (Cell::Float(a), Cell::Float(b)) => a == b || (a.is_nan() && b.is_nan()),
            _ => self == other,
        }
    }
}

/// 17 significant digits, which round-trips every `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// A row type with a fixed column order.
pub trait ReportRow {
    fn header() -> &'static [&'static str];
    fn cells(&self) -> Vec<Cell>;
}

pub fn render_report<R: ReportRow>(rows: &[R], format: ReportFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::config("refusing to emit an empty report"));
    }
    let header = R::header();
    match format {
        ReportFormat::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
            let fail = |e: csv::Error| Error::Format(e.to_string());
            w.write_record(header).map_err(fail)?;
            for row in rows {
                w.write_record(row.cells().iter().map(Cell::csv_text)).map_err(fail)?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
        }
        ReportFormat::Json => {
            let mut out = String::from("[\n");
            for (i, row) in rows.iter().enumerate() {
                out.push_str("  {");
                for (j, (name, cell)) in header.iter().zip(row.cells()).enumerate() {
                    if j > 0 {
                        out.push_str(", ");
                    }
                    let _ = write!(out, "\"{name}\": {}", cell.json_text());
                }
                out.push_str(if i + 1 < rows.len() { "},\n" } else { "}\n" });
            }
            out.push_str("]\n");
            Ok(out)
        }
    }
}

/// Writes the rendered report. Identical rows give identical bytes.
pub fn emit_report<R: ReportRow>(rows: &[R], path: &Path, format: ReportFormat) -> Result<()> {
    let text = render_report(rows, format)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses a report produced by [`render_report`] back into header and cells.
pub fn parse_report(text: &str, format: ReportFormat) -> Result<(Vec<String>, Vec<Vec<Cell>>)> {
    match format {
        ReportFormat::Csv => {
            let mut r = csv::Reader::from_reader(text.as_bytes());
            let header = r
                .headers()
                .map_err(|e| Error::Format(e.to_string()))?
                .iter()
                .map(str::to_owned)
                .collect();
            let mut rows = Vec::new();
            for rec in r.records() {
                let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
                rows.push(rec.iter().map(parse_csv_cell).collect());
            }
            Ok((header, rows))
        }
        ReportFormat::Json => {
            let value: serde_json::Value =
                serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
            let items = value
                .as_array()
                .ok_or_else(|| Error::Format("report is not a JSON array".into()))?;
            let mut header = Vec::new();
            let mut rows = Vec::new();
            for item in items {
                let obj = item
                    .as_object()
                    .ok_or_else(|| Error::Format("report row is not an object".into()))?;
                if header.is_empty() {
                    header = obj.keys().cloned().collect();
                }
                let row = header
                    .iter()
                    .map(|k| json_cell(obj.get(k).unwrap_or(&serde_json::Value::Null)))
                    .collect::<Result<Vec<_>>>()?;
                rows.push(row);
            }
            Ok((header, rows))
        }
    }
}

fn parse_csv_cell(s: &str) -> Cell {
    if let Ok(v) = s.parse::<u64>() {
        Cell::Int(v)
    } else if let Ok(v) = s.parse::<f64>() {
        Cell::Float(v)
    } else {
        Cell::Str(s.to_owned())
    }
}

fn json_cell(v: &serde_json::Value) -> Result<Cell> {
    use serde_json::Value;
    Ok(match v {
        Value::Null => Cell::Float(f64::NAN),
        Value::String(s) => Cell::Str(s.clone()),
        Value::Number(n) => match n.as_u64() {
            Some(i) if !n.to_string().contains(['e', 'E', '.']) => Cell::Int(i),
            _ => Cell::Float(n.as_f64().ok_or_else(|| Error::Format(format!("bad number {n}")))?),
        },
        other => return Err(Error::Format(format!("unexpected report value {other}"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Row(&'static str, u64, f64);

    impl ReportRow for Row {
        fn header() -> &'static [&'static str] {
            &["name", "seed", "value"]
        }
        fn cells(&self) -> Vec<Cell> {
            vec![Cell::Str(self.0.into()), Cell::Int(self.1), Cell::Float(self.2)]
        }
    }

    #[test]
    fn empty_rows_rejected() {
        assert!(render_report::<Row>(&[], ReportFormat::Csv).is_err());
    }

    #[test]
    fn csv_layout() {
        let text = render_report(&[Row("a", 1, 0.1)], ReportFormat::Csv).unwrap();
        assert_eq!(text, "name,seed,value\na,1,1.0000000000000001e-1\n");
    }

    #[test]
    fn formats_agree_and_round_trip() {
        let rows = [Row("mc", 3, 1.0 / 3.0), Row("a,b", 4, f64::NAN), Row("q\"x", 5, -2.5e-300)];
        let (hc, csv_rows) = parse_report(&render_report(&rows, ReportFormat::Csv).unwrap(), ReportFormat::Csv).unwrap();
        let (hj, json_rows) =
            parse_report(&render_report(&rows, ReportFormat::Json).unwrap(), ReportFormat::Json).unwrap();
        assert_eq!(hc, Row::header());
        assert_eq!(hj, Row::header());
        for ((row, c), j) in rows.iter().zip(&csv_rows).zip(&json_rows) {
            for ((orig, a), b) in row.cells().iter().zip(c).zip(j) {
                assert!(orig.same(a), "{orig:?} vs {a:?}");
                assert!(orig.same(b), "{orig:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn repeated_emission_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        emit_report(&[Row("a", 1, 0.5)], &p, ReportFormat::Json).unwrap();
        let first = std::fs::read(&p).unwrap();
        emit_report(&[Row("a", 1, 0.5)], &p, ReportFormat::Json).unwrap();
        assert_eq!(first, std::fs::read(&p).unwrap());
        assert!(first.ends_with(b"\n"));
        assert!(emit_report(&[Row("a", 1, 0.5)], Path::new("/nonexistent/dir/r.csv"), ReportFormat::Csv).is_err());
    }
}
