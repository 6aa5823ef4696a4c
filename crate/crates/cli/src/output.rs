//! Row-oriented CSV and JSON-lines emitters.
//!
//! Floats print with 17 significant digits in scientific notation, which
//! round-trips through a standard parser to identical bits; infinities
//! print as "inf". The same tokens feed both formats so the two outputs
//! always agree numerically.

use std::fs::File;
use std::io::{self, BufWriter, Write};

#[derive(Debug, Clone)]
pub enum Field {
    U64(u64),
    Usize(usize),
    F64(f64),
    Str(String),
}

impl Field {
    fn token(&self) -> String {
        match self {
            Field::U64(v) => v.to_string(),
            Field::Usize(v) => v.to_string(),
            Field::F64(v) => fmt_float(*v),
            Field::Str(s) => s.clone(),
        }
    }

    fn json_token(&self) -> String {
        match self {
            Field::U64(v) => v.to_string(),
            Field::Usize(v) => v.to_string(),
            Field::F64(v) => {
                if v.is_finite() {
                    fmt_float(*v)
                } else {
                    json_string(&fmt_float(*v))
                }
            }
            Field::Str(s) => json_string(s),
        }
    }
}

/// 17 significant digits, round-trip exact; locale-independent by
/// construction.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v > 0.0 {
        "inf".to_string()
    } else if v < 0.0 {
        "-inf".to_string()
    } else {
        "nan".to_string()
    }
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn csv_escape(token: &str) -> String {
    if token.contains(',') || token.contains('"') || token.contains('\n') {
        format!("\"{}\"", token.replace('"', "\"\""))
    } else {
        token.to_string()
    }
}

pub type Row = Vec<(&'static str, Field)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    JsonLines,
}

pub fn write_rows(out: &mut dyn Write, format: Format, rows: &[Row]) -> io::Result<()> {
    match format {
        Format::Csv => {
            if let Some(first) = rows.first() {
                let header: Vec<&str> = first.iter().map(|(k, _)| *k).collect();
                writeln!(out, "{}", header.join(","))?;
            }
            for row in rows {
                let line: Vec<String> = row.iter().map(|(_, f)| csv_escape(&f.token())).collect();
                writeln!(out, "{}", line.join(","))?;
            }
        }
        Format::JsonLines => {
            for row in rows {
                let body: Vec<String> = row
                    .iter()
                    .map(|(k, f)| format!("{}:{}", json_string(k), f.json_token()))
                    .collect();
                writeln!(out, "{{{}}}", body.join(","))?;
            }
        }
    }
    Ok(())
}

/// Destination selected by --output ("-" = stdout).
pub fn open_sink(path: &str) -> io::Result<Box<dyn Write>> {
    if path == "-" {
        Ok(Box::new(BufWriter::new(io::stdout())))
    } else {
        Ok(Box::new(BufWriter::new(File::create(path)?)))
    }
}
