//! Plain-text coefficient files: the grid level on the first line, then `4^level`
//! positive values row-major from the lower-left cell, one grid row per line.

use std::fmt::Write as _;
use std::path::Path;

use lod_core::coeff::CoeffField;

use crate::error::{Error, Result};
use crate::fs::write_atomic;

pub fn format_coeff(field: &CoeffField) -> String {
    let n = 1usize << field.grid_level();
    let mut out = format!("{}\n", field.grid_level());
    for row in field.values().chunks(n) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn parse_coeff(text: &str, path: &Path) -> Result<CoeffField> {
    let mut lines = text.lines().enumerate();
    let (level_line, level) = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((i, l)) => break (i + 1, l.trim()),
            None => return Err(Error::parse(path, 1, "empty coefficient file")),
        }
    };
    let grid_level: u32 = level
        .parse()
        .map_err(|_| Error::parse(path, level_line, format!("bad grid level {level:?}")))?;
    let mut values = Vec::new();
    for (i, line) in lines {
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad value {tok:?}")))?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::parse(path, i + 1, format!("value {v} is not positive")));
            }
            values.push(v);
        }
    }
    CoeffField::from_values(grid_level, values)
        .map_err(|e| Error::parse(path, level_line, e.to_string()))
}

pub fn read_coeff(path: &Path) -> Result<CoeffField> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_coeff(&text, path)
}

pub fn write_coeff(field: &CoeffField, path: &Path) -> Result<()> {
    write_atomic(path, format_coeff(field).as_bytes())
}
