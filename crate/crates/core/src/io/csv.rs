//! Comma-separated depth grids, one image row per line. `nan` or an empty
//! cell marks an invalid pixel.

use crate::error::{Error, Result};
use crate::grid::DepthMap;
use crate::io::fmt_f64;

pub fn read_csv_depth(text: &str) -> Result<DepthMap> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let lines: Vec<&str> = text.lines().collect();
    let last = lines
        .iter()
        .rposition(|l| !l.trim().is_empty())
        .map_or(0, |i| i + 1);
    for (i, line) in lines[..last].iter().enumerate() {
        let mut row = Vec::new();
        for (j, cell) in line.split(',').enumerate() {
            let cell = cell.trim();
            let v = if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
                f64::NAN
            } else {
                cell.parse::<f64>().map_err(|_| {
                    Error::parse(
                        format!("line {}, column {}", i + 1, j + 1),
                        format!("cannot parse '{cell}' as a number"),
                    )
                })?
            };
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::parse(
                    format!("line {}", i + 1),
                    format!("ragged row: {} cells, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::parse("line 1", "empty depth grid"));
    }
    DepthMap::from_rows(&rows)
}

pub fn write_csv_depth(depth: &DepthMap) -> String {
    let mut out = String::new();
    for row in depth.values().chunks(depth.width()) {
        let cells: Vec<String> = row
            .iter()
            .map(|&v| {
                if DepthMap::is_valid_value(v) {
                    fmt_f64(v)
                } else {
                    "nan".into()
                }
            })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
