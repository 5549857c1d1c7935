use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// One annotated position: pedestrian `ped` at `(x, y)` meters in frame `frame`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawTrackRow {
    pub frame: i64,
    pub ped: i64,
    pub x: f64,
    pub y: f64,
}

/// Parses whitespace-separated `frame ped x y` lines. Blank lines and lines
/// starting with `#` are skipped. Rows come back sorted by `(frame, ped)`.
pub fn parse_tracks(text: &str) -> Result<Vec<RawTrackRow>> {
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse { line: line_no, message };
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(err(format!("expected 4 fields (frame ped x y), found {}", fields.len())));
        }
        let int = |s: &str, what: &str| -> Result<i64> {
            // Some releases write integral ids as floats, e.g. `10.0`.
            if let Ok(v) = s.parse::<i64>() {
                return Ok(v);
            }
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() && v.fract() == 0.0 && v.abs() < 9e15 => Ok(v as i64),
                _ => Err(err(format!("{what} `{s}` is not an integer"))),
            }
        };
        let real = |s: &str, what: &str| -> Result<f64> {
            match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(err(format!("{what} `{s}` is not a finite number"))),
            }
        };
        let row = RawTrackRow {
            frame: int(fields[0], "frame")?,
            ped: int(fields[1], "pedestrian id")?,
            x: real(fields[2], "x")?,
            y: real(fields[3], "y")?,
        };
        if !seen.insert((row.frame, row.ped)) {
            return Err(err(format!("duplicate row for frame {} pedestrian {}", row.frame, row.ped)));
        }
        rows.push(row);
    }
    rows.sort_by_key(|r| (r.frame, r.ped));
    Ok(rows)
}

pub fn load_tracks(path: impl AsRef<Path>) -> Result<Vec<RawTrackRow>> {
    let path = path.as_ref();
    std::fs::read_to_string(path)
        .map_err(Error::from)
        .and_then(|t| parse_tracks(&t))
        .map_err(|e| e.at_path(path))
}

/// Tab-separated text in the format [`parse_tracks`] reads. Coordinates use the
/// shortest representation that parses back to the same `f64`.
pub fn format_tracks(rows: &[RawTrackRow]) -> String {
    let mut s = String::new();
    for r in rows {
        writeln!(s, "{}\t{}\t{}\t{}", r.frame, r.ped, r.x, r.y).expect("write to string");
    }
    s
}
