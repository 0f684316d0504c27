//! Plain-text field dumps.
//!
//! ```text
//! # name,nx,ny,xmin,xmax,ymin,ymax,tag
//! v(0,0),v(1,0),...,v(nx-1,0)
//! ...
//! v(0,ny-1),...,v(nx-1,ny-1)
//! ```
//!
//! Rows follow the grid's row-major order (`j` outer, `i` inner). Values
//! are written in the shortest decimal form that parses back to the same
//! `f64`, so a dump followed by [`read_field`] is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use regctl_core::{Bounds, Field, Grid};

#[derive(Debug, Clone, PartialEq)]
pub struct FieldHeader {
    pub name: String,
    pub nx: usize,
    pub ny: usize,
    pub bounds: Bounds,
    /// Free-form label such as `iter=20` or `t=1`.
    pub tag: String,
}

#[derive(Debug, thiserror::Error)]
pub enum FieldIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid header field `{0}`: commas and newlines are not allowed")]
    BadLabel(String),
}

fn parse_err(line: usize, message: impl Into<String>) -> FieldIoError {
    FieldIoError::Parse {
        line,
        message: message.into(),
    }
}

/// Shortest round-trip decimal, switching to exponent form for very large
/// or very small magnitudes.
pub fn format_value(v: f64) -> String {
    let a = v.abs();
    if v != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn check_label(s: &str) -> Result<(), FieldIoError> {
    if s.contains([',', '\n', '\r']) {
        return Err(FieldIoError::BadLabel(s.to_owned()));
    }
    Ok(())
}

pub fn format_field(field: &Field, name: &str, tag: &str) -> Result<String, FieldIoError> {
    check_label(name)?;
    check_label(tag)?;
    let g = field.grid();
    let b = g.bounds();
    let mut out = String::with_capacity(24 * field.len() + 64);
    writeln!(
        out,
        "# {name},{},{},{},{},{},{},{tag}",
        g.nx(),
        g.ny(),
        format_value(b.x_min),
        format_value(b.x_max),
        format_value(b.y_min),
        format_value(b.y_max)
    )
    .expect("writing to a String cannot fail");
    for row in field.values().chunks(g.nx()) {
        let line: Vec<String> = row.iter().map(|v| format_value(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn dump_field(path: &Path, field: &Field, name: &str, tag: &str) -> Result<(), FieldIoError> {
    fs::write(path, format_field(field, name, tag)?)?;
    Ok(())
}

pub fn parse_field(text: &str) -> Result<(FieldHeader, Field), FieldIoError> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let body = first
        .strip_prefix('#')
        .ok_or_else(|| parse_err(1, "header must start with `#`"))?;
    let parts: Vec<&str> = body.trim_start().splitn(8, ',').collect();
    if parts.len() != 8 {
        return Err(parse_err(1, "header needs name,nx,ny,xmin,xmax,ymin,ymax,tag"));
    }
    let count = |s: &str, what: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| parse_err(1, format!("bad {what} `{s}`")))
    };
    let real = |s: &str, what: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| parse_err(1, format!("bad {what} `{s}`")))
    };
    let nx = count(parts[1], "nx")?;
    let ny = count(parts[2], "ny")?;
    let bounds = Bounds::new(
        real(parts[3], "xmin")?,
        real(parts[4], "xmax")?,
        real(parts[5], "ymin")?,
        real(parts[6], "ymax")?,
    );
    let grid = Grid::new(nx, ny, bounds).map_err(|e| parse_err(1, e.to_string()))?;

    let mut values = Vec::with_capacity(nx * ny);
    let mut rows = 0;
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let before = values.len();
        for cell in line.split(',') {
            let v = cell
                .trim()
                .parse::<f64>()
                .map_err(|_| parse_err(idx + 1, format!("bad value `{cell}`")))?;
            values.push(v);
        }
        if values.len() - before != nx {
            return Err(parse_err(
                idx + 1,
                format!("expected {nx} values, found {}", values.len() - before),
            ));
        }
        rows += 1;
    }
    if rows != ny {
        return Err(parse_err(
            text.lines().count(),
            format!("expected {ny} rows, found {rows}"),
        ));
    }
    let header = FieldHeader {
        name: parts[0].trim().to_owned(),
        nx,
        ny,
        bounds,
        tag: parts[7].to_owned(),
    };
    let field = Field::from_values(&grid, values).map_err(|e| parse_err(1, e.to_string()))?;
    Ok((header, field))
}

pub fn read_field(path: &Path) -> Result<(FieldHeader, Field), FieldIoError> {
    parse_field(&fs::read_to_string(path)?)
}
