//! CSV and PGM grid files.
//!
//! CSV files start with `#` header lines carrying the axes, fixed coordinates,
//! field kind, normalization, and configuration hash, followed by one line per
//! row (first row at the lowest row coordinate) with values in `%.12e` notation.
//! PGM files are plain `P2` with 16-bit depth, the top image row at the highest
//! row coordinate.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::field::FieldGrid;

pub const PGM_MAXVAL: u32 = 65535;

/// C-style `%.12e`: twelve fraction digits and an exponent with sign and at
/// least two digits.
pub fn fmt_e12(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let s = format!("{v:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

pub fn csv_string(grid: &FieldGrid, config_hash: &str) -> String {
    let mut out = String::new();
    let axis_line = |name: &str, a: &crate::field::Axis| format!("{name} {} {} {}", fmt_e12(a.lo), fmt_e12(a.hi), a.n);
    writeln!(out, "# kind: {}", grid.kind.name()).unwrap();
    writeln!(out, "# normalization: {}", grid.normalization.name()).unwrap();
    writeln!(out, "# rows: {}", axis_line(&grid.row_name, &grid.rows)).unwrap();
    writeln!(out, "# cols: {}", axis_line(&grid.col_name, &grid.cols)).unwrap();
    for (name, v) in &grid.fixed {
        writeln!(out, "# fixed: {name} {}", fmt_e12(*v)).unwrap();
    }
    writeln!(out, "# config_sha256: {config_hash}").unwrap();
    for r in 0..grid.nrows() {
        let row = grid.row(r);
        for (c, v) in row.iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&fmt_e12(*v));
        }
        out.push('\n');
    }
    out
}

/// Gray levels: non-negative fields scale by their maximum, signed fields map
/// `[min, max]` onto the full range.
pub fn pgm_string(grid: &FieldGrid) -> String {
    let max = grid.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = grid.values.iter().copied().fold(f64::INFINITY, f64::min);
    let (lo, span) = if min >= 0.0 { (0.0, max) } else { (min, max - min) };
    let level = |v: f64| -> u32 {
        if !(span > 0.0) || !v.is_finite() {
            return 0;
        }
        ((v - lo) / span * PGM_MAXVAL as f64)
            .round()
            .clamp(0.0, PGM_MAXVAL as f64) as u32
    };
    let mut out = String::new();
    writeln!(out, "P2").unwrap();
    writeln!(
        out,
        "# {} rows {} [{}, {}] top to bottom descending, cols {} [{}, {}]",
        grid.kind.name(),
        grid.row_name,
        fmt_e12(grid.rows.lo),
        fmt_e12(grid.rows.hi),
        grid.col_name,
        fmt_e12(grid.cols.lo),
        fmt_e12(grid.cols.hi)
    )
    .unwrap();
    writeln!(out, "{} {}", grid.ncols(), grid.nrows()).unwrap();
    writeln!(out, "{PGM_MAXVAL}").unwrap();
    for r in (0..grid.nrows()).rev() {
        let line: Vec<String> = grid.row(r).iter().map(|&v| level(v).to_string()).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    out
}

/// Writes `contents` to a temporary sibling and renames it into place, so a
/// reader never sees a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::io(path.display().to_string(), std::io::Error::other("not a file path")))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp: PathBuf = dir.join(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(format!("writing {}", path.display()), e)
    })
}

/// Reads back the values of a CSV grid, skipping header lines.
pub fn parse_csv_values(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| l.split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect())
        .collect()
}
