//! Fixed-precision CSV writing shared by every exporter.

use std::io::Write;

/// Formats a real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_header<W: Write>(w: &mut W, columns: &[&str]) -> std::io::Result<()> {
    writeln!(w, "{}", columns.join(","))
}

pub fn write_reals<W: Write>(w: &mut W, values: &[f64]) -> std::io::Result<()> {
    let row: Vec<String> = values.iter().map(|v| fmt_real(*v)).collect();
    writeln!(w, "{}", row.join(","))
}

/// A row whose cells are already formatted.
pub fn write_cells<W: Write>(w: &mut W, cells: &[String]) -> std::io::Result<()> {
    writeln!(w, "{}", cells.join(","))
}
