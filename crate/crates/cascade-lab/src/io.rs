//! File emission: path/walk CSV, moment-table CSV and a minimal SVG
//! polyline. Every file starts with a config comment so runs can be
//! reproduced from the output alone. Reals print with 17 significant
//! digits; lines end with LF.

use std::io::{self, Write};

/// Formats a real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `t,value` rows over the uniform grid k/cells, k = 0..=cells.
pub fn write_series_csv<W: Write>(w: &mut W, values: &[f64], config: &str) -> io::Result<()> {
    writeln!(w, "# config: {config}")?;
    writeln!(w, "t,value")?;
    let cells = values.len() - 1;
    for (k, v) in values.iter().enumerate() {
        let t = k as f64 / cells as f64;
        writeln!(w, "{},{}", fmt_real(t), fmt_real(*v))?;
    }
    Ok(())
}

/// Writes `q,n,value` moment rows; limit moments carry n = "inf".
pub fn write_moments_csv<W: Write>(
    w: &mut W,
    finite: &[(u32, u32, f64)],
    limits: &[(u32, f64)],
    config: &str,
) -> io::Result<()> {
    writeln!(w, "# config: {config}")?;
    writeln!(w, "q,n,value")?;
    for &(q, n, v) in finite {
        writeln!(w, "{q},{n},{}", fmt_real(v))?;
    }
    for &(q, v) in limits {
        writeln!(w, "{q},inf,{}", fmt_real(v))?;
    }
    Ok(())
}

/// Minimal SVG polyline of a series over [0,1] x [min,max]. The y axis is
/// mirrored so the graph reads the usual way up.
pub fn write_series_svg<W: Write>(w: &mut W, values: &[f64], config: &str) -> io::Result<()> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo == hi {
        hi = lo + 1.0;
    }
    let height = hi - lo;
    let cells = values.len() - 1;
    writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(w, "<!-- config: {config} -->")?;
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 {lo:.6} 1 {height:.6}" preserveAspectRatio="none">"#
    )?;
    write!(
        w,
        r#"<polyline fill="none" stroke="black" stroke-width="0.15%" points=""#
    )?;
    for (k, &v) in values.iter().enumerate() {
        let t = k as f64 / cells as f64;
        let y = hi + lo - v;
        if k > 0 {
            write!(w, " ")?;
        }
        write!(w, "{t:.6},{y:.6}")?;
    }
    writeln!(w, r#""/>"#)?;
    writeln!(w, "</svg>")?;
    Ok(())
}
