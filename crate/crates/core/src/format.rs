//! Plain-text field files.
//!
//! ```text
//! FBLAB1 n m d_1 .. d_n o_1 .. o_n h
//! v_1 .. v_m        (one line per node, row-major)
//! ```

use std::io::{BufRead, Write};

use crate::grid::{Grid, GridField};
use crate::{Error, Result};

const MAGIC: &str = "FBLAB1";

pub fn write_field<W: Write>(field: &GridField, mut w: W) -> Result<()> {
    let g = field.grid();
    let mut header = format!("{MAGIC} {} {}", g.n(), field.m());
    for d in g.dims() {
        header.push_str(&format!(" {d}"));
    }
    for o in g.origin() {
        header.push_str(&format!(" {o:e}"));
    }
    header.push_str(&format!(" {:e}", g.spacing()));
    writeln!(w, "{header}")?;
    let mut line = String::new();
    for node in 0..g.len() {
        line.clear();
        for (c, v) in field.value(node).iter().enumerate() {
            if c > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{v:e}"));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_string(field: &GridField) -> String {
    let mut buf = Vec::new();
    write_field(field, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

pub fn read_field<R: BufRead>(r: R) -> Result<GridField> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty input".into()))??;
    let tok: Vec<&str> = header.split_whitespace().collect();
    if tok.first() != Some(&MAGIC) {
        return Err(Error::Format(format!("missing {MAGIC} header")));
    }
    let int = |i: usize, what: &str| -> Result<usize> {
        tok.get(i)
            .ok_or_else(|| Error::Format(format!("header truncated before {what}")))?
            .parse::<usize>()
            .map_err(|e| Error::Format(format!("{what}: {e}")))
    };
    let float = |i: usize, what: &str| -> Result<f64> {
        tok.get(i)
            .ok_or_else(|| Error::Format(format!("header truncated before {what}")))?
            .parse::<f64>()
            .map_err(|e| Error::Format(format!("{what}: {e}")))
    };
    let n = int(1, "n")?;
    let m = int(2, "m")?;
    if !(n == 2 || n == 3) || m == 0 {
        return Err(Error::Format(format!("unsupported n = {n}, m = {m}")));
    }
    let expected = 3 + 2 * n + 1;
    if tok.len() != expected {
        return Err(Error::Format(format!("header has {} fields, expected {expected}", tok.len())));
    }
    let dims = (0..n).map(|k| int(3 + k, "dims")).collect::<Result<Vec<_>>>()?;
    let origin = (0..n).map(|k| float(3 + n + k, "origin")).collect::<Result<Vec<_>>>()?;
    let spacing = float(3 + 2 * n, "spacing")?;
    let grid = Grid::new(origin, spacing, dims).map_err(|e| Error::Format(e.to_string()))?;

    let mut values = Vec::with_capacity(grid.len() * m);
    let mut rows = 0usize;
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let before = values.len();
        for t in line.split_whitespace() {
            let v: f64 = t
                .parse()
                .map_err(|e| Error::Format(format!("line {}: {e}", i + 2)))?;
            if !v.is_finite() {
                return Err(Error::Format(format!("line {}: non-finite value", i + 2)));
            }
            values.push(v);
        }
        if values.len() - before != m {
            return Err(Error::Format(format!(
                "line {}: expected {m} values, got {}",
                i + 2,
                values.len() - before
            )));
        }
        rows += 1;
    }
    if rows != grid.len() {
        return Err(Error::Format(format!("expected {} node lines, got {rows}", grid.len())));
    }
    GridField::from_values(grid, m, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> GridField {
        let g = Grid::new(vec![-1.0, 0.25], 0.1, vec![3, 4]).unwrap();
        GridField::from_fn(g, 2, |x, o| {
            o[0] = x[0] * 0.1 + 1e-300;
            o[1] = -x[1] / 3.0;
        })
    }

    #[test]
    fn round_trip_is_exact() {
        let f = sample();
        let text = to_string(&f);
        let back = read_field(text.as_bytes()).unwrap();
        assert_eq!(back, f);
        assert!(text.starts_with("FBLAB1 2 2 3 4 "));
    }

    #[test]
    fn rejects_mismatched_counts() {
        let text = to_string(&sample());
        let mut lines: Vec<&str> = text.lines().collect();
        lines.pop();
        assert!(read_field(lines.join("\n").as_bytes()).is_err());
        let bad_row = text.replacen("\n", "\n1.0\n", 1);
        assert!(read_field(bad_row.as_bytes()).is_err());
        assert!(read_field("FBLAB2 2 1 3 3 0 0 1\n".as_bytes()).is_err());
        assert!(read_field("FBLAB1 2 1 3 3 0 0\n".as_bytes()).is_err());
        assert!(read_field("".as_bytes()).is_err());
    }
}
