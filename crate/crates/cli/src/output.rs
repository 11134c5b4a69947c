//! Atomic file emission: CSV tables, JSON reports, log-log SVG charts.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, Result};

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::input(format!("serializing {}: {e}", path.display())))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

/// A CSV table whose last column is `status`. Non-finite numbers are
/// written as empty cells and noted in the status.
#[derive(Clone, Debug)]
pub struct Table {
    headers: Vec<String>,
    rows: Vec<(Vec<Cell>, String)>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Table { headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn with_headers(headers: Vec<String>) -> Self {
        Table { headers, rows: Vec::new() }
    }

    pub fn push(&mut self, cells: Vec<Cell>, status: impl Into<String>) {
        assert_eq!(cells.len(), self.headers.len(), "row width");
        self.rows.push((cells, status.into()));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = self.headers.clone();
        header.push("status".into());
        w.write_record(&header).map_err(csv_err)?;
        for (cells, status) in &self.rows {
            let mut status = status.clone();
            let mut rec: Vec<String> = Vec::with_capacity(cells.len() + 1);
            for (cell, name) in cells.iter().zip(&self.headers) {
                rec.push(match cell {
                    Cell::Num(v) if v.is_finite() => format_num(*v),
                    Cell::Num(_) => {
                        status.push_str(&format!(";nonfinite:{name}"));
                        String::new()
                    }
                    Cell::Int(v) => v.to_string(),
                    Cell::Text(s) => s.clone(),
                    Cell::Empty => String::new(),
                });
            }
            rec.push(status);
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| CliError::input(format!("csv: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_csv()?)
    }

    /// Finite numeric values of column `name`, paired with those of `x`.
    pub fn series(&self, x: &str, y: &str) -> Vec<(f64, f64)> {
        let col = |name: &str| self.headers.iter().position(|h| h == name);
        let (Some(ix), Some(iy)) = (col(x), col(y)) else {
            return Vec::new();
        };
        self.rows
            .iter()
            .filter_map(|(cells, _)| match (&cells[ix], &cells[iy]) {
                (Cell::Num(a), Cell::Num(b)) if a.is_finite() && b.is_finite() => Some((*a, *b)),
                _ => None,
            })
            .collect()
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::input(format!("csv: {e}"))
}

/// Shortest round-trip decimal form.
pub fn format_num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v:e}")
    }
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// A log-log line chart. Points with a nonpositive coordinate are dropped.
pub fn loglog_svg(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let logs: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            let mut p: Vec<(f64, f64)> =
                s.points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.log10(), y.log10())).collect();
            p.sort_by(|a, b| a.0.total_cmp(&b.0));
            p
        })
        .collect();
    let all: Vec<(f64, f64)> = logs.iter().flatten().copied().collect();
    let range = |f: fn(&(f64, f64)) -> f64| {
        let lo = all.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = all.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-9 {
            ((lo - 0.5).floor(), (hi + 0.5).ceil())
        } else {
            (lo.floor(), hi.ceil())
        }
    };
    let (x0, x1) = range(|p| p.0);
    let (y0, y1) = range(|p| p.1);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{left:.1} {top:.1} L{left:.1} {bottom:.1} L{right:.1} {bottom:.1}" stroke="black" fill="none"/>"#
    );
    for d in (x0 as i64)..=(x1 as i64) {
        let x = sx(d as f64);
        let _ = writeln!(s, r#"<line x1="{x:.1}" y1="{bottom:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#, bottom + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{d}</text>"#, bottom + 18.0);
    }
    for d in (y0 as i64)..=(y1 as i64) {
        let y = sy(d as f64);
        let _ = writeln!(s, r#"<line x1="{:.1}" y1="{y:.1}" x2="{left:.1}" y2="{y:.1}" stroke="black"/>"#, left - 5.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"#, left - 8.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 15.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.1}" text-anchor="middle" transform="rotate(-90 15 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
    for (k, (pts, ser)) in logs.iter().zip(series).enumerate() {
        let color = COLORS[k % COLORS.len()];
        if !pts.is_empty() {
            let path: Vec<String> = pts
                .iter()
                .enumerate()
                .map(|(i, (x, y))| format!("{}{:.2} {:.2}", if i == 0 { "M" } else { "L" }, sx(*x), sy(*y)))
                .collect();
            let _ = writeln!(s, r#"<path d="{}" stroke="{color}" stroke-width="1.5" fill="none"/>"#, path.join(" "));
            for (x, y) in pts {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(*x), sy(*y));
            }
        }
        let ly = top + 16.0 * k as f64;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{ly:.1}" text-anchor="end" fill="{color}">{}</text>"#, right, escape(&ser.name));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_numbers_go_to_status() {
        let mut t = Table::new(&["r", "w"]);
        t.push(vec![0.5.into(), f64::NAN.into()], "ok");
        t.push(vec![0.25.into(), Cell::Empty], "skipped");
        let text = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(text, "r,w,status\n5e-1,,ok;nonfinite:w\n2.5e-1,,skipped\n");
        assert!(!text.contains("NaN"));
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn svg_drops_nonpositive_points() {
        let s = loglog_svg("t", "x", "y", &[Series { name: "a".into(), points: vec![(0.1, 1.0), (1.0, 10.0), (-1.0, 1.0)] }]);
        assert!(s.starts_with("<svg"));
        assert_eq!(s.matches("<circle").count(), 2);
        let empty = loglog_svg("t", "x", "y", &[Series { name: "a".into(), points: vec![] }]);
        assert!(empty.ends_with("</svg>\n"));
    }
}
