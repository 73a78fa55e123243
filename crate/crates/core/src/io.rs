//! CSV tables, static SVG figures and atomic file writes.
//!
//! Every table has a header row. Floats are written in Rust's shortest
//! round-trip form, so reading a table back yields the same bits.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::density::SpectralDensity;
use crate::error::{Error, Result};
use crate::heterogeneity::HeterogeneityReport;
use crate::operator::DenseSymmetric;
use crate::quadlab::Trajectory;
use crate::slq::LanczosFactorization;
use crate::toynet::{Dataset, TrainResult};

/// A header plus string cells.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_f64(&mut self, row: &[f64]) {
        self.push(row.iter().map(|v| v.to_string()).collect());
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses comma-separated text whose first line is the header.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = match lines.next() {
            Some(h) => h.split(',').map(|c| c.trim().to_string()).collect(),
            None => return Err(parse_error(origin, "empty file")),
        };
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
            if row.len() != header.len() {
                return Err(parse_error(
                    origin,
                    format!("row {} has {} cells, header has {}", i + 2, row.len(), header.len()),
                ));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?, path)
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// A numeric column; empty cells read as NaN.
    pub fn f64_column(&self, name: &str, origin: &Path) -> Result<Vec<f64>> {
        let c = self
            .column(name)
            .ok_or_else(|| parse_error(origin, format!("missing column `{name}`")))?;
        self.rows.iter().map(|r| parse_cell(&r[c], origin)).collect()
    }

    pub fn f64_rows(&self, origin: &Path) -> Result<Vec<Vec<f64>>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|c| parse_cell(c, origin)).collect())
            .collect()
    }
}

fn parse_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn parse_cell(cell: &str, origin: &Path) -> Result<f64> {
    if cell.is_empty() {
        return Ok(f64::NAN);
    }
    cell.parse()
        .map_err(|_| parse_error(origin, format!("not a number: `{cell}`")))
}

/// Writes `contents` to a sibling temp file, then renames it over `path`.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let mut tmp = PathBuf::from(path);
    tmp.set_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_table(path: &Path, table: &Table) -> Result<()> {
    atomic_write(path, table.to_csv().as_bytes())
}

/// `t,density`
pub fn density_table(d: &SpectralDensity) -> Table {
    let mut t = Table::new(["t", "density"]);
    for (x, y) in d.grid().iter().zip(d.values()) {
        t.push_f64(&[*x, *y]);
    }
    t
}

pub fn read_density(path: &Path) -> Result<SpectralDensity> {
    let t = Table::read(path)?;
    let grid = t.f64_column("t", path)?;
    let values = t.f64_column("density", path)?;
    // the kernel width is not stored; use the grid step as a stand-in
    let width = if grid.len() > 1 { grid[1] - grid[0] } else { 1.0 };
    SpectralDensity::new(grid, values, width)
}

/// `alpha,beta`; the last row's beta is empty.
pub fn factorization_table(f: &LanczosFactorization) -> Table {
    let mut t = Table::new(["alpha", "beta"]);
    for (i, a) in f.alphas.iter().enumerate() {
        let b = f.betas.get(i).map_or(String::new(), |b| b.to_string());
        t.push(vec![a.to_string(), b]);
    }
    t
}

/// Square table whose first column holds the row labels.
pub fn heatmap_table(report: &HeterogeneityReport) -> Table {
    let mut t = Table::new(std::iter::once("block".to_string()).chain(report.labels.iter().cloned()));
    for (label, row) in report.labels.iter().zip(&report.pairwise) {
        t.push(
            std::iter::once(label.clone())
                .chain(row.iter().map(f64::to_string))
                .collect(),
        );
    }
    t
}

/// Labels and the pairwise matrix of a heatmap table.
pub fn read_heatmap(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let t = Table::read(path)?;
    let labels: Vec<String> = t.header[1..].to_vec();
    let mut m = Vec::with_capacity(t.rows.len());
    for r in &t.rows {
        m.push(r[1..].iter().map(|c| parse_cell(c, path)).collect::<Result<Vec<_>>>()?);
    }
    if m.len() != labels.len() {
        return Err(parse_error(path, "heatmap is not square"));
    }
    Ok((labels, m))
}

/// `js0,normalization,blocks`
pub fn js0_table(report: &HeterogeneityReport) -> Table {
    let mut t = Table::new(["js0", "normalization", "blocks"]);
    t.push(vec![
        report.js0.to_string(),
        report.normalization.as_str().to_string(),
        report.blocks().to_string(),
    ]);
    t
}

/// `iter,loss_ratio`
pub fn trajectory_table(traj: &Trajectory) -> Table {
    let mut t = Table::new(["iter", "loss_ratio"]);
    for (i, r) in traj.loss_ratios.iter().enumerate() {
        t.push(vec![i.to_string(), r.to_string()]);
    }
    t
}

/// `step,loss,accuracy`
pub fn training_table(res: &TrainResult) -> Table {
    let mut t = Table::new(["step", "loss", "accuracy"]);
    for ((s, l), a) in res.steps.iter().zip(&res.losses).zip(&res.accuracies) {
        t.push(vec![s.to_string(), l.to_string(), a.to_string()]);
    }
    t
}

/// `x0,…,x{d−1},label`
pub fn dataset_table(data: &Dataset) -> Table {
    let d = data.features();
    let mut t = Table::new((0..d).map(|i| format!("x{i}")).chain(std::iter::once("label".to_string())));
    for (x, y) in data.xs.iter().zip(&data.ys) {
        t.push(x.iter().chain(std::iter::once(y)).map(f64::to_string).collect());
    }
    t
}

/// Reads a dataset table; the last column is the label.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let t = Table::read(path)?;
    if t.header.len() < 2 {
        return Err(parse_error(path, "need at least one feature and a label column"));
    }
    let rows = t.f64_rows(path)?;
    let mut xs = Vec::with_capacity(rows.len());
    let mut ys = Vec::with_capacity(rows.len());
    for mut r in rows {
        ys.push(r.pop().unwrap());
        xs.push(r);
    }
    Dataset::new(xs, ys)
}

/// `c0,…,c{n−1}` followed by the matrix rows.
pub fn matrix_table(m: &DenseSymmetric) -> Table {
    let n = m.dim();
    let mut t = Table::new((0..n).map(|i| format!("c{i}")));
    for r in m.to_rows() {
        t.push_f64(&r);
    }
    t
}

/// Reads a square symmetric matrix (header row required).
pub fn read_matrix(path: &Path, tol: f64) -> Result<DenseSymmetric> {
    let t = Table::read(path)?;
    let rows = t.f64_rows(path)?;
    if rows.len() != t.header.len() {
        return Err(parse_error(
            path,
            format!("{} rows for {} columns", rows.len(), t.header.len()),
        ));
    }
    DenseSymmetric::from_rows(&rows, tol)
}

/// Discrete color scale of [`heatmap_svg`]: cell value `v ∈ [0,1]` takes
/// color `HEATMAP_COLORS[min(⌊8v⌋, 7)]`.
pub const HEATMAP_COLORS: [&str; 8] = [
    "#440154", "#46327e", "#365c8d", "#277f8e", "#1fa187", "#4ac16d", "#a0da39", "#fde725",
];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line plot of `(label, points)` series. With `log_y`, non-positive values
/// are dropped.
pub fn line_plot_svg(title: &str, series: &[(String, Vec<(f64, f64)>)], log_y: bool) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    let tf = |y: f64| if log_y { y.log10() } else { y };
    let pts: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|(_, p)| {
            p.iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_y || *y > 0.0))
                .map(|&(x, y)| (x, tf(y)))
                .collect()
        })
        .collect();
    let all = pts.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, W / 2.0, xml_escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{M},{M} L{M},{b} L{r},{b}" fill="none" stroke="black"/>"#,
        b = H - M,
        r = W - M
    );
    let ylab = |v: f64| if log_y { format!("1e{v:.1}") } else { format!("{v:.3}") };
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, M - 4.0, H - M, ylab(y0));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, M - 4.0, M + 4.0, ylab(y1));
    let _ = writeln!(s, r#"<text x="{M}" y="{}" text-anchor="middle">{x0:.3}</text>"#, H - M + 16.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x1:.3}</text>"#, W - M, H - M + 16.0);
    const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
    for (k, ((label, _), p)) in series.iter().zip(&pts).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        if !p.is_empty() {
            let mut d = String::new();
            for (i, &(x, y)) in p.iter().enumerate() {
                let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, sx(x), sy(y));
            }
            let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, d.trim_end());
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - M - 120.0,
            M + 14.0 * k as f64,
            xml_escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Heatmap of a pairwise report using [`HEATMAP_COLORS`].
pub fn heatmap_svg(report: &HeterogeneityReport) -> String {
    let n = report.blocks();
    let cell = 40.0;
    let left = 80.0;
    let top = 40.0;
    let w = left + cell * n as f64 + 20.0;
    let h = top + cell * n as f64 + 40.0;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{left}" y="20">js0 = {:.4} ({})</text>"#, report.js0, report.normalization);
    for (i, row) in report.pairwise.iter().enumerate() {
        let y = top + cell * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 4.0,
            y + cell / 2.0 + 4.0,
            xml_escape(&report.labels[i])
        );
        for (j, &v) in row.iter().enumerate() {
            let bin = ((v.clamp(0.0, 1.0) * 8.0) as usize).min(7);
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{y}" width="{cell}" height="{cell}" fill="{}"><title>{v}</title></rect>"#,
                left + cell * j as f64,
                HEATMAP_COLORS[bin]
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heterogeneity::Normalization;

    #[test]
    fn table_round_trip() {
        let mut t = Table::new(["a", "b"]);
        t.push_f64(&[0.1 + 0.2, -1e-300]);
        t.push_f64(&[f64::MAX, 3.0]);
        let back = Table::parse(&t.to_csv(), Path::new("mem")).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.f64_column("a", Path::new("mem")).unwrap()[0], 0.1 + 0.2);
        assert!(Table::parse("a,b\n1\n", Path::new("mem")).is_err());
        assert!(Table::parse("", Path::new("mem")).is_err());
    }

    #[test]
    fn heatmap_svg_bins() {
        let report = HeterogeneityReport {
            labels: vec!["a".into(), "b".into()],
            pairwise: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            js0: 1.0,
            normalization: Normalization::None,
        };
        let svg = heatmap_svg(&report);
        assert_eq!(svg.matches(HEATMAP_COLORS[0]).count(), 2);
        assert_eq!(svg.matches(HEATMAP_COLORS[7]).count(), 2);
    }

    #[test]
    fn log_plot_drops_nonpositive() {
        let svg = line_plot_svg("t", &[("s".into(), vec![(0.0, 1.0), (1.0, 0.0), (2.0, 0.01)])], true);
        let line = svg.lines().find(|l| l.contains("#1f77b4") && l.starts_with("<path")).unwrap();
        assert_eq!(line.matches('L').count(), 1);
    }
}
