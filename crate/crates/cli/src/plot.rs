//! Long-format plot data (`series,x,y,ylo,yhi`) and a minimal SVG line chart.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::Experiment;
use crate::table::{Metadata, ResultRow, ResultTable};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub x: f64,
    pub y: f64,
    pub ylo: Option<f64>,
    pub yhi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<PlotPoint>,
}

fn series_name(row: &ResultRow, suffix: &str) -> String {
    let k = &row.key;
    format!("{}/{}/s={}{suffix}", k.matrix, k.family, k.s)
}

fn push(series: &mut Vec<Series>, name: String, p: PlotPoint) {
    match series.iter_mut().find(|s| s.name == name) {
        Some(s) => s.points.push(p),
        None => series.push(Series { name, points: vec![p] }),
    }
}

fn band(y: f64, se: Option<f64>) -> (Option<f64>, Option<f64>) {
    (se.map(|e| y - e), se.map(|e| y + e))
}

/// Maps a result table onto plot series along the axes of its experiment.
pub fn plot_series(table: &ResultTable, experiment: &str) -> Result<Vec<Series>, CliError> {
    let exp: Experiment = experiment.parse()?;
    if exp != table.experiment {
        return Err(CliError::UnknownExperiment(format!("{experiment} does not match table {}", table.experiment)));
    }
    let mut out = Vec::new();
    for row in &table.rows {
        let v = |c: &str| table.value(row, c);
        let k = row.key.k as f64;
        let idx = row.key.index as f64;
        match exp {
            Experiment::RateSweep => {
                if let Some(y) = v("rate") {
                    let (ylo, yhi) = band(y, v("rate_stderr"));
                    push(&mut out, series_name(row, "/rate"), PlotPoint { x: k, y, ylo, yhi });
                }
                if let Some(y) = v("s_min") {
                    let (ylo, yhi) = band(y, v("s_min_stderr"));
                    push(&mut out, series_name(row, "/s_min"), PlotPoint { x: k, y, ylo, yhi });
                }
            }
            Experiment::ConvergenceCurves => {
                if let Some(y) = v("rel_err_mean") {
                    let name = series_name(row, &format!("/k={}", row.key.k));
                    push(&mut out, name, PlotPoint { x: idx, y, ylo: v("rel_err_min"), yhi: v("rel_err_max") });
                }
            }
            Experiment::SurrogateCompare => {
                for col in ["s_min", "surrogate", "surrogate_implicit"] {
                    if let Some(y) = v(col) {
                        let (ylo, yhi) = if col == "s_min" { band(y, v("s_min_stderr")) } else { (None, None) };
                        push(&mut out, format!("{}/{}/{col}", row.key.matrix, row.key.family), PlotPoint { x: k, y, ylo, yhi });
                    }
                }
            }
            Experiment::SparsitySweep => {
                if let Some(y) = v("final_rel_err_mean") {
                    let name = format!("{}/{}/k={}", row.key.matrix, row.key.family, row.key.k);
                    push(&mut out, name, PlotPoint { x: row.key.s as f64, y, ylo: v("final_rel_err_min"), yhi: v("final_rel_err_max") });
                }
            }
            Experiment::RandsvdErr => {
                if let Some(y) = v("err_mean") {
                    let (ylo, yhi) = band(y, v("err_stderr"));
                    push(&mut out, series_name(row, "/err"), PlotPoint { x: k, y, ylo, yhi });
                }
                if let Some(y) = v("bound") {
                    push(&mut out, series_name(row, "/bound"), PlotPoint { x: k, y, ylo: None, yhi: None });
                }
            }
            Experiment::Eigendecay => {
                for col in ["predicted_decay", "empirical_decay"] {
                    if let Some(y) = v(col) {
                        let name = series_name(row, &format!("/k={}/{col}", row.key.k));
                        push(&mut out, name, PlotPoint { x: idx, y, ylo: None, yhi: None });
                    }
                }
            }
            Experiment::NewtonDemo => {
                if let Some(y) = v("f_gap") {
                    push(&mut out, series_name(row, &format!("/k={}", row.key.k)), PlotPoint { x: idx, y, ylo: None, yhi: None });
                }
                for col in ["rho_hat", "refined", "crude"] {
                    if let Some(y) = v(col) {
                        push(&mut out, series_name(row, &format!("/{col}")), PlotPoint { x: k, y, ylo: None, yhi: None });
                    }
                }
            }
        }
    }
    if out.is_empty() {
        return Err(CliError::EmptySeries(table.name.clone()));
    }
    Ok(out)
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:e}")).unwrap_or_default()
}

pub fn write_plot_csv<W: Write>(series: &[Series], w: &mut W, meta: &Metadata) -> std::io::Result<()> {
    writeln!(w, "{}", meta.line())?;
    writeln!(w, "series,x,y,ylo,yhi")?;
    for s in series {
        for p in &s.points {
            writeln!(w, "{},{:e},{:e},{},{}", s.name, p.x, p.y, cell(p.ylo), cell(p.yhi))?;
        }
    }
    Ok(())
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 40.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Polyline chart; y is drawn on a log10 axis when all values are positive
/// and span more than two decades.
pub fn render_svg(series: &[Series], title: &str) -> String {
    let pts = series.iter().flat_map(|s| &s.points);
    let (xmin, xmax) = pts.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.x), b.max(p.x)));
    let (ymin, ymax) = pts.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.y), b.max(p.y)));
    let log = ymin > 0.0 && ymax / ymin > 100.0;
    let ty = |y: f64| if log { y.log10() } else { y };
    let (ylo, yhi) = (ty(ymin), ty(ymax));
    let sx = |x: f64| MARGIN + (x - xmin) / (xmax - xmin).max(f64::MIN_POSITIVE) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (ty(y) - ylo) / (yhi - ylo).max(f64::MIN_POSITIVE) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(svg, r#"<text x="{MARGIN}" y="20" font-size="14">{title}</text>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = s.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.y))).collect();
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" points="{}"><title>{}</title></polyline>"#, coords.join(" "), s.name);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" font-size="10" fill="{color}">{}</text>"#, WIDTH - MARGIN + 4.0, MARGIN + 12.0 * i as f64, i);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `<name>_plot.csv` (and `<name>.svg` when `svg` is set) for `table`.
/// Nothing is written when the table yields no series.
pub fn emit_plot_data(table: &ResultTable, experiment: &str, out: &Path, meta: &Metadata, svg: bool) -> Result<Vec<PathBuf>, CliError> {
    let series = plot_series(table, experiment)?;
    if let Some(empty) = series.iter().find(|s| s.points.is_empty()) {
        return Err(CliError::EmptySeries(empty.name.clone()));
    }
    let mut buf = Vec::new();
    write_plot_csv(&series, &mut buf, meta)?;
    let csv_path = out.join(format!("{}_plot.csv", table.name));
    fs::write(&csv_path, buf)?;
    let mut files = vec![csv_path];
    if svg {
        let path = out.join(format!("{}.svg", table.name));
        fs::write(&path, render_svg(&series, &table.name))?;
        files.push(path);
    }
    Ok(files)
}
