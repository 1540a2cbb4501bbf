//! Static SVG 1.1 information-plane plots: one marker per probe epoch
//! at (I(X;Z), I(Y;Z)), colored from dark violet (first epoch) to
//! yellow (last), connected in epoch order, axes labeled in nats.

use std::path::Path;

use crate::error::{CliError, CliResult};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 540.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 55.0;
const TICKS: usize = 5;

/// One plotted probe epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub epoch: usize,
    pub x: f64,
    pub y: f64,
}

/// Points plus the columns they came from (after "auto" resolution).
#[derive(Debug, Clone, PartialEq)]
pub struct TracePlot {
    pub points: Vec<PlotPoint>,
    pub x_column: String,
    pub y_column: String,
}

fn column_index(headers: &[String], name: &str, path: &Path) -> CliResult<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| {
        CliError::Format(format!(
            "{}: no column named {} (have: {})",
            path.display(),
            name,
            headers.join(", ")
        ))
    })
}

/// Reads a trace CSV and picks the plot columns. "auto" x prefers the
/// mixture estimate and falls back to the binned one when that column
/// is empty (an information-dropout trace); "auto" y is the variational
/// label bound.
pub fn read_trace_points(path: &Path, x_spec: &str, y_spec: &str) -> CliResult<TracePlot> {
    let mut reader = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| CliError::io(path, std::io::Error::other(e.to_string())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Format(format!("{}: line 1: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();

    let mut rows: Vec<(u64, Vec<String>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line().to_string())
                .unwrap_or_else(|| "?".into());
            CliError::Format(format!("{}: line {line}: {e}", path.display()))
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    if rows.is_empty() {
        return Err(CliError::Format(format!(
            "{}: no data rows to plot",
            path.display()
        )));
    }

    let x_column = if x_spec == "auto" {
        let mixture = headers.iter().position(|h| h == "mi_xz");
        match mixture {
            Some(i) if rows.iter().all(|(_, r)| !r[i].is_empty()) => "mi_xz".to_string(),
            _ => "mi_xz_binning".to_string(),
        }
    } else {
        x_spec.to_string()
    };
    let y_column = if y_spec == "auto" {
        "mi_yz_variational".to_string()
    } else {
        y_spec.to_string()
    };

    let epoch_idx = column_index(&headers, "epoch", path)?;
    let x_idx = column_index(&headers, &x_column, path)?;
    let y_idx = column_index(&headers, &y_column, path)?;

    let mut points = Vec::with_capacity(rows.len());
    for (line, row) in &rows {
        let parse = |idx: usize, name: &str| -> CliResult<f64> {
            let cell = &row[idx];
            cell.parse().map_err(|_| {
                CliError::Format(format!(
                    "{}: line {line}: cannot parse {:?} in column {name} as a number",
                    path.display(),
                    cell
                ))
            })
        };
        let epoch: usize = row[epoch_idx].parse().map_err(|_| {
            CliError::Format(format!(
                "{}: line {line}: cannot parse {:?} in column epoch as an integer",
                path.display(),
                row[epoch_idx]
            ))
        })?;
        points.push(PlotPoint {
            epoch,
            x: parse(x_idx, &x_column)?,
            y: parse(y_idx, &y_column)?,
        });
    }
    Ok(TracePlot {
        points,
        x_column,
        y_column,
    })
}

/// Data range expanded by a 5% margin on each side; a degenerate span
/// (single value) widens to a visible window around it.
pub(crate) fn padded_range(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let min = values.clone().fold(f64::INFINITY, f64::min);
    let max = values.fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let pad = if span == 0.0 {
        f64::max(1.0, min.abs() * 0.1)
    } else {
        0.05 * span
    };
    (min - pad, max + pad)
}

/// Three-stop dark-violet → teal → yellow ramp over t in [0,1].
pub(crate) fn epoch_color(t: f64) -> String {
    const STOPS: [[f64; 3]; 3] = [
        [68.0, 1.0, 84.0],
        [33.0, 145.0, 140.0],
        [253.0, 231.0, 37.0],
    ];
    let t = t.clamp(0.0, 1.0);
    let (a, b, u) = if t < 0.5 {
        (STOPS[0], STOPS[1], 2.0 * t)
    } else {
        (STOPS[1], STOPS[2], 2.0 * t - 1.0)
    };
    let channel = |i: usize| (a[i] + (b[i] - a[i]) * u).round() as u8;
    format!("#{:02x}{:02x}{:02x}", channel(0), channel(1), channel(2))
}

fn axis_label(column: &str) -> String {
    match column {
        "mi_xz" => "I(X;Z) (nats)".to_string(),
        "mi_xz_binning" => "I(X;Z) binned (nats)".to_string(),
        "mi_yz_binning" => "I(Y;Z) binned (nats)".to_string(),
        "mi_yz_variational" => "I(Y;Z) (nats)".to_string(),
        "kl_mean" => "mean noise KL (nats)".to_string(),
        other => other.to_string(),
    }
}

/// Renders the scatter/line plot as a standalone SVG 1.1 document.
pub fn render_ip_svg(plot: &TracePlot) -> String {
    let (x_lo, x_hi) = padded_range(plot.points.iter().map(|p| p.x));
    let (y_lo, y_hi) = padded_range(plot.points.iter().map(|p| p.y));
    let to_px_x = |v: f64| MARGIN_LEFT + (v - x_lo) / (x_hi - x_lo) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT);
    let to_px_y = |v: f64| HEIGHT - MARGIN_BOTTOM - (v - y_lo) / (y_hi - y_lo) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM);

    let e_min = plot.points.iter().map(|p| p.epoch).min().unwrap_or(0);
    let e_max = plot.points.iter().map(|p| p.epoch).max().unwrap_or(0);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg version=\"1.1\" xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n"
    ));

    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    svg.push_str(&format!(
        "  <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"#333333\" stroke-width=\"1\"/>\n"
    ));
    svg.push_str(&format!(
        "  <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"#333333\" stroke-width=\"1\"/>\n"
    ));

    for i in 0..TICKS {
        let f = i as f64 / (TICKS - 1) as f64;
        let xv = x_lo + f * (x_hi - x_lo);
        let xp = to_px_x(xv);
        svg.push_str(&format!(
            "  <line x1=\"{xp:.2}\" y1=\"{y0}\" x2=\"{xp:.2}\" y2=\"{:.2}\" stroke=\"#333333\" stroke-width=\"1\"/>\n",
            y0 + 4.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{xp:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{xv:.3}</text>\n",
            y0 + 17.0
        ));
        let yv = y_lo + f * (y_hi - y_lo);
        let yp = to_px_y(yv);
        svg.push_str(&format!(
            "  <line x1=\"{:.2}\" y1=\"{yp:.2}\" x2=\"{x0}\" y2=\"{yp:.2}\" stroke=\"#333333\" stroke-width=\"1\"/>\n",
            x0 - 4.0
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{yv:.3}</text>\n",
            x0 - 7.0,
            yp + 4.0
        ));
    }

    svg.push_str(&format!(
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        axis_label(&plot.x_column)
    ));
    svg.push_str(&format!(
        "  <text x=\"18\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">{}</text>\n",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        axis_label(&plot.y_column)
    ));

    if plot.points.len() > 1 {
        let vertices: Vec<String> = plot
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", to_px_x(p.x), to_px_y(p.y)))
            .collect();
        svg.push_str(&format!(
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"#999999\" stroke-width=\"1\" stroke-opacity=\"0.7\"/>\n",
            vertices.join(" ")
        ));
    }

    for p in &plot.points {
        let t = if e_max > e_min {
            (p.epoch - e_min) as f64 / (e_max - e_min) as f64
        } else {
            0.0
        };
        svg.push_str(&format!(
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"5\" fill=\"{}\" stroke=\"#333333\" stroke-width=\"0.5\"><title>epoch {}: ({}, {})</title></circle>\n",
            to_px_x(p.x),
            to_px_y(p.y),
            epoch_color(t),
            p.epoch,
            p.x,
            p.y
        ));
    }

    svg.push_str("</svg>\n");
    svg
}

pub fn write_plot(plot: &TracePlot, path: &Path) -> CliResult<()> {
    std::fs::write(path, render_ip_svg(plot)).map_err(|e| CliError::io(path, e))
}
