//! Static SVG charts.

use std::path::Path;

use plotters::prelude::*;

use crate::runs::{usage, CliResult};

fn draw_err<E: std::fmt::Display>(path: &Path) -> impl Fn(E) -> crate::runs::CliError + '_ {
    move |e| usage(format!("cannot draw {}: {e}", path.display()))
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-9);
    (lo - pad, hi + pad)
}

/// One chart with a line per named series. With `log_x` the x values are
/// plotted on a base-10 log axis.
pub fn line_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
    log_x: bool,
) -> CliResult {
    let err = draw_err(path);
    let tx = |x: f64| if log_x { x.log10() } else { x };
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(&err)?;
    let (x0, x1) = padded_range(series.iter().flat_map(|(_, p)| p.iter().map(|&(x, _)| tx(x))));
    let (y0, y1) = padded_range(series.iter().flat_map(|(_, p)| p.iter().map(|&(_, y)| y)));
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(&err)?;
    let x_fmt = |x: &f64| if log_x { format!("1e{x:.0}") } else { format!("{x}") };
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .x_label_formatter(&x_fmt)
        .draw()
        .map_err(&err)?;
    for (i, (name, points)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (tx(x), y)).collect();
        chart
            .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))
            .map_err(&err)?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        if pts.len() <= 40 {
            chart
                .draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))
                .map_err(&err)?;
        }
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(&err)?;
    root.present().map_err(&err)?;
    Ok(())
}

/// Heat map of `values[row][col]` with labeled axes; empty cells are `None`.
pub fn heatmap(
    path: &Path,
    title: &str,
    x_label: &str,
    x_ticks: &[String],
    y_label: &str,
    y_ticks: &[String],
    values: &[Vec<Option<f64>>],
) -> CliResult {
    let err = draw_err(path);
    let root = SVGBackend::new(path, (700, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(&err)?;
    let (nx, ny) = (x_ticks.len(), y_ticks.len());
    let (lo, hi) = padded_range(values.iter().flatten().filter_map(|v| *v));
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(15)
        .x_label_area_size(45)
        .y_label_area_size(70)
        .build_cartesian_2d(0..nx, 0..ny)
        .map_err(&err)?;
    let xf = |i: &usize| x_ticks.get(*i).cloned().unwrap_or_default();
    let yf = |i: &usize| y_ticks.get(*i).cloned().unwrap_or_default();
    chart
        .configure_mesh()
        .disable_mesh()
        .x_desc(x_label)
        .y_desc(y_label)
        .x_labels(nx + 1)
        .y_labels(ny + 1)
        .x_label_formatter(&xf)
        .y_label_formatter(&yf)
        .draw()
        .map_err(&err)?;
    for (r, row) in values.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            let Some(v) = v else { continue };
            let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
            let color = HSLColor(0.66 * (1.0 - t), 0.75, 0.5);
            chart
                .draw_series(std::iter::once(Rectangle::new([(c, r), (c + 1, r + 1)], color.filled())))
                .map_err(&err)?;
            chart
                .draw_series(std::iter::once(Text::new(
                    format!("{v:.3}"),
                    (c, r),
                    ("sans-serif", 14).into_font().color(&BLACK),
                )))
                .map_err(&err)?;
        }
    }
    root.present().map_err(&err)?;
    Ok(())
}
