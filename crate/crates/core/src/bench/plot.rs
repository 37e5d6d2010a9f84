//! Self-contained SVG figures.

use std::path::Path;

use plotters::prelude::*;

use crate::error::{Error, Result};

fn plot_err<E: std::fmt::Debug>(e: E) -> Error {
    Error::Plot(format!("{e:?}"))
}

fn log_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| *v > 0.0 && v.is_finite())
        .fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (1e-16, 1.0);
    }
    let lo = 10f64.powf(lo.log10().floor());
    let hi = 10f64.powf(hi.log10().ceil()).max(lo * 10.0);
    (lo, hi)
}

const COLORS: [RGBColor; 4] = [BLUE, RED, GREEN, MAGENTA];

/// Error against term count, one line per series, logarithmic error axis.
pub fn decay_plot(path: &Path, title: &str, n: &[usize], series: &[(String, Vec<f64>)]) -> Result<()> {
    let root = SVGBackend::new(path, (640, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let (lo, hi) = log_range(series.iter().flat_map(|(_, v)| v.iter().copied()));
    let nmax = n.iter().copied().max().unwrap_or(1) as f64;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(0.5..nmax + 0.5, (lo..hi).log_scale())
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("number of separate terms N")
        .y_desc("average relative error")
        .y_label_formatter(&|v| format!("{v:.0e}"))
        .draw()
        .map_err(plot_err)?;
    for (k, (name, v)) in series.iter().enumerate() {
        let c = COLORS[k % COLORS.len()];
        let pts: Vec<(f64, f64)> = n.iter().zip(v).filter(|(_, e)| **e > 0.0).map(|(&n, &e)| (n as f64, e)).collect();
        chart
            .draw_series(LineSeries::new(pts.clone(), c.stroke_width(2)))
            .map_err(plot_err)?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], c));
        chart
            .draw_series(pts.into_iter().map(|p| Circle::new(p, 4, c.filled())))
            .map_err(plot_err)?;
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .background_style(WHITE.mix(0.8))
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Per-sample errors against sample index.
pub fn scatter_plot(path: &Path, title: &str, errors: &[f64]) -> Result<()> {
    let root = SVGBackend::new(path, (640, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let (lo, hi) = log_range(errors.iter().copied());
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(0.0..(errors.len() as f64 + 1.0), (lo..hi).log_scale())
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("sample index")
        .y_desc("relative error")
        .y_label_formatter(&|v| format!("{v:.0e}"))
        .draw()
        .map_err(plot_err)?;
    chart
        .draw_series(
            errors
                .iter()
                .enumerate()
                .filter(|(_, e)| **e > 0.0)
                .map(|(k, &e)| Circle::new((k as f64 + 1.0, e), 3, BLUE.filled())),
        )
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Mean relative error against time.
pub fn time_curve_plot(path: &Path, title: &str, curve: &[(f64, f64)]) -> Result<()> {
    let root = SVGBackend::new(path, (640, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let (lo, hi) = log_range(curve.iter().map(|p| p.1));
    let tmax = curve.last().map_or(1.0, |p| p.0);
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(0.0..tmax, (lo..hi).log_scale())
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("t")
        .y_desc("average relative error")
        .y_label_formatter(&|v| format!("{v:.0e}"))
        .draw()
        .map_err(plot_err)?;
    chart
        .draw_series(LineSeries::new(curve.iter().copied().filter(|p| p.1 > 0.0), BLUE.stroke_width(2)))
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

fn color_map(v: f64, lo: f64, hi: f64) -> RGBColor {
    let s = if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.5 };
    // blue -> white -> red
    let (r, g, b) = if s < 0.5 {
        let u = s / 0.5;
        (u, u, 1.0)
    } else {
        let u = (s - 0.5) / 0.5;
        (1.0, 1.0 - u, 1.0 - u)
    };
    RGBColor((r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8)
}

/// Vertex field on the `(nx + 1) x (ny + 1)` lattice, one panel per subdomain.
pub fn heatmap_plot(path: &Path, title: &str, nx: usize, ny: usize, values: &[f64]) -> Result<()> {
    if values.len() != (nx + 1) * (ny + 1) {
        return Err(Error::Plot(format!("heatmap expects {} values, got {}", (nx + 1) * (ny + 1), values.len())));
    }
    let root = SVGBackend::new(path, (900, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let root = root.titled(title, ("sans-serif", 20)).map_err(plot_err)?;
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let panels = root.split_evenly((1, 2));
    let mid = nx / 2;
    for (j, panel) in panels.iter().enumerate() {
        let (i0, i1) = if j == 0 { (0, mid) } else { (mid, nx) };
        let (x0, x1) = (i0 as f64 / nx as f64, i1 as f64 / nx as f64);
        let mut chart = ChartBuilder::on(panel)
            .caption(format!("subdomain {}", j + 1), ("sans-serif", 16))
            .margin(10)
            .x_label_area_size(30)
            .y_label_area_size(40)
            .build_cartesian_2d(x0..x1, 0.0..1.0)
            .map_err(plot_err)?;
        chart.configure_mesh().disable_mesh().x_labels(3).y_labels(5).draw().map_err(plot_err)?;
        let dx = 1.0 / nx as f64;
        let dy = 1.0 / ny as f64;
        let cells = (i0..i1).flat_map(|i| (0..ny).map(move |k| (i, k))).map(|(i, k)| {
            let v = 0.25
                * (values[k * (nx + 1) + i]
                    + values[k * (nx + 1) + i + 1]
                    + values[(k + 1) * (nx + 1) + i]
                    + values[(k + 1) * (nx + 1) + i + 1]);
            let (x, y) = (i as f64 * dx, k as f64 * dy);
            Rectangle::new([(x, y), (x + dx, y + dy)], color_map(v, lo, hi).filled())
        });
        chart.draw_series(cells).map_err(plot_err)?;
    }
    root.present().map_err(plot_err)?;
    Ok(())
}
