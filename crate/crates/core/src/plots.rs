//! SVG figures for the rate and coverage studies.

use std::path::Path;

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::experiments::{CoverageReport, RateReport};

const SIZE: (u32, u32) = (640, 480);

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Io(std::io::Error::other(format!("plot: {e}")))
}

/// Median error against `n` on log-log axes, one dot per replicate behind it.
pub fn plot_rate(report: &RateReport, path: &Path) -> Result<()> {
    let pts: Vec<(f64, f64)> = report
        .rows
        .iter()
        .filter(|r| r.err.is_finite() && r.err > 0.0)
        .map(|r| (r.n as f64, r.err))
        .collect();
    if pts.is_empty() {
        return Err(Error::Empty("rate rows with positive error"));
    }
    let (xmin, xmax) = bounds(pts.iter().map(|p| p.0));
    let (ymin, ymax) = bounds(pts.iter().map(|p| p.1));
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d((xmin / 1.5..xmax * 1.5).log_scale(), (ymin / 2.0..ymax * 2.0).log_scale())
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("n")
        .y_desc("err")
        .draw()
        .map_err(plot_err)?;
    chart
        .draw_series(pts.iter().map(|&p| Circle::new(p, 2, BLUE.mix(0.4).filled())))
        .map_err(plot_err)?;
    let med: Vec<(f64, f64)> = report.medians.iter().map(|&(n, e)| (n as f64, e)).collect();
    chart.draw_series(LineSeries::new(med.clone(), &BLACK)).map_err(plot_err)?;
    chart
        .draw_series(med.iter().map(|&p| Circle::new(p, 4, BLACK.filled())))
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Coverage frequency per `n` with its binomial interval.
pub fn plot_coverage(reports: &[CoverageReport], target: f64, path: &Path) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::Empty("coverage reports"));
    }
    let (xmin, xmax) = bounds(reports.iter().map(|r| r.n as f64));
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d((xmin / 1.5..xmax * 1.5).log_scale(), 0.0..1.05)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("n")
        .y_desc("coverage")
        .draw()
        .map_err(plot_err)?;
    chart
        .draw_series(LineSeries::new(vec![(xmin / 1.5, target), (xmax * 1.5, target)], &RED))
        .map_err(plot_err)?;
    for r in reports {
        let x = r.n as f64;
        chart
            .draw_series(LineSeries::new(vec![(x, r.ci.0), (x, r.ci.1)], &BLACK))
            .map_err(plot_err)?;
    }
    chart
        .draw_series(reports.iter().map(|r| Circle::new((r.n as f64, r.frequency), 4, BLACK.filled())))
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}
