//! Static SVG plots of a finished run directory.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::output::read_csv;

fn plot_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Artifact { path: path.display().to_string(), reason: e.to_string() }
}

/// Blue for negative, white at zero, red for positive, scaled by `max |v|`.
fn diverging(v: f64, scale: f64) -> RGBColor {
    let t = if scale > 0.0 { (v / scale).clamp(-1.0, 1.0) } else { 0.0 };
    let fade = |x: f64| (255.0 * (1.0 - x.abs())) as u8;
    if t >= 0.0 {
        RGBColor(255, fade(t), fade(t))
    } else {
        RGBColor(fade(t), fade(t), 255)
    }
}

/// Heat map of column `col` of a node CSV laid out column by column in y.
fn heatmap(csv: &Path, col: usize, title: &str, svg: &Path) -> Result<()> {
    let (header, rows) = read_csv(csv)?;
    if rows.is_empty() || col >= header.len() {
        return Err(plot_err(csv, "no data"));
    }
    let n_s = rows.iter().take_while(|r| r[1] == rows[0][1]).count();
    let n_y = rows.len() / n_s;
    let at = |i: usize, j: usize| &rows[j * n_s + i];
    let scale = rows.iter().fold(0.0f64, |a, r| a.max(r[col].abs()));
    let r_max = rows.iter().fold(0.0f64, |a, r| a.max(r[0]));
    let (y_min, y_max) = (rows[0][1], rows[rows.len() - 1][1]);
    let caption = if scale == 0.0 { format!("{title} (identically 0)") } else { format!("{title} (max |.| = {scale:.3e})") };

    let root = SVGBackend::new(svg, (800, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(svg, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(caption, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0..r_max, y_min..y_max)
        .map_err(|e| plot_err(svg, e))?;
    chart.configure_mesh().x_desc("r").y_desc("y").draw().map_err(|e| plot_err(svg, e))?;
    let mut cells = Vec::with_capacity(rows.len());
    for j in 0..n_y.saturating_sub(1) {
        for i in 0..n_s - 1 {
            let (a, b) = (at(i, j), at(i + 1, j + 1));
            cells.push(Rectangle::new([(a[0], a[1]), (b[0], b[1])], diverging(at(i, j)[col], scale).filled()));
        }
    }
    chart.draw_series(cells).map_err(|e| plot_err(svg, e))?;
    root.present().map_err(|e| plot_err(svg, e))?;
    Ok(())
}

/// φ − r against r on log-log axes, with the fitted power law if the summary has one.
fn profile_plot(csv: &Path, fit: Option<(f64, f64)>, svg: &Path) -> Result<()> {
    let (_, rows) = read_csv(csv)?;
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r[0] > 0.0 && r[4] > 0.0).map(|r| (r[0], r[4])).collect();
    if pts.is_empty() {
        return Err(plot_err(csv, "no positive samples"));
    }
    let (x0, x1) = (pts[0].0, pts[pts.len() - 1].0);
    let (y0, y1) = pts.iter().fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.1), b.max(p.1)));
    let root = SVGBackend::new(svg, (800, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(svg, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption("phi - r", ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d((x0..x1).log_scale(), (y0..y1).log_scale())
        .map_err(|e| plot_err(svg, e))?;
    chart.configure_mesh().x_desc("r").y_desc("phi - r").draw().map_err(|e| plot_err(svg, e))?;
    chart.draw_series(LineSeries::new(pts.iter().copied(), &BLUE)).map_err(|e| plot_err(svg, e))?.label("profile").legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLUE));
    if let Some((kappa, gamma)) = fit {
        let line = pts.iter().filter(|p| p.0 >= 1.0).map(|p| (p.0, kappa * p.0.powf(-gamma))).filter(|p| p.1 >= y0);
        chart
            .draw_series(LineSeries::new(line, &RED))
            .map_err(|e| plot_err(svg, e))?
            .label(format!("{kappa:.4} r^-{gamma:.4}"))
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], RED));
    }
    chart.configure_series_labels().border_style(BLACK).background_style(WHITE).draw().map_err(|e| plot_err(svg, e))?;
    root.present().map_err(|e| plot_err(svg, e))?;
    Ok(())
}

/// Plots of u − r, the scaled residual M(u), f − 1 and the profile tail.
pub fn emit_plots(run: &Path) -> Result<Vec<PathBuf>> {
    let required = ["profile_phi.csv", "glued.csv", "metric.csv"];
    let missing: Vec<String> = required.iter().filter(|f| !run.join(f).exists()).map(|f| f.to_string()).collect();
    if !missing.is_empty() {
        return Err(Error::MissingArtifacts(missing));
    }
    let fit = std::fs::read_to_string(run.join("summary.json"))
        .ok()
        .and_then(|s| serde_json::from_str::<serde_json::Value>(&s).ok())
        .and_then(|v| Some((v["profile"]["kappa_fit"].as_f64()?, v["profile"]["gamma_fit"].as_f64()?)));
    let mut made = Vec::new();
    let svg = run.join("profile_loglog.svg");
    profile_plot(&run.join("profile_phi.csv"), fit, &svg)?;
    made.push(svg);
    for (suffix, label) in [("", ""), ("_synthetic", " (synthetic)")] {
        let glued = run.join(format!("glued{suffix}.csv"));
        let metric = run.join(format!("metric{suffix}.csv"));
        if !glued.exists() {
            continue;
        }
        for (csv, col, title, name) in [(&glued, 3, "u - r", "u_minus_r"), (&glued, 4, "M(u) u/m", "residual"), (&metric, 3, "f - 1", "f_minus_1")] {
            if !csv.exists() {
                continue;
            }
            let svg = run.join(format!("{name}{suffix}.svg"));
            heatmap(csv, col, &format!("{title}{label}"), &svg)?;
            made.push(svg);
        }
    }
    Ok(made)
}
