use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::{aggregate, read_aggregate_csv, AggregateRow, ExperimentError, Result, RunRecord};
use crate::envs::EnvId;

/// One band of a learning-curve plot.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub label: String,
    pub rows: Vec<AggregateRow>,
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(255, 127, 14),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
];

fn draw_failed(path: &Path, e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Format {
        path: path.to_path_buf(),
        reason: format!("drawing failed: {e}"),
    }
}

/// Draws mean lines with ±std bands over environment steps, plus a dotted
/// line at the environment's solved threshold.
pub fn render_plot(env: EnvId, series: &[PlotSeries], path: &Path) -> Result<()> {
    let points = |s: &PlotSeries| -> Vec<(f64, f64, f64)> {
        s.rows
            .iter()
            .filter(|r| r.return_mean.is_finite())
            .map(|r| (r.env_steps as f64, r.return_mean, r.return_std))
            .collect()
    };
    let all: Vec<(f64, f64, f64)> = series.iter().flat_map(points).collect();
    if all.is_empty() {
        return Err(ExperimentError::EmptyRecordSet);
    }
    let target = env.solved_threshold();
    let x_max = all.iter().map(|p| p.0).fold(1.0, f64::max);
    let y_lo = all.iter().map(|p| p.1 - p.2).fold(target, f64::min);
    let y_hi = all.iter().map(|p| p.1 + p.2).fold(target, f64::max);
    let pad = 0.05 * (y_hi - y_lo).max(1.0);

    let root = SVGBackend::new(path, (900, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| draw_failed(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(env.as_str(), ("sans-serif", 24))
        .margin(15)
        .x_label_area_size(45)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..x_max, (y_lo - pad)..(y_hi + pad))
        .map_err(|e| draw_failed(path, e))?;
    chart
        .configure_mesh()
        .x_desc("environment steps")
        .y_desc("mean return")
        .draw()
        .map_err(|e| draw_failed(path, e))?;

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts = points(s);
        let band: Vec<(f64, f64)> = pts
            .iter()
            .map(|p| (p.0, p.1 + p.2))
            .chain(pts.iter().rev().map(|p| (p.0, p.1 - p.2)))
            .collect();
        chart
            .draw_series(std::iter::once(Polygon::new(band, color.mix(0.2).filled())))
            .map_err(|e| draw_failed(path, e))?;
        chart
            .draw_series(LineSeries::new(pts.iter().map(|p| (p.0, p.1)), color.stroke_width(2)))
            .map_err(|e| draw_failed(path, e))?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    chart
        .draw_series(DashedLineSeries::new(
            vec![(0.0, target), (x_max, target)],
            4,
            6,
            BLACK.stroke_width(2),
        ))
        .map_err(|e| draw_failed(path, e))?;
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| draw_failed(path, e))?;
    root.present().map_err(|e| draw_failed(path, e))
}

/// Plots every run directory, one SVG per environment comparing its runs.
/// Curves come from `aggregate.csv`, or are recomputed from the seed curves
/// when that file is missing.
pub fn plot_runs(run_dirs: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if run_dirs.is_empty() {
        return Err(ExperimentError::EmptyRecordSet);
    }
    let mut by_env: BTreeMap<EnvId, Vec<(RunRecord, Vec<AggregateRow>)>> = BTreeMap::new();
    for dir in run_dirs {
        let record = RunRecord::load(dir)?;
        let path = dir.join("aggregate.csv");
        let rows = if path.exists() {
            read_aggregate_csv(&path)?
        } else {
            aggregate(&record.curves(dir)?)
        };
        by_env.entry(record.env).or_default().push((record, rows));
    }
    std::fs::create_dir_all(out_dir).map_err(|source| ExperimentError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    for (env, runs) in by_env {
        let schemes_unique = runs
            .iter()
            .all(|(r, _)| runs.iter().filter(|(o, _)| o.scheme == r.scheme).count() == 1);
        let series: Vec<PlotSeries> = runs
            .into_iter()
            .map(|(record, rows)| PlotSeries {
                label: if schemes_unique {
                    record.scheme.to_string()
                } else {
                    format!("{} ({})", record.scheme, record.name)
                },
                rows,
            })
            .collect();
        let path = out_dir.join(format!("{}.svg", env.as_str()));
        render_plot(env, &series, &path)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(offset: f64) -> Vec<AggregateRow> {
        (1..=5)
            .map(|i| AggregateRow {
                iteration: i,
                env_steps: 256 * i,
                return_mean: offset + 10.0 * i as f64,
                return_std: 3.0,
                seeds: 2,
            })
            .collect()
    }

    #[test]
    fn two_series_are_labelled() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("plot.svg");
        let series = [
            PlotSeries {
                label: "hybrid-quantum-actor".into(),
                rows: rows(0.0),
            },
            PlotSeries {
                label: "classical-baseline".into(),
                rows: rows(20.0),
            },
        ];
        render_plot(EnvId::CartPoleV1, &series, &path).unwrap();
        let svg = std::fs::read_to_string(&path).unwrap();
        assert!(svg.contains("hybrid-quantum-actor") && svg.contains("classical-baseline"));
        assert!(svg.contains("CartPole-v1"));
    }

    #[test]
    fn nothing_to_draw_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            plot_runs(&[], dir.path()),
            Err(ExperimentError::EmptyRecordSet)
        ));
        let empty = [PlotSeries {
            label: "x".into(),
            rows: vec![],
        }];
        assert!(render_plot(EnvId::PendulumV1, &empty, &dir.path().join("p.svg")).is_err());
    }
}
