//! Result tables and figures.
//!
//! The results table is comma-separated with a header and the fixed column
//! order `policy,seed,fold,round,active_queries,contradiction_queries,
//! mistakes_found,macro_f1,update_seconds`.
//!
//! Figures are standalone SVG files: `f1.svg` plots held-out macro-F1 per
//! round, `queries.svg` the cumulative labeling (dash-dot), contradiction
//! (solid) and mistake-uncovering (dashed) query counts. Shaded bands are
//! ±1 standard error across episodes.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use super::metrics::{aggregate, AggregateRow, EpisodeSummary, MetricsRow};
use super::ExperimentError;
use crate::skeptic::PolicyKind;

pub const METRICS_FILE: &str = "metrics.csv";
pub const F1_FIGURE: &str = "f1.svg";
pub const QUERIES_FIGURE: &str = "queries.svg";

pub fn write_metrics<W: Write>(out: W, rows: &[MetricsRow]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "policy",
            "seed",
            "fold",
            "round",
            "active_queries",
            "contradiction_queries",
            "mistakes_found",
            "macro_f1",
            "update_seconds",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics<R: Read>(input: R) -> Result<Vec<MetricsRow>, ExperimentError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(ExperimentError::from))
        .collect()
}

pub fn read_metrics_path(path: &Path) -> Result<Vec<MetricsRow>, ExperimentError> {
    let file = std::fs::File::open(path).map_err(|e| ExperimentError::io(path, e))?;
    read_metrics(std::io::BufReader::new(file))
}

pub fn write_summaries<W: Write>(out: W, summaries: &[EpisodeSummary]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    for s in summaries {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate<W: Write>(out: W, rows: &[AggregateRow]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportFiles {
    pub table: PathBuf,
    pub figures: Vec<PathBuf>,
}

/// Writes the results table and both figures into `dir`.
pub fn emit_report(rows: &[MetricsRow], dir: &Path, title: &str) -> Result<ReportFiles, ExperimentError> {
    if rows.is_empty() {
        return Err(ExperimentError::EmptyData);
    }
    std::fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    let table = dir.join(METRICS_FILE);
    let mut buf = Vec::new();
    write_metrics(&mut buf, rows)?;
    std::fs::write(&table, buf).map_err(|e| ExperimentError::io(&table, e))?;

    let agg = aggregate(rows);
    let f1 = dir.join(F1_FIGURE);
    std::fs::write(&f1, f1_figure(&agg, title)).map_err(|e| ExperimentError::io(&f1, e))?;
    let queries = dir.join(QUERIES_FIGURE);
    std::fs::write(&queries, queries_figure(&agg, title)).map_err(|e| ExperimentError::io(&queries, e))?;
    Ok(ReportFiles {
        table,
        figures: vec![f1, queries],
    })
}

fn policy_color(p: PolicyKind) -> &'static str {
    match p {
        PolicyKind::Isgp => "#d62728",
        PolicyKind::GpNever => "#2ca02c",
        PolicyKind::GpAlways => "#1f77b4",
    }
}

#[derive(Clone, Copy)]
enum Dash {
    Solid,
    Dashed,
    Mixed,
}

impl Dash {
    fn attr(self) -> &'static str {
        match self {
            Dash::Solid => "",
            Dash::Dashed => r#" stroke-dasharray="6 4""#,
            Dash::Mixed => r#" stroke-dasharray="8 3 2 3""#,
        }
    }
}

struct Series {
    label: String,
    color: &'static str,
    dash: Dash,
    /// (x, mean, standard error)
    points: Vec<(f64, f64, f64)>,
}

fn series_for(
    agg: &[AggregateRow],
    pick: impl Fn(&AggregateRow) -> (f64, f64),
    dash: Dash,
    suffix: &str,
) -> Vec<Series> {
    let mut policies: Vec<PolicyKind> = agg.iter().map(|a| a.policy).collect();
    policies.dedup();
    policies
        .into_iter()
        .map(|p| Series {
            label: format!("{p}{suffix}"),
            color: policy_color(p),
            dash,
            points: agg
                .iter()
                .filter(|a| a.policy == p)
                .map(|a| {
                    let (m, se) = pick(a);
                    (a.round as f64, m, se)
                })
                .collect(),
        })
        .collect()
}

fn f1_figure(agg: &[AggregateRow], title: &str) -> String {
    let series = series_for(agg, |a| (a.f1_mean, a.f1_se), Dash::Solid, "");
    render_chart(title, "round", "macro-F1 (held out)", &series, Some((0.0, 1.0)))
}

fn queries_figure(agg: &[AggregateRow], title: &str) -> String {
    let mut series = series_for(agg, |a| (a.active_mean, a.active_se), Dash::Mixed, " labeling");
    series.extend(series_for(
        agg,
        |a| (a.contradiction_mean, a.contradiction_se),
        Dash::Solid,
        " contradiction",
    ));
    series.extend(series_for(
        agg,
        |a| (a.mistakes_mean, a.mistakes_se),
        Dash::Dashed,
        " mistake found",
    ));
    render_chart(title, "round", "cumulative queries", &series, None)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn render_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], y_range: Option<(f64, f64)>) -> String {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x_min, mut x_max, mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for &(x, m, se) in all {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(m - se);
        y_max = y_max.max(m + se);
    }
    if let Some((lo, hi)) = y_range {
        y_min = lo;
        y_max = hi;
    }
    if !x_min.is_finite() {
        x_min = 0.0;
        x_max = 1.0;
    }
    if x_max <= x_min {
        x_max = x_min + 1.0;
    }
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN bounds too
    if !(y_max > y_min) {
        y_max = y_min + 1.0;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| TOP + (1.0 - (y.clamp(y_min, y_max) - y_min) / (y_max - y_min)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(title)
    );

    // axes and ticks
    let _ = writeln!(
        svg,
        r#"<path d="M{LEFT:.1},{TOP:.1} V{:.1} H{:.1}" fill="none" stroke="black"/>"#,
        TOP + plot_h,
        LEFT + plot_w
    );
    let ystep = nice_step(y_max - y_min);
    let mut y = (y_min / ystep).ceil() * ystep;
    while y <= y_max + 1e-9 {
        let py = sy(y);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT:.1}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            LEFT + plot_w,
            LEFT - 4.0,
            py + 4.0,
            fmt_tick(y, ystep)
        );
        y += ystep;
    }
    let xstep = nice_step(x_max - x_min).max(1.0);
    let mut x = (x_min / xstep).ceil() * xstep;
    while x <= x_max + 1e-9 {
        let px = sx(x);
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.1}" y1="{:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 4.0,
            TOP + plot_h + 16.0,
            fmt_tick(x, xstep)
        );
        x += xstep;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(14,{:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + plot_h / 2.0,
        escape(y_label)
    );

    for (i, s) in series.iter().enumerate() {
        if s.points.is_empty() {
            continue;
        }
        let mut band = String::new();
        for &(x, m, se) in &s.points {
            let _ = write!(band, "{:.2},{:.2} ", sx(x), sy(m + se));
        }
        for &(x, m, se) in s.points.iter().rev() {
            let _ = write!(band, "{:.2},{:.2} ", sx(x), sy(m - se));
        }
        let _ = writeln!(
            svg,
            r#"<polygon points="{}" fill="{}" fill-opacity="0.15" stroke="none"/>"#,
            band.trim_end(),
            s.color
        );
        let line: Vec<String> = s
            .points
            .iter()
            .map(|&(x, m, _)| format!("{:.2},{:.2}", sx(x), sy(m)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.6"{}/>"#,
            line.join(" "),
            s.color,
            s.dash.attr()
        );
        let ly = TOP + 10.0 + 16.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="1.6"{}/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 24.0,
            s.color,
            s.dash.attr(),
            lx + 30.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn fmt_tick(v: f64, step: f64) -> String {
    if step >= 1.0 {
        format!("{:.0}", v)
    } else {
        let digits = (-step.log10().floor()) as usize;
        format!("{:.*}", digits, v)
    }
}
