//! CSV and SVG artifacts. Floats are written with 17 significant digits so
//! that reading a file back reproduces every value exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{AggregateCurve, Axis, Comparison, RunResult};
use crate::embeddings::format_float;
use crate::{Error, Result};

pub const CURVE_HEADER: &str = "x,mean,ci_low,ci_high";
pub const RAW_HEADER: &str = "seed,episode,step,reward,cumulative";
pub const SWEEP_HEADER: &str = "arm,x,mean,ci_low,ci_high";
pub const AUC_HEADER: &str = "arm,mean_auc,ci_low,ci_high";

fn curve_rows(curve: &AggregateCurve, prefix: &str, out: &mut String) {
    for i in 0..curve.len() {
        let _ = writeln!(
            out,
            "{prefix}{},{},{},{}",
            curve.x[i],
            format_float(curve.mean[i]),
            format_float(curve.ci_low[i]),
            format_float(curve.ci_high[i])
        );
    }
}

pub fn curve_csv(curve: &AggregateCurve) -> String {
    let mut out = format!("{CURVE_HEADER}\n");
    curve_rows(curve, "", &mut out);
    out
}

/// Curves of several arms in one file, keyed by an `arm` column.
pub fn sweep_csv(curves: &[(String, AggregateCurve)]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for (label, curve) in curves {
        curve_rows(curve, &format!("{label},"), &mut out);
    }
    out
}

/// One row per environment step. `episode` and `step` are one-based and
/// `step` counts across the whole run; `cumulative` is the run-wide total.
pub fn raw_csv(result: &RunResult) -> String {
    let mut out = format!("{RAW_HEADER}\n");
    for run in &result.runs {
        let (mut step, mut total) = (0usize, 0.0);
        for (e, episode) in run.episodes.iter().enumerate() {
            for &r in &episode.rewards {
                step += 1;
                total += r;
                let _ = writeln!(out, "{},{},{step},{},{}", run.seed, e + 1, format_float(r), format_float(total));
            }
        }
    }
    out
}

fn parse_field<T: std::str::FromStr>(field: &str, line: usize) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("csv line {line}: bad value {field:?}")))
}

fn data_lines<'a>(text: &'a str, header: &str) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == header => {}
        other => return Err(Error::Parse(format!("csv header {other:?}, expected {header:?}"))),
    }
    Ok(lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 2, l.split(',').collect())))
}

pub fn read_curve_csv(text: &str) -> Result<AggregateCurve> {
    let mut curve = AggregateCurve::default();
    for (line, fields) in data_lines(text, CURVE_HEADER)? {
        let [x, mean, lo, hi] = fields[..] else {
            return Err(Error::Parse(format!("csv line {line}: expected 4 fields")));
        };
        curve.x.push(parse_field(x, line)?);
        curve.mean.push(parse_field(mean, line)?);
        curve.ci_low.push(parse_field(lo, line)?);
        curve.ci_high.push(parse_field(hi, line)?);
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawRow {
    pub seed: u64,
    pub episode: usize,
    pub step: usize,
    pub reward: f64,
    pub cumulative: f64,
}

pub fn read_raw_csv(text: &str) -> Result<Vec<RawRow>> {
    data_lines(text, RAW_HEADER)?
        .map(|(line, fields)| {
            let [seed, episode, step, reward, cumulative] = fields[..] else {
                return Err(Error::Parse(format!("csv line {line}: expected 5 fields")));
            };
            Ok(RawRow {
                seed: parse_field(seed, line)?,
                episode: parse_field(episode, line)?,
                step: parse_field(step, line)?,
                reward: parse_field(reward, line)?,
                cumulative: parse_field(cumulative, line)?,
            })
        })
        .collect()
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const MAX_PLOT_POINTS: usize = 1000;

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Indices kept when plotting `len` points: an even stride plus the last.
fn plot_indices(len: usize) -> Vec<usize> {
    let stride = len.div_ceil(MAX_PLOT_POINTS).max(1);
    let mut idx: Vec<usize> = (0..len).step_by(stride).collect();
    if len > 0 && idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx
}

/// Static SVG with one mean line and translucent confidence band per curve.
pub fn svg_plot(curves: &[(String, AggregateCurve)], title: &str, x_label: &str, y_label: &str) -> Result<String> {
    if curves.is_empty() {
        return Err(Error::InvalidConfig("a plot needs at least one curve".into()));
    }
    let (w, h) = (800.0, 500.0);
    let (left, right, top, bottom) = (80.0, 170.0, 40.0, 60.0);
    let points = curves.iter().flat_map(|(_, c)| c.x.iter().copied());
    let (x_min, x_max) = points.fold((usize::MAX, 0), |(lo, hi), x| (lo.min(x), hi.max(x)));
    let (x_min, mut x_max) = if x_min > x_max { (0.0, 1.0) } else { (x_min as f64, x_max as f64) };
    if x_max <= x_min {
        x_max = x_min + 1.0;
    }
    let ys = curves
        .iter()
        .flat_map(|(_, c)| c.ci_low.iter().chain(&c.ci_high).chain(&c.mean))
        .filter(|v| v.is_finite());
    let (mut y_min, mut y_max) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if y_min > y_max {
        (y_min, y_max) = (-1.0, 1.0);
    }
    if y_max - y_min < 1e-12 {
        (y_min, y_max) = (y_min - 1.0, y_max + 1.0);
    }
    let (pw, ph) = (w - left - right, h - top - bottom);
    let sx = |x: f64| left + (x - x_min) / (x_max - x_min) * pw;
    let sy = |y: f64| top + (y_max - y) / (y_max - y_min) * ph;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, left + pw / 2.0, xml_escape(title));
    let _ = writeln!(
        svg,
        r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##
    );
    for (x, label, anchor) in [(left, x_min, "start"), (left + pw, x_max, "end")] {
        let _ = writeln!(svg, r#"<text x="{x}" y="{}" text-anchor="{anchor}">{label}</text>"#, top + ph + 16.0);
    }
    for (y, label) in [(top + ph, y_min), (top + 10.0, y_max)] {
        let _ = writeln!(svg, r#"<text x="{}" y="{y}" text-anchor="end">{label:.3}</text>"#, left - 6.0);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, left + pw / 2.0, h - 16.0, xml_escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{y}" text-anchor="middle" transform="rotate(-90 20 {y})">{}</text>"#,
        xml_escape(y_label),
        y = top + ph / 2.0
    );
    if y_min < 0.0 && y_max > 0.0 {
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#bbb" stroke-dasharray="4 3"/>"##,
            left + pw,
            y = sy(0.0)
        );
    }
    for (k, (label, c)) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let idx = plot_indices(c.len());
        let fmt = |i: usize, y: f64| format!("{:.2},{:.2}", sx(c.x[i] as f64), sy(y));
        let upper = idx.iter().map(|&i| fmt(i, c.ci_high[i]));
        let lower = idx.iter().rev().map(|&i| fmt(i, c.ci_low[i]));
        let band: Vec<String> = upper.chain(lower).collect();
        let line: Vec<String> = idx.iter().map(|&i| fmt(i, c.mean[i])).collect();
        let _ = writeln!(svg, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.join(" "));
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.join(" "));
        let ly = top + 12.0 + 20.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="14" height="10" fill="{color}"/><text x="{}" y="{ly}">{}</text>"#,
            w - right + 16.0,
            ly - 9.0,
            w - right + 36.0,
            xml_escape(label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Files written by [`write_outputs`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFiles {
    pub paths: Vec<PathBuf>,
}

/// Writes per-arm curve and raw CSVs, combined curve CSVs, an AUC summary,
/// and one SVG per axis into `dir`.
pub fn write_outputs(comparison: &Comparison, dir: &Path, title: &str) -> Result<OutputFiles> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    let mut write = |name: String, content: String| -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, content)?;
        paths.push(path);
        Ok(())
    };
    for axis in [Axis::Steps, Axis::Episodes] {
        let curves = comparison.curves(axis)?;
        for (label, curve) in &curves {
            write(format!("{label}_{}.csv", axis.label()), curve_csv(curve))?;
        }
        write(format!("{}.csv", axis.label()), sweep_csv(&curves))?;
        let y_label = match axis {
            Axis::Steps => "cumulative reward",
            Axis::Episodes => "episode reward",
        };
        write(format!("{}.svg", axis.label()), svg_plot(&curves, title, axis.label(), y_label)?)?;
    }
    for arm in &comparison.arms {
        write(format!("{}_raw.csv", arm.label), raw_csv(&arm.result))?;
    }
    let mut auc = format!("{AUC_HEADER}\n");
    for s in comparison.auc_summaries()? {
        let _ = writeln!(
            auc,
            "{},{},{},{}",
            s.label,
            format_float(s.mean),
            format_float(s.mean - s.half_width),
            format_float(s.mean + s.half_width)
        );
    }
    write("auc.csv".into(), auc)?;
    Ok(OutputFiles { paths })
}
