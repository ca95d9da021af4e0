//! Static SVG 1.1 plots.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::DiagnosticsRow;
use crate::model::Configuration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    EnergyVsT,
    MomentVsT,
    Worldlines,
    RescaledWorldlines,
    DensityHist,
}

impl PlotKind {
    pub const ALL: [PlotKind; 5] = [
        PlotKind::EnergyVsT,
        PlotKind::MomentVsT,
        PlotKind::Worldlines,
        PlotKind::RescaledWorldlines,
        PlotKind::DensityHist,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::EnergyVsT => "energy_vs_t",
            PlotKind::MomentVsT => "moment_vs_t",
            PlotKind::Worldlines => "worldlines",
            PlotKind::RescaledWorldlines => "rescaled_worldlines",
            PlotKind::DensityHist => "density_hist",
        }
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown plot kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub kind: PlotKind,
    /// Optional time window `(t0, t1)`.
    pub range: Option<(f64, f64)>,
    pub width: u32,
    pub height: u32,
}

impl PlotSpec {
    pub fn new(kind: PlotKind) -> Self {
        PlotSpec {
            kind,
            range: None,
            width: 800,
            height: 500,
        }
    }
}

/// Data a plot is drawn from.
#[derive(Debug, Clone, Copy)]
pub enum PlotData<'a> {
    Diagnostics(&'a [DiagnosticsRow]),
    Snapshots(&'a [(f64, Configuration)]),
    /// Output of [`crate::blowup::rescale_trajectory`] and the particle range it was built for.
    Rescaled {
        trajectory: &'a [(f64, Vec<f64>)],
        range: (usize, usize),
    },
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= target as f64)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    while t <= hi + 1e-9 * step {
        ticks.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    ticks
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if v != 0.0 && !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" {
            "0".into()
        } else {
            s.to_string()
        }
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.02 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let d = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - d, hi + d)
    }
}

struct Frame {
    w: f64,
    h: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (self.w - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        // points far outside the window are pulled in; the clip path hides them either way
        let span = self.y.1 - self.y.0;
        let y = y.clamp(self.y.0 - 10.0 * span, self.y.1 + 10.0 * span);
        self.h
            - MARGIN_BOTTOM
            - (y - self.y.0) / (self.y.1 - self.y.0) * (self.h - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn header(out: &mut String, w: u32, h: u32, title: &str) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        w / 2,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (x0, x1) = (MARGIN_LEFT, f.w - MARGIN_RIGHT);
    let (y0, y1) = (f.h - MARGIN_BOTTOM, MARGIN_TOP);
    let _ = writeln!(out, r#"<g stroke="black" stroke-width="1">"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/>"#);
    let xt = nice_ticks(f.x.0, f.x.1, 6);
    let yt = nice_ticks(f.y.0, f.y.1, 6);
    for &t in &xt {
        let x = f.px(t);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}"/>"#,
            y0 + 5.0
        );
    }
    for &t in &yt {
        let y = f.py(t);
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}"/>"#,
            x0 - 5.0
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r#"<g font-family="sans-serif" font-size="11">"#);
    for &t in &xt {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            f.px(t),
            y0 + 18.0,
            escape(&tick_label(t))
        );
    }
    for &t in &yt {
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 8.0,
            f.py(t) + 4.0,
            escape(&tick_label(t))
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        f.h - 10.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
    let _ = writeln!(out, "</g>");
}

fn in_window(t: f64, range: Option<(f64, f64)>) -> bool {
    range.is_none_or(|(a, b)| t >= a && t <= b)
}

fn line_plot(
    spec: &PlotSpec,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[Series],
    y_window: Option<(f64, f64)>,
) -> Result<String> {
    if series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::Input("nothing to plot".into()));
    }
    let finite = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut xl, mut xh, mut yl, mut yh) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in finite {
        xl = xl.min(x);
        xh = xh.max(x);
        yl = yl.min(y);
        yh = yh.max(y);
    }
    if !xl.is_finite() {
        return Err(Error::Input("no finite data to plot".into()));
    }
    let (yl, yh) = y_window.unwrap_or((yl, yh));
    let f = Frame {
        w: spec.width as f64,
        h: spec.height as f64,
        x: padded(xl, xh),
        y: padded(yl, yh),
    };
    let mut out = String::new();
    header(&mut out, spec.width, spec.height, title);
    axes(&mut out, &f, xlabel, ylabel);
    let _ = writeln!(
        out,
        r#"<defs><clipPath id="plot-area"><rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{:.2}" height="{:.2}"/></clipPath></defs>"#,
        f.w - MARGIN_LEFT - MARGIN_RIGHT,
        f.h - MARGIN_TOP - MARGIN_BOTTOM
    );
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y)))
            .collect();
        if pts.is_empty() {
            continue;
        }
        let color = PALETTE[i % PALETTE.len()];
        let width = if series.len() > 20 { 0.6 } else { 1.5 };
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="{width}" clip-path="url(#plot-area)" points="{}"><title>{}</title></polyline>"#,
            pts.join(" "),
            escape(&s.label)
        );
    }
    if series.len() <= 6 {
        for (i, s) in series.iter().enumerate() {
            let y = MARGIN_TOP + 15.0 + 15.0 * i as f64;
            let x = f.w - MARGIN_RIGHT - 120.0;
            let _ = writeln!(
                out,
                r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="11" fill="{}">{}</text>"#,
                PALETTE[i % PALETTE.len()],
                escape(&s.label)
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn histogram(spec: &PlotSpec, snapshots: &[(f64, Configuration)]) -> Result<String> {
    let (t, x) = snapshots
        .iter()
        .rev()
        .find(|(t, _)| in_window(*t, spec.range))
        .ok_or_else(|| Error::Input("nothing to plot".into()))?;
    let bins = (x.len() as f64).sqrt().ceil().max(5.0) as usize;
    let (lo, hi) = (x[0], x[x.len() - 1]);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in x.iter() {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    // density of a unit mass carried by equal particles
    let dens: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 / (x.len() as f64 * width))
        .collect();
    let top = dens.iter().fold(0.0_f64, |a, v| a.max(*v));
    let f = Frame {
        w: spec.width as f64,
        h: spec.height as f64,
        x: padded(lo, hi),
        y: (0.0, top * 1.05),
    };
    let mut out = String::new();
    header(
        &mut out,
        spec.width,
        spec.height,
        &format!("particle density at t = {}", tick_label(*t)),
    );
    axes(&mut out, &f, "x", "density");
    for (b, d) in dens.iter().enumerate() {
        let x0 = f.px(lo + b as f64 * width);
        let x1 = f.px(lo + (b + 1) as f64 * width);
        let y = f.py(*d);
        let _ = writeln!(
            out,
            r##"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#1f77b4" stroke="white" stroke-width="0.5"/>"##,
            (x1 - x0).max(0.0),
            (f.py(0.0) - y).max(0.0)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Renders a plot to an SVG string.
pub fn svg_string(data: PlotData, spec: &PlotSpec) -> Result<String> {
    if spec.width < 200 || spec.height < 150 {
        return Err(Error::Input(format!(
            "plot size {}x{} is too small (minimum 200x150)",
            spec.width, spec.height
        )));
    }
    match (spec.kind, data) {
        (PlotKind::EnergyVsT, PlotData::Diagnostics(rows)) => {
            let pts = rows
                .iter()
                .filter(|r| in_window(r.t, spec.range))
                .map(|r| (r.t, r.energy))
                .collect();
            line_plot(
                spec,
                "free energy",
                "t",
                "F",
                &[Series {
                    label: "F".into(),
                    points: pts,
                }],
                None,
            )
        }
        (PlotKind::MomentVsT, PlotData::Diagnostics(rows)) => {
            let rows: Vec<&DiagnosticsRow> = rows.iter().filter(|r| in_window(r.t, spec.range)).collect();
            let series = [
                Series {
                    label: "f2".into(),
                    points: rows.iter().map(|r| (r.t, r.f2)).collect(),
                },
                Series {
                    label: "f_{m+1}".into(),
                    points: rows.iter().map(|r| (r.t, r.fmp1)).collect(),
                },
            ];
            line_plot(spec, "moments", "t", "moment", &series, None)
        }
        (PlotKind::Worldlines, PlotData::Snapshots(snaps)) => {
            let snaps: Vec<&(f64, Configuration)> =
                snaps.iter().filter(|(t, _)| in_window(*t, spec.range)).collect();
            let n = snaps.first().map_or(0, |(_, c)| c.len());
            let series: Vec<Series> = (0..n)
                .map(|i| Series {
                    label: format!("x{}", i + 1),
                    points: snaps.iter().map(|(t, c)| (*t, c[i])).collect(),
                })
                .collect();
            if series.is_empty() {
                return Err(Error::Input("nothing to plot".into()));
            }
            line_plot(spec, "particle worldlines", "t", "x", &series, None)
        }
        (PlotKind::RescaledWorldlines, PlotData::Rescaled { trajectory, range }) => {
            let traj: Vec<&(f64, Vec<f64>)> = trajectory
                .iter()
                .filter(|(t, _)| in_window(*t, spec.range))
                .collect();
            let n = traj.first().map_or(0, |(_, c)| c.len());
            if n == 0 || range.1 >= n {
                return Err(Error::Input("nothing to plot".into()));
            }
            let series: Vec<Series> = (0..n)
                .map(|i| Series {
                    label: format!("x{}", i + 1),
                    points: traj.iter().map(|(t, c)| (*t, c[i])).collect(),
                })
                .collect();
            // frame the particles of the set; the others leave the window
            let inset = traj
                .iter()
                .flat_map(|(_, c)| c[range.0..=range.1].iter().copied());
            let (lo, hi) = inset.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                (a.min(v), b.max(v))
            });
            let pad = 0.5 * (hi - lo).max(1e-12);
            line_plot(
                spec,
                "rescaled worldlines",
                "t",
                "rescaled x",
                &series,
                Some((lo - pad, hi + pad)),
            )
        }
        (PlotKind::DensityHist, PlotData::Snapshots(snaps)) => histogram(spec, snaps),
        (kind, _) => Err(Error::Input(format!(
            "plot kind {} does not accept this data",
            kind.name()
        ))),
    }
}

pub fn render_svg(data: PlotData, spec: &PlotSpec, path: &Path) -> Result<()> {
    let text = svg_string(data, spec)?;
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_cover_range() {
        let t = nice_ticks(0.0, 9.3, 6);
        assert_eq!(t, vec![0.0, 2.0, 4.0, 6.0, 8.0]);
        assert!(nice_ticks(-1e-9, 1e-9, 5).len() >= 3);
    }

    #[test]
    fn kind_names_parse() {
        for k in PlotKind::ALL {
            assert_eq!(k.name().parse::<PlotKind>().unwrap(), k);
        }
        assert!("pie".parse::<PlotKind>().is_err());
    }
}
