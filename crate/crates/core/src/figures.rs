//! Deterministic SVG figures with CSV and JSON sidecars.
//!
//! Every data mark carries a `class` and a `data-key` attribute, so the
//! structure of a figure can be checked without rendering it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmark::BenchmarkResult;
use crate::data::{CorrelationMatrix, HistogramData};
use crate::explain::{BreakdownReport, CPProfile, ImportanceReport};
use crate::stats::{quantile_sorted, sample_sd};

#[derive(Debug, Error)]
pub enum FigureError {
    #[error("nothing to draw: {0}")]
    Empty(String),
    #[error("figure dimensions must be positive, got {width}x{height}")]
    Dimensions { width: u32, height: u32 },
    #[error("sidecar json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("sidecar csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, FigureError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    HistogramGrid,
    CorrelationHeatmap,
    BenchmarkBox,
    ImportanceBar,
    BreakdownWaterfall,
    BreakdownViolin,
    CpProfile,
}

impl FigureKind {
    pub const ALL: [FigureKind; 7] = [
        FigureKind::HistogramGrid,
        FigureKind::CorrelationHeatmap,
        FigureKind::BenchmarkBox,
        FigureKind::ImportanceBar,
        FigureKind::BreakdownWaterfall,
        FigureKind::BreakdownViolin,
        FigureKind::CpProfile,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FigureKind::HistogramGrid => "histogram_grid",
            FigureKind::CorrelationHeatmap => "correlation_heatmap",
            FigureKind::BenchmarkBox => "benchmark_box",
            FigureKind::ImportanceBar => "importance_bar",
            FigureKind::BreakdownWaterfall => "breakdown_waterfall",
            FigureKind::BreakdownViolin => "breakdown_violin",
            FigureKind::CpProfile => "cp_profile",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum FigurePayload {
    HistogramGrid(Vec<HistogramData>),
    CorrelationHeatmap(CorrelationMatrix),
    BenchmarkBox(BenchmarkResult),
    ImportanceBar(ImportanceReport),
    BreakdownWaterfall(BreakdownReport),
    BreakdownViolin(BreakdownReport),
    CpProfile(Vec<CPProfile>),
}

impl FigurePayload {
    pub fn kind(&self) -> FigureKind {
        match self {
            FigurePayload::HistogramGrid(_) => FigureKind::HistogramGrid,
            FigurePayload::CorrelationHeatmap(_) => FigureKind::CorrelationHeatmap,
            FigurePayload::BenchmarkBox(_) => FigureKind::BenchmarkBox,
            FigurePayload::ImportanceBar(_) => FigureKind::ImportanceBar,
            FigurePayload::BreakdownWaterfall(_) => FigureKind::BreakdownWaterfall,
            FigurePayload::BreakdownViolin(_) => FigureKind::BreakdownViolin,
            FigurePayload::CpProfile(_) => FigureKind::CpProfile,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureSpec {
    pub title: String,
    /// File-name suffix: `<kind>_<slug>.svg`.
    pub slug: String,
    pub width: u32,
    pub height: u32,
    #[serde(flatten)]
    pub payload: FigurePayload,
}

impl FigureSpec {
    pub fn new(title: impl Into<String>, slug: impl Into<String>, payload: FigurePayload) -> Self {
        FigureSpec {
            title: title.into(),
            slug: slug.into(),
            width: 900,
            height: 600,
            payload,
        }
    }

    pub fn with_size(mut self, width: u32, height: u32) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn kind(&self) -> FigureKind {
        self.payload.kind()
    }

    pub fn file_stem(&self) -> String {
        format!("{}_{}", self.kind().as_str(), self.slug)
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(FigureError::Dimensions {
                width: self.width,
                height: self.height,
            });
        }
        let empty = |what: &str| Err(FigureError::Empty(what.to_string()));
        match &self.payload {
            FigurePayload::HistogramGrid(h) => {
                if h.is_empty() {
                    return empty("no histograms");
                }
                if let Some(bad) = h.iter().find(|h| h.counts.is_empty()) {
                    return empty(&format!("histogram {} has no bins", bad.column));
                }
            }
            FigurePayload::CorrelationHeatmap(c) if c.labels.is_empty() => {
                return empty("no correlation labels")
            }
            FigurePayload::BenchmarkBox(b) => {
                if b.algorithms.is_empty() {
                    return empty("no algorithms");
                }
                if let Some(bad) = b.algorithms.iter().find(|a| a.values.is_empty()) {
                    return empty(&format!("{} has no resample values", bad.algorithm));
                }
            }
            FigurePayload::ImportanceBar(r) if r.features.is_empty() => {
                return empty("no features")
            }
            FigurePayload::BreakdownWaterfall(r) | FigurePayload::BreakdownViolin(r)
                if r.steps.is_empty() =>
            {
                return empty("no breakdown steps")
            }
            FigurePayload::CpProfile(p) => {
                if p.is_empty() {
                    return empty("no profiles");
                }
                if let Some(bad) = p.iter().find(|p| p.grid.is_empty()) {
                    return empty(&format!("profile {} has an empty grid", bad.instance_id));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

const FONT: &str = "DejaVu Sans, Helvetica, Arial, sans-serif";
const INK: &str = "#222222";
const GRID: &str = "#dddddd";
const BAR: &str = "#4477aa";
const POSITIVE: &str = "#2e8b57";
const NEGATIVE: &str = "#c0392b";
const FINAL: &str = "#34495e";
const VIOLIN: &str = "#9ecae1";
const PALETTE: [&str; 8] = [
    "#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377", "#bbbbbb", "#000000",
];

fn px(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// Short human label with at most `decimals` decimals.
fn label(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

#[derive(Clone, Copy)]
struct Scale {
    d0: f64,
    d1: f64,
    r0: f64,
    r1: f64,
}

impl Scale {
    fn new(d0: f64, d1: f64, r0: f64, r1: f64) -> Self {
        let (d0, d1) = if d1 > d0 {
            (d0, d1)
        } else {
            let pad = 0.5 * d0.abs().max(1.0);
            (d0 - pad, d0 + pad)
        };
        Scale { d0, d1, r0, r1 }
    }

    /// Domain covering `values`, padded by `pad` of its span.
    fn fit(values: impl IntoIterator<Item = f64>, pad: f64, r0: f64, r1: f64) -> Self {
        let (lo, hi) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        let span = hi - lo;
        Scale::new(lo - pad * span, hi + pad * span, r0, r1)
    }

    fn map(&self, v: f64) -> f64 {
        self.r0 + (v - self.d0) / (self.d1 - self.d0) * (self.r1 - self.r0)
    }

    /// Round-valued ticks inside the domain and the decimals to print them with.
    fn ticks(&self, target: usize) -> (Vec<f64>, usize) {
        let raw = (self.d1 - self.d0) / target.max(1) as f64;
        let mag = 10f64.powf(raw.log10().floor());
        let norm = raw / mag;
        let step = mag
            * if norm < 1.5 {
                1.0
            } else if norm < 3.0 {
                2.0
            } else if norm < 7.0 {
                5.0
            } else {
                10.0
            };
        let first = (self.d0 / step).ceil() as i64;
        let last = (self.d1 / step).floor() as i64;
        let decimals = (-step.log10().floor()).max(0.0) as usize;
        ((first..=last).map(|k| k as f64 * step).collect(), decimals)
    }
}

struct Svg {
    out: String,
}

type Attrs<'a> = &'a [(&'a str, String)];

impl Svg {
    fn new(spec: &FigureSpec) -> Self {
        let (w, h) = (spec.width, spec.height);
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" \
             viewBox=\"0 0 {w} {h}\" font-family=\"{FONT}\" data-kind=\"{}\">",
            spec.kind().as_str()
        );
        let _ = writeln!(out, "<title>{}</title>", escape(&spec.title));
        let _ = writeln!(
            out,
            "<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"#ffffff\"/>"
        );
        let mut svg = Svg { out };
        svg.text(
            f64::from(w) / 2.0,
            24.0,
            &spec.title,
            &[
                ("class", "title".into()),
                ("text-anchor", "middle".into()),
                ("font-size", "16".into()),
            ],
        );
        svg
    }

    fn element(&mut self, name: &str, geometry: Attrs<'_>, attrs: Attrs<'_>) {
        self.out.push('<');
        self.out.push_str(name);
        for (k, v) in geometry.iter().chain(attrs) {
            let _ = write!(self.out, " {k}=\"{}\"", escape(v));
        }
        self.out.push_str("/>\n");
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, attrs: Attrs<'_>) {
        let (x, w) = if w < 0.0 { (x + w, -w) } else { (x, w) };
        let (y, h) = if h < 0.0 { (y + h, -h) } else { (y, h) };
        self.element(
            "rect",
            &[
                ("x", px(x)),
                ("y", px(y)),
                ("width", px(w)),
                ("height", px(h)),
            ],
            attrs,
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, attrs: Attrs<'_>) {
        self.element(
            "line",
            &[
                ("x1", px(x1)),
                ("y1", px(y1)),
                ("x2", px(x2)),
                ("y2", px(y2)),
            ],
            attrs,
        );
    }

    fn circle(&mut self, cx: f64, cy: f64, r: f64, attrs: Attrs<'_>) {
        self.element(
            "circle",
            &[("cx", px(cx)), ("cy", px(cy)), ("r", px(r))],
            attrs,
        );
    }

    fn path(&mut self, points: &[(f64, f64)], closed: bool, attrs: Attrs<'_>) {
        let mut d = String::new();
        for (i, (x, y)) in points.iter().enumerate() {
            let _ = write!(
                d,
                "{}{},{}",
                if i == 0 { "M" } else { " L" },
                px(*x),
                px(*y)
            );
        }
        if closed {
            d.push_str(" Z");
        }
        self.element("path", &[("d", d)], attrs);
    }

    fn text(&mut self, x: f64, y: f64, content: &str, attrs: Attrs<'_>) {
        let _ = write!(self.out, "<text x=\"{}\" y=\"{}\"", px(x), px(y));
        if !attrs.iter().any(|(k, _)| *k == "fill") {
            let _ = write!(self.out, " fill=\"{INK}\"");
        }
        for (k, v) in attrs {
            let _ = write!(self.out, " {k}=\"{}\"", escape(v));
        }
        let _ = writeln!(self.out, ">{}</text>", escape(content));
    }

    fn open(&mut self, attrs: Attrs<'_>) {
        self.out.push_str("<g");
        for (k, v) in attrs {
            let _ = write!(self.out, " {k}=\"{}\"", escape(v));
        }
        self.out.push_str(">\n");
    }

    fn close(&mut self) {
        self.out.push_str("</g>\n");
    }

    fn x_axis(&mut self, scale: &Scale, y: f64, target: usize) {
        let (ticks, decimals) = scale.ticks(target);
        self.line(
            scale.r0,
            y,
            scale.r1,
            y,
            &[("stroke", INK.into()), ("class", "axis".into())],
        );
        for t in ticks {
            let x = scale.map(t);
            self.line(x, y, x, y + 4.0, &[("stroke", INK.into())]);
            self.text(
                x,
                y + 15.0,
                &label(t, decimals),
                &[("text-anchor", "middle".into()), ("font-size", "10".into())],
            );
        }
    }

    fn y_axis(&mut self, scale: &Scale, x: f64, target: usize, grid_to: Option<f64>) {
        let (ticks, decimals) = scale.ticks(target);
        self.line(
            x,
            scale.r0,
            x,
            scale.r1,
            &[("stroke", INK.into()), ("class", "axis".into())],
        );
        for t in ticks {
            let y = scale.map(t);
            if let Some(x2) = grid_to {
                self.line(x, y, x2, y, &[("stroke", GRID.into())]);
            }
            self.line(x - 4.0, y, x, y, &[("stroke", INK.into())]);
            self.text(
                x - 6.0,
                y + 3.5,
                &label(t, decimals),
                &[("text-anchor", "end".into()), ("font-size", "10".into())],
            );
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

struct Frame {
    left: f64,
    top: f64,
    right: f64,
    bottom: f64,
}

fn frame(spec: &FigureSpec, left: f64, top: f64, right: f64, bottom: f64) -> Frame {
    let (w, h) = (f64::from(spec.width), f64::from(spec.height));
    Frame {
        left,
        top,
        right: (w - right).max(left + 1.0),
        bottom: (h - bottom).max(top + 1.0),
    }
}

fn histogram_grid(svg: &mut Svg, spec: &FigureSpec, hists: &[HistogramData]) {
    let n = hists.len();
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let f = frame(spec, 10.0, 40.0, 10.0, 10.0);
    let pw = (f.right - f.left) / cols as f64;
    let ph = (f.bottom - f.top) / rows as f64;
    for (i, h) in hists.iter().enumerate() {
        let (px0, py0) = (
            f.left + (i % cols) as f64 * pw,
            f.top + (i / cols) as f64 * ph,
        );
        let (l, r, t, b) = (px0 + 42.0, px0 + pw - 8.0, py0 + 20.0, py0 + ph - 24.0);
        let edges = &h.edges;
        let xs = Scale::new(edges[0], edges[edges.len() - 1], l, r.max(l + 1.0));
        let max = h.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
        let ys = Scale::new(0.0, max, b.max(t + 1.0), t);
        svg.open(&[("class", "panel".into()), ("data-key", h.column.clone())]);
        svg.text(
            (l + r) / 2.0,
            py0 + 14.0,
            &h.column,
            &[("text-anchor", "middle".into()), ("font-size", "12".into())],
        );
        svg.y_axis(&ys, l, 3, None);
        for (k, &count) in h.counts.iter().enumerate() {
            let x0 = xs.map(edges[k]);
            let x1 = xs.map(edges[k + 1]);
            svg.rect(
                x0,
                ys.map(count as f64),
                x1 - x0,
                ys.map(0.0) - ys.map(count as f64),
                &[
                    ("class", "bin".into()),
                    ("data-key", h.column.clone()),
                    ("data-index", k.to_string()),
                    ("data-count", count.to_string()),
                    ("fill", BAR.into()),
                    ("stroke", "#ffffff".into()),
                    ("stroke-width", "0.5".into()),
                ],
            );
        }
        svg.x_axis(&xs, ys.map(0.0), 3);
        svg.close();
    }
}

fn diverging(v: f64) -> String {
    let t = v.clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (178.0, 24.0, 43.0)
    } else {
        (33.0, 102.0, 172.0)
    };
    let a = t.abs();
    let mix = |c: f64| (255.0 + (c - 255.0) * a).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(r), mix(g), mix(b))
}

fn correlation_heatmap(svg: &mut Svg, spec: &FigureSpec, c: &CorrelationMatrix) {
    let n = c.labels.len();
    let f = frame(spec, 120.0, 44.0, 90.0, 110.0);
    let side = (f.right - f.left).min(f.bottom - f.top);
    let cell = side / n as f64;
    let constant = |a: &str, b: &str| {
        c.constant_pairs
            .iter()
            .any(|(x, y)| (x == a && y == b) || (x == b && y == a))
    };
    for (i, row) in c.labels.iter().enumerate() {
        let y = f.top + i as f64 * cell;
        svg.text(
            f.left - 6.0,
            y + cell / 2.0 + 4.0,
            row,
            &[("text-anchor", "end".into()), ("font-size", "11".into())],
        );
        for (j, col) in c.labels.iter().enumerate() {
            let x = f.left + j as f64 * cell;
            let v = c.values[i][j];
            let flagged = constant(row, col);
            let mut attrs = vec![
                ("class", "cell".to_string()),
                ("data-key", format!("{row}|{col}")),
                ("data-row", row.clone()),
                ("data-col", col.clone()),
                ("data-value", v.to_string()),
                ("fill", diverging(v)),
                ("stroke", "#ffffff".into()),
            ];
            if flagged {
                attrs.push(("data-constant", "true".into()));
                attrs[6] = ("stroke", INK.into());
                attrs.push(("stroke-dasharray", "3,2".into()));
            }
            svg.rect(x, y, cell, cell, &attrs);
            if cell >= 24.0 {
                let ink = if v.abs() > 0.6 { "#ffffff" } else { INK };
                svg.text(
                    x + cell / 2.0,
                    y + cell / 2.0 + 4.0,
                    &label(v, 2),
                    &[
                        ("text-anchor", "middle".into()),
                        ("font-size", "10".into()),
                        ("fill", ink.into()),
                    ],
                );
            }
        }
    }
    for (j, col) in c.labels.iter().enumerate() {
        let x = f.left + (j as f64 + 0.5) * cell;
        let y = f.top + side + 10.0;
        svg.text(
            x,
            y,
            col,
            &[
                ("text-anchor", "end".into()),
                ("font-size", "11".into()),
                ("transform", format!("rotate(-45 {} {})", px(x), px(y))),
            ],
        );
    }
    let lx = f.left + side + 20.0;
    let steps = 20;
    let h = side / steps as f64;
    for s in 0..steps {
        let v = 1.0 - 2.0 * (s as f64 + 0.5) / steps as f64;
        svg.rect(
            lx,
            f.top + s as f64 * h,
            14.0,
            h,
            &[("class", "legend".into()), ("fill", diverging(v))],
        );
    }
    for (v, y) in [
        (1.0, f.top),
        (0.0, f.top + side / 2.0),
        (-1.0, f.top + side),
    ] {
        svg.text(
            lx + 18.0,
            y + 4.0,
            &label(v, 0),
            &[("font-size", "10".into())],
        );
    }
}

struct BoxStats {
    q1: f64,
    median: f64,
    q3: f64,
    low: f64,
    high: f64,
}

fn box_stats(values: &[f64]) -> BoxStats {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let fence = 1.5 * (q3 - q1);
    let inside = sorted
        .iter()
        .copied()
        .filter(|&v| v >= q1 - fence && v <= q3 + fence);
    let (low, high) = inside.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
        (l.min(v), h.max(v))
    });
    BoxStats {
        q1,
        median: quantile_sorted(&sorted, 0.5),
        q3,
        low,
        high,
    }
}

fn benchmark_box(svg: &mut Svg, spec: &FigureSpec, b: &BenchmarkResult) {
    let f = frame(spec, 70.0, 50.0, 30.0, 50.0);
    let all = b
        .algorithms
        .iter()
        .flat_map(|a| a.values.iter().map(|v| v.value))
        .chain(b.no_information_rate);
    let ys = Scale::fit(all, 0.08, f.bottom, f.top);
    svg.y_axis(&ys, f.left, 6, Some(f.right));
    svg.text(
        18.0,
        (f.top + f.bottom) / 2.0,
        &b.metric,
        &[
            ("text-anchor", "middle".into()),
            ("font-size", "12".into()),
            (
                "transform",
                format!("rotate(-90 18 {})", px((f.top + f.bottom) / 2.0)),
            ),
        ],
    );
    let slot = (f.right - f.left) / b.algorithms.len() as f64;
    for (i, a) in b.algorithms.iter().enumerate() {
        let cx = f.left + (i as f64 + 0.5) * slot;
        let half = (slot * 0.3).min(40.0);
        let s = box_stats(&a.raw_values());
        svg.open(&[("class", "box".into()), ("data-key", a.algorithm.clone())]);
        svg.line(
            cx,
            ys.map(s.low),
            cx,
            ys.map(s.q1),
            &[("class", "whisker".into()), ("stroke", INK.into())],
        );
        svg.line(
            cx,
            ys.map(s.q3),
            cx,
            ys.map(s.high),
            &[("class", "whisker".into()), ("stroke", INK.into())],
        );
        for w in [s.low, s.high] {
            svg.line(
                cx - half / 2.0,
                ys.map(w),
                cx + half / 2.0,
                ys.map(w),
                &[("stroke", INK.into())],
            );
        }
        svg.rect(
            cx - half,
            ys.map(s.q3),
            2.0 * half,
            ys.map(s.q1) - ys.map(s.q3),
            &[
                ("class", "iqr".into()),
                ("data-key", a.algorithm.clone()),
                ("fill", VIOLIN.into()),
                ("stroke", INK.into()),
            ],
        );
        svg.line(
            cx - half,
            ys.map(s.median),
            cx + half,
            ys.map(s.median),
            &[
                ("class", "median".into()),
                ("stroke", INK.into()),
                ("stroke-width", "2".into()),
            ],
        );
        for v in &a.values {
            if v.value < s.low || v.value > s.high {
                svg.circle(
                    cx,
                    ys.map(v.value),
                    2.5,
                    &[
                        ("class", "outlier".into()),
                        ("data-key", format!("{}:{}", v.repeat, v.fold)),
                        ("fill", "none".into()),
                        ("stroke", INK.into()),
                    ],
                );
            }
        }
        svg.circle(
            cx,
            ys.map(a.mean),
            3.0,
            &[
                ("class", "mean".into()),
                ("data-key", a.algorithm.clone()),
                ("fill", NEGATIVE.into()),
            ],
        );
        svg.close();
        svg.text(
            cx,
            f.bottom + 18.0,
            &a.algorithm,
            &[("text-anchor", "middle".into()), ("font-size", "12".into())],
        );
    }
    if let Some(nir) = b.no_information_rate {
        let y = ys.map(nir);
        svg.line(
            f.left,
            y,
            f.right,
            y,
            &[
                ("class", "reference".into()),
                ("data-key", "no_information_rate".into()),
                ("stroke", NEGATIVE.into()),
                ("stroke-dasharray", "6,4".into()),
            ],
        );
        svg.text(
            f.right,
            y - 4.0,
            &format!("NIR {}", label(nir, 3)),
            &[("text-anchor", "end".into()), ("font-size", "10".into())],
        );
    }
}

fn importance_bar(svg: &mut Svg, spec: &FigureSpec, r: &ImportanceReport) {
    let f = frame(spec, 130.0, 56.0, 70.0, 40.0);
    svg.text(
        f64::from(spec.width) / 2.0,
        42.0,
        &format!(
            "baseline {} = {}",
            r.loss.as_str(),
            label(r.baseline_loss, 4)
        ),
        &[("text-anchor", "middle".into()), ("font-size", "11".into())],
    );
    let xs = Scale::fit(
        r.features.iter().map(|f| f.importance).chain([0.0]),
        0.05,
        f.left,
        f.right,
    );
    let row = (f.bottom - f.top) / r.features.len() as f64;
    for (i, fi) in r.features.iter().enumerate() {
        let y = f.top + i as f64 * row;
        let x0 = xs.map(0.0);
        let x1 = xs.map(fi.importance);
        svg.rect(
            x0,
            y + row * 0.15,
            x1 - x0,
            row * 0.7,
            &[
                ("class", "bar".into()),
                ("data-key", fi.feature.clone()),
                ("data-index", i.to_string()),
                ("data-value", fi.importance.to_string()),
                ("fill", BAR.into()),
            ],
        );
        svg.text(
            f.left - 6.0,
            y + row / 2.0 + 4.0,
            &fi.feature,
            &[("text-anchor", "end".into()), ("font-size", "11".into())],
        );
        svg.text(
            x0.max(x1) + 4.0,
            y + row / 2.0 + 4.0,
            &label(fi.importance, 4),
            &[("font-size", "10".into())],
        );
    }
    svg.line(
        xs.map(0.0),
        f.top,
        xs.map(0.0),
        f.bottom,
        &[("stroke", INK.into())],
    );
    svg.x_axis(&xs, f.bottom, 5);
}

fn breakdown_waterfall(svg: &mut Svg, spec: &FigureSpec, r: &BreakdownReport) {
    let f = frame(spec, 170.0, 50.0, 70.0, 40.0);
    let values = r
        .steps
        .iter()
        .map(|s| s.cumulative)
        .chain([r.intercept, r.final_prediction]);
    let xs = Scale::fit(values, 0.1, f.left, f.right);
    let rows = r.steps.len() + 2;
    let row = (f.bottom - f.top) / rows as f64;
    let bar_h = row * 0.6;
    let y_of = |k: usize| f.top + k as f64 * row + (row - bar_h) / 2.0;
    let x_int = xs.map(r.intercept);
    svg.line(
        x_int,
        f.top,
        x_int,
        f.bottom,
        &[
            ("class", "baseline".into()),
            ("stroke", GRID.into()),
            ("stroke-dasharray", "4,3".into()),
        ],
    );
    let row_label = |svg: &mut Svg, k: usize, text: &str| {
        svg.text(
            f.left - 6.0,
            y_of(k) + bar_h / 2.0 + 4.0,
            text,
            &[("text-anchor", "end".into()), ("font-size", "11".into())],
        );
    };
    row_label(svg, 0, "intercept");
    svg.rect(
        x_int - 1.0,
        y_of(0),
        2.0,
        bar_h,
        &[
            ("class", "bar".into()),
            ("data-role", "intercept".into()),
            ("data-key", "intercept".into()),
            ("data-value", r.intercept.to_string()),
            ("fill", FINAL.into()),
        ],
    );
    svg.text(
        x_int + 4.0,
        y_of(0) + bar_h / 2.0 + 4.0,
        &label(r.intercept, 3),
        &[("font-size", "10".into())],
    );
    let mut previous = r.intercept;
    for (i, s) in r.steps.iter().enumerate() {
        let k = i + 1;
        let (x0, x1) = (xs.map(previous), xs.map(s.cumulative));
        svg.line(
            x0,
            y_of(k - 1) + bar_h,
            x0,
            y_of(k),
            &[("class", "connector".into()), ("stroke", "#888888".into())],
        );
        row_label(svg, k, &format!("{} = {}", s.feature, label(s.value, 4)));
        // keep zero contributions visible
        let (x0, w) = if (x1 - x0).abs() < 1.0 {
            (x0 - 0.5, 1.0)
        } else {
            (x0, x1 - x0)
        };
        svg.rect(
            x0,
            y_of(k),
            w,
            bar_h,
            &[
                ("class", "bar".into()),
                ("data-role", "contribution".into()),
                ("data-key", s.feature.clone()),
                ("data-value", s.contribution.to_string()),
                (
                    "fill",
                    if s.contribution >= 0.0 {
                        POSITIVE
                    } else {
                        NEGATIVE
                    }
                    .into(),
                ),
            ],
        );
        let sign = if s.contribution >= 0.0 { "+" } else { "" };
        svg.text(
            x0.max(x0 + w) + 4.0,
            y_of(k) + bar_h / 2.0 + 4.0,
            &format!("{sign}{}", label(s.contribution, 3)),
            &[("font-size", "10".into())],
        );
        previous = s.cumulative;
    }
    let k = rows - 1;
    row_label(svg, k, "prediction");
    let x_final = xs.map(r.final_prediction);
    svg.rect(
        x_int,
        y_of(k),
        x_final - x_int,
        bar_h,
        &[
            ("class", "final-marker".into()),
            ("data-key", "prediction".into()),
            ("data-value", r.final_prediction.to_string()),
            ("fill", FINAL.into()),
            ("fill-opacity", "0.8".into()),
        ],
    );
    svg.line(
        x_final,
        y_of(k),
        x_final,
        y_of(k) + bar_h,
        &[("stroke", INK.into()), ("stroke-width", "2".into())],
    );
    svg.text(
        x_int.max(x_final) + 4.0,
        y_of(k) + bar_h / 2.0 + 4.0,
        &label(r.final_prediction, 3),
        &[("font-size", "10".into())],
    );
    svg.x_axis(&xs, f.bottom, 6);
}

/// Gaussian kernel bandwidth by Silverman's rule of thumb; 0 for samples
/// without spread.
pub fn silverman_bandwidth(sample: &[f64]) -> f64 {
    let n = sample.len();
    if n < 2 {
        return 0.0;
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sd = sample_sd(sample);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * (n as f64).powf(-0.2)
}

const DENSITY_POINTS: usize = 64;

/// Kernel density on an even grid spanning the sample ±3 bandwidths.
fn density_curve(sample: &[f64], bw: f64) -> Vec<(f64, f64)> {
    let lo = sample.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * bw;
    let hi = sample.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * bw;
    let norm = 1.0 / (sample.len() as f64 * bw * (2.0 * std::f64::consts::PI).sqrt());
    (0..DENSITY_POINTS)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (DENSITY_POINTS - 1) as f64;
            let d: f64 = sample
                .iter()
                .map(|v| {
                    let z = (x - v) / bw;
                    (-0.5 * z * z).exp()
                })
                .sum();
            (x, d * norm)
        })
        .collect()
}

fn violin(svg: &mut Svg, xs: &Scale, cy: f64, half: f64, sample: &[f64], attrs: Attrs<'_>) {
    let bw = silverman_bandwidth(sample);
    if sample.is_empty() || bw <= 0.0 {
        let x = sample.first().map_or(xs.r0, |&v| xs.map(v));
        svg.path(
            &[(x - 1.5, cy), (x, cy - half), (x + 1.5, cy), (x, cy + half)],
            true,
            attrs,
        );
        return;
    }
    let curve = density_curve(sample, bw);
    let peak = curve.iter().map(|p| p.1).fold(0.0, f64::max);
    let mut points: Vec<(f64, f64)> = curve
        .iter()
        .map(|&(x, d)| (xs.map(x), cy - half * d / peak))
        .collect();
    points.extend(
        curve
            .iter()
            .rev()
            .map(|&(x, d)| (xs.map(x), cy + half * d / peak)),
    );
    svg.path(&points, true, attrs);
}

fn breakdown_violin(svg: &mut Svg, spec: &FigureSpec, r: &BreakdownReport) {
    let f = frame(spec, 170.0, 50.0, 30.0, 40.0);
    let values = r
        .baseline_distribution
        .iter()
        .copied()
        .chain(r.steps.iter().flat_map(|s| s.distribution.iter().copied()))
        .chain(r.steps.iter().map(|s| s.cumulative))
        .chain([r.intercept]);
    let span = Scale::fit(values, 0.0, 0.0, 1.0);
    let pad = 0.25 * (span.d1 - span.d0);
    let xs = Scale::new(span.d0 - pad, span.d1 + pad, f.left, f.right);
    let rows = r.steps.len() + 1;
    let row = (f.bottom - f.top) / rows as f64;
    let half = row * 0.42;
    let mid = |k: usize| f.top + (k as f64 + 0.5) * row;
    let mut means = vec![(xs.map(r.intercept), mid(0))];
    svg.text(
        f.left - 6.0,
        mid(0) + 4.0,
        "all data",
        &[("text-anchor", "end".into()), ("font-size", "11".into())],
    );
    violin(
        svg,
        &xs,
        mid(0),
        half,
        &r.baseline_distribution,
        &[
            ("class", "violin-baseline".into()),
            ("data-key", "all data".into()),
            ("fill", GRID.into()),
            ("stroke", "#888888".into()),
        ],
    );
    for (i, s) in r.steps.iter().enumerate() {
        let k = i + 1;
        svg.text(
            f.left - 6.0,
            mid(k) + 4.0,
            &format!("+ {} = {}", s.feature, label(s.value, 4)),
            &[("text-anchor", "end".into()), ("font-size", "11".into())],
        );
        violin(
            svg,
            &xs,
            mid(k),
            half,
            &s.distribution,
            &[
                ("class", "violin".into()),
                ("data-key", s.feature.clone()),
                ("data-index", i.to_string()),
                ("fill", VIOLIN.into()),
                ("stroke", BAR.into()),
            ],
        );
        means.push((xs.map(s.cumulative), mid(k)));
    }
    svg.path(
        &means,
        false,
        &[
            ("class", "mean-path".into()),
            ("fill", "none".into()),
            ("stroke", NEGATIVE.into()),
        ],
    );
    for (k, &(x, y)) in means.iter().enumerate() {
        let key = if k == 0 {
            "all data".to_string()
        } else {
            r.steps[k - 1].feature.clone()
        };
        svg.circle(
            x,
            y,
            3.0,
            &[
                ("class", "mean".into()),
                ("data-key", key),
                ("fill", NEGATIVE.into()),
            ],
        );
    }
    svg.x_axis(&xs, f.bottom, 6);
}

fn first_seen<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for s in items {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

fn cp_profile(svg: &mut Svg, spec: &FigureSpec, profiles: &[CPProfile]) {
    let features = first_seen(profiles.iter().map(|p| p.feature.as_str()));
    let series = first_seen(profiles.iter().map(|p| p.instance_id.as_str()));
    let f = frame(spec, 10.0, 64.0, 10.0, 10.0);
    for (i, s) in series.iter().enumerate() {
        let x = 20.0 + i as f64 * 130.0;
        svg.rect(
            x,
            38.0,
            10.0,
            10.0,
            &[
                ("class", "legend".into()),
                ("data-key", s.to_string()),
                ("fill", PALETTE[i % PALETTE.len()].into()),
            ],
        );
        svg.text(x + 14.0, 47.0, s, &[("font-size", "10".into())]);
    }
    let ys_values = profiles.iter().flat_map(|p| p.predictions.iter().copied());
    let y_span = Scale::fit(ys_values, 0.05, 0.0, 1.0);
    let cols = (features.len() as f64).sqrt().ceil() as usize;
    let rows = features.len().div_ceil(cols);
    let pw = (f.right - f.left) / cols as f64;
    let ph = (f.bottom - f.top) / rows as f64;
    for (i, feature) in features.iter().enumerate() {
        let (x0, y0) = (
            f.left + (i % cols) as f64 * pw,
            f.top + (i / cols) as f64 * ph,
        );
        let (l, r, t, b) = (x0 + 48.0, x0 + pw - 12.0, y0 + 20.0, y0 + ph - 26.0);
        let mine: Vec<&CPProfile> = profiles.iter().filter(|p| p.feature == *feature).collect();
        let xs = Scale::fit(
            mine.iter().flat_map(|p| p.grid.iter().copied()),
            0.0,
            l,
            r.max(l + 1.0),
        );
        let ys = Scale::new(y_span.d0, y_span.d1, b.max(t + 1.0), t);
        svg.open(&[("class", "panel".into()), ("data-key", feature.to_string())]);
        svg.text(
            (l + r) / 2.0,
            y0 + 14.0,
            feature,
            &[("text-anchor", "middle".into()), ("font-size", "12".into())],
        );
        svg.y_axis(&ys, l, 4, Some(r));
        for p in mine {
            let color = PALETTE
                [series.iter().position(|s| *s == p.instance_id).unwrap_or(0) % PALETTE.len()];
            let points: Vec<(f64, f64)> = p
                .grid
                .iter()
                .zip(&p.predictions)
                .map(|(&g, &y)| (xs.map(g), ys.map(y)))
                .collect();
            svg.path(
                &points,
                false,
                &[
                    ("class", "profile".into()),
                    ("data-key", p.feature.clone()),
                    ("data-series", p.instance_id.clone()),
                    ("fill", "none".into()),
                    ("stroke", color.into()),
                    ("stroke-width", "1.5".into()),
                ],
            );
            if let Some(a) = p.anchor {
                svg.circle(
                    xs.map(a.value),
                    ys.map(a.prediction),
                    3.0,
                    &[
                        ("class", "anchor".into()),
                        ("data-key", p.feature.clone()),
                        ("data-series", p.instance_id.clone()),
                        ("fill", color.into()),
                    ],
                );
            }
        }
        svg.x_axis(&xs, ys.r0, 4);
        svg.close();
    }
}

/// Renders a standalone SVG document; identical specs give identical bytes.
pub fn emit_figure(spec: &FigureSpec) -> Result<String> {
    spec.validate()?;
    let mut svg = Svg::new(spec);
    match &spec.payload {
        FigurePayload::HistogramGrid(h) => histogram_grid(&mut svg, spec, h),
        FigurePayload::CorrelationHeatmap(c) => correlation_heatmap(&mut svg, spec, c),
        FigurePayload::BenchmarkBox(b) => benchmark_box(&mut svg, spec, b),
        FigurePayload::ImportanceBar(r) => importance_bar(&mut svg, spec, r),
        FigurePayload::BreakdownWaterfall(r) => breakdown_waterfall(&mut svg, spec, r),
        FigurePayload::BreakdownViolin(r) => breakdown_violin(&mut svg, spec, r),
        FigurePayload::CpProfile(p) => cp_profile(&mut svg, spec, p),
    }
    Ok(svg.finish())
}

/// One sidecar CSV record.
#[derive(Debug, Clone, PartialEq)]
pub struct SidecarRow {
    pub series: String,
    pub key: String,
    pub field: &'static str,
    pub value: f64,
}

fn row(series: &str, key: impl ToString, field: &'static str, value: f64) -> SidecarRow {
    SidecarRow {
        series: series.to_string(),
        key: key.to_string(),
        field,
        value,
    }
}

fn breakdown_rows(r: &BreakdownReport, with_samples: bool) -> Vec<SidecarRow> {
    let mut out = vec![row("intercept", "", "value", r.intercept)];
    if with_samples {
        for (i, &v) in r.baseline_distribution.iter().enumerate() {
            out.push(row("all data", i, "sample", v));
        }
        out.push(row(
            "all data",
            "",
            "bandwidth",
            silverman_bandwidth(&r.baseline_distribution),
        ));
    }
    for s in &r.steps {
        out.push(row(&s.feature, "", "value", s.value));
        out.push(row(&s.feature, "", "contribution", s.contribution));
        out.push(row(&s.feature, "", "cumulative", s.cumulative));
        if with_samples {
            for (i, &v) in s.distribution.iter().enumerate() {
                out.push(row(&s.feature, i, "sample", v));
            }
            out.push(row(
                &s.feature,
                "",
                "bandwidth",
                silverman_bandwidth(&s.distribution),
            ));
        }
    }
    out.push(row("prediction", "", "value", r.final_prediction));
    out
}

/// Every number behind a figure, in long format.
pub fn sidecar_rows(payload: &FigurePayload) -> Vec<SidecarRow> {
    let mut out = Vec::new();
    match payload {
        FigurePayload::HistogramGrid(hists) => {
            for h in hists {
                for (i, &e) in h.edges.iter().enumerate() {
                    out.push(row(&h.column, i, "edge", e));
                }
                for (i, &c) in h.counts.iter().enumerate() {
                    out.push(row(&h.column, i, "count", c as f64));
                }
            }
        }
        FigurePayload::CorrelationHeatmap(c) => {
            for (i, a) in c.labels.iter().enumerate() {
                for (j, b) in c.labels.iter().enumerate() {
                    out.push(row(a, b, "r", c.values[i][j]));
                }
            }
            for (a, b) in &c.constant_pairs {
                out.push(row(a, b, "constant_pair", 1.0));
            }
        }
        FigurePayload::BenchmarkBox(b) => {
            let metric = if b.metric == "accuracy" {
                "accuracy"
            } else {
                "rmse"
            };
            for a in &b.algorithms {
                for v in &a.values {
                    out.push(row(
                        &a.algorithm,
                        format!("{}:{}", v.repeat, v.fold),
                        metric,
                        v.value,
                    ));
                }
                let s = box_stats(&a.raw_values());
                out.push(row(&a.algorithm, "", "mean", a.mean));
                out.push(row(&a.algorithm, "", "sd", a.sd));
                out.push(row(&a.algorithm, "", "q1", s.q1));
                out.push(row(&a.algorithm, "", "median", s.median));
                out.push(row(&a.algorithm, "", "q3", s.q3));
                out.push(row(&a.algorithm, "", "whisker_low", s.low));
                out.push(row(&a.algorithm, "", "whisker_high", s.high));
            }
            if let Some(nir) = b.no_information_rate {
                out.push(row("no_information_rate", "", "value", nir));
            }
        }
        FigurePayload::ImportanceBar(r) => {
            out.push(row("baseline", "", "loss", r.baseline_loss));
            for f in &r.features {
                for (i, &l) in f.permuted_losses.iter().enumerate() {
                    out.push(row(&f.feature, i, "permuted_loss", l));
                }
                out.push(row(
                    &f.feature,
                    "",
                    "mean_permuted_loss",
                    f.mean_permuted_loss,
                ));
                out.push(row(&f.feature, "", "importance", f.importance));
            }
        }
        FigurePayload::BreakdownWaterfall(r) => out = breakdown_rows(r, false),
        FigurePayload::BreakdownViolin(r) => out = breakdown_rows(r, true),
        FigurePayload::CpProfile(profiles) => {
            for p in profiles {
                let series = format!("{}|{}", p.instance_id, p.feature);
                for (i, (&g, &y)) in p.grid.iter().zip(&p.predictions).enumerate() {
                    out.push(row(&series, i, "grid", g));
                    out.push(row(&series, i, "prediction", y));
                }
                if let Some(a) = p.anchor {
                    out.push(row(&series, "", "anchor_value", a.value));
                    out.push(row(&series, "", "anchor_prediction", a.prediction));
                }
            }
        }
    }
    out
}

/// `(csv, json)` sidecars; floats are written in shortest round-trip form.
pub fn emit_sidecar(spec: &FigureSpec) -> Result<(String, String)> {
    spec.validate()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["series", "key", "field", "value"])?;
    for r in sidecar_rows(&spec.payload) {
        w.write_record([
            r.series.as_str(),
            r.key.as_str(),
            r.field,
            &r.value.to_string(),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| csv::Error::from(e.into_error()))?;
    let csv = String::from_utf8(bytes).expect("csv output is utf-8");
    let json = serde_json::to_string_pretty(spec)? + "\n";
    Ok((csv, json))
}

/// Writes `<kind>_<slug>.svg`, `.csv` and `.json` into `dir`.
pub fn write_figure(dir: &Path, spec: &FigureSpec) -> Result<Vec<PathBuf>> {
    let svg = emit_figure(spec)?;
    let (csv, json) = emit_sidecar(spec)?;
    let stem = spec.file_stem();
    let mut written = Vec::with_capacity(3);
    for (ext, body) in [("svg", svg), ("csv", csv), ("json", json)] {
        let path = dir.join(format!("{stem}.{ext}"));
        std::fs::write(&path, body).map_err(|source| FigureError::Io {
            path: path.clone(),
            source,
        })?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        let s = Scale::new(0.0, 1.0, 0.0, 100.0);
        let (t, d) = s.ticks(5);
        assert_eq!(t.len(), 6);
        assert_eq!(d, 1);
        assert_eq!(label(t[3], d), "0.6");
    }

    #[test]
    fn labels_trim_zeros() {
        assert_eq!(label(4.0850, 3), "4.085");
        assert_eq!(label(-0.0001, 2), "0");
        assert_eq!(label(2.0, 3), "2");
    }

    #[test]
    fn diverging_endpoints() {
        assert_eq!(diverging(0.0), "#ffffff");
        assert_eq!(diverging(1.0), "#b2182b");
        assert_eq!(diverging(-1.0), "#2166ac");
    }

    #[test]
    fn silverman_examples() {
        assert_eq!(silverman_bandwidth(&[1.0]), 0.0);
        assert_eq!(silverman_bandwidth(&[2.0, 2.0, 2.0]), 0.0);
        let bw = silverman_bandwidth(&[1.0, 2.0, 3.0, 4.0]);
        // sd = 1.29099, iqr/1.34 = 1.11940
        assert!((bw - 0.9 * (1.5 / 1.34) * 4f64.powf(-0.2)).abs() < 1e-12);
    }

    #[test]
    fn escapes_markup() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }
}
