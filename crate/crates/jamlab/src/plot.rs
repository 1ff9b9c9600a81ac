//! SVG figures. Every series is read from result files; nothing is
//! recomputed here.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::{Path, PathBuf};

use crate::io::{load_json, load_trajectory, read_csv};
use crate::reports::{HistogramReport, NeffRow};
use crate::sweeps::{RunSummary, TransitionEstimate};
use crate::{Error, Result};

pub const FIGURES: [&str; 9] = ["fig2a", "fig2b", "fig2c", "fig2d", "fig3a", "fig3b", "fig3c", "fig4", "fig5"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Dashed,
    Markers,
    LineMarkers,
    /// Histogram bars; consecutive points are bin left edges.
    Bars,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>, style: Style) -> Self {
        Self { label: label.into(), points, style }
    }
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_scale: Scale,
    pub y_scale: Scale,
    pub series: Vec<Series>,
}

impl Panel {
    pub fn new(title: &str, x_label: &str, y_label: &str, x_scale: Scale, y_scale: Scale) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_scale,
            y_scale,
            series: Vec::new(),
        }
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const PW: f64 = 460.0;
const PH: f64 = 340.0;
const ML: f64 = 70.0;
const MR: f64 = 20.0;
const MT: f64 = 40.0;
const MB: f64 = 55.0;

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Axis {
    lo: f64,
    hi: f64,
    scale: Scale,
}

impl Axis {
    fn fit(vals: impl Iterator<Item = f64>, scale: Scale) -> Axis {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in vals.filter(|v| v.is_finite() && (scale == Scale::Linear || *v > 0.0)) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        match scale {
            Scale::Log => {
                let (a, b) = (lo.log10().floor(), hi.log10().ceil());
                let b = if b <= a { a + 1.0 } else { b };
                Axis { lo: 10f64.powf(a), hi: 10f64.powf(b), scale }
            }
            Scale::Linear => {
                let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5f64.max(0.05 * lo.abs()) };
                Axis { lo: lo - pad, hi: hi + pad, scale }
            }
        }
    }

    /// Position in `[0, 1]`, `None` for values a log axis cannot show.
    fn unit(&self, v: f64) -> Option<f64> {
        match self.scale {
            Scale::Linear => Some((v - self.lo) / (self.hi - self.lo)),
            Scale::Log if v > 0.0 => Some((v.log10() - self.lo.log10()) / (self.hi.log10() - self.lo.log10())),
            Scale::Log => None,
        }
    }

    fn ticks(&self) -> Vec<f64> {
        match self.scale {
            Scale::Log => {
                let (a, b) = (self.lo.log10().round() as i32, self.hi.log10().round() as i32);
                (a..=b).map(|k| 10f64.powi(k)).collect()
            }
            Scale::Linear => {
                let raw = (self.hi - self.lo) / 5.0;
                let mag = 10f64.powf(raw.log10().floor());
                let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
                let mut t = (self.lo / step).ceil() * step;
                let mut out = Vec::new();
                while t <= self.hi + 1e-9 * step {
                    out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
                    t += step;
                }
                out
            }
        }
    }
}

fn tick_label(v: f64, scale: Scale) -> String {
    match scale {
        Scale::Log => {
            let k = v.log10().round() as i32;
            if (0..=3).contains(&k) {
                format!("{}", 10i64.pow(k as u32))
            } else {
                format!("1e{k}")
            }
        }
        Scale::Linear => {
            let s = format!("{v:.4}");
            let s = s.trim_end_matches('0').trim_end_matches('.');
            if s == "-0" { "0".into() } else { s.into() }
        }
    }
}

fn render_panel(out: &mut String, p: &Panel, ox: f64) {
    let xs = Axis::fit(p.series.iter().flat_map(|s| s.points.iter().map(|q| q.0)), p.x_scale);
    let ys = Axis::fit(p.series.iter().flat_map(|s| s.points.iter().map(|q| q.1)), p.y_scale);
    let (w, h) = (PW - ML - MR, PH - MT - MB);
    let (x0, y0) = (ox + ML, MT);
    let px = |v: f64| xs.unit(v).map(|u| x0 + u * w);
    let py = |v: f64| ys.unit(v).map(|u| y0 + (1.0 - u) * h);
    let _ = writeln!(out, r##"<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#000"/>"##);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, x0 + w / 2.0, esc(&p.title));
    for t in xs.ticks() {
        if let Some(x) = px(t) {
            let _ = writeln!(out, r##"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="#000"/>"##, y0 + h, y0 + h + 5.0);
            let _ = writeln!(out, r#"<text x="{x:.2}" y="{}" text-anchor="middle" font-size="11">{}</text>"#, y0 + h + 18.0, tick_label(t, p.x_scale));
        }
    }
    for t in ys.ticks() {
        if let Some(y) = py(t) {
            let _ = writeln!(out, r##"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="#000"/>"##, x0 - 5.0);
            let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end" font-size="11">{}</text>"#, x0 - 8.0, y + 4.0, tick_label(t, p.y_scale));
        }
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#, x0 + w / 2.0, PH - 12.0, esc(&p.x_label));
    let (lx, ly) = (ox + 16.0, y0 + h / 2.0);
    let _ = writeln!(out, r#"<text x="{lx}" y="{ly}" text-anchor="middle" font-size="13" transform="rotate(-90 {lx} {ly})">{}</text>"#, esc(&p.y_label));
    let _ = writeln!(out, r#"<g clip-path="url(#clip{})">"#, ox as i64);
    let _ = writeln!(out, r#"<clipPath id="clip{}"><rect x="{x0}" y="{y0}" width="{w}" height="{h}"/></clipPath>"#, ox as i64);
    for (k, s) in p.series.iter().enumerate() {
        let c = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64)> = s.points.iter().filter_map(|&(a, b)| Some((px(a)?, py(b)?))).collect();
        match s.style {
            Style::Line | Style::Dashed | Style::LineMarkers if pts.len() > 1 => {
                let d: Vec<String> = pts.iter().map(|(a, b)| format!("{a:.2},{b:.2}")).collect();
                let dash = if s.style == Style::Dashed { r#" stroke-dasharray="6,4""# } else { "" };
                let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"{dash}/>"#, d.join(" "));
            }
            Style::Bars => {
                let base = py(ys.lo.max(if p.y_scale == Scale::Log { ys.lo } else { 0.0 })).unwrap_or(y0 + h);
                for win in pts.windows(2) {
                    let (a, b) = (win[0], win[1]);
                    let top = a.1.min(base);
                    let _ = writeln!(
                        out,
                        r#"<rect x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{c}" fill-opacity="0.45"/>"#,
                        a.0,
                        (b.0 - a.0).max(0.5),
                        (base - top).max(0.0)
                    );
                }
            }
            _ => {}
        }
        if matches!(s.style, Style::Markers | Style::LineMarkers) || (pts.len() == 1 && s.style != Style::Bars) {
            for (a, b) in &pts {
                let _ = writeln!(out, r#"<circle cx="{a:.2}" cy="{b:.2}" r="3" fill="{c}"/>"#);
            }
        }
    }
    let _ = writeln!(out, "</g>");
    for (k, s) in p.series.iter().enumerate() {
        let c = PALETTE[k % PALETTE.len()];
        let y = y0 + 14.0 + 16.0 * k as f64;
        let _ = writeln!(out, r#"<rect x="{}" y="{}" width="12" height="4" fill="{c}"/>"#, x0 + 10.0, y - 4.0);
        let _ = writeln!(out, r#"<text x="{}" y="{y}" font-size="11">{}</text>"#, x0 + 28.0, esc(&s.label));
    }
}

/// Panels side by side in one self-contained SVG document.
pub fn render(panels: &[Panel]) -> String {
    let width = PW * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PH}" viewBox="0 0 {width} {PH}" font-family="sans-serif">"#);
    let _ = writeln!(out, r##"<rect width="{width}" height="{PH}" fill="#fff"/>"##);
    for (i, p) in panels.iter().enumerate() {
        render_panel(&mut out, p, PW * i as f64);
    }
    out.push_str("</svg>\n");
    out
}

fn label_of(path: &Path) -> String {
    let dir = path.parent().and_then(|d| d.file_name()).map(|s| s.to_string_lossy().into_owned());
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match dir {
        Some(d) if !d.is_empty() => format!("{d}/{stem}"),
        _ => stem,
    }
}

fn nonempty<T>(rows: Vec<T>, path: &Path) -> Result<Vec<T>> {
    if rows.is_empty() {
        Err(Error::NoData(path.display().to_string()))
    } else {
        Ok(rows)
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

/// Median of `y` for each distinct `x`, sorted by `x`.
fn median_curve(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut by: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
    for &(x, y) in points {
        by.entry(x.to_bits()).or_insert((x, Vec::new())).1.push(y);
    }
    let mut out: Vec<(f64, f64)> = by.into_values().map(|(x, mut ys)| (x, median(&mut ys))).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn transitions_panel(inputs: &[PathBuf], title: &str) -> Result<Panel> {
    let mut panel = Panel::new(title, "P", "N*", Scale::Log, Scale::Log);
    let mut p_max: f64 = 0.0;
    let mut p_min = f64::INFINITY;
    for path in inputs {
        let rows: Vec<TransitionEstimate> = nonempty(read_csv(path)?, path)?;
        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.p as f64, r.n_star as f64)).collect();
        p_max = pts.iter().fold(p_max, |m, q| m.max(q.0));
        p_min = pts.iter().fold(p_min, |m, q| m.min(q.0));
        panel.series.push(Series::new(label_of(path), median_curve(&pts), Style::LineMarkers));
    }
    panel.series.push(Series::new("N = 4P", vec![(p_min, 4.0 * p_min), (p_max, 4.0 * p_max)], Style::Dashed));
    Ok(panel)
}

fn runs(path: &Path) -> Result<Vec<RunSummary>> {
    nonempty(read_csv(path)?, path)
}

fn one_input(inputs: &[PathBuf], id: &str) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::MissingSeries(format!("{id} needs at least one input file")));
    }
    Ok(())
}

fn generalization_panel(inputs: &[PathBuf], rescaled: bool) -> Result<Panel> {
    let (title, xl) = if rescaled { ("Test error vs N/N*", "N / N*") } else { ("Test error vs N", "N") };
    let mut panel = Panel::new(title, xl, "test error", Scale::Log, Scale::Linear);
    for path in inputs {
        let rows = runs(path)?;
        let mut fin = Vec::new();
        let mut early = Vec::new();
        for r in &rows {
            let x = if rescaled {
                r.n_over_n_star.ok_or_else(|| Error::MissingSeries(format!("{}: n_over_n_star is empty", path.display())))?
            } else {
                r.n as f64
            };
            let (Some(f), Some(m)) = (r.final_test_err, r.min_test_err) else {
                return Err(Error::MissingSeries(format!("{}: test errors are empty", path.display())));
            };
            fin.push((x, f));
            early.push((x, m));
        }
        let l = label_of(path);
        panel.series.push(Series::new(format!("{l} final"), median_curve(&fin), Style::LineMarkers));
        panel.series.push(Series::new(format!("{l} early-stopped"), median_curve(&early), Style::Dashed));
    }
    Ok(panel)
}

/// Builds figure `id` from result files.
pub fn figure(id: &str, inputs: &[PathBuf]) -> Result<String> {
    if !FIGURES.contains(&id) {
        return Err(Error::UnknownFigure(id.into()));
    }
    one_input(inputs, id)?;
    let panels = match id {
        "fig2a" => vec![transitions_panel(inputs, "Jamming line N*(P)")?],
        "fig2c" => vec![transitions_panel(inputs, "N*(P): structured vs random data")?],
        "fig2b" => {
            let mut a = Panel::new("Constraints vs loss", "loss", "N_Δ / N", Scale::Linear, Scale::Linear);
            let mut b = Panel::new("Constraints vs P/N", "P / N", "N_Δ / N", Scale::Linear, Scale::Linear);
            for path in inputs {
                let rows = runs(path)?;
                a.series.push(Series::new(label_of(path), rows.iter().map(|r| (r.loss, r.n_delta_over_n)).collect(), Style::Markers));
                b.series.push(Series::new(label_of(path), rows.iter().map(|r| (r.p_over_n, r.n_delta_over_n)).collect(), Style::Markers));
            }
            vec![a, b]
        }
        "fig2d" => {
            let mut a = Panel::new("Jump at the transition", "P / N", "N_Δ / N", Scale::Linear, Scale::Linear);
            for path in inputs {
                let rows = runs(path)?;
                a.series.push(Series::new(label_of(path), rows.iter().map(|r| (r.p_over_n, r.n_delta_over_n)).collect(), Style::Markers));
            }
            vec![a]
        }
        "fig3a" => {
            let mut a = Panel::new("Test error during training", "step", "test error", Scale::Log, Scale::Linear);
            for path in inputs {
                let recs = nonempty(load_trajectory(path)?, path)?;
                let pts: Vec<(f64, f64)> = recs.iter().filter_map(|r| Some(((r.step as f64).max(1.0), r.test_err?))).collect();
                if pts.is_empty() {
                    return Err(Error::MissingSeries(format!("{}: no test evaluations", path.display())));
                }
                a.series.push(Series::new(label_of(path), pts, Style::Line));
            }
            vec![a]
        }
        "fig3b" => vec![generalization_panel(inputs, false)?],
        "fig3c" => vec![generalization_panel(inputs, true)?],
        "fig4" => {
            let rep: HistogramReport = load_json(&inputs[0])?;
            let mut panels = Vec::new();
            for (l, tr) in rep.train.iter().enumerate() {
                let mut p = Panel::new(&format!("Pre-activations, layer {}", l + 1), "a", "density", Scale::Linear, Scale::Linear);
                let dens = |h: &jamlab_core::landscape::LayerHistogram| -> Vec<(f64, f64)> {
                    let width = h.edges[1] - h.edges[0];
                    let mut pts: Vec<(f64, f64)> = h.edges[..h.counts.len()]
                        .iter()
                        .zip(&h.counts)
                        .map(|(&e, &c)| (e, c as f64 / (h.total.max(1) as f64 * width)))
                        .collect();
                    pts.push((*h.edges.last().unwrap(), 0.0));
                    pts
                };
                p.series.push(Series::new(format!("train (zero mass {:.3})", tr.zero_mass()), dens(tr), Style::Bars));
                if let Some(te) = rep.test.as_ref().and_then(|t| t.get(l)) {
                    p.series.push(Series::new(format!("test (zero mass {:.3})", te.zero_mass()), dens(te), Style::Bars));
                }
                panels.push(p);
            }
            if panels.is_empty() {
                return Err(Error::NoData(inputs[0].display().to_string()));
            }
            panels
        }
        "fig5" => {
            let mut a = Panel::new("Effective dimension", "N", "N_eff", Scale::Log, Scale::Log);
            let mut refs = Vec::new();
            for path in inputs {
                let mut rows: Vec<NeffRow> = nonempty(read_csv(path)?, path)?;
                rows.sort_by_key(|r| r.n);
                a.series.push(Series::new(label_of(path), rows.iter().map(|r| (r.n as f64, r.n_eff as f64)).collect(), Style::LineMarkers));
                refs.extend(rows.iter().map(|r| (r.n as f64, r.n_minus_neurons as f64)));
            }
            refs.sort_by(|a, b| a.0.total_cmp(&b.0));
            a.series.push(Series::new("N − hidden neurons", refs, Style::Dashed));
            vec![a]
        }
        _ => unreachable!(),
    };
    Ok(render(&panels))
}
