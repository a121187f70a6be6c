//! Summary tables, charts and ordering checks from a results file.

use std::fmt::Write as _;
use std::path::Path;

use swarmupdate_core::Strategy;

use crate::results::{float, CellMean};

/// Patch size of a full-model update, the reference for the ordering checks.
pub const FULL_PACKETS: u32 = 240;
/// Patch size of the smallest update in the patch-size study.
pub const SMALL_PACKETS: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// The results lack the cells the check needs.
    Missing,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Missing => "n/a",
        }
    }

    fn of(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    /// Steps per drone: SwarmSync < Gossip < SOUL for swarms of 100 or more.
    SpeedOrder,
    /// SwarmSync steps per drone, loss-free: size 100 over size 500 in [3, 8].
    SpeedScaling,
    /// Overhead per drone at size 500: SOUL < SwarmSync < Gossip.
    OverheadOrder,
    /// Overhead at size 20 from f = 0 to f = 0.75 grows by [5, 15]x.
    LossGrowth,
    /// Size 200, f = 0.25: 240 → 64 packets cuts steps and overhead by 65-80%.
    PatchProportionality,
}

impl CheckKind {
    pub const ALL: [CheckKind; 5] = [
        CheckKind::SpeedOrder,
        CheckKind::SpeedScaling,
        CheckKind::OverheadOrder,
        CheckKind::LossGrowth,
        CheckKind::PatchProportionality,
    ];

    pub fn title(self) -> &'static str {
        match self {
            CheckKind::SpeedOrder => "speed order",
            CheckKind::SpeedScaling => "speed scaling",
            CheckKind::OverheadOrder => "overhead order",
            CheckKind::LossGrowth => "overhead growth under loss",
            CheckKind::PatchProportionality => "patch-size proportionality",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub kind: CheckKind,
    pub cell: String,
    pub expected: String,
    pub observed: String,
    pub verdict: Verdict,
}

fn find(means: &[CellMean], s: Strategy, n: usize, f: f64, p: u32) -> Option<&CellMean> {
    means.iter().find(|m| m.is_cell(s, n, f, p))
}

fn distinct<T: PartialEq>(values: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn missing(kind: CheckKind, cell: &str, expected: &str) -> Check {
    Check {
        kind,
        cell: cell.into(),
        expected: expected.into(),
        observed: "no data".into(),
        verdict: Verdict::Missing,
    }
}

/// Strict ordering of three strategies by one metric, in every listed cell.
fn order_checks(
    kind: CheckKind,
    means: &[CellMean],
    cells: &[(usize, f64)],
    order: [Strategy; 3],
    metric: fn(&CellMean) -> f64,
    what: &str,
) -> Vec<Check> {
    let expected = format!("{} < {} < {} ({what})", order[0], order[1], order[2]);
    cells
        .iter()
        .map(|&(n, f)| {
            let cell = format!("size {n}, f {f}");
            let values: Option<Vec<f64>> = order.iter().map(|&s| find(means, s, n, f, FULL_PACKETS).map(metric)).collect();
            match values {
                None => missing(kind, &cell, &expected),
                Some(v) => Check {
                    kind,
                    cell,
                    expected: expected.clone(),
                    observed: format!("{:.3} / {:.3} / {:.3}", v[0], v[1], v[2]),
                    verdict: Verdict::of(v[0] < v[1] && v[1] < v[2]),
                },
            }
        })
        .collect()
}

fn window(kind: CheckKind, cell: String, expected: String, value: Option<f64>, lo: f64, hi: f64, unit: &str) -> Check {
    match value {
        None => missing(kind, &cell, &expected),
        Some(v) => Check {
            kind,
            cell,
            expected,
            observed: format!("{v:.3}{unit}"),
            verdict: Verdict::of((lo..=hi).contains(&v)),
        },
    }
}

/// Evaluates every check the results allow.
pub fn ordering_checks(means: &[CellMean]) -> Vec<Check> {
    let full: Vec<&CellMean> = means.iter().filter(|m| m.patch_packets == FULL_PACKETS).collect();
    let mut checks = Vec::new();

    let large: Vec<(usize, f64)> = distinct(full.iter().filter(|m| m.swarm_size >= 100).map(|m| (m.swarm_size, m.failure_rate)));
    if large.is_empty() {
        checks.push(missing(CheckKind::SpeedOrder, "sizes >= 100", "swarmsync < gossip < soul"));
    }
    checks.extend(order_checks(
        CheckKind::SpeedOrder,
        means,
        &large,
        [Strategy::SwarmSync, Strategy::Gossip, Strategy::Soul],
        |m| m.steps_per_drone,
        "steps per drone",
    ));

    let sync_lossless = |n| find(means, Strategy::SwarmSync, n, 0.0, FULL_PACKETS).map(|m| m.steps_per_drone);
    let ratio = sync_lossless(100).zip(sync_lossless(500)).map(|(a, b)| a / b);
    checks.push(window(
        CheckKind::SpeedScaling,
        "swarmsync, f 0, size 100 → 500".into(),
        "steps per drone shrink by 3x to 8x".into(),
        ratio,
        3.0,
        8.0,
        "x",
    ));

    let mut rates: Vec<(usize, f64)> = distinct(full.iter().filter(|m| m.swarm_size == 500).map(|m| (500, m.failure_rate)));
    if rates.is_empty() {
        rates = [0.0, 0.25, 0.5, 0.75].map(|f| (500, f)).to_vec();
    }
    checks.extend(order_checks(
        CheckKind::OverheadOrder,
        means,
        &rates,
        [Strategy::Soul, Strategy::SwarmSync, Strategy::Gossip],
        |m| m.overhead_per_drone_bytes,
        "overhead per drone",
    ));

    for s in [Strategy::SwarmSync, Strategy::Soul] {
        let ov = |f| find(means, s, 20, f, FULL_PACKETS).map(|m| m.overhead_bytes);
        let growth = ov(0.0).zip(ov(0.75)).map(|(a, b)| b / a);
        checks.push(window(
            CheckKind::LossGrowth,
            format!("{s}, size 20, f 0 → 0.75"),
            "overhead grows 5x to 15x".into(),
            growth,
            5.0,
            15.0,
            "x",
        ));
    }

    for s in Strategy::ALL {
        let cell = |p| find(means, s, 200, 0.25, p);
        for (what, metric) in [
            ("steps", (|m: &CellMean| m.convergence_steps) as fn(&CellMean) -> f64),
            ("overhead", |m: &CellMean| m.overhead_bytes),
        ] {
            let cut = cell(FULL_PACKETS)
                .zip(cell(SMALL_PACKETS))
                .map(|(a, b)| 100.0 * (1.0 - metric(b) / metric(a)));
            checks.push(window(
                CheckKind::PatchProportionality,
                format!("{s} {what}, size 200, f 0.25, 240 → 64 packets"),
                "reduction of 65% to 80%".into(),
                cut,
                65.0,
                80.0,
                "%",
            ));
        }
    }
    checks
}

/// Pass if every evaluated check of `kind` passes, Missing if none was
/// evaluated.
pub fn verdict(checks: &[Check], kind: CheckKind) -> Verdict {
    let relevant: Vec<&Check> = checks.iter().filter(|c| c.kind == kind).collect();
    if relevant.iter().any(|c| c.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if relevant.iter().any(|c| c.verdict == Verdict::Pass) && relevant.iter().all(|c| c.verdict == Verdict::Pass) {
        Verdict::Pass
    } else {
        Verdict::Missing
    }
}

fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells.zip(&widths).map(|(c, &w)| format!("{c:<w$}")).collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(&mut out, &mut header.iter().copied());
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    line(&mut out, &mut rule.iter().map(String::as_str));
    for row in rows {
        line(&mut out, &mut row.iter().map(String::as_str));
    }
    out
}

pub fn summary_table(means: &[CellMean]) -> String {
    let rows: Vec<Vec<String>> = means
        .iter()
        .map(|m| {
            vec![
                m.strategy.to_string(),
                m.swarm_size.to_string(),
                format!("{}", m.failure_rate),
                m.patch_packets.to_string(),
                format!("{}/{}", m.converged_reps, m.reps),
                format!("{:.3}", m.steps_per_drone),
                format!("{:.0}", m.overhead_per_drone_bytes),
            ]
        })
        .collect();
    render_table(
        &["strategy", "size", "failure", "packets", "converged", "steps/drone", "overhead/drone (B)"],
        &rows,
    )
}

pub fn checks_table(checks: &[Check]) -> String {
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            vec![
                c.kind.title().to_string(),
                c.cell.clone(),
                c.expected.clone(),
                c.observed.clone(),
                c.verdict.label().to_string(),
            ]
        })
        .collect();
    render_table(&["check", "cell", "expected", "observed", "result"], &rows)
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 280.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 16.0;
const MARGIN_T: f64 = 48.0;
const MARGIN_B: f64 = 44.0;

fn color(name: &str) -> &'static str {
    match name {
        "swarmsync" => "#1b9e77",
        "gossip" => "#d95f02",
        "soul" => "#7570b3",
        _ => "#444444",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a >= 1e6 {
        format!("{:.1}M", v / 1e6)
    } else if a >= 1e4 {
        format!("{:.0}k", v / 1e3)
    } else if a >= 100.0 || v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn span(values: impl Iterator<Item = f64>, from_zero: bool) -> (f64, f64) {
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if from_zero {
        lo = lo.min(0.0);
    }
    if hi - lo < 1e-12 {
        let pad = if hi.abs() > 0.0 { hi.abs() * 0.1 } else { 1.0 };
        lo -= pad;
        hi += pad;
        if from_zero {
            lo = lo.max(0.0);
        }
    } else if from_zero {
        hi *= 1.05;
    }
    (lo, hi)
}

/// Renders panels side by side as a static SVG line chart.
pub fn line_chart(title: &str, panels: &[Panel]) -> String {
    let width = PANEL_W * panels.len().max(1) as f64;
    let height = PANEL_H + 28.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    for (i, panel) in panels.iter().enumerate() {
        let ox = PANEL_W * i as f64;
        let oy = 28.0;
        let (x0, x1) = span(panel.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)), false);
        let (y0, y1) = span(panel.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)), true);
        let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
        let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
        let px = |x: f64| ox + MARGIN_L + (x - x0) / (x1 - x0) * plot_w;
        let py = |y: f64| oy + MARGIN_T + plot_h - (y - y0) / (y1 - y0) * plot_h;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
            ox + MARGIN_L + plot_w / 2.0,
            oy + 16.0,
            escape(&panel.title)
        );
        let _ = writeln!(
            svg,
            r##"<rect x="{}" y="{}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#999"/>"##,
            ox + MARGIN_L,
            oy + MARGIN_T
        );
        for k in 0..=4 {
            let t = k as f64 / 4.0;
            let yv = y0 + t * (y1 - y0);
            let xv = x0 + t * (x1 - x0);
            let _ = writeln!(
                svg,
                r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#eee"/><text x="{}" y="{}" text-anchor="end">{}</text>"##,
                ox + MARGIN_L,
                ox + MARGIN_L + plot_w,
                ox + MARGIN_L - 4.0,
                py(yv) + 4.0,
                tick_label(yv),
                y = py(yv),
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                px(xv),
                oy + MARGIN_T + plot_h + 14.0,
                tick_label(xv)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            ox + MARGIN_L + plot_w / 2.0,
            oy + PANEL_H - 8.0,
            escape(&panel.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text transform="translate({},{}) rotate(-90)" text-anchor="middle">{}</text>"#,
            ox + 14.0,
            oy + MARGIN_T + plot_h / 2.0,
            escape(&panel.y_label)
        );
        for (j, s) in panel.series.iter().enumerate() {
            let c = color(&s.name);
            let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            if pts.len() > 1 {
                let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#, pts.join(" "));
            }
            for &(x, y) in &s.points {
                let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#, px(x), py(y));
            }
            let ly = oy + MARGIN_T + 12.0 + 14.0 * j as f64;
            let lx = ox + MARGIN_L + 8.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="{c}" stroke-width="2"/><text x="{}" y="{ly}">{}</text>"#,
                ly - 4.0,
                lx + 14.0,
                ly - 4.0,
                lx + 18.0,
                escape(&s.name)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn strategies_in(means: &[&CellMean]) -> Vec<Strategy> {
    distinct(means.iter().map(|m| m.strategy))
}

fn versus_size(means: &[CellMean], metric: fn(&CellMean) -> f64, y_label: &str) -> Vec<Panel> {
    let packets = if means.iter().any(|m| m.patch_packets == FULL_PACKETS) {
        FULL_PACKETS
    } else {
        means.iter().map(|m| m.patch_packets).max().unwrap_or(FULL_PACKETS)
    };
    let cells: Vec<&CellMean> = means.iter().filter(|m| m.patch_packets == packets).collect();
    distinct(cells.iter().map(|m| float(m.failure_rate)))
        .into_iter()
        .map(|f| {
            let at_f: Vec<&CellMean> = cells.iter().copied().filter(|m| float(m.failure_rate) == f).collect();
            Panel {
                title: format!("f = {}, {packets} packets", f.trim_end_matches('0').trim_end_matches('.')),
                x_label: "swarm size".into(),
                y_label: y_label.into(),
                series: strategies_in(&at_f)
                    .into_iter()
                    .map(|s| {
                        let mut points: Vec<(f64, f64)> = at_f
                            .iter()
                            .filter(|m| m.strategy == s)
                            .map(|m| (m.swarm_size as f64, metric(m)))
                            .collect();
                        points.sort_by(|a, b| a.0.total_cmp(&b.0));
                        Series {
                            name: s.to_string(),
                            points,
                        }
                    })
                    .collect(),
            }
        })
        .collect()
}

fn versus_packets(means: &[CellMean]) -> Vec<Panel> {
    // The (size, failure rate) pair with the most patch sizes.
    let pairs = distinct(means.iter().map(|m| (m.swarm_size, float(m.failure_rate))));
    let count = |(n, f): &(usize, String)| {
        distinct(means.iter().filter(|m| m.swarm_size == *n && float(m.failure_rate) == *f).map(|m| m.patch_packets)).len()
    };
    let Some(best) = pairs.iter().max_by_key(|p| (count(p), std::cmp::Reverse(pairs.iter().position(|q| q == *p)))) else {
        return Vec::new();
    };
    let cells: Vec<&CellMean> = means
        .iter()
        .filter(|m| m.swarm_size == best.0 && float(m.failure_rate) == best.1)
        .collect();
    let f = best.1.trim_end_matches('0').trim_end_matches('.');
    let metrics: [(&str, fn(&CellMean) -> f64); 2] = [
        ("steps per drone", |m| m.steps_per_drone),
        ("overhead per drone (bytes)", |m| m.overhead_per_drone_bytes),
    ];
    metrics
        .into_iter()
        .map(|(label, metric)| Panel {
            title: format!("size {}, f = {f}", best.0),
            x_label: "patch packets".into(),
            y_label: label.into(),
            series: strategies_in(&cells)
                .into_iter()
                .map(|s| {
                    let mut points: Vec<(f64, f64)> = cells
                        .iter()
                        .filter(|m| m.strategy == s)
                        .map(|m| (f64::from(m.patch_packets), metric(m)))
                        .collect();
                    points.sort_by(|a, b| a.0.total_cmp(&b.0));
                    Series {
                        name: s.to_string(),
                        points,
                    }
                })
                .collect(),
        })
        .collect()
}

pub struct Report {
    pub summary: String,
    pub checks: Vec<Check>,
    /// File name and SVG text of each chart.
    pub charts: Vec<(&'static str, String)>,
}

pub fn build_report(means: &[CellMean]) -> Report {
    let checks = ordering_checks(means);
    let charts = vec![
        (
            "steps_per_drone.svg",
            line_chart(
                "Convergence time per drone",
                &versus_size(means, |m| m.steps_per_drone, "steps per drone"),
            ),
        ),
        (
            "overhead_per_drone.svg",
            line_chart(
                "Radio overhead per drone",
                &versus_size(means, |m| m.overhead_per_drone_bytes, "overhead per drone (bytes)"),
            ),
        ),
        ("patch_size.svg", line_chart("Effect of patch size", &versus_packets(means))),
    ];
    Report {
        summary: summary_table(means),
        checks,
        charts,
    }
}

pub fn write_report(dir: &Path, report: &Report) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("summary.txt"), &report.summary)?;
    std::fs::write(dir.join("orderings.txt"), checks_table(&report.checks))?;
    for (name, svg) in &report.charts {
        std::fs::write(dir.join(name), svg)?;
    }
    Ok(())
}
