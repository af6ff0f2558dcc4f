//! SVG 1.1 plots and a plain-text summary of a campaign.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{CampaignState, ProfileRecord};
use crate::csvio::write_text;
use crate::error::{Error, Result};
use crate::geometry::ContourProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportItem {
    PolarDeviation,
    ModalCoordinates,
    NominalVsOptimum,
    Summary,
}

impl ReportItem {
    pub const ALL: [ReportItem; 4] = [
        ReportItem::PolarDeviation,
        ReportItem::ModalCoordinates,
        ReportItem::NominalVsOptimum,
        ReportItem::Summary,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            ReportItem::PolarDeviation => "polar_deviation.svg",
            ReportItem::ModalCoordinates => "modal_coordinates.svg",
            ReportItem::NominalVsOptimum => "nominal_vs_optimum.svg",
            ReportItem::Summary => "summary.txt",
        }
    }

    /// What must exist in the campaign for this item.
    pub fn requirement(self) -> &'static str {
        match self {
            ReportItem::PolarDeviation | ReportItem::ModalCoordinates => {
                "baseline profile (run `simulate`)"
            }
            ReportItem::NominalVsOptimum => "verified optimum (run `verify`)",
            ReportItem::Summary => "optimum (run `optimize`)",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub written: Vec<PathBuf>,
    pub missing: Vec<ReportItem>,
}

const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

fn svg_open(w: f64, h: f64, title: &str) -> String {
    let mut s = String::new();
    writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{}" y="22" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
        w / 2.0,
        escape(title)
    )
    .unwrap();
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn polyline(points: impl Iterator<Item = (f64, f64)>, color: &str, closed: bool) -> String {
    let pts: Vec<String> = points.map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let tag = if closed { "polygon" } else { "polyline" };
    format!(
        r#"<{tag} points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
        pts.join(" ")
    ) + "\n"
}

fn legend(s: &mut String, x: f64, y: f64, labels: &[&str]) {
    for (i, l) in labels.iter().enumerate() {
        let yy = y + 16.0 * i as f64;
        writeln!(
            s,
            r#"<line x1="{x}" y1="{yy}" x2="{}" y2="{yy}" stroke="{}" stroke-width="3"/><text x="{}" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            x + 18.0,
            COLORS[i % COLORS.len()],
            x + 24.0,
            yy + 4.0,
            escape(l)
        )
        .unwrap();
    }
}

/// Rim deviation drawn around a reference circle standing for the target height.
pub fn polar_deviation_svg(curves: &[(&str, &ContourProfile)], target: f64) -> String {
    let (w, h) = (520.0, 560.0);
    let (cx, cy, r0) = (w / 2.0, 300.0, 150.0);
    let max_dev = curves
        .iter()
        .flat_map(|(_, p)| p.heights().iter().map(|v| (v - target).abs()))
        .fold(1e-9f64, f64::max);
    let scale = 90.0 / max_dev;
    let mut s = svg_open(w, h, "Rim deviation from target height");
    writeln!(
        s,
        r##"<circle cx="{cx}" cy="{cy}" r="{r0}" fill="none" stroke="#999" stroke-dasharray="4 3"/>"##
    )
    .unwrap();
    for (i, (_, p)) in curves.iter().enumerate() {
        let pts = p.samples().map(|(t, v)| {
            let r = r0 + scale * (v - target);
            (cx + r * t.cos(), cy - r * t.sin())
        });
        s += &polyline(pts, COLORS[i % COLORS.len()], true);
    }
    writeln!(
        s,
        r#"<text x="12" y="{}" font-family="sans-serif" font-size="12">dashed: target {target} mm; radial scale {:.1} px/mm (max |dev| {max_dev:.4} mm)</text>"#,
        h - 14.0,
        scale
    )
    .unwrap();
    legend(
        &mut s,
        12.0,
        44.0,
        &curves.iter().map(|c| c.0).collect::<Vec<_>>(),
    );
    s + "</svg>\n"
}

/// Grouped bars of modal coordinates, one group per mode.
pub fn modal_bar_svg(series: &[(&str, &[f64])]) -> String {
    let n_modes = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let (w, h) = (560.0, 380.0);
    let (left, right, top, bottom) = (60.0, 20.0, 50.0, 330.0);
    let max = series
        .iter()
        .flat_map(|(_, v)| v.iter().map(|x| x.abs()))
        .fold(1e-9f64, f64::max);
    let zero = (top + bottom) / 2.0;
    let ys = (bottom - top) / 2.0 / max;
    let group = (w - left - right) / n_modes.max(1) as f64;
    let bar = group * 0.8 / series.len().max(1) as f64;
    let mut s = svg_open(w, h, "Modal coordinates");
    writeln!(
        s,
        r#"<line x1="{left}" y1="{zero}" x2="{}" y2="{zero}" stroke="black"/>"#,
        w - right
    )
    .unwrap();
    for (k, (_, values)) in series.iter().enumerate() {
        for (m, v) in values.iter().enumerate() {
            let x = left + group * m as f64 + group * 0.1 + bar * k as f64;
            let (y, hh) = if *v >= 0.0 {
                (zero - v * ys, v * ys)
            } else {
                (zero, -v * ys)
            };
            writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{bar:.2}" height="{hh:.2}" fill="{}"><title>L{} = {v}</title></rect>"#,
                COLORS[k % COLORS.len()],
                m + 1
            )
            .unwrap();
        }
    }
    for m in 0..n_modes {
        writeln!(
            s,
            r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">L{}</text>"#,
            left + group * (m as f64 + 0.5),
            bottom + 20.0,
            m + 1
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="8" y="{}" font-family="sans-serif" font-size="11">{max:.3} mm</text><text x="8" y="{}" font-family="sans-serif" font-size="11">-{max:.3}</text>"#,
        top + 4.0,
        bottom
    )
    .unwrap();
    legend(
        &mut s,
        left + 8.0,
        44.0,
        &series.iter().map(|c| c.0).collect::<Vec<_>>(),
    );
    s + "</svg>\n"
}

/// Deviation against angle (degrees) for several profiles on one axis.
pub fn overlay_svg(curves: &[(&str, &ContourProfile)], target: f64) -> String {
    let (w, h) = (640.0, 360.0);
    let (left, right, top, bottom) = (60.0, 20.0, 50.0, 320.0);
    let max = curves
        .iter()
        .flat_map(|(_, p)| p.heights().iter().map(|v| (v - target).abs()))
        .fold(1e-9f64, f64::max);
    let zero = (top + bottom) / 2.0;
    let ys = (bottom - top) / 2.0 / max;
    let xs = (w - left - right) / TAU;
    let mut s = svg_open(w, h, "Nominal and optimum rim deviation");
    writeln!(
        s,
        r#"<line x1="{left}" y1="{zero}" x2="{}" y2="{zero}" stroke="black"/>"#,
        w - right
    )
    .unwrap();
    for deg in (0..=360).step_by(90) {
        let x = left + xs * (deg as f64).to_radians();
        writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{deg}°</text>"#,
            bottom + 18.0
        )
        .unwrap();
    }
    for (i, (_, p)) in curves.iter().enumerate() {
        let pts = p
            .samples()
            .chain(std::iter::once((TAU, p.heights()[0])))
            .map(|(t, v)| (left + xs * t, zero - ys * (v - target)));
        s += &polyline(pts, COLORS[i % COLORS.len()], false);
    }
    writeln!(
        s,
        r#"<text x="8" y="{}" font-family="sans-serif" font-size="11">+{max:.3} mm</text><text x="8" y="{}" font-family="sans-serif" font-size="11">-{max:.3}</text>"#,
        top + 4.0,
        bottom
    )
    .unwrap();
    legend(
        &mut s,
        left + 8.0,
        44.0,
        &curves.iter().map(|c| c.0).collect::<Vec<_>>(),
    );
    s + "</svg>\n"
}

fn coords_row(out: &mut String, label: &str, lambda: &[f64]) {
    write!(out, "{label:<22}").unwrap();
    for l in lambda {
        write!(out, " {l:>12.4e}").unwrap();
    }
    out.push('\n');
}

pub fn summary_text(state: &CampaignState) -> Option<String> {
    let opt = state.optimum.as_ref()?;
    let mut out = String::new();
    writeln!(out, "Optimal blank").unwrap();
    writeln!(
        out,
        "  D = {:.4} mm   A1 = {:.4e} mm   A2 = {:.4e} mm",
        opt.blank.diameter, opt.blank.a1, opt.blank.a2
    )
    .unwrap();
    writeln!(
        out,
        "  normalized = {:?}   F = {:.6e}",
        opt.normalized, opt.f_value
    )
    .unwrap();
    writeln!(
        out,
        "  starts = {}   iterations (best) = {}   projected gradient = {:.3e}",
        opt.report.starts, opt.report.best_iterations, opt.report.projected_gradient_norm
    )
    .unwrap();
    out.push('\n');
    write!(out, "{:<22}", "modal coordinates").unwrap();
    for i in 1..=opt.predicted.len() {
        write!(out, " {:>12}", format!("L{i}")).unwrap();
    }
    out.push('\n');
    coords_row(&mut out, "optimum (predicted)", &opt.predicted);
    if let Some(v) = &state.verification {
        coords_row(
            &mut out,
            "optimum (re-simulated)",
            &v.optimum.coordinates.lambda,
        );
    }
    if let Some(b) = state.simulation.as_ref().and_then(|s| s.baseline.as_ref()) {
        coords_row(&mut out, "nominal", &b.coordinates.lambda);
    }
    if let Some(v) = &state.verification {
        out.push('\n');
        writeln!(
            out,
            "ear amplitude: nominal {:.4} mm, optimum {:.4} mm, reduction factor {}",
            v.baseline_ear_amplitude, v.optimum.ear_amplitude, v.reduction_factor
        )
        .unwrap();
    }
    Some(out)
}

fn baseline(state: &CampaignState) -> Option<&ProfileRecord> {
    state.simulation.as_ref()?.baseline.as_ref()
}

/// Writes every report whose data exists into `dir/reports`.
///
/// Returns `ReportIncomplete` listing what could not be produced when any
/// item is missing; the available items are still written.
pub fn write_reports(dir: &Path, state: &CampaignState) -> Result<ReportBundle> {
    let out_dir = dir.join("reports");
    let target = state.config.target_height;
    let verified = state.verification.as_ref();
    let mut written = Vec::new();
    let mut missing = Vec::new();

    for item in ReportItem::ALL {
        let content = match item {
            ReportItem::PolarDeviation => baseline(state).map(|b| {
                let mut curves = vec![("nominal", b.profile())];
                if let Some(v) = verified {
                    curves.push(("optimum", v.optimum.profile()));
                }
                polar_deviation_svg(&curves, target)
            }),
            ReportItem::ModalCoordinates => baseline(state).map(|b| {
                let mut series = vec![("nominal", b.coordinates.lambda.as_slice())];
                if let Some(v) = verified {
                    series.push(("optimum", v.optimum.coordinates.lambda.as_slice()));
                }
                modal_bar_svg(&series)
            }),
            ReportItem::NominalVsOptimum => verified.zip(baseline(state)).map(|(v, b)| {
                overlay_svg(
                    &[("nominal", b.profile()), ("optimum", v.optimum.profile())],
                    target,
                )
            }),
            ReportItem::Summary => summary_text(state),
        };
        match content {
            Some(text) => {
                let path = out_dir.join(item.file_name());
                write_text(&path, &text)?;
                written.push(path);
            }
            None => missing.push(item),
        }
    }
    let bundle = ReportBundle { written, missing };
    if bundle.missing.is_empty() {
        Ok(bundle)
    } else {
        Err(Error::ReportIncomplete {
            missing: bundle
                .missing
                .iter()
                .map(|m| format!("{} needs {}", m.file_name(), m.requirement()))
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaign::{run_pipeline, CampaignConfig};

    #[test]
    fn full_campaign_writes_every_report() {
        let dir = tempfile::tempdir().unwrap();
        let state = run_pipeline(CampaignConfig::default()).unwrap();
        let bundle = write_reports(dir.path(), &state).unwrap();
        assert_eq!(bundle.written.len(), 4);
        for p in &bundle.written {
            let text = std::fs::read_to_string(p).unwrap();
            if p.extension().unwrap() == "svg" {
                assert!(text.contains("<svg") && text.trim_end().ends_with("</svg>"));
            }
        }
        let summary = std::fs::read_to_string(dir.path().join("reports/summary.txt")).unwrap();
        assert!(summary.contains("reduction factor"));
    }

    #[test]
    fn partial_campaign_lists_missing_reports() {
        let dir = tempfile::tempdir().unwrap();
        let mut state = run_pipeline(CampaignConfig::default()).unwrap();
        state.verification = None;
        state.optimum = None;
        match write_reports(dir.path(), &state) {
            Err(Error::ReportIncomplete { missing }) => {
                assert_eq!(missing.len(), 2);
                assert!(missing[0].starts_with("nominal_vs_optimum.svg"));
                assert!(missing[1].starts_with("summary.txt"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(dir.path().join("reports/polar_deviation.svg").exists());
        assert!(!dir.path().join("reports/summary.txt").exists());
    }

    #[test]
    fn svg_text_is_escaped() {
        assert_eq!(escape("a<b & c>"), "a&lt;b &amp; c&gt;");
    }
}
