//! JSON report plus SVG/CSV diagnostics: raw versus fitted curves and
//! warped data versus the template.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};

use crate::decompose::{BootstrapSummary, Decomposition};
use crate::error::Result;
use crate::fitting::{FitResult, SampledCurve};
use crate::model::Theta;
use crate::workbench::pipeline::{StudyConfig, StudyOutcome};

/// Warped-data diagnostic for one curve.
#[derive(Clone, Debug, PartialEq)]
pub struct WarpDiagnostic {
    pub id: String,
    pub warped_t: Vec<f64>,
    pub warped_z: Vec<f64>,
    /// Largest `|warped z − z(warped t)|`.
    pub trace_deviation: f64,
    /// Warped location of the curve's largest value minus the template's argmax.
    pub max_offset: f64,
    pub flagged: bool,
}

fn template_argmax(fit: &FitResult, lo: f64, hi: f64) -> f64 {
    let template = fit.template();
    (0..=2000)
        .map(|i| lo + (hi - lo) * i as f64 / 2000.0)
        .map(|x| (template.eval(x), x))
        .fold((f64::NEG_INFINITY, lo), |best, cur| if cur.0 > best.0 { cur } else { best })
        .1
}

pub fn warp_diagnostics(fit: &FitResult, curves: &[SampledCurve], band: f64) -> Result<Vec<WarpDiagnostic>> {
    let mut out = Vec::with_capacity(curves.len());
    for (curve, cf) in curves.iter().zip(&fit.curves) {
        let (warped_t, warped_z) = fit.model.warp_curve(&curve.z, &cf.theta)?;
        let trace_deviation = warped_t
            .iter()
            .zip(&warped_z)
            .map(|(&x, &y)| (y - fit.template().eval(x)).abs())
            .fold(0.0, f64::max);
        out.push(WarpDiagnostic {
            id: curve.id.clone(),
            warped_t,
            warped_z,
            trace_deviation,
            max_offset: 0.0,
            flagged: false,
        });
    }
    let (lo, hi) = warped_range(&out);
    let peak = template_argmax(fit, lo, hi);
    for d in &mut out {
        let j = d
            .warped_z
            .iter()
            .enumerate()
            .fold(0, |best, (j, &v)| if v > d.warped_z[best] { j } else { best });
        d.max_offset = d.warped_t[j] - peak;
        d.flagged = d.max_offset.abs() > band;
    }
    Ok(out)
}

fn warped_range(diags: &[WarpDiagnostic]) -> (f64, f64) {
    diags
        .iter()
        .flat_map(|d| d.warped_t.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

pub fn theta_map(names: &[String], theta: &Theta) -> Value {
    Value::Object(names.iter().cloned().zip(theta.iter().map(|&v| json!(v))).collect())
}

pub fn decomposition_json(names: &[String], d: &Decomposition) -> Value {
    json!({
        "sse": d.sse,
        "ssm": d.ssm_per_mode,
        "ssm_total": d.ssm_total,
        "rss": d.rss_per_mode,
        "rss_total": d.rss_total,
        "frechet_mean": theta_map(names, &d.frechet_mean),
        "origin": theta_map(names, &d.origin),
        "gamma": d.gamma,
        "degenerate": d.degenerate,
        "frechet_variance": d.frechet.variance,
        "mean_unique": d.frechet.diagnostics.unique,
    })
}

pub fn bootstrap_json(b: &BootstrapSummary) -> Value {
    json!({
        "B": b.replicates,
        "seed": b.seed,
        "failures": b.failures,
        "rss": b.rss,
    })
}

/// Template and per-curve estimates.
pub fn fit_json(fit: &FitResult) -> Value {
    let names = fit.model.mode_names();
    json!({
        "modes": names,
        "template": {
            "degree": fit.template().degree(),
            "coefficients": fit.template().coefficients(),
        },
        "iterations": fit.iterations,
        "converged": fit.converged,
        "weighted_sse": fit.weighted_sse(),
        "sse_trace": fit.sse_trace,
        "curves": fit.curves.iter().map(|c| json!({
            "id": c.id,
            "theta_hat": theta_map(&names, &c.theta),
            "sse": c.sse,
            "n_minima": c.n_minima,
        })).collect::<Vec<_>>(),
    })
}

/// The report document. `generated_at_unix` is the only nondeterministic field.
pub fn report_json(cfg: &StudyConfig, curves: &[SampledCurve], outcome: &StudyOutcome, warps: &[WarpDiagnostic]) -> Value {
    let fit = &outcome.fit;
    let names = fit.model.mode_names();
    let curve_rows: Vec<Value> = fit
        .curves
        .iter()
        .zip(warps)
        .zip(curves)
        .map(|((c, w), raw)| {
            json!({
                "id": c.id,
                "weight": raw.weight,
                "theta_hat": theta_map(&names, &c.theta),
                "sse": c.sse,
                "n_minima": c.n_minima,
                "warped_max_offset": w.max_offset,
                "warp_flagged": w.flagged,
            })
        })
        .collect();
    let mut doc = Map::new();
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    doc.insert("generated_at_unix".into(), json!(now));
    doc.insert("config".into(), serde_json::to_value(cfg).unwrap_or(Value::Null));
    doc.insert(
        "template".into(),
        json!({
            "degree": fit.template().degree(),
            "coefficients": fit.template().coefficients(),
        }),
    );
    doc.insert(
        "fit".into(),
        json!({
            "iterations": fit.iterations,
            "converged": fit.converged,
            "weighted_sse": fit.weighted_sse(),
            "sse_trace": fit.sse_trace,
        }),
    );
    doc.insert("curves".into(), Value::Array(curve_rows));
    doc.insert("decomposition".into(), decomposition_json(&names, &outcome.decomposition));
    if let Some(b) = &outcome.bootstrap {
        doc.insert("bootstrap".into(), bootstrap_json(b));
    }
    if let Some(sweep) = &outcome.gamma_sweep {
        doc.insert(
            "gamma_sweep".into(),
            Value::Array(sweep.iter().map(|d| decomposition_json(&names, d)).collect()),
        );
    }
    Value::Object(doc)
}

/// Minimal SVG line/marker chart.
struct Chart {
    series: Vec<Series>,
    title: String,
    x_label: String,
    y_label: String,
}

struct Series {
    points: Vec<(f64, f64)>,
    line: bool,
    color: String,
}

const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

impl Chart {
    fn render(&self) -> String {
        let (w, h, m) = (720.0, 480.0, 56.0);
        let all = self.series.iter().flat_map(|s| s.points.iter());
        let (mut x0, mut x1, mut y0, mut y1) = all.fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
        );
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 == x0 {
            x1 = x0 + 1.0;
        }
        if y1 == y0 {
            y1 = y0 + 1.0;
        }
        let pad = 0.05 * (y1 - y0);
        let (y0, y1) = (y0 - pad, y1 + pad);
        let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
        let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, w / 2.0, self.title);
        let _ = writeln!(
            svg,
            r##"<g stroke="#444" fill="none"><line x1="{m}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{m}" y1="{m}" x2="{m}" y2="{b}"/></g>"##,
            b = h - m,
            r = w - m
        );
        for i in 0..=4 {
            let fx = x0 + (x1 - x0) * i as f64 / 4.0;
            let fy = y0 + (y1 - y0) * i as f64 / 4.0;
            let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.3}</text>"#, sx(fx), h - m + 18.0, fx);
            let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#, m - 6.0, sy(fy) + 4.0, fy);
        }
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 12.0, self.x_label);
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            h / 2.0,
            h / 2.0,
            self.y_label
        );
        for s in &self.series {
            if s.line {
                let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                    s.color,
                    pts.join(" ")
                );
            } else {
                for &(x, y) in &s.points {
                    let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#, sx(x), sy(y), s.color);
                }
            }
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn dense(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn fitted_outputs(fit: &FitResult, curves: &[SampledCurve]) -> Result<(String, String)> {
    let t = fit.model.grid().points();
    let fine = dense(t[0], t[t.len() - 1], 200);
    let mut series = Vec::new();
    let mut csv = String::from("curve_id,t,z,fitted\n");
    for (i, (curve, cf)) in curves.iter().zip(&fit.curves).enumerate() {
        let color = PALETTE[i % PALETTE.len()].to_string();
        series.push(Series {
            points: t.iter().copied().zip(curve.z.iter().copied()).collect(),
            line: false,
            color: color.clone(),
        });
        let trace = fit.model.eval_at(&cf.theta, &fine)?;
        series.push(Series {
            points: fine.iter().copied().zip(trace).collect(),
            line: true,
            color,
        });
        for ((tj, zj), fj) in t.iter().zip(&curve.z).zip(&cf.fitted) {
            let _ = writeln!(csv, "{},{tj:.16e},{zj:.16e},{fj:.16e}", curve.id);
        }
    }
    let svg = Chart {
        series,
        title: "Observed (points) and fitted (lines) curves".into(),
        x_label: "t".into(),
        y_label: "z".into(),
    }
    .render();
    Ok((svg, csv))
}

fn warped_outputs(fit: &FitResult, warps: &[WarpDiagnostic]) -> (String, String) {
    let (lo, hi) = warped_range(warps);
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (-1.0, 1.0) };
    let fine = dense(lo, hi, 200);
    let mut csv = String::from("curve_id,warped_t,warped_z,flagged\n");
    let mut series = Vec::new();
    for (i, d) in warps.iter().enumerate() {
        series.push(Series {
            points: d.warped_t.iter().copied().zip(d.warped_z.iter().copied()).collect(),
            line: false,
            color: if d.flagged { "#d62728".into() } else { PALETTE[i % PALETTE.len()].to_string() },
        });
        for (x, y) in d.warped_t.iter().zip(&d.warped_z) {
            let _ = writeln!(csv, "{},{x:.16e},{y:.16e},{}", d.id, d.flagged);
        }
    }
    let template: Vec<(f64, f64)> = fine.iter().map(|&x| (x, fit.template().eval(x))).collect();
    for (x, y) in &template {
        let _ = writeln!(csv, "template,{x:.16e},{y:.16e},false");
    }
    series.push(Series {
        points: template,
        line: true,
        color: "#000000".into(),
    });
    let svg = Chart {
        series,
        title: "Warped data and fitted template".into(),
        x_label: "w·(t − m)".into(),
        y_label: "(z − h)/w".into(),
    }
    .render();
    (svg, csv)
}

/// Write `report.json`, `fitted.svg/csv` and `warped.svg/csv` into `dir`.
pub fn emit_report(dir: impl AsRef<Path>, cfg: &StudyConfig, curves: &[SampledCurve], outcome: &StudyOutcome) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let fit = &outcome.fit;
    let warps = warp_diagnostics(fit, curves, cfg.warp_band_for(fit.model.grid()))?;
    let doc = report_json(cfg, curves, outcome, &warps);
    let (fitted_svg, fitted_csv) = fitted_outputs(fit, curves)?;
    let (warped_svg, warped_csv) = warped_outputs(fit, &warps);
    let files = [
        ("report.json", serde_json::to_string_pretty(&doc)? + "\n"),
        ("fitted.svg", fitted_svg),
        ("fitted.csv", fitted_csv),
        ("warped.svg", warped_svg),
        ("warped.csv", warped_csv),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}
