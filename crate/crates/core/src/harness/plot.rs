//! Self-contained SVG rendering of the report CSVs. No external services
//! or font dependencies; everything is plain shapes and sans-serif text.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

use super::report::{read_rows, write_artifact};

const PALETTE: &[&str] = &["#3b6fb6", "#d9822b", "#4a9a57", "#b04a4a", "#7a5fa8", "#5b5b5b"];

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 48.0;
const MARGIN_BOTTOM: f64 = 58.0;

struct Canvas {
    body: String,
}

impl Canvas {
    fn new(width: f64, height: f64, title: &str) -> Self {
        let mut body = String::new();
        writeln!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif">"#
        )
        .unwrap();
        writeln!(body, r##"<rect width="{width}" height="{height}" fill="#ffffff"/>"##).unwrap();
        writeln!(
            body,
            r##"<text x="{:.2}" y="26" font-size="17" text-anchor="middle">{}</text>"##,
            width / 2.0,
            escape(title)
        )
        .unwrap();
        Canvas { body }
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="{width}"/>"#
        )
        .unwrap();
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}"/>"#
        )
        .unwrap();
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        writeln!(
            self.body,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r:.1}" fill="{fill}"/>"#
        )
        .unwrap();
    }

    fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, content: &str, rotate: Option<f64>) {
        let transform = rotate
            .map(|deg| format!(r#" transform="rotate({deg:.0} {x:.2} {y:.2})""#))
            .unwrap_or_default();
        writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="{size:.0}" text-anchor="{anchor}"{transform}>{}</text>"#,
            escape(content)
        )
        .unwrap();
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str) {
        let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="2"/>"#,
            coords.join(" ")
        )
        .unwrap();
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Round a span up to a tidy tick step.
fn nice_step(span: f64, target_ticks: usize) -> f64 {
    let raw = span / target_ticks.max(1) as f64;
    let mag = 10f64.powf(raw.abs().max(1e-300).log10().floor());
    let norm = raw / mag;
    let step = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    step * mag
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    y_max: f64,
}

impl Frame {
    fn y(&self, v: f64) -> f64 {
        self.y0 + self.h - (v / self.y_max) * self.h
    }
}

fn draw_y_axis(canvas: &mut Canvas, frame: &Frame, label: &str) {
    canvas.line(frame.x0, frame.y0, frame.x0, frame.y0 + frame.h, "#333", 1.0);
    canvas.line(
        frame.x0,
        frame.y0 + frame.h,
        frame.x0 + frame.w,
        frame.y0 + frame.h,
        "#333",
        1.0,
    );
    let step = nice_step(frame.y_max, 6);
    let mut v = 0.0;
    while v <= frame.y_max * (1.0 + 1e-9) {
        let y = frame.y(v);
        canvas.line(frame.x0 - 4.0, y, frame.x0, y, "#333", 1.0);
        canvas.line(frame.x0, y, frame.x0 + frame.w, y, "#e4e4e4", 0.6);
        canvas.text(frame.x0 - 8.0, y + 4.0, 11.0, "end", &fmt_tick(v), None);
        v += step;
    }
    canvas.text(
        16.0,
        frame.y0 + frame.h / 2.0,
        12.0,
        "middle",
        label,
        Some(-90.0),
    );
}

fn draw_legend(canvas: &mut Canvas, frame: &Frame, names: &[String]) {
    for (i, name) in names.iter().enumerate() {
        let y = frame.y0 + 14.0 * i as f64;
        canvas.rect(frame.x0 + frame.w + 12.0, y, 10.0, 10.0, PALETTE[i % PALETTE.len()]);
        canvas.text(frame.x0 + frame.w + 27.0, y + 9.0, 11.0, "start", name, None);
    }
}

/// Grouped bar chart: one slot per x label, one bar per series.
pub fn bar_chart(
    title: &str,
    y_label: &str,
    x_labels: &[String],
    series: &[(String, Vec<f64>)],
) -> String {
    let mut canvas = Canvas::new(WIDTH, HEIGHT, title);
    let y_max = series
        .iter()
        .flat_map(|(_, v)| v.iter())
        .cloned()
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max)
        .max(1e-12)
        * 1.08;
    let frame = Frame {
        x0: MARGIN_LEFT,
        y0: MARGIN_TOP,
        w: WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        h: HEIGHT - MARGIN_TOP - MARGIN_BOTTOM,
        y_max,
    };
    draw_y_axis(&mut canvas, &frame, y_label);

    let n_slots = x_labels.len().max(1);
    let slot_w = frame.w / n_slots as f64;
    let bar_w = (slot_w * 0.8) / series.len().max(1) as f64;
    for (slot, label) in x_labels.iter().enumerate() {
        let x_center = frame.x0 + slot_w * (slot as f64 + 0.5);
        canvas.text(
            x_center,
            frame.y0 + frame.h + 16.0,
            11.0,
            "middle",
            label,
            None,
        );
        for (s, (_, values)) in series.iter().enumerate() {
            let Some(&v) = values.get(slot) else { continue };
            if !v.is_finite() {
                continue;
            }
            let x = x_center - 0.4 * slot_w + bar_w * s as f64;
            let y = frame.y(v);
            canvas.rect(x, y, bar_w * 0.92, frame.y0 + frame.h - y, PALETTE[s % PALETTE.len()]);
        }
    }
    let names: Vec<String> = series.iter().map(|(n, _)| n.clone()).collect();
    draw_legend(&mut canvas, &frame, &names);
    canvas.finish()
}

/// One line panel with shared styling; `series` are (name, points).
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    let mut canvas = Canvas::new(WIDTH, HEIGHT, title);
    let xs: Vec<f64> = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.0))
        .filter(|v| v.is_finite())
        .collect();
    let (x_min, x_max) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let x_span = (x_max - x_min).max(1e-12);
    let y_max = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(|p| p.1))
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max)
        .max(1e-12)
        * 1.08;
    let frame = Frame {
        x0: MARGIN_LEFT,
        y0: MARGIN_TOP,
        w: WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        h: HEIGHT - MARGIN_TOP - MARGIN_BOTTOM,
        y_max,
    };
    draw_y_axis(&mut canvas, &frame, y_label);
    let to_x = |v: f64| frame.x0 + (v - x_min) / x_span * frame.w;

    let step = nice_step(x_span, 6);
    let mut v = (x_min / step).ceil() * step;
    while v <= x_max * (1.0 + 1e-9) + step * 1e-9 {
        let x = to_x(v);
        canvas.line(x, frame.y0 + frame.h, x, frame.y0 + frame.h + 4.0, "#333", 1.0);
        canvas.text(x, frame.y0 + frame.h + 16.0, 11.0, "middle", &fmt_tick(v), None);
        v += step;
    }
    canvas.text(
        frame.x0 + frame.w / 2.0,
        HEIGHT - 14.0,
        12.0,
        "middle",
        x_label,
        None,
    );

    for (i, (_, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mapped: Vec<(f64, f64)> = pts
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| (to_x(x), frame.y(y)))
            .collect();
        if mapped.len() > 1 {
            canvas.polyline(&mapped, color);
        }
        for &(x, y) in &mapped {
            canvas.circle(x, y, 3.0, color);
        }
    }
    let names: Vec<String> = series.iter().map(|(n, _)| n.clone()).collect();
    draw_legend(&mut canvas, &frame, &names);
    canvas.finish()
}

fn parse_f64(s: &str) -> f64 {
    s.parse().unwrap_or(f64::NAN)
}

/// Render SVG charts for every report CSV present in `dir`.
///
/// Produces `kfold.svg` and `mean_mae.svg` from kfold.csv, one
/// `curve_<model>.svg` per curve CSV, and `noise.svg` from noise.csv.
/// Returns the paths written.
pub fn emit_plots(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut written = Vec::new();

    let kfold = dir.join("kfold.csv");
    if kfold.exists() {
        let (_, rows) = read_rows(&kfold)?;
        // slot per (channel, fold) in file order; bar series per model
        let mut slots: Vec<String> = Vec::new();
        let mut models: Vec<String> = Vec::new();
        for row in &rows {
            let slot = format!("{}{}", &row[0][..1], row[2]);
            if !slots.contains(&slot) {
                slots.push(slot);
            }
            if !models.contains(&row[1]) {
                models.push(row[1].clone());
            }
        }
        let mut series: Vec<(String, Vec<f64>)> =
            models.iter().map(|m| (m.clone(), vec![f64::NAN; slots.len()])).collect();
        for row in &rows {
            let slot = format!("{}{}", &row[0][..1], row[2]);
            let si = slots.iter().position(|s| *s == slot).unwrap();
            let mi = models.iter().position(|m| *m == row[1]).unwrap();
            series[mi].1[si] = parse_f64(&row[3]);
        }
        let svg = bar_chart(
            "Validation MAE per fold (v = voltage, c = current)",
            "MAE (km)",
            &slots,
            &series,
        );
        written.push(write_artifact(dir, "kfold.svg", &svg)?);

        // per-model mean over every fold of both channels
        let mut means: Vec<(String, Vec<f64>)> = Vec::new();
        for model in &models {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r[1] == *model)
                .map(|r| parse_f64(&r[3]))
                .filter(|v| v.is_finite())
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len().max(1) as f64;
            means.push((model.clone(), vec![mean]));
        }
        let svg = bar_chart(
            "Average MAE across all folds and channels",
            "MAE (km)",
            &["mean".to_string()],
            &means,
        );
        written.push(write_artifact(dir, "mean_mae.svg", &svg)?);
    }

    for entry in std::fs::read_dir(dir).map_err(|e| crate::error::Error::io(dir, e))? {
        let entry = entry.map_err(|e| crate::error::Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let Some(model) = name.strip_prefix("curve_").and_then(|n| n.strip_suffix(".csv")) else {
            continue;
        };
        let (_, rows) = read_rows(&entry.path())?;
        let mae_pts = |col: usize| -> Vec<(f64, f64)> {
            rows.iter()
                .map(|r| (parse_f64(&r[0]), parse_f64(&r[col])))
                .collect()
        };
        let svg = line_chart(
            &format!("Learning curve ({model})"),
            "training samples",
            "MAE (km)",
            &[
                ("train".to_string(), mae_pts(1)),
                ("validation".to_string(), mae_pts(2)),
            ],
        );
        written.push(write_artifact(dir, &format!("curve_{model}.svg"), &svg)?);
        let svg = line_chart(
            &format!("Fit time scaling ({model})"),
            "training samples",
            "fit time (s)",
            &[("fit time".to_string(), mae_pts(3))],
        );
        written.push(write_artifact(dir, &format!("curve_{model}_time.svg"), &svg)?);
        let over_time: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| (parse_f64(&r[4]), parse_f64(&r[2])))
            .collect();
        let svg = line_chart(
            &format!("Validation MAE over cumulative fit time ({model})"),
            "cumulative fit time (s)",
            "MAE (km)",
            &[("validation".to_string(), over_time)],
        );
        written.push(write_artifact(dir, &format!("curve_{model}_over_time.svg"), &svg)?);
    }

    let noise = dir.join("noise.csv");
    if noise.exists() {
        let (_, rows) = read_rows(&noise)?;
        // x axis ordered as written: clean first, then decreasing SNR
        let mut levels: Vec<String> = Vec::new();
        for row in &rows {
            if !levels.contains(&row[0]) {
                levels.push(row[0].clone());
            }
        }
        let mut keys: Vec<(String, String)> = Vec::new();
        for row in &rows {
            let key = (row[1].clone(), row[2].clone());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        let series: Vec<(String, Vec<(f64, f64)>)> = keys
            .iter()
            .map(|(channel, model)| {
                let pts: Vec<(f64, f64)> = levels
                    .iter()
                    .enumerate()
                    .filter_map(|(i, level)| {
                        rows.iter()
                            .find(|r| r[0] == *level && r[1] == *channel && r[2] == *model)
                            .map(|r| (i as f64, parse_f64(&r[3])))
                    })
                    .collect();
                (format!("{model} ({channel})"), pts)
            })
            .collect();
        let svg = line_chart(
            &format!("MAE under measurement noise (levels: {})", levels.join(", ")),
            "noise level index",
            "MAE (km)",
            &series,
        );
        written.push(write_artifact(dir, "noise.svg", &svg)?);
    }

    Ok(written)
}
