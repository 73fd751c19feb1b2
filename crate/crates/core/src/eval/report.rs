//! CSV, JSON and SVG output of metric reports.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::MetricsReport;
use crate::{Error, Result};

/// Short hex digest of the canonical JSON form of `config`.
pub fn config_fingerprint<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    let digest = Sha256::digest(&bytes);
    digest[..8]
        .iter()
        .fold(String::with_capacity(16), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// One labelled metrics report, e.g. one ablation variant at one seed or one
/// sweep grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub variant: String,
    pub seed: u64,
    pub metrics: MetricsReport,
}

/// Flat CSV form of a [`ReportRow`].
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub variant: String,
    pub seed: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_f1: Vec<f64>,
}

impl From<&ReportRow> for CsvRow {
    fn from(r: &ReportRow) -> Self {
        CsvRow {
            variant: r.variant.clone(),
            seed: r.seed,
            accuracy: r.metrics.accuracy,
            macro_f1: r.metrics.macro_f1,
            per_class_f1: r.metrics.per_class_f1.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Svg,
}

/// Writes `rows` in `format`. Every format embeds `config_hash`.
pub fn emit_report(
    rows: &[ReportRow],
    config_hash: &str,
    path: &Path,
    format: ReportFormat,
) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Empty("report rows"));
    }
    match format {
        ReportFormat::Csv => write_csv(rows, config_hash, path),
        ReportFormat::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                config_hash: &'a str,
                reports: &'a [ReportRow],
            }
            crate::datagen::write_json(
                &Doc {
                    config_hash,
                    reports: rows,
                },
                path,
            )
        }
        ReportFormat::Svg => write_file(path, &bar_chart_svg(rows, config_hash)),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Columns: `variant, seed, accuracy, macro_f1, f1_class0, f1_class1, …`,
/// preceded by a `# config_hash=…` comment line. Floats are written in
/// shortest round-trip form.
pub fn write_csv(rows: &[ReportRow], config_hash: &str, path: &Path) -> Result<()> {
    let classes = rows
        .iter()
        .map(|r| r.metrics.per_class_f1.len())
        .max()
        .unwrap_or(0);
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    writeln!(file, "# config_hash={config_hash}").map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec![
        "variant".to_string(),
        "seed".into(),
        "accuracy".into(),
        "macro_f1".into(),
    ];
    header.extend((0..classes).map(|k| format!("f1_class{k}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.variant.clone(),
            r.seed.to_string(),
            r.metrics.accuracy.to_string(),
            r.metrics.macro_f1.to_string(),
        ];
        rec.extend(r.metrics.per_class_f1.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a CSV written by [`write_csv`]; returns the config hash and rows.
pub fn read_csv(path: &Path) -> Result<(String, Vec<CsvRow>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader
        .read_line(&mut first)
        .map_err(|e| Error::io(path, e))?;
    let hash = first
        .trim()
        .strip_prefix("# config_hash=")
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            reason: "missing config_hash comment".into(),
        })?
        .to_string();
    let mut r = csv::Reader::from_reader(reader);
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 3;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .ok_or_else(|| parse_err(line, format!("missing column {k}")))?
                .parse()
                .map_err(|e| parse_err(line, format!("column {k}: {e}")))
        };
        let per_class_f1 = (4..rec.len()).map(num).collect::<Result<Vec<_>>>()?;
        rows.push(CsvRow {
            variant: rec.get(0).unwrap_or_default().to_string(),
            seed: rec
                .get(1)
                .unwrap_or_default()
                .parse()
                .map_err(|e| parse_err(line, format!("seed: {e}")))?,
            accuracy: num(2)?,
            macro_f1: num(3)?,
            per_class_f1,
        });
    }
    Ok((hash, rows))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 60.0;

fn svg_frame(out: &mut String, title: &str, x_label: &str, y_label: &str, config_hash: &str) {
    let plot_bottom = HEIGHT - MARGIN_BOTTOM;
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" data-config-hash="{hash}">
<title>{title}</title>
<rect width="100%" height="100%" fill="white"/>
<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{plot_bottom}" stroke="black"/>
<line x1="{MARGIN_LEFT}" y1="{plot_bottom}" x2="{xr}" y2="{plot_bottom}" stroke="black"/>
<text x="{xc}" y="{xl}" text-anchor="middle" font-size="13">{x_label}</text>
<text x="16" y="{yc}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {yc})">{y_label}</text>
"#,
        hash = escape(config_hash),
        title = escape(title),
        xr = WIDTH - MARGIN_RIGHT,
        xc = (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
        xl = HEIGHT - 14.0,
        yc = (MARGIN_TOP + plot_bottom) / 2.0,
        x_label = escape(x_label),
        y_label = escape(y_label),
    );
    for tick in 0..=4 {
        let v = tick as f64 / 4.0;
        let y = y_of(v);
        let _ = writeln!(
            out,
            r##"<text x="{x}" y="{ty}" text-anchor="end" font-size="11">{v:.2}</text><line x1="{MARGIN_LEFT}" y1="{y:.1}" x2="{xr}" y2="{y:.1}" stroke="#ddd"/>"##,
            x = MARGIN_LEFT - 6.0,
            ty = y + 4.0,
            xr = WIDTH - MARGIN_RIGHT,
        );
    }
}

fn y_of(v: f64) -> f64 {
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    HEIGHT - MARGIN_BOTTOM - v.clamp(0.0, 1.0) * plot_h
}

/// Mean accuracy per variant as a bar chart, in first-seen variant order.
pub fn bar_chart_svg(rows: &[ReportRow], config_hash: &str) -> String {
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for r in rows {
        match groups.iter_mut().find(|(v, _)| *v == r.variant) {
            Some((_, accs)) => accs.push(r.metrics.accuracy),
            None => groups.push((r.variant.clone(), vec![r.metrics.accuracy])),
        }
    }
    let mut out = String::new();
    svg_frame(
        &mut out,
        "Mean accuracy by variant",
        "variant",
        "accuracy",
        config_hash,
    );
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let slot = plot_w / groups.len() as f64;
    for (i, (variant, accs)) in groups.iter().enumerate() {
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        let x = MARGIN_LEFT + slot * (i as f64 + 0.2);
        let y = y_of(mean);
        let _ = writeln!(
            out,
            r##"<rect x="{x:.1}" y="{y:.1}" width="{w:.1}" height="{h:.1}" fill="#4a78b5"/><text x="{cx:.1}" y="{ly:.1}" text-anchor="middle" font-size="11">{label}</text><text x="{cx:.1}" y="{vy:.1}" text-anchor="middle" font-size="11">{mean:.3}</text>"##,
            w = slot * 0.6,
            h = HEIGHT - MARGIN_BOTTOM - y,
            cx = x + slot * 0.3,
            ly = HEIGHT - MARGIN_BOTTOM + 16.0,
            vy = y - 4.0,
            label = escape(variant),
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Accuracy and macro-F1 against a swept hyperparameter. Grid points are
/// spaced evenly and labelled with their values.
pub fn line_chart_svg(param: &str, points: &[(f64, f64, f64)], config_hash: &str) -> String {
    let mut out = String::new();
    svg_frame(
        &mut out,
        &format!("Sensitivity to {param}"),
        param,
        "score",
        config_hash,
    );
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let step = plot_w / points.len().max(1) as f64;
    let x_of = |i: usize| MARGIN_LEFT + step * (i as f64 + 0.5);
    for (series, color, pick) in [
        ("accuracy", "#4a78b5", 1usize),
        ("macro-F1", "#c8553d", 2usize),
    ] {
        let coords: Vec<String> = points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let v = if pick == 1 { p.1 } else { p.2 };
                format!("{:.1},{:.1}", x_of(i), y_of(v))
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"><title>{series}</title></polyline>"#,
            coords.join(" ")
        );
    }
    for (i, p) in points.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#,
            x_of(i),
            HEIGHT - MARGIN_BOTTOM + 16.0,
            p.0
        );
    }
    let _ = writeln!(
        out,
        r##"<text x="{x}" y="{y}" font-size="11" fill="#4a78b5">accuracy</text><text x="{x}" y="{y2}" font-size="11" fill="#c8553d">macro-F1</text>"##,
        x = WIDTH - MARGIN_RIGHT - 70.0,
        y = MARGIN_TOP - 12.0,
        y2 = MARGIN_TOP,
    );
    out.push_str("</svg>\n");
    out
}

pub fn write_line_chart(
    path: &Path,
    param: &str,
    points: &[(f64, f64, f64)],
    config_hash: &str,
) -> Result<()> {
    write_file(path, &line_chart_svg(param, points, config_hash))
}
