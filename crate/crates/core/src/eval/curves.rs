use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub epoch: u32,
    pub train: f64,
    pub val: f64,
}

/// `epoch,train,val` rows with strictly increasing epochs starting at 1 or later.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    pub fn x_domain(&self) -> Option<(u32, u32)> {
        Some((self.rows.first()?.epoch, self.rows.last()?.epoch))
    }

    pub fn y_domain(&self) -> Option<(f64, f64)> {
        let vals = self.rows.iter().flat_map(|r| [r.train, r.val]);
        let lo = vals.clone().fold(f64::INFINITY, f64::min);
        let hi = vals.fold(f64::NEG_INFINITY, f64::max);
        lo.is_finite().then_some((lo, hi))
    }

    /// Canonical CSV plus both series min-max scaled to [0, 1] over their
    /// common range.
    pub fn normalized_csv(&self) -> String {
        let (lo, hi) = self.y_domain().unwrap_or((0.0, 1.0));
        let span = hi - lo;
        let norm = |v: f64| if span > 0.0 { (v - lo) / span } else { 0.0 };
        let mut out = String::from("epoch,train,val,train_norm,val_norm\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.epoch,
                r.train,
                r.val,
                norm(r.train),
                norm(r.val)
            );
        }
        out
    }
}

pub fn parse_training_log<R: Read>(input: R) -> Result<TrainingLog, EvalError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers().map_err(|e| EvalError::Malformed {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != ["epoch", "train", "val"] {
        return Err(EvalError::Malformed {
            line: 1,
            message: "expected header `epoch,train,val`".into(),
        });
    }
    let mut rows: Vec<LogRow> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| EvalError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| EvalError::Malformed { line, message };
        if record.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", record.len())));
        }
        let epoch: u32 = record[0]
            .parse()
            .map_err(|_| bad(format!("invalid epoch {:?}", &record[0])))?;
        let metric = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("invalid metric {s:?}")))
        };
        let (train, val) = (metric(&record[1])?, metric(&record[2])?);
        if epoch == 0 {
            return Err(bad("epochs start at 1".into()));
        }
        if let Some(prev) = rows.last() {
            if epoch <= prev.epoch {
                return Err(bad(format!("epoch {epoch} does not follow {}", prev.epoch)));
            }
        }
        rows.push(LogRow { epoch, train, val });
    }
    Ok(TrainingLog { rows })
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 120.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 52.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Two-series line chart. The root element carries the x-domain as
/// `data-x-min` / `data-x-max` and the y-domain as `data-y-min` / `data-y-max`.
pub fn render_svg(log: &TrainingLog, title: &str) -> String {
    let (x0, x1) = log.x_domain().unwrap_or((1, 1));
    let (mut y0, mut y1) = log.y_domain().unwrap_or((0.0, 1.0));
    let (data_y0, data_y1) = (y0, y1);
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |e: f64| {
        if x1 == x0 {
            MARGIN_LEFT + plot_w / 2.0
        } else {
            MARGIN_LEFT + (e - x0 as f64) / (x1 - x0) as f64 * plot_w
        }
    };
    let sy = |v: f64| MARGIN_TOP + (1.0 - (v - y0) / (y1 - y0)) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" data-x-min="{x0}" data-x-max="{x1}" data-y-min="{data_y0}" data-y-max="{data_y1}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    );
    // Axes.
    let _ = writeln!(
        s,
        r#"<path d="M{MARGIN_LEFT} {MARGIN_TOP} V{} H{}" fill="none" stroke="black"/>"#,
        MARGIN_TOP + plot_h,
        MARGIN_LEFT + plot_w
    );
    let span = x1 - x0;
    let step = (span / 8).max(1);
    let mut e = x0;
    while e <= x1 {
        let x = sx(e as f64);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="11">{e}</text>"#,
            MARGIN_TOP + plot_h + 16.0
        );
        e += step;
    }
    for k in 0..=4 {
        let v = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#,
            MARGIN_LEFT - 6.0,
            sy(v) + 4.0,
            format_tick(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12">epoch</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {:.2})">metric</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );
    for (name, color, pick) in [
        (
            "train",
            "#1f77b4",
            (|r: &LogRow| r.train) as fn(&LogRow) -> f64,
        ),
        ("val", "#d62728", |r: &LogRow| r.val),
    ] {
        let points: Vec<String> = log
            .rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", sx(r.epoch as f64), sy(pick(r))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" data-series="{name}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            points.join(" ")
        );
    }
    for (i, (name, color)) in [("train", "#1f77b4"), ("val", "#d62728")]
        .iter()
        .enumerate()
    {
        let y = MARGIN_TOP + 10.0 + 18.0 * i as f64;
        let x = WIDTH - MARGIN_RIGHT + 14.0;
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}" font-family="sans-serif" font-size="12">{name}</text>"#,
            x + 20.0,
            x + 26.0,
            y + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn format_tick(v: f64) -> String {
    let t = format!("{v:.3}");
    let t = t.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" {
        "0".into()
    } else {
        t.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveExport {
    pub svg_path: PathBuf,
    pub csv_path: PathBuf,
    pub epochs: (u32, u32),
}

/// Writes `out` (SVG) and the normalized CSV next to it (`out` with a `.csv`
/// extension). Nothing is written if the log is malformed or empty.
pub fn export_curves(log_path: &Path, out: &Path) -> Result<CurveExport, EvalError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| EvalError::Io { path, source }
    };
    let file = std::fs::File::open(log_path).map_err(io_err(log_path))?;
    let log = parse_training_log(file)?;
    let epochs = log.x_domain().ok_or(EvalError::EmptyLog)?;
    let title = log_path
        .file_stem()
        .map_or("training".into(), |s| s.to_string_lossy().into_owned());
    let csv_path = out.with_extension("csv");
    if csv_path == out {
        return Err(EvalError::Mismatch(format!(
            "plot output {} would overwrite its own CSV",
            out.display()
        )));
    }
    std::fs::write(out, render_svg(&log, &title)).map_err(io_err(out))?;
    std::fs::write(&csv_path, log.normalized_csv()).map_err(io_err(&csv_path))?;
    Ok(CurveExport {
        svg_path: out.to_path_buf(),
        csv_path,
        epochs,
    })
}
