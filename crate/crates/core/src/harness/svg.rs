//! Minimal hand-written SVG line plots.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::harness::emit::CsvTable;
use crate::harness::sim::RunLog;
use crate::harness::sweep::{Stat, SweepCell, SweepSummary};

type StatOf = fn(&SweepCell) -> Stat;

const WIDTH: f64 = 760.0;
const PANEL_H: f64 = 240.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 130.0;
const MARGIN_T: f64 = 40.0;
const GAP: f64 = 60.0;

/// The four series shown in a run plot. Angles are in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSeries {
    pub t: Vec<f64>,
    pub psi: Vec<f64>,
    pub psi_d: Vec<f64>,
    pub lambda: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl From<&RunLog> for RunSeries {
    fn from(log: &RunLog) -> Self {
        let col = |f: fn(&crate::harness::sim::LogRow) -> f64| log.rows.iter().map(f).collect();
        Self {
            t: col(|r| r.t),
            psi: col(|r| r.psi),
            psi_d: col(|r| r.psi_d),
            lambda: col(|r| r.lambda),
            sigma: col(|r| r.sigma.value()),
        }
    }
}

impl TryFrom<&CsvTable> for RunSeries {
    type Error = Error;
    fn try_from(t: &CsvTable) -> Result<Self> {
        let get = |name: &str| {
            t.column(name)
                .ok_or_else(|| Error::InvalidArgument(format!("CSV has no '{name}' column")))
        };
        Ok(Self {
            t: get("t")?,
            psi: get("psi")?,
            psi_d: get("psi_d")?,
            lambda: get("lambda")?,
            sigma: get("sigma")?,
        })
    }
}

struct Series<'a> {
    name: &'a str,
    color: &'a str,
    dashed: bool,
    x: &'a [f64],
    y: Vec<f64>,
    /// Break the line where consecutive samples jump by more than this.
    break_above: Option<f64>,
}

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xr.0) / (self.xr.1 - self.xr.0) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.yr.0) / (self.yr.1 - self.yr.0) * self.h
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// About five round tick values covering `(lo, hi)`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut v = (lo / step).ceil() * step;
    let mut out = vec![];
    while v <= hi + 1e-9 * step {
        out.push(if v.abs() < 1e-12 * step { 0.0 } else { v });
        v += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn panel(out: &mut String, f: &Frame, title: &str, ylabel: &str, xlabel: &str, series: &[Series]) {
    let _ = writeln!(out, r#"<g class="panel">"#);
    let _ = writeln!(
        out,
        r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
        f.x0, f.y0, f.w, f.h
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">{title}</text>"#,
        f.x0 + f.w / 2.0,
        f.y0 - 10.0
    );
    for tx in ticks(f.xr.0, f.xr.1) {
        let x = f.px(tx);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"##,
            f.y0,
            f.y0 + f.h,
            f.y0 + f.h + 15.0,
            fmt_tick(tx)
        );
    }
    for ty in ticks(f.yr.0, f.yr.1) {
        let y = f.py(ty);
        let _ = writeln!(
            out,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"##,
            f.x0,
            f.x0 + f.w,
            f.x0 - 6.0,
            y + 4.0,
            fmt_tick(ty)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{xlabel}</text>"#,
        f.x0 + f.w / 2.0,
        f.y0 + f.h + 32.0
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">{ylabel}</text>"#,
        f.x0 - 48.0,
        f.y0 + f.h / 2.0,
        f.x0 - 48.0,
        f.y0 + f.h / 2.0
    );
    for (i, s) in series.iter().enumerate() {
        let dash = if s.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let mut segment: Vec<String> = vec![];
        let flush = |seg: &mut Vec<String>, out: &mut String| {
            if seg.len() > 1 {
                let _ = writeln!(
                    out,
                    r#"<polyline class="series" data-name="{}" fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
                    s.name,
                    s.color,
                    seg.join(" ")
                );
            }
            seg.clear();
        };
        for k in 0..s.x.len() {
            if !s.y[k].is_finite() {
                flush(&mut segment, out);
                continue;
            }
            if let Some(lim) = s.break_above {
                if k > 0 && (s.y[k] - s.y[k - 1]).abs() > lim {
                    flush(&mut segment, out);
                }
            }
            segment.push(format!("{:.2},{:.2}", f.px(s.x[k]), f.py(s.y[k])));
        }
        flush(&mut segment, out);
        let ly = f.y0 + 14.0 + 18.0 * i as f64;
        let lx = f.x0 + f.w + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="2"{dash}/><text x="{:.1}" y="{:.1}" font-size="12">{}</text>"#,
            lx + 24.0,
            s.color,
            lx + 30.0,
            ly + 4.0,
            s.name
        );
    }
    let _ = writeln!(out, "</g>");
}

fn document(height: f64, body: &str) -> String {
    format!(
        concat!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif">"#,
            "\n",
            r#"<rect width="100%" height="100%" fill="white"/>"#,
            "\n{body}</svg>\n"
        ),
        w = WIDTH,
        h = height,
        body = body
    )
}

/// Yaw and desired yaw (degrees) in the top panel, Λ and σ below.
pub fn run_svg(s: &RunSeries, title: &str) -> String {
    let deg = |v: &[f64]| v.iter().map(|x| x.to_degrees()).collect::<Vec<_>>();
    let xr = range(s.t.iter().copied());
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let mut body = String::new();
    let _ = writeln!(
        body,
        r#"<text x="{:.1}" y="20" font-size="16" text-anchor="middle">{title}</text>"#,
        WIDTH / 2.0
    );
    let top = Frame {
        x0: MARGIN_L,
        y0: MARGIN_T,
        w: pw,
        h: PANEL_H,
        xr,
        yr: (-190.0, 190.0),
    };
    panel(
        &mut body,
        &top,
        "yaw",
        "angle [deg]",
        "t [s]",
        &[
            Series {
                name: "psi",
                color: "#1f77b4",
                dashed: false,
                x: &s.t,
                y: deg(&s.psi),
                break_above: Some(180.0),
            },
            Series {
                name: "psi_d",
                color: "#d62728",
                dashed: true,
                x: &s.t,
                y: deg(&s.psi_d),
                break_above: Some(180.0),
            },
        ],
    );
    let yr = range(s.lambda.iter().chain(s.sigma.iter()).copied());
    let bottom = Frame {
        x0: MARGIN_L,
        y0: MARGIN_T + PANEL_H + GAP,
        w: pw,
        h: PANEL_H,
        xr,
        yr,
    };
    panel(
        &mut body,
        &bottom,
        "switching function and sign",
        "value",
        "t [s]",
        &[
            Series {
                name: "lambda",
                color: "#2ca02c",
                dashed: false,
                x: &s.t,
                y: s.lambda.clone(),
                break_above: None,
            },
            Series {
                name: "sigma",
                color: "#9467bd",
                dashed: true,
                x: &s.t,
                y: s.sigma.clone(),
                break_above: None,
            },
        ],
    );
    document(MARGIN_T + 2.0 * PANEL_H + GAP + 50.0, &body)
}

/// Mean ± ESD of both metrics per initial-condition pair and controller.
pub fn summary_svg(s: &SweepSummary) -> String {
    let mut pairs = vec![];
    for c in &s.cells {
        if !pairs.contains(&c.pair) {
            pairs.push(c.pair);
        }
    }
    let mut controllers = vec![];
    for c in &s.cells {
        if !controllers.contains(&c.controller) {
            controllers.push(c.controller);
        }
    }
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let mut body = String::new();
    let _ = writeln!(
        body,
        r#"<text x="{:.1}" y="20" font-size="16" text-anchor="middle">performance over {} repeats</text>"#,
        WIDTH / 2.0,
        s.repeats
    );
    let metrics: [(&str, &str, StatOf); 2] = [
        ("RMS torque", "gamma_tau [N m]", |c| c.gamma_tau),
        ("RMS rotational power", "gamma_p [N m rad/s]", |c| c.gamma_p),
    ];
    for (mi, (title, ylabel, get)) in metrics.iter().enumerate() {
        let yr = range(s.cells.iter().flat_map(|c| {
            let st = get(c);
            [st.mean - st.esd.max(0.0), st.mean + st.esd.max(0.0)]
        }));
        let f = Frame {
            x0: MARGIN_L,
            y0: MARGIN_T + mi as f64 * (PANEL_H + GAP),
            w: pw,
            h: PANEL_H,
            xr: (-0.5, pairs.len() as f64 - 0.5),
            yr: (yr.0.min(0.0), yr.1),
        };
        panel(&mut body, &f, title, ylabel, "initial-condition pair", &[]);
        let _ = writeln!(body, r#"<g class="markers">"#);
        for (pi, pair) in pairs.iter().enumerate() {
            if mi == 0 {
                let _ = writeln!(
                    body,
                    r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{}</text>"#,
                    f.px(pi as f64),
                    f.y0 + f.h + 44.0,
                    pair.label()
                );
            }
            for (ci, ctrl) in controllers.iter().enumerate() {
                let Some(cell) = s.cell(*pair, *ctrl) else {
                    continue;
                };
                let st = get(cell);
                if !st.mean.is_finite() {
                    continue;
                }
                let x =
                    f.px(pi as f64 + (ci as f64 - 0.5 * (controllers.len() as f64 - 1.0)) * 0.2);
                let color = colors[ci % colors.len()];
                let e = if st.esd.is_finite() { st.esd } else { 0.0 };
                let _ = writeln!(
                    body,
                    r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="{color}"/><circle cx="{x:.1}" cy="{:.1}" r="4" fill="{color}"/>"#,
                    f.py(st.mean - e),
                    f.py(st.mean + e),
                    f.py(st.mean)
                );
            }
        }
        for (ci, ctrl) in controllers.iter().enumerate() {
            let ly = f.y0 + 14.0 + 18.0 * ci as f64;
            let lx = f.x0 + f.w + 12.0;
            let _ = writeln!(
                body,
                r#"<circle cx="{:.1}" cy="{ly:.1}" r="4" fill="{}"/><text x="{:.1}" y="{:.1}" font-size="12">{}</text>"#,
                lx + 8.0,
                colors[ci % colors.len()],
                lx + 18.0,
                ly + 4.0,
                ctrl.name()
            );
        }
        let _ = writeln!(body, "</g>");
    }
    document(MARGIN_T + 2.0 * PANEL_H + GAP + 60.0, &body)
}
