//! Sweep CSV output and static log-log SVG charts.

use std::fmt::Write as _;
use std::io::{Read, Write};

use thiserror::Error;

use crate::timeloop::{RunStatus, SweepRecord};

pub const CSV_HEADER: [&str; 12] = [
    "beta",
    "epsilon",
    "h",
    "dt",
    "mu",
    "err_l2_final",
    "err_l2h1",
    "max_div",
    "max_energy",
    "cond_estimate",
    "wall_seconds",
    "status",
];

#[derive(Debug, Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("unexpected CSV header {0:?}")]
    Header(Vec<String>),
    #[error("row {row}: cannot parse {field} from {value:?}")]
    Field { row: usize, field: &'static str, value: String },
}

/// 17 significant digits, enough to round-trip an `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn record_fields(r: &SweepRecord) -> [String; 12] {
    [
        format_float(r.beta),
        format_float(r.epsilon),
        format_float(r.h),
        format_float(r.dt),
        format_float(r.mu),
        format_float(r.err_l2_final),
        format_float(r.err_l2h1),
        format_float(r.max_div),
        format_float(r.max_energy),
        r.cond_estimate.map(format_float).unwrap_or_default(),
        format_float(r.wall_seconds),
        r.status.as_str().to_string(),
    ]
}

pub fn write_csv<W: Write>(out: W, records: &[SweepRecord]) -> Result<(), CsvError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record(record_fields(r))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<SweepRecord>, CsvError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(CsvError::Header(header));
    }
    let mut out = Vec::new();
    for (idx, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = idx + 1;
        let real = |k: usize| -> Result<f64, CsvError> {
            rec[k].trim().parse::<f64>().map_err(|_| CsvError::Field { row, field: CSV_HEADER[k], value: rec[k].to_string() })
        };
        let cond = if rec[9].trim().is_empty() { None } else { Some(real(9)?) };
        let status = match rec[11].trim() {
            "ok" => RunStatus::Ok,
            "solver_failed" => RunStatus::SolverFailed,
            other => return Err(CsvError::Field { row, field: "status", value: other.to_string() }),
        };
        out.push(SweepRecord {
            beta: real(0)?,
            epsilon: real(1)?,
            h: real(2)?,
            dt: real(3)?,
            mu: real(4)?,
            err_l2_final: real(5)?,
            err_l2h1: real(6)?,
            max_div: real(7)?,
            max_energy: real(8)?,
            cond_estimate: cond,
            wall_seconds: real(10)?,
            status,
        });
    }
    Ok(out)
}

/// Groups `(epsilon, value)` points by `beta`, in order of first appearance.
/// Failed runs and non-positive values are dropped.
pub fn series_by_beta(records: &[SweepRecord], value: impl Fn(&SweepRecord) -> f64) -> Vec<(f64, Vec<(f64, f64)>)> {
    let mut groups: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
    for r in records {
        let idx = match groups.iter().position(|(b, _)| *b == r.beta) {
            Some(i) => i,
            None => {
                groups.push((r.beta, Vec::new()));
                groups.len() - 1
            }
        };
        let v = value(r);
        if r.status == RunStatus::Ok && v.is_finite() && v > 0.0 && r.epsilon > 0.0 {
            groups[idx].1.push((r.epsilon, v));
        }
    }
    for (_, pts) in &mut groups {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    groups
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Self-contained log-log line chart, one polyline per series.
pub fn loglog_svg(title: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (w, h) = (640.0, 440.0);
    let (left, right, top, bottom) = (80.0, 150.0, 40.0, 60.0);
    let pts = series.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x.log10());
        x1 = x1.max(x.log10());
        y0 = y0.min(y.log10());
        y1 = y1.max(y.log10());
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let (x0, x1) = (x0.floor(), x1.ceil().max(x0.floor() + 1.0));
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let sx = |lx: f64| left + (lx - x0) / (x1 - x0) * (w - left - right);
    let sy = |ly: f64| h - bottom - (ly - y0) / (y1 - y0) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, (left + w - right) / 2.0, escape(title));
    for d in x0 as i32..=x1 as i32 {
        let x = sx(d as f64);
        let _ = writeln!(s, r##"<line x1="{x:.1}" y1="{top}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/>"##, h - bottom);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{d}</text>"#, h - bottom + 18.0);
    }
    for d in y0 as i32..=y1 as i32 {
        let y = sy(d as f64);
        let _ = writeln!(s, r##"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, w - right);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"#, left - 6.0, y + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
        w - left - right,
        h - top - bottom
    );
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">epsilon</text>"#, (left + w - right) / 2.0, h - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        (top + h - bottom) / 2.0,
        (top + h - bottom) / 2.0,
        escape(y_label)
    );
    for (k, (name, p)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let coords: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x.log10()), sy(y.log10()))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, coords.join(" "));
        let ly = top + 20.0 + 18.0 * k as f64;
        let lx = w - right + 12.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(name));
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(beta: f64, eps: f64, err: f64) -> SweepRecord {
        SweepRecord {
            beta,
            epsilon: eps,
            h: 0.1414213562373095,
            dt: 0.05,
            mu: 1.0,
            err_l2_final: err / 3.0,
            err_l2h1: err,
            max_div: 1.234e-13,
            max_energy: 12.5,
            cond_estimate: Some(1.0 / 3.0),
            wall_seconds: 0.25,
            status: RunStatus::Ok,
        }
    }

    #[test]
    fn round_trip() {
        let mut rows = vec![rec(0.0, 1.0, 0.1), rec(0.5, 1e-3, std::f64::consts::PI)];
        rows[1].cond_estimate = None;
        rows.push(SweepRecord { err_l2h1: f64::NAN, err_l2_final: f64::NAN, status: RunStatus::SolverFailed, ..rec(0.5, 1e-9, 0.0) });
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), "beta,epsilon,h,dt,mu,err_l2_final,err_l2h1,max_div,max_energy,cond_estimate,wall_seconds,status");
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[0], rows[0]);
        assert_eq!(back[1], rows[1]);
        assert!(back[2].err_l2h1.is_nan());
        assert_eq!(back[2].status, RunStatus::SolverFailed);
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(f64::INFINITY), "inf");
    }

    #[test]
    fn malformed() {
        assert!(matches!(read_csv("a,b\n1,2\n".as_bytes()), Err(CsvError::Header(_))));
        let bad = format!("{}\n0,1,x,0,0,0,0,0,0,,0,ok\n", CSV_HEADER.join(","));
        assert!(matches!(read_csv(bad.as_bytes()), Err(CsvError::Field { row: 1, field: "h", .. })));
    }

    #[test]
    fn svg_structure() {
        let rows = vec![rec(0.0, 1.0, 1.0), rec(0.0, 0.1, 0.3), rec(0.4, 1.0, 0.8), rec(0.4, 0.1, 0.1)];
        let series: Vec<(String, Vec<(f64, f64)>)> =
            series_by_beta(&rows, |r| r.err_l2h1).into_iter().map(|(b, p)| (format!("beta = {b}"), p)).collect();
        assert_eq!(series.len(), 2);
        let svg = loglog_svg("error vs epsilon", "err", &series);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("1e-1"));
    }
}
