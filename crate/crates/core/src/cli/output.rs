//! CSV and SVG emission with fixed float formatting.

use crate::error::{Error, Result};
use crate::simulate::EnergyTrace;
use std::fmt::Write as _;
use std::path::Path;

/// Shortest representation that parses back to the same double.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Writes a header and rows of already formatted fields.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_pairs(path: &Path, header: [&str; 2], rows: &[(String, f64)]) -> Result<()> {
    let rows: Vec<Vec<String>> = rows.iter().map(|(k, v)| vec![k.clone(), fmt_f64(*v)]).collect();
    write_csv(path, &header, &rows)
}

pub fn write_trace(path: &Path, trace: &EnergyTrace) -> Result<()> {
    let mut header = vec!["t".to_string(), "E_total".into(), "E_kin".into(), "E_pot".into()];
    header.extend(trace.channels.iter().map(|c| format!("obs_{c}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..trace.len())
        .map(|i| {
            let mut r = vec![
                fmt_f64(trace.t[i]),
                fmt_f64(trace.total[i]),
                fmt_f64(trace.kinetic[i]),
                fmt_f64(trace.potential[i]),
            ];
            r.extend(trace.obs[i].iter().map(|v| fmt_f64(*v)));
            r
        })
        .collect();
    write_csv(path, &header, &rows)
}

/// Line plot of log10 of the total energy against time.
pub fn trace_svg(trace: &EnergyTrace) -> String {
    let (w, h, m) = (640.0, 400.0, 60.0);
    let pts: Vec<(f64, f64)> =
        trace.t.iter().zip(&trace.total).filter(|(_, e)| **e > 0.0).map(|(t, e)| (*t, e.log10())).collect();
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{m} {m} V{} H{}" fill="none" stroke="black"/>"#,
        h - m,
        w - m
    );
    if let (Some(first), Some(last)) = (pts.first(), pts.last()) {
        let (t0, t1) = (first.0, last.0.max(first.0 + f64::MIN_POSITIVE));
        let lo = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let x = |t: f64| m + (t - t0) / (t1 - t0) * (w - 2.0 * m);
        let y = |v: f64| h - m - (v - lo) / span * (h - 2.0 * m);
        let coords: Vec<String> = pts.iter().map(|(t, v)| format!("{:.2},{:.2}", x(*t), y(*v))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="steelblue"/>"#, coords.join(" "));
        let label = |s: &mut String, x: f64, y: f64, anchor: &str, text: String| {
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{y:.2}" font-size="12" text-anchor="{anchor}">{text}</text>"#);
        };
        label(&mut s, m - 6.0, y(hi) + 4.0, "end", format!("{hi:.3}"));
        label(&mut s, m - 6.0, y(lo) + 4.0, "end", format!("{lo:.3}"));
        label(&mut s, m, h - m + 18.0, "middle", fmt_f64(t0));
        label(&mut s, w - m, h - m + 18.0, "middle", fmt_f64(t1));
        label(&mut s, w / 2.0, h - 15.0, "middle", "t".into());
        label(&mut s, 15.0, h / 2.0, "middle", "log10 E".into());
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.0, 1.0, -2.5, 1e-20, 6.02214076e23, 0.1 + 0.2, 123456.789, f64::MIN_POSITIVE, 1e300] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(1e-20), "1e-20");
        assert_eq!(fmt_f64(0.5), "0.5");
    }

    #[test]
    fn svg_is_closed() {
        let trace = EnergyTrace {
            t: vec![0.0, 1.0, 2.0],
            total: vec![1.0, 0.5, 0.25],
            kinetic: vec![0.0; 3],
            potential: vec![0.0; 3],
            channels: vec![],
            obs: vec![vec![]; 3],
        };
        let s = trace_svg(&trace);
        assert!(s.starts_with("<svg") && s.ends_with("</svg>\n"));
        assert!(s.contains("<polyline"));
    }
}
