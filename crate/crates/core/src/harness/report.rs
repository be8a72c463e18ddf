//! CSV and SVG emission for sweep results.

use super::SweepRow;
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

const CSV_HEADER: &str = "delta,mean_regret,stderr,reference,collisions,trials,seed_base";

/// Writes the sweep table. Columns are fixed; floats use the shortest
/// round-trip representation so `parse(emit(x)) == x`.
pub fn emit_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    std::fs::write(path, render_csv(rows)?)?;
    Ok(())
}

pub fn render_csv(rows: &[SweepRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Empty("no sweep rows to emit".into()));
    }
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.delta, r.mean_regret, r.stderr, r.reference, r.collisions, r.trials, r.seed_base
        )
        .expect("string write");
    }
    Ok(out)
}

pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(Error::Parse(format!("bad csv header: {other:?}"))),
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(Error::Parse(format!("bad csv row: {line}")));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse(format!("bad float {s}")))
        };
        let int = |s: &str| -> Result<u64> {
            s.parse().map_err(|_| Error::Parse(format!("bad int {s}")))
        };
        rows.push(SweepRow {
            delta: num(f[0])?,
            mean_regret: num(f[1])?,
            stderr: num(f[2])?,
            reference: num(f[3])?,
            collisions: int(f[4])?,
            trials: int(f[5])? as usize,
            seed_base: int(f[6])?,
        });
    }
    Ok(rows)
}

/// Log-log plot of measured regret against the reference shape, the
/// latter scaled to match the measured value at the largest threshold.
pub fn emit_plot(rows: &[SweepRow], path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(rows)?)?;
    Ok(())
}

pub fn render_svg(rows: &[SweepRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Empty("no sweep rows to plot".into()));
    }
    let (w, h, ml, mb, mt, mr) = (640.0, 480.0, 70.0, 50.0, 20.0, 20.0);
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| a.delta.partial_cmp(&b.delta).unwrap());

    let anchor = rows
        .iter()
        .max_by(|a, b| a.delta.partial_cmp(&b.delta).unwrap())
        .unwrap();
    let scale = if anchor.reference > 0.0 {
        anchor.mean_regret.max(1e-9) / anchor.reference
    } else {
        1.0
    };

    let xs: Vec<f64> = rows.iter().map(|r| r.delta.max(1e-12).log10()).collect();
    let mut ys: Vec<f64> = rows
        .iter()
        .map(|r| r.mean_regret.max(1e-9).log10())
        .collect();
    ys.extend(rows.iter().map(|r| (r.reference * scale).max(1e-9).log10()));
    let (x0, x1) = bounds(&xs);
    let (y0, y1) = bounds(&ys);
    let px = |x: f64| ml + (x - x0) / (x1 - x0).max(1e-12) * (w - ml - mr);
    let py = |y: f64| h - mb - (y - y0) / (y1 - y0).max(1e-12) * (h - mb - mt);

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    )
    .unwrap();
    writeln!(
        svg,
        r#"<rect width="{w}" height="{h}" fill="white"/>
<line x1="{ml}" y1="{}" x2="{}" y2="{}" stroke="black"/>
<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{}" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle" font-size="13">gap threshold (log)</text>
<text x="18" y="{}" transform="rotate(-90 18 {})" text-anchor="middle" font-size="13">regret (log)</text>"#,
        h - mb,
        w - mr,
        h - mb,
        h - mb,
        (w + ml - mr) / 2.0,
        h - 12.0,
        (h - mb + mt) / 2.0,
        (h - mb + mt) / 2.0,
    )
    .unwrap();

    let ref_points: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{:.2},{:.2}",
                px(r.delta.max(1e-12).log10()),
                py((r.reference * scale).max(1e-9).log10())
            )
        })
        .collect();
    writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#888" stroke-dasharray="6 3" stroke-width="1.5"/>"##,
        ref_points.join(" ")
    )
    .unwrap();

    for r in &rows {
        writeln!(
            svg,
            r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#1f6fb2"/>"##,
            px(r.delta.max(1e-12).log10()),
            py(r.mean_regret.max(1e-9).log10())
        )
        .unwrap();
    }
    writeln!(
        svg,
        r##"<text x="{}" y="{}" font-size="12" fill="#1f6fb2">measured</text>
<text x="{}" y="{}" font-size="12" fill="#888">reference (scaled)</text>
</svg>"##,
        w - 170.0,
        mt + 16.0,
        w - 170.0,
        mt + 32.0
    )
    .unwrap();
    Ok(svg)
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if (hi - lo).abs() < 1e-12 {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}
