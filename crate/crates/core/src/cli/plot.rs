use std::fmt::Write as _;

use super::fit::SavedFit;
use super::table::{read_json, Table};
use super::{usage, CurveSet, PlotArgs};
use crate::error::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

pub(super) fn run(a: &PlotArgs) -> Result<()> {
    if !a.fit.is_file() {
        return Err(usage(format!(
            "fit summary {} not found; run `fit` first",
            a.fit.display()
        )));
    }
    let saved: SavedFit = read_json(&a.fit)?;
    if saved.model.coords.len() != 1 {
        return Err(usage("plot draws 1-D fits only"));
    }
    let table = Table::read(a.input.as_ref().unwrap_or(&saved.fitted_csv))?;
    let t = table.numeric(&saved.model.coords[0])?;
    let y = table.numeric("y")?;
    let fitted = table.numeric("fitted")?;

    let mut curves: Vec<(String, Vec<f64>)> = Vec::new();
    for h in table.headers() {
        let Some(name) = h.strip_prefix("comp_") else {
            continue;
        };
        let wanted = match a.curves {
            CurveSet::All => true,
            CurveSet::Basis => !name.starts_with("x:"),
            CurveSet::None => false,
        };
        if wanted {
            curves.push((name.to_string(), table.numeric(h)?));
        }
    }

    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&i, &j| t[i].total_cmp(&t[j]));

    let (tlo, thi) = range(t.iter().copied());
    let (vlo, vhi) = range(
        y.iter()
            .chain(&fitted)
            .chain(curves.iter().flat_map(|(_, c)| c))
            .copied(),
    );
    let sx = (WIDTH - 2.0 * MARGIN) / (thi - tlo);
    let sy = (HEIGHT - 2.0 * MARGIN) / (vhi - vlo);
    let px = |v: f64| MARGIN + (v - tlo) * sx;
    let py = |v: f64| MARGIN + (vhi - v) * sy;

    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(w, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<g class="axes" stroke="black" stroke-width="1"><line x1="{MARGIN}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{b}"/></g>"#,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
    );
    let _ = writeln!(
        w,
        r#"<g class="labels" font-family="sans-serif" font-size="11"><text x="{MARGIN}" y="{ty}">{tlo}</text><text x="{r}" y="{ty}" text-anchor="end">{thi}</text><text x="{lx}" y="{b}" text-anchor="end">{vlo}</text><text x="{lx}" y="{t}" text-anchor="end">{vhi}</text></g>"#,
        ty = HEIGHT - MARGIN + 16.0,
        r = WIDTH - MARGIN,
        lx = MARGIN - 4.0,
        b = HEIGHT - MARGIN,
        t = MARGIN + 4.0,
    );
    // Curves are drawn in data coordinates so the path data can be read back exactly.
    let _ = writeln!(
        w,
        r#"<g class="curves" fill="none" transform="matrix({sx} 0 0 {nsy} {ex} {ey})">"#,
        nsy = -sy,
        ex = MARGIN - tlo * sx,
        ey = MARGIN + vhi * sy,
    );
    for (k, (name, c)) in curves.iter().enumerate() {
        let _ = writeln!(
            w,
            r#"<path class="component" data-name="{}" stroke="{}" stroke-width="1" vector-effect="non-scaling-stroke" d="{}"/>"#,
            escape(name),
            PALETTE[k % PALETTE.len()],
            path_data(&order, &t, c)
        );
    }
    let _ = writeln!(
        w,
        r#"<path class="fitted" stroke="black" stroke-width="2" vector-effect="non-scaling-stroke" d="{}"/>"#,
        path_data(&order, &t, &fitted)
    );
    let _ = writeln!(w, "</g>");
    let _ = writeln!(w, r##"<g class="data" fill="#3182bd">"##);
    for &i in &order {
        let _ = writeln!(
            w,
            r#"<circle cx="{}" cy="{}" r="2.5"/>"#,
            px(t[i]),
            py(y[i])
        );
    }
    let _ = writeln!(w, "</g>");
    let _ = writeln!(w, "</svg>");

    std::fs::write(&a.output, svg).map_err(|source| Error::Io {
        path: a.output.clone(),
        source,
    })
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn path_data(order: &[usize], t: &[f64], v: &[f64]) -> String {
    let mut d = String::new();
    for (k, &i) in order.iter().enumerate() {
        let _ = write!(d, "{}{},{} ", if k == 0 { 'M' } else { 'L' }, t[i], v[i]);
    }
    d.pop();
    d
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
