//! Static report: per-day posterior mean and sd maps as one SVG, and the
//! prediction RMSE by day.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::files::{MeshFile, PredictionKind, PredictionRow, TruthRow};
use crate::error::{Error, Result};
use crate::geometry::Zone;
use crate::study::compute_pred_rmse;

const PANEL: f64 = 160.0;
const GAP: f64 = 12.0;
const TITLE: f64 = 18.0;

// Viridis anchors at 0, 0.25, 0.5, 0.75, 1.
const RAMP: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

fn color(u: f64) -> String {
    let u = if u.is_finite() { u.clamp(0.0, 1.0) } else { 0.0 };
    let s = u * (RAMP.len() - 1) as f64;
    let k = (s.floor() as usize).min(RAMP.len() - 2);
    let f = s - k as f64;
    let c: Vec<u8> = (0..3)
        .map(|i| (RAMP[k][i] + f * (RAMP[k + 1][i] - RAMP[k][i])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Per-day vertex values `values[t-1][v]` of one statistic.
fn vertex_fields(mesh: &MeshFile, preds: &[PredictionRow], sd: bool) -> Result<Vec<Vec<f64>>> {
    let g = mesh.vertices.len();
    let mut days: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for p in preds.iter().filter(|p| p.kind == PredictionKind::Vertex) {
        if p.id >= g {
            return Err(Error::config(format!("prediction for vertex {} but the mesh has {g}", p.id)));
        }
        days.entry(p.t).or_insert_with(|| vec![f64::NAN; g])[p.id] = if sd { p.sd } else { p.mean };
    }
    if days.is_empty() {
        return Err(Error::config("no vertex predictions to draw"));
    }
    let t_len = *days.keys().last().unwrap();
    (1..=t_len)
        .map(|t| {
            let v = days.remove(&t).ok_or_else(|| Error::config(format!("no vertex predictions for day {t}")))?;
            if v.iter().any(|x| x.is_nan()) {
                return Err(Error::config(format!("day {t} lacks predictions for some vertices")));
            }
            Ok(v)
        })
        .collect()
}

/// Renders a `2 × T` panel grid: posterior mean on top, sd below, each row
/// on one colour scale pooled over the displayed days.
pub fn render_report(mesh: &MeshFile, preds: &[PredictionRow]) -> Result<String> {
    let rows = [("mean", vertex_fields(mesh, preds, false)?), ("sd", vertex_fields(mesh, preds, true)?)];
    let shown: Vec<&[usize; 3]> = mesh
        .triangles
        .iter()
        .filter(|t| t.iter().all(|&v| mesh.zone[v] == Zone::Inner))
        .collect();
    let shown: Vec<&[usize; 3]> = if shown.is_empty() { mesh.triangles.iter().collect() } else { shown };
    let used: Vec<usize> = {
        let mut v: Vec<usize> = shown.iter().flat_map(|t| t.iter().copied()).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &v in &used {
        let p = mesh.vertices[v];
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let scale = PANEL / (x1 - x0).max(y1 - y0).max(1e-12);
    let (pw, ph) = ((x1 - x0) * scale, (y1 - y0) * scale);
    let t_len = rows[0].1.len();
    let width = GAP + t_len as f64 * (pw + GAP);
    let height = 2.0 * (TITLE + ph + GAP) + GAP;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.1} {height:.1}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    for (r, (label, fields)) in rows.iter().enumerate() {
        let (lo, hi) = fields
            .iter()
            .flat_map(|f| used.iter().map(move |&v| f[v]))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        let top = GAP + r as f64 * (TITLE + ph + GAP);
        for (t, f) in fields.iter().enumerate() {
            let left = GAP + t as f64 * (pw + GAP);
            writeln!(s, r#"<g class="panel" data-stat="{label}" data-day="{}">"#, t + 1).unwrap();
            writeln!(s, r#"<text x="{left:.1}" y="{:.1}">{label} day {}</text>"#, top + 12.0, t + 1).unwrap();
            for tri in &shown {
                let val = (f[tri[0]] + f[tri[1]] + f[tri[2]]) / 3.0;
                let mut pts = String::new();
                for &v in tri.iter() {
                    let p = mesh.vertices[v];
                    let px = left + (p[0] - x0) * scale;
                    let py = top + TITLE + (y1 - p[1]) * scale;
                    write!(pts, "{px:.2},{py:.2} ").unwrap();
                }
                let c = color((val - lo) / span);
                writeln!(s, r#"<polygon points="{}" fill="{c}" stroke="{c}" stroke-width="0.3"/>"#, pts.trim_end()).unwrap();
            }
            writeln!(s, "</g>").unwrap();
        }
        writeln!(
            s,
            r#"<text class="scale" x="{:.1}" y="{:.1}" text-anchor="end">{label} scale {lo:.4} to {hi:.4}</text>"#,
            width - GAP,
            top + 12.0
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// RMSE of point predictions against the held-out truth, per day.
pub fn rmse_by_day(preds: &[PredictionRow], truth: &[TruthRow]) -> Result<Vec<(usize, f64, usize)>> {
    let pred: BTreeMap<(usize, usize), f64> = preds
        .iter()
        .filter(|p| p.kind == PredictionKind::Point)
        .map(|p| ((p.t, p.id), p.mean))
        .collect();
    let mut by_day: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in truth {
        let p = pred.get(&(r.t, r.location_id)).ok_or_else(|| {
            Error::config(format!("no point prediction for location {} on day {}", r.location_id, r.t))
        })?;
        let e = by_day.entry(r.t).or_default();
        e.0.push(*p);
        e.1.push(r.value);
    }
    let days: Vec<usize> = by_day.keys().copied().collect();
    let (p, y): (Vec<Vec<f64>>, Vec<Vec<f64>>) = by_day.into_values().unzip();
    let rmse = compute_pred_rmse(&p, &y)?;
    Ok(days.into_iter().zip(rmse).zip(y.iter().map(Vec::len)).map(|((d, r), n)| (d, r, n)).collect())
}
