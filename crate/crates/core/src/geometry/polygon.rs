//! Simple polygons in the plane.

use crate::error::{Error, Result};

const EPS: f64 = 1e-12;

/// A simple polygon stored counter-clockwise, closed implicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    ring: Vec<[f64; 2]>,
}

impl Polygon {
    /// Validates and normalizes the ring orientation. A repeated closing
    /// vertex is dropped.
    pub fn new(mut ring: Vec<[f64; 2]>) -> Result<Self> {
        if ring.len() > 1 && ring.first() == ring.last() {
            ring.pop();
        }
        if ring.len() < 3 {
            return Err(Error::Domain(format!(
                "polygon needs at least 3 vertices, got {}",
                ring.len()
            )));
        }
        if ring.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::Domain("polygon has non-finite coordinates".into()));
        }
        let area = signed_area(&ring);
        let scale = bbox_of(&ring)
            .map(|b| (b[2] - b[0]).max(b[3] - b[1]))
            .unwrap_or(0.0);
        if !(area.abs() > EPS * scale * scale) {
            return Err(Error::Domain("polygon is degenerate (zero area)".into()));
        }
        if let Some((i, j)) = first_crossing(&ring) {
            return Err(Error::Domain(format!(
                "polygon edges {i} and {j} intersect"
            )));
        }
        if area < 0.0 {
            ring.reverse();
        }
        Ok(Polygon { ring })
    }

    /// Axis-aligned rectangle.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Polygon::new(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    }

    /// Built-in study region: an outline shaped like the western basin of
    /// Lake Erie, in degrees longitude / latitude.
    pub fn western_basin() -> Self {
        let ring = vec![
            [-83.47, 41.68],
            [-83.38, 41.62],
            [-83.18, 41.56],
            [-83.00, 41.50],
            [-82.85, 41.45],
            [-82.70, 41.42],
            [-82.58, 41.44],
            [-82.55, 41.55],
            [-82.62, 41.70],
            [-82.75, 41.82],
            [-82.90, 41.92],
            [-83.05, 41.96],
            [-83.20, 41.97],
            [-83.35, 41.90],
            [-83.45, 41.80],
        ];
        Polygon::new(ring).expect("built-in polygon is valid")
    }

    pub fn ring(&self) -> &[[f64; 2]] {
        &self.ring
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.ring)
    }

    /// Area centroid.
    pub fn centroid(&self) -> [f64; 2] {
        let n = self.ring.len();
        let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
        // Shift to the first vertex for conditioning.
        let o = self.ring[0];
        for k in 0..n {
            let p = self.ring[k];
            let q = self.ring[(k + 1) % n];
            let (px, py, qx, qy) = (p[0] - o[0], p[1] - o[1], q[0] - o[0], q[1] - o[1]);
            let cross = px * qy - qx * py;
            a2 += cross;
            cx += (px + qx) * cross;
            cy += (py + qy) * cross;
        }
        [o[0] + cx / (3.0 * a2), o[1] + cy / (3.0 * a2)]
    }

    /// `[xmin, ymin, xmax, ymax]`.
    pub fn bbox(&self) -> [f64; 4] {
        bbox_of(&self.ring).unwrap()
    }

    /// Point-in-polygon; points on the boundary count as inside.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let n = self.ring.len();
        let mut inside = false;
        for k in 0..n {
            let a = self.ring[k];
            let b = self.ring[(k + 1) % n];
            if on_segment(p, a, b) {
                return true;
            }
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

fn signed_area(ring: &[[f64; 2]]) -> f64 {
    let n = ring.len();
    let o = ring[0];
    let mut s = 0.0;
    for k in 0..n {
        let p = ring[k];
        let q = ring[(k + 1) % n];
        s += (p[0] - o[0]) * (q[1] - o[1]) - (q[0] - o[0]) * (p[1] - o[1]);
    }
    0.5 * s
}

fn bbox_of(ring: &[[f64; 2]]) -> Option<[f64; 4]> {
    let first = ring.first()?;
    let mut b = [first[0], first[1], first[0], first[1]];
    for p in ring {
        b[0] = b[0].min(p[0]);
        b[1] = b[1].min(p[1]);
        b[2] = b[2].max(p[0]);
        b[3] = b[3].max(p[1]);
    }
    Some(b)
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    if cross(a, b, p).abs() > EPS * len.max(1.0) {
        return false;
    }
    p[0] >= a[0].min(b[0]) - EPS
        && p[0] <= a[0].max(b[0]) + EPS
        && p[1] >= a[1].min(b[1]) - EPS
        && p[1] <= a[1].max(b[1]) + EPS
}

fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    on_segment(a, c, d) || on_segment(b, c, d) || on_segment(c, a, b) || on_segment(d, a, b)
}

/// First pair of non-adjacent edges that touch, if any.
fn first_crossing(ring: &[[f64; 2]]) -> Option<(usize, usize)> {
    let n = ring.len();
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(ring[i], ring[(i + 1) % n], ring[j], ring[(j + 1) % n]) {
                return Some((i, j));
            }
        }
    }
    None
}
