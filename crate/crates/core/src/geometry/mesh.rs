//! Structured triangulations carrying the piecewise-linear basis.

use serde::{Deserialize, Serialize};

use super::polygon::Polygon;
use crate::error::{Error, Result};

/// Barycentric tolerance for deciding that a point lies in a triangle.
const LOCATE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Zone {
    Inner,
    Outer,
}

#[derive(Debug, Clone, PartialEq)]
struct Lattice {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

/// Triangulation with counter-clockwise triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    zone: Vec<Zone>,
    max_edge_inner: f64,
    max_edge_outer: f64,
    outer_pad: f64,
    lattice: Option<Lattice>,
}

/// Coordinates along one axis: the domain extent at pitch ≤ `h_in`, plus
/// `pad` on either side at pitch ≤ `h_out`.
fn axis(lo: f64, hi: f64, h_in: f64, pad: f64, h_out: f64) -> Vec<f64> {
    let len = hi - lo;
    let n_in = ((len / h_in) - 1e-9).ceil().max(1.0) as usize;
    let n_out = if pad > 0.0 {
        ((pad / h_out) - 1e-9).ceil().max(1.0) as usize
    } else {
        0
    };
    let mut xs = Vec::with_capacity(n_in + 1 + 2 * n_out);
    for k in 0..n_out {
        xs.push(lo - pad + k as f64 * pad / n_out as f64);
    }
    for k in 0..n_in {
        xs.push(lo + k as f64 * len / n_in as f64);
    }
    xs.push(hi);
    for k in 1..=n_out {
        xs.push(if k == n_out {
            hi + pad
        } else {
            hi + k as f64 * pad / n_out as f64
        });
    }
    xs
}

/// Lattice over the padded bounding box of `domain`, each cell split along
/// its rising diagonal. Vertices inside the polygon are flagged inner.
pub fn build_mesh(
    domain: &Polygon,
    max_edge_inner: f64,
    outer_pad: f64,
    max_edge_outer: f64,
) -> Result<Mesh> {
    if !(max_edge_inner > 0.0 && max_edge_inner.is_finite()) {
        return Err(Error::config(format!(
            "max_edge_inner must be positive, got {max_edge_inner}"
        )));
    }
    if !(max_edge_outer > 0.0 && max_edge_outer.is_finite()) {
        return Err(Error::config(format!(
            "max_edge_outer must be positive, got {max_edge_outer}"
        )));
    }
    if max_edge_outer < max_edge_inner {
        return Err(Error::config(format!(
            "max_edge_outer ({max_edge_outer}) is smaller than max_edge_inner ({max_edge_inner})"
        )));
    }
    if !(outer_pad >= 0.0 && outer_pad.is_finite()) {
        return Err(Error::config(format!(
            "outer_pad must be nonnegative, got {outer_pad}"
        )));
    }
    let b = domain.bbox();
    let xs = axis(b[0], b[2], max_edge_inner, outer_pad, max_edge_outer);
    let ys = axis(b[1], b[3], max_edge_inner, outer_pad, max_edge_outer);
    let (nx, ny) = (xs.len(), ys.len());
    let mut vertices = Vec::with_capacity(nx * ny);
    for &y in &ys {
        for &x in &xs {
            vertices.push([x, y]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let v00 = j * nx + i;
            let (v10, v01, v11) = (v00 + 1, v00 + nx, v00 + nx + 1);
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let zone = vertices
        .iter()
        .map(|&p| {
            if domain.contains(p) {
                Zone::Inner
            } else {
                Zone::Outer
            }
        })
        .collect();
    Ok(Mesh {
        vertices,
        triangles,
        zone,
        max_edge_inner,
        max_edge_outer,
        outer_pad,
        lattice: Some(Lattice { xs, ys }),
    })
}

impl Mesh {
    /// General triangulation; every vertex is flagged inner and the edge
    /// bounds are taken from the data.
    pub fn from_parts(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (k, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= n) {
                return Err(Error::geometry(format!(
                    "triangle {k} references a vertex out of range"
                )));
            }
            if signed_area(&vertices, t) <= 0.0 {
                return Err(Error::geometry(format!(
                    "triangle {k} is not counter-clockwise with positive area"
                )));
            }
        }
        let mut m = Mesh {
            zone: vec![Zone::Inner; n],
            vertices,
            triangles,
            max_edge_inner: 0.0,
            max_edge_outer: 0.0,
            outer_pad: 0.0,
            lattice: None,
        };
        let longest = m
            .edges()
            .map(|(a, b)| m.edge_length(a, b))
            .fold(0.0, f64::max);
        m.max_edge_inner = longest;
        m.max_edge_outer = longest;
        Ok(m)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn zone(&self) -> &[Zone] {
        &self.zone
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn max_edge_inner(&self) -> f64 {
        self.max_edge_inner
    }

    pub fn max_edge_outer(&self) -> f64 {
        self.max_edge_outer
    }

    pub fn outer_pad(&self) -> f64 {
        self.outer_pad
    }

    pub fn triangle_area(&self, k: usize) -> f64 {
        signed_area(&self.vertices, &self.triangles[k])
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|k| self.triangle_area(k))
            .sum()
    }

    /// Each undirected edge once, as `(low, high)` vertex pairs in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        e.sort_unstable();
        e.dedup();
        e.into_iter()
    }

    pub fn edge_length(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (self.vertices[a], self.vertices[b]);
        (p[0] - q[0]).hypot(p[1] - q[1])
    }

    /// Barycentric coordinates of `p` in triangle `k`.
    pub fn barycentric(&self, k: usize, p: [f64; 2]) -> [f64; 3] {
        let t = self.triangles[k];
        let (a, b, c) = (
            self.vertices[t[0]],
            self.vertices[t[1]],
            self.vertices[t[2]],
        );
        let d = (b[1] - c[1]) * (a[0] - c[0]) + (c[0] - b[0]) * (a[1] - c[1]);
        let l0 = ((b[1] - c[1]) * (p[0] - c[0]) + (c[0] - b[0]) * (p[1] - c[1])) / d;
        let l1 = ((c[1] - a[1]) * (p[0] - c[0]) + (a[0] - c[0]) * (p[1] - c[1])) / d;
        [l0, l1, 1.0 - l0 - l1]
    }

    /// Lowest-index triangle containing `p` and the (clamped, renormalized)
    /// barycentric weights, or `None` outside the mesh.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let test = |k: usize| -> Option<(usize, [f64; 3])> {
            let l = self.barycentric(k, p);
            if l.iter().all(|&v| v >= -LOCATE_TOL) {
                let c = l.map(|v| v.max(0.0));
                let s: f64 = c.iter().sum();
                Some((k, c.map(|v| v / s)))
            } else {
                None
            }
        };
        match &self.lattice {
            Some(lat) => {
                let nx = lat.xs.len();
                let tol = LOCATE_TOL * self.max_edge_outer.max(1.0);
                let cand = |xs: &[f64], x: f64| -> Vec<usize> {
                    let start = xs[1..].partition_point(|&v| v < x - tol);
                    (start..xs.len() - 1)
                        .take_while(|&i| xs[i] <= x + tol)
                        .collect()
                };
                let ci = cand(&lat.xs, p[0]);
                let cj = cand(&lat.ys, p[1]);
                let mut tris: Vec<usize> = cj
                    .iter()
                    .flat_map(|&j| {
                        ci.iter().flat_map(move |&i| {
                            [2 * (j * (nx - 1) + i), 2 * (j * (nx - 1) + i) + 1]
                        })
                    })
                    .collect();
                tris.sort_unstable();
                tris.into_iter().find_map(test)
            }
            None => (0..self.triangles.len()).find_map(test),
        }
    }
}

fn signed_area(v: &[[f64; 2]], t: &[usize; 3]) -> f64 {
    let (a, b, c) = (v[t[0]], v[t[1]], v[t[2]]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}
