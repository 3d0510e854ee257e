//! Projection matrices from basis-function weights to observations.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::mesh::Mesh;
use super::polygon::Polygon;
use crate::error::{Error, Result};
use crate::gmrf::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Point,
    Block,
}

/// Where a projection row comes from. `t` is the 1-based day for
/// space-time rows and `None` for single-time rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowMeta {
    pub t: Option<usize>,
    pub kind: SourceKind,
    pub source: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjMatrix {
    matrix: CsrMatrix,
    meta: Vec<RowMeta>,
}

impl ProjMatrix {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn meta(&self) -> &[RowMeta] {
        &self.meta
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.matrix.row(i)
    }
}

/// Grid of axis-aligned cells; cell `(i, j)` has id `j·nx + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    /// Smallest grid of `cell`-sized squares anchored at the lower-left
    /// corner of the polygon's bounding box that covers it.
    pub fn covering(domain: &Polygon, cell: f64) -> Self {
        let b = domain.bbox();
        GridSpec {
            x0: b[0],
            y0: b[1],
            dx: cell,
            dy: cell,
            nx: (((b[2] - b[0]) / cell) - 1e-9).ceil().max(1.0) as usize,
            ny: (((b[3] - b[1]) / cell) - 1e-9).ceil().max(1.0) as usize,
        }
    }

    pub fn cell(&self, id: usize) -> Block {
        let (i, j) = (id % self.nx, id / self.nx);
        Block::Rect {
            x0: self.x0 + i as f64 * self.dx,
            y0: self.y0 + j as f64 * self.dy,
            dx: self.dx,
            dy: self.dy,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    /// Half-open rectangle `[x0, x0+dx) × [y0, y0+dy)`.
    Rect {
        x0: f64,
        y0: f64,
        dx: f64,
        dy: f64,
    },
    Polygon(Polygon),
}

impl Block {
    pub fn area(&self) -> f64 {
        match self {
            Block::Rect { dx, dy, .. } => dx * dy,
            Block::Polygon(p) => p.area(),
        }
    }

    pub fn centroid(&self) -> [f64; 2] {
        match self {
            Block::Rect { x0, y0, dx, dy } => [x0 + 0.5 * dx, y0 + 0.5 * dy],
            Block::Polygon(p) => p.centroid(),
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        match self {
            Block::Rect { x0, y0, dx, dy } => {
                p[0] >= *x0 && p[0] < x0 + dx && p[1] >= *y0 && p[1] < y0 + dy
            }
            Block::Polygon(poly) => poly.contains(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSet {
    blocks: Vec<Block>,
    ids: Vec<usize>,
}

impl BlockSet {
    pub fn new(blocks: Vec<Block>, ids: Vec<usize>) -> Result<Self> {
        if blocks.len() != ids.len() {
            return Err(Error::config("block and id lists differ in length"));
        }
        let mut seen = HashSet::new();
        for (b, &id) in blocks.iter().zip(&ids) {
            if !(b.area() > 0.0) {
                return Err(Error::config(format!("block {id} has nonpositive area")));
            }
            if !seen.insert(id) {
                return Err(Error::config(format!("duplicate block id {id}")));
            }
        }
        Ok(BlockSet { blocks, ids })
    }

    /// Every cell of the grid.
    pub fn from_grid(grid: &GridSpec) -> Result<Self> {
        BlockSet::new(
            (0..grid.len()).map(|id| grid.cell(id)).collect(),
            (0..grid.len()).collect(),
        )
    }

    /// The cells of the grid whose centroid lies in `domain`.
    pub fn from_grid_within(grid: &GridSpec, domain: &Polygon) -> Result<Self> {
        let ids: Vec<usize> = (0..grid.len())
            .filter(|&id| domain.contains(grid.cell(id).centroid()))
            .collect();
        BlockSet::new(ids.iter().map(|&id| grid.cell(id)).collect(), ids)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    /// Position of block `id` in the set.
    pub fn index_of(&self, id: usize) -> Option<usize> {
        self.ids.iter().position(|&b| b == id)
    }
}

fn barycentric_row(mesh: &Mesh, p: [f64; 2]) -> Option<Vec<(usize, f64)>> {
    let (k, w) = mesh.locate(p)?;
    let t = mesh.triangles()[k];
    Some(
        (0..3)
            .filter(|&c| w[c] > 0.0)
            .map(|c| (t[c], w[c]))
            .collect(),
    )
}

/// Barycentric interpolation weights of each point.
pub fn point_projection(mesh: &Mesh, points: &[[f64; 2]]) -> Result<ProjMatrix> {
    let mut matrix = CsrMatrix::new(mesh.num_vertices());
    let mut meta = Vec::with_capacity(points.len());
    for (i, &p) in points.iter().enumerate() {
        let row = barycentric_row(mesh, p).ok_or_else(|| {
            Error::geometry(format!(
                "point {i} at ({}, {}) lies outside the mesh",
                p[0], p[1]
            ))
        })?;
        matrix.push_row(&row);
        meta.push(RowMeta {
            t: None,
            kind: SourceKind::Point,
            source: i,
        });
    }
    Ok(ProjMatrix { matrix, meta })
}

/// Equal weights `1/m` over the `m` vertices inside each block; blocks
/// without a vertex use the barycentric weights of their centroid.
pub fn block_projection(mesh: &Mesh, blocks: &BlockSet) -> Result<ProjMatrix> {
    let mut matrix = CsrMatrix::new(mesh.num_vertices());
    let mut meta = Vec::with_capacity(blocks.len());
    for (b, &id) in blocks.blocks().iter().zip(blocks.ids()) {
        let inside: Vec<usize> = (0..mesh.num_vertices())
            .filter(|&g| b.contains(mesh.vertices()[g]))
            .collect();
        if inside.is_empty() {
            let c = b.centroid();
            let row = barycentric_row(mesh, c).ok_or_else(|| {
                Error::geometry(format!(
                    "block {id} contains no mesh vertex and its centroid lies outside the mesh"
                ))
            })?;
            matrix.push_row(&row);
        } else {
            let w = 1.0 / inside.len() as f64;
            let row: Vec<(usize, f64)> = inside.iter().map(|&g| (g, w)).collect();
            matrix.push_row(&row);
        }
        meta.push(RowMeta {
            t: None,
            kind: SourceKind::Block,
            source: id,
        });
    }
    Ok(ProjMatrix { matrix, meta })
}

/// `diag(A, …, A)` over `t_len` days, keeping only the `(day, row)` pairs
/// listed in `observed` (days 1-based), in that order.
pub fn spacetime_blockdiag(
    a: &ProjMatrix,
    t_len: usize,
    observed: &[(usize, usize)],
) -> Result<ProjMatrix> {
    if t_len == 0 {
        return Err(Error::config("time horizon must be at least 1"));
    }
    let g = a.ncols();
    let mut matrix = CsrMatrix::new(g * t_len);
    let mut meta = Vec::with_capacity(observed.len());
    let mut seen = HashSet::with_capacity(observed.len());
    for &(t, r) in observed {
        if t == 0 || t > t_len {
            return Err(Error::config(format!("day {t} outside 1..={t_len}")));
        }
        if r >= a.nrows() {
            return Err(Error::config(format!(
                "row {r} outside the {} projection rows",
                a.nrows()
            )));
        }
        if !seen.insert((t, r)) {
            return Err(Error::config(format!(
                "duplicate observation (day {t}, row {r})"
            )));
        }
        let shift = (t - 1) * g;
        let row: Vec<(usize, f64)> = a.row(r).map(|(c, v)| (c + shift, v)).collect();
        matrix.push_row(&row);
        meta.push(RowMeta {
            t: Some(t),
            ..a.meta[r]
        });
    }
    Ok(ProjMatrix { matrix, meta })
}
