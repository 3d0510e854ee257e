//! Piecewise-linear finite elements and the spatial precision.

use crate::error::{Error, Result};
use crate::geometry::Mesh;
use crate::gmrf::{factorize, SparseSym};

/// Lumped mass and stiffness matrices of the P1 basis.
#[derive(Debug, Clone)]
pub struct FemMatrices {
    pub c_lumped: Vec<f64>,
    pub g_stiff: SparseSym,
}

pub fn fem_matrices(mesh: &Mesh) -> Result<FemMatrices> {
    let n = mesh.num_vertices();
    let v = mesh.vertices();
    let mut c = vec![0.0; n];
    let mut trip = Vec::with_capacity(mesh.triangles().len() * 6);
    for (k, t) in mesh.triangles().iter().enumerate() {
        let p = [v[t[0]], v[t[1]], v[t[2]]];
        let area = 0.5
            * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
        if area.abs() < 1e-14 {
            return Err(Error::geometry(format!(
                "triangle {k} is degenerate (area {area:e})"
            )));
        }
        let area = area.abs();
        // Gradient of hat i is the rotated opposite edge over twice the area.
        let grad: Vec<[f64; 2]> = (0..3)
            .map(|i| {
                let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
                [a[1] - b[1], b[0] - a[0]]
            })
            .collect();
        for i in 0..3 {
            c[t[i]] += area / 3.0;
            for j in 0..=i {
                let g = (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]) / (4.0 * area);
                trip.push((t[i], t[j], g));
            }
        }
    }
    Ok(FemMatrices {
        c_lumped: c,
        g_stiff: SparseSym::from_triplets(n, &trip)?,
    })
}

/// The three matrices `C`, `G` and `G·C⁻¹·G` laid out on one shared lower
/// pattern, so that `Q_S(κ, τ)` is a cheap linear combination.
#[derive(Debug, Clone)]
pub struct SpdeOperator {
    pattern: SparseSym,
    c: Vec<f64>,
    g: Vec<f64>,
    k: Vec<f64>,
}

impl SpdeOperator {
    pub fn new(fem: &FemMatrices) -> Self {
        let gm = &fem.g_stiff;
        let n = gm.dim();
        let mut nbrs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (r, c, v) in gm.iter() {
            nbrs[c].push((r, v));
            if r != c {
                nbrs[r].push((c, v));
            }
        }
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (m, list) in nbrs.iter().enumerate() {
            let w = 1.0 / fem.c_lumped[m];
            for &(i, gi) in list {
                for &(j, gj) in list {
                    if i >= j {
                        cols[j].push((i, gi * gj * w));
                    }
                }
            }
        }
        let pattern = SparseSym::from_columns(n, cols);
        let mut c = vec![0.0; pattern.stored_nnz()];
        let mut g = vec![0.0; pattern.stored_nnz()];
        for j in 0..n {
            c[pattern.col_ptr()[j]] = fem.c_lumped[j];
        }
        for (r, col, v) in gm.iter() {
            g[Self::slot(&pattern, r, col)] = v;
        }
        let k = pattern.values().to_vec();
        SpdeOperator { pattern, c, g, k }
    }

    fn slot(pattern: &SparseSym, r: usize, c: usize) -> usize {
        let lo = pattern.col_ptr()[c];
        let hi = pattern.col_ptr()[c + 1];
        lo + pattern.row_idx()[lo..hi]
            .binary_search(&r)
            .expect("entry outside the operator pattern")
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    /// Shared lower pattern (values are `G·C⁻¹·G`).
    pub fn pattern(&self) -> &SparseSym {
        &self.pattern
    }

    /// Stored values of `τ²(κ⁴C + 2κ²G + G·C⁻¹·G)`.
    pub fn values(&self, kappa: f64, tau_omega: f64) -> Vec<f64> {
        let t2 = tau_omega * tau_omega;
        let k2 = kappa * kappa;
        let (a, b) = (t2 * k2 * k2, 2.0 * t2 * k2);
        (0..self.k.len())
            .map(|p| a * self.c[p] + b * self.g[p] + t2 * self.k[p])
            .collect()
    }

    pub fn precision(&self, kappa: f64, tau_omega: f64) -> SparseSym {
        self.pattern.with_values(self.values(kappa, tau_omega))
    }
}

/// Spatial precision `Q_S`, checked to be positive definite.
pub fn precision_spatial(fem: &FemMatrices, kappa: f64, tau_omega: f64) -> Result<SparseSym> {
    if !(kappa > 0.0 && tau_omega > 0.0) {
        return Err(Error::config(format!(
            "kappa and tau_omega must be positive, got {kappa} and {tau_omega}"
        )));
    }
    let q = SpdeOperator::new(fem).precision(kappa, tau_omega);
    factorize(&q)?;
    Ok(q)
}
