//! Temporal AR(1) precision and the space-time Kronecker product.

use super::sparse::SparseSym;
use crate::error::{Error, Result};

/// Precision of a stationary unit-innovation AR(1) chain of length `t`:
/// tridiagonal with diagonal `(1, 1+ρ², …, 1+ρ², 1)` and off-diagonal `−ρ`.
/// A single time point gives the 1×1 identity (no temporal structure).
pub fn precision_ar1(rho: f64, t: usize) -> Result<SparseSym> {
    if !(rho.abs() < 1.0) {
        return Err(Error::config(format!(
            "AR(1) correlation must satisfy |rho| < 1, got {rho}"
        )));
    }
    if t == 0 {
        return Err(Error::config("AR(1) chain needs at least one time point"));
    }
    let mut cols = Vec::with_capacity(t);
    for i in 0..t {
        let diag = if i == 0 || i + 1 == t {
            1.0
        } else {
            1.0 + rho * rho
        };
        let mut col = vec![(i, diag)];
        if i + 1 < t {
            col.push((i + 1, -rho));
        }
        cols.push(col);
    }
    Ok(SparseSym::from_columns(t, cols))
}

/// `log det` of [`precision_ar1`].
pub fn ar1_logdet(rho: f64, t: usize) -> f64 {
    if t <= 1 {
        0.0
    } else {
        (1.0 - rho * rho).ln()
    }
}

/// Kronecker product `A ⊗ B` with the first factor outermost, so for a
/// temporal `A` the result is time-major: block `(s, t)` is `A[s,t]·B`.
pub fn kron_precision(a: &SparseSym, b: &SparseSym) -> SparseSym {
    let (na, nb) = (a.dim(), b.dim());
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); na * nb];
    // Lower triangle of A ⊗ B: for a stored A entry (ra, ca) with ra > ca
    // every B entry contributes in both orientations; on the diagonal only
    // the lower triangle of B is needed.
    for (ra, ca, va) in a.iter() {
        for jb in 0..nb {
            for p in b.col_ptr()[jb]..b.col_ptr()[jb + 1] {
                let ib = b.row_idx()[p];
                let v = va * b.values()[p];
                let (r, c) = (ra * nb + ib, ca * nb + jb);
                cols[c].push((r, v));
                if ra != ca && ib != jb {
                    cols[ca * nb + ib].push((ra * nb + jb, v));
                }
            }
        }
    }
    SparseSym::from_columns(na * nb, cols)
}
