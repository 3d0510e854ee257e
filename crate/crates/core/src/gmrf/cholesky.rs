//! Sparse Cholesky factorization `P A Pᵀ = L Lᵀ`.
//!
//! The symbolic phase (ordering, elimination tree, supernode partition and
//! row structure of `L`) depends only on the sparsity pattern and is shared
//! through an [`Arc`] by every numeric factorization with that pattern.
//! Columns of `L` with nested structure are grouped into supernodes stored
//! as dense column-major panels; the numeric phase is left-looking and
//! hands the dense block work to `faer`.

use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::llt::factor::{
    cholesky_in_place, cholesky_in_place_scratch, LltRegularization,
};
use faer::linalg::matmul::matmul;
use faer::linalg::triangular_solve::{
    solve_lower_triangular_in_place, solve_upper_triangular_in_place,
};
use faer::reborrow::{IntoConst, ReborrowMut};
use faer::{Accum, MatMut, MatRef, Par};

use super::ordering::{invert, minimum_degree, nested_dissection};
use super::sparse::SparseSym;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Below this many multiply-adds a block update is done with plain loops.
const SMALL_BLOCK: usize = 2048;

/// Minimum degree is only tried up to this dimension; beyond it the
/// ordering itself gets slow.
const MD_LIMIT: usize = 2000;

/// Diagonal jitter levels, as multiples of the mean diagonal, tried in turn
/// when a factorization breaks down.
pub const JITTER_LEVELS: [f64; 3] = [1e-10, 1e-8, 1e-6];

#[derive(Debug)]
pub struct SymbolicCholesky {
    n: usize,
    /// `perm[k]` is the original index placed at position `k`.
    perm: Vec<usize>,
    pinv: Vec<usize>,
    // Pattern of the input, kept to validate numeric calls.
    a_col_ptr: Vec<usize>,
    a_row_idx: Vec<usize>,
    // Permuted lower triangle: rows and source slots of each column.
    p_col_ptr: Vec<usize>,
    p_row: Vec<usize>,
    p_src: Vec<usize>,
    parent: Vec<usize>,
    col_count: Vec<usize>,
    // Supernode `s` spans columns `sn_start[s]..sn_start[s + 1]`.
    sn_start: Vec<usize>,
    sn_of: Vec<usize>,
    sn_row_ptr: Vec<usize>,
    sn_rows: Vec<usize>,
    sn_val_ptr: Vec<usize>,
    max_rows: usize,
    max_width: usize,
}

impl SymbolicCholesky {
    /// Analyzes with the cheapest of nested dissection, the natural order
    /// and (for small matrices) minimum degree.
    pub fn analyze(a: &SparseSym) -> Arc<Self> {
        let n = a.dim();
        let mut candidates = vec![
            nested_dissection(n, a.col_ptr(), a.row_idx()),
            (0..n).collect(),
        ];
        if n <= MD_LIMIT {
            candidates.push(minimum_degree(n, a.col_ptr(), a.row_idx()));
        }
        Self::analyze_best(a, candidates)
    }

    /// Analyzes every candidate ordering and keeps the one with the
    /// smallest factorization cost.
    pub fn analyze_best(a: &SparseSym, candidates: Vec<Vec<usize>>) -> Arc<Self> {
        let mut best: Option<Arc<Self>> = None;
        for perm in candidates {
            let s = Self::with_permutation(a, perm);
            if best.as_ref().is_none_or(|b| s.flops() < b.flops()) {
                best = Some(s);
            }
        }
        best.expect("at least one candidate ordering")
    }

    /// Analyzes with a caller-supplied ordering.
    pub fn with_permutation(a: &SparseSym, perm: Vec<usize>) -> Arc<Self> {
        let n = a.dim();
        assert_eq!(perm.len(), n);
        let pinv = invert(&perm);

        // Permuted pattern in both orientations: the upper one drives the
        // elimination tree and column counts, the lower one the numeric
        // scatter.
        let mut up_cnt = vec![0usize; n + 1];
        let mut lo_cnt = vec![0usize; n + 1];
        for (r, c, _) in a.iter() {
            let (pr, pc) = (pinv[r], pinv[c]);
            up_cnt[pr.max(pc) + 1] += 1;
            lo_cnt[pr.min(pc) + 1] += 1;
        }
        for k in 0..n {
            up_cnt[k + 1] += up_cnt[k];
            lo_cnt[k + 1] += lo_cnt[k];
        }
        let nnz = a.stored_nnz();
        let (u_ptr, p_col_ptr) = (up_cnt, lo_cnt);
        let mut u_row = vec![0usize; nnz];
        let mut p_row = vec![0usize; nnz];
        let mut p_src = vec![0usize; nnz];
        let mut u_next = u_ptr[..n].to_vec();
        let mut p_next = p_col_ptr[..n].to_vec();
        for (e, (r, c, _)) in a.iter().enumerate() {
            let (pr, pc) = (pinv[r], pinv[c]);
            let (lo, hi) = (pr.min(pc), pr.max(pc));
            u_row[u_next[hi]] = lo;
            u_next[hi] += 1;
            p_row[p_next[lo]] = hi;
            p_src[p_next[lo]] = e;
            p_next[lo] += 1;
        }

        // Elimination tree.
        let mut parent = vec![NONE; n];
        let mut ancestor = vec![NONE; n];
        for k in 0..n {
            for &i0 in &u_row[u_ptr[k]..u_ptr[k + 1]] {
                let mut i = i0;
                while i != NONE && i < k {
                    let inext = ancestor[i];
                    ancestor[i] = k;
                    if inext == NONE {
                        parent[i] = k;
                    }
                    i = inext;
                }
            }
        }

        // Column counts: row k of L is the union of tree paths from the
        // entries of row k of the upper pattern up to k.
        let mut col_count = vec![1usize; n];
        let mut mark = vec![NONE; n];
        for k in 0..n {
            mark[k] = k;
            for &i0 in &u_row[u_ptr[k]..u_ptr[k + 1]] {
                let mut i = i0;
                while i != NONE && i < k && mark[i] != k {
                    col_count[i] += 1;
                    mark[i] = k;
                    i = parent[i];
                }
            }
        }

        // Fundamental supernodes: column j joins j-1 when its structure is
        // that of j-1 minus the diagonal.
        let mut fund = vec![0usize];
        for j in 1..n {
            if !(parent[j - 1] == j && col_count[j - 1] == col_count[j] + 1) {
                fund.push(j);
            }
        }
        fund.push(n);
        let sn_start = relax(&fund, &parent, &col_count);
        let ns = sn_start.len() - 1;
        let mut sn_of = vec![0usize; n];
        for s in 0..ns {
            sn_of[sn_start[s]..sn_start[s + 1]].fill(s);
        }

        // Row structure of each supernode: its own columns, the lower
        // pattern of its columns, and the structure of its children.
        let mut sn_parent = vec![NONE; ns];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); ns];
        for s in 0..ns {
            let last = sn_start[s + 1] - 1;
            if parent[last] != NONE {
                sn_parent[s] = sn_of[parent[last]];
                children[sn_parent[s]].push(s);
            }
        }
        let mut sn_row_ptr = vec![0usize];
        let mut sn_rows: Vec<usize> = Vec::new();
        let mut mark = vec![NONE; n];
        for s in 0..ns {
            let (f, l) = (sn_start[s], sn_start[s + 1]);
            let begin = sn_rows.len();
            for j in f..l {
                mark[j] = s;
                sn_rows.push(j);
            }
            for j in f..l {
                for &i in &p_row[p_col_ptr[j]..p_col_ptr[j + 1]] {
                    if mark[i] != s {
                        mark[i] = s;
                        sn_rows.push(i);
                    }
                }
            }
            for &c in &children[s] {
                for p in sn_row_ptr[c]..sn_row_ptr[c + 1] {
                    let i = sn_rows[p];
                    if i >= f && mark[i] != s {
                        mark[i] = s;
                        sn_rows.push(i);
                    }
                }
            }
            sn_rows[begin + (l - f)..].sort_unstable();
            sn_row_ptr.push(sn_rows.len());
        }

        let mut sn_val_ptr = vec![0usize];
        let (mut max_rows, mut max_width) = (0, 0);
        for s in 0..ns {
            let r = sn_row_ptr[s + 1] - sn_row_ptr[s];
            let w = sn_start[s + 1] - sn_start[s];
            max_rows = max_rows.max(r);
            max_width = max_width.max(w);
            sn_val_ptr.push(sn_val_ptr[s] + r * w);
        }

        Arc::new(SymbolicCholesky {
            n,
            perm,
            pinv,
            a_col_ptr: a.col_ptr().to_vec(),
            a_row_idx: a.row_idx().to_vec(),
            p_col_ptr,
            p_row,
            p_src,
            parent,
            col_count,
            sn_start,
            sn_of,
            sn_row_ptr,
            sn_rows,
            sn_val_ptr,
            max_rows,
            max_width,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Structural nonzeros of `L` (lower triangle including diagonal).
    pub fn nnz_l(&self) -> usize {
        self.col_count.iter().sum()
    }

    /// Floating point operation count of the numeric phase.
    pub fn flops(&self) -> f64 {
        self.col_count.iter().map(|&c| (c * c) as f64).sum()
    }

    pub fn elimination_tree(&self) -> &[usize] {
        &self.parent
    }

    pub fn supernode_count(&self) -> usize {
        self.sn_start.len() - 1
    }

    fn matches(&self, a: &SparseSym) -> bool {
        a.dim() == self.n
            && a.col_ptr() == &self.a_col_ptr[..]
            && a.row_idx() == &self.a_row_idx[..]
    }

    fn rows(&self, s: usize) -> &[usize] {
        &self.sn_rows[self.sn_row_ptr[s]..self.sn_row_ptr[s + 1]]
    }

    /// Numeric factorization, escalating diagonal jitter on breakdown.
    pub fn factor(self: &Arc<Self>, a: &SparseSym) -> Result<CholeskyFactor> {
        if !self.matches(a) {
            return Err(Error::numerical(
                "matrix pattern differs from the analyzed pattern",
            ));
        }
        let mut ws = Workspace::new(self);
        if let Some(l) = self.numeric(a.values(), 0.0, &mut ws) {
            return Ok(self.wrap(l, 0.0));
        }
        let mean_diag = a.diag().iter().sum::<f64>() / self.n.max(1) as f64;
        for level in JITTER_LEVELS {
            let jitter = level * mean_diag.abs().max(f64::MIN_POSITIVE);
            if let Some(l) = self.numeric(a.values(), jitter, &mut ws) {
                log::debug!("cholesky succeeded with jitter {jitter:e}");
                return Ok(self.wrap(l, jitter));
            }
        }
        Err(Error::numerical(format!(
            "matrix of dimension {} is not positive definite after jitter escalation",
            self.n
        )))
    }

    fn wrap(self: &Arc<Self>, values: Vec<f64>, jitter: f64) -> CholeskyFactor {
        let mut logdet = 0.0;
        for s in 0..self.supernode_count() {
            let r = self.sn_row_ptr[s + 1] - self.sn_row_ptr[s];
            let w = self.sn_start[s + 1] - self.sn_start[s];
            let panel = &values[self.sn_val_ptr[s]..];
            for j in 0..w {
                logdet += panel[j + j * r].ln();
            }
        }
        CholeskyFactor {
            symbolic: Arc::clone(self),
            values,
            logdet: 2.0 * logdet,
            jitter,
        }
    }

    fn numeric(&self, avals: &[f64], jitter: f64, ws: &mut Workspace) -> Option<Vec<f64>> {
        let ns = self.supernode_count();
        let mut lx = vec![0.0; self.sn_val_ptr[ns]];
        ws.head.fill(NONE);

        for s in 0..ns {
            let (f, l) = (self.sn_start[s], self.sn_start[s + 1]);
            let w = l - f;
            let rows = self.rows(s);
            let r = rows.len();
            for (k, &i) in rows.iter().enumerate() {
                ws.relpos[i] = k;
            }

            let (done, rest) = lx.split_at_mut(self.sn_val_ptr[s]);
            let panel = &mut rest[..r * w];
            for j in f..l {
                let col = &mut panel[(j - f) * r..(j - f + 1) * r];
                for p in self.p_col_ptr[j]..self.p_col_ptr[j + 1] {
                    col[ws.relpos[self.p_row[p]]] += avals[self.p_src[p]];
                }
                col[j - f] += jitter;
            }

            // Updates from every earlier supernode with rows in f..l.
            let mut d = ws.head[s];
            ws.head[s] = NONE;
            while d != NONE {
                let next_d = ws.next[d];
                let drows = self.rows(d);
                let rd = drows.len();
                let wd = self.sn_start[d + 1] - self.sn_start[d];
                let p1 = ws.dpos[d];
                let mut p2 = p1;
                while p2 < rd && drows[p2] < l {
                    p2 += 1;
                }
                let m = rd - p1;
                let k = p2 - p1;
                let dpanel = &done[self.sn_val_ptr[d]..self.sn_val_ptr[d] + rd * wd];
                if m * k * wd <= SMALL_BLOCK {
                    for c in 0..k {
                        let tcol = (drows[p1 + c] - f) * r;
                        for q in 0..wd {
                            let dcol = &dpanel[q * rd..(q + 1) * rd];
                            let lc = dcol[p1 + c];
                            if lc == 0.0 {
                                continue;
                            }
                            for a in c..m {
                                panel[tcol + ws.relpos[drows[p1 + a]]] -= dcol[p1 + a] * lc;
                            }
                        }
                    }
                } else {
                    let buf = &mut ws.update[..m * k];
                    let src = MatRef::from_column_major_slice_with_stride(&dpanel[p1..], m, wd, rd);
                    let top = src.subrows(0, k);
                    matmul(
                        MatMut::from_column_major_slice_mut(buf, m, k),
                        Accum::Replace,
                        src,
                        top.transpose(),
                        1.0,
                        Par::Seq,
                    );
                    for c in 0..k {
                        let tcol = (drows[p1 + c] - f) * r;
                        let bcol = &buf[c * m..(c + 1) * m];
                        for a in c..m {
                            panel[tcol + ws.relpos[drows[p1 + a]]] -= bcol[a];
                        }
                    }
                }
                ws.dpos[d] = p2;
                if p2 < rd {
                    let t = self.sn_of[drows[p2]];
                    ws.next[d] = ws.head[t];
                    ws.head[t] = d;
                }
                d = next_d;
            }

            if !factor_panel(panel, r, w, &mut ws.stack) {
                return None;
            }
            if r > w {
                ws.dpos[s] = w;
                let t = self.sn_of[rows[w]];
                ws.next[s] = ws.head[t];
                ws.head[t] = s;
            }
        }
        Some(lx)
    }
}

/// Merges chains of supernodes where the explicit zeros introduced stay
/// within a budget that loosens for narrow supernodes.
fn relax(fund: &[usize], parent: &[usize], col_count: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize];
    let nf = fund.len() - 1;
    if nf == 0 {
        return out;
    }
    // Current group: columns out.last()..end, `rows` rows, `exact` true entries.
    let mut end = fund[1];
    let mut exact: usize = col_count[fund[0]..end].iter().sum();
    for s in 1..nf {
        let (f, l) = (fund[s], fund[s + 1]);
        let w_p = l - f;
        let r_p = col_count[f];
        let own: usize = col_count[f..l].iter().sum();
        if parent[end - 1] == f {
            let w = l - out.last().unwrap();
            let r = (w - w_p) + r_p;
            let stored = w * r - w * (w - 1) / 2;
            let zeros = (stored - exact - own) as f64 / stored as f64;
            let merge =
                w <= 4 || (w <= 16 && zeros < 0.8) || (w <= 48 && zeros < 0.1) || zeros < 0.05;
            if merge {
                end = l;
                exact += own;
                continue;
            }
        }
        out.push(f);
        end = l;
        exact = own;
    }
    out.push(end);
    out
}

struct Workspace {
    relpos: Vec<usize>,
    head: Vec<usize>,
    next: Vec<usize>,
    dpos: Vec<usize>,
    update: Vec<f64>,
    stack: MemBuffer,
}

impl Workspace {
    fn new(s: &SymbolicCholesky) -> Self {
        let ns = s.supernode_count();
        let req = cholesky_in_place_scratch::<f64>(s.max_width, Par::Seq, Default::default());
        Workspace {
            relpos: vec![0; s.n],
            head: vec![NONE; ns],
            next: vec![NONE; ns],
            dpos: vec![0; ns],
            update: vec![0.0; s.max_rows * s.max_rows],
            stack: MemBuffer::new(req),
        }
    }
}

/// Factors the diagonal block of an `r × w` panel and solves for the block
/// below it. Returns false on a nonpositive or nonfinite pivot.
fn factor_panel(panel: &mut [f64], r: usize, w: usize, stack: &mut MemBuffer) -> bool {
    if w <= 8 {
        for j in 0..w {
            let mut d = panel[j + j * r];
            for q in 0..j {
                d -= panel[j + q * r] * panel[j + q * r];
            }
            if !(d > 0.0) || !d.is_finite() {
                return false;
            }
            let d = d.sqrt();
            panel[j + j * r] = d;
            for i in j + 1..r {
                let mut v = panel[i + j * r];
                for q in 0..j {
                    v -= panel[i + q * r] * panel[j + q * r];
                }
                panel[i + j * r] = v / d;
            }
        }
        return true;
    }
    let (mut diag, below) = MatMut::from_column_major_slice_mut(panel, r, w).split_at_row_mut(w);
    let ok = cholesky_in_place(
        diag.rb_mut(),
        LltRegularization::default(),
        Par::Seq,
        MemStack::new(stack),
        Default::default(),
    );
    if ok.is_err() {
        return false;
    }
    let diag = diag.into_const();
    if (0..w).any(|j| !diag[(j, j)].is_finite()) {
        return false;
    }
    solve_lower_triangular_in_place(diag, below.transpose_mut(), Par::Seq);
    true
}

/// Numeric Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    symbolic: Arc<SymbolicCholesky>,
    values: Vec<f64>,
    logdet: f64,
    jitter: f64,
}

impl CholeskyFactor {
    pub fn dim(&self) -> usize {
        self.symbolic.n
    }

    pub fn symbolic(&self) -> &Arc<SymbolicCholesky> {
        &self.symbolic
    }

    /// `log det A` (of the jittered matrix if jitter was needed).
    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    /// Diagonal jitter that was added, zero when none was needed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    fn panel(&self, s: usize) -> (&[usize], &[f64], usize) {
        let sy = &self.symbolic;
        let rows = sy.rows(s);
        let w = sy.sn_start[s + 1] - sy.sn_start[s];
        (
            rows,
            &self.values[sy.sn_val_ptr[s]..sy.sn_val_ptr[s + 1]],
            w,
        )
    }

    /// In place `y ← L⁻¹ y` (permuted indexing).
    fn forward(&self, y: &mut [f64]) {
        let sy = &self.symbolic;
        for s in 0..sy.supernode_count() {
            let f = sy.sn_start[s];
            let (rows, panel, w) = self.panel(s);
            let r = rows.len();
            for j in 0..w {
                let col = &panel[j * r..(j + 1) * r];
                let yj = y[f + j] / col[j];
                y[f + j] = yj;
                for k in j + 1..r {
                    y[rows[k]] -= col[k] * yj;
                }
            }
        }
    }

    /// In place `y ← L⁻ᵀ y` (permuted indexing).
    fn backward(&self, y: &mut [f64]) {
        let sy = &self.symbolic;
        for s in (0..sy.supernode_count()).rev() {
            let f = sy.sn_start[s];
            let (rows, panel, w) = self.panel(s);
            let r = rows.len();
            for j in (0..w).rev() {
                let col = &panel[j * r..(j + 1) * r];
                let mut acc = y[f + j];
                for k in j + 1..r {
                    acc -= col[k] * y[rows[k]];
                }
                y[f + j] = acc / col[j];
            }
        }
    }

    fn permute(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.symbolic.n);
        self.symbolic.perm.iter().map(|&p| b[p]).collect()
    }

    fn unpermute(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; y.len()];
        for (k, &p) in self.symbolic.perm.iter().enumerate() {
            x[p] = y[k];
        }
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y = self.permute(b);
        self.forward(&mut y);
        self.backward(&mut y);
        self.unpermute(&y)
    }

    /// Maps a standard normal vector `z` to a draw with covariance `A⁻¹`.
    pub fn transform_standard_normal(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.symbolic.n);
        let mut y = z.to_vec();
        self.backward(&mut y);
        self.unpermute(&y)
    }

    /// `bᵀ A⁻¹ b`.
    pub fn inverse_quad_form(&self, b: &[f64]) -> f64 {
        let mut y = self.permute(b);
        self.forward(&mut y);
        y.iter().map(|v| v * v).sum()
    }

    /// Entries of `A⁻¹` on the structure of `L` (block Takahashi
    /// recursions, last supernode first).
    pub fn selected_inverse(&self) -> SelectedInverse {
        let sy = &self.symbolic;
        let ns = sy.supernode_count();
        let mut z = vec![0.0; self.values.len()];
        let mut ybuf = vec![0.0; sy.max_rows * sy.max_width];
        let mut sbuf = vec![0.0; sy.max_rows * sy.max_rows];
        let mut bbuf = vec![0.0; sy.max_rows * sy.max_width];
        let mut ibuf = vec![0.0; sy.max_width * sy.max_width];

        for s in (0..ns).rev() {
            let (rows, panel, w) = self.panel(s);
            let r = rows.len();
            let m = r - w;
            let lmat = MatRef::from_column_major_slice(panel, r, w);
            let lss = lmat.subrows(0, w);

            // Y = L_B L_ss⁻¹.
            let y = &mut ybuf[..m * w];
            for q in 0..w {
                y[q * m..(q + 1) * m].copy_from_slice(&panel[q * r + w..(q + 1) * r]);
            }
            {
                let ym = MatMut::from_column_major_slice_mut(y, m, w);
                solve_upper_triangular_in_place(lss.transpose(), ym.transpose_mut(), Par::Seq);
            }

            // Σ_RR gathered from supernodes already done.
            let sig = &mut sbuf[..m * m];
            for b in 0..m {
                let rb = rows[w + b];
                let t = sy.sn_of[rb];
                let trows = sy.rows(t);
                let cb = rb - sy.sn_start[t];
                let tr = trows.len();
                let tz = &z[sy.sn_val_ptr[t] + cb * tr..sy.sn_val_ptr[t] + (cb + 1) * tr];
                let mut ptr = cb;
                for a in b..m {
                    let ra = rows[w + a];
                    while trows[ptr] != ra {
                        ptr += 1;
                    }
                    let v = tz[ptr];
                    sig[a + b * m] = v;
                    sig[b + a * m] = v;
                }
            }

            // Σ_BS = −Σ_RR Y.
            let bs = &mut bbuf[..m * w];
            let ym = MatRef::from_column_major_slice(&ybuf[..m * w], m, w);
            matmul(
                MatMut::from_column_major_slice_mut(bs, m, w),
                Accum::Replace,
                MatRef::from_column_major_slice(&sbuf[..m * m], m, m),
                ym,
                -1.0,
                Par::Seq,
            );

            // Σ_SS = L_ss⁻ᵀ L_ss⁻¹ − Σ_BSᵀ Y.
            let inv = &mut ibuf[..w * w];
            inv.fill(0.0);
            for j in 0..w {
                inv[j + j * w] = 1.0;
            }
            let mut im = MatMut::from_column_major_slice_mut(inv, w, w);
            solve_lower_triangular_in_place(lss, im.rb_mut(), Par::Seq);
            let out = &mut z[sy.sn_val_ptr[s]..sy.sn_val_ptr[s + 1]];
            let (mut ss, mut below) =
                MatMut::from_column_major_slice_mut(out, r, w).split_at_row_mut(w);
            let im = im.into_const();
            matmul(
                ss.rb_mut(),
                Accum::Replace,
                im.transpose(),
                im,
                1.0,
                Par::Seq,
            );
            let bsm = MatRef::from_column_major_slice(&bbuf[..m * w], m, w);
            matmul(ss, Accum::Add, bsm.transpose(), ym, -1.0, Par::Seq);
            below.copy_from(bsm);
        }
        SelectedInverse {
            symbolic: Arc::clone(&self.symbolic),
            values: z,
        }
    }
}

/// Partial inverse of a factorized matrix, available on the filled
/// structure (always including the diagonal and the original pattern).
#[derive(Debug, Clone)]
pub struct SelectedInverse {
    symbolic: Arc<SymbolicCholesky>,
    values: Vec<f64>,
}

impl SelectedInverse {
    /// `(A⁻¹)_{rc}` in original indexing, if inside the computed structure.
    pub fn get(&self, r: usize, c: usize) -> Option<f64> {
        let sy = &self.symbolic;
        let (pr, pc) = (sy.pinv[r], sy.pinv[c]);
        let (col, row) = if pr < pc { (pr, pc) } else { (pc, pr) };
        let t = sy.sn_of[col];
        let rows = sy.rows(t);
        let k = rows.binary_search(&row).ok()?;
        let off = col - sy.sn_start[t];
        Some(self.values[sy.sn_val_ptr[t] + off * rows.len() + k])
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.symbolic.n)
            .map(|i| self.get(i, i).unwrap())
            .collect()
    }
}

/// Analyzes and factorizes in one step.
pub fn factorize(a: &SparseSym) -> Result<CholeskyFactor> {
    SymbolicCholesky::analyze(a).factor(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, density: f64, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i == j || rng.random::<f64>() < density {
                    b[(i, j)] = rng.random_range(-1.0..1.0);
                }
            }
        }
        let mut a = &b * b.transpose();
        for i in 0..n {
            a[(i, i)] += 0.5;
        }
        a
    }

    fn check_against_dense(d: &DMatrix<f64>, f: &CholeskyFactor, a: &SparseSym) {
        let n = d.nrows();
        let dense_chol = d.clone().cholesky().unwrap();
        let dense_logdet: f64 = 2.0
            * dense_chol
                .l()
                .diagonal()
                .iter()
                .map(|v| v.ln())
                .sum::<f64>();
        assert!((f.logdet() - dense_logdet).abs() <= 1e-10 * dense_logdet.abs().max(1.0));
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = f.solve(&b);
        let xd = dense_chol.solve(&nalgebra::DVector::from_row_slice(&b));
        for i in 0..n {
            assert!((x[i] - xd[i]).abs() <= 1e-10 * xd.amax());
        }
        let inv = d.clone().try_inverse().unwrap();
        let sel = f.selected_inverse();
        for (r, c, _) in a.iter() {
            let v = sel.get(r, c).unwrap();
            assert!(
                (v - inv[(r, c)]).abs() < 1e-10 * inv.amax(),
                "({r},{c}) {v} vs {}",
                inv[(r, c)]
            );
        }
    }

    #[test]
    fn diagonal_logdet() {
        let f = factorize(&SparseSym::diagonal(&[2.0, 2.0, 2.0])).unwrap();
        assert!((f.logdet() - 3.0 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn random_matches_dense() {
        for seed in 0..5 {
            let d = random_spd(8, 0.2, seed);
            let a = SparseSym::from_dense(&d, 0.0);
            let f = factorize(&a).unwrap();
            check_against_dense(&d, &f, &a);
        }
    }

    #[test]
    fn wide_supernodes_match_dense() {
        // Dense enough that the blocked kernels are exercised.
        for seed in 10..13 {
            let d = random_spd(90, 0.08, seed);
            let a = SparseSym::from_dense(&d, 0.0);
            let f = factorize(&a).unwrap();
            assert!(f.symbolic().supernode_count() < 90);
            check_against_dense(&d, &f, &a);
            let natural = SymbolicCholesky::with_permutation(&a, (0..90).collect());
            check_against_dense(&d, &natural.factor(&a).unwrap(), &a);
        }
    }

    #[test]
    fn sampling_transform_has_inverse_covariance() {
        // L⁻ᵀ applied to the identity columns gives X with X Xᵀ = A⁻¹.
        let d = random_spd(12, 0.3, 4);
        let a = SparseSym::from_dense(&d, 0.0);
        let f = factorize(&a).unwrap();
        let mut x = DMatrix::zeros(12, 12);
        for k in 0..12 {
            let mut e = vec![0.0; 12];
            e[k] = 1.0;
            let col = f.transform_standard_normal(&e);
            for i in 0..12 {
                x[(i, k)] = col[i];
            }
        }
        let cov = &x * x.transpose();
        let inv = d.try_inverse().unwrap();
        assert!((cov - &inv).abs().max() < 1e-10 * inv.amax());
    }

    #[test]
    fn inverse_quad_form_matches_solve() {
        let d = random_spd(15, 0.2, 8);
        let a = SparseSym::from_dense(&d, 0.0);
        let f = factorize(&a).unwrap();
        let b: Vec<f64> = (0..15).map(|i| 1.0 + i as f64 * 0.1).collect();
        let x = f.solve(&b);
        let q: f64 = x.iter().zip(&b).map(|(u, v)| u * v).sum();
        assert!((f.inverse_quad_form(&b) - q).abs() < 1e-10 * q.abs());
    }

    #[test]
    fn banded_fill_not_worse_than_dense() {
        let n = 40;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 6.0));
            for k in 1..=2 {
                if i + k < n {
                    t.push((i + k, i, -1.0));
                }
            }
        }
        let a = SparseSym::from_triplets(n, &t).unwrap();
        let s = SymbolicCholesky::analyze(&a);
        assert!(s.nnz_l() <= n * (n + 1) / 2);
        assert!(s.nnz_l() <= 3 * n);
    }

    #[test]
    fn pattern_mismatch_rejected() {
        let a = SparseSym::diagonal(&[1.0, 2.0]);
        let b = SparseSym::from_triplets(2, &[(0, 0, 2.0), (1, 1, 2.0), (1, 0, 0.1)]).unwrap();
        let s = SymbolicCholesky::analyze(&a);
        assert!(matches!(s.factor(&b), Err(Error::Numerical(_))));
    }

    #[test]
    fn indefinite_fails_after_jitter() {
        let a = SparseSym::from_triplets(2, &[(0, 0, 1.0), (1, 1, 1.0), (1, 0, 2.0)]).unwrap();
        match factorize(&a) {
            Err(Error::Numerical(_)) => {}
            other => panic!("expected numerical error, got {other:?}"),
        }
    }

    #[test]
    fn semidefinite_rescued_by_jitter() {
        let a = SparseSym::from_triplets(2, &[(0, 0, 1.0), (1, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let f = factorize(&a).unwrap();
        assert!(f.jitter() > 0.0);
    }
}
