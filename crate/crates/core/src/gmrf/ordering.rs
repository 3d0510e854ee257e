//! Fill-reducing orderings: greedy minimum degree on a quotient graph, and
//! nested dissection with level-set separators over minimum-degree leaves.
//!
//! Eliminated variables become elements; a variable's degree is the exact
//! size of its reachable set through adjacent elements plus its remaining
//! variable neighbours. Elements wholly contained in a newly formed element
//! are absorbed. Rows that are dense relative to the matrix size are set
//! aside and ordered last. Ties break on the lowest index, so the ordering
//! is deterministic.

use std::collections::BTreeSet;

/// Adjacency lists (no self loops) of the symmetric pattern.
pub(crate) fn adjacency(dim: usize, col_ptr: &[usize], row_idx: &[usize]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); dim];
    for j in 0..dim {
        for &i in &row_idx[col_ptr[j]..col_ptr[j + 1]] {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

/// Returns `perm` with `perm[k]` = original index eliminated at step `k`.
pub fn minimum_degree(dim: usize, col_ptr: &[usize], row_idx: &[usize]) -> Vec<usize> {
    let mut adj = adjacency(dim, col_ptr, row_idx);
    let dense_cut = (10.0 * (dim as f64).sqrt()).max(16.0) as usize;
    let dense: Vec<bool> = adj.iter().map(|a| a.len() > dense_cut).collect();
    for a in adj.iter_mut() {
        a.retain(|&v| !dense[v]);
    }

    let mut eliminated = dense.clone();
    let mut absorbed = vec![false; dim];
    let mut elems: Vec<Vec<usize>> = vec![Vec::new(); dim];
    let mut elem_vars: Vec<Vec<usize>> = vec![Vec::new(); dim];
    let mut degree: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    let mut queue: BTreeSet<(usize, usize)> = (0..dim)
        .filter(|&i| !dense[i])
        .map(|i| (degree[i], i))
        .collect();

    let mut stamp = vec![0usize; dim];
    let mut tick = 0usize;
    let mut in_lp = vec![0usize; dim];
    let mut lp_tick = 0usize;
    let mut perm = Vec::with_capacity(dim);

    while let Some((_, p)) = queue.pop_first() {
        perm.push(p);
        eliminated[p] = true;

        lp_tick += 1;
        let mut lp: Vec<usize> = Vec::new();
        for &v in &adj[p] {
            if !eliminated[v] && in_lp[v] != lp_tick {
                in_lp[v] = lp_tick;
                lp.push(v);
            }
        }
        for &e in &elems[p] {
            if absorbed[e] {
                continue;
            }
            for &v in &elem_vars[e] {
                if !eliminated[v] && in_lp[v] != lp_tick {
                    in_lp[v] = lp_tick;
                    lp.push(v);
                }
            }
            absorbed[e] = true;
            elem_vars[e] = Vec::new();
        }
        adj[p] = Vec::new();
        elems[p] = Vec::new();

        for &i in &lp {
            let e_i = &mut elems[i];
            e_i.retain(|&e| !absorbed[e]);
            adj[i].retain(|&v| !eliminated[v] && in_lp[v] != lp_tick);
        }

        // Absorb elements covered by the new one.
        tick += 1;
        for &i in &lp {
            for &e in &elems[i] {
                if stamp[e] == tick || absorbed[e] {
                    continue;
                }
                stamp[e] = tick;
                let vars = &mut elem_vars[e];
                vars.retain(|&v| !eliminated[v]);
                if vars.iter().all(|&v| in_lp[v] == lp_tick) {
                    absorbed[e] = true;
                    *vars = Vec::new();
                }
            }
        }
        for &i in &lp {
            elems[i].retain(|&e| !absorbed[e]);
            elems[i].push(p);
        }
        elem_vars[p] = lp.clone();

        for &i in &lp {
            tick += 1;
            stamp[i] = tick;
            let mut d = 0usize;
            for &v in &adj[i] {
                if stamp[v] != tick {
                    stamp[v] = tick;
                    d += 1;
                }
            }
            for &e in &elems[i] {
                for &v in &elem_vars[e] {
                    if !eliminated[v] && stamp[v] != tick {
                        stamp[v] = tick;
                        d += 1;
                    }
                }
            }
            if d != degree[i] {
                queue.remove(&(degree[i], i));
                degree[i] = d;
                queue.insert((d, i));
            }
        }
    }
    perm.extend((0..dim).filter(|&i| dense[i]));
    perm
}

/// Subgraphs at or below this size are ordered by minimum degree.
const ND_LEAF: usize = 160;

/// Nested dissection. Each connected piece is split by the most compact
/// central breadth-first level from a pseudo-peripheral vertex; both halves
/// are ordered recursively and the separator last. Dense rows go last.
pub fn nested_dissection(dim: usize, col_ptr: &[usize], row_idx: &[usize]) -> Vec<usize> {
    let mut adj = adjacency(dim, col_ptr, row_idx);
    let dense_cut = (10.0 * (dim as f64).sqrt()).max(16.0) as usize;
    let dense: Vec<bool> = adj.iter().map(|a| a.len() > dense_cut).collect();
    for a in adj.iter_mut() {
        a.retain(|&v| !dense[v]);
    }
    let mut nd = Dissector {
        adj: &adj,
        label: vec![0; dim],
        seen: vec![0; dim],
        level: vec![0; dim],
        pos: vec![0; dim],
        stamp: 0,
        next_label: 1,
        perm: Vec::with_capacity(dim),
    };
    let all: Vec<usize> = (0..dim).filter(|&i| !dense[i]).collect();
    nd.dissect(all);
    nd.perm.extend((0..dim).filter(|&i| dense[i]));
    nd.perm
}

struct Dissector<'a> {
    adj: &'a [Vec<usize>],
    /// Vertices of the set being processed carry its label.
    label: Vec<usize>,
    seen: Vec<usize>,
    level: Vec<usize>,
    pos: Vec<usize>,
    stamp: usize,
    next_label: usize,
    perm: Vec<usize>,
}

impl Dissector<'_> {
    fn tag(&mut self, nodes: &[usize]) -> usize {
        let l = self.next_label;
        self.next_label += 1;
        for &v in nodes {
            self.label[v] = l;
        }
        l
    }

    /// Breadth-first levels from `root` inside the labelled set.
    fn bfs(&mut self, root: usize, lab: usize) -> Vec<Vec<usize>> {
        self.stamp += 1;
        let st = self.stamp;
        self.seen[root] = st;
        let mut levels = vec![vec![root]];
        loop {
            let mut next = Vec::new();
            for &u in levels.last().unwrap() {
                for &v in &self.adj[u] {
                    if self.label[v] == lab && self.seen[v] != st {
                        self.seen[v] = st;
                        next.push(v);
                    }
                }
            }
            if next.is_empty() {
                return levels;
            }
            levels.push(next);
        }
    }

    fn dissect(&mut self, nodes: Vec<usize>) {
        if nodes.len() <= ND_LEAF {
            self.leaf(&nodes);
            return;
        }
        let lab = self.tag(&nodes);
        let mut levels = self.bfs(nodes[0], lab);
        let reached: usize = levels.iter().map(Vec::len).sum();
        if reached < nodes.len() {
            // Several components: handle each on its own.
            let st = self.stamp;
            let rest: Vec<usize> = nodes
                .iter()
                .copied()
                .filter(|&v| self.seen[v] != st)
                .collect();
            self.dissect(levels.concat());
            self.dissect(rest);
            return;
        }
        for _ in 0..4 {
            let deg = |v: usize| {
                self.adj[v]
                    .iter()
                    .filter(|&&u| self.label[u] == lab)
                    .count()
            };
            let far = *levels
                .last()
                .unwrap()
                .iter()
                .min_by_key(|&&v| (deg(v), v))
                .unwrap();
            let cand = self.bfs(far, lab);
            if cand.len() <= levels.len() {
                break;
            }
            levels = cand;
        }
        let h = levels.len();
        if h < 3 {
            self.leaf(&nodes);
            return;
        }
        for (k, l) in levels.iter().enumerate() {
            for &v in l {
                self.level[v] = k;
            }
        }

        // Smallest interior level leaving at least a quarter on each side,
        // else the most balanced interior level.
        let n = nodes.len();
        let mut below = 0usize;
        let mut best: Option<((usize, usize), usize)> = None;
        let mut balanced = (usize::MAX, 1);
        for k in 0..h {
            let above = n - below - levels[k].len();
            if k > 0 && k + 1 < h {
                let gap = below.abs_diff(above);
                if 4 * below >= n && 4 * above >= n {
                    let key = (levels[k].len(), gap);
                    if best.is_none_or(|b| key < b.0) {
                        best = Some((key, k));
                    }
                }
                if gap < balanced.0 {
                    balanced = (gap, k);
                }
            }
            below += levels[k].len();
        }
        let k = best.map_or(balanced.1, |b| b.1);

        // Separator vertices without a neighbour above are not needed.
        let mut part_a: Vec<usize> = levels[..k].concat();
        let mut sep = Vec::new();
        for &v in &levels[k] {
            if self.adj[v]
                .iter()
                .any(|&u| self.label[u] == lab && self.level[u] == k + 1)
            {
                sep.push(v);
            } else {
                part_a.push(v);
            }
        }
        let part_b: Vec<usize> = levels[k + 1..].concat();
        self.dissect(part_a);
        self.dissect(part_b);
        self.perm.extend(sep);
    }

    fn leaf(&mut self, nodes: &[usize]) {
        let lab = self.tag(nodes);
        for (k, &v) in nodes.iter().enumerate() {
            self.pos[v] = k;
        }
        let mut col_ptr = vec![0usize];
        let mut row_idx = Vec::new();
        for (k, &v) in nodes.iter().enumerate() {
            row_idx.push(k);
            for &u in &self.adj[v] {
                if self.label[u] == lab && self.pos[u] > k {
                    row_idx.push(self.pos[u]);
                }
            }
            row_idx[col_ptr[k] + 1..].sort_unstable();
            col_ptr.push(row_idx.len());
        }
        let p = minimum_degree(nodes.len(), &col_ptr, &row_idx);
        self.perm.extend(p.into_iter().map(|k| nodes[k]));
    }
}

/// Inverse of a permutation.
pub fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}
