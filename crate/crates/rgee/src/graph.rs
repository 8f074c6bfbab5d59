//! Sparse graph storage, label vectors, and the dataset bundle shared by
//! every stage of the pipeline.
//!
//! Graphs are immutable once built: compressed-row adjacency with optional
//! edge weights (`None` means every weight is exactly 1). Self-loops are
//! dropped at construction and duplicate entries are collapsed by summing
//! their weights, so the diagonal is always empty.

use crate::error::{Error, Result};

/// Immutable sparse adjacency in compressed-row form.
///
/// For undirected graphs both `(i, j)` and `(j, i)` are stored, which keeps
/// row iteration cheap at the cost of doubling the entry count.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    /// `None` when every stored weight is 1 (binary graph).
    weights: Option<Vec<f64>>,
    undirected: bool,
}

impl SparseGraph {
    /// Build a graph from directed entries, stored exactly as given.
    pub fn directed(n: usize, entries: &[(u32, u32, f64)]) -> Result<Self> {
        Self::from_entries(n, entries, false)
    }

    /// Build an undirected graph; each edge should appear once in `entries`
    /// (either orientation) and is mirrored internally.
    pub fn undirected(n: usize, entries: &[(u32, u32, f64)]) -> Result<Self> {
        Self::from_entries(n, entries, true)
    }

    fn from_entries(n: usize, entries: &[(u32, u32, f64)], undirected: bool) -> Result<Self> {
        let mut triples = Vec::with_capacity(if undirected {
            entries.len() * 2
        } else {
            entries.len()
        });
        for &(src, dst, w) in entries {
            for &v in &[src, dst] {
                if v as usize >= n {
                    return Err(Error::Bounds {
                        what: "vertex",
                        index: v as usize,
                        size: n,
                    });
                }
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::params(format!(
                    "edge ({src}, {dst}) has invalid weight {w}; weights must be finite and nonnegative"
                )));
            }
            if src == dst {
                continue; // the diagonal is always empty
            }
            triples.push((src, dst, w));
            if undirected {
                triples.push((dst, src, w));
            }
        }
        Ok(Self::build_csr(n, triples, undirected))
    }

    /// Fast path for generators that already hold unique, in-bounds,
    /// self-loop-free pairs with `i < j`. Weights are all 1.
    pub(crate) fn undirected_from_unique_pairs(n: usize, pairs: &[(u32, u32)]) -> Self {
        let mut deg = vec![0usize; n];
        for &(i, j) in pairs {
            debug_assert!(i < j && (j as usize) < n);
            deg[i as usize] += 1;
            deg[j as usize] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut acc = 0usize;
        row_ptr.push(0);
        for d in &deg {
            acc += d;
            row_ptr.push(acc);
        }
        let mut cols = vec![0u32; acc];
        let mut cursor = row_ptr[..n].to_vec();
        for &(i, j) in pairs {
            cols[cursor[i as usize]] = j;
            cursor[i as usize] += 1;
            cols[cursor[j as usize]] = i;
            cursor[j as usize] += 1;
        }
        for v in 0..n {
            cols[row_ptr[v]..row_ptr[v + 1]].sort_unstable();
        }
        SparseGraph {
            n,
            row_ptr,
            cols,
            weights: None,
            undirected: true,
        }
    }

    /// Counting-sort CSR build; rows sorted by column, duplicates summed.
    fn build_csr(n: usize, triples: Vec<(u32, u32, f64)>, undirected: bool) -> Self {
        let mut deg = vec![0usize; n];
        for &(src, _, _) in &triples {
            deg[src as usize] += 1;
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut acc = 0usize;
        start.push(0);
        for d in &deg {
            acc += d;
            start.push(acc);
        }
        let mut cols = vec![0u32; acc];
        let mut ws = vec![0f64; acc];
        let mut cursor = start[..n].to_vec();
        for (src, dst, w) in triples {
            let c = cursor[src as usize];
            cols[c] = dst;
            ws[c] = w;
            cursor[src as usize] = c + 1;
        }

        let mut out_ptr = Vec::with_capacity(n + 1);
        let mut out_cols = Vec::with_capacity(acc);
        let mut out_ws = Vec::with_capacity(acc);
        out_ptr.push(0);
        let mut row: Vec<(u32, f64)> = Vec::new();
        for v in 0..n {
            row.clear();
            row.extend(
                cols[start[v]..start[v + 1]]
                    .iter()
                    .copied()
                    .zip(ws[start[v]..start[v + 1]].iter().copied()),
            );
            row.sort_unstable_by_key(|&(c, _)| c);
            for &(c, w) in row.iter() {
                if out_cols.len() > out_ptr[v] && *out_cols.last().unwrap() == c {
                    *out_ws.last_mut().unwrap() += w;
                } else {
                    out_cols.push(c);
                    out_ws.push(w);
                }
            }
            out_ptr.push(out_cols.len());
        }

        let weights = if out_ws.iter().all(|&w| w == 1.0) {
            None
        } else {
            Some(out_ws)
        };
        SparseGraph {
            n,
            row_ptr: out_ptr,
            cols: out_cols,
            weights,
            undirected,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_undirected(&self) -> bool {
        self.undirected
    }

    /// Number of stored entries (an undirected edge counts twice).
    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Edge count: undirected pairs, or directed entries.
    pub fn num_edges(&self) -> usize {
        if self.undirected {
            self.cols.len() / 2
        } else {
            self.cols.len()
        }
    }

    pub fn degree(&self, v: usize) -> usize {
        self.row_ptr[v + 1] - self.row_ptr[v]
    }

    /// Raw row access for hot loops: sorted neighbor columns plus weights
    /// (`None` = all ones).
    pub fn row(&self, v: usize) -> (&[u32], Option<&[f64]>) {
        let r = self.row_ptr[v]..self.row_ptr[v + 1];
        (
            &self.cols[r.clone()],
            self.weights.as_ref().map(|w| &w[r]),
        )
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (cols, ws) = self.row(v);
        cols.iter()
            .enumerate()
            .map(move |(k, &c)| (c as usize, ws.map_or(1.0, |w| w[k])))
    }

    /// Weight of entry (i, j), or 0 if absent.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let (cols, ws) = self.row(i);
        match cols.binary_search(&(j as u32)) {
            Ok(k) => ws.map_or(1.0, |w| w[k]),
            Err(_) => 0.0,
        }
    }

    /// All stored entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.neighbors(i).map(move |(j, w)| (i, j, w)))
    }

    /// Symmetrize: the result has edge (i, j) iff either direction was
    /// present, with the larger of the two directed weights. Undirected
    /// inputs are returned unchanged.
    pub fn to_undirected(&self) -> SparseGraph {
        if self.undirected {
            return self.clone();
        }
        let mut canon: Vec<(u32, u32, f64)> = Vec::with_capacity(self.cols.len());
        for (i, j, w) in self.entries() {
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            canon.push((a as u32, b as u32, w));
        }
        canon.sort_unstable_by_key(|&(a, b, _)| (a, b));
        let mut merged: Vec<(u32, u32, f64)> = Vec::with_capacity(canon.len());
        for (a, b, w) in canon {
            match merged.last_mut() {
                Some((pa, pb, pw)) if *pa == a && *pb == b => *pw = pw.max(w),
                _ => merged.push((a, b, w)),
            }
        }
        let mut mirrored = Vec::with_capacity(merged.len() * 2);
        for (a, b, w) in merged {
            mirrored.push((a, b, w));
            mirrored.push((b, a, w));
        }
        Self::build_csr(self.n, mirrored, true)
    }
}

/// Per-vertex labels in `{0, 1, ..., K}`, where 0 marks an unknown label
/// and `K` is the largest label present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<u32>,
    k: u32,
}

impl LabelVector {
    pub fn new(labels: Vec<u32>) -> Self {
        let k = labels.iter().copied().max().unwrap_or(0);
        LabelVector { labels, k }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize) -> u32 {
        self.labels[i]
    }

    /// K: the number of classes (largest label present; 0 if all unknown).
    pub fn num_classes(&self) -> u32 {
        self.k
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Number of vertices with a known (nonzero) label.
    pub fn num_known(&self) -> usize {
        self.labels.iter().filter(|&&y| y > 0).count()
    }

    /// n_k for k = 1..=K.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.k as usize];
        for &y in &self.labels {
            if y > 0 {
                counts[(y - 1) as usize] += 1;
            }
        }
        counts
    }

    /// Copy with the given entries set to 0 (unknown). K is recomputed.
    pub fn with_zeroed(&self, idx: &[usize]) -> LabelVector {
        let mut labels = self.labels.clone();
        for &i in idx {
            labels[i] = 0;
        }
        LabelVector::new(labels)
    }

    /// Renumber nonempty classes to consecutive `1..=K'`, dropping empty
    /// ones. Returns the new vector plus a map `old class -> new class`
    /// (index `k-1` holds the new label of old class `k`; 0 = removed).
    pub fn compact(&self) -> (LabelVector, Vec<u32>) {
        let counts = self.class_counts();
        let mut map = vec![0u32; self.k as usize];
        let mut next = 0u32;
        for (k, &c) in counts.iter().enumerate() {
            if c > 0 {
                next += 1;
                map[k] = next;
            }
        }
        let labels = self
            .labels
            .iter()
            .map(|&y| if y == 0 { 0 } else { map[(y - 1) as usize] })
            .collect();
        (LabelVector::new(labels), map)
    }
}

/// Old-index -> new-index translation produced by vertex removal.
#[derive(Debug, Clone)]
pub struct IndexRemap {
    /// `old_to_new[v]` is `None` when vertex `v` was removed.
    pub old_to_new: Vec<Option<u32>>,
    pub new_to_old: Vec<u32>,
}

/// A graph with its observed labels and, for simulations, the latent
/// ground-truth labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: SparseGraph,
    pub observed: LabelVector,
    pub latent: Option<LabelVector>,
}

impl Dataset {
    pub fn new(graph: SparseGraph, observed: LabelVector, latent: Option<LabelVector>) -> Result<Self> {
        if observed.len() != graph.n() {
            return Err(Error::shape(format!(
                "observed labels have length {} but the graph has {} vertices",
                observed.len(),
                graph.n()
            )));
        }
        if let Some(ref y0) = latent {
            if y0.len() != graph.n() {
                return Err(Error::shape(format!(
                    "latent labels have length {} but the graph has {} vertices",
                    y0.len(),
                    graph.n()
                )));
            }
        }
        Ok(Dataset {
            graph,
            observed,
            latent,
        })
    }
}

/// Drop zero-degree vertices and reindex labels consistently.
///
/// Every edge between retained vertices survives (any endpoint of an edge
/// has degree at least one, so only truly isolated vertices go away).
pub fn remove_singletons(d: &Dataset) -> (Dataset, IndexRemap) {
    let g = &d.graph;
    let n = g.n();
    let mut incident = vec![false; n];
    for v in 0..n {
        if g.degree(v) > 0 {
            incident[v] = true;
        }
        let (cols, _) = g.row(v);
        for &c in cols {
            incident[c as usize] = true;
        }
    }

    let mut old_to_new = vec![None; n];
    let mut new_to_old = Vec::new();
    for v in 0..n {
        if incident[v] {
            old_to_new[v] = Some(new_to_old.len() as u32);
            new_to_old.push(v as u32);
        }
    }

    let mut entries = Vec::with_capacity(g.nnz());
    for (i, j, w) in g.entries() {
        entries.push((old_to_new[i].unwrap(), old_to_new[j].unwrap(), w));
    }
    // Entries already include both directions for undirected graphs.
    let graph = SparseGraph::build_csr(new_to_old.len(), entries, g.is_undirected());

    let pick = |y: &LabelVector| {
        LabelVector::new(new_to_old.iter().map(|&v| y.get(v as usize)).collect())
    };
    let observed = pick(&d.observed);
    let latent = d.latent.as_ref().map(pick);

    (
        Dataset {
            graph,
            observed,
            latent,
        },
        IndexRemap {
            old_to_new,
            new_to_old,
        },
    )
}

/// n_k for k = 1..=K (free-function form of [`LabelVector::class_counts`]).
pub fn class_counts(y: &LabelVector) -> Vec<usize> {
    y.class_counts()
}
