//! Sparse undirected graphs and the normalized-adjacency operator.

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, LinearOperator, Matrix};

pub type NodeId = usize;

/// Immutable simple undirected graph in CSR form.
///
/// Neighbor lists are sorted, so edge lookup is a binary search. Self-loops
/// and duplicate edges are never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_nodes: usize,
    indptr: Vec<usize>,
    indices: Vec<NodeId>,
}

impl Graph {
    pub fn empty(n_nodes: usize) -> Self {
        Graph {
            n_nodes,
            indptr: vec![0; n_nodes + 1],
            indices: Vec::new(),
        }
    }

    /// Builds a graph from an edge list. Each pair is symmetrized; self-loops
    /// and repeated pairs are dropped.
    pub fn from_edges<I>(n_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); n_nodes];
        for (u, v) in edges {
            if u >= n_nodes || v >= n_nodes {
                return Err(Error::invalid(format!(
                    "edge ({u},{v}) out of range for {n_nodes} nodes"
                )));
            }
            if u != v {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        Ok(Self::from_adjacency_lists(adj))
    }

    fn from_adjacency_lists(mut adj: Vec<Vec<NodeId>>) -> Self {
        let n_nodes = adj.len();
        let mut indptr = Vec::with_capacity(n_nodes + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            indices.extend_from_slice(list);
            indptr.push(indices.len());
        }
        Graph {
            n_nodes,
            indptr,
            indices,
        }
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.indices.len() / 2
    }

    #[inline]
    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.indices[self.indptr[u]..self.indptr[u + 1]]
    }

    #[inline]
    pub fn degree(&self, u: NodeId) -> usize {
        self.indptr[u + 1] - self.indptr[u]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n_nodes).map(|u| self.degree(u)).max().unwrap_or(0)
    }

    #[inline]
    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (0..self.n_nodes).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    pub fn degrees(&self) -> DegreeVector {
        degree_vector(self)
    }

    /// Returns a copy of this graph with edge `(u, v)` toggled.
    pub fn flip_edge(&self, u: NodeId, v: NodeId) -> Result<Graph> {
        flip_edge(self, u, v)
    }

    /// Keeps only the edges for which `keep(u, v)` holds (`u < v`).
    pub fn retain_edges(&self, mut keep: impl FnMut(NodeId, NodeId) -> bool) -> Graph {
        let kept: Vec<_> = self.edges().filter(|&(u, v)| keep(u, v)).collect();
        Graph::from_edges(self.n_nodes, kept).expect("subset of valid edges")
    }
}

/// Per-node degrees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeVector(Vec<usize>);

impl DegreeVector {
    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

impl Deref for DegreeVector {
    type Target = [usize];
    fn deref(&self) -> &[usize] {
        &self.0
    }
}

pub fn degree_vector(g: &Graph) -> DegreeVector {
    DegreeVector((0..g.n_nodes()).map(|u| g.degree(u)).collect())
}

/// `D^{-1/2} A D^{-1/2}`, optionally with `A + I` in place of `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    matrix: CsrMatrix,
    self_loops: bool,
}

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn self_loops(&self) -> bool {
        self.self_loops
    }

    pub fn n_nodes(&self) -> usize {
        self.matrix.rows()
    }

    pub fn get(&self, i: NodeId, j: NodeId) -> f64 {
        self.matrix.get(i, j)
    }
}

impl LinearOperator for NormalizedAdjacency {
    fn shape(&self) -> (usize, usize) {
        self.matrix.shape()
    }
    fn apply(&self, b: &Matrix) -> Matrix {
        self.matrix.apply(b)
    }
    fn apply_t(&self, b: &Matrix) -> Matrix {
        self.matrix.apply_t(b)
    }
    fn apply_rows(&self, b: &Matrix, rows: &[usize]) -> Matrix {
        self.matrix.apply_rows(b, rows)
    }
    fn apply_t_rows(&self, b: &Matrix, rows: &[usize]) -> Matrix {
        self.matrix.apply_t_rows(b, rows)
    }
}

/// Zero-degree nodes get all-zero rows and columns.
pub fn normalized_adjacency(g: &Graph, self_loops: bool) -> NormalizedAdjacency {
    let n = g.n_nodes();
    let extra = usize::from(self_loops);
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|u| match g.degree(u) + extra {
            0 => 0.0,
            d => 1.0 / (d as f64).sqrt(),
        })
        .collect();
    let mut indptr = Vec::with_capacity(n + 1);
    indptr.push(0);
    let mut indices = Vec::with_capacity(2 * g.n_edges() + extra * n);
    let mut values = Vec::with_capacity(indices.capacity());
    for u in 0..n {
        let mut pushed_self = !self_loops;
        for &v in g.neighbors(u) {
            if !pushed_self && u < v {
                indices.push(u);
                values.push(inv_sqrt[u] * inv_sqrt[u]);
                pushed_self = true;
            }
            indices.push(v);
            values.push(inv_sqrt[u] * inv_sqrt[v]);
        }
        if !pushed_self {
            indices.push(u);
            values.push(inv_sqrt[u] * inv_sqrt[u]);
        }
        indptr.push(indices.len());
    }
    let matrix = CsrMatrix::from_parts(n, n, indptr, indices, values)
        .expect("neighbor lists are sorted and in range");
    NormalizedAdjacency { matrix, self_loops }
}

/// Toggles edge `(u, v)`, returning a new graph.
pub fn flip_edge(g: &Graph, u: NodeId, v: NodeId) -> Result<Graph> {
    let n = g.n_nodes();
    if u == v {
        return Err(Error::invalid(format!("cannot flip self-loop ({u},{u})")));
    }
    if u >= n || v >= n {
        return Err(Error::invalid(format!(
            "edge ({u},{v}) out of range for {n} nodes"
        )));
    }
    let present = g.has_edge(u, v);
    let mut indptr = Vec::with_capacity(n + 1);
    indptr.push(0);
    let mut indices = Vec::with_capacity(g.indices.len() + 2);
    for w in 0..n {
        let nbrs = g.neighbors(w);
        let other = if w == u {
            Some(v)
        } else if w == v {
            Some(u)
        } else {
            None
        };
        match other {
            None => indices.extend_from_slice(nbrs),
            Some(x) => {
                let pos = nbrs.partition_point(|&y| y < x);
                indices.extend_from_slice(&nbrs[..pos]);
                if present {
                    indices.extend_from_slice(&nbrs[pos + 1..]);
                } else {
                    indices.push(x);
                    indices.extend_from_slice(&nbrs[pos..]);
                }
            }
        }
        indptr.push(indices.len());
    }
    Ok(Graph {
        n_nodes: n,
        indptr,
        indices,
    })
}

/// Average number of training neighbors per node outside the training set:
/// `(1/|V∖T|) Σ_{i∈T} Σ_{j∉T} a_ij`.
pub fn avg_training_neighbors(g: &Graph, train: &[NodeId]) -> Result<f64> {
    let n = g.n_nodes();
    let mut in_train = vec![false; n];
    for &t in train {
        if t >= n {
            return Err(Error::invalid(format!("training node {t} out of range")));
        }
        in_train[t] = true;
    }
    let n_out = in_train.iter().filter(|&&b| !b).count();
    if n_out == 0 {
        return Err(Error::invalid("training set covers every node"));
    }
    let cross: usize = (0..n)
        .filter(|&i| in_train[i])
        .map(|i| g.neighbors(i).iter().filter(|&&j| !in_train[j]).count())
        .sum();
    Ok(cross as f64 / n_out as f64)
}

pub(crate) fn mask_from(n: usize, nodes: &[NodeId]) -> Vec<bool> {
    let mut mask = vec![false; n];
    for &u in nodes {
        mask[u] = true;
    }
    mask
}
