//! Sparse undirected graphs in CSR form and the self-looped normalized Laplacian.
//!
//! Self loops are never stored. The operator `L = I - D^{-1/2} (A + I) D^{-1/2}`
//! with `D = deg + 1` adds them implicitly, so `degrees` keeps the plain
//! neighbor count used by node homophily.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2, ArrayViewMut2, Axis};

use crate::error::{Result, RhoError};

/// Immutable symmetric graph in compressed sparse row form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    degrees: Vec<usize>,
}

impl Graph {
    /// Builds a graph from an undirected edge list.
    ///
    /// Orientation is ignored, self loops are dropped and duplicates merged.
    pub fn from_edges(edges: &[(usize, usize)], n: usize) -> Result<Self> {
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(src, dst) in edges {
            if src >= n || dst >= n {
                return Err(RhoError::NodeOutOfRange { src, dst, n });
            }
            if src == dst {
                continue;
            }
            adjacency[src].push(dst);
            adjacency[dst].push(src);
        }

        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        let mut degrees = Vec::with_capacity(n);
        row_offsets.push(0);
        for mut neighbors in adjacency {
            neighbors.sort_unstable();
            neighbors.dedup();
            degrees.push(neighbors.len());
            col_indices.extend_from_slice(&neighbors);
            row_offsets.push(col_indices.len());
        }

        Ok(Graph {
            n,
            row_offsets,
            col_indices,
            degrees,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.col_indices.len() / 2
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn degree(&self, v: usize) -> usize {
        self.degrees[v]
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[v]..self.row_offsets[v + 1]]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Each undirected edge once, with `src < dst`, in row order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    pub fn laplacian(&self) -> SparseSymOp<'_> {
        SparseSymOp::new(self)
    }

    /// Reads a `src,dst` CSV edge list. A leading `src,dst` header is optional.
    pub fn read_edge_csv(path: &Path) -> Result<Vec<(usize, usize)>> {
        let text = fs::read_to_string(path).map_err(|e| RhoError::io(path, e))?;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || (idx == 0 && line.replace(' ', "") == "src,dst") {
                continue;
            }
            let parse_err = |message: String| RhoError::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message,
            };
            let mut fields = line.split(',');
            let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(parse_err(format!("expected `src,dst`, got `{line}`")));
            };
            let src = a
                .trim()
                .parse::<usize>()
                .map_err(|e| parse_err(format!("bad source id `{a}`: {e}")))?;
            let dst = b
                .trim()
                .parse::<usize>()
                .map_err(|e| parse_err(format!("bad target id `{b}`: {e}")))?;
            edges.push((src, dst));
        }
        Ok(edges)
    }

    pub fn write_edge_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("src,dst\n");
        for (u, v) in self.edges() {
            out.push_str(&format!("{u},{v}\n"));
        }
        fs::write(path, out).map_err(|e| RhoError::io(path, e))
    }
}

/// Implicit self-looped normalized Laplacian of a [`Graph`].
#[derive(Debug, Clone)]
pub struct SparseSymOp<'g> {
    graph: &'g Graph,
    inv_sqrt_deg: Vec<f64>,
}

impl<'g> SparseSymOp<'g> {
    pub fn new(graph: &'g Graph) -> Self {
        let inv_sqrt_deg = graph
            .degrees
            .iter()
            .map(|&d| 1.0 / ((d + 1) as f64).sqrt())
            .collect();
        SparseSymOp {
            graph,
            inv_sqrt_deg,
        }
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    /// `1 / sqrt(d_v + 1)` per node.
    pub fn scaling(&self) -> &[f64] {
        &self.inv_sqrt_deg
    }

    /// Returns `L X` without materializing `L`.
    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros(x.raw_dim());
        self.apply_into(x, out.view_mut())?;
        Ok(out)
    }

    /// Writes `L X` into `out`, which must have the shape of `x`.
    pub fn apply_into(&self, x: ArrayView2<'_, f64>, mut out: ArrayViewMut2<'_, f64>) -> Result<()> {
        let n = self.graph.n;
        if x.nrows() != n {
            return Err(RhoError::DimensionMismatch {
                context: "laplacian_apply rows",
                expected: n,
                actual: x.nrows(),
            });
        }
        if out.dim() != x.dim() {
            return Err(RhoError::DimensionMismatch {
                context: "laplacian_apply output columns",
                expected: x.ncols(),
                actual: out.ncols(),
            });
        }
        let s = &self.inv_sqrt_deg;
        for (v, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            // Row v of (A + I) scaled: s_v * (s_v x_v + sum_u s_u x_u).
            row.assign(&x.row(v));
            row *= s[v];
            for &u in self.graph.neighbors(v) {
                row.scaled_add(s[u], &x.row(u));
            }
            row *= -s[v];
            row += &x.row(v);
        }
        Ok(())
    }
}

/// Per-node homophily for non-isolated nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct HomophilyReport {
    /// `(node, H_v)` for every node with at least one neighbor, in node order.
    pub values: Vec<(usize, f64)>,
    /// Isolated nodes, for which homophily is undefined.
    pub excluded: Vec<usize>,
}

/// One histogram bin over `[low, high)`; the last bin is closed.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

impl HomophilyReport {
    pub fn value_of(&self, node: usize) -> Option<f64> {
        self.values
            .binary_search_by_key(&node, |&(v, _)| v)
            .ok()
            .map(|i| self.values[i].1)
    }

    /// Mean homophily over the given nodes, skipping isolated ones.
    pub fn mean_over(&self, nodes: impl IntoIterator<Item = usize>) -> Option<f64> {
        let (sum, count) = nodes
            .into_iter()
            .filter_map(|v| self.value_of(v))
            .fold((0.0, 0usize), |(s, c), h| (s + h, c + 1));
        (count > 0).then(|| sum / count as f64)
    }

    /// Histogram over `[0, 1]` restricted to nodes accepted by `keep`.
    pub fn histogram(&self, bins: usize, keep: impl Fn(usize) -> bool) -> Vec<HistogramBin> {
        let bins = bins.max(1);
        let width = 1.0 / bins as f64;
        let mut out: Vec<HistogramBin> = (0..bins)
            .map(|b| HistogramBin {
                low: b as f64 * width,
                high: (b + 1) as f64 * width,
                count: 0,
            })
            .collect();
        for &(v, h) in &self.values {
            if keep(v) {
                let b = ((h * bins as f64).floor() as usize).min(bins - 1);
                out[b].count += 1;
            }
        }
        out
    }
}

/// Fraction of each node's neighbors sharing its label.
pub fn node_homophily(graph: &Graph, labels: &[u8]) -> Result<HomophilyReport> {
    if labels.len() != graph.n {
        return Err(RhoError::DimensionMismatch {
            context: "node_homophily labels",
            expected: graph.n,
            actual: labels.len(),
        });
    }
    let mut values = Vec::with_capacity(graph.n);
    let mut excluded = Vec::new();
    for v in 0..graph.n {
        let neighbors = graph.neighbors(v);
        if neighbors.is_empty() {
            excluded.push(v);
            continue;
        }
        let same = neighbors.iter().filter(|&&u| labels[u] == labels[v]).count();
        values.push((v, same as f64 / neighbors.len() as f64));
    }
    Ok(HomophilyReport { values, excluded })
}
