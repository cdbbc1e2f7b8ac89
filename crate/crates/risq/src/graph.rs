//! RIS interaction graph: k-nearest-neighbor topology on the element line,
//! distance-decayed edge weights, hardware-sized contiguous partitions, and
//! stitching of per-block results back into a global configuration.

use crate::channel::RisState;
use crate::error::{Error, Result};

/// Undirected weighted graph over RIS elements.
///
/// `vertex_ids` are global element indices; `edges` hold local vertex
/// indices with i < j; `weights[e] = exp(-w_decay * |p_i - p_j|)`.
#[derive(Debug, Clone)]
pub struct RisGraph {
    pub vertex_ids: Vec<usize>,
    pub positions_m: Vec<f64>,
    pub edges: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
    pub w_decay_per_m: f64,
}

impl RisGraph {
    pub fn n_vertices(&self) -> usize {
        self.vertex_ids.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Local indices of neighbors of local vertex `i`.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for &(a, b) in &self.edges {
            if a == i {
                out.push(b);
            } else if b == i {
                out.push(a);
            }
        }
        out
    }
}

/// A contiguous slice of the graph sized for a 2|V_b|-qubit circuit.
#[derive(Debug, Clone)]
pub struct SubgraphBlock {
    pub block_id: usize,
    /// Global element indices covered by this block.
    pub vertex_ids: Vec<usize>,
    /// Local subgraph over the block's vertices.
    pub graph: RisGraph,
    /// Local indices that lost at least one inter-block edge.
    pub boundary_vertices: Vec<usize>,
}

impl SubgraphBlock {
    pub fn n_qubits(&self) -> usize {
        2 * self.vertex_ids.len()
    }
}

/// Build the element graph: each vertex is connected to its `k_neighbors`
/// nearest neighbors on the line, with exponentially decaying weights.
pub fn build_graph(positions: &[f64], w_decay: f64, k_neighbors: usize) -> Result<RisGraph> {
    if positions.is_empty() {
        return Err(Error::domain("cannot build a graph over zero elements"));
    }
    if positions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("positions must be strictly increasing"));
    }
    if k_neighbors < 1 {
        return Err(Error::domain("k_neighbors must be >= 1"));
    }
    let n = positions.len();
    let mut edge_set = std::collections::BTreeSet::new();
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|j| *j != i).collect();
        others.sort_by(|&a, &b| {
            let da = (positions[a] - positions[i]).abs();
            let db = (positions[b] - positions[i]).abs();
            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
        });
        for &j in others.iter().take(k_neighbors) {
            edge_set.insert((i.min(j), i.max(j)));
        }
    }
    let edges: Vec<(usize, usize)> = edge_set.into_iter().collect();
    let weights = edges
        .iter()
        .map(|&(i, j)| (-w_decay * (positions[i] - positions[j]).abs()).exp())
        .collect();
    Ok(RisGraph {
        vertex_ids: (0..n).collect(),
        positions_m: positions.to_vec(),
        edges,
        weights,
        w_decay_per_m: w_decay,
    })
}

/// Partition into contiguous index-interval blocks of size <= cap.
/// Inter-block edges are dropped; their endpoints are recorded as boundary
/// vertices on each side.
pub fn partition(graph: &RisGraph, cap: usize) -> Result<Vec<SubgraphBlock>> {
    if cap < 1 {
        return Err(Error::domain("partition cap must be >= 1"));
    }
    let n = graph.n_vertices();
    let mut blocks = Vec::new();
    let mut start = 0usize;
    let mut block_id = 0usize;
    while start < n {
        let end = (start + cap).min(n); // [start, end)
        let in_block = |v: usize| v >= start && v < end;
        let mut edges = Vec::new();
        let mut weights = Vec::new();
        let mut boundary = std::collections::BTreeSet::new();
        for (e, &(a, b)) in graph.edges.iter().enumerate() {
            match (in_block(a), in_block(b)) {
                (true, true) => {
                    edges.push((a - start, b - start));
                    weights.push(graph.weights[e]);
                }
                (true, false) => {
                    boundary.insert(a - start);
                }
                (false, true) => {
                    boundary.insert(b - start);
                }
                (false, false) => {}
            }
        }
        blocks.push(SubgraphBlock {
            block_id,
            vertex_ids: graph.vertex_ids[start..end].to_vec(),
            graph: RisGraph {
                vertex_ids: graph.vertex_ids[start..end].to_vec(),
                positions_m: graph.positions_m[start..end].to_vec(),
                edges,
                weights,
                w_decay_per_m: graph.w_decay_per_m,
            },
            boundary_vertices: boundary.into_iter().collect(),
        });
        block_id += 1;
        start = end;
    }
    Ok(blocks)
}

/// Refresh edge weights from estimated positions p_hat_n =
/// sum_{k<n} <a_k> d_min. Returns the new weight table.
pub fn refresh_weights(
    graph: &RisGraph,
    mean_activation: &[f64],
    d_min: f64,
    w_decay: f64,
) -> Result<Vec<f64>> {
    if mean_activation.len() != graph.n_vertices() {
        return Err(Error::contract(
            "mean_activation length does not match graph",
        ));
    }
    if mean_activation.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::contract("mean activations must lie in [0,1]"));
    }
    let mut p_hat = vec![0.0f64; graph.n_vertices()];
    let mut acc = 0.0;
    for (n, p) in p_hat.iter_mut().enumerate() {
        *p = acc;
        acc += mean_activation[n] * d_min;
    }
    Ok(graph
        .edges
        .iter()
        .map(|&(i, j)| (-w_decay * (p_hat[i] - p_hat[j]).abs()).exp())
        .collect())
}

/// Assemble per-block (activation, phases) into the global RIS state.
/// Every global vertex must be covered exactly once.
pub fn stitch(
    block_results: &[(Vec<usize>, Vec<bool>, Vec<f64>)],
    n_total: usize,
) -> Result<RisState> {
    let mut activation = vec![false; n_total];
    let mut phases = vec![0.0f64; n_total];
    let mut seen = vec![false; n_total];
    for (ids, act, phi) in block_results {
        if ids.len() != act.len() || ids.len() != phi.len() {
            return Err(Error::contract("block result dimensions disagree"));
        }
        for (i, &v) in ids.iter().enumerate() {
            if v >= n_total {
                return Err(Error::contract(format!("vertex {v} out of range")));
            }
            if seen[v] {
                return Err(Error::contract(format!("vertex {v} covered twice")));
            }
            seen[v] = true;
            activation[v] = act[i];
            phases[v] = phi[i];
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::contract(format!("vertex {missing} not covered")));
    }
    Ok(RisState::new(activation, phases))
}
