//! Undirected communication graphs with 0/1 edge weights.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const RANDOM_GRAPH_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<bool>>,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from an adjacency matrix with entries in `{0, 1}`.
    ///
    /// Rejects non-square, weighted, self-looped and asymmetric matrices.
    /// Connectivity is checked separately by [`Graph::is_connected`].
    pub fn from_adjacency(adjacency: &[Vec<u8>]) -> Result<Self> {
        let n = adjacency.len();
        if n == 0 {
            return Err(Error::Structure("graph has no nodes".into()));
        }
        let mut adj = vec![vec![false; n]; n];
        for (i, row) in adjacency.iter().enumerate() {
            if row.len() != n {
                return Err(Error::dim(format!("adjacency row {i}"), n, row.len()));
            }
            for (j, &a) in row.iter().enumerate() {
                match a {
                    0 => {}
                    1 => adj[i][j] = true,
                    w => {
                        return Err(Error::Structure(format!(
                            "adjacency entry ({i},{j}) = {w}; weights must be 0 or 1"
                        )))
                    }
                }
            }
        }
        for i in 0..n {
            if adj[i][i] {
                return Err(Error::Structure(format!("self loop at node {i}")));
            }
            for j in 0..i {
                if adj[i][j] != adj[j][i] {
                    return Err(Error::Structure(format!(
                        "adjacency not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self::from_bool(adj))
    }

    fn from_bool(adjacency: Vec<Vec<bool>>) -> Self {
        let neighbors = adjacency
            .iter()
            .map(|row| row.iter().enumerate().filter(|(_, &a)| a).map(|(j, _)| j).collect())
            .collect();
        Self {
            adjacency,
            neighbors,
        }
    }

    pub fn ring(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Structure("graph has no nodes".into()));
        }
        let mut adj = vec![vec![false; n]; n];
        if n > 1 {
            for i in 0..n {
                let j = (i + 1) % n;
                if i != j {
                    adj[i][j] = true;
                    adj[j][i] = true;
                }
            }
        }
        Ok(Self::from_bool(adj))
    }

    /// Erdős–Rényi graph `G(n, edge_prob)` redrawn from the same seeded stream
    /// until it is connected.
    pub fn random_connected(n: usize, edge_prob: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Structure("graph has no nodes".into()));
        }
        if !(edge_prob > 0.0 && edge_prob <= 1.0) {
            return Err(Error::Structure(format!(
                "edge probability {edge_prob} outside (0, 1]"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..RANDOM_GRAPH_ATTEMPTS {
            let mut adj = vec![vec![false; n]; n];
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.gen_bool(edge_prob) {
                        adj[i][j] = true;
                        adj[j][i] = true;
                    }
                }
            }
            let g = Self::from_bool(adj);
            if g.is_connected() {
                return Ok(g);
            }
        }
        Err(Error::Structure(format!(
            "no connected G({n}, {edge_prob}) found after {RANDOM_GRAPH_ATTEMPTS} draws"
        )))
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> bool {
        self.adjacency[i][j]
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn adjacency_matrix(&self) -> Vec<Vec<u8>> {
        self.adjacency
            .iter()
            .map(|row| row.iter().map(|&a| a as u8).collect())
            .collect()
    }

    /// Breadth-first search from node 0 reaches every node.
    pub fn is_connected(&self) -> bool {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in self.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    }
}
