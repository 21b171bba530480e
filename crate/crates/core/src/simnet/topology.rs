//! Node placement and pairwise link quality: the source of neighborhood truth.

use thiserror::Error;

use crate::linkest::{CARRIER_MIN, D1_MIN};
use crate::simnet::time::{NodeId, BASE_STATION, MAX_NODES};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("node count {0} exceeds the {MAX_NODES}-node id space")]
    TooManyNodes(usize),
    #[error("node count must be positive")]
    Empty,
    #[error("link quality matrix must be {n}x{n}, got row {row} of length {len}")]
    BadMatrixShape { n: usize, row: usize, len: usize },
    #[error("link quality {q} at ({i},{j}) outside [0,100]")]
    QualityOutOfRange { i: usize, j: usize, q: u8 },
    #[error("link quality matrix asymmetric at ({i},{j})")]
    Asymmetric { i: usize, j: usize },
    #[error("self link quality at node {0} must be 100")]
    BadDiagonal(usize),
}

/// Static per-run network topology: positions in feet plus a symmetric
/// link-quality matrix with entries in `[0, 100]`.
///
/// Node 0 is the base station. Qualities are fixed for the whole run, which
/// keeps runs reproducible per seed at the cost of modeling no temporal
/// link variation.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    positions: Vec<(f64, f64)>,
    link_quality: Vec<Vec<u8>>,
}

impl Topology {
    pub fn new(positions: Vec<(f64, f64)>, link_quality: Vec<Vec<u8>>) -> Result<Self, TopologyError> {
        let n = positions.len();
        if n == 0 {
            return Err(TopologyError::Empty);
        }
        if n > MAX_NODES {
            return Err(TopologyError::TooManyNodes(n));
        }
        if link_quality.len() != n {
            return Err(TopologyError::BadMatrixShape { n, row: usize::MAX, len: link_quality.len() });
        }
        for (i, row) in link_quality.iter().enumerate() {
            if row.len() != n {
                return Err(TopologyError::BadMatrixShape { n, row: i, len: row.len() });
            }
            for (j, &q) in row.iter().enumerate() {
                if q > 100 {
                    return Err(TopologyError::QualityOutOfRange { i, j, q });
                }
            }
            if row[i] != 100 {
                return Err(TopologyError::BadDiagonal(i));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if link_quality[i][j] != link_quality[j][i] {
                    return Err(TopologyError::Asymmetric { i, j });
                }
            }
        }
        Ok(Topology { positions, link_quality })
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn base_station(&self) -> NodeId {
        BASE_STATION
    }

    pub fn position(&self, node: NodeId) -> (f64, f64) {
        self.positions[node as usize]
    }

    pub fn positions(&self) -> &[(f64, f64)] {
        &self.positions
    }

    pub fn quality(&self, a: NodeId, b: NodeId) -> u8 {
        self.link_quality[a as usize][b as usize]
    }

    pub fn quality_matrix(&self) -> &[Vec<u8>] {
        &self.link_quality
    }

    /// All node ids, in ascending order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.node_count() as u8).map(|i| i as NodeId)
    }

    /// Maximum number of reliable (`quality >= D1_MIN`) neighbors over all
    /// nodes; the degree bound of the network.
    pub fn degree(&self) -> usize {
        self.nodes()
            .map(|i| {
                self.nodes()
                    .filter(|&j| j != i && self.quality(i, j) >= D1_MIN)
                    .count()
            })
            .max()
            .unwrap_or(0)
    }

    /// Hop counts from `from` over the reliable-link graph (`quality >= D1_MIN`).
    /// Unreachable nodes get `None`.
    pub fn reliable_hops(&self, from: NodeId) -> Vec<Option<u32>> {
        self.bfs_hops(from, D1_MIN)
    }

    /// Hop counts from `from` over the carrier-audible graph
    /// (`quality >= CARRIER_MIN`); the notion of distance used for
    /// interference and for the distance-2 oracle.
    pub fn carrier_hops(&self, from: NodeId) -> Vec<Option<u32>> {
        self.bfs_hops(from, CARRIER_MIN)
    }

    fn bfs_hops(&self, from: NodeId, threshold: u8) -> Vec<Option<u32>> {
        let n = self.node_count();
        let mut hops = vec![None; n];
        hops[from as usize] = Some(0);
        let mut frontier = vec![from];
        let mut depth = 0u32;
        while !frontier.is_empty() {
            depth += 1;
            let mut next = Vec::new();
            for &u in &frontier {
                for v in self.nodes() {
                    if hops[v as usize].is_none() && self.quality(u, v) >= threshold {
                        hops[v as usize] = Some(depth);
                        next.push(v);
                    }
                }
            }
            frontier = next;
        }
        hops
    }

    /// Diameter of the reliable-link graph, ignoring unreachable pairs.
    pub fn diameter(&self) -> u32 {
        self.nodes()
            .flat_map(|i| self.reliable_hops(i).into_iter().flatten())
            .max()
            .unwrap_or(0)
    }
}
