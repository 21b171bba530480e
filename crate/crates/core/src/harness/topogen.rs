//! Topology generation and the explicit topology file format.

use thiserror::Error;

use crate::simnet::{Topology, TopologyError, MAX_NODES};

/// Maps inter-node distance in feet to a link quality in `[0, 100]`.
/// Quality never increases with distance and is 100 at distance zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QualityProfile {
    /// Perfect links up to 1.2 spacing steps, silence beyond: neighbors on
    /// the placement lattice never lose packets and nothing else is
    /// audible. Interference then comes only from two-step hidden
    /// terminals colliding at the node between them.
    Lossless { spacing_ft: f64 },
    /// Full quality up to `full_ft`, then a linear fall to the carrier
    /// floor of 30 at `edge_ft`, silence beyond. The defaults (7 ft and
    /// 14 ft) put lattice neighbors around 90 and diagonals in the
    /// carrier-only band on an 8 ft grid.
    DistanceDecay { full_ft: f64, edge_ft: f64 },
}

impl QualityProfile {
    pub fn quality(&self, distance_ft: f64) -> u8 {
        match *self {
            QualityProfile::Lossless { spacing_ft } => {
                if distance_ft <= 1.2 * spacing_ft {
                    100
                } else {
                    0
                }
            }
            QualityProfile::DistanceDecay { full_ft, edge_ft } => {
                if distance_ft <= full_ft {
                    100
                } else if distance_ft <= edge_ft {
                    let span = edge_ft - full_ft;
                    let fall = 70.0 * (distance_ft - full_ft) / span;
                    (100.0 - fall).round().clamp(0.0, 100.0) as u8
                } else {
                    0
                }
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum TopoGenError {
    #[error("{0} nodes exceed the {MAX_NODES}-node id space")]
    TooManyNodes(usize),
    #[error("topology needs at least one node")]
    Empty,
    #[error(transparent)]
    Invalid(#[from] TopologyError),
    #[error("topology file: {0}")]
    BadFile(String),
}

fn from_positions(
    positions: Vec<(f64, f64)>,
    profile: QualityProfile,
) -> Result<Topology, TopoGenError> {
    let n = positions.len();
    if n == 0 {
        return Err(TopoGenError::Empty);
    }
    if n > MAX_NODES {
        return Err(TopoGenError::TooManyNodes(n));
    }
    let mut quality = vec![vec![0u8; n]; n];
    for i in 0..n {
        quality[i][i] = 100;
        for j in (i + 1)..n {
            let dx = positions[i].0 - positions[j].0;
            let dy = positions[i].1 - positions[j].1;
            let q = profile.quality((dx * dx + dy * dy).sqrt());
            quality[i][j] = q;
            quality[j][i] = q;
        }
    }
    Ok(Topology::new(positions, quality)?)
}

/// `rows x cols` grid with the base station at the (0,0) corner, node ids
/// assigned row-major.
pub fn gen_grid(
    rows: usize,
    cols: usize,
    spacing_ft: f64,
    profile: QualityProfile,
) -> Result<Topology, TopoGenError> {
    let mut positions = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            positions.push((c as f64 * spacing_ft, r as f64 * spacing_ft));
        }
    }
    from_positions(positions, profile)
}

/// `n` nodes filling a near-square grid row-major; convenient for sweeps
/// over node counts that are not products of small factors.
pub fn gen_grid_n(
    n: usize,
    spacing_ft: f64,
    profile: QualityProfile,
) -> Result<Topology, TopoGenError> {
    if n == 0 {
        return Err(TopoGenError::Empty);
    }
    let cols = (n as f64).sqrt().ceil() as usize;
    let mut positions = Vec::with_capacity(n);
    'outer: for r in 0.. {
        for c in 0..cols {
            if positions.len() == n {
                break 'outer;
            }
            positions.push((c as f64 * spacing_ft, r as f64 * spacing_ft));
        }
    }
    from_positions(positions, profile)
}

/// A line with the base station at the center: ids `1..=half` stretch to
/// the right, `half+1..=2*half` to the left. Both branches carry equal
/// load, so the base's two subtrees drain simultaneously.
pub fn gen_center_line(
    half: usize,
    spacing_ft: f64,
    profile: QualityProfile,
) -> Result<Topology, TopoGenError> {
    let mut positions = vec![(0.0, 0.0)];
    for i in 1..=half {
        positions.push((i as f64 * spacing_ft, 0.0));
    }
    for i in 1..=half {
        positions.push((-(i as f64) * spacing_ft, 0.0));
    }
    from_positions(positions, profile)
}

/// The 21-node steady-state topology: ten nodes either side of a centered
/// base station on perfect adjacent links.
pub fn line21(spacing_ft: f64) -> Result<Topology, TopoGenError> {
    gen_center_line(10, spacing_ft, QualityProfile::Lossless { spacing_ft })
}

/// The 21-node lossy reconstruction: a line through the base station at
/// 8 ft spacing with decaying link qualities, so every forwarding hop
/// loses a few percent of its packets. The branches are eleven and nine
/// nodes long: the base keeps more than one 1-hop neighbor, both branches
/// reach well past the two-hop interference range, and the shorter branch
/// draining first gives the uneven late-run rate seen in practice.
pub fn lossy21(full_ft: f64, edge_ft: f64) -> Result<Topology, TopoGenError> {
    let spacing = 8.0;
    let mut positions = vec![(0.0, 0.0)];
    for i in 1..=11 {
        positions.push((f64::from(i) * spacing, 0.0));
    }
    for i in 1..=9 {
        positions.push((-f64::from(i) * spacing, 0.0));
    }
    from_positions(positions, QualityProfile::DistanceDecay { full_ft, edge_ft })
}

const TOPOLOGY_FILE_MAGIC: &str = "harvest-topology-v1";

/// Render a topology to the explicit-file format: a magic line, node
/// positions, and the full quality matrix.
pub fn render_topology(topology: &Topology) -> String {
    let n = topology.node_count();
    let mut out = String::new();
    out.push_str(TOPOLOGY_FILE_MAGIC);
    out.push('\n');
    out.push_str(&format!("nodes {n}\n"));
    for (id, (x, y)) in topology.positions().iter().enumerate() {
        out.push_str(&format!("{id} {x} {y}\n"));
    }
    out.push_str("quality\n");
    for row in topology.quality_matrix() {
        let cells: Vec<String> = row.iter().map(|q| q.to_string()).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_topology(text: &str) -> Result<Topology, TopoGenError> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let bad = |msg: &str| TopoGenError::BadFile(msg.to_string());
    if lines.next() != Some(TOPOLOGY_FILE_MAGIC) {
        return Err(bad("missing magic line"));
    }
    let n: usize = lines
        .next()
        .and_then(|l| l.strip_prefix("nodes "))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("missing node count"))?;
    let mut positions = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines.next().ok_or_else(|| bad("truncated positions"))?;
        let mut parts = line.split_whitespace();
        let id: usize = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("bad node id"))?;
        if id != positions.len() {
            return Err(bad("node ids must be dense and ascending"));
        }
        let x: f64 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("bad x coordinate"))?;
        let y: f64 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("bad y coordinate"))?;
        positions.push((x, y));
    }
    if lines.next() != Some("quality") {
        return Err(bad("missing quality section"));
    }
    let mut matrix = Vec::with_capacity(n);
    for _ in 0..n {
        let line = lines.next().ok_or_else(|| bad("truncated quality matrix"))?;
        let row: Result<Vec<u8>, _> = line.split_whitespace().map(str::parse).collect();
        let row = row.map_err(|_| bad("bad quality value"))?;
        matrix.push(row);
    }
    Ok(Topology::new(positions, matrix)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linkest::{CARRIER_MIN, D1_MIN};

    #[test]
    fn two_node_grid_has_one_perfect_link() {
        let t = gen_grid(1, 2, 3.0, QualityProfile::Lossless { spacing_ft: 3.0 }).unwrap();
        assert_eq!(t.node_count(), 2);
        assert_eq!(t.quality(0, 1), 100);
    }

    #[test]
    fn lossless_profile_is_adjacency_only() {
        let t = line21(8.0).unwrap();
        assert_eq!(t.node_count(), 21);
        // Base at the center: nodes 1 and 11 are its two lattice neighbors.
        assert_eq!(t.quality(0, 1), 100);
        assert_eq!(t.quality(0, 11), 100);
        // Two steps out: inaudible, so hidden-terminal geometry is real.
        assert_eq!(t.quality(0, 2), 0);
        assert_eq!(t.quality(1, 11), 0);
        // Depth exceeds four hops on each branch.
        let hops = t.reliable_hops(0);
        assert_eq!(hops[10], Some(10));
        assert_eq!(hops[20], Some(10));
    }

    #[test]
    fn decay_profile_matches_paper_regime_on_8ft_lattice() {
        let p = QualityProfile::DistanceDecay { full_ft: 7.0, edge_ft: 14.0 };
        // Lattice neighbors reliable, diagonals carrier-only, two-step out
        // silent.
        assert!(p.quality(8.0) >= D1_MIN);
        let diag = p.quality(8.0 * std::f64::consts::SQRT_2);
        assert!(diag >= CARRIER_MIN && diag < D1_MIN);
        assert_eq!(p.quality(16.0), 0);
        // Monotone non-increasing.
        let mut last = 101u8;
        for step in 0..200 {
            let q = p.quality(f64::from(step) * 0.1);
            assert!(q <= last.min(100));
            last = q;
        }
        assert_eq!(p.quality(0.0), 100);
    }

    #[test]
    fn lossy21_shape() {
        let t = lossy21(7.6, 13.0).unwrap();
        assert_eq!(t.node_count(), 21);
        let hops = t.reliable_hops(0);
        // More than one node at 1 hop from the base, nodes well past two
        // hops out, every hop lossy but reliable.
        let one_hop = hops.iter().filter(|h| **h == Some(1)).count();
        assert_eq!(one_hop, 2);
        assert_eq!(hops.iter().filter_map(|h| *h).max(), Some(11));
        assert!(t.quality(0, 1) >= D1_MIN && t.quality(0, 1) < 100);
    }

    #[test]
    fn grid_n_counts() {
        let t = gen_grid_n(31, 3.0, QualityProfile::DistanceDecay { full_ft: 7.0, edge_ft: 14.0 })
            .unwrap();
        assert_eq!(t.node_count(), 31);
        let t = gen_grid(3, 17, 3.0, QualityProfile::DistanceDecay { full_ft: 7.0, edge_ft: 14.0 })
            .unwrap();
        assert_eq!(t.node_count(), 51);
    }

    #[test]
    fn oversized_grid_rejected() {
        assert!(matches!(
            gen_grid(16, 16, 3.0, QualityProfile::Lossless { spacing_ft: 3.0 }),
            Err(TopoGenError::TooManyNodes(256))
        ));
    }

    #[test]
    fn topology_file_round_trip() {
        let t = lossy21(7.0, 14.0).unwrap();
        let text = render_topology(&t);
        let parsed = parse_topology(&text).unwrap();
        assert_eq!(parsed, t);
    }
}
