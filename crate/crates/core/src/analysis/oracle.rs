//! Brute-force verification of distance-2 color exclusivity.
//!
//! The oracle works from the trace and the topology alone, with no protocol
//! internals: hop distances come from a BFS over the carrier-audible graph,
//! and claim lifetimes are reconstructed from `color_claim`/`color_release`
//! records.
//!
//! The property checked is the protocol's contract, which is conditioned on
//! information reach: a claim binds a rival only once it has been *heard*
//! in the rival's neighborhood. Concretely, a pair of nodes at most two
//! carrier-hops apart violates the coloring when
//!
//! 1. both claims became effective (at least one transmission under the
//!    color that collided nowhere and was received somewhere),
//! 2. each claimant became aware of the other claim, either by receiving
//!    one of its frames directly or by receiving any later frame from a
//!    node that had itself received one (the one-relay reach of the
//!    owner-array soft state), and
//! 3. both kept transmitting under the color after the point of mutual
//!    awareness.
//!
//! Momentary double-claims that dissolve as soon as the rivals hear of
//! each other are the contention mechanism at work, not a schedule fault.

use std::collections::BTreeMap;
use std::fmt;

use crate::simnet::{NodeId, SimTime, Topology, TraceEvent, TraceRecord};

/// One breach of distance-2 exclusivity: both nodes kept transmitting
/// under `color` after learning of each other's claim, while at most two
/// carrier-hops apart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub color: u8,
    pub node_a: NodeId,
    pub node_b: NodeId,
    pub hops: u32,
    /// Instant of mutual awareness.
    pub from: SimTime,
    /// End of the overlapping exposure.
    pub to: SimTime,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "color {} held by nodes {} and {} ({} hops apart) past mutual awareness at {} (until {}) ms",
            self.color, self.node_a, self.node_b, self.hops, self.from, self.to
        )
    }
}

#[derive(Debug, Clone)]
struct Claim {
    node: NodeId,
    color: u8,
    until: SimTime,
    effective: bool,
    /// Transmission start times under the color during the claim.
    tx_times: Vec<u64>,
    /// Per-node earliest reception of one of this claim's frames.
    heard_at: BTreeMap<NodeId, u64>,
}

fn collect_claims(trace: &[TraceRecord], sim_end: SimTime) -> Vec<Claim> {
    let mut collided: BTreeMap<(NodeId, u64), ()> = BTreeMap::new();
    for r in trace {
        if r.event == TraceEvent::Collision {
            if let Some(peer) = r.peer {
                collided.insert((peer, r.time.as_ms()), ());
            }
        }
    }

    let mut open: Vec<usize> = Vec::new();
    let mut claims: Vec<Claim> = Vec::new();
    for r in trace {
        match r.event {
            TraceEvent::ColorClaim => {
                open.push(claims.len());
                claims.push(Claim {
                    node: r.node,
                    color: r.color.expect("claim record without color"),
                    until: sim_end,
                    effective: false,
                    tx_times: Vec::new(),
                    heard_at: BTreeMap::new(),
                });
            }
            TraceEvent::Tx => {
                let Some(color) = r.color else { continue };
                if let Some(&idx) = open
                    .iter()
                    .find(|&&i| claims[i].node == r.node && claims[i].color == color)
                {
                    claims[idx].tx_times.push(r.time.as_ms());
                }
            }
            TraceEvent::Rx => {
                let (Some(peer), Some(color)) = (r.peer, r.color) else { continue };
                if let Some(&idx) = open
                    .iter()
                    .find(|&&i| claims[i].node == peer && claims[i].color == color)
                {
                    let end = r.time.as_ms();
                    claims[idx].heard_at.entry(r.node).or_insert(end);
                    if !collided.contains_key(&(peer, end)) {
                        claims[idx].effective = true;
                    }
                }
            }
            TraceEvent::ColorRelease => {
                let color = r.color.expect("release record without color");
                if let Some(pos) = open
                    .iter()
                    .position(|&i| claims[i].node == r.node && claims[i].color == color)
                {
                    let idx = open.remove(pos);
                    claims[idx].until = r.time;
                }
            }
            _ => {}
        }
    }
    claims
}

/// How long a node keeps relaying a directly heard claim, in periods of
/// the default slot grid: the advertisement lifetime of the owner-array
/// soft state. Relayed awareness in the oracle expires on the same clock.
pub const RELAY_WINDOW_MS: u64 = 2 * 4 * 31;

/// When `observer` first learned of `claim`: directly, or through a frame
/// from a node that had itself heard the claim within the relay window
/// (second-hand knowledge decays with the soft state).
fn awareness_time(
    claim: &Claim,
    observer: NodeId,
    rx_index: &BTreeMap<(NodeId, NodeId), Vec<u64>>,
    relay_window_ms: u64,
) -> Option<u64> {
    let mut best = claim.heard_at.get(&observer).copied();
    for (&relay, &relay_heard) in &claim.heard_at {
        if relay == observer || relay == claim.node {
            continue;
        }
        if let Some(times) = rx_index.get(&(observer, relay)) {
            let pos = times.partition_point(|&t| t <= relay_heard);
            if let Some(&t) = times.get(pos) {
                if t <= relay_heard + relay_window_ms {
                    best = Some(best.map_or(t, |b| b.min(t)));
                }
            }
        }
    }
    best
}

/// Check every pair of claims on the same color by nodes at carrier-graph
/// distance <= 2, with relayed awareness decaying per [`RELAY_WINDOW_MS`].
/// An empty result means the coloring was valid throughout.
pub fn verify_d2_coloring(trace: &[TraceRecord], topology: &Topology) -> Vec<Violation> {
    verify_d2_coloring_with_window(trace, topology, RELAY_WINDOW_MS)
}

/// [`verify_d2_coloring`] with an explicit relay window for runs using a
/// non-default slot duration.
pub fn verify_d2_coloring_with_window(
    trace: &[TraceRecord],
    topology: &Topology,
    relay_window_ms: u64,
) -> Vec<Violation> {
    let sim_end = trace
        .last()
        .map(|r| r.time + SimTime::ms(1))
        .unwrap_or(SimTime::ZERO);
    let claims = collect_claims(trace, sim_end);

    // All receptions indexed by (receiver, sender), ascending time.
    let mut rx_index: BTreeMap<(NodeId, NodeId), Vec<u64>> = BTreeMap::new();
    for r in trace {
        if r.event == TraceEvent::Rx {
            if let Some(peer) = r.peer {
                rx_index.entry((r.node, peer)).or_default().push(r.time.as_ms());
            }
        }
    }

    let n = topology.node_count();
    let mut hops = Vec::with_capacity(n);
    for i in 0..n as u8 {
        hops.push(topology.carrier_hops(i));
    }

    let mut violations = Vec::new();
    for (i, a) in claims.iter().enumerate() {
        for b in claims.iter().skip(i + 1) {
            if a.color != b.color || a.node == b.node {
                continue;
            }
            if !a.effective || !b.effective {
                continue;
            }
            let Some(distance) = hops[a.node as usize][b.node as usize] else {
                continue;
            };
            if distance > 2 {
                continue;
            }
            let Some(a_knows) = awareness_time(b, a.node, &rx_index, relay_window_ms) else {
                continue;
            };
            let Some(b_knows) = awareness_time(a, b.node, &rx_index, relay_window_ms) else {
                continue;
            };
            let mutual = a_knows.max(b_knows);
            let a_after = a
                .tx_times
                .iter()
                .any(|&t| t > mutual && SimTime::ms(t) < a.until);
            let b_after = b
                .tx_times
                .iter()
                .any(|&t| t > mutual && SimTime::ms(t) < b.until);
            if a_after && b_after {
                violations.push(Violation {
                    color: a.color,
                    node_a: a.node.min(b.node),
                    node_b: a.node.max(b.node),
                    hops: distance,
                    from: SimTime::ms(mutual),
                    to: a.until.min(b.until),
                });
            }
        }
    }
    violations
}
