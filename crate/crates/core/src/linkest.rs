//! Window-mean EWMA link estimation and neighborhood classification.
//!
//! Each node estimates inbound link quality per peer from overheard
//! sequence numbers: the gap between consecutive sequence numbers gives the
//! number of expected packets, receptions give the successes, and every
//! completed window folds its mean into an exponentially weighted moving
//! average on a `[0, 100]` percentage scale.

use std::collections::BTreeMap;

use crate::simnet::{NodeId, SimTime};

/// Estimates at or above this value classify a peer as a reliable 1-hop
/// neighbor (roughly a stable packet loss rate under 10%).
pub const D1_MIN: u8 = 75;

/// Minimum link quality observed between nodes two hops apart; at or above
/// this value two nodes can reliably sense each other's carrier. This single
/// constant defines both the interference set and the distance-2 graph.
pub const CARRIER_MIN: u8 = 30;

/// History weight of the estimator. Larger values favor old windows.
pub const DEFAULT_ALPHA: f64 = 0.6;

/// Number of expected packets that closes an estimation window.
pub const DEFAULT_WINDOW_LEN: u32 = 30;

/// Inbound link estimate for one peer.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkEstimate {
    /// Estimated delivery percentage in `[0, 100]`.
    pub value: u8,
    pub window_received: u32,
    pub window_expected: u32,
    pub alpha: f64,
    pub window_len: u32,
}

impl Default for LinkEstimate {
    fn default() -> Self {
        LinkEstimate {
            value: 0,
            window_received: 0,
            window_expected: 0,
            alpha: DEFAULT_ALPHA,
            window_len: DEFAULT_WINDOW_LEN,
        }
    }
}

impl LinkEstimate {
    pub fn with_value(value: u8) -> Self {
        LinkEstimate { value, ..Default::default() }
    }
}

/// Fold the current window into the moving average:
/// `value' = round(alpha * value + (1 - alpha) * 100 * received / expected)`,
/// then reset the window counters. A window with no expected packets carries
/// no information and leaves the estimate untouched.
pub fn wmewma_update(est: &LinkEstimate) -> LinkEstimate {
    if est.window_expected == 0 {
        return est.clone();
    }
    let window_mean = 100.0 * f64::from(est.window_received) / f64::from(est.window_expected);
    let blended = est.alpha * f64::from(est.value) + (1.0 - est.alpha) * window_mean;
    LinkEstimate {
        value: blended.round().clamp(0.0, 100.0) as u8,
        window_received: 0,
        window_expected: 0,
        ..*est
    }
}

/// Reliable 1-hop neighbor test.
pub fn is_d1_neighbor(est: &LinkEstimate) -> bool {
    est.value >= D1_MIN
}

/// Carrier-detectability test, also the membership rule of the
/// distance-2 interference graph.
pub fn is_carrier_detectable(quality: u8) -> bool {
    quality >= CARRIER_MIN
}

/// Number of packets a peer must have sent between two observed sequence
/// numbers: the wrapping gap in the 16-bit sequence space. A gap of `g`
/// means `g - 1` losses plus the received packet.
pub fn expected_from_seq(last_seq: u16, new_seq: u16) -> u16 {
    new_seq.wrapping_sub(last_seq)
}

/// Per-peer neighbor knowledge accumulated from overheard frames.
#[derive(Debug, Clone, Default)]
pub struct NeighborTable {
    entries: BTreeMap<NodeId, NeighborEntry>,
}

#[derive(Debug, Clone)]
pub struct NeighborEntry {
    pub estimate: LinkEstimate,
    /// Last "# hops" value heard from this peer.
    pub hops: u8,
    pub last_heard: SimTime,
    last_seq: u16,
    /// A first completed window seeds the estimate with its raw mean;
    /// later windows blend through the moving average.
    seeded: bool,
}

impl NeighborTable {
    /// Record one overheard packet from `peer`. Creates the entry on first
    /// contact; afterwards sequence gaps accumulate expected counts and a
    /// full window folds into the estimate.
    pub fn record_packet(&mut self, peer: NodeId, seq: u16, hops: u8, now: SimTime) {
        match self.entries.get_mut(&peer) {
            None => {
                self.entries.insert(
                    peer,
                    NeighborEntry {
                        estimate: LinkEstimate::default(),
                        hops,
                        last_heard: now,
                        last_seq: seq,
                        seeded: false,
                    },
                );
            }
            Some(entry) => {
                let gap = expected_from_seq(entry.last_seq, seq);
                entry.last_seq = seq;
                entry.hops = hops;
                entry.last_heard = now;
                entry.estimate.window_expected = entry.estimate.window_expected.saturating_add(u32::from(gap));
                entry.estimate.window_received += 1;
                if entry.estimate.window_expected >= entry.estimate.window_len {
                    if entry.seeded {
                        entry.estimate = wmewma_update(&entry.estimate);
                    } else {
                        let mean = 100.0 * f64::from(entry.estimate.window_received)
                            / f64::from(entry.estimate.window_expected);
                        entry.estimate.value = mean.round().clamp(0.0, 100.0) as u8;
                        entry.estimate.window_received = 0;
                        entry.estimate.window_expected = 0;
                        entry.seeded = true;
                    }
                }
            }
        }
    }

    pub fn get(&self, peer: NodeId) -> Option<&NeighborEntry> {
        self.entries.get(&peer)
    }

    /// Peers classified as reliable 1-hop neighbors, ascending id.
    pub fn d1_neighbors(&self) -> impl Iterator<Item = (NodeId, &NeighborEntry)> {
        self.entries
            .iter()
            .filter(|(_, e)| is_d1_neighbor(&e.estimate))
            .map(|(&id, e)| (id, e))
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &NeighborEntry)> {
        self.entries.iter().map(|(&id, e)| (id, e))
    }
}

/// Parent choice: among reliable 1-hop neighbors, the one with the fewest
/// hops to the base station; ties prefer the lowest node id. `excluded`
/// filters out peers already known to have a full child roster.
pub fn select_parent(table: &NeighborTable, excluded: &[NodeId]) -> Option<NodeId> {
    table
        .d1_neighbors()
        .filter(|(id, _)| !excluded.contains(id))
        .min_by_key(|(id, e)| (e.hops, *id))
        .map(|(id, _)| id)
}
