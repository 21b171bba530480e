//! Color soft state, claiming, and contention resolution.
//!
//! Each node keeps one entry per color. An entry can be backed by *direct*
//! evidence (this node received a frame transmitted under the color) or
//! only by a neighbor's advertisement. Outgoing frames advertise direct
//! entries alone, so a receiver's merged view spans exactly its distance-2
//! neighborhood: direct hearings cover distance 1, and neighbors'
//! advertisements relay their distance-1 knowledge.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::harvest::message::COLOR_COUNT;
use crate::simnet::{NodeId, SimTime};

/// Locally cached ownership of one color. Entries expire unless refreshed;
/// an expired color is assumed free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorEntry {
    pub owner: NodeId,
    /// The owner's sequence number when this node first heard the claim.
    pub claim_seq: u16,
    pub last_refreshed: SimTime,
    /// Last time the owner itself was heard transmitting under the color;
    /// `None` for entries known only through advertisements.
    pub last_direct: Option<SimTime>,
    /// Last own-data packet number seen from the owner, if any; feeds the
    /// sleep-duration estimate while waiting for the color.
    pub owner_progress: Option<u16>,
}

/// Per-color ownership table maintained as soft state from overheard frames.
#[derive(Debug, Clone, Default)]
pub struct ColorSoftState {
    entries: [Option<ColorEntry>; COLOR_COUNT],
}

impl ColorSoftState {
    pub fn entry(&self, color: u8) -> Option<&ColorEntry> {
        self.entries[color as usize].as_ref()
    }

    pub fn is_fresh(&self, color: u8, now: SimTime, ttl: SimTime) -> bool {
        match &self.entries[color as usize] {
            Some(e) => now.saturating_sub(e.last_refreshed) <= ttl,
            None => false,
        }
    }

    pub fn fresh_owner(&self, color: u8, now: SimTime, ttl: SimTime) -> Option<NodeId> {
        if self.is_fresh(color, now, ttl) {
            self.entries[color as usize].as_ref().map(|e| e.owner)
        } else {
            None
        }
    }

    /// Record a frame actually transmitted under `color` by `owner`. Direct
    /// evidence always wins: a change of owner restarts the claim record.
    pub fn record_direct(&mut self, color: u8, owner: NodeId, seq: u16, now: SimTime) {
        let slot = &mut self.entries[color as usize];
        match slot {
            Some(e) if e.owner == owner => {
                e.last_refreshed = now;
                e.last_direct = Some(now);
            }
            _ => {
                *slot = Some(ColorEntry {
                    owner,
                    claim_seq: seq,
                    last_refreshed: now,
                    last_direct: Some(now),
                    owner_progress: None,
                });
            }
        }
    }

    /// Merge one entry of an overheard owner array. A fresh conflicting
    /// entry is kept as heard first; expired or empty entries are replaced.
    /// Advertisements never count as direct evidence.
    pub fn merge_advertised(&mut self, color: u8, owner: NodeId, now: SimTime, ttl: SimTime) {
        let fresh = self.is_fresh(color, now, ttl);
        let slot = &mut self.entries[color as usize];
        match slot {
            Some(e) if e.owner == owner => {
                e.last_refreshed = now;
            }
            Some(_) if fresh => {}
            _ => {
                *slot = Some(ColorEntry {
                    owner,
                    claim_seq: 0,
                    last_refreshed: now,
                    last_direct: None,
                    owner_progress: None,
                });
            }
        }
    }

    pub fn record_owner_progress(&mut self, color: u8, owner: NodeId, number: u16) {
        if let Some(e) = &mut self.entries[color as usize] {
            if e.owner == owner {
                e.owner_progress = Some(number);
            }
        }
    }

    pub fn clear(&mut self, color: u8) {
        self.entries[color as usize] = None;
    }

    /// The owner array advertised in outgoing frames: only owners this
    /// node heard transmit itself, within `advert_window`; relayed entries
    /// stay local. The window is kept much shorter than the expiry ttl so
    /// that assertions about a yielded claim die before anyone else can
    /// claim the color, while a live owner (transmitting every period)
    /// stays advertised continuously.
    pub fn advertised_owners(&self, now: SimTime, advert_window: SimTime) -> [NodeId; COLOR_COUNT] {
        let mut owners = [crate::simnet::NULL_NODE; COLOR_COUNT];
        for color in 0..COLOR_COUNT as u8 {
            if let Some(e) = &self.entries[color as usize] {
                if let Some(direct) = e.last_direct {
                    if now.saturating_sub(direct) <= advert_window {
                        owners[color as usize] = e.owner;
                    }
                }
            }
        }
        owners
    }
}

/// Colors whose soft-state entry is absent or has expired.
pub fn available_colors(soft: &ColorSoftState, now: SimTime, ttl: SimTime) -> Vec<u8> {
    (0..COLOR_COUNT as u8)
        .filter(|&c| !soft.is_fresh(c, now, ttl))
        .collect()
}

/// Uniform random choice among the available colors. Claiming from an empty
/// set is a protocol bug.
pub fn claim_color<R: Rng>(available: &[u8], rng: &mut R) -> u8 {
    *available
        .choose(rng)
        .expect("claimed a color with none available")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConflictOutcome {
    Keep,
    Yield,
}

/// Priority between two claims on the same color: the earlier claim
/// sequence number wins, ties go to the lower node id.
pub fn resolve_conflict(mine: (u16, NodeId), theirs: (u16, NodeId)) -> ConflictOutcome {
    assert_ne!(mine.1, theirs.1, "a node cannot contend with itself");
    if (mine.0, mine.1) < (theirs.0, theirs.1) {
        ConflictOutcome::Keep
    } else {
        ConflictOutcome::Yield
    }
}

/// Sleep duration while waiting for a color: the owner still has
/// `owner_total - observed_seq` packets to send, one per period. Clamped to
/// at least one period. With no progress information the caller falls back
/// to the soft-state expiry time instead.
pub fn compute_sleep(observed_seq: u16, owner_total: u32, period: SimTime) -> SimTime {
    let remaining = owner_total.saturating_sub(u32::from(observed_seq)).max(1);
    period * u64::from(remaining)
}
