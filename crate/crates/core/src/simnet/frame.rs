//! On-air frames.

use crate::simnet::time::{NodeId, SimTime};

/// Radio airtime of one frame in milliseconds. A full 29-byte frame takes
/// 23 ms on the modeled radio regardless of payload fill, so every slot of
/// the default 31 ms duration fits exactly one transmission plus the
/// contention backoff budget.
pub const FRAME_AIRTIME_MS: u64 = 23;

/// Maximum encoded frame size: 9 bytes of header plus 20 bytes of payload
/// for Harvest, 7 plus 22 for Straw.
pub const MAX_FRAME_BYTES: usize = 29;

/// Link-layer destination of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dest {
    Broadcast,
    Node(NodeId),
}

impl Dest {
    pub fn as_node(self) -> Option<NodeId> {
        match self {
            Dest::Broadcast => None,
            Dest::Node(id) => Some(id),
        }
    }
}

/// A frame in flight: sender and destination are link-layer metadata
/// (the TOS-header analogue); `payload` is the encoded protocol message.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub sender: NodeId,
    pub dest: Dest,
    pub payload: Vec<u8>,
    pub tx_start: SimTime,
    pub tx_duration: SimTime,
}

impl Frame {
    pub fn tx_end(&self) -> SimTime {
        self.tx_start + self.tx_duration
    }

    /// True when the transmission intervals of `self` and `other` overlap.
    pub fn overlaps(&self, other: &Frame) -> bool {
        self.tx_start < other.tx_end() && other.tx_start < self.tx_end()
    }
}
