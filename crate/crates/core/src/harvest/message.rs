//! Bit-exact Harvest message codec.
//!
//! Every Harvest frame encodes to exactly 29 bytes: a 9-byte header and a
//! 20-byte payload. Multi-byte fields are big-endian.
//!
//! ```text
//! byte 0        color_id (2 bits, msb) | hops (6 bits)
//! bytes 1..3    child ids, 0xFF = empty slot; first listed child is
//!               cleared to send a packet in the next period
//! bytes 3..7    color owner ids ordered by color id, 0xFF = free
//! bytes 7..9    sequence number, big-endian
//! bytes 9..29   payload
//! ```
//!
//! There is no sender field: the sender id sits in the owner array at the
//! index of the sender's own color.

use thiserror::Error;

use crate::simnet::{NodeId, NULL_NODE};

/// Colors available network-wide. The wire format fixes this at four:
/// one for a node, two for its children, one for its parent.
pub const COLOR_COUNT: usize = 4;

pub const HEADER_BYTES: usize = 9;
pub const PAYLOAD_BYTES: usize = 20;
pub const MESSAGE_BYTES: usize = HEADER_BYTES + PAYLOAD_BYTES;

pub const MAX_HOPS: u8 = 63;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("color id {0} out of range")]
    ColorOutOfRange(u8),
    #[error("hop count {0} does not fit in 6 bits")]
    HopsOutOfRange(u8),
    #[error("expected {MESSAGE_BYTES} bytes, got {0}")]
    BadLength(usize),
}

/// What a frame carries in its 20-byte payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Payload {
    /// Slot-keeping frame; refreshes the sender's color and soft state.
    Beacon,
    /// One bulk data piece: the node that generated it and its index
    /// (1-based) within that node's store.
    Data { origin: NodeId, number: u16 },
}

/// In-memory form of the single Harvest message structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HarvestMessage {
    pub color_id: u8,
    pub hops: u8,
    pub child_ids: [NodeId; 2],
    pub color_owners: [NodeId; COLOR_COUNT],
    pub seq: u16,
    pub payload: Payload,
}

impl HarvestMessage {
    /// The sender id, read from the owner array at the sender's color.
    pub fn implied_sender(&self) -> NodeId {
        self.color_owners[self.color_id as usize]
    }

    pub fn encode(&self) -> Result<Vec<u8>, CodecError> {
        if self.color_id as usize >= COLOR_COUNT {
            return Err(CodecError::ColorOutOfRange(self.color_id));
        }
        if self.hops > MAX_HOPS {
            return Err(CodecError::HopsOutOfRange(self.hops));
        }
        let mut bytes = Vec::with_capacity(MESSAGE_BYTES);
        bytes.push((self.color_id << 6) | self.hops);
        bytes.extend_from_slice(&self.child_ids);
        bytes.extend_from_slice(&self.color_owners);
        bytes.extend_from_slice(&self.seq.to_be_bytes());
        let mut payload = [0u8; PAYLOAD_BYTES];
        match self.payload {
            Payload::Beacon => {}
            Payload::Data { origin, number } => {
                payload[0] = origin;
                payload[1..3].copy_from_slice(&number.to_be_bytes());
            }
        }
        bytes.extend_from_slice(&payload);
        debug_assert_eq!(bytes.len(), MESSAGE_BYTES);
        Ok(bytes)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        if bytes.len() != MESSAGE_BYTES {
            return Err(CodecError::BadLength(bytes.len()));
        }
        let color_id = bytes[0] >> 6;
        let hops = bytes[0] & 0x3F;
        let child_ids = [bytes[1], bytes[2]];
        let mut color_owners = [NULL_NODE; COLOR_COUNT];
        color_owners.copy_from_slice(&bytes[3..7]);
        let seq = u16::from_be_bytes([bytes[7], bytes[8]]);
        let payload_bytes = &bytes[HEADER_BYTES..];
        let payload = if payload_bytes[0] == 0 {
            Payload::Beacon
        } else {
            Payload::Data {
                origin: payload_bytes[0],
                number: u16::from_be_bytes([payload_bytes[1], payload_bytes[2]]),
            }
        };
        Ok(HarvestMessage { color_id, hops, child_ids, color_owners, seq, payload })
    }
}
