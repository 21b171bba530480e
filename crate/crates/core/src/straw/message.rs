//! Straw wire format: 7 bytes of overhead plus a 22-byte payload.
//!
//! ```text
//! byte 0        kind: 0 = broadcast command, 1 = data
//! byte 1        command target / data origin
//! bytes 2..4    data packet number, big-endian (0 for commands)
//! bytes 4..6    session counter, big-endian
//! byte 6        number of requested packet numbers (commands only)
//! bytes 7..29   payload: requested packet numbers for commands,
//!               bulk data for data frames
//! ```
//!
//! Both frame kinds occupy the full 29 bytes so every transmission has the
//! same airtime.

use thiserror::Error;

use crate::simnet::NodeId;

pub const STRAW_HEADER_BYTES: usize = 7;
pub const STRAW_PAYLOAD_BYTES: usize = 22;
pub const STRAW_FRAME_BYTES: usize = STRAW_HEADER_BYTES + STRAW_PAYLOAD_BYTES;

/// A recovery command names at most this many lost packets; longer loss
/// lists spread over further recovery sessions.
pub const MAX_MISSING_PER_COMMAND: usize = STRAW_PAYLOAD_BYTES / 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StrawCodecError {
    #[error("expected {STRAW_FRAME_BYTES} bytes, got {0}")]
    BadLength(usize),
    #[error("unknown frame kind {0}")]
    BadKind(u8),
    #[error("command lists {0} packet numbers, limit {MAX_MISSING_PER_COMMAND}")]
    TooManyMissing(usize),
    #[error("requested packet numbers must be strictly increasing")]
    UnsortedMissing,
}

/// Base-station command selecting `target` for collection. An empty
/// `missing_seqs` asks for the full store; a recovery command lists the
/// packet numbers lost in earlier sessions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrawCommand {
    pub target: NodeId,
    pub missing_seqs: Vec<u16>,
    pub session: u16,
}

/// One bulk data packet streamed from `origin` toward the base station.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrawDataFrame {
    pub origin: NodeId,
    pub seq: u16,
    pub session: u16,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StrawMessage {
    Command(StrawCommand),
    Data(StrawDataFrame),
}

impl StrawMessage {
    pub fn encode(&self) -> Result<Vec<u8>, StrawCodecError> {
        let mut bytes = vec![0u8; STRAW_FRAME_BYTES];
        match self {
            StrawMessage::Command(cmd) => {
                if cmd.missing_seqs.len() > MAX_MISSING_PER_COMMAND {
                    return Err(StrawCodecError::TooManyMissing(cmd.missing_seqs.len()));
                }
                if cmd.missing_seqs.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(StrawCodecError::UnsortedMissing);
                }
                bytes[0] = 0;
                bytes[1] = cmd.target;
                bytes[4..6].copy_from_slice(&cmd.session.to_be_bytes());
                bytes[6] = cmd.missing_seqs.len() as u8;
                for (i, seq) in cmd.missing_seqs.iter().enumerate() {
                    let at = STRAW_HEADER_BYTES + 2 * i;
                    bytes[at..at + 2].copy_from_slice(&seq.to_be_bytes());
                }
            }
            StrawMessage::Data(data) => {
                bytes[0] = 1;
                bytes[1] = data.origin;
                bytes[2..4].copy_from_slice(&data.seq.to_be_bytes());
                bytes[4..6].copy_from_slice(&data.session.to_be_bytes());
            }
        }
        Ok(bytes)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, StrawCodecError> {
        if bytes.len() != STRAW_FRAME_BYTES {
            return Err(StrawCodecError::BadLength(bytes.len()));
        }
        let session = u16::from_be_bytes([bytes[4], bytes[5]]);
        match bytes[0] {
            0 => {
                let count = bytes[6] as usize;
                if count > MAX_MISSING_PER_COMMAND {
                    return Err(StrawCodecError::TooManyMissing(count));
                }
                let missing_seqs = (0..count)
                    .map(|i| {
                        let at = STRAW_HEADER_BYTES + 2 * i;
                        u16::from_be_bytes([bytes[at], bytes[at + 1]])
                    })
                    .collect();
                Ok(StrawMessage::Command(StrawCommand { target: bytes[1], missing_seqs, session }))
            }
            1 => Ok(StrawMessage::Data(StrawDataFrame {
                origin: bytes[1],
                seq: u16::from_be_bytes([bytes[2], bytes[3]]),
                session,
            })),
            k => Err(StrawCodecError::BadKind(k)),
        }
    }
}
