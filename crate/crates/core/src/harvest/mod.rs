//! The Harvest protocol: randomized distance-2 color acquisition over
//! CSMA/CA, soft-state color tables, parent-anchored slot synchronization,
//! bounded-buffer tree forwarding, and the bit-exact message codec.

mod colors;
mod message;
mod node;

pub use colors::{
    available_colors, claim_color, compute_sleep, resolve_conflict, ColorEntry, ColorSoftState,
    ConflictOutcome,
};
pub use message::{
    CodecError, HarvestMessage, Payload, COLOR_COUNT, HEADER_BYTES, MESSAGE_BYTES, PAYLOAD_BYTES,
};
pub use node::{HarvestConfig, HarvestNode};
