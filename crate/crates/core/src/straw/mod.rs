//! The Straw baseline: base-station-driven broadcast selecting one node at
//! a time, pipelined single-line collection at hop-dependent periods, and
//! broadcast-based loss recovery.

mod message;
mod node;

pub use message::{
    StrawCodecError, StrawCommand, StrawDataFrame, StrawMessage, MAX_MISSING_PER_COMMAND,
    STRAW_FRAME_BYTES, STRAW_HEADER_BYTES, STRAW_PAYLOAD_BYTES,
};
pub use node::{collection_period_slots, StrawBase, StrawConfig, StrawError, StrawNode};
