//! Deterministic discrete-event kernel plus the radio/MAC model: slotted
//! virtual time, probabilistic packet delivery, collision semantics, carrier
//! sensing, and non-persistent CSMA/CA contention.

mod frame;
pub(crate) mod kernel;
mod radio;
mod time;
mod topology;
mod trace;

pub use frame::{Dest, Frame, FRAME_AIRTIME_MS, MAX_FRAME_BYTES};
pub use kernel::{Kernel, NodeCtx, Protocol, RunResult, TxMeta, World};
pub use radio::{classify_delivery, deliver, DeliveryOutcome, RadioLog, RadioMode};
pub use time::{NodeId, SimTime, BASE_STATION, MAX_NODES, NULL_NODE};
pub use topology::{Topology, TopologyError};
pub use trace::{
    detail, parse_trace_csv, write_trace_csv, TraceEvent, TraceParseError, TraceRecord,
    TRACE_HEADER,
};
