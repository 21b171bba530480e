//! # harvest-core
//!
//! A deterministic discrete-event simulator for bulk data convergecast in
//! wireless sensor networks. The crate models two collection services over
//! a shared slotted CSMA/CA radio:
//!
//! - **Harvest**: pipelined tree collection driven by a randomized
//!   distance-2 coloring with a constant number of colors. Colored nodes own
//!   a TDMA slot per period and forward data for at most two children.
//! - **Straw**: the one-node-at-a-time baseline. The base station floods a
//!   command selecting a single node, which then streams its data along a
//!   single line at a hop-dependent period.
//!
//! The crate is organized as:
//!
//! - [`simnet`]: the event kernel, radio/MAC model, and trace format.
//! - [`linkest`]: WMEWMA link estimation and neighborhood classification.
//! - [`harvest`]: the Harvest node state machine and wire codec.
//! - [`straw`]: the Straw baseline state machine and wire codec.
//! - [`analysis`]: trace metrics, energy accounting, and the independent
//!   distance-2 coloring oracle.
//! - [`harness`]: topology generation, run configuration, and the
//!   run/sweep drivers behind the CLI.
//!
//! Simulations are fully deterministic: identical `(topology, config, seed)`
//! inputs produce bit-identical traces.

pub mod analysis;
pub mod harness;
pub mod harvest;
pub mod linkest;
pub mod simnet;
pub mod straw;

pub use analysis::{compare, energy, latency, verify_d2_coloring, EnergyModel, Report};
pub use harness::{run, sweep, RunConfig, SweepOutcome};
pub use simnet::{Frame, NodeId, RadioMode, SimTime, Topology, TraceRecord};
