//! Topology generation, run configuration, and seeded experiment drivers.

mod config;
mod runner;
mod sweep;
mod topogen;

pub use config::{ConfigError, LossModel, ProtocolKind, RunConfig, TopologyKind};
pub use runner::{build_topology, run, HarnessError, RunOutput};
pub use sweep::{sweep, SweepAxis, SweepOutcome, SweepRow};
pub use topogen::{
    gen_center_line, gen_grid, gen_grid_n, line21, lossy21, parse_topology, render_topology,
    QualityProfile, TopoGenError,
};
