//! Virtual time and node identity.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Virtual simulation time in integer milliseconds.
///
/// Kernel time is monotonically non-decreasing; protocol code never advances
/// it directly, it only schedules events at future instants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn ms(ticks: u64) -> Self {
        SimTime(ticks)
    }

    pub fn as_ms(self) -> u64 {
        self.0
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl Mul<u64> for SimTime {
    type Output = SimTime;
    fn mul(self, rhs: u64) -> SimTime {
        SimTime(self.0 * rhs)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Node identifier. The wire format reserves one byte per id, with `0xFF`
/// as the null/free marker, so at most 254 nodes fit in one network.
/// The base station is always id 0.
pub type NodeId = u8;

/// Wire marker for "no node" in id-valued fields.
pub const NULL_NODE: NodeId = 0xFF;

/// The distinguished sink node; root of the collection tree.
pub const BASE_STATION: NodeId = 0;

/// Maximum number of nodes representable with 8-bit ids plus a null marker.
pub const MAX_NODES: usize = 254;
