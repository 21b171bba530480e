//! Radio states, the probabilistic delivery rule, and per-node mode logs.

use rand::Rng;

use crate::linkest::CARRIER_MIN;
use crate::simnet::frame::Frame;
use crate::simnet::time::{NodeId, SimTime};
use crate::simnet::topology::Topology;

/// Radio operating mode. Each node is in exactly one mode at any instant;
/// the per-run timeline of modes drives energy accounting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadioMode {
    Sleep,
    IdleListen,
    Receiving,
    Transmitting,
}

/// Why a frame did or did not reach a particular receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryOutcome {
    /// Link quality below the carrier threshold; the frame is not even audible.
    Inaudible,
    /// Receiver radio was off for part of the frame.
    Asleep,
    /// Receiver was itself transmitting during the frame.
    TxBusy,
    /// Another audible transmission overlapped; receiver decodes neither.
    Collided,
    /// Audible and collision-free, but the Bernoulli link trial failed.
    Faded,
    Received,
}

/// Classify the outcome of `frame` at every potential receiver.
///
/// `concurrent` must hold every other frame whose transmission interval
/// overlaps `frame`'s. `listening(j)` reports whether node `j`'s radio was
/// on for the whole frame. Receivers are visited in ascending id order and
/// link trials are drawn only for audible, awake, collision-free receivers,
/// so outcomes are reproducible for a fixed rng stream.
///
/// A collision is a property of the air at `j`'s position (two audible
/// transmissions overlapping), so it is reported whether or not `j` was
/// listening; sleep only decides whether an otherwise intact frame lands.
pub fn classify_delivery<R: Rng, F: FnMut(NodeId) -> bool>(
    frame: &Frame,
    topology: &Topology,
    concurrent: &[Frame],
    mut listening: F,
    rng: &mut R,
) -> Vec<(NodeId, DeliveryOutcome)> {
    let mut outcomes = Vec::new();
    for j in topology.nodes() {
        if j == frame.sender {
            continue;
        }
        let quality = topology.quality(frame.sender, j);
        if quality < CARRIER_MIN {
            outcomes.push((j, DeliveryOutcome::Inaudible));
            continue;
        }
        let collided = concurrent.iter().any(|c| {
            c.sender != j
                && topology.quality(c.sender, j) >= CARRIER_MIN
                && c.overlaps(frame)
        });
        if collided {
            outcomes.push((j, DeliveryOutcome::Collided));
            continue;
        }
        if concurrent.iter().any(|c| c.sender == j && c.overlaps(frame)) {
            outcomes.push((j, DeliveryOutcome::TxBusy));
            continue;
        }
        if !listening(j) {
            outcomes.push((j, DeliveryOutcome::Asleep));
            continue;
        }
        let delivered = rng.gen_range(0u8..100) < quality;
        outcomes.push((j, if delivered { DeliveryOutcome::Received } else { DeliveryOutcome::Faded }));
    }
    outcomes
}

/// The bare delivery rule: which nodes receive `frame` given the set of
/// concurrently airing frames. Loss and collision are normal outcomes, not
/// errors. Ignores radio modes; the kernel layers sleep semantics on top.
pub fn deliver<R: Rng>(
    frame: &Frame,
    topology: &Topology,
    concurrent: &[Frame],
    rng: &mut R,
) -> Vec<(NodeId, Frame)> {
    classify_delivery(frame, topology, concurrent, |_| true, rng)
        .into_iter()
        .filter(|(_, o)| *o == DeliveryOutcome::Received)
        .map(|(j, _)| (j, frame.clone()))
        .collect()
}

/// Per-node radio activity log. Sleep, transmit, and receive intervals are
/// recorded as they happen; the full mode timeline is reconstructed on
/// demand with idle listening filling every remaining instant.
#[derive(Debug, Clone, Default)]
pub struct RadioLog {
    sleep_since: Option<SimTime>,
    sleep_intervals: Vec<(SimTime, SimTime)>,
    tx_intervals: Vec<(SimTime, SimTime)>,
    rx_intervals: Vec<(SimTime, SimTime)>,
}

impl RadioLog {
    pub fn is_awake(&self) -> bool {
        self.sleep_since.is_none()
    }

    pub fn set_asleep(&mut self, at: SimTime) {
        assert!(self.sleep_since.is_none(), "radio already asleep");
        self.sleep_since = Some(at);
    }

    pub fn set_awake(&mut self, at: SimTime) {
        let since = self.sleep_since.take().expect("radio was not asleep");
        assert!(since <= at);
        self.sleep_intervals.push((since, at));
    }

    pub fn log_tx(&mut self, start: SimTime, end: SimTime) {
        self.tx_intervals.push((start, end));
    }

    pub fn log_rx(&mut self, start: SimTime, end: SimTime) {
        self.rx_intervals.push((start, end));
    }

    /// True when the radio was on for the entire `[start, end)` interval.
    pub fn awake_throughout(&self, start: SimTime, end: SimTime) -> bool {
        if let Some(since) = self.sleep_since {
            if since < end {
                return false;
            }
        }
        self.sleep_intervals
            .iter()
            .all(|&(s, e)| e <= start || end <= s)
    }

    pub fn tx_intervals(&self) -> &[(SimTime, SimTime)] {
        &self.tx_intervals
    }

    /// Build the mode timeline partitioning `[0, sim_end]`. Panics if the
    /// logged sleep/transmit/receive intervals overlap each other: that
    /// would mean the protocol drove the radio into two modes at once.
    pub fn mode_timeline(&self, sim_end: SimTime) -> Vec<(SimTime, SimTime, RadioMode)> {
        let mut marks: Vec<(SimTime, SimTime, RadioMode)> = Vec::new();
        for &(s, e) in &self.sleep_intervals {
            marks.push((s, e, RadioMode::Sleep));
        }
        if let Some(since) = self.sleep_since {
            marks.push((since, sim_end, RadioMode::Sleep));
        }
        for &(s, e) in &self.tx_intervals {
            marks.push((s, e, RadioMode::Transmitting));
        }
        for &(s, e) in &self.rx_intervals {
            marks.push((s, e, RadioMode::Receiving));
        }
        marks.retain(|&(s, e, _)| s < e && s < sim_end);
        for m in &mut marks {
            m.1 = m.1.min(sim_end);
        }
        marks.sort_by_key(|&(s, e, _)| (s, e));
        for w in marks.windows(2) {
            assert!(
                w[0].1 <= w[1].0,
                "radio mode intervals overlap: {:?} vs {:?}",
                w[0],
                w[1]
            );
        }
        let mut timeline = Vec::with_capacity(marks.len() * 2 + 1);
        let mut cursor = SimTime::ZERO;
        for (s, e, mode) in marks {
            if cursor < s {
                timeline.push((cursor, s, RadioMode::IdleListen));
            }
            timeline.push((s, e, mode));
            cursor = e;
        }
        if cursor < sim_end {
            timeline.push((cursor, sim_end, RadioMode::IdleListen));
        }
        timeline
    }
}
