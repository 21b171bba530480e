//! The deterministic discrete-event kernel.
//!
//! A single kernel owns all mutable state of one simulation: virtual time,
//! the event queue, the radio model, per-node rng streams, and the trace.
//! Protocol nodes are isolated reactors invoked only through [`Protocol`]
//! callbacks; they interact with the world exclusively through [`NodeCtx`].
//! Events firing at the same instant run in insertion (FIFO) order, which
//! together with per-node rng streams makes runs bit-reproducible.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linkest::CARRIER_MIN;
use crate::simnet::frame::{Dest, Frame, FRAME_AIRTIME_MS, MAX_FRAME_BYTES};
use crate::simnet::radio::{classify_delivery, DeliveryOutcome, RadioLog};
use crate::simnet::time::{NodeId, SimTime};
use crate::simnet::topology::Topology;
use crate::simnet::trace::{detail, TraceEvent, TraceRecord};

/// Node-side protocol reactor. All callbacks run on the kernel thread; the
/// only way to affect other nodes is to transmit frames.
pub trait Protocol {
    fn on_start(&mut self, ctx: &mut NodeCtx);
    fn on_timer(&mut self, timer: u64, ctx: &mut NodeCtx);
    fn on_frame_rx(&mut self, frame: &Frame, ctx: &mut NodeCtx);
    /// A carrier-sense point found the channel idle.
    fn on_clear_to_send(&mut self, _token: u64, _ctx: &mut NodeCtx) {}
    /// A carrier-sense point found the channel busy.
    fn on_channel_busy(&mut self, _token: u64, _ctx: &mut NodeCtx) {}
    fn on_wake(&mut self, _ctx: &mut NodeCtx) {}
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum EventKind {
    Timer { node: NodeId, id: u64 },
    Sense { node: NodeId, token: u64 },
    TxEnd { tx_id: u64 },
    Wake { node: NodeId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct QueuedEvent {
    at: SimTime,
    seq: u64,
    kind: EventKind,
}

impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Trace annotations for one transmission.
#[derive(Debug, Clone, Copy)]
pub struct TxMeta {
    pub color: Option<u8>,
    pub seq: Option<u16>,
    /// One of the [`detail`] frame-content tokens.
    pub kind: &'static str,
    /// Payload identity `(origin, number)` for data frames; rendered into
    /// the trace detail as `kind:origin:number`.
    pub data: Option<(NodeId, u16)>,
}

impl TxMeta {
    fn detail_string(&self) -> String {
        match self.data {
            None => self.kind.to_string(),
            Some((origin, number)) => format!("{}:{origin}:{number}", self.kind),
        }
    }
}

struct ActiveTx {
    id: u64,
    frame: Frame,
    meta: TxMeta,
    /// Every other frame whose air interval overlapped this one, complete
    /// by the time the transmission ends.
    concurrent: Vec<Frame>,
}

/// All simulation state except the protocol reactors themselves.
pub struct World {
    now: SimTime,
    queue: BinaryHeap<Reverse<QueuedEvent>>,
    event_seq: u64,
    topology: Topology,
    in_flight: Vec<ActiveTx>,
    next_tx_id: u64,
    radios: Vec<RadioLog>,
    node_rngs: Vec<ChaCha8Rng>,
    delivery_rng: ChaCha8Rng,
    trace: Vec<TraceRecord>,
    done: Vec<bool>,
    done_count: usize,
}

impl World {
    fn new(topology: Topology, seed: u64) -> Self {
        let n = topology.node_count();
        let mut delivery_rng = ChaCha8Rng::seed_from_u64(seed);
        delivery_rng.set_stream(0);
        let node_rngs = (0..n)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64 + 1);
                rng
            })
            .collect();
        World {
            now: SimTime::ZERO,
            queue: BinaryHeap::new(),
            event_seq: 0,
            topology,
            in_flight: Vec::new(),
            next_tx_id: 0,
            radios: vec![RadioLog::default(); n],
            node_rngs,
            delivery_rng,
            trace: Vec::new(),
            done: vec![false; n],
            done_count: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn done_count(&self) -> usize {
        self.done_count
    }

    pub fn is_done(&self, node: NodeId) -> bool {
        self.done[node as usize]
    }

    fn schedule(&mut self, at: SimTime, kind: EventKind) {
        assert!(
            at >= self.now,
            "event scheduled in the past: at={at} now={}",
            self.now
        );
        let seq = self.event_seq;
        self.event_seq += 1;
        self.queue.push(Reverse(QueuedEvent { at, seq, kind }));
    }

    /// Channel state seen by `node`: busy iff any audible frame is in flight.
    /// Sensing requires a powered radio that is not itself transmitting.
    pub fn carrier_busy(&self, node: NodeId) -> bool {
        assert!(
            self.radios[node as usize].is_awake(),
            "node {node} sensed the carrier while asleep"
        );
        assert!(
            !self.is_transmitting(node),
            "node {node} sensed mid-transmission"
        );
        self.audible_frame_in_flight(node)
    }

    fn audible_frame_in_flight(&self, node: NodeId) -> bool {
        self.in_flight
            .iter()
            .any(|tx| tx.frame.sender != node && self.topology.quality(tx.frame.sender, node) >= CARRIER_MIN)
    }

    pub fn is_transmitting(&self, node: NodeId) -> bool {
        self.in_flight.iter().any(|tx| tx.frame.sender == node)
    }

    /// Earliest instant at which every currently audible frame has ended.
    /// Equals `now` when the channel is idle.
    pub fn busy_until(&self, node: NodeId) -> SimTime {
        self.in_flight
            .iter()
            .filter(|tx| self.topology.quality(tx.frame.sender, node) >= CARRIER_MIN)
            .map(|tx| tx.frame.tx_end())
            .max()
            .unwrap_or(self.now)
    }

    fn transmit(&mut self, node: NodeId, dest: Dest, payload: Vec<u8>, meta: TxMeta) {
        assert!(
            self.radios[node as usize].is_awake(),
            "node {node} transmitted while asleep"
        );
        assert!(
            !self.in_flight.iter().any(|tx| tx.frame.sender == node),
            "node {node} started a second concurrent transmission"
        );
        assert!(!payload.is_empty() && payload.len() <= MAX_FRAME_BYTES);
        let frame = Frame {
            sender: node,
            dest,
            payload,
            tx_start: self.now,
            tx_duration: SimTime::ms(FRAME_AIRTIME_MS),
        };
        for tx in &mut self.in_flight {
            tx.concurrent.push(frame.clone());
        }
        let concurrent: Vec<Frame> = self.in_flight.iter().map(|tx| tx.frame.clone()).collect();
        let id = self.next_tx_id;
        self.next_tx_id += 1;
        self.radios[node as usize].log_tx(frame.tx_start, frame.tx_end());
        self.trace.push(TraceRecord {
            time: self.now,
            node,
            event: TraceEvent::Tx,
            peer: dest.as_node(),
            color: meta.color,
            seq: meta.seq,
            detail: meta.detail_string(),
        });
        self.schedule(frame.tx_end(), EventKind::TxEnd { tx_id: id });
        self.in_flight.push(ActiveTx { id, frame, meta, concurrent });
    }

    /// Resolve a finished transmission into per-receiver outcomes, write the
    /// trace rows, and return the successful receivers in ascending id order.
    fn finish_tx(&mut self, tx_id: u64) -> (Frame, Vec<NodeId>) {
        let pos = self
            .in_flight
            .iter()
            .position(|tx| tx.id == tx_id)
            .expect("unknown transmission id");
        let tx = self.in_flight.remove(pos);
        let radios = &self.radios;
        let outcomes = classify_delivery(
            &tx.frame,
            &self.topology,
            &tx.concurrent,
            |j| radios[j as usize].awake_throughout(tx.frame.tx_start, tx.frame.tx_end()),
            &mut self.delivery_rng,
        );
        let mut receivers = Vec::new();
        for (j, outcome) in outcomes {
            let (event, why) = match outcome {
                DeliveryOutcome::Inaudible => continue,
                DeliveryOutcome::Received => {
                    self.radios[j as usize].log_rx(tx.frame.tx_start, tx.frame.tx_end());
                    receivers.push(j);
                    (TraceEvent::Rx, tx.meta.detail_string())
                }
                DeliveryOutcome::Collided => (TraceEvent::Collision, tx.meta.detail_string()),
                DeliveryOutcome::Faded => (TraceEvent::Drop, detail::FADE.to_string()),
                DeliveryOutcome::Asleep => (TraceEvent::Drop, detail::SLEEPING.to_string()),
                DeliveryOutcome::TxBusy => (TraceEvent::Drop, detail::TX_BUSY.to_string()),
            };
            self.trace.push(TraceRecord {
                time: self.now,
                node: j,
                event,
                peer: Some(tx.frame.sender),
                color: tx.meta.color,
                seq: tx.meta.seq,
                detail: why,
            });
        }
        (tx.frame, receivers)
    }

    fn sleep(&mut self, node: NodeId, reason: &str, wake_at: Option<SimTime>) {
        assert!(
            !self.in_flight.iter().any(|tx| tx.frame.sender == node),
            "node {node} slept mid-transmission"
        );
        self.radios[node as usize].set_asleep(self.now);
        self.trace.push(TraceRecord {
            time: self.now,
            node,
            event: TraceEvent::Sleep,
            peer: None,
            color: None,
            seq: None,
            detail: reason.to_string(),
        });
        if let Some(at) = wake_at {
            self.schedule(at, EventKind::Wake { node });
        }
    }

    fn wake(&mut self, node: NodeId) {
        self.radios[node as usize].set_awake(self.now);
        self.trace.push(TraceRecord {
            time: self.now,
            node,
            event: TraceEvent::Wake,
            peer: None,
            color: None,
            seq: None,
            detail: String::new(),
        });
    }
}

/// Per-callback handle a node uses to act on the world.
pub struct NodeCtx<'a> {
    world: &'a mut World,
    node: NodeId,
}

#[cfg(test)]
pub(crate) fn test_world(topology: Topology, seed: u64) -> World {
    World::new(topology, seed)
}

#[cfg(test)]
impl<'a> NodeCtx<'a> {
    pub(crate) fn test_new(world: &'a mut World, node: NodeId) -> Self {
        NodeCtx { world, node }
    }
}

impl NodeCtx<'_> {
    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn now(&self) -> SimTime {
        self.world.now
    }

    pub fn topology(&self) -> &Topology {
        &self.world.topology
    }

    /// This node's private rng stream.
    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.world.node_rngs[self.node as usize]
    }

    /// Fire [`Protocol::on_timer`] with `id` at `at`. Scheduling in the past
    /// is a programming error and panics.
    pub fn set_timer(&mut self, at: SimTime, id: u64) {
        let node = self.node;
        self.world.schedule(at, EventKind::Timer { node, id });
    }

    /// Schedule a carrier-sense point; resolves to `on_clear_to_send` or
    /// `on_channel_busy` with `token`.
    pub fn sense_at(&mut self, at: SimTime, token: u64) {
        let node = self.node;
        self.world.schedule(at, EventKind::Sense { node, token });
    }

    pub fn carrier_busy(&self) -> bool {
        self.world.carrier_busy(self.node)
    }

    pub fn busy_until(&self) -> SimTime {
        self.world.busy_until(self.node)
    }

    /// True while one of this node's own frames is on the air.
    pub fn is_transmitting(&self) -> bool {
        self.world.is_transmitting(self.node)
    }

    /// Begin transmitting immediately. The frame occupies the air for the
    /// fixed frame airtime; delivery resolves when it ends.
    pub fn transmit(&mut self, dest: Dest, payload: Vec<u8>, meta: TxMeta) {
        self.world.transmit(self.node, dest, payload, meta);
    }

    pub fn sleep_until(&mut self, wake_at: SimTime, reason: &str) {
        let node = self.node;
        self.world.sleep(node, reason, Some(wake_at));
    }

    /// Switch the radio off permanently.
    pub fn sleep_forever(&mut self, reason: &str) {
        let node = self.node;
        self.world.sleep(node, reason, None);
    }

    pub fn is_awake(&self) -> bool {
        self.world.radios[self.node as usize].is_awake()
    }

    /// Emit a protocol-level trace record (color claims and releases).
    pub fn trace_event(&mut self, event: TraceEvent, color: Option<u8>, seq: Option<u16>, why: &str) {
        let node = self.node;
        self.world.trace.push(TraceRecord {
            time: self.world.now,
            node,
            event,
            peer: None,
            color,
            seq,
            detail: why.to_string(),
        });
    }

    /// Mark this node as finished with its convergecast role.
    pub fn mark_done(&mut self) {
        let node = self.node as usize;
        if !self.world.done[node] {
            self.world.done[node] = true;
            self.world.done_count += 1;
        }
    }
}

/// Outcome of a kernel run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunResult {
    /// Time of the last processed event.
    pub end: SimTime,
    /// True when the deadline cut the run short.
    pub censored: bool,
}

/// The simulation: a world plus one protocol reactor per node.
pub struct Kernel {
    world: World,
    nodes: Vec<Box<dyn Protocol>>,
}

impl Kernel {
    pub fn new(topology: Topology, seed: u64, nodes: Vec<Box<dyn Protocol>>) -> Self {
        assert_eq!(topology.node_count(), nodes.len());
        Kernel { world: World::new(topology, seed), nodes }
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    /// Run `on_start` for every node in id order, then process events until
    /// the queue drains, `stop` returns true, or `deadline` passes.
    pub fn run_until(
        &mut self,
        deadline: SimTime,
        mut stop: impl FnMut(&World) -> bool,
    ) -> RunResult {
        let Kernel { world, nodes } = self;
        for (i, node) in nodes.iter_mut().enumerate() {
            let mut ctx = NodeCtx { world, node: i as NodeId };
            node.on_start(&mut ctx);
        }
        loop {
            let Some(Reverse(head)) = world.queue.peek() else {
                return RunResult { end: world.now, censored: false };
            };
            if head.at > deadline {
                return RunResult { end: world.now, censored: true };
            }
            let Reverse(ev) = world.queue.pop().unwrap();
            debug_assert!(ev.at >= world.now, "event fired out of timestamp order");
            world.now = ev.at;
            match ev.kind {
                EventKind::Timer { node, id } => {
                    let mut ctx = NodeCtx { world, node };
                    nodes[node as usize].on_timer(id, &mut ctx);
                }
                EventKind::Sense { node, token } => {
                    // A sense point scheduled for a since-abandoned attempt
                    // may fire while the node sleeps (no measurement) or
                    // transmits (its own carrier reads busy).
                    if !world.radios[node as usize].is_awake() {
                        continue;
                    }
                    let busy =
                        world.is_transmitting(node) || world.audible_frame_in_flight(node);
                    let mut ctx = NodeCtx { world, node };
                    if busy {
                        nodes[node as usize].on_channel_busy(token, &mut ctx);
                    } else {
                        nodes[node as usize].on_clear_to_send(token, &mut ctx);
                    }
                }
                EventKind::TxEnd { tx_id } => {
                    let (frame, receivers) = world.finish_tx(tx_id);
                    for j in receivers {
                        let mut ctx = NodeCtx { world, node: j };
                        nodes[j as usize].on_frame_rx(&frame, &mut ctx);
                    }
                }
                EventKind::Wake { node } => {
                    world.wake(node);
                    let mut ctx = NodeCtx { world, node };
                    nodes[node as usize].on_wake(&mut ctx);
                }
            }
            if stop(world) {
                return RunResult { end: world.now, censored: false };
            }
        }
    }

    /// Consume the kernel, yielding the trace and per-node radio logs.
    pub fn into_parts(self) -> (Vec<TraceRecord>, Vec<RadioLog>) {
        (self.world.trace, self.world.radios)
    }
}
