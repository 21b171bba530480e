//! Straw reactors: the base-station session driver and the relay/source
//! role every other node plays.
//!
//! Collection is one node at a time. The base floods a command naming the
//! target; every other node rebroadcasts a newly heard command exactly once
//! under CSMA. The target then streams its packets along the routing line
//! at a hop-dependent period (one slot for 1-hop targets, two for 2-hop,
//! three beyond), with each relay forwarding in the next slot. Lost packets
//! are re-requested by follow-up broadcast sessions up to a retry cap.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;

use crate::simnet::{
    detail, Dest, Frame, NodeCtx, NodeId, Protocol, SimTime, TxMeta, BASE_STATION,
};
use crate::straw::message::{
    StrawCommand, StrawDataFrame, StrawMessage, MAX_MISSING_PER_COMMAND,
};

/// Target transmission period in slots for a node at the given hop count.
/// The three-slot period beyond two hops keeps simultaneous transmitters on
/// the line at least three hops apart.
pub fn collection_period_slots(hops: u32) -> Result<u64, StrawError> {
    match hops {
        0 => Err(StrawError::BaseStationTarget),
        1 => Ok(1),
        2 => Ok(2),
        _ => Ok(3),
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum StrawError {
    #[error("the base station has no collection period")]
    BaseStationTarget,
}

#[derive(Debug, Clone)]
pub struct StrawConfig {
    pub slot_ms: u64,
    pub packets_per_node: u32,
    /// Additional sessions allowed per target beyond the first.
    pub retry_cap: u32,
    /// Slots a target waits after hearing its command, letting the
    /// broadcast flood die down before data flows.
    pub settle_slots: u64,
    /// Backoff window for flood rebroadcasts, ms.
    pub backoff: (u64, u64),
    /// Network diameter in routing hops; sizes session deadlines.
    pub diameter: u32,
}

impl StrawConfig {
    /// Next boundary of the global slot grid strictly after `now`.
    fn next_slot_boundary(&self, now: SimTime) -> SimTime {
        SimTime::ms((now.as_ms() / self.slot_ms + 1) * self.slot_ms)
    }
}

const TIMER_FORWARD: u64 = 1;
const TIMER_STREAM: u64 = 2;
const TIMER_DEADLINE_BASE: u64 = 1 << 32;

/// Relay and data-source behavior of a non-base node.
pub struct StrawNode {
    id: NodeId,
    cfg: StrawConfig,
    route_parent: NodeId,
    hops: u32,
    seen_sessions: BTreeSet<u16>,
    /// Command waiting to be rebroadcast once the channel clears.
    pending_rebroadcast: Option<StrawCommand>,
    /// Data frames awaiting their forwarding slot.
    forward_queue: VecDeque<StrawDataFrame>,
    forward_timer_armed: bool,
    /// Packet numbers still to stream for the active session.
    send_list: VecDeque<u16>,
    streaming_session: u16,
}

impl StrawNode {
    /// `route_parent` and `hops` come from the routing layer: the reliable
    /// lowest-hop parent toward the base station.
    pub fn new(id: NodeId, route_parent: NodeId, hops: u32, cfg: StrawConfig) -> Self {
        assert_ne!(id, BASE_STATION);
        assert!(hops >= 1);
        StrawNode {
            id,
            cfg,
            route_parent,
            hops,
            seen_sessions: BTreeSet::new(),
            pending_rebroadcast: None,
            forward_queue: VecDeque::new(),
            forward_timer_armed: false,
            send_list: VecDeque::new(),
            streaming_session: 0,
        }
    }

    fn arm_rebroadcast(&mut self, ctx: &mut NodeCtx) {
        let (lo, hi) = self.cfg.backoff;
        let backoff = ctx.rng().gen_range(lo..=hi);
        ctx.sense_at(ctx.now() + SimTime::ms(backoff), 0);
    }

    fn begin_stream(&mut self, cmd: &StrawCommand, ctx: &mut NodeCtx) {
        self.send_list = if cmd.missing_seqs.is_empty() {
            (1..=self.cfg.packets_per_node as u16).collect()
        } else {
            cmd.missing_seqs.iter().copied().collect()
        };
        self.streaming_session = cmd.session;
        if self.send_list.is_empty() {
            return; // nothing stored: session ends with no data
        }
        let settle = ctx.now() + SimTime::ms(self.cfg.settle_slots * self.cfg.slot_ms);
        ctx.set_timer(self.cfg.next_slot_boundary(settle), TIMER_STREAM);
    }

    fn stream_next(&mut self, ctx: &mut NodeCtx) {
        if ctx.is_transmitting() {
            // A command rebroadcast is still on the air; take the next slot.
            ctx.set_timer(self.cfg.next_slot_boundary(ctx.now()), TIMER_STREAM);
            return;
        }
        let Some(seq) = self.send_list.pop_front() else {
            return;
        };
        let msg = StrawMessage::Data(StrawDataFrame {
            origin: self.id,
            seq,
            session: self.streaming_session,
        });
        ctx.transmit(
            Dest::Node(self.route_parent),
            msg.encode().expect("valid data frame"),
            TxMeta {
                color: None,
                seq: Some(seq),
                kind: detail::DATA_OWN,
                data: Some((self.id, seq)),
            },
        );
        if !self.send_list.is_empty() {
            let period = collection_period_slots(self.hops).expect("non-base target")
                * self.cfg.slot_ms;
            ctx.set_timer(ctx.now() + SimTime::ms(period), TIMER_STREAM);
        }
    }

    fn forward_next(&mut self, ctx: &mut NodeCtx) {
        self.forward_timer_armed = false;
        if ctx.is_transmitting() {
            self.arm_forward_timer(ctx);
            return;
        }
        let Some(data) = self.forward_queue.pop_front() else {
            return;
        };
        let msg = StrawMessage::Data(data.clone());
        ctx.transmit(
            Dest::Node(self.route_parent),
            msg.encode().expect("valid data frame"),
            TxMeta {
                color: None,
                seq: Some(data.seq),
                kind: detail::DATA_FWD,
                data: Some((data.origin, data.seq)),
            },
        );
        if !self.forward_queue.is_empty() {
            self.arm_forward_timer(ctx);
        }
    }

    fn arm_forward_timer(&mut self, ctx: &mut NodeCtx) {
        if !self.forward_timer_armed {
            self.forward_timer_armed = true;
            ctx.set_timer(self.cfg.next_slot_boundary(ctx.now()), TIMER_FORWARD);
        }
    }
}

impl Protocol for StrawNode {
    fn on_start(&mut self, _ctx: &mut NodeCtx) {}

    fn on_timer(&mut self, timer: u64, ctx: &mut NodeCtx) {
        match timer {
            TIMER_STREAM => self.stream_next(ctx),
            TIMER_FORWARD => self.forward_next(ctx),
            _ => {}
        }
    }

    fn on_clear_to_send(&mut self, _token: u64, ctx: &mut NodeCtx) {
        if let Some(cmd) = self.pending_rebroadcast.take() {
            let session = cmd.session;
            let msg = StrawMessage::Command(cmd);
            ctx.transmit(
                Dest::Broadcast,
                msg.encode().expect("valid command"),
                TxMeta { color: None, seq: Some(session), kind: detail::CMD, data: None },
            );
        }
    }

    fn on_channel_busy(&mut self, _token: u64, ctx: &mut NodeCtx) {
        if self.pending_rebroadcast.is_some() {
            let (lo, hi) = self.cfg.backoff;
            let backoff = ctx.rng().gen_range(lo..=hi);
            let resume = self.cfg.next_slot_boundary(ctx.busy_until()); // let the owner's slot finish
            ctx.sense_at(resume + SimTime::ms(backoff), 0);
        }
    }

    fn on_frame_rx(&mut self, frame: &Frame, ctx: &mut NodeCtx) {
        let Ok(msg) = StrawMessage::decode(&frame.payload) else {
            return;
        };
        match msg {
            StrawMessage::Command(cmd) => {
                if !self.seen_sessions.insert(cmd.session) {
                    return; // each command is forwarded at most once
                }
                if cmd.target == self.id {
                    self.begin_stream(&cmd, ctx);
                }
                // Every node, the target included, forwards a newly heard
                // command exactly once; otherwise the flood would die at
                // the target on single-path topologies.
                self.pending_rebroadcast = Some(cmd);
                self.arm_rebroadcast(ctx);
            }
            StrawMessage::Data(data) => {
                if frame.dest == Dest::Node(self.id) {
                    self.forward_queue.push_back(data);
                    self.arm_forward_timer(ctx);
                }
            }
        }
    }
}

struct TargetProgress {
    target: NodeId,
    hops: u32,
    /// Packet numbers requested in the current session.
    requested: Vec<u16>,
    /// Everything received from this target across all of its sessions.
    received: BTreeSet<u16>,
    extra_sessions: u32,
}

/// The base station: floods commands, logs arrivals, and repeats the
/// broadcast/collect pair until each target's store is in or the retry cap
/// is spent.
pub struct StrawBase {
    cfg: StrawConfig,
    /// Targets still to collect from, in order.
    targets: VecDeque<NodeId>,
    hops_of: Vec<u32>,
    current: Option<TargetProgress>,
    session_counter: u16,
    /// Guards deadline timers of superseded sessions.
    generation: u64,
    pending_command: Option<StrawCommand>,
}

impl StrawBase {
    pub fn new(targets: Vec<NodeId>, hops_of: Vec<u32>, cfg: StrawConfig) -> Self {
        StrawBase {
            cfg,
            targets: targets.into(),
            hops_of,
            current: None,
            session_counter: 0,
            generation: 0,
            pending_command: None,
        }
    }

    /// Total broadcast sessions started, retries and recoveries included.
    pub fn sessions_started(&self) -> u16 {
        self.session_counter
    }

    fn next_target(&mut self, ctx: &mut NodeCtx) {
        loop {
            let Some(target) = self.targets.pop_front() else {
                self.current = None;
                ctx.mark_done();
                return;
            };
            if target == BASE_STATION {
                // The base's own data needs no session at all.
                continue;
            }
            let requested: Vec<u16> = (1..=self.cfg.packets_per_node as u16).collect();
            self.current = Some(TargetProgress {
                target,
                hops: self.hops_of[target as usize],
                requested: requested.clone(),
                received: BTreeSet::new(),
                extra_sessions: 0,
            });
            self.broadcast_command(requested_to_missing(&requested, true), ctx);
            return;
        }
    }

    fn broadcast_command(&mut self, missing: Vec<u16>, ctx: &mut NodeCtx) {
        let progress = self.current.as_ref().expect("no active target");
        self.session_counter += 1;
        self.generation += 1;
        let cmd = StrawCommand {
            target: progress.target,
            missing_seqs: missing,
            session: self.session_counter,
        };
        self.pending_command = Some(cmd);
        let (lo, hi) = self.cfg.backoff;
        let backoff = ctx.rng().gen_range(lo..=hi);
        ctx.sense_at(ctx.now() + SimTime::ms(backoff), self.generation);

        // Deadline: flood bound + settle + stream span + line travel, with
        // margin. Only reached when packets were lost.
        let period = collection_period_slots(progress.hops).expect("non-base target");
        let span_slots = (2 * u64::from(self.cfg.diameter))
            + self.cfg.settle_slots
            + period * (progress.requested.len() as u64 + 2)
            + u64::from(progress.hops)
            + 8;
        let deadline = ctx.now() + SimTime::ms(span_slots * self.cfg.slot_ms);
        ctx.set_timer(deadline, TIMER_DEADLINE_BASE + self.generation);
    }

    fn session_over(&mut self, ctx: &mut NodeCtx) {
        let Some(progress) = self.current.as_mut() else {
            return;
        };
        let overall_missing: Vec<u16> = (1..=self.cfg.packets_per_node as u16)
            .filter(|seq| !progress.received.contains(seq))
            .collect();
        if overall_missing.is_empty() || progress.extra_sessions >= self.cfg.retry_cap {
            // Collected everything, or out of budget: unreliability stands.
            self.next_target(ctx);
        } else {
            progress.extra_sessions += 1;
            let chunk: Vec<u16> = overall_missing
                .into_iter()
                .take(MAX_MISSING_PER_COMMAND)
                .collect();
            progress.requested = chunk.clone();
            self.broadcast_command(chunk, ctx);
        }
    }
}

/// First sessions request the whole store with an empty list; recovery
/// sessions spell the numbers out.
fn requested_to_missing(requested: &[u16], initial: bool) -> Vec<u16> {
    if initial {
        Vec::new()
    } else {
        requested.to_vec()
    }
}

impl Protocol for StrawBase {
    fn on_start(&mut self, ctx: &mut NodeCtx) {
        self.next_target(ctx);
    }

    fn on_timer(&mut self, timer: u64, ctx: &mut NodeCtx) {
        if timer == TIMER_DEADLINE_BASE + self.generation {
            self.session_over(ctx);
        }
    }

    fn on_clear_to_send(&mut self, token: u64, ctx: &mut NodeCtx) {
        if token != self.generation {
            return;
        }
        if let Some(cmd) = self.pending_command.take() {
            let session = cmd.session;
            let msg = StrawMessage::Command(cmd);
            ctx.transmit(
                Dest::Broadcast,
                msg.encode().expect("valid command"),
                TxMeta { color: None, seq: Some(session), kind: detail::CMD, data: None },
            );
        }
    }

    fn on_channel_busy(&mut self, token: u64, ctx: &mut NodeCtx) {
        if token == self.generation && self.pending_command.is_some() {
            let (lo, hi) = self.cfg.backoff;
            let backoff = ctx.rng().gen_range(lo..=hi);
            let resume = ctx.busy_until();
            ctx.sense_at(resume + SimTime::ms(backoff), token);
        }
    }

    fn on_frame_rx(&mut self, frame: &Frame, ctx: &mut NodeCtx) {
        let Ok(StrawMessage::Data(data)) = StrawMessage::decode(&frame.payload) else {
            return;
        };
        if frame.dest != Dest::Node(BASE_STATION) {
            return;
        }
        let Some(progress) = self.current.as_mut() else {
            return;
        };
        if data.origin != progress.target {
            return;
        }
        progress.received.insert(data.seq);
        let complete = progress
            .requested
            .iter()
            .all(|seq| progress.received.contains(seq));
        if complete {
            self.session_over(ctx);
        }
    }
}
