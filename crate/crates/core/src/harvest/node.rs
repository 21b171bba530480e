//! The per-node Harvest reactor.
//!
//! Lifecycle: a node starts out listening, estimating inbound links from
//! overheard frames. Once a reliable lowest-hop neighbor emerges it becomes
//! the parent; the node then picks a random free color from its soft state
//! and contends for the matching slot under CSMA. A claim that has been on
//! the air for a full period without conflict turns contention backoffs off
//! and the node settles into one transmission per period: a buffered child
//! packet first, then its own, otherwise a beacon. The parent schedules
//! children through the child-id field of its frames; a child transmits
//! data only in periods it was cleared for. Nodes that cannot find a color
//! may sleep until one is expected to free up, and a node that has sent
//! everything (its own store and its children's) releases its color and
//! sleeps for good.

use std::collections::VecDeque;

use rand::Rng;

use crate::harvest::colors::{
    available_colors, claim_color, compute_sleep, resolve_conflict, ColorSoftState,
    ConflictOutcome,
};
use crate::harvest::message::{HarvestMessage, Payload, COLOR_COUNT, MAX_HOPS};
use crate::linkest::NeighborTable;
use crate::simnet::{
    detail, Dest, Frame, NodeCtx, NodeId, Protocol, SimTime, TraceEvent, TxMeta, BASE_STATION,
    NULL_NODE,
};

const HEARTBEAT_TIMER: u64 = 0;
const SLOT_TIMER_BASE: u64 = 1 << 32;

/// A claimant whose parent has not admitted it within this many periods
/// abandons the color and redraws. Two hidden rivals on the same color
/// collide at their common neighbors indefinitely; the one whose parent
/// never hears it backs out this way.
const ADOPTION_PATIENCE_PERIODS: u64 = 6;

/// A node that drained its own store but never had children keeps its slot
/// this many periods after its first transmission before releasing. A
/// prospective child needs a full estimation window of overheard frames
/// before it can pick this node as its parent; releasing earlier would
/// orphan it with no route to the base station.
const CHILDLESS_RELEASE_GRACE_PERIODS: u64 = 40;

/// Claims younger than this defer to any relayed ownership assertion;
/// older claims defer only to a lower-id owner. Youth absorbs the claim
/// races, while the id order guarantees that two established rivals never
/// both stand their ground.
const ESTABLISHED_CLAIM_PERIODS: u64 = 5;

/// A colored node with pending upward traffic that has gone this many
/// periods without being cleared by its parent gives the slot back; the
/// parent is silent or saturated, and the color serves someone else
/// better.
const GRANT_STARVATION_PERIODS: u64 = 8;

/// Per-run protocol parameters shared by every Harvest node.
#[derive(Debug, Clone)]
pub struct HarvestConfig {
    /// TDMA slot duration in ms; one frame plus the backoff budget.
    pub slot_ms: u64,
    /// Bulk data packets each non-base node must deliver.
    pub packets_per_node: u32,
    /// Forwarding buffer capacity in packets.
    pub buffers: usize,
    /// Color entries expire after this many periods without refresh.
    pub soft_ttl_periods: u64,
    /// Contention backoff window in ms, inclusive.
    pub backoff: (u64, u64),
    /// Let idle and finished nodes switch their radios off.
    pub duty_cycle: bool,
}

impl Default for HarvestConfig {
    fn default() -> Self {
        HarvestConfig {
            slot_ms: 31,
            packets_per_node: 100,
            buffers: 2,
            soft_ttl_periods: 3,
            backoff: (1, 8),
            duty_cycle: true,
        }
    }
}

impl HarvestConfig {
    /// One full cycle of all color slots.
    pub fn period_ms(&self) -> u64 {
        self.slot_ms * COLOR_COUNT as u64
    }

    pub fn period(&self) -> SimTime {
        SimTime::ms(self.period_ms())
    }

    pub fn soft_ttl(&self) -> SimTime {
        SimTime::ms(self.period_ms() * self.soft_ttl_periods)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Phase {
    /// No parent yet; listening and estimating links.
    Discovering,
    /// Parent selected, waiting for a free color (and slot sync).
    NoColor,
    /// Claimed a color; contending with backoffs on.
    Claiming,
    /// Claim stable; transmitting once per period with backoffs off.
    Colored,
    Done,
}

pub struct HarvestNode {
    id: NodeId,
    cfg: HarvestConfig,
    pub(crate) phase: Phase,
    table: NeighborTable,
    pub(crate) soft: ColorSoftState,
    pub(crate) parent: Option<NodeId>,
    parent_hops: u8,
    excluded_parents: Vec<NodeId>,
    pub(crate) my_color: Option<u8>,
    claim_seq: Option<u16>,
    claim_started_at: Option<SimTime>,
    /// Time of the first on-air claim transmission for the current color.
    claim_airtime: Option<SimTime>,
    /// Cleared by the parent to send one data packet next period.
    pub(crate) granted: bool,
    adopted: bool,
    /// Set while waiting for the parent to list this node as a child;
    /// cleared on the first admission evidence.
    unadopted_since: Option<SimTime>,
    pub(crate) children: Vec<NodeId>,
    grant_rotation: usize,
    pub(crate) buffers: VecDeque<(NodeId, u16)>,
    pub(crate) own_remaining: u32,
    own_sent: u16,
    seq: u16,
    /// Last time this node was cleared to send (or acquired its color);
    /// drives the grant-starvation release.
    last_service_at: SimTime,
    /// Time of this node's first transmission; anchors the childless
    /// release grace.
    first_tx_at: Option<SimTime>,
    /// True once any child was ever admitted.
    ever_had_children: bool,
    /// Phase of the slot grid in `[0, period)`, synchronized from the parent.
    slot_phase: Option<u64>,
    /// Invalidates stale slot timers and sense tokens after color changes.
    generation: u64,
}

impl HarvestNode {
    pub fn new(id: NodeId, cfg: HarvestConfig) -> Self {
        let is_base = id == BASE_STATION;
        HarvestNode {
            id,
            phase: if is_base { Phase::Colored } else { Phase::Discovering },
            table: NeighborTable::default(),
            soft: ColorSoftState::default(),
            parent: None,
            parent_hops: 0,
            excluded_parents: Vec::new(),
            my_color: if is_base { Some(0) } else { None },
            claim_seq: if is_base { Some(0) } else { None },
            claim_started_at: if is_base { Some(SimTime::ZERO) } else { None },
            claim_airtime: None,
            granted: false,
            adopted: false,
            unadopted_since: None,
            children: Vec::new(),
            grant_rotation: 0,
            buffers: VecDeque::new(),
            own_remaining: if is_base { 0 } else { cfg.packets_per_node },
            own_sent: 0,
            seq: 0,
            last_service_at: SimTime::ZERO,
            first_tx_at: None,
            ever_had_children: false,
            slot_phase: if is_base { Some(0) } else { None },
            generation: 0,
            cfg,
        }
    }

    fn is_base(&self) -> bool {
        self.id == BASE_STATION
    }

    fn slot_timer_id(&self) -> u64 {
        SLOT_TIMER_BASE + self.generation
    }

    /// First instant strictly after `now` at which this node's color slot
    /// begins, relative to the synchronized slot grid.
    fn next_slot_start(&self, now: SimTime) -> SimTime {
        let period = self.cfg.period_ms();
        let phase = self.slot_phase.expect("slot grid not synchronized");
        let color = u64::from(self.my_color.expect("no color claimed"));
        let target = (phase + color * self.cfg.slot_ms) % period;
        let now_mod = now.as_ms() % period;
        let mut delta = (target + period - now_mod) % period;
        if delta == 0 {
            delta = period;
        }
        SimTime::ms(now.as_ms() + delta)
    }

    fn arm_slot_timer(&self, ctx: &mut NodeCtx) {
        ctx.set_timer(self.next_slot_start(ctx.now()), self.slot_timer_id());
    }

    /// Parent candidates must be reliable, not known-full, and heard
    /// recently enough to still be transmitting.
    fn try_select_parent(&mut self, now: SimTime) {
        let horizon = SimTime::ms(2 * self.cfg.period_ms());
        let candidate = self
            .table
            .d1_neighbors()
            .filter(|(id, e)| {
                !self.excluded_parents.contains(id) && now.saturating_sub(e.last_heard) <= horizon
            })
            .min_by_key(|(id, e)| (e.hops, *id))
            .map(|(id, e)| (id, e.hops));
        match candidate {
            Some((id, hops)) => {
                self.parent = Some(id);
                self.parent_hops = hops;
                self.adopted = false;
                self.unadopted_since = Some(now);
                if self.phase == Phase::Discovering {
                    self.phase = Phase::NoColor;
                }
            }
            None if !self.excluded_parents.is_empty() => {
                // Full rosters may have reopened; retry them next round.
                self.excluded_parents.clear();
            }
            None => {}
        }
    }

    fn try_claim(&mut self, ctx: &mut NodeCtx) {
        if self.slot_phase.is_none() {
            return;
        }
        let now = ctx.now();
        // A slot is only worth holding under a parent that is actively
        // transmitting: grants ride the parent's frames. Gating claims on
        // a live parent also grows the tree root-first, so colors near the
        // base are not locked up by nodes whose data cannot flow yet.
        let parent_alive = self.parent.and_then(|p| self.table.get(p)).is_some_and(|e| {
            now.saturating_sub(e.last_heard).as_ms() <= 2 * self.cfg.period_ms()
        });
        if !parent_alive {
            return;
        }
        let ttl = self.cfg.soft_ttl();
        let available = available_colors(&self.soft, now, ttl);
        if available.is_empty() {
            if self.cfg.duty_cycle && !ctx.is_transmitting() {
                let duration = self.waiting_sleep_duration(now, ttl);
                ctx.sleep_until(now + duration, detail::NO_COLOR);
            }
            return;
        }
        let color = claim_color(&available, ctx.rng());
        self.my_color = Some(color);
        self.claim_seq = Some(self.seq);
        self.claim_started_at = Some(now);
        self.last_service_at = now;
        self.claim_airtime = None;
        self.phase = Phase::Claiming;
        self.generation += 1;
        if !self.adopted {
            // Admission patience runs from the claim: requests only go out
            // once there is a slot to transmit in.
            self.unadopted_since = Some(now);
        }
        ctx.trace_event(TraceEvent::ColorClaim, Some(color), self.claim_seq, "");
        self.arm_slot_timer(ctx);
    }

    /// Sleep until the earliest color is expected to free up: the owner
    /// still has `total - progress` packets, one per period. Owners with
    /// unknown progress are assumed to need one full soft-state lifetime.
    fn waiting_sleep_duration(&self, now: SimTime, ttl: SimTime) -> SimTime {
        (0..COLOR_COUNT as u8)
            .filter_map(|c| {
                self.soft.fresh_owner(c, now, ttl)?;
                let entry = self.soft.entry(c).unwrap();
                Some(match entry.owner_progress {
                    Some(progress) => {
                        compute_sleep(progress, self.cfg.packets_per_node, self.cfg.period())
                    }
                    None => ttl,
                })
            })
            .min()
            .unwrap_or(ttl)
    }

    fn progress_if_idle(&mut self, ctx: &mut NodeCtx) {
        if !ctx.is_awake() || self.is_base() || self.phase == Phase::Done {
            return;
        }
        if self.parent.is_none() {
            self.try_select_parent(ctx.now());
        }
        if self.phase == Phase::NoColor && self.parent.is_some() {
            self.try_claim(ctx);
        }
    }

    fn yield_color(&mut self, winner: NodeId, winner_seq: u16, ctx: &mut NodeCtx) {
        let color = self.my_color.expect("yield without a color");
        ctx.trace_event(TraceEvent::ColorRelease, Some(color), self.claim_seq, detail::YIELD);
        self.soft.record_direct(color, winner, winner_seq, ctx.now());
        self.my_color = None;
        self.claim_seq = None;
        self.claim_started_at = None;
        self.claim_airtime = None;
        self.phase = Phase::NoColor;
        self.generation += 1;
        // Fresh random draw one period later, via the heartbeat.
    }

    /// Give up a claim that the parent never acknowledged. The local soft
    /// state keeps this node as the color's owner until it expires, so the
    /// redraw naturally prefers other colors.
    fn abandon_claim(&mut self, ctx: &mut NodeCtx) {
        let color = self.my_color.expect("abandon without a color");
        ctx.trace_event(TraceEvent::ColorRelease, Some(color), self.claim_seq, detail::YIELD);
        self.my_color = None;
        self.claim_seq = None;
        self.claim_started_at = None;
        self.claim_airtime = None;
        self.phase = Phase::NoColor;
        self.generation += 1;
        self.unadopted_since = Some(ctx.now());
    }

    /// Finished subtrees release immediately; a node that never served a
    /// child keeps beaconing through the grace window first.
    fn childless_release_allowed(&self, now: SimTime) -> bool {
        if self.ever_had_children {
            return true;
        }
        match self.first_tx_at {
            Some(first) => {
                now.saturating_sub(first).as_ms()
                    >= CHILDLESS_RELEASE_GRACE_PERIODS * self.cfg.period_ms()
            }
            None => false,
        }
    }

    /// True when the claim should be abandoned for lack of admission.
    fn admission_overdue(&self, now: SimTime) -> bool {
        match (self.parent, self.unadopted_since) {
            (Some(_), Some(since)) => {
                now.saturating_sub(since).as_ms()
                    >= ADOPTION_PATIENCE_PERIODS * self.cfg.period_ms()
            }
            _ => false,
        }
    }

    fn finish(&mut self, ctx: &mut NodeCtx) {
        let color = self.my_color.expect("finished without a color");
        ctx.trace_event(TraceEvent::ColorRelease, Some(color), self.claim_seq, detail::DONE);
        self.phase = Phase::Done;
        self.my_color = None;
        self.generation += 1;
        ctx.mark_done();
        if self.cfg.duty_cycle {
            ctx.sleep_forever(detail::DONE);
        }
    }

    /// Decide what to send this period and which child to clear for the
    /// next one, then transmit at the slot boundary.
    fn slot_fire_colored(&mut self, ctx: &mut NodeCtx) {
        if ctx.is_transmitting() {
            // A slot-grid re-anchor can land the next boundary inside this
            // node's own in-flight frame; skip the period.
            self.arm_slot_timer(ctx);
            return;
        }
        let now = ctx.now();

        // Children that stopped transmitting have released their colors and
        // left the tree; drop them promptly so the roster reopens for
        // candidates that still hold a slot.
        let roster_patience = SimTime::ms(2 * self.cfg.period_ms());
        self.children.retain(|&c| {
            self.table
                .get(c)
                .map(|e| now.saturating_sub(e.last_heard) <= roster_patience)
                .unwrap_or(false)
        });

        if !self.is_base()
            && self.own_remaining == 0
            && self.buffers.is_empty()
            && self.children.is_empty()
            && self.childless_release_allowed(now)
        {
            self.finish(ctx);
            return;
        }

        if !self.is_base()
            && (self.own_remaining > 0 || !self.buffers.is_empty())
            && now.saturating_sub(self.last_service_at).as_ms()
                >= GRANT_STARVATION_PERIODS * self.cfg.period_ms()
        {
            self.abandon_claim(ctx);
            return;
        }

        let granted_now = self.is_base() || std::mem::take(&mut self.granted);
        let (payload, kind) = if granted_now && !self.is_base() {
            if let Some((origin, number)) = self.buffers.pop_front() {
                (Payload::Data { origin, number }, detail::DATA_FWD)
            } else if self.own_remaining > 0 {
                self.own_remaining -= 1;
                self.own_sent += 1;
                (Payload::Data { origin: self.id, number: self.own_sent }, detail::DATA_OWN)
            } else {
                (Payload::Beacon, detail::BEACON)
            }
        } else {
            (Payload::Beacon, detail::BEACON)
        };

        let child_ids = self.schedule_children();
        self.transmit_frame(payload, kind, child_ids, ctx);
        self.arm_slot_timer(ctx);
    }

    /// Child scheduling. The base station clears all of its children every
    /// period since it only absorbs packets; other parents rotate through
    /// their children, clearing one per period when a buffer slot is open.
    fn schedule_children(&mut self) -> [NodeId; 2] {
        let pick = |v: &[NodeId], i: usize| v.get(i).copied().unwrap_or(NULL_NODE);
        if self.is_base() {
            return [pick(&self.children, 0), pick(&self.children, 1)];
        }
        if !self.children.is_empty() && self.buffers.len() < self.cfg.buffers {
            let granted = self.children[self.grant_rotation % self.children.len()];
            self.grant_rotation += 1;
            let other = self
                .children
                .iter()
                .copied()
                .find(|&c| c != granted)
                .unwrap_or(NULL_NODE);
            [granted, other]
        } else {
            [NULL_NODE, pick(&self.children, 0)]
        }
    }

    fn transmit_frame(&mut self, payload: Payload, kind: &'static str, child_ids: [NodeId; 2], ctx: &mut NodeCtx) {
        let now = ctx.now();
        let color = self.my_color.expect("transmit without a color");
        // Keep the local claim fresh before advertising the owner array.
        self.soft
            .record_direct(color, self.id, self.claim_seq.unwrap_or(self.seq), now);
        let mut owners = self.soft.advertised_owners(now, SimTime::ms(2 * self.cfg.period_ms()));
        owners[color as usize] = self.id;
        let hops = if self.is_base() { 0 } else { (self.parent_hops + 1).min(MAX_HOPS) };
        let msg = HarvestMessage {
            color_id: color,
            hops,
            child_ids,
            color_owners: owners,
            seq: self.seq,
            payload,
        };
        let dest = match self.parent {
            Some(p) => Dest::Node(p),
            None => Dest::Broadcast,
        };
        let data = match payload {
            Payload::Beacon => None,
            Payload::Data { origin, number } => Some((origin, number)),
        };
        ctx.transmit(
            dest,
            msg.encode().expect("own message fields in range"),
            TxMeta { color: Some(color), seq: Some(self.seq), kind, data },
        );
        self.first_tx_at.get_or_insert(now);
        self.seq = self.seq.wrapping_add(1);
    }

    fn handle_conflicts(&mut self, msg: &HarvestMessage, sender: NodeId, ctx: &mut NodeCtx) {
        if self.is_base() {
            // The slot grid is anchored on the base station's color; its
            // claim predates every rival and never yields.
            return;
        }
        if !matches!(self.phase, Phase::Claiming | Phase::Colored) {
            return;
        }
        let mine = self.my_color.expect("claiming phase without color");
        let my_claim = (self.claim_seq.unwrap(), self.id);
        if msg.color_id == mine && sender != self.id {
            // Direct evidence: the rival is transmitting under my color.
            let rival_seq = self
                .soft
                .entry(mine)
                .filter(|e| e.owner == sender)
                .map(|e| e.claim_seq)
                .unwrap_or(msg.seq);
            match resolve_conflict(my_claim, (rival_seq, sender)) {
                ConflictOutcome::Yield => self.yield_color(sender, rival_seq, ctx),
                ConflictOutcome::Keep => {
                    // Reassert ownership over the rival's entry.
                    self.soft.record_direct(mine, self.id, my_claim.0, ctx.now());
                }
            }
        } else if msg.color_id != mine {
            let asserted = msg.color_owners[mine as usize];
            if asserted != NULL_NODE && asserted != self.id {
                // A neighbor heard someone else transmit under this color:
                // an owner within two hops but possibly out of earshot,
                // with no claim ordering to compare. Young claims always
                // defer; established ones defer only to a lower id, so two
                // settled rivals cannot both stand their ground.
                let age = self
                    .claim_started_at
                    .map_or(u64::MAX, |t| ctx.now().saturating_sub(t).as_ms());
                let young = age < ESTABLISHED_CLAIM_PERIODS * self.cfg.period_ms();
                if young || asserted < self.id {
                    self.yield_color(asserted, 0, ctx);
                }
            }
        }
    }

    fn handle_parent_frame(&mut self, msg: &HarvestMessage, frame: &Frame) {
        let period = self.cfg.period_ms();
        let color_offset = u64::from(msg.color_id) * self.cfg.slot_ms % period;
        let phase = (frame.tx_start.as_ms() % period + period - color_offset) % period;
        self.slot_phase = Some(phase);
        self.parent_hops = msg.hops;

        let listed = msg.child_ids.contains(&self.id);
        if listed {
            self.adopted = true;
            self.unadopted_since = None;
            if msg.child_ids[0] == self.id || self.parent == Some(BASE_STATION) {
                self.granted = true;
                self.last_service_at = frame.tx_start;
            }
        } else if msg.child_ids.iter().all(|&c| c != NULL_NODE) {
            // Roster full elsewhere; look for another parent.
            let parent = self.parent.take().unwrap();
            if !self.excluded_parents.contains(&parent) {
                self.excluded_parents.push(parent);
            }
            self.adopted = false;
            self.granted = false;
            self.unadopted_since = None;
            if matches!(self.phase, Phase::Discovering | Phase::NoColor) {
                self.phase = Phase::Discovering;
            }
        } else {
            self.adopted = false;
        }
    }
}

impl Protocol for HarvestNode {
    fn on_start(&mut self, ctx: &mut NodeCtx) {
        if self.is_base() {
            // The base station bootstraps the slot grid: color 0, hop
            // count 0, beaconing from the first instant.
            ctx.trace_event(TraceEvent::ColorClaim, Some(0), self.claim_seq, "");
            ctx.set_timer(SimTime::ZERO, self.slot_timer_id());
        } else {
            ctx.set_timer(ctx.now() + self.cfg.period(), HEARTBEAT_TIMER);
        }
    }

    fn on_timer(&mut self, timer: u64, ctx: &mut NodeCtx) {
        if timer == HEARTBEAT_TIMER {
            if self.phase == Phase::Done {
                return;
            }
            ctx.set_timer(ctx.now() + self.cfg.period(), HEARTBEAT_TIMER);
            self.progress_if_idle(ctx);
            return;
        }
        if timer != self.slot_timer_id() {
            return; // stale slot timer from a previous claim
        }
        if !self.is_base() && self.admission_overdue(ctx.now()) {
            self.abandon_claim(ctx);
            return;
        }
        match self.phase {
            Phase::Colored => self.slot_fire_colored(ctx),
            Phase::Claiming => {
                let stable = self
                    .claim_airtime
                    .map(|t| ctx.now().saturating_sub(t) >= self.cfg.period())
                    .unwrap_or(false);
                if stable {
                    // One full period on the air without a conflict:
                    // contention backoffs off from here on.
                    self.phase = Phase::Colored;
                    self.slot_fire_colored(ctx);
                } else {
                    let (lo, hi) = self.cfg.backoff;
                    let backoff = ctx.rng().gen_range(lo..=hi);
                    let at = ctx.now() + SimTime::ms(backoff);
                    ctx.sense_at(at, self.generation);
                    self.arm_slot_timer(ctx);
                }
            }
            _ => {}
        }
    }

    fn on_clear_to_send(&mut self, token: u64, ctx: &mut NodeCtx) {
        if token != self.generation || self.phase != Phase::Claiming {
            return;
        }
        let child_ids = self.schedule_children();
        self.transmit_frame(Payload::Beacon, detail::BEACON, child_ids, ctx);
        if self.claim_airtime.is_none() {
            self.claim_airtime = Some(ctx.now());
        }
    }

    fn on_channel_busy(&mut self, _token: u64, _ctx: &mut NodeCtx) {
        // Someone owns this slot after all; stay quiet, listen, and let the
        // next reception resolve the contention.
    }

    fn on_frame_rx(&mut self, frame: &Frame, ctx: &mut NodeCtx) {
        if self.phase == Phase::Done {
            return;
        }
        let Ok(msg) = HarvestMessage::decode(&frame.payload) else {
            return;
        };
        let sender = frame.sender;
        debug_assert_eq!(msg.implied_sender(), sender);
        let now = ctx.now();
        let ttl = self.cfg.soft_ttl();

        self.table.record_packet(sender, msg.seq, msg.hops, now);
        self.soft.record_direct(msg.color_id, sender, msg.seq, now);
        if let Payload::Data { origin, number } = msg.payload {
            if origin == sender {
                self.soft.record_owner_progress(msg.color_id, sender, number);
            }
        }
        for color in 0..COLOR_COUNT as u8 {
            if color == msg.color_id {
                continue;
            }
            let owner = msg.color_owners[color as usize];
            if owner != NULL_NODE {
                self.soft.merge_advertised(color, owner, now, ttl);
            }
        }

        self.handle_conflicts(&msg, sender, ctx);

        if self.parent == Some(sender) {
            self.handle_parent_frame(&msg, frame);
        }

        // Child admission and data intake: frames addressed to this node
        // come from nodes that selected it as their parent.
        if frame.dest == Dest::Node(self.id) {
            if !self.children.contains(&sender) && self.children.len() < 2 {
                self.children.push(sender);
                self.ever_had_children = true;
            }
            if self.children.contains(&sender) {
                if let Payload::Data { origin, number } = msg.payload {
                    if !self.is_base() && self.buffers.len() < self.cfg.buffers {
                        self.buffers.push_back((origin, number));
                    }
                    // The base station absorbs packets; delivery shows up in
                    // the trace, nothing to buffer. A full buffer elsewhere
                    // rejects the packet: the child simply is not scheduled
                    // again until space opens.
                }
            }
        }

        // New information may unblock parent selection or a color claim.
        self.progress_if_idle(ctx);
    }

    fn on_wake(&mut self, ctx: &mut NodeCtx) {
        self.progress_if_idle(ctx);
    }
}
