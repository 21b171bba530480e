//! Cross-module invariants checked on whole simulation traces.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use harvest_core::analysis::{base_receptions, per_node_tx_counts};
use harvest_core::harness::{
    run, sweep, LossModel, ProtocolKind, RunConfig, RunOutput, SweepAxis, TopologyKind,
};
use harvest_core::linkest::CARRIER_MIN;
use harvest_core::simnet::{
    detail, Kernel, NodeCtx, Protocol, SimTime, TraceEvent, Topology, BASE_STATION,
    FRAME_AIRTIME_MS,
};
use harvest_core::straw::{StrawBase, StrawConfig};

fn straw_line21() -> &'static RunOutput {
    static CELL: OnceLock<RunOutput> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut cfg = RunConfig::default();
        cfg.protocol = ProtocolKind::Straw;
        cfg.topology = TopologyKind::Line21;
        cfg.loss = LossModel::Lossless;
        cfg.packets_per_node = 100;
        run(&cfg).expect("lossless straw run")
    })
}

fn lossy_pair() -> &'static (RunOutput, RunOutput) {
    static CELL: OnceLock<(RunOutput, RunOutput)> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut cfg = RunConfig::default();
        cfg.topology = TopologyKind::Lossy21;
        cfg.packets_per_node = 100;
        cfg.seed = 3;
        let harvest = run(&cfg).expect("lossy harvest");
        cfg.protocol = ProtocolKind::Straw;
        let straw = run(&cfg).expect("lossy straw");
        (harvest, straw)
    })
}

/// Transmissions within one broadcast phase never exceed the sender count,
/// with equality on lossless links.
#[test]
fn straw_flood_bound_per_session() {
    let out = straw_line21();
    let mut session_forwards: BTreeMap<u16, usize> = BTreeMap::new();
    for r in &out.trace {
        if r.event == TraceEvent::Tx && r.detail == detail::CMD && r.node != BASE_STATION {
            *session_forwards.entry(r.seq.unwrap()).or_insert(0) += 1;
        }
    }
    assert_eq!(session_forwards.len(), 20);
    for (session, forwards) in session_forwards {
        assert_eq!(forwards, 20, "session {session} must flood every sender exactly once");
    }

    let (_, lossy) = lossy_pair();
    let mut lossy_forwards: BTreeMap<u16, usize> = BTreeMap::new();
    for r in &lossy.trace {
        if r.event == TraceEvent::Tx && r.detail == detail::CMD && r.node != BASE_STATION {
            *lossy_forwards.entry(r.seq.unwrap()).or_insert(0) += 1;
        }
    }
    for (session, forwards) in lossy_forwards {
        assert!(forwards <= 20, "session {session} flooded {forwards} times");
    }
}

/// At most one origin's data is in flight at any instant: the defining
/// contrast with pipelined tree collection.
#[test]
fn straw_serial_exfiltration() {
    for out in [straw_line21(), &lossy_pair().1] {
        let mut active: Vec<(u64, u64, u8)> = Vec::new(); // (start, end, origin)
        for r in &out.trace {
            if r.event != TraceEvent::Tx {
                continue;
            }
            let Some((origin, _)) = parse_data(&r.detail) else { continue };
            let start = r.time.as_ms();
            active.retain(|&(_, end, _)| end > start);
            for &(_, _, other) in &active {
                assert_eq!(other, origin, "two origins in flight at {start} ms");
            }
            active.push((start, start + FRAME_AIRTIME_MS, origin));
        }
    }
}

fn parse_data(detail_str: &str) -> Option<(u8, u16)> {
    let mut parts = detail_str.split(':');
    let kind = parts.next()?;
    if kind != detail::DATA_OWN && kind != detail::DATA_FWD {
        return None;
    }
    Some((parts.next()?.parse().ok()?, parts.next()?.parse().ok()?))
}

/// Along the active line, simultaneous data transmitters are at least
/// three routing hops apart.
#[test]
fn straw_pipeline_spacing() {
    let out = straw_line21();
    let hops = out.topology.reliable_hops(BASE_STATION);
    let mut active: Vec<(u64, u32)> = Vec::new(); // (end, hop of transmitter)
    for r in &out.trace {
        if r.event != TraceEvent::Tx || parse_data(&r.detail).is_none() {
            continue;
        }
        let start = r.time.as_ms();
        let hop = hops[r.node as usize].unwrap();
        active.retain(|&(end, _)| end > start);
        for &(_, other_hop) in &active {
            let gap = other_hop.abs_diff(hop);
            assert!(gap >= 3, "transmitters {gap} hops apart overlapped at {start} ms");
        }
        active.push((start + FRAME_AIRTIME_MS, hop));
    }
}

/// Recovery keeps re-requesting until the retry budget runs out; the
/// session total stays far above one per target and bounded by the cap.
#[test]
fn straw_lossy_session_count_plausible() {
    let (_, lossy) = lossy_pair();
    let sessions = lossy.report.sessions;
    assert!(sessions > 20, "losses must force recovery sessions, got {sessions}");
    assert!(sessions <= 20 * 6, "retry cap bounds sessions, got {sessions}");
}

/// An empty store means an immediately ending session and no data frames.
#[test]
fn straw_empty_store_collects_nothing() {
    let mut cfg = RunConfig::default();
    cfg.protocol = ProtocolKind::Straw;
    cfg.topology = TopologyKind::Line;
    cfg.node_count = 5;
    cfg.spacing_ft = 8.0;
    cfg.loss = LossModel::Lossless;
    cfg.packets_per_node = 0;
    let out = run(&cfg).unwrap();
    assert!(!out.censored);
    assert_eq!(out.report.delivered_distinct, 0);
    assert_eq!(out.report.sessions, 4);
    assert!(out.trace.iter().all(|r| parse_data(&r.detail).is_none()));
}

/// A session targeting the base station needs no forwarding at all.
#[test]
fn straw_base_station_target_is_trivial() {
    struct Mute;
    impl Protocol for Mute {
        fn on_start(&mut self, _ctx: &mut NodeCtx) {}
        fn on_timer(&mut self, _t: u64, _ctx: &mut NodeCtx) {}
        fn on_frame_rx(&mut self, _f: &harvest_core::simnet::Frame, _ctx: &mut NodeCtx) {}
    }
    let topology = Topology::new(
        vec![(0.0, 0.0), (8.0, 0.0)],
        vec![vec![100, 100], vec![100, 100]],
    )
    .unwrap();
    let cfg = StrawConfig {
        slot_ms: 31,
        packets_per_node: 10,
        retry_cap: 5,
        settle_slots: 3,
        backoff: (1, 8),
        diameter: 1,
    };
    let base = StrawBase::new(vec![BASE_STATION], vec![0, 1], cfg);
    let mut kernel = Kernel::new(topology, 1, vec![Box::new(base), Box::new(Mute)]);
    let result = kernel.run_until(SimTime::ms(100_000), |w| w.is_done(BASE_STATION));
    assert!(!result.censored);
    let (trace, _) = kernel.into_parts();
    assert!(trace.iter().all(|r| r.event != TraceEvent::Tx), "no transmissions needed");
}

/// Doubling the average tree height at a fixed packet volume doubles the
/// data transmissions, within 15%.
#[test]
fn data_transmissions_scale_with_tree_height() {
    let mut shallow = RunConfig::default();
    shallow.topology = TopologyKind::Line21; // two branches of ten: mean depth 5.5
    shallow.loss = LossModel::Lossless;
    shallow.packets_per_node = 20;
    let shallow_out = run(&shallow).unwrap();

    let mut deep = RunConfig::default();
    deep.topology = TopologyKind::Grid; // one row of 21: mean depth 10.5
    deep.rows = 1;
    deep.cols = 21;
    deep.spacing_ft = 8.0;
    deep.loss = LossModel::Lossless;
    deep.packets_per_node = 20;
    let deep_out = run(&deep).unwrap();

    assert_eq!(shallow_out.report.delivered_distinct, 400);
    assert_eq!(deep_out.report.delivered_distinct, 400);
    let height_ratio = deep_out.report.avg_tree_height / shallow_out.report.avg_tree_height;
    let tx_ratio = deep_out.report.data_tx as f64 / shallow_out.report.data_tx as f64;
    assert!((height_ratio - 10.5 / 5.5).abs() < 0.05, "unexpected tree shapes");
    assert!(
        (tx_ratio / height_ratio - 1.0).abs() <= 0.15,
        "data tx ratio {tx_ratio:.3} vs height ratio {height_ratio:.3}"
    );
}

/// Per-node transmission counts reconcile with the trace row count.
#[test]
fn transmission_counts_reconcile() {
    for out in [&lossy_pair().0, &lossy_pair().1] {
        let per_node = per_node_tx_counts(&out.trace, 21);
        let rows = out.trace.iter().filter(|r| r.event == TraceEvent::Tx).count() as u64;
        assert_eq!(per_node.iter().sum::<u64>(), rows);
        assert_eq!(out.report.total_tx, rows);
        assert_eq!(out.report.per_node_tx, per_node);
    }
}

/// Timestamps are sound: the trace is time-ordered and every reception or
/// loss record sits exactly one frame airtime after its transmission.
#[test]
fn trace_time_soundness() {
    for out in [&lossy_pair().0, &lossy_pair().1] {
        let mut last = 0u64;
        let mut tx_at: BTreeSet<(u8, u64)> = BTreeSet::new();
        for r in &out.trace {
            assert!(r.time.as_ms() >= last, "trace order broken at {}", r.time);
            last = r.time.as_ms();
            if r.event == TraceEvent::Tx {
                tx_at.insert((r.node, r.time.as_ms()));
            }
        }
        for r in &out.trace {
            if matches!(r.event, TraceEvent::Rx | TraceEvent::Collision)
                || (r.event == TraceEvent::Drop && r.detail != detail::SLEEPING)
            {
                let sender = r.peer.expect("peer on reception records");
                let start = r.time.as_ms() - FRAME_AIRTIME_MS;
                assert!(
                    tx_at.contains(&(sender, start)),
                    "record at {} has no matching transmission",
                    r.time
                );
            }
        }
    }
}

/// No reception ever coexists with an overlapping audible transmission:
/// collision handling is airtight on real traces.
#[test]
fn collision_symmetry_on_lossy_trace() {
    let (harvest, _) = lossy_pair();
    let txs: Vec<(u8, u64)> = harvest
        .trace
        .iter()
        .filter(|r| r.event == TraceEvent::Tx)
        .map(|r| (r.node, r.time.as_ms()))
        .collect();
    for r in &harvest.trace {
        if r.event != TraceEvent::Rx {
            continue;
        }
        let receiver = r.node;
        let sender = r.peer.unwrap();
        let (start, end) = (r.time.as_ms() - FRAME_AIRTIME_MS, r.time.as_ms());
        for &(other, tx_start) in &txs {
            if other == sender || other == receiver {
                continue;
            }
            let overlap = tx_start < end && start < tx_start + FRAME_AIRTIME_MS;
            if overlap {
                assert!(
                    harvest.topology.quality(other, receiver) < CARRIER_MIN,
                    "node {receiver} decoded a frame from {sender} while audible node {other} overlapped"
                );
            }
        }
    }
}

/// Under loss, deliveries stay a sub-multiset of the generated packets.
#[test]
fn lossy_deliveries_are_a_submultiset() {
    let (harvest, straw) = lossy_pair();
    for out in [harvest, straw] {
        let mut counts: BTreeMap<(u8, u16), u32> = BTreeMap::new();
        for rx in base_receptions(&out.trace) {
            *counts.entry((rx.origin, rx.number)).or_insert(0) += 1;
        }
        for ((origin, number), count) in counts {
            assert_eq!(count, 1, "packet {origin}:{number} delivered {count} times");
            assert!(number >= 1 && number <= 100);
            assert!(origin >= 1 && origin <= 20);
        }
        assert!(out.report.delivered_distinct <= out.report.expected_packets);
    }
}

/// The checked-in lossy topology file matches the builtin generator, so
/// `run --topology file` reproduces the builtin experiments bit-for-bit.
#[test]
fn published_lossy_topology_matches_builtin() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../topologies/lossy21.txt");
    let text = std::fs::read_to_string(path).expect("published topology file");
    let parsed = harvest_core::harness::parse_topology(&text).unwrap();
    let builtin = harvest_core::harness::lossy21(7.6, 13.0).unwrap();
    assert_eq!(parsed, builtin);
}

/// Sweeps are reproducible and show censored runs explicitly.
#[test]
fn sweep_reproducible_and_censoring_visible() {
    let mut base = RunConfig::default();
    base.topology = TopologyKind::Line;
    base.node_count = 7;
    base.spacing_ft = 8.0;
    base.loss = LossModel::Lossless;
    base.packets_per_node = 5;
    let axes = vec![SweepAxis {
        key: "protocol".into(),
        values: vec!["harvest".into(), "straw".into()],
    }];
    let a = sweep(&base, &axes, 2).unwrap();
    let b = sweep(&base, &axes, 2).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.rows.len(), 4);

    // A hopeless timeout must surface as censored, not vanish.
    base.timeout_periods = 2;
    let censored = sweep(&base, &[], 1).unwrap();
    assert!(censored.rows[0].report.censored);
    assert!(censored.to_csv().contains("true"));
    assert!(censored.render_tables().contains("| 1\n") || censored.render_tables().contains(" 1"));
}
