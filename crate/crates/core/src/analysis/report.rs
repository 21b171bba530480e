//! Run reports: the metric bundle emitted next to every trace.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::analysis::{
    base_receptions, convergence_samples, energy, latency, per_node_tx_counts, tx_breakdown,
    BaseRx, EnergyModel,
};
use crate::simnet::{
    NodeId, SimTime, Topology, TraceEvent, TraceRecord, BASE_STATION,
};

/// Metrics of one run. Serializes to a flat `key,node,value` CSV so runs
/// can be compared without re-reading traces.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub protocol: String,
    pub topology_tag: String,
    pub node_count: usize,
    pub packets_per_node: u32,
    pub seed: u64,
    pub slot_ms: u64,
    pub period_ms: u64,
    pub censored: bool,
    /// First-to-last arrival span at the base station.
    pub latency_ms: Option<u64>,
    pub delivered_distinct: u64,
    pub expected_packets: u64,
    pub delivery_ratio: f64,
    /// Harvest: packets per period over the active window. Straw: delivered
    /// fraction of the scheduled per-session transmissions.
    pub rate: f64,
    /// Effective steady-state collection time per packet.
    pub per_packet_ms: f64,
    pub data_tx: u64,
    pub beacon_tx: u64,
    pub cmd_tx: u64,
    pub total_tx: u64,
    /// Broadcast sessions issued (Straw); zero for Harvest.
    pub sessions: u64,
    pub convergence_samples: Option<u64>,
    pub avg_tree_height: f64,
    pub diameter: u32,
    pub total_energy_ma_ms: f64,
    pub per_node_tx: Vec<u64>,
    pub per_node_energy_ma_ms: Vec<f64>,
}

/// Inputs to [`build_report`] beyond the trace itself.
#[derive(Debug, Clone)]
pub struct ReportParams {
    pub protocol: String,
    pub topology_tag: String,
    pub packets_per_node: u32,
    pub slot_ms: u64,
    pub period_ms: u64,
    pub seed: u64,
    pub sim_end: SimTime,
    pub censored: bool,
}

/// Straw sessions are delimited by the base station's command broadcasts.
fn straw_session_rate(trace: &[TraceRecord], receptions: &[BaseRx], topology: &Topology, slot_ms: u64) -> (u64, f64) {
    let cmd_times: Vec<u64> = trace
        .iter()
        .filter(|r| {
            r.event == TraceEvent::Tx
                && r.node == BASE_STATION
                && r.detail == crate::simnet::detail::CMD
        })
        .map(|r| r.time.as_ms())
        .collect();
    let sessions = cmd_times.len() as u64;
    if cmd_times.is_empty() {
        return (0, 0.0);
    }
    let hops = topology.reliable_hops(BASE_STATION);
    let mut delivered_total = 0.0;
    let mut scheduled_total = 0.0;
    for (i, &start) in cmd_times.iter().enumerate() {
        let end = cmd_times.get(i + 1).copied().unwrap_or(u64::MAX);
        let in_session: Vec<&BaseRx> = receptions
            .iter()
            .filter(|rx| rx.time.as_ms() >= start && rx.time.as_ms() < end)
            .collect();
        let Some(first) = in_session.first() else {
            continue; // flood never produced data; retried session
        };
        let target_hops = match hops[first.origin as usize] {
            Some(h) if h >= 1 => h,
            _ => continue,
        };
        let period_slots = crate::straw::collection_period_slots(target_hops)
            .expect("non-base target");
        let span = in_session.last().unwrap().time.as_ms() - first.time.as_ms();
        let scheduled = span as f64 / (period_slots * slot_ms) as f64 + 1.0;
        delivered_total += in_session.len() as f64;
        scheduled_total += scheduled;
    }
    let rate = if scheduled_total > 0.0 { delivered_total / scheduled_total } else { 0.0 };
    (sessions, rate)
}

/// Average routing-tree depth. For Harvest the tree is read off the trace
/// (each node's dominant data destination is its parent); nodes that never
/// sent data fall back to their hop count over the reliable graph.
fn avg_tree_height(trace: &[TraceRecord], topology: &Topology) -> f64 {
    let n = topology.node_count();
    let mut dest_votes: Vec<BTreeMap<NodeId, u64>> = vec![BTreeMap::new(); n];
    for r in trace {
        if r.event == TraceEvent::Tx && super::is_data_detail(&r.detail) {
            if let Some(dest) = r.peer {
                *dest_votes[r.node as usize].entry(dest).or_insert(0) += 1;
            }
        }
    }
    let parent: Vec<Option<NodeId>> = dest_votes
        .iter()
        .map(|votes| {
            votes
                .iter()
                .max_by_key(|(id, count)| (*count, std::cmp::Reverse(**id)))
                .map(|(&id, _)| id)
        })
        .collect();
    let fallback = topology.reliable_hops(BASE_STATION);
    let mut total = 0.0;
    let mut counted = 0u32;
    for node in 1..n as u8 {
        let mut depth = 0u32;
        let mut cursor = node;
        let mut ok = false;
        for _ in 0..n {
            match parent[cursor as usize] {
                Some(p) => {
                    depth += 1;
                    if p == BASE_STATION {
                        ok = true;
                        break;
                    }
                    cursor = p;
                }
                None => break,
            }
        }
        let depth = if ok {
            Some(depth)
        } else {
            fallback[node as usize]
        };
        if let Some(d) = depth {
            total += f64::from(d);
            counted += 1;
        }
    }
    if counted == 0 {
        0.0
    } else {
        total / f64::from(counted)
    }
}

/// Assemble the full metric bundle for one finished run.
pub fn build_report(trace: &[TraceRecord], topology: &Topology, params: &ReportParams) -> Report {
    let n = topology.node_count();
    let receptions = base_receptions(trace);
    let mut distinct: Vec<(NodeId, u16)> = receptions.iter().map(|r| (r.origin, r.number)).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let delivered_distinct = distinct.len() as u64;
    let expected = (n as u64 - 1) * u64::from(params.packets_per_node);
    let breakdown = tx_breakdown(trace);
    let per_node_tx = per_node_tx_counts(trace, n);
    let total_tx = per_node_tx.iter().sum();
    let per_node_energy = energy(trace, &EnergyModel::default(), n, params.sim_end);

    let (sessions, straw_rate) = if params.protocol == "straw" {
        straw_session_rate(trace, &receptions, topology, params.slot_ms)
    } else {
        (0, 0.0)
    };
    let (rate, per_packet_ms) = if params.protocol == "straw" {
        let pp = if straw_rate > 0.0 { 3.0 * params.slot_ms as f64 / straw_rate } else { 0.0 };
        (straw_rate, pp)
    } else {
        let rate = match (receptions.first(), receptions.last()) {
            (Some(first), Some(last)) if receptions.len() > 1 => {
                let span = (last.time - first.time).as_ms() as f64;
                receptions.len() as f64 / (span / params.period_ms as f64 + 1.0)
            }
            (Some(_), _) => 1.0,
            _ => 0.0,
        };
        let pp = if rate > 0.0 { params.period_ms as f64 / rate } else { 0.0 };
        (rate, pp)
    };

    Report {
        protocol: params.protocol.clone(),
        topology_tag: params.topology_tag.clone(),
        node_count: n,
        packets_per_node: params.packets_per_node,
        seed: params.seed,
        slot_ms: params.slot_ms,
        period_ms: params.period_ms,
        censored: params.censored,
        latency_ms: latency(trace).map(|t| t.as_ms()),
        delivered_distinct,
        expected_packets: expected,
        delivery_ratio: if expected == 0 {
            1.0
        } else {
            delivered_distinct as f64 / expected as f64
        },
        rate,
        per_packet_ms,
        data_tx: breakdown.data,
        beacon_tx: breakdown.beacon,
        cmd_tx: breakdown.cmd,
        total_tx,
        sessions,
        convergence_samples: convergence_samples(
            trace,
            params.packets_per_node,
            30 * params.period_ms,
        ),
        avg_tree_height: avg_tree_height(trace, topology),
        diameter: topology.diameter(),
        total_energy_ma_ms: per_node_energy.iter().sum(),
        per_node_tx,
        per_node_energy_ma_ms: per_node_energy,
    }
}

pub const REPORT_HEADER: &str = "key,node,value";

/// Flat CSV: scalars as `key,,value`, per-node metrics as `key,node,value`.
pub fn write_report_csv(report: &Report) -> String {
    let mut out = String::new();
    out.push_str(REPORT_HEADER);
    out.push('\n');
    let mut scalar = |key: &str, value: String| {
        out.push_str(&format!("{key},,{value}\n"));
    };
    scalar("protocol", report.protocol.clone());
    scalar("topology", report.topology_tag.clone());
    scalar("node_count", report.node_count.to_string());
    scalar("packets_per_node", report.packets_per_node.to_string());
    scalar("seed", report.seed.to_string());
    scalar("slot_ms", report.slot_ms.to_string());
    scalar("period_ms", report.period_ms.to_string());
    scalar("censored", report.censored.to_string());
    scalar(
        "latency_ms",
        report.latency_ms.map(|v| v.to_string()).unwrap_or_default(),
    );
    scalar("delivered_distinct", report.delivered_distinct.to_string());
    scalar("expected_packets", report.expected_packets.to_string());
    scalar("delivery_ratio", format!("{:.6}", report.delivery_ratio));
    scalar("rate", format!("{:.6}", report.rate));
    scalar("per_packet_ms", format!("{:.6}", report.per_packet_ms));
    scalar("data_tx", report.data_tx.to_string());
    scalar("beacon_tx", report.beacon_tx.to_string());
    scalar("cmd_tx", report.cmd_tx.to_string());
    scalar("total_tx", report.total_tx.to_string());
    scalar("sessions", report.sessions.to_string());
    scalar(
        "convergence_samples",
        report
            .convergence_samples
            .map(|v| v.to_string())
            .unwrap_or_default(),
    );
    scalar("avg_tree_height", format!("{:.6}", report.avg_tree_height));
    scalar("diameter", report.diameter.to_string());
    scalar("total_energy_ma_ms", format!("{:.3}", report.total_energy_ma_ms));
    for (node, v) in report.per_node_tx.iter().enumerate() {
        out.push_str(&format!("node_tx,{node},{v}\n"));
    }
    for (node, v) in report.per_node_energy_ma_ms.iter().enumerate() {
        out.push_str(&format!("node_energy_ma_ms,{node},{v:.3}\n"));
    }
    out
}

#[derive(Debug, Error)]
pub enum ReportParseError {
    #[error("missing or malformed header")]
    BadHeader,
    #[error("line {0}: expected key,node,value")]
    BadShape(usize),
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("bad value for `{0}`")]
    BadValue(String),
}

/// Rebuild a [`Report`] from its CSV form.
pub fn parse_report_csv(text: &str) -> Result<Report, ReportParseError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(REPORT_HEADER) {
        return Err(ReportParseError::BadHeader);
    }
    let mut scalars: BTreeMap<String, String> = BTreeMap::new();
    let mut node_tx: BTreeMap<usize, u64> = BTreeMap::new();
    let mut node_energy: BTreeMap<usize, f64> = BTreeMap::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let key = parts.next().ok_or(ReportParseError::BadShape(idx + 2))?;
        let node = parts.next().ok_or(ReportParseError::BadShape(idx + 2))?;
        let value = parts.next().ok_or(ReportParseError::BadShape(idx + 2))?;
        if node.is_empty() {
            scalars.insert(key.to_string(), value.to_string());
        } else {
            let node: usize = node
                .parse()
                .map_err(|_| ReportParseError::BadValue(line.to_string()))?;
            match key {
                "node_tx" => {
                    node_tx.insert(
                        node,
                        value.parse().map_err(|_| ReportParseError::BadValue(line.to_string()))?,
                    );
                }
                "node_energy_ma_ms" => {
                    node_energy.insert(
                        node,
                        value.parse().map_err(|_| ReportParseError::BadValue(line.to_string()))?,
                    );
                }
                _ => return Err(ReportParseError::BadValue(line.to_string())),
            }
        }
    }
    fn req<'a>(
        scalars: &'a BTreeMap<String, String>,
        key: &'static str,
    ) -> Result<&'a str, ReportParseError> {
        scalars
            .get(key)
            .map(String::as_str)
            .ok_or(ReportParseError::MissingKey(key))
    }
    fn num<T: std::str::FromStr>(
        scalars: &BTreeMap<String, String>,
        key: &'static str,
    ) -> Result<T, ReportParseError> {
        req(scalars, key)?
            .parse()
            .map_err(|_| ReportParseError::BadValue(key.to_string()))
    }
    let opt_num = |key: &'static str| -> Result<Option<u64>, ReportParseError> {
        let raw = req(&scalars, key)?;
        if raw.is_empty() {
            Ok(None)
        } else {
            raw.parse().map(Some).map_err(|_| ReportParseError::BadValue(key.to_string()))
        }
    };
    Ok(Report {
        protocol: req(&scalars, "protocol")?.to_string(),
        topology_tag: req(&scalars, "topology")?.to_string(),
        node_count: num(&scalars, "node_count")?,
        packets_per_node: num(&scalars, "packets_per_node")?,
        seed: num(&scalars, "seed")?,
        slot_ms: num(&scalars, "slot_ms")?,
        period_ms: num(&scalars, "period_ms")?,
        censored: num(&scalars, "censored")?,
        latency_ms: opt_num("latency_ms")?,
        delivered_distinct: num(&scalars, "delivered_distinct")?,
        expected_packets: num(&scalars, "expected_packets")?,
        delivery_ratio: num(&scalars, "delivery_ratio")?,
        rate: num(&scalars, "rate")?,
        per_packet_ms: num(&scalars, "per_packet_ms")?,
        data_tx: num(&scalars, "data_tx")?,
        beacon_tx: num(&scalars, "beacon_tx")?,
        cmd_tx: num(&scalars, "cmd_tx")?,
        total_tx: num(&scalars, "total_tx")?,
        sessions: num(&scalars, "sessions")?,
        convergence_samples: opt_num("convergence_samples")?,
        avg_tree_height: num(&scalars, "avg_tree_height")?,
        diameter: num(&scalars, "diameter")?,
        total_energy_ma_ms: num(&scalars, "total_energy_ma_ms")?,
        per_node_tx: node_tx.into_values().collect(),
        per_node_energy_ma_ms: node_energy.into_values().collect(),
    })
}

/// Human-readable one-page summary.
pub fn render_report_text(report: &Report) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{} run on {} ({} nodes, {} packets/node, seed {})\n",
        report.protocol, report.topology_tag, report.node_count, report.packets_per_node, report.seed
    ));
    if report.censored {
        out.push_str("  ** censored: hit the run timeout before completion **\n");
    }
    match report.latency_ms {
        Some(ms) => out.push_str(&format!("  collection latency   {ms} ms\n")),
        None => out.push_str("  collection latency   undefined (no receptions)\n"),
    }
    out.push_str(&format!(
        "  delivery             {}/{} distinct packets (ratio {:.4})\n",
        report.delivered_distinct, report.expected_packets, report.delivery_ratio
    ));
    if report.protocol == "straw" {
        out.push_str(&format!(
            "  rate                 {:.3} packets per 3x{} ms (sessions: {})\n",
            report.rate * 3.0 * report.slot_ms as f64 / (3.0 * report.slot_ms as f64),
            report.slot_ms,
            report.sessions
        ));
    } else {
        out.push_str(&format!(
            "  rate                 {:.3} packets per {} ms period\n",
            report.rate, report.period_ms
        ));
    }
    out.push_str(&format!("  per-packet time      {:.2} ms\n", report.per_packet_ms));
    out.push_str(&format!(
        "  transmissions        {} data, {} beacon, {} command ({} total)\n",
        report.data_tx, report.beacon_tx, report.cmd_tx, report.total_tx
    ));
    if let Some(samples) = report.convergence_samples {
        out.push_str(&format!("  convergence          first node done in sample {samples}\n"));
    }
    out.push_str(&format!(
        "  tree height          {:.2} avg hops (diameter {})\n",
        report.avg_tree_height, report.diameter
    ));
    out.push_str(&format!(
        "  energy               {:.1} mA*ms total across {} nodes\n",
        report.total_energy_ma_ms, report.node_count
    ));
    out
}
