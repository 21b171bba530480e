//! Single-run execution: build the topology, instantiate protocol nodes,
//! run to completion or timeout, and derive the report.

use thiserror::Error;

use crate::analysis::{build_report, Report, ReportParams};
use crate::harness::config::{ConfigError, LossModel, ProtocolKind, RunConfig, TopologyKind};
use crate::harness::topogen::{
    gen_center_line, gen_grid, gen_grid_n, line21, lossy21, parse_topology, QualityProfile,
    TopoGenError,
};
use crate::harvest::{HarvestConfig, HarvestNode};
use crate::linkest::D1_MIN;
use crate::simnet::{
    Kernel, NodeId, Protocol, RadioLog, SimTime, Topology, TraceRecord, BASE_STATION,
};
use crate::straw::{StrawBase, StrawConfig, StrawNode};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("topology: {0}")]
    Topology(#[from] TopoGenError),
    #[error("cannot read topology file {0}: {1}")]
    TopologyFile(String, std::io::Error),
    #[error("node {0} cannot reach the base station over reliable links")]
    Unreachable(NodeId),
    #[error("run failed for config:\n{config}\ncause: {cause}")]
    SweepRun { config: String, cause: String },
}

/// Everything a finished run produced.
pub struct RunOutput {
    pub config: RunConfig,
    pub topology: Topology,
    pub topology_tag: String,
    pub trace: Vec<TraceRecord>,
    pub radios: Vec<RadioLog>,
    pub report: Report,
    pub sim_end: SimTime,
    pub censored: bool,
}

/// Build the topology a config describes, plus a short tag for reports.
pub fn build_topology(cfg: &RunConfig) -> Result<(Topology, String), HarnessError> {
    let decay = QualityProfile::DistanceDecay {
        full_ft: cfg.quality_full_ft,
        edge_ft: cfg.quality_edge_ft,
    };
    let profile = match cfg.loss {
        LossModel::Lossless => QualityProfile::Lossless { spacing_ft: cfg.spacing_ft },
        LossModel::DistanceDecay => decay,
    };
    let (topology, tag) = match cfg.topology {
        TopologyKind::Grid => (
            gen_grid(cfg.rows, cfg.cols, cfg.spacing_ft, profile)?,
            format!("grid{}x{}@{}", cfg.rows, cfg.cols, cfg.spacing_ft),
        ),
        TopologyKind::GridN => (
            gen_grid_n(cfg.node_count, cfg.spacing_ft, profile)?,
            format!("grid_n{}@{}", cfg.node_count, cfg.spacing_ft),
        ),
        TopologyKind::Line => {
            let half = cfg.node_count.saturating_sub(1) / 2;
            (
                gen_center_line(half, cfg.spacing_ft, profile)?,
                format!("line{}@{}", 2 * half + 1, cfg.spacing_ft),
            )
        }
        TopologyKind::Line21 => (line21(8.0)?, "line21".to_string()),
        TopologyKind::Lossy21 => (
            lossy21(cfg.quality_full_ft, cfg.quality_edge_ft)?,
            "lossy21".to_string(),
        ),
        TopologyKind::File => {
            let text = std::fs::read_to_string(&cfg.topology_file)
                .map_err(|e| HarnessError::TopologyFile(cfg.topology_file.clone(), e))?;
            (parse_topology(&text)?, format!("file:{}", cfg.topology_file))
        }
    };
    Ok((topology, tag))
}

/// The routing parent used by Straw: the lowest-id reliable neighbor one
/// hop closer to the base station.
fn route_parent(topology: &Topology, hops: &[Option<u32>], node: NodeId) -> Option<NodeId> {
    let my_hops = hops[node as usize]?;
    topology
        .nodes()
        .filter(|&j| j != node && topology.quality(node, j) >= D1_MIN)
        .find(|&j| hops[j as usize] == Some(my_hops - 1))
}

fn build_nodes(
    cfg: &RunConfig,
    topology: &Topology,
) -> Result<Vec<Box<dyn Protocol>>, HarnessError> {
    let n = topology.node_count();
    match cfg.protocol {
        ProtocolKind::Harvest => {
            let hcfg = HarvestConfig {
                slot_ms: cfg.slot_ms,
                packets_per_node: cfg.packets_per_node,
                buffers: cfg.buffers,
                soft_ttl_periods: cfg.soft_ttl_periods,
                backoff: (cfg.backoff_min_ms, cfg.backoff_max_ms),
                duty_cycle: cfg.duty_cycle,
            };
            Ok((0..n as u8)
                .map(|id| Box::new(HarvestNode::new(id, hcfg.clone())) as Box<dyn Protocol>)
                .collect())
        }
        ProtocolKind::Straw => {
            let hops = topology.reliable_hops(BASE_STATION);
            for node in topology.nodes() {
                if hops[node as usize].is_none() {
                    return Err(HarnessError::Unreachable(node));
                }
            }
            let diameter = topology.diameter();
            let scfg = StrawConfig {
                slot_ms: cfg.slot_ms,
                packets_per_node: cfg.packets_per_node,
                retry_cap: cfg.retry_cap,
                settle_slots: u64::from(diameter) + 2,
                backoff: (cfg.backoff_min_ms, cfg.backoff_max_ms),
                diameter,
            };
            let hops_flat: Vec<u32> = hops.iter().map(|h| h.unwrap()).collect();
            let targets: Vec<NodeId> = (1..n as u8).collect();
            let mut nodes: Vec<Box<dyn Protocol>> =
                vec![Box::new(StrawBase::new(targets, hops_flat.clone(), scfg.clone()))];
            for id in 1..n as u8 {
                let parent = route_parent(topology, &hops, id)
                    .ok_or(HarnessError::Unreachable(id))?;
                nodes.push(Box::new(StrawNode::new(
                    id,
                    parent,
                    hops_flat[id as usize],
                    scfg.clone(),
                )));
            }
            Ok(nodes)
        }
    }
}

/// Execute one deterministic run.
pub fn run(cfg: &RunConfig) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let (topology, tag) = build_topology(cfg)?;
    let nodes = build_nodes(cfg, &topology)?;
    let n = topology.node_count();
    let mut kernel = Kernel::new(topology.clone(), cfg.seed, nodes);

    let deadline = SimTime::ms(cfg.timeout_periods * cfg.period_ms());
    let result = match cfg.protocol {
        ProtocolKind::Harvest => {
            let senders = n - 1;
            kernel.run_until(deadline, |w| w.done_count() >= senders)
        }
        ProtocolKind::Straw => kernel.run_until(deadline, |w| w.is_done(BASE_STATION)),
    };
    // One period of margin so final-sleep savings are visible in timelines.
    let sim_end = result.end + SimTime::ms(cfg.period_ms());

    let (trace, radios) = kernel.into_parts();
    let report = build_report(
        &trace,
        &topology,
        &ReportParams {
            protocol: cfg.protocol.as_str().to_string(),
            topology_tag: tag.clone(),
            packets_per_node: cfg.packets_per_node,
            slot_ms: cfg.slot_ms,
            period_ms: cfg.period_ms(),
            seed: cfg.seed,
            sim_end,
            censored: result.censored,
        },
    );
    Ok(RunOutput {
        config: cfg.clone(),
        topology,
        topology_tag: tag,
        trace,
        radios,
        report,
        sim_end,
        censored: result.censored,
    })
}
