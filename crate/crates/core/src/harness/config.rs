//! Run configuration: a flat key-value file (TOML) plus field-by-name
//! overrides that the CLI flags and sweep axes share.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simnet::FRAME_AIRTIME_MS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Harvest,
    Straw,
}

impl ProtocolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::Harvest => "harvest",
            ProtocolKind::Straw => "straw",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossModel {
    /// Perfect links within one spacing step, silence beyond: no Bernoulli
    /// losses on the routing links.
    #[serde(rename = "lossless")]
    Lossless,
    /// Quality decays linearly with distance down to the carrier floor.
    #[serde(rename = "distance-decay")]
    DistanceDecay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TopologyKind {
    /// `rows` x `cols` grid at `spacing_ft`, base station at the corner.
    #[serde(rename = "grid")]
    Grid,
    /// `node_count` nodes filled row-major into a near-square grid.
    #[serde(rename = "grid_n")]
    GridN,
    /// Line of `node_count` nodes with the base station at the center.
    #[serde(rename = "line")]
    Line,
    /// The 21-node centered line used by the steady-state experiments.
    #[serde(rename = "line21")]
    Line21,
    /// The 21-node multi-hop grid reconstruction (3x7 at 8 ft, centered
    /// base) used by the lossy comparisons.
    #[serde(rename = "lossy21")]
    Lossy21,
    /// Explicit topology file; see `topology_file`.
    #[serde(rename = "file")]
    File,
}

/// Everything a run needs. Field names double as config-file keys and CLI
/// flag names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub protocol: ProtocolKind,
    pub topology: TopologyKind,
    pub rows: usize,
    pub cols: usize,
    pub node_count: usize,
    pub spacing_ft: f64,
    pub topology_file: String,
    pub packets_per_node: u32,
    pub slot_ms: u64,
    pub colors: u8,
    pub concurrency: u8,
    pub buffers: usize,
    pub seed: u64,
    pub loss: LossModel,
    pub retry_cap: u32,
    pub soft_ttl_periods: u64,
    pub duty_cycle: bool,
    pub backoff_min_ms: u64,
    pub backoff_max_ms: u64,
    pub timeout_periods: u64,
    /// Distance-decay curve: full quality up to here.
    pub quality_full_ft: f64,
    /// Distance-decay curve: carrier floor here, silence beyond.
    pub quality_edge_ft: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            protocol: ProtocolKind::Harvest,
            topology: TopologyKind::Grid,
            rows: 3,
            cols: 7,
            node_count: 21,
            spacing_ft: 3.0,
            topology_file: String::new(),
            packets_per_node: 100,
            slot_ms: 31,
            colors: 4,
            concurrency: 2,
            buffers: 2,
            seed: 1,
            loss: LossModel::DistanceDecay,
            retry_cap: 5,
            soft_ttl_periods: 3,
            duty_cycle: true,
            backoff_min_ms: 1,
            backoff_max_ms: 8,
            timeout_periods: 10_000,
            quality_full_ft: 7.6,
            quality_edge_ft: 13.0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("colors must be at least concurrency + 2 ({0} < {1} + 2)")]
    TooFewColors(u8, u8),
    #[error("the wire format carries exactly 4 color owners and 2 children; colors={0}, concurrency={1} unsupported")]
    UnsupportedColoring(u8, u8),
    #[error("slot of {slot} ms cannot fit a {FRAME_AIRTIME_MS} ms frame after a backoff of up to {backoff} ms")]
    SlotTooSmall { slot: u64, backoff: u64 },
    #[error("backoff window [{0}, {1}] is empty or starts at zero")]
    BadBackoffWindow(u64, u64),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("topology=file requires topology_file")]
    MissingTopologyFile,
    #[error("distance-decay curve needs 0 < quality_full_ft < quality_edge_ft")]
    BadDecayCurve,
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{1}` for `{0}`")]
    BadValue(String, String),
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.colors < self.concurrency + 2 {
            return Err(ConfigError::TooFewColors(self.colors, self.concurrency));
        }
        if self.colors != 4 || self.concurrency != 2 {
            return Err(ConfigError::UnsupportedColoring(self.colors, self.concurrency));
        }
        if self.slot_ms == 0 {
            return Err(ConfigError::NonPositive("slot_ms"));
        }
        if self.backoff_min_ms == 0 || self.backoff_min_ms > self.backoff_max_ms {
            return Err(ConfigError::BadBackoffWindow(self.backoff_min_ms, self.backoff_max_ms));
        }
        if self.backoff_max_ms + FRAME_AIRTIME_MS > self.slot_ms {
            return Err(ConfigError::SlotTooSmall {
                slot: self.slot_ms,
                backoff: self.backoff_max_ms,
            });
        }
        if self.buffers == 0 {
            return Err(ConfigError::NonPositive("buffers"));
        }
        if self.timeout_periods == 0 {
            return Err(ConfigError::NonPositive("timeout_periods"));
        }
        if self.spacing_ft <= 0.0 {
            return Err(ConfigError::NonPositive("spacing_ft"));
        }
        if self.soft_ttl_periods == 0 {
            return Err(ConfigError::NonPositive("soft_ttl_periods"));
        }
        if self.topology == TopologyKind::File && self.topology_file.is_empty() {
            return Err(ConfigError::MissingTopologyFile);
        }
        if !(self.quality_full_ft > 0.0 && self.quality_full_ft < self.quality_edge_ft) {
            return Err(ConfigError::BadDecayCurve);
        }
        Ok(())
    }

    pub fn period_ms(&self) -> u64 {
        self.slot_ms * u64::from(self.colors)
    }

    pub fn render(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::BadValue("<config>".into(), e.to_string()))
    }

    /// Set one field by its config-file key. Shared by CLI overrides and
    /// sweep axes.
    pub fn set_field(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue(key.to_string(), value.to_string());
        match key {
            "protocol" => {
                self.protocol = match value {
                    "harvest" => ProtocolKind::Harvest,
                    "straw" => ProtocolKind::Straw,
                    _ => return Err(bad()),
                }
            }
            "topology" => {
                self.topology = match value {
                    "grid" => TopologyKind::Grid,
                    "grid_n" => TopologyKind::GridN,
                    "line" => TopologyKind::Line,
                    "line21" => TopologyKind::Line21,
                    "lossy21" => TopologyKind::Lossy21,
                    "file" => TopologyKind::File,
                    _ => return Err(bad()),
                }
            }
            "rows" => self.rows = value.parse().map_err(|_| bad())?,
            "cols" => self.cols = value.parse().map_err(|_| bad())?,
            "node_count" => self.node_count = value.parse().map_err(|_| bad())?,
            "spacing_ft" => self.spacing_ft = value.parse().map_err(|_| bad())?,
            "topology_file" => self.topology_file = value.to_string(),
            "packets_per_node" => self.packets_per_node = value.parse().map_err(|_| bad())?,
            "slot_ms" => self.slot_ms = value.parse().map_err(|_| bad())?,
            "colors" => self.colors = value.parse().map_err(|_| bad())?,
            "concurrency" => self.concurrency = value.parse().map_err(|_| bad())?,
            "buffers" => self.buffers = value.parse().map_err(|_| bad())?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "loss" => {
                self.loss = match value {
                    "lossless" => LossModel::Lossless,
                    "distance-decay" => LossModel::DistanceDecay,
                    _ => return Err(bad()),
                }
            }
            "retry_cap" => self.retry_cap = value.parse().map_err(|_| bad())?,
            "soft_ttl_periods" => self.soft_ttl_periods = value.parse().map_err(|_| bad())?,
            "duty_cycle" => self.duty_cycle = value.parse().map_err(|_| bad())?,
            "backoff_min_ms" => self.backoff_min_ms = value.parse().map_err(|_| bad())?,
            "backoff_max_ms" => self.backoff_max_ms = value.parse().map_err(|_| bad())?,
            "timeout_periods" => self.timeout_periods = value.parse().map_err(|_| bad())?,
            "quality_full_ft" => self.quality_full_ft = value.parse().map_err(|_| bad())?,
            "quality_edge_ft" => self.quality_edge_ft = value.parse().map_err(|_| bad())?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn render_parse_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.protocol = ProtocolKind::Straw;
        cfg.topology = TopologyKind::Line21;
        cfg.seed = 99;
        cfg.loss = LossModel::Lossless;
        let parsed = RunConfig::parse(&cfg.render()).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn coloring_invariant_enforced() {
        let mut cfg = RunConfig::default();
        cfg.colors = 3;
        assert_eq!(cfg.validate().unwrap_err(), ConfigError::TooFewColors(3, 2));
        cfg.colors = 6;
        cfg.concurrency = 4;
        assert_eq!(cfg.validate().unwrap_err(), ConfigError::UnsupportedColoring(6, 4));
    }

    #[test]
    fn backoff_must_fit_the_slot() {
        let mut cfg = RunConfig::default();
        cfg.backoff_max_ms = 9;
        assert_eq!(
            cfg.validate().unwrap_err(),
            ConfigError::SlotTooSmall { slot: 31, backoff: 9 }
        );
    }

    #[test]
    fn set_field_mirrors_keys() {
        let mut cfg = RunConfig::default();
        cfg.set_field("protocol", "straw").unwrap();
        cfg.set_field("node_count", "31").unwrap();
        cfg.set_field("loss", "lossless").unwrap();
        cfg.set_field("duty_cycle", "false").unwrap();
        assert_eq!(cfg.protocol, ProtocolKind::Straw);
        assert_eq!(cfg.node_count, 31);
        assert_eq!(cfg.loss, LossModel::Lossless);
        assert!(!cfg.duty_cycle);
        assert!(matches!(
            cfg.set_field("nope", "1"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            cfg.set_field("seed", "abc"),
            Err(ConfigError::BadValue(_, _))
        ));
    }
}
