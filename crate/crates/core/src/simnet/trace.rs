//! Run traces: one record per observable event, serialized as CSV.
//!
//! The CSV schema is `time_ms,node,event,peer,color,seq,detail,protocol`
//! with empty fields for values that do not apply. `event` is one of
//! `tx`, `rx`, `collision`, `drop`, `sleep`, `wake`, `color_claim`,
//! `color_release`. The trailing `protocol` column distinguishes harvest
//! runs from straw runs sharing the schema.

use std::fmt;

use thiserror::Error;

use crate::simnet::time::{NodeId, SimTime};

/// Kind of a trace record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceEvent {
    /// Transmission started at `time` by `node`; `peer` is the destination.
    Tx,
    /// Successful reception completed at `time` (`tx_start + tx_duration`);
    /// `peer` is the sender.
    Rx,
    /// A frame from `peer` was lost at `node` because another audible
    /// transmission overlapped it.
    Collision,
    /// A frame from `peer` was lost at `node` for a non-collision reason;
    /// `detail` carries `fade` (Bernoulli loss), `sleeping`, or `tx_busy`.
    Drop,
    /// Radio switched off at `time`.
    Sleep,
    /// Radio switched back on at `time`.
    Wake,
    /// `node` started claiming `color`; `seq` is the claim sequence number.
    ColorClaim,
    /// `node` released `color`; `detail` is `done` or `yield`.
    ColorRelease,
}

impl TraceEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceEvent::Tx => "tx",
            TraceEvent::Rx => "rx",
            TraceEvent::Collision => "collision",
            TraceEvent::Drop => "drop",
            TraceEvent::Sleep => "sleep",
            TraceEvent::Wake => "wake",
            TraceEvent::ColorClaim => "color_claim",
            TraceEvent::ColorRelease => "color_release",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "tx" => TraceEvent::Tx,
            "rx" => TraceEvent::Rx,
            "collision" => TraceEvent::Collision,
            "drop" => TraceEvent::Drop,
            "sleep" => TraceEvent::Sleep,
            "wake" => TraceEvent::Wake,
            "color_claim" => TraceEvent::ColorClaim,
            "color_release" => TraceEvent::ColorRelease,
            _ => return None,
        })
    }
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One timestamped simulation event.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub time: SimTime,
    pub node: NodeId,
    pub event: TraceEvent,
    pub peer: Option<NodeId>,
    pub color: Option<u8>,
    pub seq: Option<u16>,
    pub detail: String,
}

impl TraceRecord {
    fn csv_row(&self, protocol: &str) -> String {
        fn opt<T: fmt::Display>(v: &Option<T>) -> String {
            v.as_ref().map(|x| x.to_string()).unwrap_or_default()
        }
        debug_assert!(!self.detail.contains(','), "detail must stay comma-free");
        format!(
            "{},{},{},{},{},{},{},{}",
            self.time,
            self.node,
            self.event,
            opt(&self.peer),
            opt(&self.color),
            opt(&self.seq),
            self.detail,
            protocol
        )
    }
}

pub const TRACE_HEADER: &str = "time_ms,node,event,peer,color,seq,detail,protocol";

#[derive(Debug, Error)]
pub enum TraceParseError {
    #[error("line {0}: expected 8 comma-separated fields")]
    BadShape(usize),
    #[error("line {0}: unknown event `{1}`")]
    UnknownEvent(usize, String),
    #[error("line {0}: bad numeric field `{1}`")]
    BadNumber(usize, String),
    #[error("missing or malformed header line")]
    BadHeader,
    #[error("trace mixes protocols `{0}` and `{1}`")]
    MixedProtocols(String, String),
}

/// Serialize a trace to CSV text, header line included.
pub fn write_trace_csv(records: &[TraceRecord], protocol: &str) -> String {
    let mut out = String::with_capacity(records.len() * 32 + 64);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row(protocol));
        out.push('\n');
    }
    out
}

/// Parse CSV text produced by [`write_trace_csv`]. Returns the records and
/// the protocol column value, which must be uniform across rows.
pub fn parse_trace_csv(text: &str) -> Result<(Vec<TraceRecord>, String), TraceParseError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRACE_HEADER => {}
        _ => return Err(TraceParseError::BadHeader),
    }
    let mut records = Vec::new();
    let mut protocol: Option<String> = None;
    for (idx, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(TraceParseError::BadShape(idx + 1));
        }
        let num = |s: &str| -> Result<u64, TraceParseError> {
            s.parse::<u64>().map_err(|_| TraceParseError::BadNumber(idx + 1, s.to_string()))
        };
        let opt_num = |s: &str| -> Result<Option<u64>, TraceParseError> {
            if s.is_empty() { Ok(None) } else { num(s).map(Some) }
        };
        let event = TraceEvent::parse(fields[2])
            .ok_or_else(|| TraceParseError::UnknownEvent(idx + 1, fields[2].to_string()))?;
        let record = TraceRecord {
            time: SimTime::ms(num(fields[0])?),
            node: num(fields[1])? as NodeId,
            event,
            peer: opt_num(fields[3])?.map(|v| v as NodeId),
            color: opt_num(fields[4])?.map(|v| v as u8),
            seq: opt_num(fields[5])?.map(|v| v as u16),
            detail: fields[6].to_string(),
        };
        match &protocol {
            None => protocol = Some(fields[7].to_string()),
            Some(p) if p == fields[7] => {}
            Some(p) => {
                return Err(TraceParseError::MixedProtocols(p.clone(), fields[7].to_string()))
            }
        }
        records.push(record);
    }
    Ok((records, protocol.unwrap_or_default()))
}

/// Frame-content detail tokens shared by the protocols.
pub mod detail {
    /// Data frame carrying the sender's own payload.
    pub const DATA_OWN: &str = "data_own";
    /// Data frame forwarded on behalf of a descendant.
    pub const DATA_FWD: &str = "data_fwd";
    /// Slot-keeping frame with no payload.
    pub const BEACON: &str = "beacon";
    /// Straw broadcast command frame.
    pub const CMD: &str = "cmd";
    /// Bernoulli link loss.
    pub const FADE: &str = "fade";
    /// Frame arrived while the receiver slept.
    pub const SLEEPING: &str = "sleeping";
    /// Frame overlapped the receiver's own transmission.
    pub const TX_BUSY: &str = "tx_busy";
    /// Sleep because no color is currently available.
    pub const NO_COLOR: &str = "no_color";
    /// Permanent sleep after finishing all transmissions.
    pub const DONE: &str = "done";
    /// Color released after losing a contention.
    pub const YIELD: &str = "yield";
}
