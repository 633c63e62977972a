//! Run trace: one JSON object per event, one event per line.
//!
//! Every line is a single flat record with a fixed field order, so a given
//! (configuration, scenario, seed) always serializes to byte-identical
//! output. Absent fields are omitted, not null. Events within a cycle appear
//! in simulation order; cycles never decrease.

use crate::bus::{Hresp, SlaveId};
use crate::policy::{AccessKind, MasterId};
use crate::transmon::{ApuDenyDetail, Cause, SecurityEvent};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Event kinds, in the order they can occur within one transaction's life.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    #[serde(rename = "GRANT")]
    Grant,
    #[serde(rename = "ADDR_PHASE")]
    AddrPhase,
    #[serde(rename = "DATA_PHASE")]
    DataPhase,
    #[serde(rename = "RESP")]
    Resp,
    #[serde(rename = "SECURITY")]
    Security,
    #[serde(rename = "INTERRUPT")]
    Interrupt,
    #[serde(rename = "SUPERVISOR")]
    Supervisor,
}

/// One trace line. Field order is the serialization order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceLine {
    pub cycle: u64,
    pub kind: EventKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seq: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub master: Option<MasterId>,
    /// Master ID the request claimed to carry, when it differed from the
    /// port's hard-coded ID. Never propagates past the port.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub claimed: Option<MasterId>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub slave: Option<SlaveId>,
    #[serde(
        with = "crate::hexnum::hex32_opt",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub addr: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub op: Option<AccessKind>,
    #[serde(
        with = "crate::hexnum::hex32_opt",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub wdata: Option<u32>,
    #[serde(
        with = "crate::hexnum::hex32_opt",
        skip_serializing_if = "Option::is_none",
        default
    )]
    pub rdata: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hresp: Option<Hresp>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cause: Option<Cause>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detail: Option<ApuDenyDetail>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub action: Option<String>,
}

impl TraceLine {
    fn bare(cycle: u64, kind: EventKind) -> Self {
        Self {
            cycle,
            kind,
            seq: None,
            master: None,
            claimed: None,
            slave: None,
            addr: None,
            op: None,
            wdata: None,
            rdata: None,
            hresp: None,
            cause: None,
            detail: None,
            action: None,
        }
    }

    pub fn grant(cycle: u64, master: MasterId, slave: SlaveId) -> Self {
        Self {
            master: Some(master),
            slave: Some(slave),
            ..Self::bare(cycle, EventKind::Grant)
        }
    }

    pub fn addr_phase(
        cycle: u64,
        master: MasterId,
        claimed: Option<MasterId>,
        slave: Option<SlaveId>,
        addr: u32,
        op: AccessKind,
    ) -> Self {
        Self {
            master: Some(master),
            claimed: claimed.filter(|&c| c != master),
            slave,
            addr: Some(addr),
            op: Some(op),
            ..Self::bare(cycle, EventKind::AddrPhase)
        }
    }

    pub fn data_phase(
        cycle: u64,
        master: MasterId,
        slave: SlaveId,
        addr: u32,
        wdata: Option<u32>,
    ) -> Self {
        Self {
            master: Some(master),
            slave: Some(slave),
            addr: Some(addr),
            wdata,
            ..Self::bare(cycle, EventKind::DataPhase)
        }
    }

    pub fn resp(cycle: u64, master: MasterId, hresp: Hresp, rdata: Option<u32>) -> Self {
        Self {
            master: Some(master),
            rdata,
            hresp: Some(hresp),
            ..Self::bare(cycle, EventKind::Resp)
        }
    }

    pub fn security(ev: &SecurityEvent) -> Self {
        Self {
            master: Some(ev.master),
            slave: ev.slave,
            addr: Some(ev.addr),
            op: Some(ev.kind),
            wdata: ev.wdata,
            cause: Some(ev.cause),
            detail: ev.detail,
            ..Self::bare(ev.cycle, EventKind::Security)
        }
    }

    pub fn interrupt(cycle: u64, seq: u64, master: MasterId, cause: Cause) -> Self {
        Self {
            seq: Some(seq),
            master: Some(master),
            cause: Some(cause),
            ..Self::bare(cycle, EventKind::Interrupt)
        }
    }

    pub fn supervisor(cycle: u64, action: &'static str, master: Option<MasterId>) -> Self {
        Self {
            master,
            action: Some(action.to_owned()),
            ..Self::bare(cycle, EventKind::Supervisor)
        }
    }
}

/// Serialize events as JSONL. An empty run writes an empty file.
pub fn write_jsonl<W: Write>(mut w: W, lines: &[TraceLine]) -> std::io::Result<()> {
    for line in lines {
        serde_json::to_writer(&mut w, line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_jsonl_string(lines: &[TraceLine]) -> String {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, lines).expect("in-memory write cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}
