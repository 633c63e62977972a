//! Interconnect building blocks: the memory map and address decoder, the
//! per-slave round-robin arbiter, and the request/transaction/response types
//! of the two-phase pipelined bus protocol.
//!
//! Requests carry whatever master ID the issuing script claims; the port
//! stamps its own hard-coded ID onto the transaction at issue time. From that
//! point on only the stamped ID exists on the bus, so masquerading as another
//! master is structurally impossible rather than checked.

use crate::policy::{AccessKind, MasterId};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Bus slave identifier: index into the memory map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlaveId(pub u8);

impl Serialize for SlaveId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.0)
    }
}

impl<'de> Deserialize<'de> for SlaveId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        crate::hexnum::de_width(d, 8).map(|v| SlaveId(v as u8))
    }
}

/// What kind of device answers for a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    /// Word-addressed RAM, optionally ECC-protected.
    Memory,
    /// The shared register file; never ECC-protected.
    Srs,
}

/// One entry of the memory map. The slave ID of a region is its index in the
/// map's region list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    #[serde(with = "crate::hexnum::hex32")]
    pub base: u32,
    #[serde(with = "crate::hexnum::hex32")]
    pub size: u32,
    pub kind: RegionKind,
}

impl Region {
    pub fn contains(&self, addr: u32) -> bool {
        addr >= self.base && (addr - self.base) < self.size
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MapError {
    #[error("memory map is empty")]
    Empty,
    #[error("region {0}: size {1:#x} is not a power of two of at least 64")]
    BadSize(String, u32),
    #[error("region {0}: base {1:#010x} is not aligned to size {2:#x}")]
    Misaligned(String, u32, u32),
    #[error("regions {0} and {1} overlap")]
    Overlap(String, String),
}

/// Check the structural invariants of a map: power-of-two sizes, bases
/// aligned to size, no overlap.
pub fn validate_map(regions: &[Region]) -> Result<(), MapError> {
    if regions.is_empty() {
        return Err(MapError::Empty);
    }
    for r in regions {
        if !r.size.is_power_of_two() || r.size < 64 {
            return Err(MapError::BadSize(r.name.clone(), r.size));
        }
        if r.base % r.size != 0 {
            return Err(MapError::Misaligned(r.name.clone(), r.base, r.size));
        }
    }
    for (i, a) in regions.iter().enumerate() {
        for b in &regions[i + 1..] {
            let disjoint = a.base + (a.size - 1) < b.base || b.base + (b.size - 1) < a.base;
            if !disjoint {
                return Err(MapError::Overlap(a.name.clone(), b.name.clone()));
            }
        }
    }
    Ok(())
}

/// Resolve an address to its slave and within-slave offset. `None` is a
/// decode miss: no region claims the address.
pub fn decode(regions: &[Region], addr: u32) -> Option<(SlaveId, u32)> {
    regions
        .iter()
        .position(|r| r.contains(addr))
        .map(|i| (SlaveId(i as u8), addr - regions[i].base))
}

/// What a master's script asks its port to send.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BusRequest {
    /// Master ID the script claims to be; recorded, never propagated.
    pub claimed: Option<MasterId>,
    pub addr: u32,
    pub kind: AccessKind,
    pub wdata: Option<u32>,
}

/// An in-flight transfer, after the port stamped its hard-coded ID.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BusTransaction {
    pub master: MasterId,
    pub slave: SlaveId,
    pub addr: u32,
    pub offset: u32,
    pub kind: AccessKind,
    pub wdata: Option<u32>,
    pub address_phase_cycle: u64,
    pub data_phase_cycle: u64,
}

/// Transfer receipt as seen by the master.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Hresp {
    Okay,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BusResponse {
    pub hresp: Hresp,
    /// Read data; present only for reads that completed Okay.
    pub rdata: Option<u32>,
    pub completion_cycle: u64,
}

/// Round-robin grant pointer for one slave.
///
/// `grant` picks the first candidate strictly after the previously granted
/// index, cyclically; candidates must be sorted ascending. Privileged-first
/// classing is the caller's job: pass only the candidates of the winning
/// class.
#[derive(Debug, Clone)]
pub struct RoundRobin {
    last: usize,
}

impl RoundRobin {
    pub fn new(ports: usize) -> Self {
        // Start "after" the highest index so the first grant goes to the
        // lowest pending port.
        Self {
            last: ports.saturating_sub(1),
        }
    }

    pub fn grant(&mut self, pending: &[usize]) -> Option<usize> {
        let &chosen = pending
            .iter()
            .find(|&&i| i > self.last)
            .or_else(|| pending.first())?;
        self.last = chosen;
        Some(chosen)
    }
}
