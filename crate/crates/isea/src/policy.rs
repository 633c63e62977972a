//! Pure evaluation of APU and DPU security policies.
//!
//! An APU (address protection unit) policy is an allow-list entry: it names a
//! master, an address scope, and a permission. Any access not matched by some
//! policy is denied. A DPU (data protection unit) policy is a deny-list entry:
//! it names a master, an address scope, and a restricted data pattern; a write
//! matching both scope and pattern is blocked.
//!
//! Address scopes are stored as an `(addr, mask)` pair and can be read two
//! ways, selected by [`MatchMode`]:
//!
//! * [`MatchMode::MaskedEquality`] — an address matches when it agrees with
//!   `addr` on every bit the mask does not cover. This is the single-gate
//!   comparator a hardware policy check would use.
//! * [`MatchMode::RangeInterval`] — an address matches when it falls in the
//!   closed interval `[addr AND NOT mask, addr OR mask]`.
//!
//! The two readings agree exactly when the mask is a contiguous run of low
//! bits and `addr` is aligned to it; they diverge for sparse masks. Everything
//! in this module is a pure function of its arguments.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Bus master identifier, as stamped by the bus interface ports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MasterId(pub u8);

impl std::fmt::Display for MasterId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#04x}", self.0)
    }
}

// Accept "0x41" as well as 65 in input files; emit plain numbers.
impl Serialize for MasterId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.0)
    }
}

impl<'de> Deserialize<'de> for MasterId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        crate::hexnum::de_width(d, 8).map(|v| MasterId(v as u8))
    }
}

/// Direction of a transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AccessKind {
    Read,
    Write,
}

/// Access permission carried by an APU policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Permission {
    #[serde(rename = "ro")]
    ReadOnly,
    #[serde(rename = "wo")]
    WriteOnly,
    #[serde(rename = "rw")]
    ReadWrite,
}

impl Permission {
    pub fn allows(self, kind: AccessKind) -> bool {
        matches!(
            (self, kind),
            (Permission::ReadOnly, AccessKind::Read)
                | (Permission::WriteOnly, AccessKind::Write)
                | (Permission::ReadWrite, _)
        )
    }
}

/// How an `(addr, mask)` scope is interpreted; fixed for a whole run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchMode {
    #[default]
    #[serde(rename = "masked")]
    MaskedEquality,
    #[serde(rename = "range")]
    RangeInterval,
}

/// Allow-list entry checked in the address phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApuPolicy {
    pub master: MasterId,
    #[serde(with = "crate::hexnum::hex32")]
    pub addr: u32,
    #[serde(with = "crate::hexnum::hex32")]
    pub mask: u32,
    pub perm: Permission,
}

/// Deny-list entry checked in the data phase: writes by `master` inside the
/// `(addr, amask)` scope carrying data matching `(data, dmask)` are blocked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DpuPolicy {
    pub master: MasterId,
    #[serde(with = "crate::hexnum::hex32")]
    pub addr: u32,
    #[serde(with = "crate::hexnum::hex32")]
    pub amask: u32,
    #[serde(with = "crate::hexnum::hex32")]
    pub data: u32,
    #[serde(with = "crate::hexnum::hex32")]
    pub dmask: u32,
}

/// Address-phase verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApuVerdict {
    Allow,
    Deny,
}

/// Data-phase verdict. `Forward` passes the write to the memory controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpuVerdict {
    Forward,
    Deny,
}

/// Derive the closed address interval described by an `(addr, mask)` pair:
/// the start clears every mask bit, the end sets every mask bit.
pub fn apu_range(addr: u32, mask: u32) -> (u32, u32) {
    (addr & !mask, addr | mask)
}

fn scope_matches(addr: u32, base: u32, mask: u32, mode: MatchMode) -> bool {
    match mode {
        MatchMode::MaskedEquality => (addr & !mask) == (base & !mask),
        MatchMode::RangeInterval => {
            let (start, end) = apu_range(base, mask);
            start <= addr && addr <= end
        }
    }
}

/// Single-policy APU check: master, permission, then address scope.
pub fn apu_match(
    policy: &ApuPolicy,
    master: MasterId,
    addr: u32,
    kind: AccessKind,
    mode: MatchMode,
) -> bool {
    master == policy.master
        && policy.perm.allows(kind)
        && scope_matches(addr, policy.addr, policy.mask, mode)
}

/// Allow-list check over a policy list: allow iff at least one entry matches.
/// An empty list denies everything.
pub fn apu_check(
    policies: &[ApuPolicy],
    master: MasterId,
    addr: u32,
    kind: AccessKind,
    mode: MatchMode,
) -> ApuVerdict {
    if policies
        .iter()
        .any(|p| apu_match(p, master, addr, kind, mode))
    {
        ApuVerdict::Allow
    } else {
        ApuVerdict::Deny
    }
}

/// True when some policy covers this master and address at all, under any
/// permission. Distinguishes "wrong permission" from "nothing covers this
/// address" for off-bus reporting; the bus response is identical either way.
pub fn apu_covered(policies: &[ApuPolicy], master: MasterId, addr: u32, mode: MatchMode) -> bool {
    policies
        .iter()
        .any(|p| master == p.master && scope_matches(addr, p.addr, p.mask, mode))
}

/// Does `(master, addr)` fall inside this DPU policy's address scope?
pub fn dpu_scope_match(policy: &DpuPolicy, master: MasterId, addr: u32, mode: MatchMode) -> bool {
    master == policy.master && scope_matches(addr, policy.addr, policy.amask, mode)
}

/// Does the written data match this policy's restricted pattern on every bit
/// the data mask does not cover?
pub fn dpu_data_match(policy: &DpuPolicy, wdata: u32) -> bool {
    (wdata & !policy.dmask) == (policy.data & !policy.dmask)
}

/// Deny-list check over a policy list: deny iff at least one entry matches
/// both scope and data. An empty list forwards everything.
pub fn dpu_check(
    policies: &[DpuPolicy],
    master: MasterId,
    addr: u32,
    wdata: u32,
    mode: MatchMode,
) -> DpuVerdict {
    if policies
        .iter()
        .any(|p| dpu_scope_match(p, master, addr, mode) && dpu_data_match(p, wdata))
    {
        DpuVerdict::Deny
    } else {
        DpuVerdict::Forward
    }
}

/// Is any DPU policy's scope applicable to this (master, addr)? Scoped writes
/// are registered for data-phase verification and take one extra cycle,
/// whatever data they end up carrying.
pub fn dpu_scoped(policies: &[DpuPolicy], master: MasterId, addr: u32, mode: MatchMode) -> bool {
    policies.iter().any(|p| dpu_scope_match(p, master, addr, mode))
}

/// The policies destined for one monitor's register space, as produced by
/// the compiler and consumed by installation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrsImage {
    #[serde(default)]
    pub apu: Vec<ApuPolicy>,
    #[serde(default)]
    pub dpu: Vec<DpuPolicy>,
}

/// Bounded storage for the policies of one transaction monitor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyRegisterSpace {
    apu: Vec<ApuPolicy>,
    dpu: Vec<DpuPolicy>,
    capacity: usize,
}

/// PRS capacities offered by supported configurations.
pub const SUPPORTED_CAPACITIES: [usize; 4] = [16, 32, 64, 128];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PrsError {
    #[error("policy register space full (capacity {capacity})")]
    CapacityExceeded { capacity: usize },
}

impl PolicyRegisterSpace {
    pub fn new(capacity: usize) -> Self {
        Self {
            apu: Vec::new(),
            dpu: Vec::new(),
            capacity,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn apu_policies(&self) -> &[ApuPolicy] {
        &self.apu
    }

    pub fn dpu_policies(&self) -> &[DpuPolicy] {
        &self.dpu
    }

    pub fn push_apu(&mut self, policy: ApuPolicy) -> Result<(), PrsError> {
        if self.apu.len() >= self.capacity {
            return Err(PrsError::CapacityExceeded {
                capacity: self.capacity,
            });
        }
        self.apu.push(policy);
        Ok(())
    }

    pub fn push_dpu(&mut self, policy: DpuPolicy) -> Result<(), PrsError> {
        if self.dpu.len() >= self.capacity {
            return Err(PrsError::CapacityExceeded {
                capacity: self.capacity,
            });
        }
        self.dpu.push(policy);
        Ok(())
    }

    /// Replace the whole contents. Fails without touching anything if either
    /// list exceeds capacity.
    pub fn install(&mut self, apu: Vec<ApuPolicy>, dpu: Vec<DpuPolicy>) -> Result<(), PrsError> {
        if apu.len() > self.capacity || dpu.len() > self.capacity {
            return Err(PrsError::CapacityExceeded {
                capacity: self.capacity,
            });
        }
        self.apu = apu;
        self.dpu = dpu;
        Ok(())
    }

    pub fn clear(&mut self) {
        self.apu.clear();
        self.dpu.clear();
    }

    /// Drop every APU policy naming this master. Used for isolation: with no
    /// allow entries left, default deny blocks everything the master sends.
    pub fn remove_apu_for_master(&mut self, master: MasterId) {
        self.apu.retain(|p| p.master != master);
    }
}
