//! Per-slave transaction monitor: allow-list check in the address phase,
//! deny-list check in the data phase, and the security events both raise.
//!
//! The monitor is a verdict engine; the simulation step owns the pipeline
//! registers and applies the verdicts at the right cycle. Denials are
//! verdicts, not errors: the bus sees a generic error response that is
//! identical for a rejected address, a wrong permission, and an unmapped
//! address, so a probing master learns nothing about why it was refused.
//! The full cause is reported off-bus, to the supervisor only.

use crate::bus::SlaveId;
use crate::policy::{
    apu_check, apu_covered, dpu_check, dpu_scoped, AccessKind, ApuVerdict, DpuVerdict, MasterId,
    MatchMode, PolicyRegisterSpace,
};
use serde::{Deserialize, Serialize};

/// Why a transaction was blocked. Off-bus information: the bus response
/// itself never encodes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cause {
    ApuDeny,
    DpuDeny,
    Stray,
    EccFault,
}

/// Trace-only refinement of an ApuDeny: whether any policy covered the
/// address at all. Never visible on the bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApuDenyDetail {
    #[serde(rename = "no_policy")]
    NoMatchingPolicy,
    #[serde(rename = "permission")]
    PermissionMismatch,
}

/// Address-phase verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddressVerdict {
    /// Let the transaction proceed to its data phase. A `dpu_scoped` write
    /// is additionally registered for data-phase verification, which costs
    /// one cycle whatever the data turns out to be.
    Proceed { dpu_scoped: bool },
    DenyApu { detail: ApuDenyDetail },
}

/// Data-phase verdict for a registered write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataVerdict {
    Forward,
    DenyDpu,
}

/// A blocked or faulted transaction, as reported to the supervisor and the
/// trace. `slave` is absent when no region claimed the address.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SecurityEvent {
    pub cycle: u64,
    pub master: MasterId,
    pub slave: Option<SlaveId>,
    pub addr: u32,
    pub kind: AccessKind,
    pub cause: Cause,
    pub wdata: Option<u32>,
    pub detail: Option<ApuDenyDetail>,
}

/// One transaction monitor: the policy storage plus the two check stages.
#[derive(Debug, Clone)]
pub struct Transmon {
    pub prs: PolicyRegisterSpace,
}

impl Transmon {
    pub fn new(capacity: usize) -> Self {
        Self {
            prs: PolicyRegisterSpace::new(capacity),
        }
    }

    /// Address-phase check. Privileged masters bypass both units and are
    /// never registered for data-phase verification.
    pub fn on_address_phase(
        &self,
        master: MasterId,
        addr: u32,
        kind: AccessKind,
        privileged: bool,
        mode: MatchMode,
    ) -> AddressVerdict {
        if privileged {
            return AddressVerdict::Proceed { dpu_scoped: false };
        }
        match apu_check(self.prs.apu_policies(), master, addr, kind, mode) {
            ApuVerdict::Deny => {
                let detail = if apu_covered(self.prs.apu_policies(), master, addr, mode) {
                    ApuDenyDetail::PermissionMismatch
                } else {
                    ApuDenyDetail::NoMatchingPolicy
                };
                AddressVerdict::DenyApu { detail }
            }
            ApuVerdict::Allow => AddressVerdict::Proceed {
                dpu_scoped: kind == AccessKind::Write
                    && dpu_scoped(self.prs.dpu_policies(), master, addr, mode),
            },
        }
    }

    /// Data-phase check for a registered write, once the data is on the bus.
    pub fn on_data_phase(
        &self,
        master: MasterId,
        addr: u32,
        wdata: u32,
        mode: MatchMode,
    ) -> DataVerdict {
        match dpu_check(self.prs.dpu_policies(), master, addr, wdata, mode) {
            DpuVerdict::Deny => DataVerdict::DenyDpu,
            DpuVerdict::Forward => DataVerdict::Forward,
        }
    }
}
