//! System configuration: chiplet organization, privileged master IDs, memory
//! map, policy storage capacity, ECC settings, and global knobs.
//!
//! Core masters are numbered 1 upward across the chiplet groups in order, so
//! reorganizing 64 cores from four groups of 16 into eight groups of 8 keeps
//! every master ID stable. The supervisor and the secure external interface
//! get IDs outside the core range.

use crate::bus::{validate_map, MapError, Region, RegionKind};
use crate::mem::EccMode;
use crate::policy::{MasterId, MatchMode, SUPPORTED_CAPACITIES};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EccConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub mode: EccMode,
}

impl Default for EccConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            mode: EccMode::DetectDouble,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Cores per chiplet group; masters are numbered 1.. across groups.
    #[serde(
        default = "default_chiplets",
        deserialize_with = "crate::hexnum::de_vec_u32"
    )]
    pub chiplets: Vec<u32>,
    /// Trusted supervisor core's master ID.
    #[serde(default = "default_proc0")]
    pub proc0_id: MasterId,
    /// Secure external interface's master ID.
    #[serde(default = "default_si")]
    pub si_id: MasterId,
    /// Slave ID of a region is its index in this list.
    #[serde(default = "default_map")]
    pub memory_map: Vec<Region>,
    /// APU and DPU policy slots per monitor.
    #[serde(
        default = "default_capacity",
        deserialize_with = "crate::hexnum::de_usize"
    )]
    pub prs_capacity: usize,
    #[serde(default)]
    pub ecc: EccConfig,
    /// Blocked-request count at which a master is isolated.
    #[serde(
        default = "default_threshold",
        deserialize_with = "crate::hexnum::de_u32"
    )]
    pub isolation_threshold: u32,
    #[serde(default)]
    pub match_mode: MatchMode,
}

fn default_chiplets() -> Vec<u32> {
    vec![16, 16, 16, 16]
}

fn default_proc0() -> MasterId {
    MasterId(0x00)
}

fn default_si() -> MasterId {
    MasterId(0x41)
}

fn default_capacity() -> usize {
    16
}

fn default_threshold() -> u32 {
    3
}

fn default_map() -> Vec<Region> {
    let mem = |name: &str, base: u32| Region {
        name: name.to_string(),
        base,
        size: 0x0010_0000,
        kind: RegionKind::Memory,
    };
    vec![
        mem("mem0", 0x2000_0000),
        mem("mem1", 0x4000_0000),
        mem("mem2", 0x6000_0000),
        mem("mem3", 0x8000_0000),
        Region {
            name: "srs".to_string(),
            base: 0x5000_0000,
            size: 0x100,
            kind: RegionKind::Srs,
        },
    ]
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            chiplets: default_chiplets(),
            proc0_id: default_proc0(),
            si_id: default_si(),
            memory_map: default_map(),
            prs_capacity: default_capacity(),
            ecc: EccConfig::default(),
            isolation_threshold: default_threshold(),
            match_mode: MatchMode::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("chiplet list is empty or contains a zero-sized group")]
    BadChiplets,
    #[error("core count {0} exceeds the 8-bit master ID space")]
    TooManyCores(u32),
    #[error("master ID {0} is assigned twice")]
    IdCollision(MasterId),
    #[error("unsupported PRS capacity {0} (supported: 16, 32, 64, 128)")]
    BadCapacity(usize),
    #[error("isolation threshold must be positive")]
    BadThreshold,
    #[error(transparent)]
    Map(#[from] MapError),
}

impl SystemConfig {
    pub fn core_count(&self) -> u32 {
        self.chiplets.iter().sum()
    }

    /// Core master IDs: 1..=core_count, in chiplet order.
    pub fn core_ids(&self) -> impl Iterator<Item = MasterId> + '_ {
        (1..=self.core_count()).map(|i| MasterId(i as u8))
    }

    /// Every master with a bus port: cores first, then supervisor, then the
    /// external interface. Port indices follow this order.
    pub fn all_masters(&self) -> Vec<MasterId> {
        let mut v: Vec<MasterId> = self.core_ids().collect();
        v.push(self.proc0_id);
        v.push(self.si_id);
        v
    }

    pub fn is_privileged(&self, m: MasterId) -> bool {
        m == self.proc0_id || m == self.si_id
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.chiplets.is_empty() || self.chiplets.contains(&0) {
            return Err(ConfigError::BadChiplets);
        }
        let cores = self.core_count();
        if cores > 254 {
            return Err(ConfigError::TooManyCores(cores));
        }
        let mut ids = self.all_masters();
        ids.sort();
        for w in ids.windows(2) {
            if w[0] == w[1] {
                return Err(ConfigError::IdCollision(w[0]));
            }
        }
        if !SUPPORTED_CAPACITIES.contains(&self.prs_capacity) {
            return Err(ConfigError::BadCapacity(self.prs_capacity));
        }
        if self.isolation_threshold == 0 {
            return Err(ConfigError::BadThreshold);
        }
        validate_map(&self.memory_map)?;
        Ok(())
    }
}
