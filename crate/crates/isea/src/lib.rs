//! Cycle-stepped model of an interposer-level root of trust: a shared bus
//! fabric whose every slave port carries an inline security monitor, plus
//! the policy tooling and scripting harness that drive it.
//!
//! The pieces, bottom up:
//!
//! - [`policy`]: allow-list and deny-list entries, their two address-match
//!   interpretations, and the per-slave policy register space.
//! - [`bus`]: memory map decode, request/response types, round-robin
//!   arbitration.
//! - [`mem`]: memory arrays with per-byte SEC-DED codes and taint granules.
//! - [`transmon`]: the per-slave monitor combining address-phase and
//!   data-phase checks into verdicts and security events.
//! - [`supervisor`]: the interrupt ledger and isolation trigger.
//! - [`system`]: the clocked composition of all of the above.
//! - [`compiler`]: range-to-mask conversion, policy validation, and
//!   compilation of policy sources into per-slave register images.
//! - [`scenario`]: JSON-scripted runs with expectations and assertions.
//! - [`fuzz`]: randomized traffic generation with a trace-replay auditor.
//!
//! Determinism is load-bearing everywhere: same inputs, same trace, byte for
//! byte. See [`system::System::step`] for the fixed intra-cycle pass order.

pub mod bus;
pub mod compiler;
pub mod config;
pub mod fuzz;
pub mod hexnum;
pub mod image;
pub mod mem;
pub mod policy;
pub mod scenario;
pub mod supervisor;
pub mod system;
pub mod trace;
pub mod transmon;

pub use bus::{BusRequest, BusResponse, Hresp, Region, RegionKind, SlaveId};
pub use config::SystemConfig;
pub use policy::{
    AccessKind, ApuPolicy, DpuPolicy, MasterId, MatchMode, Permission, PrsImage,
};
pub use system::{Completion, RunOutcome, System, SystemError};
pub use transmon::{Cause, SecurityEvent};
