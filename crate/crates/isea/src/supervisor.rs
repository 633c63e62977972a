//! The trusted supervisor's decision state: interrupt sequencing, per-master
//! violation accounting, and the isolation rule.
//!
//! The supervisor never sits on the hot path. Monitors raise interrupts
//! during a cycle; the supervisor consumes them between cycles and its
//! actions (policy removal, teardown) take effect at the next cycle
//! boundary. Privileged masters are exempt from accounting: their events
//! are traced but never counted, and they can never be isolated.

use crate::policy::MasterId;
use crate::transmon::{Cause, SecurityEvent};

/// A security event stamped with its gapless delivery sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterruptRecord {
    pub seq: u64,
    pub event: SecurityEvent,
}

/// What the supervisor decides to do in response to interrupts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupervisorAction {
    IsolateMaster(MasterId),
}

const CAUSES: usize = 4;

fn cause_index(c: Cause) -> usize {
    match c {
        Cause::ApuDeny => 0,
        Cause::DpuDeny => 1,
        Cause::Stray => 2,
        Cause::EccFault => 3,
    }
}

/// Violation ledger plus interrupt sequencing.
#[derive(Debug, Clone)]
pub struct Supervisor {
    next_seq: u64,
    /// Blocked-event counts per master ID, by cause.
    counters: Vec<[u64; CAUSES]>,
    isolated: Vec<bool>,
    threshold: u32,
}

impl Supervisor {
    pub fn new(threshold: u32) -> Self {
        assert!(threshold > 0);
        Self {
            next_seq: 0,
            counters: vec![[0; CAUSES]; 256],
            isolated: vec![false; 256],
            threshold,
        }
    }

    /// Stamp an event with the next sequence number.
    pub fn record(&mut self, event: SecurityEvent) -> InterruptRecord {
        let rec = InterruptRecord {
            seq: self.next_seq,
            event,
        };
        self.next_seq += 1;
        rec
    }

    pub fn interrupts_delivered(&self) -> u64 {
        self.next_seq
    }

    /// Account one delivered interrupt. Returns the isolation action exactly
    /// once, when the master's total blocked count reaches the threshold.
    pub fn on_interrupt(
        &mut self,
        rec: &InterruptRecord,
        privileged: bool,
    ) -> Option<SupervisorAction> {
        if privileged {
            return None;
        }
        let m = rec.event.master.0 as usize;
        self.counters[m][cause_index(rec.event.cause)] += 1;
        let total: u64 = self.counters[m].iter().sum();
        if total >= self.threshold as u64 && !self.isolated[m] {
            self.isolated[m] = true;
            return Some(SupervisorAction::IsolateMaster(rec.event.master));
        }
        None
    }

    pub fn blocked_count(&self, m: MasterId) -> u64 {
        self.counters[m.0 as usize].iter().sum()
    }

    pub fn count_by_cause(&self, m: MasterId, cause: Cause) -> u64 {
        self.counters[m.0 as usize][cause_index(cause)]
    }

    pub fn is_isolated(&self, m: MasterId) -> bool {
        self.isolated[m.0 as usize]
    }

    /// Mark a master isolated by direct supervisor decision, outside the
    /// threshold rule.
    pub fn force_isolate(&mut self, m: MasterId) {
        self.isolated[m.0 as usize] = true;
    }

    /// Epoch teardown wipes the ledger; sequence numbers keep counting so
    /// they stay gapless per run.
    pub fn reset_epoch(&mut self) {
        self.counters.iter_mut().for_each(|c| *c = [0; CAUSES]);
        self.isolated.fill(false);
    }
}
