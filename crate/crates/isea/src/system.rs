//! The whole simulated system: master ports, the interconnect, per-slave
//! monitors and memories, and the supervisor, advanced one clock cycle at a
//! time.
//!
//! A transfer's life, in cycles: the port activates a scripted request, the
//! target slave's arbiter grants it (address phase, allow-list check), and
//! one cycle later the data phase completes it — uniformly, whether it was
//! allowed, refused by the allow-list, or aimed at an unmapped address. The
//! one exception is a write inside some deny-list scope: its data must be
//! inspected, so it is registered and released one cycle later, whatever the
//! data turns out to be.
//!
//! Within a cycle the passes run in a fixed order: activation, registered
//! releases, data phases (by slave index), arbitration and address phases
//! (by slave index), then the supervisor, which consumes this cycle's
//! interrupts and mutates policies only at the cycle boundary. No pass uses
//! unordered iteration, so a run is a pure function of its inputs.

use crate::bus::{
    decode, BusRequest, BusResponse, Hresp, Region, RegionKind, RoundRobin, SlaveId,
};
use crate::config::{ConfigError, SystemConfig};
use crate::mem::{FaultTarget, MemoryArray, WordCheck};
use crate::policy::{AccessKind, MasterId, PolicyRegisterSpace, PrsError, PrsImage};
use crate::supervisor::{InterruptRecord, Supervisor, SupervisorAction};
use crate::trace::TraceLine;
use crate::transmon::{AddressVerdict, ApuDenyDetail, Cause, DataVerdict, SecurityEvent, Transmon};
use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SystemError {
    #[error("no port exists for master {0}")]
    UnknownMaster(MasterId),
    #[error("write requests need wdata and reads must not carry it")]
    MalformedRequest,
    #[error("address {0:#010x} is not word-aligned")]
    Unaligned(u32),
    #[error("address {0:#010x} is outside every mapped region")]
    Unmapped(u32),
    #[error("region {start:#010x}..={end:#010x} is empty or spans slaves")]
    BadRegion { start: u32, end: u32 },
    #[error("privileged master {0} cannot be isolated")]
    PrivilegedIsolation(MasterId),
    #[error("policy image count {got} does not match slave count {expected}")]
    ImageShape { expected: usize, got: usize },
    #[error(transparent)]
    Prs(#[from] PrsError),
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    /// Nothing left to do: all ports idle, queues empty, no registered writes.
    Quiescent { cycle: u64 },
    /// The cycle limit was reached with work still pending.
    CycleLimit { cycle: u64 },
}

/// Result retrieval report: successfully read words plus the addresses that
/// refused to read back (tainted granules surface here).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DumpReport {
    pub words: Vec<(u32, u32)>,
    pub unreadable: Vec<u32>,
}

/// A finished transfer, as the issuing master saw it, with the off-bus cause
/// attached for auditing. `stream_index` counts the master's requests in
/// issue order, which is how scripted expectations refer to them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Completion {
    pub master: MasterId,
    pub stream_index: usize,
    pub serial: u64,
    pub claimed: Option<MasterId>,
    pub slave: Option<SlaveId>,
    pub addr: u32,
    pub kind: AccessKind,
    pub wdata: Option<u32>,
    pub dpu_scoped: bool,
    pub address_phase_cycle: u64,
    pub data_phase_cycle: u64,
    pub response: BusResponse,
    pub cause: Option<Cause>,
}

/// A write that actually reached a memory array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommitRecord {
    pub cycle: u64,
    pub serial: u64,
    pub slave: SlaveId,
    pub offset: u32,
    pub word: u32,
}

#[derive(Debug, Clone)]
struct Scripted {
    stream_index: usize,
    serial: u64,
    at_cycle: u64,
    claimed: Option<MasterId>,
    addr: u32,
    kind: AccessKind,
    wdata: Option<u32>,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    stream_index: usize,
    serial: u64,
    claimed: Option<MasterId>,
    addr: u32,
    kind: AccessKind,
    wdata: Option<u32>,
    target: Option<(SlaveId, u32)>,
}

#[derive(Debug, Clone, Copy)]
enum GrantVerdict {
    Allow { dpu_scoped: bool },
    DenyApu { detail: ApuDenyDetail },
    Stray,
}

#[derive(Debug, Clone, Copy)]
struct InFlight {
    pending: Pending,
    granted_at: u64,
    verdict: GrantVerdict,
}

#[derive(Debug, Clone)]
enum PortState {
    Idle,
    Requesting(Pending),
    Address(InFlight),
    /// Write held in a slave's registration slot; the slot owns the data.
    Registered,
}

#[derive(Debug, Clone)]
struct Port {
    master: MasterId,
    privileged: bool,
    queue: VecDeque<Scripted>,
    issued: usize,
    state: PortState,
}

#[derive(Debug, Clone, Copy)]
struct SafSlot {
    port: usize,
    inflight: InFlight,
    verdict: DataVerdict,
    registered_at: u64,
}

#[derive(Debug)]
struct SlaveState {
    region: Region,
    mem: MemoryArray,
    transmon: Transmon,
    arbiter: RoundRobin,
    saf: Option<SafSlot>,
}

pub struct System {
    cfg: SystemConfig,
    cycle: u64,
    ports: Vec<Port>,
    port_of: Vec<Option<usize>>,
    slaves: Vec<SlaveState>,
    supervisor: Supervisor,
    trace: Vec<TraceLine>,
    events: Vec<SecurityEvent>,
    completions: Vec<Completion>,
    commits: Vec<CommitRecord>,
    pending_interrupts: Vec<InterruptRecord>,
    next_serial: u64,
}

impl System {
    pub fn new(cfg: SystemConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let n_ports = cfg.all_masters().len();
        let mut port_of = vec![None; 256];
        let ports: Vec<Port> = cfg
            .all_masters()
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                port_of[m.0 as usize] = Some(i);
                Port {
                    master: m,
                    privileged: cfg.is_privileged(m),
                    queue: VecDeque::new(),
                    issued: 0,
                    state: PortState::Idle,
                }
            })
            .collect();
        let slaves = cfg
            .memory_map
            .iter()
            .map(|r| SlaveState {
                region: r.clone(),
                mem: MemoryArray::new(r.size),
                transmon: Transmon::new(cfg.prs_capacity),
                arbiter: RoundRobin::new(n_ports),
                saf: None,
            })
            .collect();
        let supervisor = Supervisor::new(cfg.isolation_threshold);
        Ok(Self {
            cfg,
            cycle: 0,
            ports,
            port_of,
            slaves,
            supervisor,
            trace: Vec::new(),
            events: Vec::new(),
            completions: Vec::new(),
            commits: Vec::new(),
            pending_interrupts: Vec::new(),
            next_serial: 0,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn trace(&self) -> &[TraceLine] {
        &self.trace
    }

    pub fn events(&self) -> &[SecurityEvent] {
        &self.events
    }

    pub fn completions(&self) -> &[Completion] {
        &self.completions
    }

    pub fn commits(&self) -> &[CommitRecord] {
        &self.commits
    }

    pub fn supervisor(&self) -> &Supervisor {
        &self.supervisor
    }

    pub fn prs(&self, slave: SlaveId) -> &PolicyRegisterSpace {
        &self.slaves[slave.0 as usize].transmon.prs
    }

    /// Direct word read, bypassing the bus. Simulator introspection only.
    pub fn peek_word(&self, addr: u32) -> Option<u32> {
        let (s, off) = decode(&self.cfg.memory_map, addr)?;
        Some(self.slaves[s.0 as usize].mem.read_raw(off))
    }

    pub fn is_tainted_at(&self, addr: u32) -> Option<bool> {
        let (s, off) = decode(&self.cfg.memory_map, addr)?;
        Some(self.slaves[s.0 as usize].mem.is_tainted(off))
    }

    /// Flip one stored bit, as a radiation event would. Out-of-band.
    pub fn inject_fault(
        &mut self,
        addr: u32,
        target: FaultTarget,
        bit: u8,
    ) -> Result<(), SystemError> {
        let (s, off) = self.locate(addr)?;
        self.slaves[s.0 as usize].mem.inject_fault(off, target, bit);
        Ok(())
    }

    /// Privileged out-of-band clear: zero the words of `[start, end]` and
    /// drop taint on every granule the range touches.
    pub fn clear_region(&mut self, start: u32, end: u32) -> Result<(), SystemError> {
        let (s, s_off, e_off) = self.locate_range(start, end)?;
        self.slaves[s.0 as usize].mem.clear_range(s_off, e_off);
        Ok(())
    }

    fn locate(&self, addr: u32) -> Result<(SlaveId, u32), SystemError> {
        if !addr.is_multiple_of(4) {
            return Err(SystemError::Unaligned(addr));
        }
        decode(&self.cfg.memory_map, addr).ok_or(SystemError::Unmapped(addr))
    }

    fn locate_range(&self, start: u32, end: u32) -> Result<(SlaveId, u32, u32), SystemError> {
        let (s0, s_off) = self.locate(start)?;
        let (s1, e_off) = self.locate(end)?;
        if start > end || s0 != s1 {
            return Err(SystemError::BadRegion { start, end });
        }
        Ok((s0, s_off, e_off))
    }

    /// Append a request to a master's stream. `at_cycle` is the earliest
    /// cycle the port may present it. Returns the request's index within the
    /// master's stream.
    pub fn enqueue(
        &mut self,
        master: MasterId,
        at_cycle: u64,
        req: BusRequest,
    ) -> Result<usize, SystemError> {
        let pi = self.port_of[master.0 as usize].ok_or(SystemError::UnknownMaster(master))?;
        if (req.kind == AccessKind::Write) != req.wdata.is_some() {
            return Err(SystemError::MalformedRequest);
        }
        if !req.addr.is_multiple_of(4) {
            return Err(SystemError::Unaligned(req.addr));
        }
        let port = &mut self.ports[pi];
        let stream_index = port.issued;
        port.issued += 1;
        port.queue.push_back(Scripted {
            stream_index,
            serial: self.next_serial,
            at_cycle,
            claimed: req.claimed,
            addr: req.addr,
            kind: req.kind,
            wdata: req.wdata,
        });
        self.next_serial += 1;
        Ok(stream_index)
    }

    /// Atomically replace every monitor's policies. On any capacity
    /// violation, no monitor is touched.
    pub fn install_policies(&mut self, images: &[PrsImage]) -> Result<(), SystemError> {
        if images.len() != self.slaves.len() {
            return Err(SystemError::ImageShape {
                expected: self.slaves.len(),
                got: images.len(),
            });
        }
        let cap = self.cfg.prs_capacity;
        for im in images {
            if im.apu.len() > cap || im.dpu.len() > cap {
                return Err(SystemError::Prs(PrsError::CapacityExceeded { capacity: cap }));
            }
        }
        for (slave, im) in self.slaves.iter_mut().zip(images) {
            slave
                .transmon
                .prs
                .install(im.apu.clone(), im.dpu.clone())
                .expect("capacity was checked for every image");
        }
        self.trace
            .push(TraceLine::supervisor(self.cycle, "install", None));
        Ok(())
    }

    /// Drop every allow-list entry naming `m`, everywhere. Default deny then
    /// blocks all its traffic.
    pub fn isolate_master(&mut self, m: MasterId) -> Result<(), SystemError> {
        if self.cfg.is_privileged(m) {
            return Err(SystemError::PrivilegedIsolation(m));
        }
        self.supervisor.force_isolate(m);
        for slave in &mut self.slaves {
            slave.transmon.prs.remove_apu_for_master(m);
        }
        self.trace
            .push(TraceLine::supervisor(self.cycle, "isolate", Some(m)));
        Ok(())
    }

    pub fn quiescent(&self) -> bool {
        self.pending_interrupts.is_empty()
            && self.slaves.iter().all(|s| s.saf.is_none())
            && self
                .ports
                .iter()
                .all(|p| p.queue.is_empty() && matches!(p.state, PortState::Idle))
    }

    /// Step until nothing is pending or `cycle_limit` is reached.
    pub fn run_until(&mut self, cycle_limit: u64) -> RunOutcome {
        while !self.quiescent() {
            if self.cycle >= cycle_limit {
                return RunOutcome::CycleLimit { cycle: self.cycle };
            }
            self.step();
        }
        RunOutcome::Quiescent { cycle: self.cycle }
    }

    /// Advance exactly one clock cycle.
    pub fn step(&mut self) {
        let now = self.cycle;
        self.activate(now);
        self.release_registered(now);
        self.data_phases(now);
        self.address_phases(now);
        self.supervise(now);
        self.cycle = now + 1;
    }

    fn activate(&mut self, now: u64) {
        let map = &self.cfg.memory_map;
        for port in &mut self.ports {
            if !matches!(port.state, PortState::Idle) {
                continue;
            }
            let due = matches!(port.queue.front(), Some(s) if s.at_cycle <= now);
            if !due {
                continue;
            }
            let s = port.queue.pop_front().expect("front was checked");
            port.state = PortState::Requesting(Pending {
                stream_index: s.stream_index,
                serial: s.serial,
                claimed: s.claimed,
                addr: s.addr,
                kind: s.kind,
                wdata: s.wdata,
                target: decode(map, s.addr),
            });
        }
    }

    fn release_registered(&mut self, now: u64) {
        for si in 0..self.slaves.len() {
            let due = matches!(&self.slaves[si].saf, Some(s) if s.registered_at + 1 == now);
            if !due {
                continue;
            }
            let slot = self.slaves[si].saf.take().expect("due slot");
            let inf = slot.inflight;
            let p = inf.pending;
            let (slave, offset) = p.target.expect("registered writes have a slave");
            let wdata = p.wdata.expect("registered entries are writes");
            match slot.verdict {
                DataVerdict::DenyDpu => {
                    self.raise(SecurityEvent {
                        cycle: now,
                        master: self.ports[slot.port].master,
                        slave: Some(slave),
                        addr: p.addr,
                        kind: p.kind,
                        cause: Cause::DpuDeny,
                        wdata: Some(wdata),
                        detail: None,
                    });
                    self.finish(slot.port, &inf, now, Hresp::Error, None, Some(Cause::DpuDeny));
                }
                DataVerdict::Forward => {
                    // The memory-security check guards the release like any
                    // other write; registered writes are never privileged.
                    if self.slaves[si].mem.is_tainted(offset) {
                        self.raise(SecurityEvent {
                            cycle: now,
                            master: self.ports[slot.port].master,
                            slave: Some(slave),
                            addr: p.addr,
                            kind: p.kind,
                            cause: Cause::EccFault,
                            wdata: Some(wdata),
                            detail: None,
                        });
                        self.finish(
                            slot.port,
                            &inf,
                            now,
                            Hresp::Error,
                            None,
                            Some(Cause::EccFault),
                        );
                    } else {
                        self.commit(now, p.serial, si, offset, wdata);
                        self.finish(slot.port, &inf, now, Hresp::Okay, None, None);
                    }
                }
            }
        }
    }

    fn data_phases(&mut self, now: u64) {
        let mut per_slave: Vec<Option<usize>> = vec![None; self.slaves.len()];
        let mut strays: Vec<usize> = Vec::new();
        for (pi, port) in self.ports.iter().enumerate() {
            if let PortState::Address(inf) = &port.state {
                if inf.granted_at + 1 == now {
                    match inf.pending.target {
                        Some((s, _)) => per_slave[s.0 as usize] = Some(pi),
                        None => strays.push(pi),
                    }
                }
            }
        }

        for (si, slot) in per_slave.iter().enumerate().take(self.slaves.len()) {
            let Some(pi) = *slot else { continue };
            let PortState::Address(inf) =
                std::mem::replace(&mut self.ports[pi].state, PortState::Idle)
            else {
                unreachable!("collected above")
            };
            let p = inf.pending;
            let (slave, offset) = p.target.expect("per-slave entries decoded");
            let master = self.ports[pi].master;
            self.trace.push(TraceLine::data_phase(
                now,
                master,
                slave,
                p.addr,
                p.wdata,
            ));
            match inf.verdict {
                GrantVerdict::DenyApu { detail } => {
                    self.raise(SecurityEvent {
                        cycle: now,
                        master,
                        slave: Some(slave),
                        addr: p.addr,
                        kind: p.kind,
                        cause: Cause::ApuDeny,
                        wdata: p.wdata,
                        detail: Some(detail),
                    });
                    self.finish(pi, &inf, now, Hresp::Error, None, Some(Cause::ApuDeny));
                }
                GrantVerdict::Allow { dpu_scoped: true } => {
                    let wdata = p.wdata.expect("scoped entries are writes");
                    let verdict = self.slaves[si].transmon.on_data_phase(
                        master,
                        p.addr,
                        wdata,
                        self.cfg.match_mode,
                    );
                    self.slaves[si].saf = Some(SafSlot {
                        port: pi,
                        inflight: inf,
                        verdict,
                        registered_at: now,
                    });
                    self.ports[pi].state = PortState::Registered;
                }
                GrantVerdict::Allow { dpu_scoped: false } => {
                    self.plain_access(pi, &inf, si, slave, offset, now);
                }
                GrantVerdict::Stray => unreachable!("strays carry no slave"),
            }
        }

        for pi in strays {
            let PortState::Address(inf) =
                std::mem::replace(&mut self.ports[pi].state, PortState::Idle)
            else {
                unreachable!("collected above")
            };
            let p = inf.pending;
            self.raise(SecurityEvent {
                cycle: now,
                master: self.ports[pi].master,
                slave: None,
                addr: p.addr,
                kind: p.kind,
                cause: Cause::Stray,
                wdata: p.wdata,
                detail: None,
            });
            self.finish(pi, &inf, now, Hresp::Error, None, Some(Cause::Stray));
        }
    }

    /// Complete an approved, unregistered access at its data phase.
    fn plain_access(
        &mut self,
        pi: usize,
        inf: &InFlight,
        si: usize,
        slave: SlaveId,
        offset: u32,
        now: u64,
    ) {
        let p = inf.pending;
        let master = self.ports[pi].master;
        let privileged = self.ports[pi].privileged;

        // Tainted granules refuse reads from everyone (corrupt data must not
        // be consumed) and writes from non-privileged masters; the
        // supervisor's own writes pass so regions can be scrubbed.
        let taint_blocks = self.slaves[si].mem.is_tainted(offset)
            && !(privileged && p.kind == AccessKind::Write);
        if taint_blocks {
            self.raise(SecurityEvent {
                cycle: now,
                master,
                slave: Some(slave),
                addr: p.addr,
                kind: p.kind,
                cause: Cause::EccFault,
                wdata: p.wdata,
                detail: None,
            });
            self.finish(pi, inf, now, Hresp::Error, None, Some(Cause::EccFault));
            return;
        }

        match p.kind {
            AccessKind::Write => {
                let wdata = p.wdata.expect("writes carry wdata");
                self.commit(now, p.serial, si, offset, wdata);
                self.finish(pi, inf, now, Hresp::Okay, None, None);
            }
            AccessKind::Read => {
                let ecc_active =
                    self.cfg.ecc.enabled && self.slaves[si].region.kind == RegionKind::Memory;
                if !ecc_active {
                    let rdata = self.slaves[si].mem.read_raw(offset);
                    self.finish(pi, inf, now, Hresp::Okay, Some(rdata), None);
                    return;
                }
                match self.slaves[si].mem.check_word(offset, self.cfg.ecc.mode) {
                    WordCheck::Clean => {
                        let rdata = self.slaves[si].mem.read_raw(offset);
                        self.finish(pi, inf, now, Hresp::Okay, Some(rdata), None);
                    }
                    WordCheck::Corrected(rdata) => {
                        self.finish(pi, inf, now, Hresp::Okay, Some(rdata), None);
                    }
                    WordCheck::Fault => {
                        self.slaves[si].mem.taint_mark(offset);
                        self.raise(SecurityEvent {
                            cycle: now,
                            master,
                            slave: Some(slave),
                            addr: p.addr,
                            kind: p.kind,
                            cause: Cause::EccFault,
                            wdata: None,
                            detail: None,
                        });
                        self.finish(pi, inf, now, Hresp::Error, None, Some(Cause::EccFault));
                    }
                }
            }
        }
    }

    fn address_phases(&mut self, now: u64) {
        for si in 0..self.slaves.len() {
            let mut privileged = Vec::new();
            let mut normal = Vec::new();
            for (pi, port) in self.ports.iter().enumerate() {
                if let PortState::Requesting(p) = &port.state {
                    if p.target.map(|(s, _)| s.0 as usize) == Some(si) {
                        if port.privileged {
                            privileged.push(pi);
                        } else {
                            normal.push(pi);
                        }
                    }
                }
            }
            let class = if privileged.is_empty() {
                &normal
            } else {
                &privileged
            };
            let Some(pi) = self.slaves[si].arbiter.grant(class) else {
                continue;
            };
            let PortState::Requesting(p) =
                std::mem::replace(&mut self.ports[pi].state, PortState::Idle)
            else {
                unreachable!("candidates are requesting")
            };
            let master = self.ports[pi].master;
            let slave = SlaveId(si as u8);
            self.trace.push(TraceLine::grant(now, master, slave));
            self.trace.push(TraceLine::addr_phase(
                now,
                master,
                p.claimed,
                Some(slave),
                p.addr,
                p.kind,
            ));
            let verdict = match self.slaves[si].transmon.on_address_phase(
                master,
                p.addr,
                p.kind,
                self.ports[pi].privileged,
                self.cfg.match_mode,
            ) {
                AddressVerdict::Proceed { dpu_scoped } => GrantVerdict::Allow { dpu_scoped },
                AddressVerdict::DenyApu { detail } => GrantVerdict::DenyApu { detail },
            };
            self.ports[pi].state = PortState::Address(InFlight {
                pending: p,
                granted_at: now,
                verdict,
            });
        }

        // Unmapped addresses select no slave and contend with nobody: the
        // fabric itself answers them, at the same latency as a real slave.
        for pi in 0..self.ports.len() {
            let miss = matches!(&self.ports[pi].state, PortState::Requesting(p) if p.target.is_none());
            if !miss {
                continue;
            }
            let PortState::Requesting(p) =
                std::mem::replace(&mut self.ports[pi].state, PortState::Idle)
            else {
                unreachable!("checked above")
            };
            let master = self.ports[pi].master;
            self.trace.push(TraceLine::addr_phase(
                now, master, p.claimed, None, p.addr, p.kind,
            ));
            self.ports[pi].state = PortState::Address(InFlight {
                pending: p,
                granted_at: now,
                verdict: GrantVerdict::Stray,
            });
        }
    }

    fn supervise(&mut self, now: u64) {
        let recs = std::mem::take(&mut self.pending_interrupts);
        for rec in recs {
            let privileged = self.cfg.is_privileged(rec.event.master);
            if let Some(action) = self.supervisor.on_interrupt(&rec, privileged) {
                match action {
                    SupervisorAction::IsolateMaster(m) => {
                        for slave in &mut self.slaves {
                            slave.transmon.prs.remove_apu_for_master(m);
                        }
                        self.trace
                            .push(TraceLine::supervisor(now, "isolate", Some(m)));
                    }
                }
            }
        }
    }

    fn raise(&mut self, ev: SecurityEvent) {
        let rec = self.supervisor.record(ev);
        self.trace.push(TraceLine::security(&ev));
        self.trace
            .push(TraceLine::interrupt(ev.cycle, rec.seq, ev.master, ev.cause));
        self.events.push(ev);
        self.pending_interrupts.push(rec);
    }

    fn commit(&mut self, cycle: u64, serial: u64, si: usize, offset: u32, word: u32) {
        self.slaves[si].mem.write_word(offset, word);
        self.commits.push(CommitRecord {
            cycle,
            serial,
            slave: SlaveId(si as u8),
            offset,
            word,
        });
    }

    fn finish(
        &mut self,
        pi: usize,
        inf: &InFlight,
        now: u64,
        hresp: Hresp,
        rdata: Option<u32>,
        cause: Option<Cause>,
    ) {
        let p = inf.pending;
        let master = self.ports[pi].master;
        self.trace.push(TraceLine::resp(now, master, hresp, rdata));
        self.completions.push(Completion {
            master,
            stream_index: p.stream_index,
            serial: p.serial,
            claimed: p.claimed,
            slave: p.target.map(|(s, _)| s),
            addr: p.addr,
            kind: p.kind,
            wdata: p.wdata,
            dpu_scoped: matches!(inf.verdict, GrantVerdict::Allow { dpu_scoped: true }),
            address_phase_cycle: inf.granted_at,
            data_phase_cycle: inf.granted_at + 1,
            response: BusResponse {
                hresp,
                rdata,
                completion_cycle: now,
            },
            cause,
        });
        self.ports[pi].state = PortState::Idle;
    }

    /// Load an image through the external interface: one privileged bus
    /// write per word, in image order.
    pub fn load_image(
        &mut self,
        words: &[(u32, u32)],
        cycle_limit: u64,
    ) -> Result<RunOutcome, SystemError> {
        for &(addr, _) in words {
            self.locate(addr)?;
        }
        let si = self.cfg.si_id;
        for &(addr, word) in words {
            self.enqueue(
                si,
                0,
                BusRequest {
                    claimed: None,
                    addr,
                    kind: AccessKind::Write,
                    wdata: Some(word),
                },
            )?;
        }
        Ok(self.run_until(cycle_limit))
    }

    /// Retrieve results through the external interface: one privileged bus
    /// read per word. Words that refuse to read back (tainted granules) are
    /// reported as unreadable instead of aborting the dump.
    pub fn dump_regions(
        &mut self,
        regions: &[(u32, u32)],
        cycle_limit: u64,
    ) -> Result<DumpReport, SystemError> {
        let mut addrs = Vec::new();
        for &(start, end) in regions {
            self.locate_range(start, end)?;
            addrs.extend((start..=end).step_by(4));
        }
        let si = self.cfg.si_id;
        let mark = self.completions.len();
        for &addr in &addrs {
            self.enqueue(
                si,
                0,
                BusRequest {
                    claimed: None,
                    addr,
                    kind: AccessKind::Read,
                    wdata: None,
                },
            )?;
        }
        self.run_until(cycle_limit);
        let mut report = DumpReport {
            words: Vec::new(),
            unreadable: Vec::new(),
        };
        for c in &self.completions[mark..] {
            if c.master != si || c.kind != AccessKind::Read {
                continue;
            }
            match (c.response.hresp, c.response.rdata) {
                (Hresp::Okay, Some(word)) => report.words.push((c.addr, word)),
                _ => report.unreadable.push(c.addr),
            }
        }
        Ok(report)
    }

    /// End the application epoch: zero the epoch's regions through
    /// privileged bus writes, then clear their taint marks, then drop every
    /// policy — in that order, so no stale data survives into a window where
    /// no policy guards it. The violation ledger starts over.
    pub fn teardown_epoch(
        &mut self,
        regions: &[(u32, u32)],
        cycle_limit: u64,
    ) -> Result<RunOutcome, SystemError> {
        for &(start, end) in regions {
            self.locate_range(start, end)?;
        }
        let proc0 = self.cfg.proc0_id;
        for &(start, end) in regions {
            for addr in (start..=end).step_by(4) {
                self.enqueue(
                    proc0,
                    0,
                    BusRequest {
                        claimed: None,
                        addr,
                        kind: AccessKind::Write,
                        wdata: Some(0),
                    },
                )?;
            }
        }
        let outcome = self.run_until(cycle_limit);
        for &(start, end) in regions {
            let (s, s_off, e_off) = self.locate_range(start, end)?;
            self.slaves[s.0 as usize].mem.clear_taint_range(s_off, e_off);
        }
        for slave in &mut self.slaves {
            slave.transmon.prs.clear();
        }
        self.supervisor.reset_epoch();
        self.trace
            .push(TraceLine::supervisor(self.cycle, "teardown", None));
        Ok(outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mem::EccMode;
    use crate::policy::{ApuPolicy, DpuPolicy, Permission};
    use crate::trace::to_jsonl_string;

    const M1: MasterId = MasterId(0x1);
    const M2: MasterId = MasterId(0x2);
    const MEM0: u32 = 0x2000_0000;
    const MEM1: u32 = 0x4000_0000;

    fn small_cfg() -> SystemConfig {
        SystemConfig {
            chiplets: vec![2],
            memory_map: vec![
                Region {
                    name: "mem0".into(),
                    base: MEM0,
                    size: 0x1_0000,
                    kind: RegionKind::Memory,
                },
                Region {
                    name: "mem1".into(),
                    base: MEM1,
                    size: 0x1_0000,
                    kind: RegionKind::Memory,
                },
                Region {
                    name: "srs".into(),
                    base: 0x5000_0000,
                    size: 0x100,
                    kind: RegionKind::Srs,
                },
            ],
            ..SystemConfig::default()
        }
    }

    fn allow_all(master: MasterId, base: u32, size: u32) -> ApuPolicy {
        ApuPolicy {
            master,
            addr: base,
            mask: size - 1,
            perm: Permission::ReadWrite,
        }
    }

    fn sys_with(cfg: SystemConfig, apu: &[(usize, ApuPolicy)], dpu: &[(usize, DpuPolicy)]) -> System {
        let mut images = vec![PrsImage::default(); cfg.memory_map.len()];
        for &(si, p) in apu {
            images[si].apu.push(p);
        }
        for &(si, p) in dpu {
            images[si].dpu.push(p);
        }
        let mut sys = System::new(cfg).unwrap();
        sys.install_policies(&images).unwrap();
        sys
    }

    fn write(addr: u32, wdata: u32) -> BusRequest {
        BusRequest {
            claimed: None,
            addr,
            kind: AccessKind::Write,
            wdata: Some(wdata),
        }
    }

    fn read(addr: u32) -> BusRequest {
        BusRequest {
            claimed: None,
            addr,
            kind: AccessKind::Read,
            wdata: None,
        }
    }

    #[test]
    fn allowed_write_completes_one_cycle_after_grant() {
        let mut sys = sys_with(small_cfg(), &[(0, allow_all(M1, MEM0, 0x1_0000))], &[]);
        sys.enqueue(M1, 0, write(MEM0 + 0x10, 0xDEAD_0001)).unwrap();
        let outcome = sys.run_until(100);
        assert_eq!(outcome, RunOutcome::Quiescent { cycle: 2 });

        let c = &sys.completions()[0];
        assert_eq!(c.address_phase_cycle, 0);
        assert_eq!(c.data_phase_cycle, 1);
        assert_eq!(c.response.completion_cycle, 1);
        assert_eq!(c.response.hresp, Hresp::Okay);
        assert_eq!(c.cause, None);
        assert_eq!(sys.peek_word(MEM0 + 0x10), Some(0xDEAD_0001));
        assert_eq!(sys.commits().len(), 1);

        let kinds: Vec<_> = sys
            .trace()
            .iter()
            .map(|l| (l.cycle, l.kind))
            .collect();
        use crate::trace::EventKind::*;
        assert_eq!(
            kinds,
            vec![(0, Supervisor), (0, Grant), (0, AddrPhase), (1, DataPhase), (1, Resp)]
        );
    }

    #[test]
    fn back_to_back_requests_queue_until_completion() {
        let mut sys = sys_with(small_cfg(), &[(0, allow_all(M1, MEM0, 0x1_0000))], &[]);
        sys.enqueue(M1, 0, write(MEM0, 1)).unwrap();
        sys.enqueue(M1, 0, write(MEM0 + 4, 2)).unwrap();
        sys.run_until(100);
        let cycles: Vec<u64> = sys
            .completions()
            .iter()
            .map(|c| c.response.completion_cycle)
            .collect();
        assert_eq!(cycles, vec![1, 3]);
        assert_eq!(sys.completions()[1].stream_index, 1);
    }

    #[test]
    fn read_returns_last_written_value() {
        let mut sys = sys_with(small_cfg(), &[(0, allow_all(M1, MEM0, 0x1_0000))], &[]);
        sys.enqueue(M1, 0, write(MEM0 + 0x40, 0x1234_5678)).unwrap();
        sys.enqueue(M1, 0, read(MEM0 + 0x40)).unwrap();
        sys.run_until(100);
        assert_eq!(sys.completions()[1].response.rdata, Some(0x1234_5678));
    }

    #[test]
    fn same_slave_contention_is_round_robin() {
        let mut sys = sys_with(
            small_cfg(),
            &[
                (0, allow_all(M1, MEM0, 0x1_0000)),
                (0, allow_all(M2, MEM0, 0x1_0000)),
            ],
            &[],
        );
        sys.enqueue(M1, 0, write(MEM0, 0x11)).unwrap();
        sys.enqueue(M2, 0, write(MEM0 + 4, 0x22)).unwrap();
        sys.run_until(100);
        let order: Vec<(MasterId, u64)> = sys
            .completions()
            .iter()
            .map(|c| (c.master, c.response.completion_cycle))
            .collect();
        assert_eq!(order, vec![(M1, 1), (M2, 2)]);
    }

    #[test]
    fn different_slaves_proceed_in_parallel() {
        let mut sys = sys_with(
            small_cfg(),
            &[
                (0, allow_all(M1, MEM0, 0x1_0000)),
                (1, allow_all(M2, MEM1, 0x1_0000)),
            ],
            &[],
        );
        sys.enqueue(M1, 0, write(MEM0, 0x11)).unwrap();
        sys.enqueue(M2, 0, write(MEM1, 0x22)).unwrap();
        sys.run_until(100);
        assert!(sys
            .completions()
            .iter()
            .all(|c| c.response.completion_cycle == 1));
    }

    #[test]
    fn apu_deny_matches_allow_latency_and_leaves_memory() {
        let mut sys = sys_with(small_cfg(), &[(1, allow_all(M2, MEM1, 0x1_0000))], &[]);
        sys.enqueue(M2, 0, write(MEM0 + 0x20, 0xBAD)).unwrap();
        sys.enqueue(M2, 2, write(MEM1 + 0x20, 0x600D)).unwrap();
        sys.run_until(100);

        let denied = &sys.completions()[0];
        let allowed = &sys.completions()[1];
        assert_eq!(denied.response.hresp, Hresp::Error);
        assert_eq!(denied.cause, Some(Cause::ApuDeny));
        assert_eq!(
            denied.response.completion_cycle - denied.address_phase_cycle,
            allowed.response.completion_cycle - allowed.address_phase_cycle,
        );
        assert_eq!(sys.peek_word(MEM0 + 0x20), Some(0));
        assert_eq!(sys.supervisor().interrupts_delivered(), 1);
        assert_eq!(sys.events().len(), 1);
    }

    #[test]
    fn dpu_scope_costs_one_cycle_either_way() {
        let scope = DpuPolicy {
            master: M1,
            addr: MEM0,
            amask: 0xFFFF,
            data: 0x0BAD_BEEF,
            dmask: 0,
        };
        let mut sys = sys_with(
            small_cfg(),
            &[
                (0, allow_all(M1, MEM0, 0x1_0000)),
                (1, allow_all(M1, MEM1, 0x1_0000)),
            ],
            &[(0, scope)],
        );
        // Scoped, data mismatch: forwarded one cycle late.
        sys.enqueue(M1, 0, write(MEM0 + 8, 0x1111_1111)).unwrap();
        // Scoped, restricted data: denied at the same +1 latency.
        sys.enqueue(M1, 10, write(MEM0 + 12, 0x0BAD_BEEF)).unwrap();
        // Out of scope: normal latency.
        sys.enqueue(M1, 20, write(MEM1 + 8, 0x0BAD_BEEF)).unwrap();
        sys.run_until(100);

        let c = sys.completions();
        assert_eq!(c[0].response.hresp, Hresp::Okay);
        assert!(c[0].dpu_scoped);
        assert_eq!(c[0].response.completion_cycle - c[0].address_phase_cycle, 2);
        assert_eq!(sys.peek_word(MEM0 + 8), Some(0x1111_1111));

        assert_eq!(c[1].response.hresp, Hresp::Error);
        assert_eq!(c[1].cause, Some(Cause::DpuDeny));
        assert_eq!(c[1].response.completion_cycle - c[1].address_phase_cycle, 2);
        assert_eq!(sys.peek_word(MEM0 + 12), Some(0));

        assert_eq!(c[2].response.hresp, Hresp::Okay);
        assert!(!c[2].dpu_scoped);
        assert_eq!(c[2].response.completion_cycle - c[2].address_phase_cycle, 1);
        assert_eq!(sys.peek_word(MEM1 + 8), Some(0x0BAD_BEEF));
    }

    #[test]
    fn unmapped_address_is_a_stray_at_uniform_latency() {
        let mut sys = sys_with(small_cfg(), &[], &[]);
        sys.enqueue(M1, 0, read(0xF000_0000)).unwrap();
        sys.run_until(100);
        let c = &sys.completions()[0];
        assert_eq!(c.response.hresp, Hresp::Error);
        assert_eq!(c.cause, Some(Cause::Stray));
        assert_eq!(c.slave, None);
        assert_eq!(c.response.completion_cycle, 1);
    }

    #[test]
    fn claimed_id_never_reaches_the_bus() {
        let mut sys = sys_with(small_cfg(), &[(0, allow_all(M2, MEM0, 0x1_0000))], &[]);
        // Master 1 masquerades as master 2, which the policy would allow.
        sys.enqueue(
            M1,
            0,
            BusRequest {
                claimed: Some(M2),
                addr: MEM0,
                kind: AccessKind::Write,
                wdata: Some(0xEE),
            },
        )
        .unwrap();
        sys.run_until(100);
        let c = &sys.completions()[0];
        assert_eq!(c.master, M1);
        assert_eq!(c.claimed, Some(M2));
        assert_eq!(c.response.hresp, Hresp::Error);
        assert_eq!(c.cause, Some(Cause::ApuDeny));
        assert!(sys
            .trace()
            .iter()
            .any(|l| l.claimed == Some(M2) && l.master == Some(M1)));
    }

    #[test]
    fn privileged_masters_bypass_checks_silently() {
        let cfg = small_cfg();
        let (proc0, si) = (cfg.proc0_id, cfg.si_id);
        let mut sys = sys_with(cfg, &[], &[]);
        sys.enqueue(si, 0, write(MEM0 + 4, 0xAA)).unwrap();
        sys.enqueue(proc0, 0, write(MEM1 + 4, 0xBB)).unwrap();
        sys.run_until(100);
        assert!(sys
            .completions()
            .iter()
            .all(|c| c.response.hresp == Hresp::Okay));
        assert!(sys.events().is_empty());
        assert_eq!(sys.peek_word(MEM0 + 4), Some(0xAA));
    }

    #[test]
    fn privileged_precedes_cores_in_arbitration() {
        let cfg = small_cfg();
        let si = cfg.si_id;
        let mut sys = sys_with(cfg, &[(0, allow_all(M1, MEM0, 0x1_0000))], &[]);
        sys.enqueue(M1, 0, write(MEM0, 1)).unwrap();
        sys.enqueue(si, 0, write(MEM0 + 4, 2)).unwrap();
        sys.run_until(100);
        let order: Vec<(MasterId, u64)> = sys
            .completions()
            .iter()
            .map(|c| (c.master, c.response.completion_cycle))
            .collect();
        assert_eq!(order, vec![(si, 1), (M1, 2)]);
    }

    #[test]
    fn repeated_violations_isolate_the_master() {
        let cfg = small_cfg();
        assert_eq!(cfg.isolation_threshold, 3);
        let mut sys = sys_with(
            cfg,
            &[
                (1, allow_all(M2, MEM1, 0x1_0000)),
                (0, allow_all(M1, MEM0, 0x1_0000)),
            ],
            &[],
        );
        for i in 0..3 {
            sys.enqueue(M2, 0, write(MEM0 + 4 * i, 0xBAD)).unwrap();
        }
        // Previously allowed; must fail once isolation has landed.
        sys.enqueue(M2, 0, write(MEM1, 0x600D)).unwrap();
        sys.enqueue(M1, 20, write(MEM0, 0x1)).unwrap();
        sys.run_until(200);

        assert!(sys.supervisor().is_isolated(M2));
        let m2: Vec<_> = sys
            .completions()
            .iter()
            .filter(|c| c.master == M2)
            .collect();
        assert_eq!(m2.len(), 4);
        assert!(m2.iter().all(|c| c.response.hresp == Hresp::Error));
        assert_eq!(m2[3].cause, Some(Cause::ApuDeny));
        // The other master is untouched.
        let m1 = sys.completions().iter().find(|c| c.master == M1).unwrap();
        assert_eq!(m1.response.hresp, Hresp::Okay);
        assert!(sys
            .trace()
            .iter()
            .any(|l| l.action.as_deref() == Some("isolate") && l.master == Some(M2)));
        assert!(sys.prs(SlaveId(1)).apu_policies().is_empty());
        assert_eq!(sys.prs(SlaveId(0)).apu_policies().len(), 1);
    }

    #[test]
    fn double_fault_read_errors_and_taints_the_granule() {
        let mut cfg = small_cfg();
        cfg.ecc.enabled = true;
        let mut sys = sys_with(cfg, &[(0, allow_all(M1, MEM0, 0x1_0000))], &[]);
        sys.enqueue(M1, 0, write(MEM0 + 0x80, 0xCAFE_F00D)).unwrap();
        sys.run_until(100);
        sys.inject_fault(MEM0 + 0x80, FaultTarget::Data, 0).unwrap();
        sys.inject_fault(MEM0 + 0x80, FaultTarget::Data, 9).unwrap();

        sys.enqueue(M1, 0, read(MEM0 + 0x80)).unwrap();
        // Same granule, different word: blocked by taint.
        sys.enqueue(M1, 0, read(MEM0 + 0x84)).unwrap();
        // Neighboring granule: unaffected.
        sys.enqueue(M1, 0, read(MEM0 + 0xC0)).unwrap();
        sys.run_until(200);

        let c = sys.completions();
        assert_eq!(c[1].cause, Some(Cause::EccFault));
        assert_eq!(sys.is_tainted_at(MEM0 + 0x80), Some(true));
        assert_eq!(c[2].cause, Some(Cause::EccFault));
        assert_eq!(c[3].response.hresp, Hresp::Okay);

        // Taint outlives rewrites by non-privileged masters (blocked) but
        // admits privileged scrubbing.
        let si_id = sys.config().si_id;
        sys.enqueue(si_id, 0, write(MEM0 + 0x80, 0)).unwrap();
        sys.run_until(300);
        assert_eq!(sys.completions().last().unwrap().response.hresp, Hresp::Okay);
        assert_eq!(sys.is_tainted_at(MEM0 + 0x80), Some(true));

        sys.clear_region(MEM0 + 0x80, MEM0 + 0xBC).unwrap();
        assert_eq!(sys.is_tainted_at(MEM0 + 0x80), Some(false));
        sys.enqueue(M1, 0, read(MEM0 + 0x80)).unwrap();
        sys.run_until(400);
        let last = sys.completions().last().unwrap();
        assert_eq!(last.response.hresp, Hresp::Okay);
        assert_eq!(last.response.rdata, Some(0));
    }

    #[test]
    fn correct_mode_repairs_single_faults_transparently() {
        let mut cfg = small_cfg();
        cfg.ecc.enabled = true;
        cfg.ecc.mode = EccMode::CorrectSingle;
        let mut sys = sys_with(cfg, &[(0, allow_all(M1, MEM0, 0x1_0000))], &[]);
        sys.enqueue(M1, 0, write(MEM0, 0xA5A5_A5A5)).unwrap();
        sys.run_until(100);
        sys.inject_fault(MEM0, FaultTarget::Data, 13).unwrap();
        sys.enqueue(M1, 0, read(MEM0)).unwrap();
        sys.run_until(200);
        let c = sys.completions().last().unwrap();
        assert_eq!(c.response.hresp, Hresp::Okay);
        assert_eq!(c.response.rdata, Some(0xA5A5_A5A5));
        assert_eq!(sys.is_tainted_at(MEM0), Some(false));
    }

    #[test]
    fn load_image_then_dump_round_trips_with_taint_reported() {
        let mut cfg = small_cfg();
        cfg.ecc.enabled = true;
        let mut sys = sys_with(cfg, &[], &[]);
        let image = [(MEM0, 0x0BAD_BEEF), (MEM0 + 4, 0x0000_0002)];
        let outcome = sys.load_image(&image, 1000).unwrap();
        assert!(matches!(outcome, RunOutcome::Quiescent { .. }));
        assert_eq!(sys.peek_word(MEM0), Some(0x0BAD_BEEF));

        sys.inject_fault(MEM0 + 0x40, FaultTarget::Data, 1).unwrap();
        sys.inject_fault(MEM0 + 0x40, FaultTarget::Data, 2).unwrap();

        let report = sys.dump_regions(&[(MEM0, MEM0 + 0x7C)], 2000).unwrap();
        assert_eq!(report.words[0], (MEM0, 0x0BAD_BEEF));
        assert_eq!(report.words[1], (MEM0 + 4, 0x0000_0002));
        assert!(report.unreadable.contains(&(MEM0 + 0x40)));
        // The faulting dump read tainted the granule; its other words are
        // unreadable too.
        assert!(report.unreadable.contains(&(MEM0 + 0x44)));
        assert!(!report.unreadable.contains(&(MEM0 + 0x3C)));
    }

    #[test]
    fn teardown_scrubs_zeroes_and_drops_policies() {
        let mut sys = sys_with(
            small_cfg(),
            &[(0, allow_all(M2, MEM0, 0x1_0000))],
            &[],
        );
        sys.enqueue(M2, 0, write(MEM0 + 0x100, 0x5EC2_E700)).unwrap();
        sys.enqueue(M2, 0, write(MEM0 + 0x104, 0x5EC2_E701)).unwrap();
        // A violation, so the ledger has something to forget.
        sys.enqueue(M2, 0, write(MEM1, 0xBAD)).unwrap();
        sys.run_until(100);
        assert_eq!(sys.supervisor().blocked_count(M2), 1);

        sys.teardown_epoch(&[(MEM0 + 0x100, MEM0 + 0x13C)], 10_000).unwrap();
        assert_eq!(sys.peek_word(MEM0 + 0x100), Some(0));
        assert_eq!(sys.peek_word(MEM0 + 0x104), Some(0));
        assert!(sys.prs(SlaveId(0)).apu_policies().is_empty());
        assert_eq!(sys.supervisor().blocked_count(M2), 0);

        // Post-teardown, the region reads back zero through the privileged
        // path and default-deny blocks the old tenant.
        let report = sys.dump_regions(&[(MEM0 + 0x100, MEM0 + 0x13C)], 10_000).unwrap();
        assert!(report.unreadable.is_empty());
        assert!(report.words.iter().all(|&(_, w)| w == 0));
        sys.enqueue(M2, 0, read(MEM0 + 0x100)).unwrap();
        sys.run_until(20_000);
        assert_eq!(sys.completions().last().unwrap().cause, Some(Cause::ApuDeny));
    }

    #[test]
    fn oversized_install_is_rejected_without_partial_effects() {
        let mut sys = sys_with(small_cfg(), &[(0, allow_all(M1, MEM0, 0x1_0000))], &[]);
        let too_many = PrsImage {
            apu: vec![allow_all(M2, MEM1, 0x1_0000); 17],
            dpu: vec![],
        };
        let images = vec![PrsImage::default(), too_many, PrsImage::default()];
        let err = sys.install_policies(&images).unwrap_err();
        assert!(matches!(err, SystemError::Prs(_)));
        // The previous installation survives untouched.
        assert_eq!(sys.prs(SlaveId(0)).apu_policies().len(), 1);
        assert!(sys.prs(SlaveId(1)).apu_policies().is_empty());
    }

    #[test]
    fn isolating_privileged_masters_is_refused() {
        let cfg = small_cfg();
        let si = cfg.si_id;
        let mut sys = sys_with(cfg, &[], &[]);
        assert_eq!(
            sys.isolate_master(si),
            Err(SystemError::PrivilegedIsolation(si))
        );
        assert!(!sys.supervisor().is_isolated(si));
    }

    #[test]
    fn deferred_requests_wait_for_their_cycle() {
        let mut sys = sys_with(small_cfg(), &[(0, allow_all(M1, MEM0, 0x1_0000))], &[]);
        sys.enqueue(M1, 5, write(MEM0, 7)).unwrap();
        sys.run_until(100);
        let c = &sys.completions()[0];
        assert_eq!(c.address_phase_cycle, 5);
        assert_eq!(c.response.completion_cycle, 6);
    }

    #[test]
    fn identical_scripts_produce_identical_traces() {
        let build = || {
            let mut sys = sys_with(
                small_cfg(),
                &[
                    (0, allow_all(M1, MEM0, 0x1_0000)),
                    (1, allow_all(M2, MEM1, 0x1_0000)),
                ],
                &[],
            );
            sys.enqueue(M1, 0, write(MEM0, 0x10)).unwrap();
            sys.enqueue(M2, 0, write(MEM1, 0x20)).unwrap();
            sys.enqueue(M1, 3, read(MEM0)).unwrap();
            sys.enqueue(M2, 0, write(MEM0, 0x30)).unwrap();
            sys.run_until(1000);
            to_jsonl_string(sys.trace())
        };
        let a = build();
        let b = build();
        assert!(!a.is_empty());
        assert_eq!(a, b);
    }

    #[test]
    fn cycle_limit_stops_unfinished_runs() {
        let mut sys = sys_with(small_cfg(), &[(0, allow_all(M1, MEM0, 0x1_0000))], &[]);
        for i in 0..50 {
            sys.enqueue(M1, 0, write(MEM0 + 4 * i, i)).unwrap();
        }
        let outcome = sys.run_until(10);
        assert_eq!(outcome, RunOutcome::CycleLimit { cycle: 10 });
        assert!(sys.completions().len() < 50);
    }
}
