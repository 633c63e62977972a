//! Randomized traffic against randomly generated policy sets, audited by an
//! independent replay oracle.
//!
//! Work is cut into fixed-size chunks; chunk `c` derives its generator from
//! (seed, c) alone and runs a fresh system, so the merged report is
//! byte-identical for any worker count. Each chunk generates a valid policy
//! set, fires a batch of transactions (random masters, addresses, data,
//! claimed-identity fields), then re-derives every completion from the
//! installed policies and the issue log: verdict, cause, timing, identity,
//! commits, read data, and interrupt accounting. Any disagreement between
//! the engine and the oracle is a violation, reported with the chunk index
//! that reproduces it.

use crate::bus::{decode, BusRequest, Hresp};
use crate::config::SystemConfig;
use crate::policy::{
    apu_check, dpu_check, dpu_scoped, AccessKind, ApuPolicy, ApuVerdict, DpuPolicy, DpuVerdict,
    MasterId, Permission, PrsImage,
};
use crate::system::{Completion, RunOutcome, System};
use crate::trace::{to_jsonl_string, EventKind};
use crate::transmon::Cause;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

/// Transactions per chunk. Fixed so the chunk decomposition, and with it
/// the whole report, is independent of `jobs`.
pub const CHUNK_SIZE: u64 = 512;

const VIOLATIONS_KEPT_PER_CHUNK: usize = 8;
const VIOLATIONS_KEPT_TOTAL: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FuzzParams {
    pub seed: u64,
    pub n: u64,
    pub jobs: usize,
    /// Stamp a differing claimed-identity field on every transaction.
    pub force_spoof: bool,
}

impl Default for FuzzParams {
    fn default() -> Self {
        FuzzParams {
            seed: 1,
            n: 10_000,
            jobs: 1,
            force_spoof: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub transactions: u64,
    pub okay: u64,
    pub apu_denied: u64,
    pub dpu_denied: u64,
    pub strays: u64,
    pub scoped_writes: u64,
    pub spoof_attempts: u64,
    pub privileged: u64,
    pub isolations: u64,
    pub interrupts: u64,
}

impl Tally {
    fn add(&mut self, o: &Tally) {
        self.transactions += o.transactions;
        self.okay += o.okay;
        self.apu_denied += o.apu_denied;
        self.dpu_denied += o.dpu_denied;
        self.strays += o.strays;
        self.scoped_writes += o.scoped_writes;
        self.spoof_attempts += o.spoof_attempts;
        self.privileged += o.privileged;
        self.isolations += o.isolations;
        self.interrupts += o.interrupts;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub chunk: u64,
    pub serial: u64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuzzReport {
    pub seed: u64,
    pub n: u64,
    pub jobs: usize,
    pub chunks: u64,
    pub tally: Tally,
    /// First few violations, chunk order; `violation_total` counts them all.
    pub violations: Vec<Violation>,
    pub violation_total: u64,
}

impl FuzzReport {
    pub fn passed(&self) -> bool {
        self.violation_total == 0
    }

    pub fn render(&self) -> String {
        let t = &self.tally;
        let mut out = format!(
            "fuzz seed={} n={} chunks={}\n\
             transactions {} | okay {} | apu-denied {} | dpu-denied {} | strays {}\n\
             scoped-writes {} | spoof-attempts {} | privileged {} | isolations {} | interrupts {}\n",
            self.seed,
            self.n,
            self.chunks,
            t.transactions,
            t.okay,
            t.apu_denied,
            t.dpu_denied,
            t.strays,
            t.scoped_writes,
            t.spoof_attempts,
            t.privileged,
            t.isolations,
            t.interrupts,
        );
        if self.violation_total == 0 {
            out.push_str("violations: none\n");
        } else {
            out.push_str(&format!("violations: {}\n", self.violation_total));
            for v in &self.violations {
                out.push_str(&format!(
                    "  chunk {} serial {}: {}\n",
                    v.chunk, v.serial, v.detail
                ));
            }
            out.push_str(&format!(
                "reproduce a chunk with the same config, seed {} and its chunk index\n",
                self.seed
            ));
        }
        out
    }
}

struct Issued {
    master: MasterId,
    claim: Option<MasterId>,
    addr: u32,
    kind: AccessKind,
    wdata: Option<u32>,
}

struct ChunkOutcome {
    tally: Tally,
    violations: Vec<Violation>,
    violation_total: u64,
    trace: Option<String>,
}

/// Run all chunks on `jobs` workers (chunk i goes to worker i mod jobs) and
/// merge in chunk order, so the outcome does not depend on `jobs`.
fn fuzz_all(cfg: &SystemConfig, params: &FuzzParams, want_trace: bool) -> (FuzzReport, Option<String>) {
    let chunks = params.n.div_ceil(CHUNK_SIZE);
    let jobs = params.jobs.max(1);
    let mut outcomes: Vec<Option<ChunkOutcome>> = Vec::new();
    outcomes.resize_with(chunks as usize, || None);

    std::thread::scope(|scope| {
        let mut slots: Vec<&mut [Option<ChunkOutcome>]> = Vec::new();
        let mut rest = outcomes.as_mut_slice();
        for _ in 0..chunks {
            let (head, tail) = rest.split_at_mut(1);
            slots.push(head);
            rest = tail;
        }
        type WorkItem<'a> = (u64, &'a mut [Option<ChunkOutcome>]);
        let mut per_worker: Vec<Vec<WorkItem>> = (0..jobs).map(|_| Vec::new()).collect();
        for (i, slot) in slots.into_iter().enumerate() {
            per_worker[i % jobs].push((i as u64, slot));
        }
        for work in per_worker {
            scope.spawn(move || {
                for (c, slot) in work {
                    let count = CHUNK_SIZE.min(params.n - c * CHUNK_SIZE);
                    slot[0] = Some(run_chunk(cfg, params, c, count, want_trace));
                }
            });
        }
    });

    let mut tally = Tally::default();
    let mut violations = Vec::new();
    let mut violation_total = 0;
    let mut trace = want_trace.then(String::new);
    for (c, outcome) in outcomes.into_iter().enumerate() {
        let o = outcome.unwrap_or_else(|| panic!("chunk {c} never ran"));
        tally.add(&o.tally);
        violation_total += o.violation_total;
        for v in o.violations {
            if violations.len() < VIOLATIONS_KEPT_TOTAL {
                violations.push(v);
            }
        }
        if let (Some(all), Some(t)) = (trace.as_mut(), o.trace) {
            all.push_str(&t);
        }
    }

    (
        FuzzReport {
            seed: params.seed,
            n: params.n,
            jobs,
            chunks,
            tally,
            violations,
            violation_total,
        },
        trace,
    )
}

pub fn fuzz(cfg: &SystemConfig, params: &FuzzParams) -> FuzzReport {
    fuzz_all(cfg, params, false).0
}

/// Like [`fuzz`], also returning the concatenated per-chunk JSONL traces in
/// chunk order. Byte-identical for identical (config, params.seed, params.n).
pub fn fuzz_with_trace(cfg: &SystemConfig, params: &FuzzParams) -> (FuzzReport, String) {
    let (report, trace) = fuzz_all(cfg, params, true);
    (report, trace.expect("trace was requested"))
}

fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk + 1);
    rng
}

fn gen_policies(rng: &mut ChaCha8Rng, cfg: &SystemConfig) -> Vec<PrsImage> {
    let pool: Vec<MasterId> = cfg.core_ids().take(8).collect();
    let cap = cfg.prs_capacity.min(12);
    let mut images = Vec::new();
    for region in &cfg.memory_map {
        let span = region.size - 1;
        let bits = span.count_ones();
        let mut im = PrsImage::default();
        for _ in 0..rng.gen_range(0..=cap) {
            let mask = if rng.gen_bool(0.3) {
                rng.gen::<u32>() & span
            } else {
                let k = rng.gen_range(2..=bits.min(12));
                (1u32 << k) - 1
            };
            im.apu.push(ApuPolicy {
                master: pool[rng.gen_range(0..pool.len())],
                addr: region.base | (rng.gen::<u32>() & span & !mask),
                mask,
                perm: match rng.gen_range(0..3) {
                    0 => Permission::ReadOnly,
                    1 => Permission::WriteOnly,
                    _ => Permission::ReadWrite,
                },
            });
        }
        for _ in 0..rng.gen_range(0..=4.min(cap)) {
            let amask = if rng.gen_bool(0.5) {
                let k = rng.gen_range(2..=bits.min(12));
                (1u32 << k) - 1
            } else {
                rng.gen::<u32>() & span
            };
            let data = match rng.gen_range(0..3) {
                0 => 0x0BAD_BEEF,
                1 => 0x0000_0000,
                _ => rng.gen(),
            };
            let dmask = match rng.gen_range(0..4) {
                0 => 0x0000_0000,
                1 => 0xFFFF_FFFE,
                2 => 0xFFFF_0000,
                _ => rng.gen(),
            };
            im.dpu.push(DpuPolicy {
                master: pool[rng.gen_range(0..pool.len())],
                addr: region.base | (rng.gen::<u32>() & span & !amask),
                amask,
                data,
                dmask,
            });
        }
        images.push(im);
    }
    images
}

fn gen_addr(rng: &mut ChaCha8Rng, cfg: &SystemConfig, images: &[PrsImage]) -> u32 {
    let pick_region = |rng: &mut ChaCha8Rng| {
        let r = &cfg.memory_map[rng.gen_range(0..cfg.memory_map.len())];
        r.base | (rng.gen::<u32>() & (r.size - 1))
    };
    let addr = match rng.gen_range(0..100) {
        // A member of some allow-list entry's masked set: high hit rate.
        0..=44 => {
            let s = rng.gen_range(0..images.len());
            if let Some(p) = pick(rng, &images[s].apu) {
                (p.addr & !p.mask) | (rng.gen::<u32>() & p.mask)
            } else {
                pick_region(rng)
            }
        }
        // Inside some deny-list scope, to exercise registration.
        45..=59 => {
            let s = rng.gen_range(0..images.len());
            if let Some(p) = pick(rng, &images[s].dpu) {
                (p.addr & !p.amask) | (rng.gen::<u32>() & p.amask)
            } else {
                pick_region(rng)
            }
        }
        60..=84 => pick_region(rng),
        // Unmapped, if one can be found quickly.
        _ => {
            let mut a = rng.gen::<u32>();
            for _ in 0..8 {
                if decode(&cfg.memory_map, a & !3).is_none() {
                    break;
                }
                a = rng.gen();
            }
            a
        }
    };
    addr & !3
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, xs: &'a [T]) -> Option<&'a T> {
    if xs.is_empty() {
        None
    } else {
        Some(&xs[rng.gen_range(0..xs.len())])
    }
}

fn gen_wdata(rng: &mut ChaCha8Rng, images: &[PrsImage]) -> u32 {
    match rng.gen_range(0..100) {
        // Exactly a deny-list pattern, to trigger data denials.
        0..=29 => {
            let s = rng.gen_range(0..images.len());
            match pick(rng, &images[s].dpu) {
                Some(p) => p.data,
                None => rng.gen(),
            }
        }
        // A near miss.
        30..=39 => {
            let s = rng.gen_range(0..images.len());
            match pick(rng, &images[s].dpu) {
                Some(p) => p.data ^ 1,
                None => rng.gen(),
            }
        }
        _ => rng.gen(),
    }
}

fn run_chunk(
    cfg: &SystemConfig,
    params: &FuzzParams,
    chunk: u64,
    count: u64,
    want_trace: bool,
) -> ChunkOutcome {
    let mut rng = chunk_rng(params.seed, chunk);
    let images = gen_policies(&mut rng, cfg);

    let mut sys = System::new(cfg.clone()).expect("fuzz configs are pre-validated");
    sys.install_policies(&images)
        .expect("generation respects capacity");

    let pool: Vec<MasterId> = cfg.core_ids().take(8).collect();
    let mut issued = Vec::new();
    let mut tally = Tally::default();
    for _ in 0..count {
        let master = match rng.gen_range(0..100) {
            0..=89 => pool[rng.gen_range(0..pool.len())],
            90..=94 => cfg.si_id,
            _ => cfg.proc0_id,
        };
        let kind = if rng.gen_bool(0.5) {
            AccessKind::Read
        } else {
            AccessKind::Write
        };
        let addr = gen_addr(&mut rng, cfg, &images);
        let wdata = (kind == AccessKind::Write).then(|| gen_wdata(&mut rng, &images));
        let claim = if params.force_spoof || rng.gen_bool(0.25) {
            let mut c = MasterId(rng.gen());
            while params.force_spoof && c == master {
                c = MasterId(rng.gen());
            }
            Some(c)
        } else {
            None
        };

        tally.transactions += 1;
        if cfg.is_privileged(master) {
            tally.privileged += 1;
        }
        if claim.is_some_and(|c| c != master) {
            tally.spoof_attempts += 1;
        }

        sys.enqueue(
            master,
            0,
            BusRequest {
                claimed: claim,
                addr,
                kind,
                wdata,
            },
        )
        .expect("generated requests are well-formed");
        issued.push(Issued {
            master,
            claim,
            addr,
            kind,
            wdata,
        });
    }

    let outcome = sys.run_until(16 * count + 512);

    let mut violations = Vec::new();
    let mut total = 0u64;
    let mut violate = |serial: u64, detail: String| {
        total += 1;
        if violations.len() < VIOLATIONS_KEPT_PER_CHUNK {
            violations.push(Violation {
                chunk,
                serial,
                detail,
            });
        }
    };

    if outcome != (RunOutcome::Quiescent { cycle: sys.cycle() }) {
        violate(u64::MAX, format!("run did not quiesce: {outcome:?}"));
    }
    audit(cfg, &images, &issued, &sys, &mut tally, &mut violate);

    ChunkOutcome {
        tally,
        violations,
        violation_total: total,
        trace: want_trace.then(|| to_jsonl_string(sys.trace())),
    }
}

/// The oracle's mutable view of the allow lists: isolation removes a
/// master's entries effective the cycle after its threshold denial
/// completes, mirroring the supervisor acting at the cycle boundary.
struct OracleState {
    apu: Vec<Vec<ApuPolicy>>,
    blocked: BTreeMap<u8, u64>,
    scheduled: BTreeSet<u8>,
    pending: BTreeMap<u64, Vec<u8>>,
    isolations: u64,
}

impl OracleState {
    fn advance_to(&mut self, cycle: u64) {
        let due: Vec<u64> = self.pending.range(..=cycle).map(|(&c, _)| c).collect();
        for c in due {
            for m in self.pending.remove(&c).unwrap() {
                for list in &mut self.apu {
                    list.retain(|p| p.master.0 != m);
                }
                self.isolations += 1;
            }
        }
    }

    fn on_blocked(&mut self, master: MasterId, completion: u64, threshold: u64) {
        let n = self.blocked.entry(master.0).or_insert(0);
        *n += 1;
        if *n >= threshold && self.scheduled.insert(master.0) {
            self.pending.entry(completion + 1).or_default().push(master.0);
        }
    }
}

fn audit(
    cfg: &SystemConfig,
    images: &[PrsImage],
    issued: &[Issued],
    sys: &System,
    tally: &mut Tally,
    violate: &mut impl FnMut(u64, String),
) {
    let mode = cfg.match_mode;
    let threshold = u64::from(cfg.isolation_threshold);

    let mut completions: Vec<&Completion> = sys.completions().iter().collect();
    completions.sort_by_key(|c| (c.address_phase_cycle, c.serial));
    if completions.len() != issued.len() {
        violate(
            u64::MAX,
            format!(
                "{} transactions issued but {} completed",
                issued.len(),
                completions.len()
            ),
        );
    }

    // Address-phase trace lines indexed by (cycle, master) for the identity
    // audit; at most one grant per master per cycle.
    let mut addr_lines = BTreeMap::new();
    for l in sys.trace() {
        if l.kind == EventKind::AddrPhase {
            addr_lines.insert((l.cycle, l.master), l);
        }
    }

    let mut oracle = OracleState {
        apu: images.iter().map(|im| im.apu.clone()).collect(),
        blocked: BTreeMap::new(),
        scheduled: BTreeSet::new(),
        pending: BTreeMap::new(),
        isolations: 0,
    };

    for c in &completions {
        let Some(iss) = issued.get(c.serial as usize) else {
            violate(c.serial, "completion for a never-issued serial".into());
            continue;
        };

        // Identity: the port's hard-coded ID, not the claimed one, must be
        // stamped on the completion and on the bus.
        if c.master != iss.master || c.claimed != iss.claim {
            violate(
                c.serial,
                format!(
                    "identity mismatch: completed as ({:?}, claimed {:?}), issued as ({:?}, claimed {:?})",
                    c.master, c.claimed, iss.master, iss.claim
                ),
            );
        }
        if (c.addr, c.kind, c.wdata) != (iss.addr, iss.kind, iss.wdata) {
            violate(c.serial, "request fields were altered in flight".into());
        }
        match addr_lines.get(&(c.address_phase_cycle, Some(c.master))) {
            Some(l) => {
                let spoofing = iss.claim.is_some_and(|cl| cl != iss.master);
                if spoofing && l.claimed != iss.claim {
                    violate(
                        c.serial,
                        "claimed identity missing from the address-phase record".into(),
                    );
                }
            }
            None => violate(c.serial, "no address-phase record at the grant cycle".into()),
        }

        // Verdict and timing against the oracle.
        let g = c.address_phase_cycle;
        oracle.advance_to(g);
        let (hresp, cause, scoped) = if cfg.is_privileged(iss.master) {
            if decode(&cfg.memory_map, iss.addr).is_none() {
                (Hresp::Error, Some(Cause::Stray), false)
            } else {
                (Hresp::Okay, None, false)
            }
        } else {
            match decode(&cfg.memory_map, iss.addr) {
                None => (Hresp::Error, Some(Cause::Stray), false),
                Some((slave, _)) => {
                    let s = slave.0 as usize;
                    if apu_check(&oracle.apu[s], iss.master, iss.addr, iss.kind, mode)
                        == ApuVerdict::Deny
                    {
                        (Hresp::Error, Some(Cause::ApuDeny), false)
                    } else {
                        let scoped = iss.kind == AccessKind::Write
                            && dpu_scoped(&images[s].dpu, iss.master, iss.addr, mode);
                        if scoped
                            && dpu_check(
                                &images[s].dpu,
                                iss.master,
                                iss.addr,
                                iss.wdata.unwrap_or(0),
                                mode,
                            ) == DpuVerdict::Deny
                        {
                            (Hresp::Error, Some(Cause::DpuDeny), true)
                        } else {
                            (Hresp::Okay, None, scoped)
                        }
                    }
                }
            }
        };
        let completion = g + 1 + u64::from(scoped);

        if (c.response.hresp, c.cause) != (hresp, cause) {
            violate(
                c.serial,
                format!(
                    "verdict mismatch: engine {:?}/{:?}, oracle {hresp:?}/{cause:?}",
                    c.response.hresp, c.cause
                ),
            );
        }
        if c.dpu_scoped != scoped {
            violate(
                c.serial,
                format!("scoping mismatch: engine {}, oracle {scoped}", c.dpu_scoped),
            );
        }
        if c.data_phase_cycle != g + 1 || c.response.completion_cycle != completion {
            violate(
                c.serial,
                format!(
                    "latency mismatch: data at +{}, completed at +{}, oracle expected +1/+{}",
                    c.data_phase_cycle - g,
                    c.response.completion_cycle - g,
                    completion - g
                ),
            );
        }

        if hresp == Hresp::Error && !cfg.is_privileged(iss.master) {
            oracle.on_blocked(iss.master, completion, threshold);
        }
        match cause {
            Some(Cause::ApuDeny) => tally.apu_denied += 1,
            Some(Cause::DpuDeny) => tally.dpu_denied += 1,
            Some(Cause::Stray) => tally.strays += 1,
            Some(Cause::EccFault) => {}
            None => tally.okay += 1,
        }
        if scoped {
            tally.scoped_writes += 1;
        }
    }
    oracle.advance_to(u64::MAX);
    tally.isolations = oracle.isolations;

    audit_data_plane(cfg, sys, issued, violate);
    audit_interrupts(sys, tally, violate);
}

/// Replay the commit log into a shadow memory: blocked writes must have
/// left no trace, successful reads must return the shadow's value, and the
/// final memory must equal the shadow.
fn audit_data_plane(
    cfg: &SystemConfig,
    sys: &System,
    issued: &[Issued],
    violate: &mut impl FnMut(u64, String),
) {
    let mut committed: BTreeMap<u64, u64> = BTreeMap::new();
    // Per word: (commit cycle, value) in log order; log order follows the
    // in-cycle pass order, so "last with cycle <= t" is the visible value.
    let mut history: BTreeMap<(u8, u32), Vec<(u64, u32)>> = BTreeMap::new();
    for cm in sys.commits() {
        *committed.entry(cm.serial).or_insert(0) += 1;
        history
            .entry((cm.slave.0, cm.offset))
            .or_default()
            .push((cm.cycle, cm.word));
    }

    for c in sys.completions() {
        let iss = &issued[c.serial as usize];
        let commits = committed.get(&c.serial).copied().unwrap_or(0);
        match (iss.kind, c.response.hresp) {
            (AccessKind::Write, Hresp::Okay) => {
                if commits != 1 {
                    violate(
                        c.serial,
                        format!("approved write committed {commits} times"),
                    );
                }
            }
            _ => {
                if commits != 0 {
                    violate(
                        c.serial,
                        format!("blocked or read transaction committed {commits} times"),
                    );
                }
            }
        }
        if iss.kind == AccessKind::Read && c.response.hresp == Hresp::Okay {
            let Some((slave, off)) = decode(&cfg.memory_map, iss.addr) else {
                violate(c.serial, "approved read of an unmapped address".into());
                continue;
            };
            let t = c.data_phase_cycle;
            let want = history
                .get(&(slave.0, off))
                .map(|h| {
                    let i = h.partition_point(|&(cy, _)| cy <= t);
                    if i == 0 {
                        0
                    } else {
                        h[i - 1].1
                    }
                })
                .unwrap_or(0);
            if c.response.rdata != Some(want) {
                violate(
                    c.serial,
                    format!(
                        "read returned {:?}, shadow holds {want:#010x}",
                        c.response.rdata
                    ),
                );
            }
        }
    }

    for (&(slave, off), h) in &history {
        let region = &cfg.memory_map[slave as usize];
        let addr = region.base + off;
        let shadow = h.last().map(|&(_, w)| w).unwrap_or(0);
        if sys.peek_word(addr) != Some(shadow) {
            violate(
                u64::MAX,
                format!(
                    "final memory at {addr:#010x} is {:?}, shadow holds {shadow:#010x}",
                    sys.peek_word(addr)
                ),
            );
        }
    }
}

/// Every security event must produce exactly one interrupt, gaplessly
/// sequenced, and nothing else may.
fn audit_interrupts(sys: &System, tally: &mut Tally, violate: &mut impl FnMut(u64, String)) {
    let mut security = 0u64;
    let mut seqs = Vec::new();
    for l in sys.trace() {
        match l.kind {
            EventKind::Security => security += 1,
            EventKind::Interrupt => seqs.push(l.seq.unwrap_or(u64::MAX)),
            _ => {}
        }
    }
    let events = sys.events().len() as u64;
    let delivered = sys.supervisor().interrupts_delivered();
    if security != events || seqs.len() as u64 != events || delivered != events {
        violate(
            u64::MAX,
            format!(
                "interrupt conservation broken: {security} security lines, {} interrupt lines, {events} events, {delivered} delivered",
                seqs.len()
            ),
        );
    }
    for (i, &s) in seqs.iter().enumerate() {
        if s != i as u64 {
            violate(u64::MAX, format!("interrupt sequence gap at {i}: got {s}"));
            break;
        }
    }
    let blocked: u64 = sys
        .completions()
        .iter()
        .filter(|c| c.response.hresp == Hresp::Error)
        .count() as u64;
    if blocked != events {
        violate(
            u64::MAX,
            format!("{blocked} blocked transactions but {events} security events"),
        );
    }
    tally.interrupts = events;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::MatchMode;

    fn quick(n: u64, force_spoof: bool) -> FuzzParams {
        FuzzParams {
            seed: 7,
            n,
            jobs: 1,
            force_spoof,
        }
    }

    #[test]
    fn small_run_has_no_violations() {
        let report = fuzz(&SystemConfig::default(), &quick(600, false));
        assert_eq!(report.violation_total, 0, "{}", report.render());
        assert_eq!(report.tally.transactions, 600);
        assert_eq!(report.chunks, 2);
        // The mix actually exercises every path.
        assert!(report.tally.okay > 0);
        assert!(report.tally.apu_denied > 0);
        assert!(report.tally.strays > 0);
    }

    #[test]
    fn identical_seeds_merge_identically_across_job_counts() {
        let cfg = SystemConfig::default();
        let one = fuzz(&cfg, &quick(1100, false));
        let four = fuzz(
            &cfg,
            &FuzzParams {
                jobs: 4,
                ..quick(1100, false)
            },
        );
        assert_eq!(one.tally, four.tally);
        assert_eq!(one.violations, four.violations);
        let (ra, ta) = fuzz_with_trace(&cfg, &quick(1100, false));
        let (rb, tb) = fuzz_with_trace(
            &cfg,
            &FuzzParams {
                jobs: 3,
                ..quick(1100, false)
            },
        );
        assert_eq!(ra.tally, rb.tally);
        assert_eq!(ta, tb);
        assert!(!ta.is_empty());
    }

    #[test]
    fn different_seeds_differ() {
        let cfg = SystemConfig::default();
        let a = fuzz(&cfg, &quick(600, false));
        let b = fuzz(
            &cfg,
            &FuzzParams {
                seed: 8,
                ..quick(600, false)
            },
        );
        assert_ne!(a.tally, b.tally);
    }

    #[test]
    fn forced_spoofing_marks_every_transaction_and_changes_nothing() {
        let report = fuzz(&SystemConfig::default(), &quick(600, true));
        assert_eq!(report.violation_total, 0, "{}", report.render());
        assert_eq!(report.tally.spoof_attempts, 600);
    }

    #[test]
    fn both_match_modes_fuzz_clean() {
        let cfg = SystemConfig {
            match_mode: MatchMode::RangeInterval,
            ..SystemConfig::default()
        };
        let report = fuzz(&cfg, &quick(600, false));
        assert_eq!(report.violation_total, 0, "{}", report.render());
    }

    #[test]
    fn isolation_happens_under_fuzz_and_is_predicted() {
        // Low threshold makes isolation near-certain within a chunk.
        let cfg = SystemConfig {
            isolation_threshold: 2,
            ..SystemConfig::default()
        };
        let report = fuzz(&cfg, &quick(600, false));
        assert_eq!(report.violation_total, 0, "{}", report.render());
        assert!(report.tally.isolations > 0);
    }
}
