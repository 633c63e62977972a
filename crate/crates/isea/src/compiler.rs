//! From human-written policy files to per-slave register images.
//!
//! A source file is JSON with an `apu` list and a `dpu` list. Each entry
//! names its master and its address scope either directly (`addr` plus an
//! optional `mask`) or as an inclusive `range` that is converted to a pair.
//! The compiler validates everything against a system configuration,
//! partitions the entries by target slave, and refuses to emit images while
//! any error-level diagnostic stands.
//!
//! Conversion fidelity matters because a pair means different sets under the
//! two match interpretations: an interval maps onto a single pair exactly
//! when its size is a power of two and its start is aligned to it. Pairs
//! that reproduce the interval's endpoints but not its interior are still
//! emitted, with a warning, since which set they match depends on the
//! configured mode.

use crate::config::SystemConfig;
use crate::hexnum::HexWord;
use crate::policy::{apu_range, ApuPolicy, DpuPolicy, MasterId, MatchMode, Permission, PrsImage};
use serde::{Deserialize, Serialize};

/// A successfully converted range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RangePair {
    pub addr: u32,
    pub mask: u32,
    /// True when the pair matches a different set under masked equality
    /// than as an interval, so its meaning depends on the configured mode.
    pub mode_sensitive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum RangeError {
    #[error("range start {start:#010x} exceeds end {end:#010x}")]
    Reversed { start: u32, end: u32 },
    #[error(
        "[{start:#010x}, {end:#010x}] has no exact pair; nearest cover is \
         (addr={:#010x}, mask={:#010x}), {over_coverage} extra address(es)",
        suggested.0, suggested.1
    )]
    NotExactlyRepresentable {
        start: u32,
        end: u32,
        suggested: (u32, u32),
        over_coverage: u64,
    },
}

/// Invert `apu_range`: find the pair whose endpoints are `start` and `end`.
///
/// The pair exists exactly when `start` has no bits inside `start ^ end`;
/// it is mode-insensitive exactly when `start ^ end` is a contiguous
/// low-bit run. Otherwise the minimal aligned power-of-two block covering
/// the interval is suggested, with the number of addresses it over-covers.
pub fn range_to_addr_mask(start: u32, end: u32) -> Result<RangePair, RangeError> {
    if start > end {
        return Err(RangeError::Reversed { start, end });
    }
    let diff = start ^ end;
    if start & diff == 0 {
        return Ok(RangePair {
            addr: start,
            mask: diff,
            mode_sensitive: diff & diff.wrapping_add(1) != 0,
        });
    }
    let top = 31 - diff.leading_zeros();
    let mask = u32::MAX >> (31 - top);
    let base = start & !mask;
    let block = u64::from(mask) + 1;
    let interval = u64::from(end - start) + 1;
    Err(RangeError::NotExactlyRepresentable {
        start,
        end,
        suggested: (base, mask),
        over_coverage: block - interval,
    })
}

/// One allow-list source entry. Scope is `addr` (+ optional `mask`,
/// default 0: a single word) or `range: [start, end]`, never both.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApuEntry {
    pub master: MasterId,
    #[serde(
        default,
        with = "crate::hexnum::hex32_opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub addr: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<(HexWord, HexWord)>,
    #[serde(
        default,
        with = "crate::hexnum::hex32_opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub mask: Option<u32>,
    pub perm: Permission,
}

/// One deny-list source entry; address scope as in [`ApuEntry`] with
/// `amask` in place of `mask`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpuEntry {
    pub master: MasterId,
    #[serde(
        default,
        with = "crate::hexnum::hex32_opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub addr: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<(HexWord, HexWord)>,
    #[serde(
        default,
        with = "crate::hexnum::hex32_opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub amask: Option<u32>,
    #[serde(with = "crate::hexnum::hex32")]
    pub data: u32,
    #[serde(with = "crate::hexnum::hex32")]
    pub dmask: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySource {
    #[serde(default)]
    pub apu: Vec<ApuEntry>,
    #[serde(default)]
    pub dpu: Vec<DpuEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    /// Which part of the source: "apu[3]", "dpu[0]", or "slave[2].apu" for
    /// aggregate capacity findings.
    pub entry: String,
    pub message: String,
}

impl Diagnostic {
    fn error(entry: String, message: String) -> Self {
        Diagnostic {
            severity: Severity::Error,
            entry,
            message,
        }
    }

    fn warning(entry: String, message: String) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            entry,
            message,
        }
    }
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

/// One "severity entry: message" line per diagnostic, in order.
pub fn render_diagnostics(diags: &[Diagnostic]) -> String {
    let mut out = String::new();
    for d in diags {
        let sev = match d.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        out.push_str(&format!("{sev} {}: {}\n", d.entry, d.message));
    }
    out
}

/// Compiled per-slave images plus the warnings that did not block them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Compiled {
    pub images: Vec<PrsImage>,
    pub warnings: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("policy source blocked by {} error(s)", crate::compiler::count_errors(&.0))]
pub struct CompileError(pub Vec<Diagnostic>);

fn count_errors(diags: &[Diagnostic]) -> usize {
    diags.iter().filter(|d| d.severity == Severity::Error).count()
}

struct Analysis {
    diagnostics: Vec<Diagnostic>,
    /// Per-slave images in map order, built from the resolvable entries in
    /// file order (allow list first, then deny list).
    images: Vec<PrsImage>,
}

/// Resolve one entry's scope to an (addr, mask) pair, or explain why not.
fn resolve_scope(
    label: &str,
    addr: Option<u32>,
    range: Option<(HexWord, HexWord)>,
    mask: Option<u32>,
    mask_name: &str,
    diags: &mut Vec<Diagnostic>,
) -> Option<(u32, u32)> {
    match (addr, range) {
        (Some(a), None) => Some((a, mask.unwrap_or(0))),
        (None, Some((HexWord(start), HexWord(end)))) => {
            if mask.is_some() {
                diags.push(Diagnostic::error(
                    label.into(),
                    format!("`{mask_name}` cannot accompany `range`"),
                ));
                return None;
            }
            match range_to_addr_mask(start, end) {
                Ok(pair) => Some((pair.addr, pair.mask)),
                Err(e) => {
                    diags.push(Diagnostic::error(label.into(), e.to_string()));
                    None
                }
            }
        }
        (Some(_), Some(_)) => {
            diags.push(Diagnostic::error(
                label.into(),
                "give either `addr` or `range`, not both".into(),
            ));
            None
        }
        (None, None) => {
            diags.push(Diagnostic::error(
                label.into(),
                "an address scope needs `addr` or `range`".into(),
            ));
            None
        }
    }
}

/// Common per-entry checks; returns the target slave index when the scope
/// sits inside exactly one mapped region.
fn check_scope(
    label: &str,
    cfg: &SystemConfig,
    master: MasterId,
    addr: u32,
    mask: u32,
    diags: &mut Vec<Diagnostic>,
) -> Option<usize> {
    if !cfg.all_masters().contains(&master) {
        diags.push(Diagnostic::error(
            label.into(),
            format!("master {:#04x} does not exist in this configuration", master.0),
        ));
        return None;
    }
    if mask & mask.wrapping_add(1) != 0 {
        let (lo, hi) = apu_range(addr, mask);
        let masked = 1u64 << mask.count_ones();
        let interval = u64::from(hi - lo) + 1;
        diags.push(Diagnostic::warning(
            label.into(),
            format!(
                "mask {mask:#010x} is not a contiguous run: matches {masked} \
                 address(es) under masked equality but {interval} as an interval"
            ),
        ));
    }
    let (lo, hi) = apu_range(addr, mask);
    // Regions whose window intersects the scope hull. The entry can only
    // live in one monitor, so one region may match; reaching past it is
    // harmless because unmapped addresses never arrive at any monitor.
    let touching: Vec<usize> = cfg
        .memory_map
        .iter()
        .enumerate()
        .filter(|(_, r)| r.base <= hi && lo <= r.base + (r.size - 1))
        .map(|(i, _)| i)
        .collect();
    match touching[..] {
        [] => {
            diags.push(Diagnostic::error(
                label.into(),
                format!("scope [{lo:#010x}, {hi:#010x}] matches no mapped address"),
            ));
            None
        }
        [s] => {
            let r = &cfg.memory_map[s];
            if lo < r.base || hi > r.base + (r.size - 1) {
                diags.push(Diagnostic::warning(
                    label.into(),
                    format!(
                        "scope [{lo:#010x}, {hi:#010x}] extends past {}; \
                         addresses outside the map never match",
                        r.name
                    ),
                ));
            }
            Some(s)
        }
        _ => {
            diags.push(Diagnostic::error(
                label.into(),
                format!(
                    "scope [{lo:#010x}, {hi:#010x}] spans slaves {} and {}",
                    touching[0], touching[1]
                ),
            ));
            None
        }
    }
}

/// Address-set inclusion for the shadowing check, under the given mode.
fn scope_subset(inner: (u32, u32), outer: (u32, u32), mode: MatchMode) -> bool {
    let (ia, im) = inner;
    let (oa, om) = outer;
    match mode {
        MatchMode::MaskedEquality => {
            // Every free bit of the inner pair must be free in the outer
            // one, and the bases must agree outside the outer mask.
            im & !om == 0 && ia & !om == oa & !om
        }
        MatchMode::RangeInterval => {
            let (ilo, ihi) = apu_range(ia, im);
            let (olo, ohi) = apu_range(oa, om);
            olo <= ilo && ihi <= ohi
        }
    }
}

fn perm_subset(inner: Permission, outer: Permission) -> bool {
    use crate::policy::AccessKind::{Read, Write};
    (!inner.allows(Read) || outer.allows(Read)) && (!inner.allows(Write) || outer.allows(Write))
}

fn analyze(src: &PolicySource, cfg: &SystemConfig, mode: MatchMode) -> Analysis {
    let mut diags = Vec::new();
    let mut images = vec![PrsImage::default(); cfg.memory_map.len()];

    // (entry index, resolved policy, slave) for the cross-entry passes.
    let mut apu_resolved: Vec<(usize, ApuPolicy)> = Vec::new();

    for (i, e) in src.apu.iter().enumerate() {
        let label = format!("apu[{i}]");
        let Some((addr, mask)) = resolve_scope(&label, e.addr, e.range, e.mask, "mask", &mut diags)
        else {
            continue;
        };
        let Some(slave) = check_scope(&label, cfg, e.master, addr, mask, &mut diags) else {
            continue;
        };
        let policy = ApuPolicy {
            master: e.master,
            addr,
            mask,
            perm: e.perm,
        };
        apu_resolved.push((i, policy));
        images[slave].apu.push(policy);
    }

    for (i, e) in src.dpu.iter().enumerate() {
        let label = format!("dpu[{i}]");
        let Some((addr, amask)) =
            resolve_scope(&label, e.addr, e.range, e.amask, "amask", &mut diags)
        else {
            continue;
        };
        let Some(slave) = check_scope(&label, cfg, e.master, addr, amask, &mut diags) else {
            continue;
        };
        if e.dmask == u32::MAX {
            diags.push(Diagnostic::warning(
                label.clone(),
                "dmask 0xffffffff ignores the data entirely: every write in scope is denied"
                    .into(),
            ));
        }
        images[slave].dpu.push(DpuPolicy {
            master: e.master,
            addr,
            amask,
            data: e.data,
            dmask: e.dmask,
        });
    }

    // Duplicates: same matched set, same master, same permission.
    let canon = |p: &ApuPolicy| (p.master, p.addr & !p.mask, p.mask, p.perm);
    for (k, &(i, p)) in apu_resolved.iter().enumerate() {
        if apu_resolved[..k].iter().any(|(_, q)| canon(q) == canon(&p)) {
            diags.push(Diagnostic::warning(
                format!("apu[{i}]"),
                "duplicate of an earlier entry".into(),
            ));
        }
    }

    // Shadowing: a non-identical entry of the same master whose address set
    // contains this one's, at equal-or-stronger permission, makes this one
    // redundant. Set inclusion depends on the match mode.
    for &(i, p) in &apu_resolved {
        let shadowed = apu_resolved.iter().any(|&(j, q)| {
            j != i
                && canon(&q) != canon(&p)
                && q.master == p.master
                && scope_subset((p.addr, p.mask), (q.addr, q.mask), mode)
                && perm_subset(p.perm, q.perm)
        });
        if shadowed {
            diags.push(Diagnostic::warning(
                format!("apu[{i}]"),
                "fully shadowed by another entry for the same master".into(),
            ));
        }
    }

    for (s, im) in images.iter().enumerate() {
        if im.apu.len() > cfg.prs_capacity {
            diags.push(Diagnostic::error(
                format!("slave[{s}].apu"),
                format!(
                    "capacity exceeded: {} allow-list entries, capacity {}",
                    im.apu.len(),
                    cfg.prs_capacity
                ),
            ));
        }
        if im.dpu.len() > cfg.prs_capacity {
            diags.push(Diagnostic::error(
                format!("slave[{s}].dpu"),
                format!(
                    "capacity exceeded: {} deny-list entries, capacity {}",
                    im.dpu.len(),
                    cfg.prs_capacity
                ),
            ));
        }
    }

    Analysis {
        diagnostics: diags,
        images,
    }
}

/// All diagnostics for a source file, in a deterministic order: per-entry
/// findings in file order (allow list before deny list), then duplicate and
/// shadowing warnings, then per-slave capacity findings.
pub fn validate(src: &PolicySource, cfg: &SystemConfig, mode: MatchMode) -> Vec<Diagnostic> {
    analyze(src, cfg, mode).diagnostics
}

/// Partition a validated source into per-slave images, file order preserved
/// within each slave. Any error-level diagnostic blocks emission.
pub fn compile_to_prs(
    src: &PolicySource,
    cfg: &SystemConfig,
    mode: MatchMode,
) -> Result<Compiled, CompileError> {
    let analysis = analyze(src, cfg, mode);
    if has_errors(&analysis.diagnostics) {
        return Err(CompileError(analysis.diagnostics));
    }
    Ok(Compiled {
        images: analysis.images,
        warnings: analysis.diagnostics,
    })
}
