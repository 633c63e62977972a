//! JSON-scripted runs: a scenario file names a configuration, policies,
//! memory images, per-master transaction streams, fault injections, and the
//! outcomes it expects. The runner loads everything, drives the system to
//! quiescence or a cycle limit, and checks every expectation.
//!
//! Scripted cycles are relative to the moment the memory images have
//! finished loading, so a scenario does not depend on how long its images
//! take to stream in. Expectations name transactions by (master, index in
//! that master's scripted stream), which stays stable under timing changes.

use crate::bus::{Hresp, SlaveId};
use crate::compiler::{self, Diagnostic, PolicySource};
use crate::config::{ConfigError, SystemConfig};
use crate::hexnum::HexWord;
use crate::image::{self, ImageError};
use crate::mem::FaultTarget;
use crate::policy::{AccessKind, MasterId, MatchMode, PrsImage};
use crate::system::{RunOutcome, System, SystemError};
use crate::transmon::Cause;
use serde::Deserialize;
use std::path::{Path, PathBuf};

pub const DEFAULT_CYCLE_LIMIT: u64 = 100_000;

/// A referenced sub-document: either a path to its own file (relative to
/// the scenario file) or the document written inline.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Path(String),
    Inline(T),
}

/// A memory image: a path to an "ADDRESS: WORD" text file, or inline
/// [address, word] pairs.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ImageSource {
    Path(String),
    Words(Vec<(HexWord, HexWord)>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptTxn {
    /// Earliest issue cycle, relative to script start.
    #[serde(default)]
    pub at_cycle: u64,
    pub kind: AccessKind,
    #[serde(with = "crate::hexnum::hex32")]
    pub addr: u32,
    #[serde(default, with = "crate::hexnum::hex32_opt")]
    pub wdata: Option<u32>,
    /// Master ID the request claims to come from, when exercising spoofing.
    #[serde(default)]
    pub claim: Option<MasterId>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stream {
    pub master: MasterId,
    pub txns: Vec<ScriptTxn>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub master: MasterId,
    /// Index into that master's scripted stream.
    pub index: usize,
    pub expect: Hresp,
    #[serde(default)]
    pub cause: Option<Cause>,
    /// Expected completion cycle, relative to script start.
    #[serde(default)]
    pub completion_cycle: Option<u64>,
    #[serde(default, with = "crate::hexnum::hex32_opt")]
    pub rdata: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultInjection {
    /// Applied at the start of this cycle, relative to script start.
    #[serde(default)]
    pub at_cycle: u64,
    pub slave: SlaveId,
    #[serde(with = "crate::hexnum::hex32")]
    pub offset: u32,
    pub bits: Vec<u8>,
    pub target: FaultTarget,
}

/// Post-run memory assertion: stored word value and/or taint state.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemCheck {
    #[serde(with = "crate::hexnum::hex32")]
    pub addr: u32,
    #[serde(default, with = "crate::hexnum::hex32_opt")]
    pub word: Option<u32>,
    #[serde(default)]
    pub tainted: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub config: Option<Source<SystemConfig>>,
    /// Policy source, compiled at load time. Mutually exclusive with
    /// `prs_images`.
    #[serde(default)]
    pub policies: Option<Source<PolicySource>>,
    /// Precompiled per-slave images, map order.
    #[serde(default)]
    pub prs_images: Option<Vec<PrsImage>>,
    #[serde(default)]
    pub images: Vec<ImageSource>,
    #[serde(default)]
    pub streams: Vec<Stream>,
    #[serde(default)]
    pub expectations: Vec<Expectation>,
    #[serde(default)]
    pub faults: Vec<FaultInjection>,
    #[serde(default)]
    pub memory: Vec<MemCheck>,
    /// Regions to tear down after all checks, verifying they read back
    /// zero afterwards.
    #[serde(default)]
    pub teardown: Option<Vec<(HexWord, HexWord)>>,
    #[serde(default)]
    pub cycle_limit: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        source: ImageError,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("policy validation failed\n{}", compiler::render_diagnostics(.0))]
    Policies(Vec<Diagnostic>),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("`policies` and `prs_images` are mutually exclusive")]
    PolicyClash,
    #[error("expectation {0} references transaction {2} of master {1:#04x}, which was never scripted")]
    BadRef(usize, u8, usize),
}

/// A scenario with every reference resolved, ready to run repeatedly.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub cfg: SystemConfig,
    pub prs_images: Option<Vec<PrsImage>>,
    pub policy_warnings: Vec<Diagnostic>,
    pub mem_words: Vec<(u32, u32)>,
    pub file: ScenarioFile,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioReport {
    pub outcome: RunOutcome,
    /// Cycle at which the script's relative clock started.
    pub script_base: u64,
    pub results: Vec<CheckResult>,
    pub passed: bool,
}

impl ScenarioReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.results {
            let tag = if r.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("{tag}  {}: {}\n", r.label, r.detail));
        }
        let (done, cycle) = match self.outcome {
            RunOutcome::Quiescent { cycle } => ("quiescent", cycle),
            RunOutcome::CycleLimit { cycle } => ("cycle limit reached", cycle),
        };
        out.push_str(&format!(
            "{} at cycle {cycle}; {}/{} checks passed\n",
            done,
            self.results.iter().filter(|r| r.passed).count(),
            self.results.len()
        ));
        out
    }
}

fn read_file(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, ScenarioError> {
    serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

fn resolve<T: serde::de::DeserializeOwned>(
    src: Source<T>,
    base: &Path,
) -> Result<T, ScenarioError> {
    match src {
        Source::Inline(v) => Ok(v),
        Source::Path(rel) => {
            let path = base.join(rel);
            let text = read_file(&path)?;
            parse_json(&path, &text)
        }
    }
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        let text = read_file(path)?;
        let file: ScenarioFile = parse_json(path, &text)?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::from_file(file, &base)
    }

    /// Resolve all references against `base` and compile the policies.
    pub fn from_file(file: ScenarioFile, base: &Path) -> Result<Self, ScenarioError> {
        let cfg = match file.config.clone() {
            Some(src) => resolve(src, base)?,
            None => SystemConfig::default(),
        };
        cfg.validate()?;

        let mut policy_warnings = Vec::new();
        let prs_images = match (file.policies.clone(), file.prs_images.clone()) {
            (Some(_), Some(_)) => return Err(ScenarioError::PolicyClash),
            (Some(src), None) => {
                let source = resolve(src, base)?;
                let compiled = compiler::compile_to_prs(&source, &cfg, cfg.match_mode)
                    .map_err(|e| ScenarioError::Policies(e.0))?;
                policy_warnings = compiled.warnings;
                Some(compiled.images)
            }
            (None, images) => images,
        };

        let mut mem_words = Vec::new();
        for img in &file.images {
            match img {
                ImageSource::Words(words) => {
                    mem_words.extend(words.iter().map(|&(a, w)| (a.0, w.0)));
                }
                ImageSource::Path(rel) => {
                    let path = base.join(rel);
                    let text = read_file(&path)?;
                    let words =
                        image::parse_image(&text).map_err(|source| ScenarioError::Image {
                            path: path.clone(),
                            source,
                        })?;
                    mem_words.extend(words);
                }
            }
        }

        Ok(Scenario {
            cfg,
            prs_images,
            policy_warnings,
            mem_words,
            file,
        })
    }

    /// Build the system, load images, run the script, check everything.
    /// Returns the finished system alongside the report so callers can
    /// inspect the trace or the memories further.
    pub fn run(
        &self,
        mode_override: Option<MatchMode>,
    ) -> Result<(System, ScenarioReport), ScenarioError> {
        self.run_with(mode_override, None)
    }

    pub fn run_with(
        &self,
        mode_override: Option<MatchMode>,
        limit_override: Option<u64>,
    ) -> Result<(System, ScenarioReport), ScenarioError> {
        let mut cfg = self.cfg.clone();
        if let Some(mode) = mode_override {
            cfg.match_mode = mode;
        }
        let limit = limit_override
            .or(self.file.cycle_limit)
            .unwrap_or(DEFAULT_CYCLE_LIMIT);

        let mut sys = System::new(cfg)?;
        if let Some(images) = &self.prs_images {
            sys.install_policies(images)?;
        }
        sys.load_image(&self.mem_words, limit)?;
        let base = sys.cycle();

        // (master, scripted index) -> port stream index. Image loading has
        // already consumed stream indices on the privileged port, so the
        // mapping is recorded rather than assumed.
        let mut refs: Vec<((MasterId, usize), usize)> = Vec::new();
        for stream in &self.file.streams {
            for (pos, t) in stream.txns.iter().enumerate() {
                let idx = sys.enqueue(
                    stream.master,
                    base + t.at_cycle,
                    crate::bus::BusRequest {
                        claimed: t.claim,
                        addr: t.addr,
                        kind: t.kind,
                        wdata: t.wdata,
                    },
                )?;
                refs.push(((stream.master, pos), idx));
            }
        }

        let mut faults: Vec<&FaultInjection> = self.file.faults.iter().collect();
        faults.sort_by_key(|f| f.at_cycle);
        let mut next_fault = 0;

        let outcome = loop {
            while next_fault < faults.len()
                && base + faults[next_fault].at_cycle <= sys.cycle()
            {
                let f = faults[next_fault];
                let region = &sys.config().memory_map[f.slave.0 as usize];
                let addr = region.base + f.offset;
                for &bit in &f.bits {
                    sys.inject_fault(addr, f.target, bit)?;
                }
                next_fault += 1;
            }
            if sys.quiescent() && next_fault == faults.len() {
                break RunOutcome::Quiescent { cycle: sys.cycle() };
            }
            if sys.cycle() >= limit {
                break RunOutcome::CycleLimit { cycle: sys.cycle() };
            }
            sys.step();
        };

        let mut results = Vec::new();
        for (i, e) in self.file.expectations.iter().enumerate() {
            results.push(self.check_expectation(i, e, &sys, &refs, base)?);
        }
        for m in &self.file.memory {
            results.push(check_memory(m, &sys));
        }
        if let Some(regions) = &self.file.teardown {
            let regions: Vec<(u32, u32)> = regions.iter().map(|&(a, b)| (a.0, b.0)).collect();
            sys.teardown_epoch(&regions, limit)?;
            results.push(check_teardown(&regions, &mut sys, limit)?);
        }

        let passed = results.iter().all(|r| r.passed);
        Ok((
            sys,
            ScenarioReport {
                outcome,
                script_base: base,
                results,
                passed,
            },
        ))
    }

    fn check_expectation(
        &self,
        i: usize,
        e: &Expectation,
        sys: &System,
        refs: &[((MasterId, usize), usize)],
        base: u64,
    ) -> Result<CheckResult, ScenarioError> {
        let label = format!("expect[{i}] master {:#04x} txn {}", e.master.0, e.index);
        let &(_, idx) = refs
            .iter()
            .find(|&&((m, pos), _)| m == e.master && pos == e.index)
            .ok_or(ScenarioError::BadRef(i, e.master.0, e.index))?;
        let Some(c) = sys
            .completions()
            .iter()
            .find(|c| c.master == e.master && c.stream_index == idx)
        else {
            return Ok(CheckResult {
                label,
                passed: false,
                detail: "never completed within the cycle limit".into(),
            });
        };

        let mut mismatches = Vec::new();
        if c.response.hresp != e.expect {
            mismatches.push(format!("hresp {:?}, expected {:?}", c.response.hresp, e.expect));
        }
        if let Some(cause) = e.cause {
            if c.cause != Some(cause) {
                mismatches.push(format!("cause {:?}, expected {cause:?}", c.cause));
            }
        }
        if let Some(rel) = e.completion_cycle {
            let got = c.response.completion_cycle - base;
            if got != rel {
                mismatches.push(format!("completed at +{got}, expected +{rel}"));
            }
        }
        if let Some(rdata) = e.rdata {
            if c.response.rdata != Some(rdata) {
                mismatches.push(format!(
                    "rdata {:?}, expected {rdata:#010x}",
                    c.response.rdata
                ));
            }
        }

        Ok(if mismatches.is_empty() {
            CheckResult {
                label,
                passed: true,
                detail: format!(
                    "{:?} {:?} at +{}",
                    c.response.hresp,
                    c.cause,
                    c.response.completion_cycle - base
                ),
            }
        } else {
            CheckResult {
                label,
                passed: false,
                detail: mismatches.join("; "),
            }
        })
    }
}

fn check_memory(m: &MemCheck, sys: &System) -> CheckResult {
    let label = format!("memory {:#010x}", m.addr);
    let mut mismatches = Vec::new();
    match (m.word, sys.peek_word(m.addr)) {
        (Some(want), Some(got)) if want != got => {
            mismatches.push(format!("word {got:#010x}, expected {want:#010x}"));
        }
        (Some(_), None) => mismatches.push("address is unmapped".into()),
        _ => {}
    }
    match (m.tainted, sys.is_tainted_at(m.addr)) {
        (Some(want), Some(got)) if want != got => {
            mismatches.push(format!("tainted {got}, expected {want}"));
        }
        (Some(_), None) => mismatches.push("address is unmapped".into()),
        _ => {}
    }
    if mismatches.is_empty() {
        CheckResult {
            label,
            passed: true,
            detail: "as expected".into(),
        }
    } else {
        CheckResult {
            label,
            passed: false,
            detail: mismatches.join("; "),
        }
    }
}

fn check_teardown(
    regions: &[(u32, u32)],
    sys: &mut System,
    limit: u64,
) -> Result<CheckResult, ScenarioError> {
    let report = sys.dump_regions(regions, limit)?;
    let nonzero = report.words.iter().filter(|&&(_, w)| w != 0).count();
    let unreadable = report.unreadable.len();
    Ok(if nonzero == 0 && unreadable == 0 {
        CheckResult {
            label: "teardown".into(),
            passed: true,
            detail: format!("{} words read back zero", report.words.len()),
        }
    } else {
        CheckResult {
            label: "teardown".into(),
            passed: false,
            detail: format!("{nonzero} nonzero word(s), {unreadable} unreadable"),
        }
    })
}
