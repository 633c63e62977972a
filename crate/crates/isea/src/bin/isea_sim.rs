//! Command-line front end.
//!
//! Exit codes: 0 all checks passed, 1 expectation or invariant failures
//! (or policy errors for `check-policies`), 2 load/parse/configuration
//! errors reported before any simulation runs.

use clap::{Parser, Subcommand, ValueEnum};
use isea::compiler;
use isea::compiler::PolicySource;
use isea::config::SystemConfig;
use isea::fuzz::{fuzz, fuzz_with_trace, FuzzParams};
use isea::policy::MatchMode;
use isea::scenario::Scenario;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_FAIL: u8 = 1;
const EXIT_LOAD: u8 = 2;

#[derive(Parser)]
#[command(name = "isea-sim", about = "Secure interconnect simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Scope matches when (addr & !mask) == (base & !mask).
    Masked,
    /// Scope matches when addr lies in [base & !mask, base | mask].
    Range,
}

impl From<ModeArg> for MatchMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Masked => MatchMode::MaskedEquality,
            ModeArg::Range => MatchMode::RangeInterval,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario script and check its expectations.
    Run {
        scenario: PathBuf,
        /// Write the run trace as JSONL.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Override the configured scope interpretation.
        #[arg(long, value_enum)]
        match_mode: Option<ModeArg>,
        /// Override the scenario's cycle limit.
        #[arg(long)]
        cycle_limit: Option<u64>,
    },
    /// Generate random transactions against random valid policies and
    /// audit the run against the invariant suite.
    Fuzz {
        /// System configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Total transactions to generate.
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        /// Worker threads; the report is identical for any value.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Put a forged master ID on every generated transaction.
        #[arg(long)]
        force_spoof: bool,
        /// Write the merged trace as JSONL.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Validate a policy file against a configuration; print diagnostics.
    CheckPolicies {
        file: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        match_mode: Option<ModeArg>,
    },
    /// Compile a policy file to per-slave register images (JSON, suitable
    /// for a scenario's `prs_images` field).
    CompilePolicies {
        file: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        match_mode: Option<ModeArg>,
        /// Output path; standard output if absent.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            scenario,
            trace,
            match_mode,
            cycle_limit,
        } => run(&scenario, trace.as_deref(), match_mode, cycle_limit),
        Command::Fuzz {
            config,
            seed,
            n,
            jobs,
            force_spoof,
            trace,
        } => run_fuzz(&config, seed, n, jobs, force_spoof, trace.as_deref()),
        Command::CheckPolicies {
            file,
            config,
            match_mode,
        } => check_policies(&file, &config, match_mode),
        Command::CompilePolicies {
            file,
            config,
            match_mode,
            out,
        } => compile_policies(&file, &config, match_mode, out.as_deref()),
    }
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_config(path: &Path) -> Result<SystemConfig, String> {
    let cfg: SystemConfig = load_json(path)?;
    cfg.validate()
        .map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(cfg)
}

fn fail_load(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_LOAD)
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<(), String> {
    std::fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(
    path: &Path,
    trace: Option<&Path>,
    mode: Option<ModeArg>,
    cycle_limit: Option<u64>,
) -> ExitCode {
    let scenario = match Scenario::from_path(path) {
        Ok(s) => s,
        Err(e) => return fail_load(&e.to_string()),
    };
    if !scenario.policy_warnings.is_empty() {
        eprint!("{}", compiler::render_diagnostics(&scenario.policy_warnings));
    }
    let (sys, report) = match scenario.run_with(mode.map(Into::into), cycle_limit) {
        Ok(r) => r,
        Err(e) => return fail_load(&e.to_string()),
    };
    if let Some(out) = trace {
        if let Err(e) = write_out(out, isea::trace::to_jsonl_string(sys.trace()).as_bytes()) {
            return fail_load(&e);
        }
    }
    print!("{}", report.render());
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

fn run_fuzz(
    config: &Path,
    seed: u64,
    n: u64,
    jobs: usize,
    force_spoof: bool,
    trace: Option<&Path>,
) -> ExitCode {
    let cfg = match load_config(config) {
        Ok(c) => c,
        Err(e) => return fail_load(&e),
    };
    if jobs == 0 {
        return fail_load("--jobs must be at least 1");
    }
    let params = FuzzParams {
        seed,
        n,
        jobs,
        force_spoof,
    };
    let report = if let Some(out) = trace {
        let (report, jsonl) = fuzz_with_trace(&cfg, &params);
        if let Err(e) = write_out(out, jsonl.as_bytes()) {
            return fail_load(&e);
        }
        report
    } else {
        fuzz(&cfg, &params)
    };
    print!("{}", report.render());
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

fn check_policies(file: &Path, config: &Path, mode: Option<ModeArg>) -> ExitCode {
    let cfg = match load_config(config) {
        Ok(c) => c,
        Err(e) => return fail_load(&e),
    };
    let src: PolicySource = match load_json(file) {
        Ok(s) => s,
        Err(e) => return fail_load(&e),
    };
    let mode = mode.map(Into::into).unwrap_or(cfg.match_mode);
    let diags = compiler::validate(&src, &cfg, mode);
    print!("{}", compiler::render_diagnostics(&diags));
    if compiler::has_errors(&diags) {
        ExitCode::from(EXIT_FAIL)
    } else {
        println!(
            "ok: {} allow entries, {} deny entries",
            src.apu.len(),
            src.dpu.len()
        );
        ExitCode::SUCCESS
    }
}

fn compile_policies(
    file: &Path,
    config: &Path,
    mode: Option<ModeArg>,
    out: Option<&Path>,
) -> ExitCode {
    let cfg = match load_config(config) {
        Ok(c) => c,
        Err(e) => return fail_load(&e),
    };
    let src: PolicySource = match load_json(file) {
        Ok(s) => s,
        Err(e) => return fail_load(&e),
    };
    let mode = mode.map(Into::into).unwrap_or(cfg.match_mode);
    let compiled = match compiler::compile_to_prs(&src, &cfg, mode) {
        Ok(c) => c,
        Err(e) => {
            print!("{}", compiler::render_diagnostics(&e.0));
            return ExitCode::from(EXIT_FAIL);
        }
    };
    eprint!("{}", compiler::render_diagnostics(&compiled.warnings));
    let mut doc = serde_json::Map::new();
    doc.insert(
        "prs_images".into(),
        serde_json::to_value(&compiled.images).expect("images serialize"),
    );
    let text = serde_json::to_string_pretty(&doc).expect("document serializes") + "\n";
    match out {
        Some(path) => {
            if let Err(e) = write_out(path, text.as_bytes()) {
                return fail_load(&e);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::SUCCESS
}
