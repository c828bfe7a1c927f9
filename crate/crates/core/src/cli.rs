//! Command-line front end.
//!
//! Exit status: 0 no warnings, 1 warnings emitted, 2 usage or parse error,
//! 3 an analysis hit a resource cap.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::clients::{warnings_to_json, warnings_to_text, Warning};
use crate::corpus::{self, CorpusError, DomainFacts, FactsFile, FunctionSummary, Thresholds};
use crate::deps::DependencyBudget;
use crate::ir::parse;
use crate::valueflow::{analyze, AnalysisConfig, AnalysisResult};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_WARNINGS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_TRUNCATED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "symvalic", version, about = "Symbolic value-flow analysis and vulnerability scanning for smart contracts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyze one contract and print its facts.
    Analyze { file: PathBuf },
    /// Run every detector on one contract.
    Scan {
        file: PathBuf,
        /// Corpus facts file enabling the fact-driven detectors and anomaly checks.
        #[arg(long)]
        facts: Option<PathBuf>,
    },
    /// Analyze and summarize every `.svc` file in a directory.
    CorpusBuild { dir: PathBuf },
    /// Infer domain facts over a corpus.
    CorpusInfer {
        dir: PathBuf,
        #[arg(long, default_value_t = corpus::DEFAULT_ROUNDS)]
        rounds: u32,
    },
    /// Report corpus anomalies for every contract in a corpus.
    CorpusScan { dir: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Args)]
pub struct Options {
    /// Leading function arguments tracked as dependencies.
    #[arg(long, global = true, default_value_t = 3)]
    pub dep_args: u32,
    /// Leading storage-load variables tracked as dependencies.
    #[arg(long, global = true, default_value_t = 1)]
    pub dep_storage_loads: u32,
    /// Leading entry-point arguments tracked across internal calls.
    #[arg(long, global = true, default_value_t = 2)]
    pub dep_tx_args: u32,
    /// Arithmetic operations a stored value may go through.
    #[arg(long, global = true, default_value_t = 5)]
    pub arith_depth: u32,
    #[arg(long, global = true, default_value_t = 3)]
    pub tx_rounds: u32,
    /// Values a variable may hold at one statement before the analysis truncates.
    #[arg(long, global = true, default_value_t = 256)]
    pub max_inferences: usize,
    /// Seconds per contract before the analysis truncates.
    #[arg(long, global = true, default_value_t = 30)]
    pub time_budget: u64,
    #[arg(long, global = true, env = "SYMVALIC_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 10)]
    pub min_samples: usize,
    #[arg(long, global = true, default_value_t = 0.9)]
    pub untainted_frac: f64,
    #[arg(long, global = true, default_value_t = 0.9)]
    pub guarded_frac: f64,
    /// Worker threads for corpus commands; defaults to the CPU count.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

impl Options {
    pub fn analysis_config(&self) -> Result<AnalysisConfig, String> {
        let cfg = AnalysisConfig {
            budget: DependencyBudget { args: self.dep_args, storage_loads: self.dep_storage_loads, tx_args: self.dep_tx_args },
            arith_depth: self.arith_depth,
            tx_rounds: self.tx_rounds,
            seed: self.seed,
            max_inferences: self.max_inferences,
            time_budget: Duration::from_secs(self.time_budget),
            ..AnalysisConfig::default()
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn thresholds(&self) -> Result<Thresholds, String> {
        for (name, v) in [("--untainted-frac", self.untainted_frac), ("--guarded-frac", self.guarded_frac)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must be between 0 and 1, got {v}"));
            }
        }
        Ok(Thresholds { min_samples: self.min_samples, untainted_fraction: self.untainted_frac, guarded_fraction: self.guarded_frac })
    }

    fn jobs(&self) -> Result<usize, String> {
        match self.jobs {
            Some(0) => Err("--jobs must be at least 1".into()),
            Some(n) => Ok(n),
            None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Io<'_> {
    fn emit(&mut self, text: &str) {
        let _ = self.out.write_all(text.as_bytes());
        if !text.ends_with('\n') {
            let _ = self.out.write_all(b"\n");
        }
    }

    fn diag(&mut self, msg: impl std::fmt::Display) {
        let _ = writeln!(self.err, "symvalic: {msg}");
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut io = Io { out, err };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(io.out, "{e}");
                EXIT_CLEAN
            } else {
                let _ = write!(io.err, "{e}");
                EXIT_USAGE
            };
        }
    };
    let setup = cli.options.analysis_config().and_then(|cfg| Ok((cfg, cli.options.thresholds()?, cli.options.jobs()?)));
    let (cfg, th, jobs) = match setup {
        Ok(s) => s,
        Err(msg) => {
            io.diag(msg);
            return EXIT_USAGE;
        }
    };
    let format = cli.options.format;
    match &cli.command {
        Command::Analyze { file } => match analyze_file(file, &cfg) {
            Ok(r) => {
                io.emit(&match format {
                    Format::Json => r.to_json(),
                    Format::Text => r.to_text(),
                });
                if r.truncated {
                    EXIT_TRUNCATED
                } else {
                    EXIT_CLEAN
                }
            }
            Err(msg) => {
                io.diag(msg);
                EXIT_USAGE
            }
        },
        Command::Scan { file, facts } => {
            let loaded = match facts {
                Some(p) => match FactsFile::read(p) {
                    Ok(f) => Some(f.facts()),
                    Err(e) => {
                        io.diag(e);
                        return EXIT_USAGE;
                    }
                },
                None => None,
            };
            let r = match analyze_file(file, &cfg) {
                Ok(r) => r,
                Err(msg) => {
                    io.diag(msg);
                    return EXIT_USAGE;
                }
            };
            let det = corpus::scan_contract(&r, &loaded.unwrap_or_default());
            for d in &det.diagnostics {
                io.diag(d);
            }
            emit_warnings(&mut io, format, &det.warnings);
            status(r.truncated, !det.warnings.is_empty())
        }
        Command::CorpusBuild { dir } => corpus_command(&mut io, || corpus::build(dir, &cfg, jobs), |io, (c, summaries)| {
            io.emit(&match format {
                Format::Json => summaries_json(&summaries),
                Format::Text => summaries_text(&summaries),
            });
            corpus_status(io, &c, false)
        }),
        Command::CorpusInfer { dir, rounds } => corpus_command(&mut io, || corpus::infer(dir, &cfg, &th, *rounds, jobs), |io, (c, outcome)| {
            let file = FactsFile::new(&outcome.facts, outcome.rounds(), outcome.converged, th);
            io.emit(&match format {
                Format::Json => file.to_json(),
                Format::Text => facts_text(&file, &outcome.facts),
            });
            corpus_status(io, &c, false)
        }),
        Command::CorpusScan { dir } => corpus_command(&mut io, || corpus::scan(dir, &cfg, &th, jobs), |io, (c, warnings)| {
            emit_warnings(io, format, &warnings);
            corpus_status(io, &c, !warnings.is_empty())
        }),
    }
}

fn analyze_file(path: &Path, cfg: &AnalysisConfig) -> Result<AnalysisResult, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let contract = parse(&text).map_err(|e| format!("{}:{e}", path.display()))?;
    analyze(Arc::new(contract), cfg).map_err(|e| e.to_string())
}

fn status(truncated: bool, warned: bool) -> i32 {
    if truncated {
        EXIT_TRUNCATED
    } else if warned {
        EXIT_WARNINGS
    } else {
        EXIT_CLEAN
    }
}

fn corpus_command<T>(io: &mut Io<'_>, work: impl FnOnce() -> Result<T, CorpusError>, report: impl FnOnce(&mut Io<'_>, T) -> i32) -> i32 {
    match work() {
        Ok(v) => report(io, v),
        Err(e) => {
            io.diag(e);
            EXIT_USAGE
        }
    }
}

fn corpus_status(io: &mut Io<'_>, c: &corpus::Corpus, warned: bool) -> i32 {
    let failures = c.failures();
    for f in &failures {
        io.diag(f);
    }
    if !failures.is_empty() {
        EXIT_USAGE
    } else {
        status(c.truncated(), warned)
    }
}

fn emit_warnings(io: &mut Io<'_>, format: Format, warnings: &[Warning]) {
    match format {
        Format::Json => io.emit(&warnings_to_json(warnings)),
        Format::Text if warnings.is_empty() => {}
        Format::Text => io.emit(&warnings_to_text(warnings)),
    }
}

#[derive(Serialize)]
struct SummaryReport<'a> {
    schema: &'static str,
    summaries: &'a [FunctionSummary],
}

fn summaries_json(s: &[FunctionSummary]) -> String {
    serde_json::to_string_pretty(&SummaryReport { schema: "symvalic-summaries/1", summaries: s }).expect("summaries serialize")
}

fn summaries_text(summaries: &[FunctionSummary]) -> String {
    let mut out = String::new();
    for s in summaries {
        let mut flags = Vec::new();
        for (on, name) in [
            (s.reaches_delegatecall, "reaches-delegatecall"),
            (s.performs_init, "performs-init"),
            (s.manipulable_return, "manipulable-return"),
            (s.allows_reentrancy, "allows-reentrancy"),
            (s.transitive_reentrancy, "transitive-reentrancy"),
            (s.checked_transfer, "checked-transfer"),
        ] {
            if on {
                flags.push(name.to_string());
            }
        }
        if !s.monetary_arg_positions.is_empty() {
            flags.push(format!("monetary-args={:?}", s.monetary_arg_positions));
        }
        out.push_str(&format!("{}.{} {}\n", s.contract, s.function, flags.join(" ")));
        for c in &s.external_calls {
            let taint: Vec<String> = c.arg_taint.iter().map(|t| format!("{t:?}").to_lowercase()).collect();
            out.push_str(&format!("  {} {} {} [{}]\n", c.stmt, c.callee_signature, if c.guarded { "guarded" } else { "unguarded" }, taint.join(", ")));
        }
    }
    out
}

fn facts_text(file: &FactsFile, facts: &DomainFacts) -> String {
    let mut out = format!("round {} converged {}\n", file.round, file.converged);
    for f in facts.sensitive_args.values() {
        out.push_str(&format!("sensitive-arg {} {} untainted {}/{} ({})\n", f.signature, f.position, f.untainted, f.samples, f.fraction));
    }
    for f in facts.usually_guarded.values() {
        out.push_str(&format!("usually-guarded {} {}/{} ({})\n", f.signature, f.guarded, f.samples, f.fraction));
    }
    for f in facts.reentrancy_allowing.values() {
        out.push_str(&format!("reentrancy-allowing {} votes {}\n", f.signature, f.votes));
    }
    for f in facts.monetary.values() {
        out.push_str(&format!("monetary {} {} votes {}\n", f.signature, f.position.unwrap_or_default(), f.votes));
    }
    out
}
