//! `abutfix` — detect and repair lithography weakpoints at standard-cell
//! abutment boundaries.
//!
//! Subcommands mirror the verify/fix flow: `gen` builds a synthetic benchmark,
//! `verify` scans a design against a pattern library and writes markers,
//! `fix` runs the iterative repair loop, and `report` pretty-prints the
//! convergence CSV a fix run produces.
//!
//! Exit codes: 0 on success (and on a clean fix), 2 when the fix loop hits its
//! iteration budget with markers remaining, 1 on usage, I/O, or parse errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use abutfix_core::{
    derive_patterns, fix_loop, gen_masters, gen_placement, parse_design, parse_iteration_report,
    parse_patterns, scan_boundaries, scan_full, serialize_design, serialize_patterns,
    write_iteration_report, write_markers, write_op_log, FixConfig, FixStatus, Placement,
    PatternLibrary, SynthConfig, VerifyMode,
};

#[derive(Parser)]
#[command(
    name = "abutfix",
    version,
    about = "Detect and repair lithography weakpoints at standard-cell abutments"
)]
struct Cli {
    /// Number of threads for scanning (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Re-verify by scanning every window of the design.
    Full,
    /// Re-verify only windows anchored at cell abutments.
    Boundaries,
}

impl From<Mode> for VerifyMode {
    fn from(m: Mode) -> VerifyMode {
        match m {
            Mode::Full => VerifyMode::Full,
            Mode::Boundaries => VerifyMode::Boundaries,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark design and its pattern library.
    Gen {
        /// TOML file with generator settings (defaults used when omitted).
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        /// Override the generator seed from the config.
        #[arg(long, value_name = "N")]
        seed: Option<u64>,
        /// Where to write the generated design.
        #[arg(long, value_name = "FILE")]
        out_design: PathBuf,
        /// Where to write the derived pattern library.
        #[arg(long, value_name = "FILE")]
        out_patterns: PathBuf,
    },
    /// Scan a design for pattern matches and write a marker file.
    Verify {
        #[arg(long, value_name = "FILE")]
        design: PathBuf,
        #[arg(long, value_name = "FILE")]
        patterns: PathBuf,
        /// Where to write the markers.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Full)]
        mode: Mode,
    },
    /// Repair all pattern matches, re-verifying after every pass.
    Fix {
        #[arg(long, value_name = "FILE")]
        design: PathBuf,
        #[arg(long, value_name = "FILE")]
        patterns: PathBuf,
        /// Seed for the randomized choice of repair operations.
        #[arg(long, value_name = "N", default_value_t = 1)]
        seed: u64,
        /// Give up after this many verify-fix passes.
        #[arg(long, value_name = "N", default_value_t = 10)]
        max_iterations: u32,
        #[arg(long, value_enum, default_value_t = Mode::Full)]
        mode: Mode,
        /// Where to write the repaired design.
        #[arg(long, value_name = "FILE")]
        out_design: PathBuf,
        /// Where to write the per-iteration marker-count CSV.
        #[arg(long, value_name = "FILE")]
        out_report: PathBuf,
        /// Where to write the operation log.
        #[arg(long, value_name = "FILE")]
        out_log: PathBuf,
    },
    /// Pretty-print the convergence CSV written by `fix`.
    Report {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests print to stdout and succeed; genuine
            // usage errors report on stderr and exit 1.
            let code = u8::from(err.use_stderr());
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(err) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: setting up {n} threads: {err}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Gen { config, seed, out_design, out_patterns } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    toml::from_str::<SynthConfig>(&text)
                        .with_context(|| format!("parsing {}", path.display()))?
                }
                None => SynthConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let masters = gen_masters(&cfg)?;
            let placement = gen_placement(&masters, &cfg)?;
            let (library, anchors) = derive_patterns(&placement, &cfg)?;
            write_file(&out_design, &serialize_design(&placement))?;
            write_file(&out_patterns, &serialize_patterns(&library))?;
            let utilization =
                placement.occupied_sites() as f64 / placement.site_capacity() as f64;
            println!(
                "generated {} cells over {} masters at utilization {utilization:.3} \
                 with {} planted patterns (seed {})",
                placement.instances().len(),
                masters.len(),
                anchors.len(),
                cfg.seed,
            );
            println!("design:   {}", out_design.display());
            println!("patterns: {}", out_patterns.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { design, patterns, out, mode } => {
            let placement = load_design(&design)?;
            let library = load_patterns(&patterns)?;
            let markers = match mode {
                Mode::Full => scan_full(&placement, &library),
                Mode::Boundaries => scan_boundaries(&placement, &library),
            };
            write_file(&out, &write_markers(&markers))?;
            println!("{} marker(s); wrote {}", markers.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Fix {
            design,
            patterns,
            seed,
            max_iterations,
            mode,
            out_design,
            out_report,
            out_log,
        } => {
            let mut placement = load_design(&design)?;
            let library = load_patterns(&patterns)?;
            let config =
                FixConfig { seed, max_iterations, verify_mode: mode.into() };
            let report = fix_loop(&mut placement, &library, &config)?;
            write_file(&out_design, &serialize_design(&placement))?;
            write_file(&out_report, &write_iteration_report(&report))?;
            write_file(&out_log, &write_op_log(&report, placement.grid()))?;
            let passes = report.iteration_counts.len() - 1;
            let initial = report.iteration_counts[0];
            let last = *report.iteration_counts.last().unwrap();
            match report.status {
                FixStatus::Clean => {
                    println!("clean: {initial} -> 0 markers in {passes} fix pass(es)");
                    Ok(ExitCode::SUCCESS)
                }
                FixStatus::MaxIterationsReached => {
                    println!(
                        "not clean: {initial} -> {last} marker(s) after {passes} fix pass(es)"
                    );
                    Ok(ExitCode::from(2))
                }
            }
        }
        Command::Report { input } => {
            let text = fs::read_to_string(&input)
                .with_context(|| format!("reading {}", input.display()))?;
            let counts = parse_iteration_report(&text)
                .map_err(|err| anyhow::anyhow!("{}: {err}", input.display()))?;
            print_report(&counts);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_design(path: &Path) -> Result<Placement> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_design(&text).map_err(|err| anyhow::anyhow!("{}: {err}", path.display()))
}

fn load_patterns(path: &Path) -> Result<PatternLibrary> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_patterns(&text).map_err(|err| anyhow::anyhow!("{}: {err}", path.display()))
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn print_report(counts: &[usize]) {
    println!("{:>9}  {:>8}  {:>8}", "iteration", "markers", "resolved");
    let mut prev = counts[0];
    for (i, &count) in counts.iter().enumerate() {
        if i == 0 {
            println!("{i:>9}  {count:>8}  {:>8}", "-");
        } else {
            let resolved = prev as i64 - count as i64;
            println!("{i:>9}  {count:>8}  {resolved:>+8}");
        }
        prev = count;
    }
    let initial = counts[0];
    let last = *counts.last().unwrap();
    let passes = counts.len() - 1;
    if last == 0 {
        println!("clean: {initial} marker(s) resolved in {passes} fix pass(es)");
    } else {
        println!("not clean: {last} of {initial} marker(s) remain after {passes} fix pass(es)");
    }
}
