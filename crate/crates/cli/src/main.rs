//! `legoc`: compile C functions to x86-64 assembly by split translation and check the result.

mod batch;
mod case;
mod config;
mod corpus;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use legoc_core::pipeline::HardCaseFilter;
use legoc_core::suite::SeedManifest;
use legoc_core::translation::Mode;
use legoc_core::verify::INFRA_EXIT;
use legoc_core::Harness;

use crate::batch::{run_batch, BatchOptions, CorpusManifest};
use crate::case::{run_case, CaseSpec, Toolkit};
use crate::config::{Overrides, Settings};

#[derive(Parser)]
#[command(name = "legoc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile one C file; with --tests, verify and repair it.
    Compile {
        source: PathBuf,
        /// TOML test file naming the function under test.
        #[arg(long)]
        tests: Option<PathBuf>,
        /// Function to report on when no tests are given.
        #[arg(long)]
        function: Option<String>,
        #[arg(long, default_value = "legoc-out")]
        out_dir: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate every case of a corpus manifest.
    Batch {
        manifest: PathBuf,
        /// Comma-separated modes to compare; defaults to --mode.
        #[arg(long, value_delimiter = ',')]
        modes: Vec<Mode>,
        #[arg(long, default_value = "legoc-batch")]
        out_dir: PathBuf,
        /// Only count cases that pass the hard-case filter.
        #[arg(long)]
        hard_only: bool,
        #[arg(long, default_value_t = HardCaseFilter::default().min_blocks)]
        min_blocks: usize,
        #[arg(long, default_value_t = HardCaseFilter::default().min_max_block)]
        min_block_instructions: usize,
        #[arg(long, default_value_t = HardCaseFilter::default().min_total)]
        min_total_instructions: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Generate subset programs with reference IO tests and a batch manifest.
    GenCorpus {
        /// Seed manifest to materialize; otherwise the standard one with --count entries.
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long, default_value_t = 300)]
        count: usize,
        #[arg(long, default_value = "legoc-corpus")]
        out_dir: PathBuf,
    },
}

fn infra(err: impl std::fmt::Display) -> ExitCode {
    eprintln!("legoc: {err}");
    ExitCode::from(INFRA_EXIT as u8)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Compile {
            source,
            tests,
            function,
            out_dir,
            overrides,
        } => {
            let settings = match Settings::load(&overrides) {
                Ok(s) => s,
                Err(e) => return infra(format!("{e:#}")),
            };
            let kit = match Toolkit::new(&settings) {
                Ok(k) => k,
                Err(e) => return infra(e),
            };
            let name = source.file_stem().and_then(|s| s.to_str()).unwrap_or("case").to_string();
            let spec = CaseSpec {
                name,
                source,
                tests,
                function,
            };
            let r = run_case(&spec, &settings, &kit, &out_dir);
            let class = r.error_class.map(|c| c.to_string()).unwrap_or_else(|| "-".into());
            println!(
                "{}: {} in {} mode, class {class}, {} attempt(s), artifacts in {}",
                r.name,
                format!("{:?}", r.outcome).to_lowercase(),
                r.mode,
                r.attempts.len(),
                out_dir.display()
            );
            if let Some(m) = &r.message {
                eprintln!("{}: {m}", r.stage.as_deref().unwrap_or("error"));
            }
            ExitCode::from(r.exit_code as u8)
        }
        Command::Batch {
            manifest,
            modes,
            out_dir,
            hard_only,
            min_blocks,
            min_block_instructions,
            min_total_instructions,
            overrides,
        } => {
            let settings = match Settings::load(&overrides) {
                Ok(s) => s,
                Err(e) => return infra(format!("{e:#}")),
            };
            let cases = match CorpusManifest::load(&manifest) {
                Ok(c) => c,
                Err(e) => return infra(format!("{e:#}")),
            };
            let kit = match Toolkit::new(&settings) {
                Ok(k) => k,
                Err(e) => return infra(e),
            };
            let opts = BatchOptions {
                modes: if modes.is_empty() { vec![settings.mode] } else { modes },
                filter: HardCaseFilter {
                    min_blocks,
                    min_max_block: min_block_instructions,
                    min_total: min_total_instructions,
                },
                hard_only,
            };
            match run_batch(&cases, &settings, &opts, &kit, &out_dir) {
                Ok(summary) => {
                    print!("{}", summary.to_text());
                    ExitCode::SUCCESS
                }
                Err(e) => infra(format!("{e:#}")),
            }
        }
        Command::GenCorpus { seeds, count, out_dir } => {
            let seeds = match seeds {
                Some(p) => match std::fs::read_to_string(&p).map_err(|e| e.to_string()).and_then(|t| SeedManifest::parse(&t).map_err(|e| e.to_string())) {
                    Ok(m) => m,
                    Err(e) => return infra(format!("{}: {e}", p.display())),
                },
                None => SeedManifest::standard(count),
            };
            match corpus::generate(&seeds, &out_dir, &Harness::default()) {
                Ok(path) => {
                    println!("{} programs, manifest at {}", seeds.programs.len(), path.display());
                    ExitCode::SUCCESS
                }
                Err(e) => infra(format!("{e:#}")),
            }
        }
    }
}
