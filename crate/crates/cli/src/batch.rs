//! Batch evaluation over a corpus manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use legoc_core::pipeline::HardCaseFilter;
use legoc_core::translation::Mode;
use legoc_core::ErrorClass;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::case::{run_case, CaseReport, CaseSpec, Toolkit};
use crate::config::Settings;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestCase {
    #[serde(default)]
    pub name: Option<String>,
    pub source: PathBuf,
    #[serde(default)]
    pub tests: Option<PathBuf>,
    #[serde(default)]
    pub function: Option<String>,
}

/// List of sources and test files; relative paths resolve against the manifest's directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    #[serde(default, rename = "case")]
    pub cases: Vec<ManifestCase>,
}

impl CorpusManifest {
    pub fn load(path: &Path) -> anyhow::Result<Vec<CaseSpec>> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let m: CorpusManifest = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut seen = std::collections::HashSet::new();
        m.cases
            .into_iter()
            .map(|c| {
                let name = c.name.clone().unwrap_or_else(|| {
                    c.source.file_stem().and_then(|s| s.to_str()).unwrap_or("case").to_string()
                });
                anyhow::ensure!(seen.insert(name.clone()), "duplicate case name `{name}`");
                Ok(CaseSpec {
                    name,
                    source: base.join(&c.source),
                    tests: c.tests.map(|t| base.join(t)),
                    function: c.function,
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub name: String,
    pub mode: Mode,
    pub passed: bool,
    pub error_class: Option<ErrorClass>,
    pub attempts: usize,
    pub hard: Option<bool>,
    pub message: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeRate {
    pub mode: Mode,
    pub cases: usize,
    pub passed: usize,
    pub rate: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BatchSummary {
    pub filter: HardCaseFilter,
    pub hard_only: bool,
    pub hard: usize,
    pub easy: usize,
    pub rows: Vec<Row>,
    pub rates: Vec<ModeRate>,
}

impl BatchSummary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<24} {:<9} {:<6} {:<11} {:>8} {:<5}", "case", "mode", "result", "class", "attempts", "hard");
        for r in &self.rows {
            let class = r.error_class.map(|c| c.to_string()).unwrap_or_else(|| "-".into());
            let hard = r.hard.map(|h| if h { "yes" } else { "no" }).unwrap_or("?");
            let result = if r.passed { "pass" } else { "fail" };
            let _ = writeln!(s, "{:<24} {:<9} {:<6} {:<11} {:>8} {:<5}", r.name, r.mode.to_string(), result, class, r.attempts, hard);
        }
        let _ = writeln!(
            s,
            "\nhard cases: {} (blocks >= {}, block instructions >= {}, total >= {}), easy: {}",
            self.hard, self.filter.min_blocks, self.filter.min_max_block, self.filter.min_total, self.easy
        );
        for m in &self.rates {
            let _ = writeln!(s, "{:<9} {}/{} passed ({:.1}%)", m.mode.to_string(), m.passed, m.cases, m.rate * 100.0);
        }
        s
    }
}

pub struct BatchOptions {
    pub modes: Vec<Mode>,
    pub filter: HardCaseFilter,
    pub hard_only: bool,
}

/// Runs every case in every requested mode on `settings.jobs` threads.
pub fn run_batch(cases: &[CaseSpec], settings: &Settings, opts: &BatchOptions, kit: &Toolkit, out: &Path) -> anyhow::Result<BatchSummary> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(settings.jobs).build()?;
    let mut rows = Vec::new();
    let mut rates = Vec::new();
    let mut hardness = None;
    for &mode in &opts.modes {
        let s = Settings {
            mode,
            ..settings.clone()
        };
        let reports: Vec<CaseReport> = pool.install(|| {
            cases
                .par_iter()
                .map(|c| run_case(c, &s, kit, &out.join(mode.to_string()).join(&c.name)))
                .collect()
        });
        let flags: Vec<Option<bool>> = reports
            .iter()
            .map(|r| r.complexity.as_ref().map(|c| opts.filter.is_hard(c)))
            .collect();
        hardness.get_or_insert_with(|| flags.clone());
        let mut counted = 0;
        let mut passed = 0;
        for (r, hard) in reports.iter().zip(&flags) {
            if opts.hard_only && *hard != Some(true) {
                continue;
            }
            counted += 1;
            passed += r.passed() as usize;
            rows.push(Row {
                name: r.name.clone(),
                mode,
                passed: r.passed(),
                error_class: r.error_class,
                attempts: r.attempts.len(),
                hard: *hard,
                message: r.message.clone(),
            });
        }
        rates.push(ModeRate {
            mode,
            cases: counted,
            passed,
            rate: if counted == 0 { 0.0 } else { passed as f64 / counted as f64 },
        });
    }
    let hardness = hardness.unwrap_or_default();
    let hard = hardness.iter().filter(|h| **h == Some(true)).count();
    let summary = BatchSummary {
        filter: opts.filter,
        hard_only: opts.hard_only,
        hard,
        easy: hardness.len() - hard,
        rows,
        rates,
    };
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("summary.txt"), summary.to_text())?;
    std::fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(summary)
}
