//! One compile-and-verify run with its artifacts.

use std::cell::RefCell;
use std::path::{Path, PathBuf};
use std::time::Duration;

use legoc_core::pipeline::{complexity, parts_dump, Compiler, Complexity, FunctionArtifacts, PipelineConfig};
use legoc_core::splitter::{HeuristicPolicy, PolicyKind, SplitPolicy};
use legoc_core::translation::{LlmBackend, LlmSplitPolicy, Mode};
use legoc_core::verify::{load_tests, repair_loop, Attempt, AttemptError, DriverSpec, RepairError, Stage, INFRA_EXIT};
use legoc_core::{parse_source, Backend, ErrorClass, Harness, RefBackend, TestFile, TranslateError};
use serde::Serialize;

use crate::config::{BackendKind, Settings};

/// Backend and split policy shared by every case of a run.
pub struct Toolkit {
    pub backend: Box<dyn Backend>,
    pub policy: Box<dyn SplitPolicy>,
}

impl Toolkit {
    pub fn new(settings: &Settings) -> Result<Toolkit, TranslateError> {
        let backend: Box<dyn Backend> = match settings.backend {
            BackendKind::Ref => Box::new(RefBackend),
            BackendKind::Llm => Box::new(LlmBackend::new(settings.llm.clone())?),
        };
        let policy: Box<dyn SplitPolicy> = match settings.split.policy {
            PolicyKind::Heuristic => Box::new(HeuristicPolicy),
            PolicyKind::Llm => Box::new(LlmSplitPolicy {
                backend: LlmBackend::new(settings.llm.clone())?,
            }),
        };
        Ok(Toolkit { backend, policy })
    }
}

#[derive(Clone, Debug)]
pub struct CaseSpec {
    pub name: String,
    pub source: PathBuf,
    pub tests: Option<PathBuf>,
    pub function: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    /// Every test passed.
    Pass,
    /// Compiled without tests to check against.
    Compiled,
    Fail,
    Error,
}

#[derive(Clone, Debug, Serialize)]
pub struct AttemptSummary {
    pub number: u32,
    pub stage: Stage,
    pub error_class: ErrorClass,
    pub diagnostics: String,
    pub failed_cases: usize,
}

impl From<&Attempt> for AttemptSummary {
    fn from(a: &Attempt) -> Self {
        AttemptSummary {
            number: a.number,
            stage: a.report.stage,
            error_class: a.report.error_class,
            diagnostics: a.report.diagnostics.clone(),
            failed_cases: a.report.failed_cases.len(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CaseReport {
    pub name: String,
    pub source: PathBuf,
    pub function: Option<String>,
    pub mode: Mode,
    pub backend: BackendKind,
    pub max_retries: u32,
    pub outcome: Outcome,
    pub error_class: Option<ErrorClass>,
    /// Where a non-test failure happened (`input`, `translate`, `harness`, ...).
    pub stage: Option<String>,
    pub message: Option<String>,
    pub exit_code: i32,
    pub attempts: Vec<AttemptSummary>,
    pub complexity: Option<Complexity>,
}

impl CaseReport {
    fn new(spec: &CaseSpec, settings: &Settings) -> CaseReport {
        CaseReport {
            name: spec.name.clone(),
            source: spec.source.clone(),
            function: spec.function.clone(),
            mode: settings.mode,
            backend: settings.backend,
            max_retries: settings.max_retries,
            outcome: Outcome::Error,
            error_class: None,
            stage: None,
            message: None,
            exit_code: INFRA_EXIT,
            attempts: Vec::new(),
            complexity: None,
        }
    }

    fn error(mut self, stage: &str, message: impl ToString, exit_code: i32) -> CaseReport {
        self.outcome = Outcome::Error;
        self.stage = Some(stage.into());
        self.message = Some(message.to_string());
        self.exit_code = exit_code;
        self
    }

    pub fn passed(&self) -> bool {
        matches!(self.outcome, Outcome::Pass | Outcome::Compiled)
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("out").to_string()
}

fn write_artifacts(dir: &Path, stem: &str, module: Option<&str>, fns: Option<&[FunctionArtifacts]>) -> std::io::Result<()> {
    if let Some(m) = module {
        std::fs::write(dir.join(format!("{stem}.s")), m)?;
    }
    if let Some(fns) = fns {
        let tables: String = fns.iter().filter_map(|f| f.table.as_ref()).map(|t| t.to_text() + "\n").collect();
        std::fs::write(dir.join(format!("{stem}.symbols.txt")), tables)?;
        let parts = parts_dump(fns);
        if !parts.is_empty() {
            std::fs::write(dir.join(format!("{stem}.parts.txt")), parts)?;
        }
    }
    Ok(())
}

/// Compiles `spec`, verifies it when tests are given, and writes artifacts into `dir`.
pub fn run_case(spec: &CaseSpec, settings: &Settings, kit: &Toolkit, dir: &Path) -> CaseReport {
    let mut report = CaseReport::new(spec, settings);
    if let Err(e) = std::fs::create_dir_all(dir) {
        return report.error("output", e, INFRA_EXIT);
    }
    report = execute(spec, settings, kit, dir, report).unwrap_or_else(|r| r);
    let json = serde_json::to_string_pretty(&report).unwrap_or_default();
    if let Err(e) = std::fs::write(dir.join("report.json"), json + "\n") {
        return report.error("output", e, INFRA_EXIT);
    }
    report
}

fn execute(
    spec: &CaseSpec,
    settings: &Settings,
    kit: &Toolkit,
    dir: &Path,
    base: CaseReport,
) -> Result<CaseReport, CaseReport> {
    let fail = |stage: &str, msg: String, code: i32| base.clone().error(stage, msg, code);
    let source = std::fs::read_to_string(&spec.source)
        .map_err(|e| fail("input", format!("{}: {e}", spec.source.display()), INFRA_EXIT))?;
    let ast = parse_source(&source).map_err(|e| fail("frontend", e.to_string(), INFRA_EXIT))?;
    let tests: Option<TestFile> = match &spec.tests {
        Some(p) => Some(load_tests(p).map_err(|e| fail("input", e.to_string(), INFRA_EXIT))?),
        None => None,
    };
    let function = tests.as_ref().map(|t| t.function.clone()).or_else(|| spec.function.clone());
    let mut report = base.clone();
    report.function = function.clone();
    report.complexity = function.as_deref().and_then(|f| complexity(&ast, f).ok());
    let config = PipelineConfig {
        mode: settings.mode,
        split: settings.split,
    };
    let compiler = Compiler::new(&ast, config, kit.backend.as_ref(), kit.policy.as_ref());
    let name = stem(&spec.source);
    let io = |r: &CaseReport, e: std::io::Error| r.clone().error("output", e, INFRA_EXIT);

    let Some(tests) = tests else {
        let fns = compiler
            .compile_all(None)
            .map_err(|e| report.clone().error("translate", e, ErrorClass::Semantic.exit_code()))?;
        let module = compiler
            .module(&fns)
            .map_err(|e| report.clone().error("rebuild", e, ErrorClass::Semantic.exit_code()))?;
        write_artifacts(dir, &name, Some(&module), Some(&fns)).map_err(|e| io(&report, e))?;
        report.outcome = Outcome::Compiled;
        report.exit_code = 0;
        return Ok(report);
    };

    let driver_spec = DriverSpec::from_ast(&ast, &tests.function).map_err(|e| report.clone().error("harness", e, INFRA_EXIT))?;
    let harness = Harness {
        timeout: Duration::from_secs(settings.timeout_secs),
        ..Harness::default()
    };
    let last: RefCell<Option<Vec<FunctionArtifacts>>> = RefCell::new(None);
    let result = repair_loop(
        settings.max_retries,
        |fb| {
            let fns = compiler.compile_all(fb).map_err(AttemptError::from)?;
            let module = compiler.module(&fns).map_err(AttemptError::from)?;
            *last.borrow_mut() = Some(fns);
            Ok(module)
        },
        |m| harness.verify_module(m, &driver_spec, &tests.cases),
    );
    let attempts: &[Attempt] = match &result {
        Ok(o) => &o.attempts,
        Err(e) => e.attempts(),
    };
    for a in attempts {
        if let Some(m) = &a.module {
            std::fs::write(dir.join(format!("attempt-{}.s", a.number)), m).map_err(|e| io(&report, e))?;
        }
    }
    report.attempts = attempts.iter().map(AttemptSummary::from).collect();
    let final_module = attempts.iter().rev().find_map(|a| a.module.clone());
    let fns = last.borrow();
    write_artifacts(dir, &name, final_module.as_deref(), fns.as_deref()).map_err(|e| io(&report, e))?;
    match result {
        Ok(_) => {
            report.outcome = Outcome::Pass;
            report.error_class = Some(ErrorClass::None);
            report.exit_code = 0;
        }
        Err(RepairError::ExhaustedRetries { attempts, .. }) => {
            let class = attempts.last().map(|a| a.report.error_class).unwrap_or(ErrorClass::Semantic);
            report.outcome = Outcome::Fail;
            report.error_class = Some(class);
            report.exit_code = class.exit_code();
        }
        Err(RepairError::Translation { message, .. }) => {
            report = report.error("translate", message, ErrorClass::Semantic.exit_code());
            report.error_class = Some(ErrorClass::Semantic);
        }
        Err(RepairError::Verify(e)) => report = report.error("harness", e, INFRA_EXIT),
    }
    Ok(report)
}
