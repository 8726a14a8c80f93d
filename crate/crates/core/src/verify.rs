//! Behavioral verification: assemble, link against a generated driver, run
//! test cases, classify failures, and retry translation with feedback.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::frontend::ast::{Ast, FnSig};
use crate::frontend::printer::print_signature;
use crate::frontend::types::{IntKind, Type};
use crate::toolchain::{run_with_timeout, ExitState, ToolError, Toolchain};

pub const FEEDBACK_LIMIT: usize = 4000;
pub const DEFAULT_K: u32 = 5;
pub const DEFAULT_EPSILON: f64 = 1e-9;
const SENTINEL: &str = "@@legoc-result";
const USER_MAIN: &str = "legoc_user_main";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorClass {
    Semantic,
    Runtime,
    Behavioral,
    None,
}

impl ErrorClass {
    /// Process exit code for this outcome.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::None => 0,
            ErrorClass::Behavioral => 1,
            ErrorClass::Semantic => 2,
            ErrorClass::Runtime => 3,
        }
    }
}

/// Exit code for harness and configuration faults.
pub const INFRA_EXIT: i32 = 4;

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorClass::Semantic => "semantic",
            ErrorClass::Runtime => "runtime",
            ErrorClass::Behavioral => "behavioral",
            ErrorClass::None => "none",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Assemble,
    Link,
    Run,
    Compare,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TestValue {
    Int(i64),
    Float(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Exact,
    /// Relative tolerance for floating values; integers stay exact.
    FloatTolerance(f64),
}

impl Default for Comparison {
    fn default() -> Self {
        Comparison::FloatTolerance(DEFAULT_EPSILON)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub name: String,
    #[serde(default)]
    pub args: Vec<TestValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_return: Option<TestValue>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_stdout: Option<String>,
    /// Values of scalar globals (element-wise for arrays) after the call.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub expected_globals: BTreeMap<String, Vec<TestValue>>,
    #[serde(default)]
    pub comparison: Comparison,
}

impl TestCase {
    pub fn has_expectation(&self) -> bool {
        self.expected_return.is_some() || self.expected_stdout.is_some() || !self.expected_globals.is_empty()
    }
}

/// One test document: the function under test and its cases.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TestFile {
    pub function: String,
    #[serde(default)]
    pub cases: Vec<TestCase>,
}

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("harness failure: {0}")]
    Harness(String),
    #[error("bad test file: {0}")]
    TestFile(String),
}

impl From<ToolError> for VerifyError {
    fn from(e: ToolError) -> Self {
        VerifyError::Harness(e.to_string())
    }
}

impl From<std::io::Error> for VerifyError {
    fn from(e: std::io::Error) -> Self {
        VerifyError::Harness(e.to_string())
    }
}

pub fn parse_tests(text: &str) -> Result<TestFile, VerifyError> {
    let file: TestFile = toml::from_str(text).map_err(|e| VerifyError::TestFile(e.to_string()))?;
    if let Some(c) = file.cases.iter().find(|c| !c.has_expectation()) {
        return Err(VerifyError::TestFile(format!("case `{}` has no expectation", c.name)));
    }
    Ok(file)
}

pub fn load_tests(path: &Path) -> Result<TestFile, VerifyError> {
    let text = std::fs::read_to_string(path).map_err(|e| VerifyError::TestFile(format!("{}: {e}", path.display())))?;
    parse_tests(&text)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseFailure {
    pub case: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub stage: Stage,
    pub status: Status,
    pub error_class: ErrorClass,
    pub diagnostics: String,
    pub failed_cases: Vec<CaseFailure>,
}

impl VerificationReport {
    pub fn pass() -> Self {
        VerificationReport {
            stage: Stage::Compare,
            status: Status::Pass,
            error_class: ErrorClass::None,
            diagnostics: String::new(),
            failed_cases: Vec::new(),
        }
    }

    pub fn fail(stage: Stage, error_class: ErrorClass, diagnostics: String) -> Self {
        VerificationReport {
            stage,
            status: Status::Fail,
            error_class,
            diagnostics,
            failed_cases: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorFeedback {
    pub error_class: ErrorClass,
    pub diagnostics: String,
    pub excerpt: String,
    pub attempt: u32,
}

/// Keeps the last `limit` characters.
pub fn truncate_tail(s: &str, limit: usize) -> String {
    let n = s.chars().count();
    if n <= limit {
        s.to_string()
    } else {
        s.chars().skip(n - limit).collect()
    }
}

/// Assembly lines around the first `file.s:LINE:` location in `diagnostics`.
pub fn excerpt_for(diagnostics: &str, module: &str) -> String {
    let line = diagnostics.lines().find_map(|l| {
        let (_, rest) = l.split_once(".s:")?;
        rest.split(':').next()?.trim().parse::<usize>().ok()
    });
    let Some(line) = line else { return String::new() };
    let lines: Vec<&str> = module.lines().collect();
    let lo = line.saturating_sub(3);
    let hi = (line + 2).min(lines.len());
    let mut s = String::new();
    for (i, l) in lines.iter().enumerate().take(hi).skip(lo) {
        let _ = writeln!(s, "{:>5}: {l}", i + 1);
    }
    s
}

impl ErrorFeedback {
    pub fn from_report(report: &VerificationReport, module: &str, attempt: u32) -> Self {
        let mut diag = report.diagnostics.clone();
        for f in &report.failed_cases {
            let _ = write!(diag, "\ncase {}: {}", f.case, f.detail);
        }
        ErrorFeedback {
            error_class: report.error_class,
            excerpt: excerpt_for(&diag, module),
            diagnostics: truncate_tail(&diag, FEEDBACK_LIMIT),
            attempt: attempt.max(1),
        }
    }
}

/// What the generated driver needs to call a function and observe its effects.
#[derive(Clone, Debug, PartialEq)]
pub struct DriverSpec {
    pub sig: FnSig,
    /// Globals printed after the call: scalars and arrays of scalars.
    pub globals: Vec<(String, Type)>,
    pub records: Vec<String>,
}

const MAX_OBSERVED_ELEMENTS: u64 = 256;

fn observable(ty: &Type) -> bool {
    match ty {
        Type::Int(_) | Type::Float | Type::Double => true,
        Type::Array(elem, Some(n)) => matches!(**elem, Type::Int(_) | Type::Float | Type::Double) && *n <= MAX_OBSERVED_ELEMENTS,
        _ => false,
    }
}

impl DriverSpec {
    pub fn from_ast(ast: &Ast, function: &str) -> Result<DriverSpec, VerifyError> {
        let sig = ast
            .signatures()
            .into_iter()
            .find(|s| s.name == function)
            .ok_or_else(|| VerifyError::Harness(format!("no function `{function}`")))?;
        Ok(DriverSpec {
            sig,
            globals: ast
                .globals()
                .filter(|g| observable(&g.ty))
                .map(|g| (g.name.clone(), g.ty.clone()))
                .collect(),
            records: ast.records().map(|r| format!("{} {}", r.kind.keyword(), r.tag)).collect(),
        })
    }
}

fn c_literal(v: TestValue, ty: &Type) -> String {
    let cast = ty.declare("");
    match v {
        TestValue::Int(i64::MIN) => format!("(({cast})(-9223372036854775807LL - 1))"),
        TestValue::Int(i) => format!("(({cast}){i}LL)"),
        TestValue::Float(f) => {
            if f.is_nan() {
                format!("(({cast})__builtin_nan(\"\"))")
            } else if f.is_infinite() {
                format!("(({cast}){}__builtin_inf())", if f < 0.0 { "-" } else { "" })
            } else {
                format!("(({cast}){f:e})")
            }
        }
    }
}

fn print_value(expr: &str, ty: &Type) -> (String, String) {
    match ty {
        Type::Int(k) if k.is_signed() => ("%lld".into(), format!("(long long)({expr})")),
        Type::Int(_) => ("%llu".into(), format!("(unsigned long long)({expr})")),
        Type::Float | Type::Double => ("%.17g".into(), format!("(double)({expr})")),
        _ => ("%d".into(), format!("({expr}) != 0")),
    }
}

/// C source of a test driver: `driver <i>` runs case `i` and prints the
/// sentinel line, the return value and the observed globals.
pub fn generate_driver(spec: &DriverSpec, cases: &[TestCase]) -> Result<String, VerifyError> {
    let mut s = String::from("#include <stdio.h>\n#include <stdlib.h>\n");
    for r in &spec.records {
        let _ = writeln!(s, "{r};");
    }
    let mut sig = spec.sig.clone();
    if sig.name == "main" {
        sig.name = USER_MAIN.into();
    }
    let _ = writeln!(s, "{};", print_signature(&sig));
    for (name, ty) in &spec.globals {
        let _ = writeln!(s, "extern {};", ty.declare(name));
    }
    s.push_str("int main(int argc, char **argv) {\n  int which = argc > 1 ? atoi(argv[1]) : 0;\n  switch (which) {\n");
    for (i, c) in cases.iter().enumerate() {
        if c.args.len() != sig.params.len() && !sig.variadic {
            return Err(VerifyError::TestFile(format!(
                "case `{}` passes {} arguments to `{}` which takes {}",
                c.name,
                c.args.len(),
                spec.sig.name,
                sig.params.len()
            )));
        }
        let args: Vec<String> = c
            .args
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let ty = sig.params.get(j).map(|p| p.ty.clone()).unwrap_or(match v {
                    TestValue::Int(_) => Type::Int(IntKind::Long),
                    TestValue::Float(_) => Type::Double,
                });
                c_literal(*v, &ty)
            })
            .collect();
        let call = format!("{}({})", sig.name, args.join(", "));
        let _ = writeln!(s, "  case {i}: {{");
        if sig.ret == Type::Void {
            let _ = writeln!(s, "    {call};\n    fflush(stdout);\n    printf(\"\\n{SENTINEL}\\n\");");
        } else {
            let _ = writeln!(s, "    {} = {call};", sig.ret.declare("r"));
            let (fmt, val) = print_value("r", &sig.ret);
            let _ = writeln!(s, "    fflush(stdout);\n    printf(\"\\n{SENTINEL}\\nret {fmt}\\n\", {val});");
        }
        s.push_str("    break;\n  }\n");
    }
    s.push_str("  default:\n    return 99;\n  }\n");
    for (name, ty) in &spec.globals {
        match ty {
            Type::Array(elem, Some(n)) => {
                let _ = writeln!(s, "  printf(\"global {name}\");");
                let _ = writeln!(s, "  for (int i = 0; i < {n}; i++) {{");
                let (fmt, val) = print_value(&format!("{name}[i]"), elem);
                let _ = writeln!(s, "    printf(\" {fmt}\", {val});\n  }}\n  printf(\"\\n\");");
            }
            _ => {
                let (fmt, val) = print_value(name, ty);
                let _ = writeln!(s, "  printf(\"global {name} {fmt}\\n\", {val});");
            }
        }
    }
    s.push_str("  return 0;\n}\n");
    Ok(s)
}

/// Parsed output of one driver run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Observation {
    pub stdout: String,
    pub ret: Option<String>,
    pub globals: BTreeMap<String, Vec<String>>,
}

pub fn parse_observation(out: &str) -> Option<Observation> {
    let marker = format!("\n{SENTINEL}\n");
    let at = out.rfind(&marker)?;
    let mut obs = Observation {
        stdout: out[..at].to_string(),
        ..Observation::default()
    };
    for line in out[at + marker.len()..].lines() {
        if let Some(v) = line.strip_prefix("ret ") {
            obs.ret = Some(v.trim().to_string());
        } else if let Some(rest) = line.strip_prefix("global ") {
            let mut it = rest.split_whitespace();
            if let Some(name) = it.next() {
                obs.globals.insert(name.to_string(), it.map(str::to_string).collect());
            }
        }
    }
    Some(obs)
}

/// Parses a printed value back into a [`TestValue`].
pub fn parse_value(text: &str) -> Option<TestValue> {
    if let Ok(i) = text.parse::<i64>() {
        return Some(TestValue::Int(i));
    }
    if let Ok(u) = text.parse::<u64>() {
        return Some(TestValue::Int(u as i64));
    }
    match text {
        "nan" | "-nan" => Some(TestValue::Float(f64::NAN)),
        "inf" => Some(TestValue::Float(f64::INFINITY)),
        "-inf" => Some(TestValue::Float(f64::NEG_INFINITY)),
        _ => text.parse::<f64>().ok().map(TestValue::Float),
    }
}

fn values_match(expected: TestValue, actual: &str, cmp: Comparison) -> bool {
    let Some(actual) = parse_value(actual) else { return false };
    let as_f = |v: TestValue| match v {
        TestValue::Int(i) => i as f64,
        TestValue::Float(f) => f,
    };
    match (expected, actual) {
        (TestValue::Int(a), TestValue::Int(b)) => a == b,
        (e, a) => {
            let (x, y) = (as_f(e), as_f(a));
            if x.is_nan() || y.is_nan() {
                return x.is_nan() && y.is_nan();
            }
            match cmp {
                Comparison::Exact => x == y,
                Comparison::FloatTolerance(eps) => x == y || (x - y).abs() <= eps * x.abs().max(y.abs()),
            }
        }
    }
}

fn show(v: TestValue) -> String {
    match v {
        TestValue::Int(i) => i.to_string(),
        TestValue::Float(f) => format!("{f:?}"),
    }
}

/// Compares one observation with a case's expectations; `None` means pass.
pub fn compare_case(case: &TestCase, obs: &Observation) -> Option<String> {
    let mut problems = Vec::new();
    if let Some(exp) = case.expected_return {
        match &obs.ret {
            Some(a) if values_match(exp, a, case.comparison) => {}
            Some(a) => problems.push(format!("returned {a}, expected {}", show(exp))),
            None => problems.push(format!("returned nothing, expected {}", show(exp))),
        }
    }
    if let Some(exp) = &case.expected_stdout {
        if *exp != obs.stdout {
            problems.push(format!("stdout {:?}, expected {exp:?}", obs.stdout));
        }
    }
    for (name, exp) in &case.expected_globals {
        let actual = obs.globals.get(name).cloned().unwrap_or_default();
        let ok = exp.len() == actual.len() && exp.iter().zip(&actual).all(|(e, a)| values_match(*e, a, case.comparison));
        if !ok {
            let e: Vec<String> = exp.iter().map(|v| show(*v)).collect();
            problems.push(format!("global {name} = [{}], expected [{}]", actual.join(" "), e.join(" ")));
        }
    }
    (!problems.is_empty()).then(|| problems.join("; "))
}

fn defines_main(module: &str) -> bool {
    module.lines().any(|l| l.trim() == "main:")
}

/// Either a built executable or the report of the stage that failed.
pub enum Built {
    Exe(PathBuf),
    Failed(VerificationReport),
}

#[derive(Clone, Debug)]
pub struct Harness {
    pub toolchain: Toolchain,
    pub timeout: Duration,
}

impl Default for Harness {
    fn default() -> Self {
        Harness {
            toolchain: Toolchain::default(),
            timeout: Duration::from_secs(10),
        }
    }
}

impl Harness {
    fn driver_object(&self, driver: &str, dir: &Path) -> Result<PathBuf, VerifyError> {
        self.toolchain
            .compile_object(driver, dir, "driver", &["-O0", "-w"])
            .map_err(|e| VerifyError::Harness(format!("driver does not compile: {e}")))
    }

    /// Assembles `module` and links it with the driver inside `dir`.
    pub fn assemble_link(&self, module: &str, driver: &str, dir: &Path) -> Result<Built, VerifyError> {
        let obj = match self.toolchain.assemble(module, dir, "module") {
            Ok(o) => o,
            Err(ToolError::Failed { stderr, .. }) => {
                return Ok(Built::Failed(VerificationReport::fail(Stage::Assemble, ErrorClass::Semantic, stderr)))
            }
            Err(e) => return Err(e.into()),
        };
        if defines_main(module) {
            self.toolchain.redefine_symbol(&obj, "main", USER_MAIN)?;
        }
        let drv = self.driver_object(driver, dir)?;
        let exe = dir.join("test");
        match self.toolchain.link(&[drv, obj], &exe) {
            Ok(()) => Ok(Built::Exe(exe)),
            Err(ToolError::Failed { stderr, .. }) => {
                Ok(Built::Failed(VerificationReport::fail(Stage::Link, ErrorClass::Semantic, stderr)))
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Runs every case in its own process.
    pub fn observe(&self, exe: &Path, n: usize) -> Result<Vec<Result<Observation, String>>, VerifyError> {
        if !exe.exists() {
            return Err(VerifyError::Harness(format!("missing executable {}", exe.display())));
        }
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let run = run_with_timeout(exe, &[i.to_string()], self.timeout)?;
            let r = match run.state {
                ExitState::TimedOut => Err(format!("timed out after {:?}", self.timeout)),
                ExitState::Signal => Err(format!("killed by a signal\n{}", run.stderr)),
                ExitState::Code(c) => parse_observation(&run.stdout)
                    .ok_or_else(|| format!("exited with status {c} before returning\n{}", run.stderr)),
            };
            out.push(r);
        }
        Ok(out)
    }

    pub fn run_tests(&self, exe: &Path, tests: &[TestCase]) -> Result<VerificationReport, VerifyError> {
        let results = self.observe(exe, tests.len())?;
        let mut runtime = Vec::new();
        let mut behavioral = Vec::new();
        for (case, r) in tests.iter().zip(results) {
            match r {
                Err(detail) => runtime.push(CaseFailure {
                    case: case.name.clone(),
                    detail,
                }),
                Ok(obs) => {
                    if let Some(detail) = compare_case(case, &obs) {
                        behavioral.push(CaseFailure {
                            case: case.name.clone(),
                            detail,
                        });
                    }
                }
            }
        }
        Ok(if !runtime.is_empty() {
            let mut r = VerificationReport::fail(Stage::Run, ErrorClass::Runtime, runtime[0].detail.clone());
            r.failed_cases = runtime;
            r
        } else if !behavioral.is_empty() {
            let mut r = VerificationReport::fail(Stage::Compare, ErrorClass::Behavioral, String::new());
            r.failed_cases = behavioral;
            r
        } else {
            VerificationReport::pass()
        })
    }

    /// Full check of an assembly module against a test file.
    pub fn verify_module(&self, module: &str, spec: &DriverSpec, tests: &[TestCase]) -> Result<VerificationReport, VerifyError> {
        let dir = tempfile::tempdir()?;
        let driver = generate_driver(spec, tests)?;
        match self.assemble_link(module, &driver, dir.path())? {
            Built::Failed(r) => Ok(r),
            Built::Exe(exe) => self.run_tests(&exe, tests),
        }
    }

    /// Observes each case against an assembly module; a build failure comes back as its report.
    pub fn observe_module(
        &self,
        module: &str,
        spec: &DriverSpec,
        cases: &[TestCase],
    ) -> Result<Result<Vec<Result<Observation, String>>, VerificationReport>, VerifyError> {
        let dir = tempfile::tempdir()?;
        let driver = generate_driver(spec, cases)?;
        match self.assemble_link(module, &driver, dir.path())? {
            Built::Failed(r) => Ok(Err(r)),
            Built::Exe(exe) => Ok(Ok(self.observe(&exe, cases.len())?)),
        }
    }

    /// Compiles C source with the system compiler (-O0 -fwrapv) and observes
    /// each argument list; the basis for expected outputs.
    pub fn reference_run(&self, c_source: &str, spec: &DriverSpec, cases: &[TestCase]) -> Result<Vec<Result<Observation, String>>, VerifyError> {
        let dir = tempfile::tempdir()?;
        let obj = self
            .toolchain
            .compile_object(c_source, dir.path(), "reference", &["-O0", "-fwrapv", "-w"])
            .map_err(|e| VerifyError::Harness(format!("reference does not compile: {e}")))?;
        if c_source.contains("main") {
            self.toolchain.redefine_symbol(&obj, "main", USER_MAIN)?;
        }
        let driver = generate_driver(spec, cases)?;
        let drv = self.driver_object(&driver, dir.path())?;
        let exe = dir.path().join("reference");
        self.toolchain.link(&[drv, obj], &exe)?;
        self.observe(&exe, cases.len())
    }
}

/// Fills expectations of argument-only cases from observations.
pub fn expectations_from(cases: &[TestCase], spec: &DriverSpec, observed: &[Result<Observation, String>]) -> Vec<TestCase> {
    cases
        .iter()
        .zip(observed)
        .filter_map(|(c, o)| {
            let o = o.as_ref().ok()?;
            let mut c = c.clone();
            if spec.sig.ret != Type::Void {
                c.expected_return = o.ret.as_deref().and_then(parse_value);
            }
            c.expected_stdout = Some(o.stdout.clone());
            for (name, vals) in &o.globals {
                let vals: Option<Vec<TestValue>> = vals.iter().map(|v| parse_value(v)).collect();
                c.expected_globals.insert(name.clone(), vals?);
            }
            Some(c)
        })
        .collect()
}

/// One round of the repair loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub number: u32,
    pub module: Option<String>,
    pub report: VerificationReport,
}

/// Failure to produce a module that the loop cannot recover from by retrying.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum AttemptError {
    /// Reported back to the translator as a semantic error.
    #[error("{0}")]
    Retryable(String),
    #[error("{0}")]
    Fatal(String),
}

#[derive(Debug, thiserror::Error)]
pub enum RepairError {
    #[error("no passing translation after {k} attempts ({} failure)", attempts.last().map(|a| a.report.error_class).unwrap_or(ErrorClass::None))]
    ExhaustedRetries { k: u32, attempts: Vec<Attempt> },
    #[error("translation failed: {message}")]
    Translation { message: String, attempts: Vec<Attempt> },
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

impl RepairError {
    pub fn attempts(&self) -> &[Attempt] {
        match self {
            RepairError::ExhaustedRetries { attempts, .. } | RepairError::Translation { attempts, .. } => attempts,
            RepairError::Verify(_) => &[],
        }
    }
}

#[derive(Clone, Debug)]
pub struct RepairOutcome {
    pub module: String,
    pub attempts: Vec<Attempt>,
}

/// Produce, verify, and retry with feedback until a pass or `k` attempts.
pub fn repair_loop<P, V>(k: u32, mut produce: P, mut verify: V) -> Result<RepairOutcome, RepairError>
where
    P: FnMut(Option<&ErrorFeedback>) -> Result<String, AttemptError>,
    V: FnMut(&str) -> Result<VerificationReport, VerifyError>,
{
    let k = k.max(1);
    let mut attempts: Vec<Attempt> = Vec::new();
    let mut feedback: Option<ErrorFeedback> = None;
    for number in 1..=k {
        let (module, report) = match produce(feedback.as_ref()) {
            Ok(m) => {
                let r = verify(&m)?;
                (Some(m), r)
            }
            Err(AttemptError::Retryable(msg)) => (None, VerificationReport::fail(Stage::Assemble, ErrorClass::Semantic, msg)),
            Err(AttemptError::Fatal(message)) => return Err(RepairError::Translation { message, attempts }),
        };
        let passed = report.passed();
        feedback = Some(ErrorFeedback::from_report(&report, module.as_deref().unwrap_or(""), number));
        attempts.push(Attempt { number, module, report });
        if passed {
            let module = attempts.last().and_then(|a| a.module.clone()).unwrap_or_default();
            return Ok(RepairOutcome { module, attempts });
        }
    }
    Err(RepairError::ExhaustedRetries { k, attempts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;

    #[test]
    fn test_file_roundtrip() {
        let f = parse_tests(
            r#"
function = "add"
[[cases]]
name = "small"
args = [2, 3]
expected_return = 5
[[cases]]
name = "half"
args = [1.5, 2]
expected_return = 3.5
comparison = "exact"
"#,
        )
        .unwrap();
        assert_eq!(f.cases[0].args, vec![TestValue::Int(2), TestValue::Int(3)]);
        assert_eq!(f.cases[0].comparison, Comparison::FloatTolerance(DEFAULT_EPSILON));
        assert_eq!(f.cases[1].expected_return, Some(TestValue::Float(3.5)));
        assert_eq!(f.cases[1].comparison, Comparison::Exact);
        assert!(parse_tests("function = \"f\"\n[[cases]]\nname = \"x\"\n").is_err());
    }

    #[test]
    fn tolerance_is_relative() {
        let c = Comparison::FloatTolerance(1e-9);
        assert!(values_match(TestValue::Float(1e12), "1000000000000.0001", c));
        assert!(!values_match(TestValue::Float(1.0), "1.00001", c));
        assert!(!values_match(TestValue::Float(1.0), "1.0000000000000002", Comparison::Exact));
        assert!(values_match(TestValue::Int(-3), "-3", Comparison::Exact));
        assert!(values_match(TestValue::Int(-1), "18446744073709551615", Comparison::Exact));
    }

    #[test]
    fn feedback_keeps_the_tail() {
        let long = format!("{}END", "x".repeat(5000));
        let r = VerificationReport::fail(Stage::Assemble, ErrorClass::Semantic, long);
        let fb = ErrorFeedback::from_report(&r, "", 0);
        assert_eq!(fb.diagnostics.chars().count(), FEEDBACK_LIMIT);
        assert!(fb.diagnostics.ends_with("END"));
        assert_eq!(fb.attempt, 1);
    }

    #[test]
    fn excerpt_points_at_the_reported_line() {
        let module = "a\nb\nc\nd\ne\nf\n";
        let ex = excerpt_for("/tmp/x/module.s:4: Error: bad", module);
        assert!(ex.contains("    4: d") && ex.contains("    2: b") && !ex.contains("    1: a"), "{ex}");
    }

    #[test]
    fn driver_mentions_every_case() {
        let ast = parse_source("int g; double h[2]; long f(int a, double b) { return a; }").unwrap();
        let spec = DriverSpec::from_ast(&ast, "f").unwrap();
        let cases = vec![
            TestCase {
                name: "a".into(),
                args: vec![TestValue::Int(1), TestValue::Float(0.5)],
                expected_return: Some(TestValue::Int(1)),
                ..TestCase::default()
            };
            2
        ];
        let d = generate_driver(&spec, &cases).unwrap();
        assert!(d.contains("case 1:") && d.contains("f(((int)1LL), ((double)5e-1))"), "{d}");
        assert!(d.contains("extern int g;") && d.contains("extern double h[2];"));
        let mut bad = cases[0].clone();
        bad.args.pop();
        assert!(generate_driver(&spec, &[bad]).is_err());
    }

    #[test]
    fn observation_parsing() {
        let o = parse_observation("hello\n@@legoc-result\nret 5\nglobal g 1 2\n").unwrap();
        assert_eq!(o.stdout, "hello");
        assert_eq!(o.ret.as_deref(), Some("5"));
        assert_eq!(o.globals["g"], vec!["1", "2"]);
        assert!(parse_observation("crashed").is_none());
    }

    #[test]
    fn repair_loop_counts_attempts() {
        let pass = |m: &str| {
            Ok(if m == "good" {
                VerificationReport::pass()
            } else {
                VerificationReport::fail(Stage::Assemble, ErrorClass::Semantic, "bad".into())
            })
        };
        let out = repair_loop(5, |fb| Ok(if fb.is_some() { "good" } else { "bad" }.to_string()), pass).unwrap();
        assert_eq!(out.attempts.len(), 2);
        match repair_loop(5, |_| Ok("bad".to_string()), pass) {
            Err(RepairError::ExhaustedRetries { k, attempts }) => {
                assert_eq!(k, 5);
                assert_eq!(attempts.len(), 5);
                assert_eq!(attempts[4].report.error_class, ErrorClass::Semantic);
            }
            other => panic!("{other:?}"),
        }
        let fatal = repair_loop(5, |_| Err(AttemptError::Fatal("nope".into())), pass);
        assert!(matches!(fatal, Err(RepairError::Translation { .. })));
    }
}
