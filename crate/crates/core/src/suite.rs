//! Generated programs and fixtures that exercise composability end to end.
//!
//! The generator emits goto-free programs in the supported subset whose loops
//! have constant trip counts and whose arithmetic avoids undefined behavior
//! other than signed wraparound (the reference compiler runs with `-fwrapv`).

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::frontend::{parse_source, Ast, FrontendError};
use crate::interp::{run_function, InterpError, Value};
use crate::pipeline::{Compiler, PipelineConfig, PipelineError};
use crate::splitter::{
    check_composability, split_parts, verify_split_integrity, ControlPart, NeverSplit, RandomPolicy, SplitConfig,
    SplitPolicy,
};
use crate::translation::{Mode, RefBackend};
use crate::verify::{
    expectations_from, DriverSpec, Harness, TestCase, TestFile, TestValue, VerificationReport, VerifyError,
};

/// Entry point of every generated program.
pub const ENTRY: &str = "f";
/// Step bound for the interpreter termination check.
pub const STEP_LIMIT: u64 = 1_000_000;
/// IO tests per generated program.
pub const CASES_PER_PROGRAM: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("interpreter: {0}")]
    Interp(#[from] InterpError),
    #[error("reference build failed: {0}")]
    Reference(String),
}

const INT_TYPES: [&str; 7] = ["int", "long", "unsigned", "unsigned long", "short", "unsigned char", "char"];

struct Var {
    name: String,
    writable: bool,
}

struct Gen {
    rng: ChaCha8Rng,
    budget: isize,
    vars: Vec<Var>,
    counters: Vec<String>,
    free_counters: usize,
    loop_depth: usize,
    in_switch: usize,
    helper: bool,
    nest: usize,
}

impl Gen {
    fn pick_var(&mut self, writable: bool) -> String {
        let pool: Vec<&Var> = self.vars.iter().filter(|v| !writable || v.writable).collect();
        pool.choose(&mut self.rng).map(|v| v.name.clone()).unwrap_or_else(|| "a".into())
    }

    fn leaf(&mut self) -> String {
        match self.rng.gen_range(0..10) {
            0..=5 => self.pick_var(false),
            6 if !self.counters.is_empty() => self.counters.choose(&mut self.rng).cloned().unwrap_or_default(),
            7 => format!("ga[{} & 3]", self.pick_var(false)),
            _ => self.rng.gen_range(0..100).to_string(),
        }
    }

    fn expr(&mut self, depth: usize) -> String {
        if depth == 0 || self.rng.gen_bool(0.3) {
            return self.leaf();
        }
        let d = depth - 1;
        match self.rng.gen_range(0..14) {
            0..=4 => {
                let op = ["+", "-", "*", "&", "|", "^"].choose(&mut self.rng).copied().unwrap_or("+");
                format!("({} {op} {})", self.expr(d), self.expr(d))
            }
            5 => {
                let op = ["<", "<=", "==", "!=", ">", ">="].choose(&mut self.rng).copied().unwrap_or("<");
                format!("({} {op} {})", self.expr(d), self.expr(d))
            }
            6 => {
                let op = if self.rng.gen_bool(0.5) { "&&" } else { "||" };
                format!("({} {op} {})", self.expr(d), self.expr(d))
            }
            7 => format!("((unsigned)({}) << {})", self.expr(d), self.rng.gen_range(0..16)),
            8 => format!("({} >> {})", self.expr(d), self.rng.gen_range(0..16)),
            9 => {
                let op = if self.rng.gen_bool(0.5) { "/" } else { "%" };
                format!("({} {op} (({} & 7) + 1))", self.expr(d), self.expr(d))
            }
            10 => format!("({} ? {} : {})", self.expr(d), self.expr(d), self.expr(d)),
            11 => {
                let t = INT_TYPES.choose(&mut self.rng).copied().unwrap_or("int");
                format!("(({t})({}))", self.expr(d))
            }
            12 if self.helper => format!("h0({})", self.expr(d)),
            12 => format!("(-{})", self.expr(d)),
            _ => format!("(!{})", self.expr(d)),
        }
    }

    fn cond(&mut self) -> String {
        if self.rng.gen_bool(0.15) {
            return format!("(gd > {}.5)", self.rng.gen_range(0..40));
        }
        self.expr(2)
    }

    fn block(&mut self, out: &mut String, indent: usize, max: usize) {
        let n = self.rng.gen_range(1..=max.max(1));
        for _ in 0..n {
            if self.budget <= 0 {
                break;
            }
            self.stmt(out, indent);
        }
    }

    fn take_counter(&mut self) -> Option<String> {
        let i = self.counters.len();
        if i >= self.free_counters {
            return None;
        }
        let name = format!("i{i}");
        self.counters.push(name.clone());
        Some(name)
    }

    fn stmt(&mut self, out: &mut String, indent: usize) {
        self.budget -= 1;
        let pad = "    ".repeat(indent);
        let structured = self.nest < 3 && self.budget > 0;
        let choice = self.rng.gen_range(0..20);
        match choice {
            0..=2 if structured => {
                let c = self.cond();
                let _ = writeln!(out, "{pad}if ({c}) {{");
                self.nested(out, indent, 3);
                if self.rng.gen_bool(0.5) {
                    let _ = writeln!(out, "{pad}}} else {{");
                    self.nested(out, indent, 3);
                }
                let _ = writeln!(out, "{pad}}}");
            }
            3 | 4 if structured => {
                let Some(i) = self.take_counter() else { return self.simple(out, &pad) };
                let k = self.rng.gen_range(1..=6);
                let _ = writeln!(out, "{pad}for ({i} = 0; {i} < {k}; {i}++) {{");
                self.looped(out, indent);
                let _ = writeln!(out, "{pad}}}");
            }
            5 if structured => {
                let Some(w) = self.take_counter() else { return self.simple(out, &pad) };
                let k = self.rng.gen_range(1..=6);
                let _ = writeln!(out, "{pad}{w} = 0;\n{pad}while ({w} < {k}) {{\n{pad}    {w}++;");
                self.looped(out, indent);
                let _ = writeln!(out, "{pad}}}");
            }
            6 if structured => {
                let Some(w) = self.take_counter() else { return self.simple(out, &pad) };
                let k = self.rng.gen_range(1..=6);
                let _ = writeln!(out, "{pad}{w} = 0;\n{pad}do {{\n{pad}    {w}++;");
                self.looped(out, indent);
                let _ = writeln!(out, "{pad}}} while ({w} < {k});");
            }
            7 if structured => {
                let e = self.expr(2);
                let _ = writeln!(out, "{pad}switch (({e}) & 3) {{");
                let mut labels = vec!["case 0", "case 1", "case 2", "case 3", "default"];
                labels.shuffle(&mut self.rng);
                labels.truncate(self.rng.gen_range(1..=4));
                self.in_switch += 1;
                for l in labels {
                    let _ = writeln!(out, "{pad}{l}:");
                    let before = out.len();
                    self.nested(out, indent, 2);
                    if out.len() == before || self.rng.gen_bool(0.6) {
                        let _ = writeln!(out, "{pad}    break;");
                    }
                }
                self.in_switch -= 1;
                let _ = writeln!(out, "{pad}}}");
            }
            8 if self.loop_depth > 0 => {
                let c = self.cond();
                let jump = if self.in_switch == 0 && self.rng.gen_bool(0.5) { "continue" } else { "break" };
                let _ = writeln!(out, "{pad}if ({c}) {{\n{pad}    {jump};\n{pad}}}");
            }
            _ => self.simple(out, &pad),
        }
    }

    fn nested(&mut self, out: &mut String, indent: usize, max: usize) {
        self.nest += 1;
        self.block(out, indent + 1, max);
        self.nest -= 1;
    }

    fn looped(&mut self, out: &mut String, indent: usize) {
        let switch = std::mem::take(&mut self.in_switch);
        self.loop_depth += 1;
        self.nested(out, indent, 3);
        self.loop_depth -= 1;
        self.in_switch = switch;
    }

    fn simple(&mut self, out: &mut String, pad: &str) {
        match self.rng.gen_range(0..8) {
            0 => {
                let v = self.pick_var(true);
                let op = ["+=", "-=", "^=", "|=", "&="].choose(&mut self.rng).copied().unwrap_or("+=");
                let e = self.expr(2);
                let _ = writeln!(out, "{pad}{v} {op} {e};");
            }
            1 => {
                let v = self.pick_var(true);
                let op = if self.rng.gen_bool(0.5) { "++" } else { "--" };
                let _ = writeln!(out, "{pad}{v}{op};");
            }
            2 => {
                let (i, e) = (self.expr(1), self.expr(2));
                let _ = writeln!(out, "{pad}ga[{i} & 3] = {e};");
            }
            3 => {
                let e = self.expr(1);
                let _ = writeln!(out, "{pad}gd = gd * 0.5 + (double)(({e}) & 1023);");
            }
            _ => {
                let v = self.pick_var(true);
                let e = self.expr(3);
                let _ = writeln!(out, "{pad}{v} = {e};");
            }
        }
    }
}

/// Deterministic goto-free program with entry `long f(int a, int b)`.
/// `budget` bounds the number of generated statements.
pub fn gen_subset_program(seed: u64, budget: usize) -> String {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        budget: budget as isize,
        vars: Vec::new(),
        counters: Vec::new(),
        free_counters: 6,
        loop_depth: 0,
        in_switch: 0,
        helper: false,
        nest: 0,
    };
    let mut src = String::new();
    let nglobals = g.rng.gen_range(1..=3);
    for i in 0..nglobals {
        let t = INT_TYPES.choose(&mut g.rng).copied().unwrap_or("int");
        let init = g.rng.gen_range(0..50);
        let _ = writeln!(src, "{t} g{i} = {init};");
        g.vars.push(Var {
            name: format!("g{i}"),
            writable: true,
        });
    }
    let _ = writeln!(src, "int ga[4] = {{ 1, 2, 3, 4 }};\ndouble gd = 1.5;\n");
    g.helper = g.rng.gen_bool(0.5);
    if g.helper {
        let _ = writeln!(src, "int h0(int x) {{\n    return x * 3 + (x >> 2) + g0;\n}}\n");
    }
    g.vars.push(Var {
        name: "a".into(),
        writable: true,
    });
    g.vars.push(Var {
        name: "b".into(),
        writable: false,
    });
    let mut body = String::new();
    let nlocals = g.rng.gen_range(1..=4);
    let mut locals = Vec::new();
    for i in 0..nlocals {
        let t = INT_TYPES.choose(&mut g.rng).copied().unwrap_or("int");
        let init = g.expr(1);
        let _ = writeln!(body, "    {t} l{i} = {init};");
        locals.push(format!("l{i}"));
        g.vars.push(Var {
            name: format!("l{i}"),
            writable: true,
        });
    }
    let _ = writeln!(body, "    int i0 = 0, i1 = 0, i2 = 0, i3 = 0, i4 = 0, i5 = 0;");
    let mut stmts = String::new();
    while g.budget > 0 {
        g.stmt(&mut stmts, 1);
    }
    body.push_str(&stmts);
    let ret = locals.iter().map(|l| format!("(long){l}")).collect::<Vec<_>>().join(" + ");
    let _ = write!(src, "long f(int a, int b) {{\n{body}    return {ret} + (long)gd;\n}}\n");
    src
}

/// Argument lists for the generated entry point, mixing small and extreme values.
pub fn gen_cases(seed: u64, n: usize) -> Vec<TestCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ca5e);
    let pick = |rng: &mut ChaCha8Rng| -> i64 {
        match rng.gen_range(0..8) {
            0 => *[0, 1, -1, i32::MAX as i64, i32::MIN as i64].choose(rng).unwrap_or(&0),
            1 => rng.gen_range(i32::MIN..=i32::MAX) as i64,
            _ => rng.gen_range(-1000..=1000),
        }
    };
    (0..n)
        .map(|i| TestCase {
            name: format!("case{i}"),
            args: vec![TestValue::Int(pick(&mut rng)), TestValue::Int(pick(&mut rng))],
            ..TestCase::default()
        })
        .collect()
}

/// Runs every case in the interpreter with a step bound.
pub fn check_terminates(ast: &Ast, function: &str, cases: &[TestCase], limit: u64) -> Result<u64, SuiteError> {
    let mut worst = 0;
    for c in cases {
        let args: Vec<Value> = c
            .args
            .iter()
            .map(|v| match v {
                TestValue::Int(i) => Value::int(*i),
                TestValue::Float(x) => Value::Double(*x),
            })
            .collect();
        worst = worst.max(run_function(ast, function, &args, limit)?.steps);
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub seed: u64,
    pub budget: usize,
    pub expected_pass: bool,
}

/// Seed corpus: which (seed, budget) programs to generate and whether they should pass.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedManifest {
    #[serde(default, rename = "program")]
    pub programs: Vec<ManifestEntry>,
}

impl SeedManifest {
    /// `count` seeds starting at zero with budgets cycling through 4..=40.
    pub fn standard(count: usize) -> SeedManifest {
        SeedManifest {
            programs: (0..count as u64)
                .map(|seed| ManifestEntry {
                    seed,
                    budget: 4 + (seed as usize * 7) % 37,
                    expected_pass: true,
                })
                .collect(),
        }
    }

    pub fn parse(text: &str) -> Result<SeedManifest, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }
}

/// A generated program together with IO tests taken from the system compiler.
#[derive(Clone, Debug)]
pub struct GeneratedCase {
    pub entry: ManifestEntry,
    pub source: String,
    pub ast: Ast,
    pub tests: TestFile,
}

/// Generates the program for `entry` and records expected outputs from the reference build.
pub fn materialize(entry: ManifestEntry, harness: &Harness) -> Result<GeneratedCase, SuiteError> {
    let source = gen_subset_program(entry.seed, entry.budget);
    let ast = parse_source(&source)?;
    let cases = gen_cases(entry.seed, CASES_PER_PROGRAM);
    check_terminates(&ast, ENTRY, &cases, STEP_LIMIT)?;
    let spec = DriverSpec::from_ast(&ast, ENTRY)?;
    let observed = harness.reference_run(&source, &spec, &cases)?;
    let tests = expectations_from(&cases, &spec, &observed);
    if tests.len() != cases.len() {
        return Err(SuiteError::Reference(format!("seed {}: reference run failed", entry.seed)));
    }
    Ok(GeneratedCase {
        entry,
        source,
        ast,
        tests: TestFile {
            function: ENTRY.into(),
            cases: tests,
        },
    })
}

/// Outcome of one generated program under the split pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgramResult {
    pub seed: u64,
    pub budget: usize,
    pub composable: bool,
    pub integrity: bool,
    pub parts: usize,
    pub report: VerificationReport,
}

impl ProgramResult {
    pub fn passed(&self) -> bool {
        self.composable && self.integrity && self.report.passed()
    }
}

fn lego_compiler<'a>(ast: &Ast, policy: &'a dyn SplitPolicy) -> Compiler<'a> {
    Compiler::new(
        ast,
        PipelineConfig {
            mode: Mode::Lego,
            split: SplitConfig::default(),
        },
        &RefBackend,
        policy,
    )
}

/// Compiles a generated program in split mode with random split decisions and
/// checks it against its IO tests.
pub fn check_program(case: &GeneratedCase, harness: &Harness) -> Result<ProgramResult, SuiteError> {
    let policy = RandomPolicy::new(case.entry.seed);
    let compiler = lego_compiler(&case.ast, &policy);
    let f = compiler
        .program
        .ast
        .function(ENTRY)
        .ok_or_else(|| PipelineError::NoFunction(ENTRY.into()))?;
    let composable = check_composability(f).composable;
    let fns = compiler.compile_all(None)?;
    let integrity = fns.iter().all(|a| {
        a.parts.is_empty()
            || compiler
                .program
                .ast
                .function(&a.asm.name)
                .is_some_and(|f| verify_split_integrity(f, &a.parts))
    });
    let module = compiler.module(&fns)?;
    let spec = DriverSpec::from_ast(&case.ast, ENTRY)?;
    let report = harness.verify_module(&module, &spec, &case.tests.cases)?;
    Ok(ProgramResult {
        seed: case.entry.seed,
        budget: case.entry.budget,
        composable,
        integrity,
        parts: fns.iter().map(|a| a.parts.len()).sum(),
        report,
    })
}

/// True when `candidate` reproduces every observation `reference` makes.
pub fn same_behavior(
    harness: &Harness,
    spec: &DriverSpec,
    cases: &[TestCase],
    reference: &str,
    candidate: &str,
) -> Result<bool, SuiteError> {
    let observed = harness
        .observe_module(reference, spec, cases)?
        .map_err(|r| SuiteError::Reference(r.diagnostics))?;
    let tests = expectations_from(cases, spec, &observed);
    if tests.len() != cases.len() {
        return Err(SuiteError::Reference("reference module failed at run time".into()));
    }
    Ok(harness.verify_module(candidate, spec, &tests)?.passed())
}

fn module_in(ast: &Ast, mode: Mode, policy: &dyn SplitPolicy) -> Result<String, SuiteError> {
    let c = Compiler::new(
        ast,
        PipelineConfig {
            mode,
            split: SplitConfig::default(),
        },
        &RefBackend,
        policy,
    );
    Ok(c.compile_module(None)?)
}

/// Rebuilt part translations against the whole-function translation, on the
/// program's own cases.
pub fn oracle_equivalence(case: &GeneratedCase, harness: &Harness) -> Result<bool, SuiteError> {
    let policy = RandomPolicy::new(case.entry.seed.wrapping_add(1));
    let whole = module_in(&case.ast, Mode::Direct, &NeverSplit)?;
    let split = module_in(&case.ast, Mode::Lego, &policy)?;
    let spec = DriverSpec::from_ast(&case.ast, ENTRY)?;
    same_behavior(harness, &spec, &case.tests.cases, &whole, &split)
}

const BASIC_STATE: &str = "long a = 5;\nlong b = 7;\nlong c = 11;\nunsigned u = 3;\n";

/// Random basic statement over the globals `a`, `b`, `c`, `u` and parameter `x`.
pub fn random_basic_statement(rng: &mut impl Rng) -> String {
    let vars = ["a", "b", "c", "u", "x"];
    let operand = |rng: &mut dyn rand::RngCore| -> String {
        if rng.gen_bool(0.7) {
            vars[rng.gen_range(0..vars.len())].to_string()
        } else {
            rng.gen_range(0..20).to_string()
        }
    };
    let lhs = vars[rng.gen_range(0..vars.len())];
    let ops = ["+", "-", "*", "&", "|", "^"];
    let (p, q, r) = (operand(rng), operand(rng), operand(rng));
    let (o1, o2) = (ops[rng.gen_range(0..ops.len())], ops[rng.gen_range(0..ops.len())]);
    match rng.gen_range(0..7) {
        0 => ";".into(),
        1 => format!("{lhs}++;"),
        2 => format!("{lhs} {o1}= {p};"),
        3 => format!("{lhs} = {p} < {q} ? {r} : {p};"),
        4 => format!("{lhs} = ({p} {o1} {q}) >> {};", rng.gen_range(0..8)),
        _ => format!("{lhs} = {p} {o1} {q} {o2} {r};"),
    }
}

/// For each pair, translating `s1 s2` as one part behaves like translating
/// `s1` and `s2` separately and concatenating the results.
pub fn theorem_check_basic_statements(pairs: &[(String, String)], harness: &Harness) -> Result<bool, SuiteError> {
    for (s1, s2) in pairs {
        let src = format!("{BASIC_STATE}void t(long x) {{\n    {s1}\n    {s2}\n}}\n");
        let ast = parse_source(&src)?;
        let compiler = lego_compiler(&ast, &NeverSplit);
        let f = compiler
            .program
            .ast
            .function("t")
            .ok_or_else(|| PipelineError::NoFunction("t".into()))?;
        let joined = split_parts(f, &SplitConfig::default(), &NeverSplit).map_err(PipelineError::from)?;
        let separate = one_part_per_statement(&joined);
        let globals = compiler.module(&[compiler.compile_with_parts("t", &joined)?])?;
        let parts = compiler.module(&[compiler.compile_with_parts("t", &separate)?])?;
        let spec = DriverSpec::from_ast(&ast, "t")?;
        let cases: Vec<TestCase> = [-3, 0, 9, 1 << 20]
            .iter()
            .enumerate()
            .map(|(i, x)| TestCase {
                name: format!("x{i}"),
                args: vec![TestValue::Int(*x)],
                ..TestCase::default()
            })
            .collect();
        if !same_behavior(harness, &spec, &cases, &globals, &parts)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn one_part_per_statement(parts: &[ControlPart]) -> Vec<ControlPart> {
    let mut out = Vec::new();
    for p in parts {
        if p.stmts.len() <= 1 {
            out.push(p.clone());
            continue;
        }
        for s in &p.stmts {
            out.push(ControlPart {
                stmts: vec![s.clone()],
                payload: crate::frontend::printer::print_stmt(s),
                ..p.clone()
            });
        }
    }
    for (i, p) in out.iter_mut().enumerate() {
        p.id = i;
    }
    out
}

/// One basic control block wrapped in `long f(int n)`, with inputs.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: &'static str,
    pub source: String,
    pub inputs: Vec<i64>,
}

fn fixture(name: &'static str, body: &str) -> Fixture {
    Fixture {
        name,
        source: format!("long f(int n) {{\n    long s = 0;\n    int i = 0, j = 0;\n{body}\n    return s;\n}}\n"),
        inputs: vec![-2, 0, 1, 3, 7, 12],
    }
}

/// Fixtures for every control structure kind, including switch fall-through
/// and a doubly nested loop whose inner loop breaks.
pub fn control_fixtures() -> Vec<Fixture> {
    vec![
        fixture("if_else", "    if (n > 3) { s = n * 2; } else { s = -n; }"),
        fixture("for", "    for (i = 0; i < n; i++) { s += i * i; }"),
        fixture("while", "    while (i < 10) { i++; s += i; }"),
        fixture("do_while", "    do { s += n; i++; } while (i < n);"),
        fixture(
            "switch_fallthrough",
            "    switch (n & 3) {\n    case 0: s += 1;\n    case 1: s += 10; break;\n    case 2: s += 100;\n    default: s += 1000;\n    }",
        ),
        fixture(
            "nested_break",
            "    for (i = 0; i < n; i++) {\n        for (j = 0; j < 10; j++) {\n            if (j == i) break;\n            s += j;\n        }\n        if (i == 5) continue;\n        s += 100;\n    }",
        ),
    ]
}

/// Split-translate-rebuild against whole-function translation on each fixture.
pub fn theorem_check_control_structures(fixtures: &[Fixture], harness: &Harness) -> Result<bool, SuiteError> {
    let always = crate::splitter::AlwaysSplit;
    for fx in fixtures {
        let ast = parse_source(&fx.source)?;
        let whole = module_in(&ast, Mode::Direct, &NeverSplit)?;
        let split = module_in(&ast, Mode::Lego, &always)?;
        let spec = DriverSpec::from_ast(&ast, ENTRY)?;
        let cases: Vec<TestCase> = fx
            .inputs
            .iter()
            .enumerate()
            .map(|(i, n)| TestCase {
                name: format!("{}_{i}", fx.name),
                args: vec![TestValue::Int(*n)],
                ..TestCase::default()
            })
            .collect();
        if !same_behavior(harness, &spec, &cases, &whole, &split)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(gen_subset_program(42, 20), gen_subset_program(42, 20));
        assert_ne!(gen_subset_program(1, 20), gen_subset_program(2, 20));
    }

    #[test]
    fn generated_programs_parse_terminate_and_are_composable() {
        for seed in 0..60 {
            let src = gen_subset_program(seed, 4 + (seed as usize % 30));
            let ast = parse_source(&src).unwrap_or_else(|e| panic!("seed {seed}: {e}\n{src}"));
            assert!(!src.contains("goto"));
            let f = ast.function(ENTRY).unwrap();
            assert!(check_composability(f).composable, "seed {seed}");
            check_terminates(&ast, ENTRY, &gen_cases(seed, 10), STEP_LIMIT)
                .unwrap_or_else(|e| panic!("seed {seed}: {e}\n{src}"));
        }
    }

    #[test]
    fn manifest_round_trips_through_toml() {
        let m = SeedManifest::standard(3);
        assert_eq!(SeedManifest::parse(&m.to_toml()).unwrap(), m);
        assert!(SeedManifest::parse("").unwrap().programs.is_empty());
    }
}
