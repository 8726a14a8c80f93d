//! End-to-end compilation in one of the three modes, with verification and repair.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::frontend::ast::{Ast, FunctionDef, Item};
use crate::frontend::cfg::build_cfg;
use crate::frontend::features::analyze_features_in;
use crate::frontend::printer::{print_ast, print_function, print_signature};
use crate::frontend::typeck::{promote, TypeEnv};
use crate::frontend::types::Type;
use crate::mapping::{allocate_frame, map_globals, MappingError, SymbolTable};
use crate::rebuild::{emit_module, function_from_fragment, rebuild, FunctionAsm, RebuildError};
use crate::splitter::{
    check_composability, dump_parts, part_source, split_parts, verify_split_integrity, ControlPart, PartKind,
    PartRole, SplitConfig, SplitError, SplitPolicy,
};
use crate::transforms::{decompose_complex_expressions, rename_in};
use crate::translation::{
    translate, Backend, Mode, PartContext, Program, RefBackend, TranslateError, TranslationRequest,
};
use crate::verify::{repair_loop, AttemptError, DriverSpec, ErrorFeedback, Harness, RepairError, RepairOutcome, TestCase};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error("split of `{0}` does not recombine into the original function")]
    Integrity(String),
    #[error("translating `{0}`: {1}")]
    Translate(String, TranslateError),
    #[error("rebuilding `{0}`: {1}")]
    Rebuild(String, RebuildError),
    #[error("no function `{0}`")]
    NoFunction(String),
}

impl PipelineError {
    /// Whether a fresh translation attempt could succeed.
    pub fn retryable(&self) -> bool {
        match self {
            PipelineError::Translate(_, e) => matches!(
                e,
                TranslateError::Backend(_) | TranslateError::EmptyOutput | TranslateError::Extraction
            ),
            PipelineError::Rebuild(..) => true,
            _ => false,
        }
    }
}

impl From<PipelineError> for AttemptError {
    fn from(e: PipelineError) -> Self {
        if e.retryable() {
            AttemptError::Retryable(e.to_string())
        } else {
            AttemptError::Fatal(e.to_string())
        }
    }
}

/// Renames and decomposes every function; direct mode keeps the source as written.
pub fn prepare(ast: &Ast, mode: Mode, config: &SplitConfig) -> Program {
    if mode == Mode::Direct {
        return Program::new(ast.clone());
    }
    let mut out = ast.clone();
    let base = TypeEnv::from_ast(ast);
    for item in &mut out.items {
        if let Item::Function(f) = item {
            let (renamed, _) = rename_in(ast, f);
            let env = base.clone().with_function(&renamed);
            *f = decompose_complex_expressions(&env, &renamed, config.expr_complexity_limit);
        }
    }
    Program::new(out)
}

/// Declarations a translator needs besides the function itself.
pub fn context_text(ast: &Ast, except: &str) -> String {
    let mut s = String::new();
    for item in &ast.items {
        match item {
            Item::Record(_) | Item::Global(_) => {
                let one = Ast {
                    source: String::new(),
                    items: vec![item.clone()],
                };
                s.push_str(&print_ast(&one));
            }
            Item::Prototype(sig) => {
                s.push_str(&print_signature(sig));
                s.push_str(";\n");
            }
            Item::Function(f) if f.name() != except => {
                s.push_str(&print_signature(&f.sig));
                s.push_str(";\n");
            }
            Item::Function(_) => {}
        }
    }
    s
}

/// Everything produced while compiling one function, kept for artifacts.
#[derive(Clone, Debug, Default)]
pub struct FunctionArtifacts {
    pub asm: FunctionAsm,
    pub table: Option<SymbolTable>,
    pub parts: Vec<ControlPart>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub split: SplitConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: Mode::Lego,
            split: SplitConfig::default(),
        }
    }
}

pub struct Compiler<'a> {
    pub program: Arc<Program>,
    pub config: PipelineConfig,
    pub backend: &'a dyn Backend,
    pub policy: &'a dyn SplitPolicy,
}

impl<'a> Compiler<'a> {
    pub fn new(ast: &Ast, config: PipelineConfig, backend: &'a dyn Backend, policy: &'a dyn SplitPolicy) -> Self {
        Compiler {
            program: Arc::new(prepare(ast, config.mode, &config.split)),
            config,
            backend,
            policy,
        }
    }

    fn function(&self, name: &str) -> Result<&FunctionDef, PipelineError> {
        self.program
            .ast
            .function(name)
            .ok_or_else(|| PipelineError::NoFunction(name.to_string()))
    }

    fn request(&self, mode: Mode, f: &FunctionDef, source: String, table: Option<SymbolTable>, feedback: Option<&ErrorFeedback>) -> TranslationRequest {
        TranslationRequest {
            mode,
            function: f.name().to_string(),
            source,
            context: context_text(&self.program.ast, f.name()),
            program: self.program.clone(),
            symbol_table: table,
            flags: analyze_features_in(&self.program.ast, f, &self.config.split),
            part: None,
            feedback: feedback.cloned(),
        }
    }

    fn whole(&self, f: &FunctionDef, mode: Mode, table: Option<SymbolTable>, feedback: Option<&ErrorFeedback>) -> Result<FunctionArtifacts, PipelineError> {
        let name = f.name().to_string();
        let req = self.request(mode, f, print_function(f), table.clone(), feedback);
        let frag = translate(&req, self.backend).map_err(|e| PipelineError::Translate(name.clone(), e))?;
        let asm = function_from_fragment(&name, &frag).map_err(|e| PipelineError::Rebuild(name, e))?;
        Ok(FunctionArtifacts {
            asm,
            table,
            parts: Vec::new(),
        })
    }

    pub fn compile_function(&self, name: &str, feedback: Option<&ErrorFeedback>) -> Result<FunctionArtifacts, PipelineError> {
        let f = self.function(name)?;
        match self.config.mode {
            Mode::Direct => self.whole(f, Mode::Direct, None, feedback),
            Mode::Workflow => {
                let table = allocate_frame(&self.program.ast, f, &self.program.layouts)?;
                self.whole(f, Mode::Workflow, Some(table), feedback)
            }
            Mode::Lego => {
                let table = allocate_frame(&self.program.ast, f, &self.program.layouts)?;
                if !check_composability(f).composable {
                    return self.whole(f, Mode::Workflow, Some(table), feedback);
                }
                let parts = split_parts(f, &self.config.split, self.policy)?;
                if !verify_split_integrity(f, &parts) {
                    return Err(PipelineError::Integrity(name.to_string()));
                }
                let asm = self.translate_parts(f, &parts, &table, feedback)?;
                Ok(FunctionArtifacts {
                    asm,
                    table: Some(table),
                    parts,
                })
            }
        }
    }

    /// Translates a caller-supplied part list for `name` and rebuilds it.
    pub fn compile_with_parts(&self, name: &str, parts: &[ControlPart]) -> Result<FunctionArtifacts, PipelineError> {
        let f = self.function(name)?;
        let table = allocate_frame(&self.program.ast, f, &self.program.layouts)?;
        let asm = self.translate_parts(f, parts, &table, None)?;
        Ok(FunctionArtifacts {
            asm,
            table: Some(table),
            parts: parts.to_vec(),
        })
    }

    fn translate_parts(&self, f: &FunctionDef, parts: &[ControlPart], table: &SymbolTable, feedback: Option<&ErrorFeedback>) -> Result<FunctionAsm, PipelineError> {
        let name = f.name().to_string();
        let mut env = self.program.env.clone();
        for s in &table.locals {
            env.vars.insert(s.name.clone(), s.ty.clone());
        }
        let base = self.request(Mode::Lego, f, String::new(), Some(table.clone()), feedback);
        let mut labels = Vec::new();
        let mut switch_kind = None;
        let mut out = Vec::with_capacity(parts.len());
        for p in parts {
            if p.role == PartRole::SwitchValue {
                switch_kind = p
                    .expr
                    .as_ref()
                    .and_then(|e| env.type_of(e).ok())
                    .and_then(|t| promote(&t).int_kind());
            }
            let mut req = base.clone();
            req.source = part_source(p);
            req.part = Some(PartContext {
                part: p.clone(),
                preceding_labels: labels.clone(),
                loop_depth: p.loop_depth,
                switch_kind,
            });
            let frag = translate(&req, self.backend).map_err(|e| PipelineError::Translate(name.clone(), e))?;
            if p.kind == PartKind::Label {
                labels.push(p.payload.clone());
            }
            out.push((p.clone(), frag));
        }
        rebuild(&out, table).map_err(|e| PipelineError::Rebuild(name, e))
    }

    /// Every function of the program, in source order.
    pub fn compile_all(&self, feedback: Option<&ErrorFeedback>) -> Result<Vec<FunctionArtifacts>, PipelineError> {
        let names: Vec<String> = self.program.ast.functions().map(|f| f.name().to_string()).collect();
        names.iter().map(|n| self.compile_function(n, feedback)).collect()
    }

    pub fn module(&self, functions: &[FunctionArtifacts]) -> Result<String, PipelineError> {
        let globals = map_globals(&self.program.ast, &self.program.layouts)?;
        let asm: Vec<FunctionAsm> = functions.iter().map(|f| f.asm.clone()).collect();
        Ok(emit_module(&asm, &globals))
    }

    pub fn compile_module(&self, feedback: Option<&ErrorFeedback>) -> Result<String, PipelineError> {
        let fns = self.compile_all(feedback)?;
        self.module(&fns)
    }
}

/// Compiles `ast`, verifies `function` against `tests`, and retries with
/// feedback up to `k` times.
pub fn compile_and_verify(
    ast: &Ast,
    function: &str,
    tests: &[TestCase],
    compiler: &Compiler<'_>,
    harness: &Harness,
    k: u32,
) -> Result<RepairOutcome, RepairError> {
    let spec = DriverSpec::from_ast(ast, function)?;
    repair_loop(
        k,
        |fb| compiler.compile_module(fb).map_err(AttemptError::from),
        |m| harness.verify_module(m, &spec, tests),
    )
}

/// Size measures used to pick out hard cases.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Complexity {
    pub basic_blocks: usize,
    pub max_block_instructions: usize,
    pub total_instructions: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardCaseFilter {
    pub min_blocks: usize,
    pub min_max_block: usize,
    pub min_total: usize,
}

impl Default for HardCaseFilter {
    fn default() -> Self {
        HardCaseFilter {
            min_blocks: 10,
            min_max_block: 80,
            min_total: 200,
        }
    }
}

impl HardCaseFilter {
    pub fn is_hard(&self, c: &Complexity) -> bool {
        c.basic_blocks >= self.min_blocks && c.max_block_instructions >= self.min_max_block && c.total_instructions >= self.min_total
    }
}

/// Basic blocks from the CFG; instruction counts from the reference translation,
/// cut into runs at labels and after jumps.
pub fn complexity(ast: &Ast, function: &str) -> Result<Complexity, PipelineError> {
    let f = ast.function(function).ok_or_else(|| PipelineError::NoFunction(function.to_string()))?;
    let blocks = build_cfg(f).map(|c| c.nodes.len()).unwrap_or(0);
    let program = Program::new(ast.clone());
    let frag = crate::translation::ref_translate_function(&program, function, None)
        .map_err(|e| PipelineError::Translate(function.to_string(), e))?;
    let (mut max, mut total, mut run) = (0, 0, 0);
    for line in frag.text.lines() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('.') || t.starts_with('#') {
            continue;
        }
        if t.ends_with(':') {
            run = 0;
            continue;
        }
        total += 1;
        run += 1;
        max = usize::max(max, run);
        if t.starts_with('j') || t.starts_with("ret") {
            run = 0;
        }
    }
    Ok(Complexity {
        basic_blocks: blocks,
        max_block_instructions: max,
        total_instructions: total,
    })
}

/// Whole-function reference translation of every function (the oracle module).
pub fn reference_module(ast: &Ast) -> Result<String, PipelineError> {
    let config = PipelineConfig {
        mode: Mode::Direct,
        split: SplitConfig::default(),
    };
    let policy = crate::splitter::NeverSplit;
    Compiler::new(ast, config, &RefBackend, &policy).compile_module(None)
}

/// Text dump of the parts of every function compiled in lego mode.
pub fn parts_dump(functions: &[FunctionArtifacts]) -> String {
    functions
        .iter()
        .filter(|f| !f.parts.is_empty())
        .map(|f| format!("# function {}\n{}", f.asm.name, dump_parts(&f.parts)))
        .collect()
}

/// `true` when `ty` can cross the generated test driver boundary.
pub fn driver_compatible(ty: &Type) -> bool {
    ty.is_scalar() || *ty == Type::Void
}
