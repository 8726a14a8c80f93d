//! Translation of functions and parts into x86-64 assembly through a
//! pluggable backend.

pub mod extract;
pub mod fault;
pub mod llm;
pub mod prompt;
pub mod refgen;

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::frontend::ast::Ast;
use crate::frontend::features::FeatureFlags;
use crate::frontend::typeck::TypeEnv;
use crate::frontend::types::IntKind;
use crate::layout::LayoutEngine;
use crate::mapping::SymbolTable;
use crate::splitter::ControlPart;
use crate::verify::ErrorFeedback;

pub use extract::{extract_assembly, scan_labels};
pub use fault::{CapacityBackend, FaultBackend, FaultMode, ScriptedBackend};
pub use llm::{LlmBackend, LlmConfig, LlmSplitPolicy};
pub use prompt::build_prompt;
pub use refgen::{ref_translate_function, ref_translate_part, RefBackend};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Direct,
    Workflow,
    Lego,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "direct" => Ok(Mode::Direct),
            "workflow" => Ok(Mode::Workflow),
            "lego" => Ok(Mode::Lego),
            other => Err(format!("unknown mode `{other}` (expected direct, workflow or lego)")),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Direct => "direct",
            Mode::Workflow => "workflow",
            Mode::Lego => "lego",
        })
    }
}

/// The whole (possibly transformed) translation unit with its type facts.
#[derive(Clone, Debug)]
pub struct Program {
    pub ast: Ast,
    pub env: TypeEnv,
    pub layouts: LayoutEngine,
}

impl Program {
    pub fn new(ast: Ast) -> Program {
        Program {
            env: TypeEnv::from_ast(&ast),
            layouts: LayoutEngine::from_ast(&ast),
            ast,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PartContext {
    pub part: ControlPart,
    pub preceding_labels: Vec<String>,
    pub loop_depth: usize,
    /// Promoted operand kind of the enclosing switch, for case dispatch jumps.
    pub switch_kind: Option<IntKind>,
}

#[derive(Clone, Debug)]
pub struct TranslationRequest {
    pub mode: Mode,
    pub function: String,
    /// Text to translate: a whole function, or one part.
    pub source: String,
    /// Declarations the source depends on (records, globals, prototypes).
    pub context: String,
    pub program: Arc<Program>,
    pub symbol_table: Option<SymbolTable>,
    pub flags: FeatureFlags,
    pub part: Option<PartContext>,
    pub feedback: Option<ErrorFeedback>,
}

impl TranslationRequest {
    pub fn validate(&self) -> Result<(), TranslateError> {
        if self.mode == Mode::Lego && (self.part.is_none() || self.symbol_table.is_none()) {
            return Err(TranslateError::BadRequest(
                "part translation needs a symbol table and part context".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataItem {
    pub label: String,
    pub align: u64,
    pub directives: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblyFragment {
    pub text: String,
    pub defined_labels: BTreeSet<String>,
    pub required_labels: BTreeSet<String>,
    pub clobbers_note: String,
    /// Read-only literals the text refers to.
    pub data: Vec<DataItem>,
}

impl AssemblyFragment {
    pub fn from_text(text: String) -> AssemblyFragment {
        let (defined_labels, required_labels) = scan_labels(&text);
        AssemblyFragment {
            text,
            defined_labels,
            required_labels,
            clobbers_note: String::new(),
            data: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TranslateError {
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("immediate {value} does not fit in {width} bits")]
    ImmediateOverflow { value: i128, width: u32 },
    #[error("backend error: {0}")]
    Backend(String),
    #[error("backend returned no output")]
    EmptyOutput,
    #[error("no assembly code block in reply")]
    Extraction,
    #[error("malformed request: {0}")]
    BadRequest(String),
    #[error("backend not configured: {0}")]
    Config(String),
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn translate(&self, req: &TranslationRequest) -> Result<AssemblyFragment, TranslateError>;
}

pub fn translate(req: &TranslationRequest, backend: &dyn Backend) -> Result<AssemblyFragment, TranslateError> {
    req.validate()?;
    backend.translate(req)
}
