//! Compiling a C subset to x86-64 assembly by splitting functions into
//! independently translated parts and rebuilding the result.

pub mod frontend;
pub mod interp;
pub mod layout;
pub mod mapping;
pub mod pipeline;
pub mod rebuild;
pub mod splitter;
pub mod suite;
pub mod toolchain;
pub mod transforms;
pub mod translation;
pub mod verify;

pub use frontend::{parse_source, Ast, FeatureFlags, FrontendError, FunctionDef, IntKind, Type};
pub use layout::{LayoutEngine, LayoutError, TypeLayout};
pub use mapping::{allocate_frame, map_globals, GlobalPlan, SymbolTable};
pub use rebuild::{emit_module, rebuild, FunctionAsm, RebuildError};
pub use splitter::{split_parts, ControlPart, PartKind, SplitConfig};
pub use translation::{AssemblyFragment, Backend, Mode, Program, RefBackend, TranslateError, TranslationRequest};
pub use verify::{ErrorClass, ErrorFeedback, Harness, TestCase, TestFile, VerificationReport};
