//! Parsing, classification and control-flow analysis of the C subset.

pub mod ast;
pub mod cfg;
pub mod consteval;
pub mod features;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod typeck;
pub mod types;

pub use ast::*;
pub use cfg::{build_cfg, Cfg, EdgeKind};
pub use features::{analyze_features, analyze_features_in, token_estimate, FeatureFlags};
pub use parser::{parse_expression, parse_source, parse_statement};
pub use printer::{print_ast, print_expr, print_function, print_stmt};
pub use types::{IntKind, RecordKind, Type};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum FrontendError {
    #[error("syntax error at byte {pos}: expected {}, found {found}", expected.join(" or "))]
    Syntax {
        pos: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unsupported feature `{feature}` at bytes {}..{}", span.start, span.end)]
    Unsupported { span: Span, feature: String },
    #[error("goto targets undefined label `{0}`")]
    UnresolvedLabel(String),
}

impl FrontendError {
    pub fn is_unsupported(&self) -> bool {
        matches!(self, FrontendError::Unsupported { .. })
    }
}
