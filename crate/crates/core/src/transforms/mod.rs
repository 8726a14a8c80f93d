//! Source-to-source rewrites applied before translation.

pub mod decompose;
pub mod rename;

pub use decompose::decompose_complex_expressions;
pub use rename::{rename_in, rename_variables, rename_variables_avoiding, RenameEntry, RenameMap};
