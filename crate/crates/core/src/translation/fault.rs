//! Deterministic misbehaving backends for exercising the repair loop.

use std::collections::VecDeque;
use std::sync::Mutex;

use super::refgen::RefBackend;
use super::{AssemblyFragment, Backend, TranslateError, TranslationRequest};
use crate::frontend::features::token_estimate;

/// An instruction the assembler rejects: both operands are immediates.
pub const BAD_COMPARE: &str = "\tcmpl $1, $2\n";
/// The assembler message that triggers the corrected retry.
pub const BAD_COMPARE_DIAGNOSTIC: &str = "operand type mismatch for `cmp'";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaultMode {
    /// Faulty until feedback quotes the assembler error, correct afterwards.
    Once,
    Always,
}

/// Reference translation with an immediate-vs-immediate compare appended.
pub struct FaultBackend {
    pub mode: FaultMode,
}

impl FaultBackend {
    pub fn new(mode: FaultMode) -> Self {
        FaultBackend { mode }
    }
}

impl Backend for FaultBackend {
    fn name(&self) -> &str {
        match self.mode {
            FaultMode::Once => "fault-once",
            FaultMode::Always => "fault-always",
        }
    }

    fn translate(&self, req: &TranslationRequest) -> Result<AssemblyFragment, TranslateError> {
        let mut frag = RefBackend.translate(req)?;
        let repaired = req
            .feedback
            .as_ref()
            .is_some_and(|f| f.diagnostics.contains(BAD_COMPARE_DIAGNOSTIC));
        if self.mode == FaultMode::Always || !repaired {
            frag.text.push_str(BAD_COMPARE);
        }
        Ok(frag)
    }
}

/// Reference backend that refuses requests whose source exceeds a token budget,
/// standing in for a model with a limited context window.
pub struct CapacityBackend {
    pub max_tokens: usize,
}

impl Backend for CapacityBackend {
    fn name(&self) -> &str {
        "capacity"
    }

    fn translate(&self, req: &TranslationRequest) -> Result<AssemblyFragment, TranslateError> {
        let n = token_estimate(&req.source);
        if n > self.max_tokens {
            return Err(TranslateError::Backend(format!(
                "input of {n} tokens exceeds capacity {}",
                self.max_tokens
            )));
        }
        RefBackend.translate(req)
    }
}

/// Replays canned replies in order, then repeats the last one.
pub struct ScriptedBackend {
    replies: Mutex<VecDeque<String>>,
    last: Mutex<Option<String>>,
}

impl ScriptedBackend {
    pub fn new<I: IntoIterator<Item = String>>(replies: I) -> Self {
        ScriptedBackend {
            replies: Mutex::new(replies.into_iter().collect()),
            last: Mutex::new(None),
        }
    }
}

impl Backend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn translate(&self, _req: &TranslationRequest) -> Result<AssemblyFragment, TranslateError> {
        let next = self.replies.lock().expect("script lock").pop_front();
        let mut last = self.last.lock().expect("script lock");
        if let Some(n) = next {
            *last = Some(n);
        }
        let text = last.clone().ok_or(TranslateError::EmptyOutput)?;
        Ok(AssemblyFragment::from_text(text))
    }
}
