//! Part splitting: a function body becomes an ordered list of source blocks,
//! labels and jumps that a translator can handle one at a time.

mod integrity;
mod policy;

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::frontend::ast::*;
use crate::frontend::cfg::{has_own_continue, JumpCond};
use crate::frontend::consteval::eval_int;
use crate::frontend::printer::{print_expr, print_items, print_stmt};

pub use integrity::{canonical_body, lower_parts, recombine, verify_split_integrity};
pub use policy::{AlwaysSplit, BlockView, Decision, HeuristicPolicy, NeverSplit, RandomPolicy, SplitPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    #[default]
    Heuristic,
    Llm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub split_threshold: usize,
    pub expr_complexity_limit: usize,
    pub policy: PolicyKind,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            split_threshold: 400,
            expr_complexity_limit: 8,
            policy: PolicyKind::Heuristic,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PartKind {
    SourceBlock,
    Label,
    CondJump,
    UncondJump,
}

/// What a source block computes and how its translation is consumed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PartRole {
    Statements,
    ForInit,
    /// Leaves a truth value for the following conditional jump.
    Condition,
    ForStep,
    /// Leaves the promoted switch operand for the following case jumps.
    SwitchValue,
    /// Label and jump parts.
    Control,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlPart {
    pub id: usize,
    pub kind: PartKind,
    pub role: PartRole,
    /// Source text for blocks, label name for labels and jump targets.
    pub payload: String,
    pub stmts: Vec<Stmt>,
    /// Condition, switch operand, `for` step, or the case expression of a case label.
    pub expr: Option<Expr>,
    pub cond: JumpCond,
    pub back: bool,
    pub loop_depth: usize,
    pub break_target: Option<String>,
    pub continue_target: Option<String>,
}

impl ControlPart {
    fn new(kind: PartKind, role: PartRole, payload: String, ctx: &Ctx) -> ControlPart {
        ControlPart {
            id: 0,
            kind,
            role,
            payload,
            stmts: Vec::new(),
            expr: None,
            cond: JumpCond::Always,
            back: false,
            loop_depth: ctx.depth,
            break_target: ctx.brk.clone(),
            continue_target: ctx.cont.clone(),
        }
    }

    pub fn is_jump(&self) -> bool {
        matches!(self.kind, PartKind::CondJump | PartKind::UncondJump)
    }

    /// Trailing label kind (`body`, `end`, `case3`, ...) of a label or jump target.
    pub fn label_kind(&self) -> Option<&str> {
        label_kind(&self.payload)
    }
}

pub fn label_kind(name: &str) -> Option<&str> {
    name.rsplit_once('_').map(|(_, k)| k)
}

/// One record per part: `id kind loop_depth payload`.
pub fn dump_parts(parts: &[ControlPart]) -> String {
    let mut s = String::new();
    for p in parts {
        let payload: Vec<&str> = p.payload.split_whitespace().collect();
        let _ = writeln!(s, "{} {:?} {} {}", p.id, p.kind, p.loop_depth, payload.join(" "));
    }
    s
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blocker {
    pub span: Span,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposabilityVerdict {
    pub composable: bool,
    pub blocking_constructs: Vec<Blocker>,
}

pub const GOTO_REASON: &str = "goto breaks structured control flow";

/// Bottom-up composability check: basic statements pass, recognised control
/// structures are opened and their bodies re-queued at the front.
pub fn check_composability(f: &FunctionDef) -> ComposabilityVerdict {
    let mut blockers = Vec::new();
    let mut deque: VecDeque<&Stmt> = f.body.items.iter().collect();
    while let Some(s) = deque.pop_front() {
        let subs: Vec<&Stmt> = match &s.kind {
            StmtKind::Goto(_) => {
                blockers.push(Blocker {
                    span: s.span,
                    reason: GOTO_REASON.into(),
                });
                continue;
            }
            StmtKind::Labeled(..) => {
                blockers.push(Blocker {
                    span: s.span,
                    reason: "statement label only reachable through goto".into(),
                });
                continue;
            }
            StmtKind::Block(b) => b.items.iter().collect(),
            StmtKind::Switch { cases, .. } => cases.iter().flat_map(|c| c.body.iter()).collect(),
            StmtKind::If { .. } | StmtKind::While { .. } | StmtKind::DoWhile { .. } | StmtKind::For { .. } => {
                s.children()
            }
            _ => continue,
        };
        for sub in subs.into_iter().rev() {
            deque.push_front(sub);
        }
    }
    ComposabilityVerdict {
        composable: blockers.is_empty(),
        blocking_constructs: blockers,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SplitError {
    #[error("function `{0}` is not composable: {1}")]
    NonComposable(String, String),
}

#[derive(Clone, Debug, Default)]
struct Ctx {
    depth: usize,
    brk: Option<String>,
    cont: Option<String>,
}

enum Work {
    Block(Vec<Stmt>, Ctx),
    Part(ControlPart),
}

fn is_atomic(s: &Stmt) -> bool {
    match &s.kind {
        StmtKind::Block(b) => b.items.iter().all(is_atomic),
        _ => s.is_straight_line(),
    }
}

fn body_items(s: &Stmt) -> Vec<Stmt> {
    match &s.kind {
        StmtKind::Block(b) => b.items.clone(),
        _ => vec![s.clone()],
    }
}

struct Splitter<'a> {
    func: String,
    config: &'a SplitConfig,
    policy: &'a dyn SplitPolicy,
    constructs: usize,
}

impl Splitter<'_> {
    fn labels(&mut self) -> impl Fn(&str) -> String {
        self.constructs += 1;
        let prefix = format!(".L_{}__{}", self.func, self.constructs);
        move |kind| format!("{prefix}_{kind}")
    }

    fn block_part(stmts: Vec<Stmt>, role: PartRole, ctx: &Ctx) -> ControlPart {
        let mut p = ControlPart::new(PartKind::SourceBlock, role, print_items(&stmts, 0), ctx);
        p.stmts = stmts;
        p
    }

    fn expr_part(e: Option<Expr>, role: PartRole, ctx: &Ctx) -> ControlPart {
        let text = e.as_ref().map(print_expr).unwrap_or_else(|| "1".into());
        let mut p = ControlPart::new(PartKind::SourceBlock, role, text, ctx);
        p.expr = e;
        p
    }

    fn label(name: &str, ctx: &Ctx) -> ControlPart {
        ControlPart::new(PartKind::Label, PartRole::Control, name.to_string(), ctx)
    }

    fn jump(target: &str, cond: JumpCond, back: bool, ctx: &Ctx) -> ControlPart {
        let kind = if cond == JumpCond::Always {
            PartKind::UncondJump
        } else {
            PartKind::CondJump
        };
        let mut p = ControlPart::new(kind, PartRole::Control, target.to_string(), ctx);
        p.cond = cond;
        p.back = back;
        p
    }

    /// Opens the outermost structure of `stmts` into finer work items.
    fn expand(&mut self, stmts: Vec<Stmt>, ctx: Ctx) -> Vec<Work> {
        if stmts.len() == 1 {
            match &stmts[0].kind {
                StmtKind::Block(b) => return vec![Work::Block(b.items.clone(), ctx)],
                _ => return self.split_control(&stmts[0], ctx),
            }
        }
        let mut out = Vec::new();
        let mut run: Vec<Stmt> = Vec::new();
        for s in stmts {
            if is_atomic(&s) {
                run.push(s);
            } else {
                if !run.is_empty() {
                    out.push(Work::Block(std::mem::take(&mut run), ctx.clone()));
                }
                out.push(Work::Block(vec![s], ctx.clone()));
            }
        }
        if !run.is_empty() {
            out.push(Work::Block(run, ctx));
        }
        out
    }

    fn split_control(&mut self, s: &Stmt, ctx: Ctx) -> Vec<Work> {
        use Work::{Block as B, Part as P};
        match &s.kind {
            StmtKind::For {
                init,
                cond,
                step,
                body,
            } => {
                let l = self.labels();
                let (head, end) = (l("body"), l("end"));
                let cont = has_own_continue(body).then(|| l("cont"));
                let inner = Ctx {
                    depth: ctx.depth + 1,
                    brk: Some(end.clone()),
                    cont: Some(cont.clone().unwrap_or_else(|| head.clone())),
                };
                let mut v = vec![
                    P(Self::block_part(vec![(**init).clone()], PartRole::ForInit, &ctx)),
                    P(Self::label(&head, &inner)),
                    P(Self::expr_part(cond.clone(), PartRole::Condition, &inner)),
                    P(Self::jump(&end, JumpCond::IfZero, false, &inner)),
                    B(body_items(body), inner.clone()),
                ];
                if let Some(c) = &cont {
                    v.push(P(Self::label(c, &inner)));
                }
                if let Some(st) = step {
                    v.push(P(Self::expr_part(Some(st.clone()), PartRole::ForStep, &inner)));
                }
                v.push(P(Self::jump(&head, JumpCond::Always, true, &inner)));
                v.push(P(Self::label(&end, &inner)));
                v
            }
            StmtKind::While { cond, body } => {
                let l = self.labels();
                let (head, end) = (l("body"), l("end"));
                let inner = Ctx {
                    depth: ctx.depth + 1,
                    brk: Some(end.clone()),
                    cont: Some(head.clone()),
                };
                vec![
                    P(Self::label(&head, &inner)),
                    P(Self::expr_part(Some(cond.clone()), PartRole::Condition, &inner)),
                    P(Self::jump(&end, JumpCond::IfZero, false, &inner)),
                    B(body_items(body), inner.clone()),
                    P(Self::jump(&head, JumpCond::Always, true, &inner)),
                    P(Self::label(&end, &inner)),
                ]
            }
            StmtKind::DoWhile { body, cond } => {
                let l = self.labels();
                let (head, end) = (l("body"), l("end"));
                let cont = has_own_continue(body).then(|| l("cont"));
                let inner = Ctx {
                    depth: ctx.depth + 1,
                    brk: Some(end.clone()),
                    cont: Some(cont.clone().unwrap_or_else(|| head.clone())),
                };
                let mut v = vec![P(Self::label(&head, &inner)), B(body_items(body), inner.clone())];
                if let Some(c) = &cont {
                    v.push(P(Self::label(c, &inner)));
                }
                v.push(P(Self::expr_part(Some(cond.clone()), PartRole::Condition, &inner)));
                v.push(P(Self::jump(&head, JumpCond::IfNonZero, true, &inner)));
                v.push(P(Self::label(&end, &inner)));
                v
            }
            StmtKind::If { cond, then, els } => {
                let l = self.labels();
                let mut v = vec![P(Self::expr_part(Some(cond.clone()), PartRole::Condition, &ctx))];
                match els {
                    None => {
                        let endif = l("endif");
                        v.push(P(Self::jump(&endif, JumpCond::IfZero, false, &ctx)));
                        v.push(B(body_items(then), ctx.clone()));
                        v.push(P(Self::label(&endif, &ctx)));
                    }
                    Some(e) => {
                        let (else_l, endif) = (l("else"), l("endif"));
                        v.push(P(Self::jump(&else_l, JumpCond::IfZero, false, &ctx)));
                        v.push(B(body_items(then), ctx.clone()));
                        v.push(P(Self::jump(&endif, JumpCond::Always, false, &ctx)));
                        v.push(P(Self::label(&else_l, &ctx)));
                        v.push(B(body_items(e), ctx.clone()));
                        v.push(P(Self::label(&endif, &ctx)));
                    }
                }
                v
            }
            StmtKind::Switch { cond, cases } => {
                let l = self.labels();
                let names: Vec<String> = cases
                    .iter()
                    .enumerate()
                    .map(|(i, c)| match c.label {
                        CaseLabel::Case(_) => l(&format!("case{i}")),
                        CaseLabel::Default => l("default"),
                    })
                    .collect();
                let end = l("end");
                let inner = Ctx {
                    depth: ctx.depth,
                    brk: Some(end.clone()),
                    cont: ctx.cont.clone(),
                };
                let mut v = vec![P(Self::expr_part(Some(cond.clone()), PartRole::SwitchValue, &ctx))];
                let mut fallback = end.clone();
                for (c, name) in cases.iter().zip(&names) {
                    match &c.label {
                        CaseLabel::Case(e) => {
                            let value = eval_int(e).unwrap_or(i64::MIN);
                            v.push(P(Self::jump(name, JumpCond::IfEqual(value), false, &ctx)));
                        }
                        CaseLabel::Default => fallback = name.clone(),
                    }
                }
                v.push(P(Self::jump(&fallback, JumpCond::Always, false, &ctx)));
                for (c, name) in cases.iter().zip(&names) {
                    let mut lab = Self::label(name, &inner);
                    if let CaseLabel::Case(e) = &c.label {
                        lab.expr = Some(e.clone());
                    }
                    v.push(P(lab));
                    v.push(B(c.body.clone(), inner.clone()));
                }
                v.push(P(Self::label(&end, &ctx)));
                v
            }
            _ => vec![P(Self::block_part(vec![s.clone()], PartRole::Statements, &ctx))],
        }
    }

    fn run(&mut self, body: Vec<Stmt>) -> Vec<ControlPart> {
        let mut parts: Vec<ControlPart> = Vec::new();
        let mut deque = VecDeque::from([Work::Block(body, Ctx::default())]);
        let mut first = true;
        while let Some(w) = deque.pop_front() {
            let top = std::mem::take(&mut first);
            let part = match w {
                Work::Part(p) => p,
                Work::Block(stmts, ctx) => {
                    if stmts.is_empty() && !top {
                        continue;
                    }
                    let keep = stmts.iter().all(is_atomic) || {
                        let text = print_items(&stmts, 0);
                        let view = BlockView::new(&stmts, &text, ctx.depth);
                        self.policy.decide(&view, self.config) == Decision::Keep
                    };
                    if keep {
                        Self::block_part(stmts, PartRole::Statements, &ctx)
                    } else {
                        for sub in self.expand(stmts, ctx).into_iter().rev() {
                            deque.push_front(sub);
                        }
                        continue;
                    }
                }
            };
            parts.push(ControlPart { id: parts.len(), ..part });
        }
        parts
    }
}

/// Splits a composable, renamed function into parts in source order.
pub fn split_parts(
    f: &FunctionDef,
    config: &SplitConfig,
    policy: &dyn SplitPolicy,
) -> Result<Vec<ControlPart>, SplitError> {
    let verdict = check_composability(f);
    if !verdict.composable {
        let reasons: Vec<&str> = verdict.blocking_constructs.iter().map(|b| b.reason.as_str()).collect();
        return Err(SplitError::NonComposable(f.name().to_string(), reasons.join("; ")));
    }
    let mut s = Splitter {
        func: f.name().to_string(),
        config,
        policy,
        constructs: 0,
    };
    Ok(s.run(f.body.items.clone()))
}

/// Text of a part as it would appear in the source (used for prompts and dumps).
pub fn part_source(p: &ControlPart) -> String {
    match (p.kind, p.role) {
        (PartKind::SourceBlock, PartRole::Statements | PartRole::ForInit) => {
            p.stmts.iter().map(print_stmt).collect::<Vec<_>>().join("\n")
        }
        _ => p.payload.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;

    fn func(src: &str) -> FunctionDef {
        parse_source(src).unwrap().functions().next().unwrap().clone()
    }

    #[test]
    fn composability_examples() {
        let v = check_composability(&func("int f(int a){ int b = a + 1; return b; }"));
        assert!(v.composable && v.blocking_constructs.is_empty());
        let v = check_composability(&func("int f(int n){ int s = 0; for (int i = 0; i < n; i++) { if (i & 1) s += i; } return s; }"));
        assert!(v.composable);
        let v = check_composability(&func("int f(int n){ l: n--; if (n) goto l; return n; }"));
        assert!(!v.composable);
        assert!(v.blocking_constructs.iter().any(|b| b.reason == GOTO_REASON));
    }

    #[test]
    fn small_body_stays_whole() {
        let f = func("int f(int n){ int s = 0; for (int i = 0; i < n; i++) { s += i; } return s; }");
        let parts = split_parts(&f, &SplitConfig::default(), &HeuristicPolicy).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].kind, PartKind::SourceBlock);
    }

    #[test]
    fn for_loop_splits_into_eight_parts() {
        let f = func("void f(int n){ int i; int s; for (i = 0; i < n; i++) { s += i; } }");
        let body = FunctionDef {
            body: Block {
                items: vec![f.body.items[2].clone()],
                span: f.body.span,
            },
            ..f.clone()
        };
        let parts = split_parts(&body, &SplitConfig::default(), &AlwaysSplit).unwrap();
        let kinds: Vec<(PartKind, Option<&str>)> = parts
            .iter()
            .map(|p| (p.kind, if p.kind == PartKind::SourceBlock { None } else { p.label_kind() }))
            .collect();
        use PartKind::*;
        assert_eq!(
            kinds,
            vec![
                (SourceBlock, None),
                (Label, Some("body")),
                (SourceBlock, None),
                (CondJump, Some("end")),
                (SourceBlock, None),
                (SourceBlock, None),
                (UncondJump, Some("body")),
                (Label, Some("end")),
            ]
        );
        assert_eq!(parts[0].payload.trim(), "i = 0;");
        assert_eq!(parts[2].payload, "i < n");
        assert_eq!(parts[5].payload, "i++");
        assert_eq!(parts[1].payload, ".L_f__1_body");
        assert!(parts[6].back);
        assert_eq!(parts[4].loop_depth, 1);
    }

    #[test]
    fn if_else_splits_into_seven_parts() {
        let f = func("int f(int a){ if (a > 0) { a = 1; } else { a = 2; } }");
        let parts = split_parts(&f, &SplitConfig::default(), &AlwaysSplit).unwrap();
        let kinds: Vec<PartKind> = parts.iter().map(|p| p.kind).collect();
        use PartKind::*;
        assert_eq!(
            kinds,
            vec![SourceBlock, CondJump, SourceBlock, UncondJump, Label, SourceBlock, Label]
        );
        assert_eq!(parts[1].label_kind(), Some("else"));
        assert_eq!(parts[3].label_kind(), Some("endif"));
    }

    #[test]
    fn goto_functions_are_refused() {
        let f = func("int f(int n){ l: n--; if (n) goto l; return n; }");
        assert!(matches!(
            split_parts(&f, &SplitConfig::default(), &AlwaysSplit),
            Err(SplitError::NonComposable(..))
        ));
    }

    #[test]
    fn dump_has_one_record_per_part() {
        let f = func("int f(int a){ if (a) a = 2; return a; }");
        let parts = split_parts(&f, &SplitConfig::default(), &AlwaysSplit).unwrap();
        let d = dump_parts(&parts);
        assert_eq!(d.lines().count(), parts.len());
        assert!(d.lines().next().unwrap().starts_with("0 SourceBlock 0 a"));
    }
}
