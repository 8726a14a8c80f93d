//! Split integrity: parts must recombine into the original body, and the
//! control flow they spell out must match the function's own CFG.

use crate::frontend::ast::*;
use crate::frontend::cfg::{build_cfg, cfg_from_ir, isomorphic, IrItem, JumpCond, JumpScope, Lowerer};
use crate::frontend::consteval::eval_int;
use crate::frontend::printer::{print_expr, print_items};

use super::{label_kind, ControlPart, PartKind, PartRole};

struct Reader<'a> {
    parts: &'a [ControlPart],
    pos: usize,
}

type R<T> = Result<T, String>;

fn prefix(label: &str) -> &str {
    label.rsplit_once('_').map(|(p, _)| p).unwrap_or(label)
}

fn block(items: Vec<Stmt>) -> Box<Stmt> {
    Box::new(Stmt::new(StmtKind::Block(Block { items, span: Span::default() }), Span::default()))
}

impl<'a> Reader<'a> {
    fn peek(&self) -> Option<&'a ControlPart> {
        self.parts.get(self.pos)
    }

    fn peek_at(&self, k: usize) -> Option<&'a ControlPart> {
        self.parts.get(self.pos + k)
    }

    fn next(&mut self) -> R<&'a ControlPart> {
        let p = self.peek().ok_or("unexpected end of parts")?;
        self.pos += 1;
        Ok(p)
    }

    fn expect_label(&mut self, name: &str) -> R<()> {
        let p = self.next()?;
        if p.kind == PartKind::Label && p.payload == name {
            Ok(())
        } else {
            Err(format!("part {}: expected label {name}, found {:?} {}", p.id, p.kind, p.payload))
        }
    }

    fn expect_jump(&mut self, cond: JumpCond, back: bool) -> R<&'a str> {
        let p = self.next()?;
        if p.is_jump() && p.cond == cond && p.back == back {
            Ok(&p.payload)
        } else {
            Err(format!("part {}: expected {cond:?} jump, found {:?} {}", p.id, p.kind, p.payload))
        }
    }

    fn expect_expr(&mut self, role: PartRole) -> R<Option<Expr>> {
        let p = self.next()?;
        if p.kind == PartKind::SourceBlock && p.role == role {
            Ok(p.expr.clone())
        } else {
            Err(format!("part {}: expected {role:?} block", p.id))
        }
    }

    fn seq(&mut self) -> R<Vec<Stmt>> {
        let mut out = Vec::new();
        while let Some(p) = self.peek() {
            match (p.kind, p.role) {
                (PartKind::SourceBlock, PartRole::Statements) => {
                    out.extend(p.stmts.iter().cloned());
                    self.pos += 1;
                }
                (PartKind::SourceBlock, PartRole::ForInit) => out.push(self.for_loop()?),
                (PartKind::SourceBlock, PartRole::SwitchValue) => out.push(self.switch()?),
                (PartKind::SourceBlock, PartRole::Condition) => {
                    // a condition followed by a back jump closes an enclosing do-while
                    if self.peek_at(1).is_some_and(|j| j.back) {
                        break;
                    }
                    out.push(self.if_stmt()?);
                }
                (PartKind::Label, _) if p.label_kind() == Some("body") => out.push(self.loop_at_label()?),
                _ => break,
            }
        }
        Ok(out)
    }

    fn for_loop(&mut self) -> R<Stmt> {
        let init = self.next()?.stmts.first().cloned().ok_or("empty for initializer")?;
        let head = self.next()?;
        if head.kind != PartKind::Label || head.label_kind() != Some("body") {
            return Err(format!("part {}: for without body label", head.id));
        }
        let cond = self.expect_expr(PartRole::Condition)?;
        let end = self.expect_jump(JumpCond::IfZero, false)?.to_string();
        if end != format!("{}_end", prefix(&head.payload)) {
            return Err(format!("for condition jumps to {end}"));
        }
        let body = self.seq()?;
        let cont = format!("{}_cont", prefix(&head.payload));
        if self.peek().is_some_and(|p| p.kind == PartKind::Label && p.payload == cont) {
            self.pos += 1;
        }
        let step = match self.peek() {
            Some(p) if p.role == PartRole::ForStep => {
                self.pos += 1;
                p.expr.clone()
            }
            _ => None,
        };
        let t = self.expect_jump(JumpCond::Always, true)?;
        if t != head.payload {
            return Err(format!("for back edge targets {t}"));
        }
        self.expect_label(&end)?;
        Ok(Stmt::new(
            StmtKind::For {
                init: Box::new(init),
                cond,
                step,
                body: block(body),
            },
            Span::default(),
        ))
    }

    fn loop_at_label(&mut self) -> R<Stmt> {
        let head = self.next()?.payload.clone();
        let end = format!("{}_end", prefix(&head));
        let is_while = self.peek().is_some_and(|p| p.role == PartRole::Condition)
            && self
                .peek_at(1)
                .is_some_and(|j| j.kind == PartKind::CondJump && !j.back && j.payload == end);
        if is_while {
            let cond = self.expect_expr(PartRole::Condition)?.ok_or("while without condition")?;
            self.expect_jump(JumpCond::IfZero, false)?;
            let body = self.seq()?;
            let t = self.expect_jump(JumpCond::Always, true)?;
            if t != head {
                return Err(format!("while back edge targets {t}"));
            }
            self.expect_label(&end)?;
            return Ok(Stmt::new(StmtKind::While { cond, body: block(body) }, Span::default()));
        }
        let body = self.seq()?;
        let cont = format!("{}_cont", prefix(&head));
        if self.peek().is_some_and(|p| p.kind == PartKind::Label && p.payload == cont) {
            self.pos += 1;
        }
        let cond = self.expect_expr(PartRole::Condition)?.ok_or("do-while without condition")?;
        let t = self.expect_jump(JumpCond::IfNonZero, true)?;
        if t != head {
            return Err(format!("do-while back edge targets {t}"));
        }
        self.expect_label(&end)?;
        Ok(Stmt::new(StmtKind::DoWhile { body: block(body), cond }, Span::default()))
    }

    fn if_stmt(&mut self) -> R<Stmt> {
        let cond = self.expect_expr(PartRole::Condition)?.ok_or("if without condition")?;
        let target = self.expect_jump(JumpCond::IfZero, false)?.to_string();
        let then = self.seq()?;
        let els = match label_kind(&target) {
            Some("endif") => {
                self.expect_label(&target)?;
                None
            }
            Some("else") => {
                let endif = self.expect_jump(JumpCond::Always, false)?.to_string();
                if endif != format!("{}_endif", prefix(&target)) {
                    return Err(format!("then branch jumps to {endif}"));
                }
                self.expect_label(&target)?;
                let e = self.seq()?;
                self.expect_label(&endif)?;
                Some(block(e))
            }
            _ => return Err(format!("if condition jumps to {target}")),
        };
        Ok(Stmt::new(
            StmtKind::If {
                cond,
                then: block(then),
                els,
            },
            Span::default(),
        ))
    }

    fn switch(&mut self) -> R<Stmt> {
        let cond = self.expect_expr(PartRole::SwitchValue)?.ok_or("switch without operand")?;
        let mut jumps = Vec::new();
        while let Some(p) = self.peek() {
            match p.cond {
                JumpCond::IfEqual(v) if p.kind == PartKind::CondJump => {
                    jumps.push((p.payload.clone(), v));
                    self.pos += 1;
                }
                _ => break,
            }
        }
        let fallback = self.expect_jump(JumpCond::Always, false)?.to_string();
        let base = prefix(&fallback).to_string();
        let end = format!("{base}_end");
        let mut cases = Vec::new();
        let mut saw_default = false;
        while let Some(p) = self.peek() {
            if p.kind != PartKind::Label || p.payload == end || prefix(&p.payload) != base {
                break;
            }
            self.pos += 1;
            let label = if p.label_kind() == Some("default") {
                saw_default = true;
                if fallback != p.payload {
                    return Err("switch fallback does not reach default".into());
                }
                CaseLabel::Default
            } else {
                let e = p.expr.clone().ok_or("case label without expression")?;
                let value = eval_int(&e).unwrap_or(i64::MIN);
                if !jumps.iter().any(|(t, v)| *t == p.payload && *v == value) {
                    return Err(format!("no dispatch jump for {}", p.payload));
                }
                CaseLabel::Case(e)
            };
            let body = self.seq()?;
            cases.push(SwitchCase {
                label,
                body,
                span: Span::default(),
            });
        }
        if !saw_default && fallback != end {
            return Err("switch fallback misses the end label".into());
        }
        if cases.iter().filter(|c| matches!(c.label, CaseLabel::Case(_))).count() != jumps.len() {
            return Err("dispatch jumps and case labels disagree".into());
        }
        self.expect_label(&end)?;
        Ok(Stmt::new(StmtKind::Switch { cond, cases }, Span::default()))
    }
}

/// Rebuilds structured statements from a part list.
pub fn recombine(parts: &[ControlPart]) -> Result<Vec<Stmt>, String> {
    let mut r = Reader { parts, pos: 0 };
    let out = r.seq()?;
    match r.peek() {
        None => Ok(out),
        Some(p) => Err(format!("part {} ({:?} {}) does not fit the structure", p.id, p.kind, p.payload)),
    }
}

fn canon_items(items: &[Stmt], out: &mut Vec<Stmt>) {
    for s in items {
        match &s.kind {
            StmtKind::Block(b) => canon_items(&b.items, out),
            _ => out.push(canon_stmt(s)),
        }
    }
}

fn canon_body(s: &Stmt) -> Box<Stmt> {
    let mut v = Vec::new();
    canon_items(std::slice::from_ref(s), &mut v);
    block(v)
}

fn canon_stmt(s: &Stmt) -> Stmt {
    let kind = match &s.kind {
        StmtKind::If { cond, then, els } => StmtKind::If {
            cond: cond.clone(),
            then: canon_body(then),
            els: els.as_ref().map(|e| canon_body(e)),
        },
        StmtKind::While { cond, body } => StmtKind::While {
            cond: cond.clone(),
            body: canon_body(body),
        },
        StmtKind::DoWhile { body, cond } => StmtKind::DoWhile {
            body: canon_body(body),
            cond: cond.clone(),
        },
        StmtKind::For {
            init,
            cond,
            step,
            body,
        } => StmtKind::For {
            init: init.clone(),
            cond: cond.clone(),
            step: step.clone(),
            body: canon_body(body),
        },
        StmtKind::Switch { cond, cases } => StmtKind::Switch {
            cond: cond.clone(),
            cases: cases
                .iter()
                .map(|c| {
                    let mut body = Vec::new();
                    canon_items(&c.body, &mut body);
                    SwitchCase {
                        label: c.label.clone(),
                        body,
                        span: Span::default(),
                    }
                })
                .collect(),
        },
        other => other.clone(),
    };
    Stmt::new(kind, s.span)
}

/// Printed body with redundant braces removed and every control body braced;
/// two bodies are the same program text iff these agree modulo whitespace.
pub fn canonical_body(items: &[Stmt]) -> String {
    let mut v = Vec::new();
    canon_items(items, &mut v);
    print_items(&v, 0).split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Flat IR spelled out by the parts: source blocks are lowered in place,
/// labels and jumps are taken literally.
pub fn lower_parts(parts: &[ControlPart]) -> Vec<IrItem> {
    let mut items = Vec::new();
    for p in parts {
        match (p.kind, p.role) {
            (PartKind::Label, _) => items.push(IrItem::Label(p.payload.clone())),
            (PartKind::CondJump | PartKind::UncondJump, _) => items.push(IrItem::Jump {
                target: p.payload.clone(),
                cond: p.cond.clone(),
                back: p.back,
            }),
            (_, PartRole::Condition | PartRole::SwitchValue) => {
                items.push(IrItem::Eval(p.expr.as_ref().map(print_expr).unwrap_or_else(|| "1".into())))
            }
            (_, PartRole::ForStep) => {
                if let Some(e) = &p.expr {
                    items.push(IrItem::Stmt(format!("{};", print_expr(e))));
                }
            }
            _ => {
                let scope = JumpScope {
                    break_target: p.break_target.clone(),
                    continue_target: p.continue_target.clone(),
                };
                let mut l = Lowerer::with_scope(&format!("p{}_", p.id), scope);
                l.lower_all(&p.stmts);
                items.extend(l.items);
            }
        }
    }
    items
}

/// Checks that `parts` recombine into `f`'s body and induce an isomorphic CFG.
pub fn verify_split_integrity(f: &FunctionDef, parts: &[ControlPart]) -> bool {
    let Ok(stmts) = recombine(parts) else {
        return false;
    };
    if canonical_body(&stmts) != canonical_body(&f.body.items) {
        return false;
    }
    let (Ok(a), Ok(b)) = (cfg_from_ir(&lower_parts(parts)), build_cfg(f)) else {
        return false;
    };
    isomorphic(&a, &b)
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;
    use crate::frontend::parse_source;

    const SRC: &str = "int f(int n){ int s = 0; int i = 0;\n\
        for (i = 0; i < n; i++) { if (i % 3 == 0) continue; s += i; if (s > 100) break; }\n\
        while (n > 0) { n--; if (n == 5) { s++; } else { s--; } }\n\
        do { s += 2; if (s & 1) continue; } while (s < 10);\n\
        switch (s & 3) { case 0: s++; case 1: { s += 2; break; } case -1: ; default: s = 0; }\n\
        { int t = s; s = t * 2; }\n\
        return s; }";

    fn func() -> FunctionDef {
        parse_source(SRC).unwrap().function("f").unwrap().clone()
    }

    #[test]
    fn whole_body_part_is_intact() {
        let f = func();
        let parts = split_parts(&f, &SplitConfig::default(), &NeverSplit).unwrap();
        assert_eq!(parts.len(), 1);
        assert!(verify_split_integrity(&f, &parts));
    }

    #[test]
    fn full_split_is_intact() {
        let f = func();
        let parts = split_parts(&f, &SplitConfig::default(), &AlwaysSplit).unwrap();
        assert!(parts.len() > 30);
        assert!(verify_split_integrity(&f, &parts), "{}", dump_parts(&parts));
    }

    #[test]
    fn random_splits_are_intact() {
        let f = func();
        for seed in 0..40 {
            let parts = split_parts(&f, &SplitConfig::default(), &RandomPolicy::new(seed)).unwrap();
            assert!(verify_split_integrity(&f, &parts), "seed {seed}\n{}", dump_parts(&parts));
        }
    }

    #[test]
    fn retargeted_jump_is_caught() {
        let f = func();
        let parts = split_parts(&f, &SplitConfig::default(), &AlwaysSplit).unwrap();
        let jumps: Vec<usize> = parts.iter().filter(|p| p.is_jump()).map(|p| p.id).collect();
        let labels: Vec<String> = parts
            .iter()
            .filter(|p| p.kind == PartKind::Label)
            .map(|p| p.payload.clone())
            .collect();
        for j in jumps {
            let mut bad = parts.clone();
            let other = labels.iter().find(|l| **l != bad[j].payload).unwrap();
            bad[j].payload = other.clone();
            assert!(!verify_split_integrity(&f, &bad), "jump {j}");
        }
    }

    #[test]
    fn every_jump_target_is_defined_once() {
        let f = func();
        let parts = split_parts(&f, &SplitConfig::default(), &AlwaysSplit).unwrap();
        for p in parts.iter().filter(|p| p.is_jump()) {
            let n = parts
                .iter()
                .filter(|q| q.kind == PartKind::Label && q.payload == p.payload)
                .count();
            assert_eq!(n, 1, "{}", p.payload);
        }
    }

    #[test]
    fn loop_exits_match_depth() {
        let f = func();
        let parts = split_parts(&f, &SplitConfig::default(), &AlwaysSplit).unwrap();
        for p in parts.iter().filter(|p| p.kind == PartKind::SourceBlock && p.loop_depth > 0) {
            if let Some(c) = &p.continue_target {
                let l = parts.iter().find(|q| q.kind == PartKind::Label && &q.payload == c).unwrap();
                assert_eq!(l.loop_depth, p.loop_depth);
            }
        }
    }

    #[test]
    fn splitting_atomic_parts_again_changes_nothing() {
        let f = func();
        let parts = split_parts(&f, &SplitConfig::default(), &AlwaysSplit).unwrap();
        for p in parts.iter().filter(|p| p.role == PartRole::Statements) {
            let g = FunctionDef {
                body: Block {
                    items: p.stmts.clone(),
                    span: Span::default(),
                },
                ..f.clone()
            };
            let again = split_parts(&g, &SplitConfig::default(), &AlwaysSplit).unwrap();
            assert_eq!(again.len(), 1);
            assert_eq!(again[0].stmts, p.stmts);
        }
    }
}
