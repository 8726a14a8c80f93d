//! Reassembly of translated fragments into functions and modules.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::frontend::types::Type;
use crate::mapping::{GlobalPlan, Section, SymbolTable};
use crate::splitter::{ControlPart, PartKind};
use crate::translation::{AssemblyFragment, DataItem};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RebuildError {
    #[error("label `{0}` is used but never defined")]
    UndefinedLabel(String),
    #[error("label `{0}` is defined more than once")]
    DuplicateLabel(String),
    #[error("{0} parts but {1} fragments")]
    PartCount(usize, usize),
}

/// One function's text, starting at its entry label, plus the read-only data it needs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionAsm {
    pub name: String,
    pub text: String,
    pub data: Vec<DataItem>,
}

pub fn epilogue_label(function: &str) -> String {
    format!(".L_{function}__epilogue")
}

/// Narrow views of the integer argument registers: (8, 16, 32 bit).
fn sub_registers(reg: &str) -> (&'static str, &'static str, &'static str) {
    match reg {
        "rdi" => ("dil", "di", "edi"),
        "rsi" => ("sil", "si", "esi"),
        "rdx" => ("dl", "dx", "edx"),
        "rcx" => ("cl", "cx", "ecx"),
        "r8" => ("r8b", "r8w", "r8d"),
        _ => ("r9b", "r9w", "r9d"),
    }
}

pub fn prologue(table: &SymbolTable) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{}:", table.function);
    s.push_str("\tpushq %rbp\n\tmovq %rsp, %rbp\n");
    if table.frame_size > 0 {
        let _ = writeln!(s, "\tsubq ${}, %rsp", table.frame_size);
    }
    for p in &table.params {
        let Some(slot) = table.slot(&p.name) else { continue };
        let at = format!("{}(%rbp)", slot.offset);
        let line = match &slot.ty {
            Type::Float => format!("movss %{}, {at}", p.register),
            Type::Double => format!("movsd %{}, {at}", p.register),
            _ => {
                let (b, w, l) = sub_registers(&p.register);
                match slot.layout.size {
                    1 => format!("movb %{b}, {at}"),
                    2 => format!("movw %{w}, {at}"),
                    4 => format!("movl %{l}, {at}"),
                    _ => format!("movq %{}, {at}", p.register),
                }
            }
        };
        let _ = writeln!(s, "\t{line}");
    }
    s
}

pub fn epilogue(function: &str) -> String {
    format!("{}:\n\tleave\n\tret\n", epilogue_label(function))
}

fn check_labels<'a>(
    defined: impl IntoIterator<Item = &'a String>,
    required: impl IntoIterator<Item = &'a String>,
) -> Result<(), RebuildError> {
    let mut seen = HashSet::new();
    for l in defined {
        if !seen.insert(l.as_str()) {
            return Err(RebuildError::DuplicateLabel(l.clone()));
        }
    }
    for l in required {
        if !seen.contains(l.as_str()) {
            return Err(RebuildError::UndefinedLabel(l.clone()));
        }
    }
    Ok(())
}

/// Prologue, then fragments in part order (label parts become `name:`), then the epilogue.
pub fn rebuild(parts: &[(ControlPart, AssemblyFragment)], table: &SymbolTable) -> Result<FunctionAsm, RebuildError> {
    let mut text = prologue(table);
    let mut defined: Vec<String> = Vec::new();
    let mut required: BTreeSet<String> = BTreeSet::new();
    let mut data: Vec<DataItem> = Vec::new();
    for (part, frag) in parts {
        if part.kind == PartKind::Label {
            let _ = writeln!(text, "{}:", part.payload);
            defined.push(part.payload.clone());
        }
        text.push_str(&frag.text);
        if !frag.text.is_empty() && !frag.text.ends_with('\n') {
            text.push('\n');
        }
        defined.extend(frag.defined_labels.iter().cloned());
        required.extend(frag.required_labels.iter().cloned());
        for d in &frag.data {
            if !data.iter().any(|x| x.label == d.label) {
                data.push(d.clone());
            }
        }
    }
    defined.push(epilogue_label(&table.function));
    defined.extend(data.iter().map(|d| d.label.clone()));
    check_labels(&defined, &required)?;
    text.push_str(&epilogue(&table.function));
    Ok(FunctionAsm {
        name: table.function.clone(),
        text,
        data,
    })
}

/// Checks the labels of a whole-function fragment (direct or workflow mode).
pub fn function_from_fragment(name: &str, frag: &AssemblyFragment) -> Result<FunctionAsm, RebuildError> {
    let data_labels: Vec<String> = frag.data.iter().map(|d| d.label.clone()).collect();
    check_labels(frag.defined_labels.iter().chain(&data_labels), &frag.required_labels)?;
    Ok(FunctionAsm {
        name: name.to_string(),
        text: frag.text.clone(),
        data: frag.data.clone(),
    })
}

/// A complete `.s` module: functions in input order, then data, bss and read-only sections.
pub fn emit_module(functions: &[FunctionAsm], globals: &[GlobalPlan]) -> String {
    let mut s = String::new();
    if !functions.is_empty() {
        s.push_str("\t.text\n");
    }
    for f in functions {
        let _ = writeln!(s, "\t.globl {}\n\t.type {}, @function", f.name, f.name);
        s.push_str(&f.text);
        if !f.text.ends_with('\n') {
            s.push('\n');
        }
        let _ = writeln!(s, "\t.size {}, .-{}", f.name, f.name);
    }
    for (section, head) in [(Section::Data, "\t.data\n"), (Section::Bss, "\t.bss\n")] {
        let plans: Vec<&GlobalPlan> = globals.iter().filter(|g| g.section == section).collect();
        if !plans.is_empty() {
            s.push_str(head);
            for g in plans {
                s.push_str(&g.render());
            }
        }
    }
    let mut ro = String::new();
    let mut seen = HashSet::new();
    for d in functions.iter().flat_map(|f| &f.data) {
        if seen.insert(d.label.as_str()) {
            let _ = writeln!(ro, "\t.align {}\n{}:\n{}", d.align, d.label, d.directives.trim_end());
        }
    }
    for g in globals {
        ro.push_str(&g.render_strings());
    }
    if !ro.is_empty() {
        s.push_str("\t.section .rodata\n");
        s.push_str(&ro);
    }
    s.push_str("\t.section .note.GNU-stack,\"\",@progbits\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::cfg::JumpCond;
    use crate::frontend::parse_source;
    use crate::layout::LayoutEngine;
    use crate::mapping::allocate_frame;
    use crate::splitter::PartRole;

    fn table(src: &str) -> SymbolTable {
        let ast = parse_source(src).unwrap();
        let engine = LayoutEngine::from_ast(&ast);
        let f = ast.functions().next().unwrap();
        allocate_frame(&ast, f, &engine).unwrap()
    }

    fn part(kind: PartKind, payload: &str) -> ControlPart {
        ControlPart {
            id: 0,
            kind,
            role: PartRole::Control,
            payload: payload.into(),
            stmts: vec![],
            expr: None,
            cond: JumpCond::Always,
            back: false,
            loop_depth: 0,
            break_target: None,
            continue_target: None,
        }
    }

    #[test]
    fn empty_function_is_prologue_and_epilogue() {
        let t = table("void f(void) { }");
        let f = rebuild(&[(part(PartKind::SourceBlock, ""), AssemblyFragment::default())], &t).unwrap();
        assert_eq!(f.text, "f:\n\tpushq %rbp\n\tmovq %rsp, %rbp\n.L_f__epilogue:\n\tleave\n\tret\n");
    }

    #[test]
    fn parameters_are_spilled_by_width() {
        let t = table("long f(char c, double d, int *p) { return c; }");
        let p = prologue(&t);
        assert!(p.contains("movb %dil, -1(%rbp)"), "{p}");
        assert!(p.contains("movsd %xmm0, -16(%rbp)"), "{p}");
        assert!(p.contains("movq %rsi, -24(%rbp)"), "{p}");
    }

    #[test]
    fn label_errors() {
        let t = table("void f(void) { }");
        let jump = AssemblyFragment::from_text("\tjmp .L_f__1_end\n".into());
        let err = rebuild(&[(part(PartKind::UncondJump, ".L_f__1_end"), jump.clone())], &t).unwrap_err();
        assert_eq!(err, RebuildError::UndefinedLabel(".L_f__1_end".into()));
        let ok = rebuild(
            &[
                (part(PartKind::UncondJump, ".L_f__1_end"), jump),
                (part(PartKind::Label, ".L_f__1_end"), AssemblyFragment::default()),
            ],
            &t,
        );
        assert!(ok.is_ok());
        let dup = AssemblyFragment::from_text(".L_f__1_end:\n".into());
        let err = rebuild(
            &[
                (part(PartKind::Label, ".L_f__1_end"), AssemblyFragment::default()),
                (part(PartKind::SourceBlock, ""), dup),
            ],
            &t,
        )
        .unwrap_err();
        assert_eq!(err, RebuildError::DuplicateLabel(".L_f__1_end".into()));
    }

    #[test]
    fn concatenation_is_associative() {
        let t = table("void f(void) { }");
        let frags: Vec<(ControlPart, AssemblyFragment)> = ["\tnop\n", "\tmovq $1, %rax\n", "\taddq $2, %rax\n"]
            .iter()
            .map(|s| (part(PartKind::SourceBlock, ""), AssemblyFragment::from_text(s.to_string())))
            .collect();
        let all = rebuild(&frags, &t).unwrap().text;
        let two = rebuild(&frags[..2], &t).unwrap().text;
        let body_two = two.strip_suffix(&epilogue("f")).unwrap();
        assert_eq!(all, format!("{body_two}{}{}", frags[2].1.text, epilogue("f")));
    }

    #[test]
    fn module_has_sections_and_dedups_rodata() {
        let item = DataItem {
            label: ".LCd_3ff0000000000000".into(),
            align: 8,
            directives: "\t.quad 0x3ff0000000000000".into(),
        };
        let f = |n: &str| FunctionAsm {
            name: n.into(),
            text: format!("{n}:\n\tret\n"),
            data: vec![item.clone()],
        };
        let ast = parse_source("int g = 7; int z;").unwrap();
        let plans = crate::mapping::map_globals(&ast, &LayoutEngine::from_ast(&ast)).unwrap();
        let m = emit_module(&[f("a"), f("b")], &plans);
        assert_eq!(m.matches(".LCd_3ff0000000000000:").count(), 1);
        assert!(m.contains("\t.data\n") && m.contains("\t.bss\n") && m.contains(".section .rodata"));
        assert!(m.find("a:").unwrap() < m.find("b:").unwrap());
        let bare = emit_module(&[f("a")][..0], &[]);
        assert!(!bare.contains(".data"));
    }
}
