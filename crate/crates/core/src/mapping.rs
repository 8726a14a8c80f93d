//! Symbol table construction: globals to data labels, locals to frame slots.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::frontend::ast::*;
use crate::frontend::typeck::TypeEnv;
use crate::frontend::types::{IntKind, Type};
use crate::interp::{arith, Value};
use crate::layout::{LayoutEngine, LayoutError, TypeLayout};

pub const INT_ARG_REGS: [&str; 6] = ["rdi", "rsi", "rdx", "rcx", "r8", "r9"];
pub const FLOAT_ARG_REGS: [&str; 8] = ["xmm0", "xmm1", "xmm2", "xmm3", "xmm4", "xmm5", "xmm6", "xmm7"];
pub const CALLEE_SAVED: [&str; 5] = ["rbx", "r12", "r13", "r14", "r15"];

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MappingError {
    #[error("no layout for `{0}`: {1}")]
    LayoutMissing(String, LayoutError),
    #[error("`{0}` declared twice in one function")]
    DuplicateLocal(String),
    #[error("global `{0}` defined twice")]
    DuplicateGlobal(String),
    #[error("unsupported signature for `{0}`: {1}")]
    UnsupportedSignature(String, String),
    #[error("initializer of `{0}` is not a supported constant: {1}")]
    BadInitializer(String, String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Slot {
    pub name: String,
    /// Negative offset from %rbp.
    pub offset: i64,
    pub layout: TypeLayout,
    pub ty: Type,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamHome {
    pub name: String,
    pub register: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalSymbol {
    pub name: String,
    pub label: String,
    pub layout: TypeLayout,
    pub ty: Type,
    pub init: Option<Initializer>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymbolTable {
    pub function: String,
    pub ret: Type,
    pub globals: Vec<GlobalSymbol>,
    pub locals: Vec<Slot>,
    pub params: Vec<ParamHome>,
    pub frame_size: u64,
    pub saved_regs_note: Vec<String>,
}

impl SymbolTable {
    pub fn slot(&self, name: &str) -> Option<&Slot> {
        self.locals.iter().find(|s| s.name == name)
    }

    pub fn global(&self, name: &str) -> Option<&GlobalSymbol> {
        self.globals.iter().find(|g| g.name == name)
    }

    /// Plain-text record: one `name offset size align` line per slot, then
    /// parameter registers, slot types and globals.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# frame {} size {}", self.function, self.frame_size);
        for l in &self.locals {
            let _ = writeln!(s, "{} {} {} {}", l.name, l.offset, l.layout.size, l.layout.align);
        }
        s.push_str("# params\n");
        for p in &self.params {
            let _ = writeln!(s, "{} %{}", p.name, p.register);
        }
        s.push_str("# types\n");
        for l in &self.locals {
            let _ = writeln!(s, "{} {}", l.name, l.ty.declare(""));
        }
        s.push_str("# globals\n");
        for g in &self.globals {
            let _ = writeln!(s, "{} {} {} {} {}", g.name, g.label, g.layout.size, g.layout.align, g.ty.declare(""));
        }
        let _ = writeln!(s, "# preserve {}", self.saved_regs_note.join(" "));
        s
    }
}

fn align_down(x: i64, a: i64) -> i64 {
    x.div_euclid(a) * a
}

/// Every declaration in `f`, parameters first, then locals in preorder.
pub fn declarations(f: &FunctionDef) -> Vec<(String, Type)> {
    let mut out: Vec<(String, Type)> = f.sig.params.iter().map(|p| (p.name.clone(), p.ty.clone())).collect();
    for s in &f.body.items {
        s.walk(&mut |st| {
            if let StmtKind::Decl(ds) = &st.kind {
                out.extend(ds.iter().map(|d| (d.name.clone(), d.ty.clone())));
            }
        });
    }
    out
}

/// Assigns each parameter and local a slot below %rbp in declaration order.
/// Expects a renamed function.
pub fn allocate_frame(ast: &Ast, f: &FunctionDef, engine: &LayoutEngine) -> Result<SymbolTable, MappingError> {
    let name = f.name().to_string();
    if f.sig.variadic {
        return Err(MappingError::UnsupportedSignature(name, "variadic".into()));
    }
    if f.sig.ret.is_record() {
        return Err(MappingError::UnsupportedSignature(name, "record return".into()));
    }
    let mut params = Vec::new();
    let (mut ni, mut nf) = (0, 0);
    for p in &f.sig.params {
        let reg = if p.ty.is_floating() {
            nf += 1;
            FLOAT_ARG_REGS.get(nf - 1)
        } else if p.ty.is_scalar() {
            ni += 1;
            INT_ARG_REGS.get(ni - 1)
        } else {
            return Err(MappingError::UnsupportedSignature(name, format!("parameter {}", p.name)));
        };
        let Some(reg) = reg else {
            return Err(MappingError::UnsupportedSignature(name, "too many register arguments".into()));
        };
        params.push(ParamHome {
            name: p.name.clone(),
            register: reg.to_string(),
        });
    }
    let mut seen = HashSet::new();
    let mut locals = Vec::new();
    let mut cursor = 0i64;
    for (n, ty) in declarations(f) {
        if !seen.insert(n.clone()) {
            return Err(MappingError::DuplicateLocal(n));
        }
        let layout = engine
            .compute_layout(&ty)
            .map_err(|e| MappingError::LayoutMissing(n.clone(), e))?;
        cursor = align_down(cursor - layout.size as i64, layout.align.max(1) as i64);
        locals.push(Slot {
            name: n,
            offset: cursor,
            layout,
            ty,
        });
    }
    let frame_size = ((-cursor) as u64).div_ceil(16) * 16;
    Ok(SymbolTable {
        function: name,
        ret: f.sig.ret.clone(),
        globals: global_symbols(ast, engine)?,
        locals,
        params,
        frame_size,
        saved_regs_note: CALLEE_SAVED.iter().map(|s| s.to_string()).collect(),
    })
}

pub fn global_symbols(ast: &Ast, engine: &LayoutEngine) -> Result<Vec<GlobalSymbol>, MappingError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for g in ast.globals() {
        if !seen.insert(g.name.clone()) {
            return Err(MappingError::DuplicateGlobal(g.name.clone()));
        }
        let layout = engine
            .compute_layout(&g.ty)
            .map_err(|e| MappingError::LayoutMissing(g.name.clone(), e))?;
        out.push(GlobalSymbol {
            name: g.name.clone(),
            label: g.name.clone(),
            layout,
            ty: g.ty.clone(),
            init: g.init.clone(),
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Section {
    Data,
    Bss,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataPiece {
    /// Little-endian scalar of 1, 2, 4 or 8 bytes.
    Scalar { width: u64, value: u64 },
    Zero(u64),
    Bytes(Vec<u8>),
    /// Address of `symbol` plus a byte addend.
    Address { symbol: String, addend: i64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalPlan {
    pub label: String,
    pub section: Section,
    pub align: u64,
    pub size: u64,
    pub pieces: Vec<DataPiece>,
    /// Read-only string literals referenced by pointer initializers.
    pub strings: Vec<(String, Vec<u8>)>,
}

fn string_directive(bytes: &[u8]) -> String {
    let body: Vec<String> = bytes.iter().map(|b| b.to_string()).collect();
    format!("\t.byte {}\n", body.join(","))
}

impl GlobalPlan {
    /// Directives from the label through the last data byte (no section switch).
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "\t.globl {}", self.label);
        let _ = writeln!(s, "\t.align {}", self.align);
        let _ = writeln!(s, "\t.type {}, @object", self.label);
        let _ = writeln!(s, "\t.size {}, {}", self.label, self.size);
        let _ = writeln!(s, "{}:", self.label);
        for p in &self.pieces {
            match p {
                DataPiece::Scalar { width, value } => {
                    let d = match width {
                        1 => ".byte",
                        2 => ".value",
                        4 => ".long",
                        _ => ".quad",
                    };
                    let _ = writeln!(s, "\t{d} {value}");
                }
                DataPiece::Zero(n) => {
                    let _ = writeln!(s, "\t.zero {n}");
                }
                DataPiece::Bytes(b) => s.push_str(&string_directive(b)),
                DataPiece::Address { symbol, addend } => {
                    if *addend == 0 {
                        let _ = writeln!(s, "\t.quad {symbol}");
                    } else {
                        let _ = writeln!(s, "\t.quad {symbol}{addend:+}");
                    }
                }
            }
        }
        s
    }

    pub fn render_strings(&self) -> String {
        let mut s = String::new();
        for (label, bytes) in &self.strings {
            let _ = writeln!(s, "{label}:");
            let mut b = bytes.clone();
            b.push(0);
            s.push_str(&string_directive(&b));
        }
        s
    }
}

/// Typed constant folding for static initializers.
pub fn eval_const(e: &Expr, env: &TypeEnv, engine: &LayoutEngine) -> Result<Value, String> {
    let err = |m: &str| Err(m.to_string());
    match &e.kind {
        ExprKind::IntLit(v, k) => Ok(Value::Int(k.wrap(*v as i128), *k)),
        ExprKind::FloatLit(v, single) => Ok(if *single {
            Value::Float(*v as f32 as f64)
        } else {
            Value::Double(*v)
        }),
        ExprKind::Unary(op, x) => {
            let v = eval_const(x, env, engine)?;
            match (op, v) {
                (UnOp::Plus, Value::Int(a, k)) => Ok(Value::Int(a, k.promote())),
                (UnOp::Plus, f) => Ok(f),
                (UnOp::Neg, Value::Int(a, k)) => Ok(Value::Int(k.promote().wrap(-a), k.promote())),
                (UnOp::Neg, Value::Float(f)) => Ok(Value::Float(-f)),
                (UnOp::Neg, Value::Double(f)) => Ok(Value::Double(-f)),
                (UnOp::BitNot, Value::Int(a, k)) => Ok(Value::Int(k.promote().wrap(!a), k.promote())),
                (UnOp::Not, Value::Int(a, _)) => Ok(Value::int((a == 0) as i64)),
                (UnOp::Not, Value::Float(f) | Value::Double(f)) => Ok(Value::int((f == 0.0) as i64)),
                _ => err("operator not allowed in a constant"),
            }
        }
        ExprKind::Binary(op, a, b) if op.is_logical() => {
            let x = truthy(eval_const(a, env, engine)?);
            if (*op == BinOp::LogAnd && !x) || (*op == BinOp::LogOr && x) {
                return Ok(Value::int(x as i64));
            }
            Ok(Value::int(truthy(eval_const(b, env, engine)?) as i64))
        }
        ExprKind::Binary(op, a, b) => {
            arith(*op, eval_const(a, env, engine)?, eval_const(b, env, engine)?).map_err(|e| e.to_string())
        }
        ExprKind::Cond(c, t, f) => {
            if truthy(eval_const(c, env, engine)?) {
                eval_const(t, env, engine)
            } else {
                eval_const(f, env, engine)
            }
        }
        ExprKind::Cast(ty, x) => eval_const(x, env, engine)?.convert(ty).map_err(|e| e.to_string()),
        ExprKind::SizeofType(ty) => sizeof(ty, engine),
        ExprKind::SizeofExpr(x) => sizeof(&env.type_of(x).map_err(|e| e.to_string())?, engine),
        _ => err("not a constant expression"),
    }
}

fn truthy(v: Value) -> bool {
    match v {
        Value::Int(a, _) => a != 0,
        Value::Float(f) | Value::Double(f) => f != 0.0,
        Value::Void => false,
    }
}

fn sizeof(ty: &Type, engine: &LayoutEngine) -> Result<Value, String> {
    let l = engine.compute_layout(ty).map_err(|e| e.to_string())?;
    Ok(Value::Int(l.size as i128, IntKind::ULong))
}

struct Encoder<'a> {
    name: String,
    env: &'a TypeEnv,
    engine: &'a LayoutEngine,
    pieces: Vec<DataPiece>,
    strings: Vec<(String, Vec<u8>)>,
    globals: &'a BTreeMap<String, Type>,
}

impl Encoder<'_> {
    fn bad(&self, m: impl Into<String>) -> MappingError {
        MappingError::BadInitializer(self.name.clone(), m.into())
    }

    fn zero(&mut self, n: u64) {
        if n == 0 {
            return;
        }
        if let Some(DataPiece::Zero(z)) = self.pieces.last_mut() {
            *z += n;
        } else {
            self.pieces.push(DataPiece::Zero(n));
        }
    }

    fn scalar(&mut self, ty: &Type, e: &Expr) -> Result<(), MappingError> {
        if ty.is_pointer() {
            return self.pointer(e);
        }
        let v = eval_const(e, self.env, self.engine)
            .and_then(|v| v.convert(ty).map_err(|x| x.to_string()))
            .map_err(|m| self.bad(m))?;
        let (width, value) = match v {
            Value::Int(a, k) => (k.size(), a as u64 & mask(k.size())),
            Value::Float(f) => (4, (f as f32).to_bits() as u64),
            Value::Double(f) => (8, f.to_bits()),
            Value::Void => return Err(self.bad("void value")),
        };
        self.pieces.push(DataPiece::Scalar { width, value });
        Ok(())
    }

    fn pointer(&mut self, e: &Expr) -> Result<(), MappingError> {
        let piece = match &e.kind {
            ExprKind::StrLit(bytes) => {
                let label = format!(".LS_{}_{}", self.name, self.strings.len());
                self.strings.push((label.clone(), bytes.clone()));
                DataPiece::Address {
                    symbol: label,
                    addend: 0,
                }
            }
            ExprKind::Ident(g) if self.globals.get(g).is_some_and(|t| t.is_array()) => DataPiece::Address {
                symbol: g.clone(),
                addend: 0,
            },
            ExprKind::Unary(UnOp::AddrOf, inner) => match &inner.kind {
                ExprKind::Ident(g) if self.globals.contains_key(g) => DataPiece::Address {
                    symbol: g.clone(),
                    addend: 0,
                },
                _ => return Err(self.bad("address of a non-global")),
            },
            ExprKind::Cast(_, inner) => return self.pointer(inner),
            _ => match eval_const(e, self.env, self.engine) {
                Ok(Value::Int(0, _)) => DataPiece::Scalar { width: 8, value: 0 },
                _ => return Err(self.bad("pointer initializer must be 0, a string or &global")),
            },
        };
        self.pieces.push(piece);
        Ok(())
    }

    fn value(&mut self, ty: &Type, init: Option<&Initializer>) -> Result<(), MappingError> {
        let layout = self
            .engine
            .compute_layout(ty)
            .map_err(|e| MappingError::LayoutMissing(self.name.clone(), e))?;
        let Some(init) = init else {
            self.zero(layout.size);
            return Ok(());
        };
        match (ty, init) {
            (Type::Array(elem, Some(n)), Initializer::Expr(Expr { kind: ExprKind::StrLit(b), .. }))
                if elem.int_kind().is_some_and(|k| k.size() == 1) =>
            {
                let mut bytes = b.clone();
                bytes.resize(*n as usize, 0);
                self.pieces.push(DataPiece::Bytes(bytes));
                Ok(())
            }
            (Type::Array(elem, Some(n)), Initializer::List(items, _)) => {
                if items.len() as u64 > *n {
                    return Err(self.bad("too many array elements"));
                }
                for i in 0..*n {
                    self.value(elem, items.get(i as usize))?;
                }
                Ok(())
            }
            (Type::Record(kind, tag), Initializer::List(items, _)) => {
                let def = self
                    .engine
                    .record(tag)
                    .cloned()
                    .ok_or_else(|| self.bad(format!("unknown record {tag}")))?;
                let limit = if *kind == crate::frontend::RecordKind::Union { 1 } else { def.fields.len() };
                if items.len() > limit {
                    return Err(self.bad("too many initializers"));
                }
                let mut pos = 0;
                for (i, (f, m)) in def.fields.iter().zip(&layout.members).enumerate().take(limit) {
                    self.zero(m.offset - pos);
                    self.value(&f.ty, items.get(i))?;
                    pos = m.offset + m.layout.size;
                }
                self.zero(layout.size - pos);
                Ok(())
            }
            (t, Initializer::Expr(e)) if t.is_scalar() => self.scalar(t, e),
            (t, Initializer::List(items, _)) if t.is_scalar() && items.len() == 1 => {
                self.value(t, items.first())
            }
            _ => Err(self.bad("initializer shape does not match the type")),
        }
    }
}

fn mask(width: u64) -> u64 {
    if width >= 8 {
        u64::MAX
    } else {
        (1u64 << (width * 8)) - 1
    }
}

/// One data-section plan per global, in declaration order.
pub fn map_globals(ast: &Ast, engine: &LayoutEngine) -> Result<Vec<GlobalPlan>, MappingError> {
    let env = TypeEnv::from_ast(ast);
    let syms = global_symbols(ast, engine)?;
    let globals: BTreeMap<String, Type> = syms.iter().map(|g| (g.name.clone(), g.ty.clone())).collect();
    let mut out = Vec::new();
    for g in syms {
        let mut enc = Encoder {
            name: g.name.clone(),
            env: &env,
            engine,
            pieces: Vec::new(),
            strings: Vec::new(),
            globals: &globals,
        };
        enc.value(&g.ty, g.init.as_ref())?;
        let section = if g.init.is_some() { Section::Data } else { Section::Bss };
        out.push(GlobalPlan {
            label: g.label,
            section,
            align: g.layout.align,
            size: g.layout.size,
            pieces: enc.pieces,
            strings: enc.strings,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    Overlap(String, String),
    Misaligned(String),
    OutOfBounds(String),
    FrameMisaligned(u64),
}

/// Checks slot intervals for pairwise disjointness, alignment and frame bounds.
pub fn check_no_overlap(table: &SymbolTable) -> Vec<Violation> {
    let mut v = Vec::new();
    if table.frame_size % 16 != 0 {
        v.push(Violation::FrameMisaligned(table.frame_size));
    }
    let lo = -(table.frame_size as i64);
    for (i, a) in table.locals.iter().enumerate() {
        let a_end = a.offset + a.layout.size as i64;
        if a.offset.rem_euclid(a.layout.align.max(1) as i64) != 0 {
            v.push(Violation::Misaligned(a.name.clone()));
        }
        if a.offset < lo || a_end > 0 {
            v.push(Violation::OutOfBounds(a.name.clone()));
        }
        for b in &table.locals[i + 1..] {
            let b_end = b.offset + b.layout.size as i64;
            if a.offset < b_end && b.offset < a_end {
                v.push(Violation::Overlap(a.name.clone(), b.name.clone()));
            }
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;

    fn table(src: &str) -> SymbolTable {
        let ast = parse_source(src).unwrap();
        let e = LayoutEngine::from_ast(&ast);
        let t = allocate_frame(&ast, ast.functions().next().unwrap(), &e).unwrap();
        t
    }

    #[test]
    fn frame_examples() {
        let t = table("void f(void){ }");
        assert_eq!(t.frame_size, 0);
        assert!(t.locals.is_empty());

        let t = table("void f(void){ int a; double d; }");
        assert_eq!(t.slot("a").unwrap().offset, -4);
        assert_eq!(t.slot("d").unwrap().offset, -16);
        assert_eq!(t.frame_size, 16);
        assert!(check_no_overlap(&t).is_empty());

        let t = table("void f(void){ char buf[13]; int n; }");
        assert_eq!(t.frame_size, 32);
        assert!(check_no_overlap(&t).is_empty());
    }

    #[test]
    fn params_take_registers_in_class_order() {
        let t = table("double f(int a, double x, long *p, float y){ return x; }");
        let regs: Vec<&str> = t.params.iter().map(|p| p.register.as_str()).collect();
        assert_eq!(regs, ["rdi", "xmm0", "rsi", "xmm1"]);
        assert_eq!(t.locals.len(), 4);
        let ast = parse_source("int f(int a,int b,int c,int d,int e,int g,int h){ return 0; }").unwrap();
        let err = allocate_frame(&ast, ast.function("f").unwrap(), &LayoutEngine::default()).unwrap_err();
        assert!(matches!(err, MappingError::UnsupportedSignature(..)));
    }

    #[test]
    fn checker_finds_mutations() {
        let mut t = table("void f(void){ long a; long b; }");
        t.locals[1].offset = t.locals[0].offset;
        assert_eq!(check_no_overlap(&t), vec![Violation::Overlap("a".into(), "b".into())]);
        let mut t = table("void f(void){ int a; }");
        t.locals[0].offset = -(t.frame_size as i64) - 4;
        assert_eq!(check_no_overlap(&t), vec![Violation::OutOfBounds("a".into())]);
    }

    #[test]
    fn duplicate_local_is_rejected() {
        let ast = parse_source("void f(void){ int a; { int a; } }").unwrap();
        let err = allocate_frame(&ast, ast.function("f").unwrap(), &LayoutEngine::default()).unwrap_err();
        assert_eq!(err, MappingError::DuplicateLocal("a".into()));
    }

    #[test]
    fn global_plans() {
        let ast = parse_source(
            "int g = 7; double arr[3]; short s = -2; char msg[4] = \"hi\"; const char *p = \"yo\";\n\
             struct P { char c; long l; } pt = { 1, -1 }; int *ip = &g; float fl = 1.5f;",
        )
        .unwrap();
        let plans = map_globals(&ast, &LayoutEngine::from_ast(&ast)).unwrap();
        let g = &plans[0];
        assert_eq!((g.section, g.align, g.size), (Section::Data, 4, 4));
        assert_eq!(g.pieces, vec![DataPiece::Scalar { width: 4, value: 7 }]);
        let arr = &plans[1];
        assert_eq!((arr.section, arr.align, arr.size), (Section::Bss, 8, 24));
        assert_eq!(plans[2].pieces, vec![DataPiece::Scalar { width: 2, value: 0xfffe }]);
        assert_eq!(plans[3].pieces, vec![DataPiece::Bytes(vec![b'h', b'i', 0, 0])]);
        assert_eq!(plans[4].strings.len(), 1);
        assert_eq!(
            plans[5].pieces,
            vec![
                DataPiece::Scalar { width: 1, value: 1 },
                DataPiece::Zero(7),
                DataPiece::Scalar { width: 8, value: u64::MAX }
            ]
        );
        assert!(plans[6].render().contains(".quad g"));
        assert_eq!(plans[7].pieces, vec![DataPiece::Scalar { width: 4, value: 1.5f32.to_bits() as u64 }]);
    }

    #[test]
    fn duplicate_global_is_rejected() {
        let ast = parse_source("int g; int g;").unwrap();
        assert_eq!(
            map_globals(&ast, &LayoutEngine::default()).unwrap_err(),
            MappingError::DuplicateGlobal("g".into())
        );
    }

    #[test]
    fn text_record_lists_slots() {
        let t = table("int g; int f(int a){ int b; return a + b + g; }");
        let text = t.to_text();
        assert!(text.contains("a -4 4 4\nb -8 4 4\n"), "{text}");
        assert!(text.contains("a %rdi"), "{text}");
        assert!(text.contains("g g 4 4 int"), "{text}");
    }
}
