//! Deterministic reference translator: unoptimized AT&T x86-64 for the subset.
//!
//! Value convention: integers live in %rax, sign- or zero-extended to 64 bits
//! according to their kind, pointers in %rax, `float`/`double` in %xmm0,
//! arrays and records as their address in %rax. %rcx/%xmm1 hold right
//! operands, %rdi addresses, %r11/%xmm2/%xmm3 are conversion scratch.

use std::fmt::Write as _;

use crate::frontend::ast::*;
use crate::frontend::cfg::JumpCond;
use crate::frontend::consteval::eval_int;
use crate::frontend::typeck::{promote, TypeEnv};
use crate::frontend::types::{usual_arithmetic, IntKind, RecordKind, Type};
use crate::layout::LayoutEngine;
use crate::mapping::{allocate_frame, SymbolTable, FLOAT_ARG_REGS, INT_ARG_REGS};
use crate::rebuild::{epilogue, epilogue_label, prologue};
use crate::splitter::{PartKind, PartRole};
use crate::transforms::rename_in;

use super::{AssemblyFragment, Backend, DataItem, Mode, PartContext, Program, TranslateError, TranslationRequest};

type R<T> = Result<T, TranslateError>;

fn unsupported<T>(what: impl Into<String>) -> R<T> {
    Err(TranslateError::Unsupported(what.into()))
}

/// Memory operand of an lvalue.
enum Place {
    Frame(i64),
    Symbol(String, i64),
    /// Address already computed into %rax.
    InRax,
}

impl Place {
    fn operand(&self) -> String {
        match self {
            Place::Frame(d) => format!("{d}(%rbp)"),
            Place::Symbol(s, 0) => format!("{s}(%rip)"),
            Place::Symbol(s, d) => format!("{s}{d:+}(%rip)"),
            Place::InRax => "(%rax)".into(),
        }
    }

    fn shifted(self, by: i64) -> Place {
        match self {
            Place::Frame(d) => Place::Frame(d + by),
            Place::Symbol(s, d) => Place::Symbol(s, d + by),
            Place::InRax => Place::InRax,
        }
    }
}

fn fits_i32(v: i128) -> bool {
    (i32::MIN as i128..=i32::MAX as i128).contains(&v)
}

/// 64-bit register image of a value of kind `k`.
fn image(k: IntKind, v: i128) -> i64 {
    let w = k.wrap(v);
    if k.is_signed() {
        w as i64
    } else {
        w as u64 as i64
    }
}

struct Gen<'a> {
    fname: String,
    env: TypeEnv,
    layouts: &'a LayoutEngine,
    table: &'a SymbolTable,
    out: String,
    data: Vec<DataItem>,
    /// Eight-byte units pushed since the frame was set up.
    depth: usize,
    prefix: String,
    next: usize,
    breaks: Vec<String>,
    continues: Vec<String>,
}

impl<'a> Gen<'a> {
    fn new(program: &'a Program, table: &'a SymbolTable, prefix: String) -> Gen<'a> {
        let mut env = program.env.clone();
        for s in &table.locals {
            env.vars.insert(s.name.clone(), s.ty.clone());
        }
        Gen {
            fname: table.function.clone(),
            env,
            layouts: &program.layouts,
            table,
            out: String::new(),
            data: Vec::new(),
            depth: 0,
            prefix,
            next: 0,
            breaks: Vec::new(),
            continues: Vec::new(),
        }
    }

    fn emit(&mut self, line: impl AsRef<str>) {
        self.out.push('\t');
        self.out.push_str(line.as_ref());
        self.out.push('\n');
    }

    fn label(&mut self, name: &str) {
        let _ = writeln!(self.out, "{name}:");
    }

    fn fresh(&mut self) -> String {
        self.next += 1;
        format!("{}{}", self.prefix, self.next)
    }

    fn user_label(&self, name: &str) -> String {
        format!(".L_{}__u_{name}", self.fname)
    }

    fn ty(&self, e: &Expr) -> R<Type> {
        self.env.type_of(e).map_err(|err| TranslateError::Unsupported(err.0))
    }

    fn size_of(&self, t: &Type) -> R<u64> {
        self.layouts
            .compute_layout(t)
            .map(|l| l.size)
            .map_err(|e| TranslateError::Unsupported(e.to_string()))
    }

    fn member_offset(&self, rec: &Type, field: &str) -> R<(i64, Type)> {
        let layout = self
            .layouts
            .compute_layout(rec)
            .map_err(|e| TranslateError::Unsupported(e.to_string()))?;
        let m = layout
            .members
            .iter()
            .find(|m| m.name == field)
            .ok_or_else(|| TranslateError::Unsupported(format!("no member {field}")))?;
        Ok((m.offset as i64, self.env.field(rec, field).map_err(|e| TranslateError::Unsupported(e.0))?))
    }

    fn constant(&mut self, prefix: &str, hex: String, align: u64, directive: &str) -> String {
        let label = format!(".LC{prefix}_{hex}");
        if !self.data.iter().any(|d| d.label == label) {
            self.data.push(DataItem {
                label: label.clone(),
                align,
                directives: format!("\t{directive} 0x{hex}"),
            });
        }
        label
    }

    fn double_const(&mut self, v: f64) -> String {
        self.constant("d", format!("{:016x}", v.to_bits()), 8, ".quad")
    }

    fn float_const(&mut self, v: f32) -> String {
        self.constant("f", format!("{:08x}", v.to_bits()), 4, ".long")
    }

    fn string_const(&mut self, bytes: &[u8]) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        let label = format!(".LSTR_{h:016x}");
        if !self.data.iter().any(|d| d.label == label) {
            let mut all: Vec<String> = bytes.iter().map(|b| b.to_string()).collect();
            all.push("0".into());
            self.data.push(DataItem {
                label: label.clone(),
                align: 1,
                directives: format!("\t.byte {}", all.join(",")),
            });
        }
        label
    }

    // ---- stack ----

    fn push(&mut self, t: &Type) {
        match t {
            Type::Float => {
                self.emit("subq $8, %rsp");
                self.emit("movss %xmm0, (%rsp)");
            }
            Type::Double => {
                self.emit("subq $8, %rsp");
                self.emit("movsd %xmm0, (%rsp)");
            }
            _ => self.emit("pushq %rax"),
        }
        self.depth += 1;
    }

    /// Pops into %rax/%xmm0 after moving the current value to %rcx/%xmm1.
    fn pop_under(&mut self, t: &Type) {
        match t {
            Type::Float => {
                self.emit("movaps %xmm0, %xmm1");
                self.emit("movss (%rsp), %xmm0");
                self.emit("addq $8, %rsp");
            }
            Type::Double => {
                self.emit("movaps %xmm0, %xmm1");
                self.emit("movsd (%rsp), %xmm0");
                self.emit("addq $8, %rsp");
            }
            _ => {
                self.emit("movq %rax, %rcx");
                self.emit("popq %rax");
            }
        }
        self.depth -= 1;
    }

    fn pop_reg(&mut self, reg: &str) {
        self.emit(format!("popq %{reg}"));
        self.depth -= 1;
    }

    // ---- values ----

    fn normalize(&mut self, k: IntKind) {
        match k {
            IntKind::Char => self.emit("movsbq %al, %rax"),
            IntKind::UChar => self.emit("movzbl %al, %eax"),
            IntKind::Short => self.emit("movswq %ax, %rax"),
            IntKind::UShort => self.emit("movzwl %ax, %eax"),
            IntKind::Int => self.emit("movslq %eax, %rax"),
            IntKind::UInt => self.emit("movl %eax, %eax"),
            IntKind::Long | IntKind::ULong => {}
        }
    }

    fn load(&mut self, t: &Type, at: &str) -> R<()> {
        match t {
            Type::Int(k) => match k {
                IntKind::Char => self.emit(format!("movsbq {at}, %rax")),
                IntKind::UChar => self.emit(format!("movzbl {at}, %eax")),
                IntKind::Short => self.emit(format!("movswq {at}, %rax")),
                IntKind::UShort => self.emit(format!("movzwl {at}, %eax")),
                IntKind::Int => self.emit(format!("movslq {at}, %rax")),
                IntKind::UInt => self.emit(format!("movl {at}, %eax")),
                IntKind::Long | IntKind::ULong => self.emit(format!("movq {at}, %rax")),
            },
            Type::Pointer(_) => self.emit(format!("movq {at}, %rax")),
            Type::Float => self.emit(format!("movss {at}, %xmm0")),
            Type::Double => self.emit(format!("movsd {at}, %xmm0")),
            Type::Array(..) | Type::Record(..) => {
                if at != "(%rax)" {
                    self.emit(format!("leaq {at}, %rax"));
                }
            }
            Type::Void => return unsupported("load of void"),
        }
        Ok(())
    }

    /// Stores the current value of type `t` to `at`; leaves the value in place.
    fn store(&mut self, t: &Type, at: &str) -> R<()> {
        match t {
            Type::Float => self.emit(format!("movss %xmm0, {at}")),
            Type::Double => self.emit(format!("movsd %xmm0, {at}")),
            Type::Record(..) => {
                let n = self.size_of(t)?;
                self.emit(format!("leaq {at}, %rdi"));
                self.emit("movq %rdi, %rdx");
                self.emit("movq %rax, %rsi");
                self.emit(format!("movq ${n}, %rcx"));
                self.emit("rep movsb");
                self.emit("movq %rdx, %rax");
            }
            Type::Array(..) | Type::Void => return unsupported(format!("assignment to {t}")),
            _ => match self.size_of(t)? {
                1 => self.emit(format!("movb %al, {at}")),
                2 => self.emit(format!("movw %ax, {at}")),
                4 => self.emit(format!("movl %eax, {at}")),
                _ => self.emit(format!("movq %rax, {at}")),
            },
        }
        Ok(())
    }

    /// Converts the current value from `from` to `to`. Touches only %rax,
    /// %xmm0 and the scratch registers.
    fn convert(&mut self, from: &Type, to: &Type) -> R<()> {
        let from = from.decay();
        match (&from, to) {
            (_, Type::Void) => {}
            (Type::Int(_), Type::Int(k)) => self.normalize(*k),
            (Type::Pointer(_), Type::Int(k)) => self.normalize(*k),
            (Type::Int(_) | Type::Pointer(_), Type::Pointer(_)) => {}
            (Type::Int(k), Type::Float | Type::Double) => {
                let single = matches!(to, Type::Float);
                let (cvt, add) = if single { ("cvtsi2ssq", "addss") } else { ("cvtsi2sdq", "addsd") };
                if *k == IntKind::ULong {
                    let big = self.fresh();
                    let done = self.fresh();
                    self.emit("testq %rax, %rax");
                    self.emit(format!("js {big}"));
                    self.emit(format!("{cvt} %rax, %xmm0"));
                    self.emit(format!("jmp {done}"));
                    self.label(&big);
                    self.emit("movq %rax, %r11");
                    self.emit("shrq %r11");
                    self.emit("andl $1, %eax");
                    self.emit("orq %rax, %r11");
                    self.emit(format!("{cvt} %r11, %xmm0"));
                    self.emit(format!("{add} %xmm0, %xmm0"));
                    self.label(&done);
                } else {
                    self.emit(format!("{cvt} %rax, %xmm0"));
                }
            }
            (Type::Float | Type::Double, Type::Int(k)) => {
                let single = matches!(from, Type::Float);
                let (cvt, sub, cmp, mov) = if single {
                    ("cvttss2siq", "subss", "ucomiss", "movss")
                } else {
                    ("cvttsd2siq", "subsd", "ucomisd", "movsd")
                };
                if *k == IntKind::ULong {
                    let limit = if single {
                        self.float_const(9.223_372e18)
                    } else {
                        self.double_const(9.223_372_036_854_775_808e18)
                    };
                    let big = self.fresh();
                    let done = self.fresh();
                    self.emit(format!("{mov} {limit}(%rip), %xmm2"));
                    self.emit(format!("{cmp} %xmm2, %xmm0"));
                    self.emit(format!("jae {big}"));
                    self.emit(format!("{cvt} %xmm0, %rax"));
                    self.emit(format!("jmp {done}"));
                    self.label(&big);
                    self.emit(format!("{sub} %xmm2, %xmm0"));
                    self.emit(format!("{cvt} %xmm0, %rax"));
                    self.emit("btcq $63, %rax");
                    self.label(&done);
                } else {
                    self.emit(format!("{cvt} %xmm0, %rax"));
                    self.normalize(*k);
                }
            }
            (Type::Float, Type::Double) => self.emit("cvtss2sd %xmm0, %xmm0"),
            (Type::Double, Type::Float) => self.emit("cvtsd2ss %xmm0, %xmm0"),
            (Type::Float, Type::Float) | (Type::Double, Type::Double) => {}
            (Type::Record(..), Type::Record(..)) if from == *to => {}
            (f, t) => return unsupported(format!("conversion from {f} to {t}")),
        }
        Ok(())
    }

    /// Replaces the current value with 0 or 1 in %rax.
    fn to_bool(&mut self, t: &Type) -> R<()> {
        match t.decay() {
            Type::Float | Type::Double => {
                let cmp = if matches!(t, Type::Float) { "ucomiss" } else { "ucomisd" };
                self.emit("xorps %xmm2, %xmm2");
                self.emit(format!("{cmp} %xmm2, %xmm0"));
                self.emit("setne %al");
                self.emit("setp %r11b");
                self.emit("orb %r11b, %al");
                self.emit("movzbl %al, %eax");
            }
            Type::Int(_) | Type::Pointer(_) => {
                self.emit("testq %rax, %rax");
                self.emit("setne %al");
                self.emit("movzbl %al, %eax");
            }
            other => return unsupported(format!("{other} used as a condition")),
        }
        Ok(())
    }

    /// Evaluates `e` and jumps to `target` when it is false.
    fn branch_false(&mut self, e: &Expr, target: &str) -> R<()> {
        let t = self.expr(e)?;
        if t.is_floating() {
            self.to_bool(&t)?;
        }
        self.emit("testq %rax, %rax");
        self.emit(format!("je {target}"));
        Ok(())
    }

    fn check_immediate(&self, target: &Type, e: &Expr) -> R<()> {
        let Type::Int(k) = target else { return Ok(()) };
        let literal = match &e.kind {
            ExprKind::IntLit(..) => true,
            ExprKind::Unary(UnOp::Neg, inner) => matches!(inner.kind, ExprKind::IntLit(..)),
            _ => false,
        };
        if !literal {
            return Ok(());
        }
        if let Some(v) = eval_int(e) {
            let v = v as i128;
            let bits = k.bits();
            if v < -(1i128 << (bits - 1)) || v > (1i128 << bits) - 1 {
                return Err(TranslateError::ImmediateOverflow { value: v, width: bits });
            }
        }
        Ok(())
    }

    // ---- lvalues ----

    fn place(&mut self, e: &Expr) -> R<(Place, Type)> {
        match &e.kind {
            ExprKind::Ident(n) => {
                if let Some(s) = self.table.slot(n) {
                    return Ok((Place::Frame(s.offset), s.ty.clone()));
                }
                if let Some(g) = self.table.global(n) {
                    return Ok((Place::Symbol(g.label.clone(), 0), g.ty.clone()));
                }
                unsupported(format!("no storage for `{n}`"))
            }
            ExprKind::Unary(UnOp::Deref, p) => {
                let t = self.ty(e)?;
                self.expr(p)?;
                Ok((Place::InRax, t))
            }
            ExprKind::Index(..) => {
                let t = self.ty(e)?;
                self.index_address(e)?;
                Ok((Place::InRax, t))
            }
            ExprKind::Member { base, field, arrow } => {
                if *arrow {
                    let bt = self.ty(base)?.decay();
                    let rec = bt.pointee().cloned().unwrap_or(Type::Void);
                    let (off, ft) = self.member_offset(&rec, field)?;
                    self.expr(base)?;
                    if off != 0 {
                        self.emit(format!("addq ${off}, %rax"));
                    }
                    return Ok((Place::InRax, ft));
                }
                let rec = self.ty(base)?;
                let (off, ft) = self.member_offset(&rec, field)?;
                let p = if is_lvalue(base) {
                    self.place(base)?.0
                } else {
                    self.expr(base)?;
                    Place::InRax
                };
                Ok(match p {
                    Place::InRax => {
                        if off != 0 {
                            self.emit(format!("addq ${off}, %rax"));
                        }
                        (Place::InRax, ft)
                    }
                    p => (p.shifted(off), ft),
                })
            }
            ExprKind::StrLit(_) => {
                let t = self.ty(e)?;
                self.expr(e)?;
                Ok((Place::InRax, t))
            }
            _ => unsupported("expression is not an lvalue"),
        }
    }

    fn address(&mut self, e: &Expr) -> R<()> {
        let (p, _) = self.place(e)?;
        if !matches!(p, Place::InRax) {
            self.emit(format!("leaq {}, %rax", p.operand()));
        }
        Ok(())
    }

    /// Scales the integer in %rax (of type `t`) by `size` as a 64-bit offset.
    fn scale(&mut self, t: &Type, size: u64) -> R<()> {
        self.convert(t, &Type::Int(IntKind::Long))?;
        if size != 1 {
            self.emit(format!("imulq ${size}, %rax"));
        }
        Ok(())
    }

    /// Address of `a[i]` (either operand may be the pointer) into %rax.
    fn index_address(&mut self, e: &Expr) -> R<()> {
        let ExprKind::Index(a, i) = &e.kind else { unreachable!() };
        let elem = self.ty(e)?;
        let size = self.size_of(&elem)?;
        let ta = self.ty(a)?;
        let ti = self.ty(i)?;
        self.pointer_add(a, &ta, i, &ti, size, false)
    }

    fn pointer_add(&mut self, a: &Expr, ta: &Type, b: &Expr, tb: &Type, size: u64, subtract: bool) -> R<()> {
        let a_is_ptr = ta.decay().is_pointer();
        self.expr(a)?;
        if !a_is_ptr {
            self.scale(ta, size)?;
        }
        self.emit("pushq %rax");
        self.depth += 1;
        self.expr(b)?;
        if a_is_ptr {
            self.scale(tb, size)?;
        }
        self.pop_under(&Type::Int(IntKind::Long));
        self.emit(if subtract { "subq %rcx, %rax" } else { "addq %rcx, %rax" });
        Ok(())
    }

    // ---- expressions ----

    /// Emits code for `e` and returns its type.
    fn expr(&mut self, e: &Expr) -> R<Type> {
        let t = self.ty(e)?;
        match &e.kind {
            ExprKind::IntLit(v, k) => {
                let v = image(*k, *v as i128);
                if fits_i32(v as i128) {
                    self.emit(format!("movq ${v}, %rax"));
                } else {
                    self.emit(format!("movabsq ${v}, %rax"));
                }
            }
            ExprKind::FloatLit(v, single) => {
                if *single {
                    let l = self.float_const(*v as f32);
                    self.emit(format!("movss {l}(%rip), %xmm0"));
                } else {
                    let l = self.double_const(*v);
                    self.emit(format!("movsd {l}(%rip), %xmm0"));
                }
            }
            ExprKind::StrLit(bytes) => {
                let l = self.string_const(bytes);
                self.emit(format!("leaq {l}(%rip), %rax"));
            }
            ExprKind::Ident(_) | ExprKind::Member { .. } => {
                let (p, pt) = self.place(e)?;
                self.load(&pt, &p.operand())?;
            }
            ExprKind::Index(..) => {
                self.index_address(e)?;
                self.load(&t, "(%rax)")?;
            }
            ExprKind::Unary(op, x) => self.unary(*op, x, &t)?,
            ExprKind::Binary(op, a, b) => self.binary(*op, a, b, &t)?,
            ExprKind::Assign(op, l, r) => self.assign(*op, l, r)?,
            ExprKind::IncDec { prefix, increment, expr } => self.incdec(*prefix, *increment, expr)?,
            ExprKind::Cond(c, a, b) => {
                let other = self.fresh();
                let done = self.fresh();
                self.branch_false(c, &other)?;
                let ta = self.expr(a)?;
                self.convert(&ta, &t.decay())?;
                self.emit(format!("jmp {done}"));
                self.label(&other);
                let tb = self.expr(b)?;
                self.convert(&tb, &t.decay())?;
                self.label(&done);
            }
            ExprKind::Call(name, args) => self.call(name, args)?,
            ExprKind::Cast(to, x) => {
                let from = self.expr(x)?;
                self.convert(&from, to)?;
            }
            ExprKind::SizeofType(ty) => {
                let n = self.size_of(ty)?;
                self.emit(format!("movq ${n}, %rax"));
            }
            ExprKind::SizeofExpr(x) => {
                let n = self.size_of(&self.ty(x)?)?;
                self.emit(format!("movq ${n}, %rax"));
            }
        }
        Ok(t)
    }

    fn unary(&mut self, op: UnOp, x: &Expr, t: &Type) -> R<()> {
        match op {
            UnOp::AddrOf => return self.address(x),
            UnOp::Deref => {
                self.expr(x)?;
                return self.load(t, "(%rax)");
            }
            _ => {}
        }
        let tx = self.expr(x)?;
        match op {
            UnOp::Not => {
                self.to_bool(&tx)?;
                self.emit("xorq $1, %rax");
            }
            UnOp::Plus => self.convert(&tx, t)?,
            UnOp::Neg => {
                self.convert(&tx, t)?;
                match t {
                    Type::Double => {
                        self.emit("movq %xmm0, %r11");
                        self.emit("btcq $63, %r11");
                        self.emit("movq %r11, %xmm0");
                    }
                    Type::Float => {
                        self.emit("movd %xmm0, %r11d");
                        self.emit("xorl $0x80000000, %r11d");
                        self.emit("movd %r11d, %xmm0");
                    }
                    Type::Int(k) => {
                        self.emit("negq %rax");
                        self.normalize(*k);
                    }
                    other => return unsupported(format!("negation of {other}")),
                }
            }
            UnOp::BitNot => {
                self.convert(&tx, t)?;
                self.emit("notq %rax");
                if let Type::Int(k) = t {
                    self.normalize(*k);
                }
            }
            UnOp::Deref | UnOp::AddrOf => unreachable!(),
        }
        Ok(())
    }

    fn logical(&mut self, op: BinOp, a: &Expr, b: &Expr) -> R<()> {
        let short = self.fresh();
        let done = self.fresh();
        let ta = self.expr(a)?;
        self.to_bool(&ta)?;
        self.emit("testq %rax, %rax");
        self.emit(format!("{} {short}", if op == BinOp::LogAnd { "je" } else { "jne" }));
        let tb = self.expr(b)?;
        self.to_bool(&tb)?;
        self.emit(format!("jmp {done}"));
        self.label(&short);
        self.emit(format!("movq ${}, %rax", (op == BinOp::LogOr) as u8));
        self.label(&done);
        Ok(())
    }

    /// Evaluates `a` and `b` converted to `ct`, leaving them in %rax/%rcx or %xmm0/%xmm1.
    fn operands(&mut self, a: &Expr, b: &Expr, ca: &Type, cb: &Type) -> R<()> {
        let ta = self.expr(a)?;
        self.convert(&ta, ca)?;
        self.push(ca);
        let tb = self.expr(b)?;
        self.convert(&tb, cb)?;
        self.pop_under(ca);
        Ok(())
    }

    fn binary(&mut self, op: BinOp, a: &Expr, b: &Expr, t: &Type) -> R<()> {
        if op.is_logical() {
            return self.logical(op, a, b);
        }
        let ta = self.ty(a)?.decay();
        let tb = self.ty(b)?.decay();
        match op {
            BinOp::Add if ta.is_pointer() || tb.is_pointer() => {
                let elem = if ta.is_pointer() { &ta } else { &tb };
                let size = self.size_of(elem.pointee().unwrap_or(&Type::Void))?;
                return self.pointer_add(a, &ta, b, &tb, size, false);
            }
            BinOp::Sub if ta.is_pointer() && tb.is_pointer() => {
                let size = self.size_of(ta.pointee().unwrap_or(&Type::Void))?;
                self.operands(a, b, &ta, &tb)?;
                self.emit("subq %rcx, %rax");
                if size > 1 {
                    self.emit("cqto");
                    self.emit(format!("movq ${size}, %rcx"));
                    self.emit("idivq %rcx");
                }
                return Ok(());
            }
            BinOp::Sub if ta.is_pointer() => {
                let size = self.size_of(ta.pointee().unwrap_or(&Type::Void))?;
                return self.pointer_add(a, &ta, b, &tb, size, true);
            }
            _ => {}
        }
        if op.is_comparison() {
            let ct = if ta.is_pointer() || tb.is_pointer() {
                Type::Int(IntKind::ULong)
            } else {
                usual_arithmetic(&ta, &tb)
            };
            let (ca, cb) = if ct.is_integer() && (ta.is_pointer() || tb.is_pointer()) {
                (ta.clone(), tb.clone())
            } else {
                (ct.clone(), ct.clone())
            };
            self.operands(a, b, &ca, &cb)?;
            return self.compare(op, &ct);
        }
        if matches!(op, BinOp::Shl | BinOp::Shr) {
            let lt = promote(&ta);
            self.operands(a, b, &lt, &promote(&tb))?;
            let Type::Int(k) = lt else { return unsupported("shift of non-integer") };
            let ins = match (op, k.is_signed()) {
                (BinOp::Shl, _) => "shlq",
                (_, true) => "sarq",
                (_, false) => "shrq",
            };
            self.emit(format!("{ins} %cl, %rax"));
            self.normalize(k);
            return Ok(());
        }
        self.operands(a, b, t, t)?;
        match t {
            Type::Float | Type::Double => {
                let sfx = if matches!(t, Type::Float) { "ss" } else { "sd" };
                let ins = match op {
                    BinOp::Add => "add",
                    BinOp::Sub => "sub",
                    BinOp::Mul => "mul",
                    BinOp::Div => "div",
                    _ => return unsupported(format!("`{}` on floating operands", op.symbol())),
                };
                self.emit(format!("{ins}{sfx} %xmm1, %xmm0"));
            }
            Type::Int(k) => {
                match op {
                    BinOp::Add => self.emit("addq %rcx, %rax"),
                    BinOp::Sub => self.emit("subq %rcx, %rax"),
                    BinOp::Mul => self.emit("imulq %rcx, %rax"),
                    BinOp::BitAnd => self.emit("andq %rcx, %rax"),
                    BinOp::BitOr => self.emit("orq %rcx, %rax"),
                    BinOp::BitXor => self.emit("xorq %rcx, %rax"),
                    BinOp::Div | BinOp::Rem => {
                        if k.is_signed() {
                            self.emit("cqto");
                            self.emit("idivq %rcx");
                        } else {
                            self.emit("xorl %edx, %edx");
                            self.emit("divq %rcx");
                        }
                        if op == BinOp::Rem {
                            self.emit("movq %rdx, %rax");
                        }
                    }
                    _ => unreachable!(),
                }
                self.normalize(*k);
            }
            other => return unsupported(format!("`{}` on {other}", op.symbol())),
        }
        Ok(())
    }

    fn compare(&mut self, op: BinOp, ct: &Type) -> R<()> {
        match ct {
            Type::Float | Type::Double => {
                let cmp = if matches!(ct, Type::Float) { "ucomiss" } else { "ucomisd" };
                match op {
                    BinOp::Lt | BinOp::Le => {
                        self.emit(format!("{cmp} %xmm0, %xmm1"));
                        self.emit(if op == BinOp::Lt { "seta %al" } else { "setae %al" });
                    }
                    BinOp::Gt | BinOp::Ge => {
                        self.emit(format!("{cmp} %xmm1, %xmm0"));
                        self.emit(if op == BinOp::Gt { "seta %al" } else { "setae %al" });
                    }
                    BinOp::Eq => {
                        self.emit(format!("{cmp} %xmm1, %xmm0"));
                        self.emit("sete %al");
                        self.emit("setnp %r11b");
                        self.emit("andb %r11b, %al");
                    }
                    _ => {
                        self.emit(format!("{cmp} %xmm1, %xmm0"));
                        self.emit("setne %al");
                        self.emit("setp %r11b");
                        self.emit("orb %r11b, %al");
                    }
                }
            }
            _ => {
                let signed = ct.int_kind().is_some_and(|k| k.is_signed());
                self.emit("cmpq %rcx, %rax");
                let set = match (op, signed) {
                    (BinOp::Lt, true) => "setl",
                    (BinOp::Le, true) => "setle",
                    (BinOp::Gt, true) => "setg",
                    (BinOp::Ge, true) => "setge",
                    (BinOp::Lt, false) => "setb",
                    (BinOp::Le, false) => "setbe",
                    (BinOp::Gt, false) => "seta",
                    (BinOp::Ge, false) => "setae",
                    (BinOp::Eq, _) => "sete",
                    _ => "setne",
                };
                self.emit(format!("{set} %al"));
            }
        }
        self.emit("movzbl %al, %eax");
        Ok(())
    }

    fn assign(&mut self, op: Option<BinOp>, l: &Expr, r: &Expr) -> R<()> {
        let tl = self.ty(l)?;
        let Some(op) = op else {
            self.check_immediate(&tl, r)?;
            let (p, _) = self.place(l)?;
            let at = if matches!(p, Place::InRax) {
                self.push(&Type::Int(IntKind::Long));
                "(%rdi)".to_string()
            } else {
                p.operand()
            };
            let tr = self.expr(r)?;
            self.convert(&tr, &tl)?;
            if matches!(p, Place::InRax) {
                self.pop_reg("rdi");
            }
            return self.store(&tl, &at);
        };
        let tr = self.ty(r)?.decay();
        let (p, _) = self.place(l)?;
        let boxed = matches!(p, Place::InRax);
        if boxed {
            self.push(&Type::Int(IntKind::Long));
        }
        let at = if boxed { "(%rdi)".to_string() } else { p.operand() };
        if tl.is_pointer() {
            let size = self.size_of(tl.pointee().unwrap_or(&Type::Void))?;
            self.expr(r)?;
            self.scale(&tr, size)?;
            self.emit("movq %rax, %rcx");
            if boxed {
                self.pop_reg("rdi");
            }
            self.load(&tl, &at)?;
            self.emit(if op == BinOp::Sub { "subq %rcx, %rax" } else { "addq %rcx, %rax" });
            return self.store(&tl, &at);
        }
        let shift = matches!(op, BinOp::Shl | BinOp::Shr);
        let ct = if shift { promote(&tl) } else { usual_arithmetic(&tl, &tr) };
        let rt = if shift { promote(&tr) } else { ct.clone() };
        let t_rhs = self.expr(r)?;
        self.convert(&t_rhs, &rt)?;
        if rt.is_floating() {
            self.emit("movaps %xmm0, %xmm1");
        } else {
            self.emit("movq %rax, %rcx");
        }
        if boxed {
            self.pop_reg("rdi");
        }
        self.load(&tl, &at)?;
        self.convert(&tl, &ct)?;
        self.apply(op, &ct)?;
        self.convert(&ct, &tl)?;
        self.store(&tl, &at)
    }

    /// `%rax op= %rcx` (or the %xmm0/%xmm1 equivalent) in type `ct`.
    fn apply(&mut self, op: BinOp, ct: &Type) -> R<()> {
        match ct {
            Type::Float | Type::Double => {
                let sfx = if matches!(ct, Type::Float) { "ss" } else { "sd" };
                let ins = match op {
                    BinOp::Add => "add",
                    BinOp::Sub => "sub",
                    BinOp::Mul => "mul",
                    BinOp::Div => "div",
                    _ => return unsupported(format!("`{}=` on floating operands", op.symbol())),
                };
                self.emit(format!("{ins}{sfx} %xmm1, %xmm0"));
            }
            Type::Int(k) => {
                match op {
                    BinOp::Add => self.emit("addq %rcx, %rax"),
                    BinOp::Sub => self.emit("subq %rcx, %rax"),
                    BinOp::Mul => self.emit("imulq %rcx, %rax"),
                    BinOp::BitAnd => self.emit("andq %rcx, %rax"),
                    BinOp::BitOr => self.emit("orq %rcx, %rax"),
                    BinOp::BitXor => self.emit("xorq %rcx, %rax"),
                    BinOp::Shl => self.emit("shlq %cl, %rax"),
                    BinOp::Shr if k.is_signed() => self.emit("sarq %cl, %rax"),
                    BinOp::Shr => self.emit("shrq %cl, %rax"),
                    BinOp::Div | BinOp::Rem => {
                        // %rdi may hold the destination address; idiv only touches %rdx.
                        if k.is_signed() {
                            self.emit("cqto");
                            self.emit("idivq %rcx");
                        } else {
                            self.emit("xorl %edx, %edx");
                            self.emit("divq %rcx");
                        }
                        if op == BinOp::Rem {
                            self.emit("movq %rdx, %rax");
                        }
                    }
                    _ => return unsupported(format!("`{}=`", op.symbol())),
                }
                self.normalize(*k);
            }
            other => return unsupported(format!("compound assignment on {other}")),
        }
        Ok(())
    }

    fn incdec(&mut self, prefix: bool, increment: bool, x: &Expr) -> R<()> {
        let (p, t) = self.place(x)?;
        let at = if matches!(p, Place::InRax) {
            self.emit("movq %rax, %rdi");
            "(%rdi)".to_string()
        } else {
            p.operand()
        };
        self.load(&t, &at)?;
        match &t {
            Type::Float | Type::Double => {
                let single = matches!(t, Type::Float);
                let one = if single { self.float_const(1.0) } else { self.double_const(1.0) };
                let (mov, sfx) = if single { ("movss", "ss") } else { ("movsd", "sd") };
                self.emit("movaps %xmm0, %xmm1");
                self.emit(format!("{mov} {one}(%rip), %xmm2"));
                self.emit(format!("{}{sfx} %xmm2, %xmm0", if increment { "add" } else { "sub" }));
                self.store(&t, &at)?;
                if !prefix {
                    self.emit("movaps %xmm1, %xmm0");
                }
            }
            Type::Int(_) | Type::Pointer(_) => {
                let step = match &t {
                    Type::Pointer(inner) => self.size_of(inner)?,
                    _ => 1,
                };
                self.emit("movq %rax, %rcx");
                self.emit(format!("{} ${step}, %rax", if increment { "addq" } else { "subq" }));
                if let Type::Int(k) = t {
                    self.normalize(k);
                }
                self.store(&t, &at)?;
                if !prefix {
                    self.emit("movq %rcx, %rax");
                }
            }
            other => return unsupported(format!("++/-- on {other}")),
        }
        Ok(())
    }

    fn call(&mut self, name: &str, args: &[Expr]) -> R<()> {
        let sig = self
            .env
            .funcs
            .get(name)
            .cloned()
            .ok_or_else(|| TranslateError::Unsupported(format!("call to undeclared `{name}`")))?;
        if sig.ret.is_record() || sig.params.iter().any(|p| p.ty.is_record()) {
            return unsupported(format!("record passed by value to `{name}`"));
        }
        let mut classes = Vec::new();
        for (i, a) in args.iter().enumerate() {
            let ta = self.expr(a)?;
            let target = match sig.params.get(i) {
                Some(p) => p.ty.decay(),
                None => match ta.decay() {
                    Type::Float => Type::Double,
                    Type::Int(k) => Type::Int(k.promote()),
                    other => other,
                },
            };
            if target.is_record() {
                return unsupported("record argument");
            }
            self.convert(&ta, &target)?;
            self.push(&target);
            classes.push(target);
        }
        let nint = classes.iter().filter(|t| !t.is_floating()).count();
        let nflt = classes.len() - nint;
        if nint > INT_ARG_REGS.len() || nflt > FLOAT_ARG_REGS.len() {
            return unsupported(format!("call to `{name}` needs stack arguments"));
        }
        let (mut ii, mut fi) = (nint, nflt);
        for t in classes.iter().rev() {
            match t {
                Type::Float | Type::Double => {
                    fi -= 1;
                    let mov = if matches!(t, Type::Float) { "movss" } else { "movsd" };
                    self.emit(format!("{mov} (%rsp), %{}", FLOAT_ARG_REGS[fi]));
                    self.emit("addq $8, %rsp");
                    self.depth -= 1;
                }
                _ => {
                    ii -= 1;
                    self.pop_reg(INT_ARG_REGS[ii]);
                }
            }
        }
        let pad = self.depth % 2 == 1;
        if pad {
            self.emit("subq $8, %rsp");
        }
        if sig.variadic {
            self.emit(format!("movl ${nflt}, %eax"));
        }
        self.emit(format!("call {name}"));
        if pad {
            self.emit("addq $8, %rsp");
        }
        if let Type::Int(k) = sig.ret {
            self.normalize(k);
        }
        Ok(())
    }

    // ---- statements ----

    fn stmts(&mut self, items: &[Stmt]) -> R<()> {
        items.iter().try_for_each(|s| self.stmt(s))
    }

    fn stmt(&mut self, s: &Stmt) -> R<()> {
        match &s.kind {
            StmtKind::Expr(e) => {
                self.expr(e)?;
            }
            StmtKind::Decl(ds) => {
                for d in ds {
                    self.decl(d)?;
                }
            }
            StmtKind::Goto(l) => {
                let target = self.user_label(l);
                self.emit(format!("jmp {target}"));
            }
            StmtKind::Labeled(l, inner) => {
                let name = self.user_label(l);
                self.label(&name);
                self.stmt(inner)?;
            }
            StmtKind::Blank => {}
            StmtKind::Block(b) => self.stmts(&b.items)?,
            StmtKind::If { cond, then, els } => {
                let other = self.fresh();
                self.branch_false(cond, &other)?;
                self.stmt(then)?;
                if let Some(e) = els {
                    let done = self.fresh();
                    self.emit(format!("jmp {done}"));
                    self.label(&other);
                    self.stmt(e)?;
                    self.label(&done);
                } else {
                    self.label(&other);
                }
            }
            StmtKind::While { cond, body } => {
                let top = self.fresh();
                let end = self.fresh();
                self.label(&top);
                self.branch_false(cond, &end)?;
                self.loop_body(body, &end, &top)?;
                self.emit(format!("jmp {top}"));
                self.label(&end);
            }
            StmtKind::DoWhile { body, cond } => {
                let top = self.fresh();
                let cont = self.fresh();
                let end = self.fresh();
                self.label(&top);
                self.loop_body(body, &end, &cont)?;
                self.label(&cont);
                let t = self.expr(cond)?;
                self.to_bool(&t)?;
                self.emit("testq %rax, %rax");
                self.emit(format!("jne {top}"));
                self.label(&end);
            }
            StmtKind::For { init, cond, step, body } => {
                self.stmt(init)?;
                let top = self.fresh();
                let cont = self.fresh();
                let end = self.fresh();
                self.label(&top);
                if let Some(c) = cond {
                    self.branch_false(c, &end)?;
                }
                self.loop_body(body, &end, &cont)?;
                self.label(&cont);
                if let Some(st) = step {
                    self.expr(st)?;
                }
                self.emit(format!("jmp {top}"));
                self.label(&end);
            }
            StmtKind::Switch { cond, cases } => self.switch(cond, cases)?,
            StmtKind::Break => {
                let t = self.breaks.last().cloned().ok_or_else(|| TranslateError::Unsupported("break outside loop".into()))?;
                self.emit(format!("jmp {t}"));
            }
            StmtKind::Continue => {
                let t = self
                    .continues
                    .last()
                    .cloned()
                    .ok_or_else(|| TranslateError::Unsupported("continue outside loop".into()))?;
                self.emit(format!("jmp {t}"));
            }
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    let t = self.expr(e)?;
                    let ret = self.table.ret.clone();
                    self.convert(&t, &ret)?;
                }
                let l = epilogue_label(&self.fname);
                self.emit(format!("jmp {l}"));
            }
        }
        debug_assert_eq!(self.depth, 0, "unbalanced stack after statement");
        Ok(())
    }

    fn loop_body(&mut self, body: &Stmt, brk: &str, cont: &str) -> R<()> {
        self.breaks.push(brk.to_string());
        self.continues.push(cont.to_string());
        let r = self.stmt(body);
        self.breaks.pop();
        self.continues.pop();
        r
    }

    fn switch(&mut self, cond: &Expr, cases: &[SwitchCase]) -> R<()> {
        let t = self.expr(cond)?;
        let k = match promote(&t) {
            Type::Int(k) => k,
            other => return unsupported(format!("switch on {other}")),
        };
        let end = self.fresh();
        let labels: Vec<String> = cases.iter().map(|_| self.fresh()).collect();
        let mut default = None;
        for (c, l) in cases.iter().zip(&labels) {
            match &c.label {
                CaseLabel::Case(e) => {
                    let v = eval_int(e).ok_or_else(|| TranslateError::Unsupported("non-constant case".into()))?;
                    self.compare_jump(k, v, l);
                }
                CaseLabel::Default => default = Some(l.clone()),
            }
        }
        self.emit(format!("jmp {}", default.unwrap_or_else(|| end.clone())));
        self.breaks.push(end.clone());
        for (c, l) in cases.iter().zip(&labels) {
            self.label(l);
            if let Err(e) = self.stmts(&c.body) {
                self.breaks.pop();
                return Err(e);
            }
        }
        self.breaks.pop();
        self.label(&end);
        Ok(())
    }

    fn compare_jump(&mut self, k: IntKind, v: i64, target: &str) {
        let v = image(k, v as i128);
        if fits_i32(v as i128) {
            self.emit(format!("cmpq ${v}, %rax"));
        } else {
            self.emit(format!("movabsq ${v}, %rcx"));
            self.emit("cmpq %rcx, %rax");
        }
        self.emit(format!("je {target}"));
    }

    fn decl(&mut self, d: &Declarator) -> R<()> {
        let Some(init) = &d.init else { return Ok(()) };
        let slot = self
            .table
            .slot(&d.name)
            .ok_or_else(|| TranslateError::Unsupported(format!("no slot for `{}`", d.name)))?;
        let (base, ty, size) = (slot.offset, slot.ty.clone(), slot.layout.size);
        match init {
            Initializer::Expr(e) if !matches!(ty, Type::Array(..)) => {
                self.check_immediate(&ty, e)?;
                let t = self.expr(e)?;
                self.convert(&t, &ty)?;
                self.store(&ty, &format!("{base}(%rbp)"))
            }
            _ => {
                self.emit(format!("leaq {base}(%rbp), %rdi"));
                self.emit("xorl %eax, %eax");
                self.emit(format!("movq ${size}, %rcx"));
                self.emit("rep stosb");
                self.init_at(&ty, init, base)
            }
        }
    }

    /// Stores an initializer into an already zeroed object at `base(%rbp)`.
    fn init_at(&mut self, ty: &Type, init: &Initializer, base: i64) -> R<()> {
        match (ty, init) {
            (Type::Array(elem, Some(n)), Initializer::Expr(e)) => {
                let ExprKind::StrLit(bytes) = &e.kind else {
                    return unsupported("array initialized from a non-literal");
                };
                if !matches!(**elem, Type::Int(IntKind::Char | IntKind::UChar)) {
                    return unsupported("string literal for a non-char array");
                }
                for (i, b) in bytes.iter().take(*n as usize).enumerate() {
                    self.emit(format!("movb ${b}, {}(%rbp)", base + i as i64));
                }
                Ok(())
            }
            (Type::Array(elem, _), Initializer::List(items, _)) => {
                let es = self.size_of(elem)? as i64;
                for (i, it) in items.iter().enumerate() {
                    self.init_at(elem, it, base + es * i as i64)?;
                }
                Ok(())
            }
            (Type::Record(kind, _), Initializer::List(items, _)) => {
                let layout = self
                    .layouts
                    .compute_layout(ty)
                    .map_err(|e| TranslateError::Unsupported(e.to_string()))?;
                let take = if *kind == RecordKind::Union { 1 } else { items.len() };
                for (m, it) in layout.members.iter().zip(items).take(take) {
                    let ft = self.env.field(ty, &m.name).map_err(|e| TranslateError::Unsupported(e.0))?;
                    self.init_at(&ft, it, base + m.offset as i64)?;
                }
                Ok(())
            }
            (_, Initializer::List(items, _)) => match items.first() {
                Some(first) => self.init_at(ty, first, base),
                None => Ok(()),
            },
            (_, Initializer::Expr(e)) => {
                self.check_immediate(ty, e)?;
                let t = self.expr(e)?;
                self.convert(&t, ty)?;
                self.store(ty, &format!("{base}(%rbp)"))
            }
        }
    }

    fn finish(self) -> AssemblyFragment {
        let mut frag = AssemblyFragment::from_text(self.out);
        frag.data = self.data;
        frag.clobbers_note = "rax rcx rdx rsi rdi r8-r11 xmm0-xmm7".into();
        frag
    }
}

fn is_lvalue(e: &Expr) -> bool {
    matches!(
        e.kind,
        ExprKind::Ident(_) | ExprKind::Index(..) | ExprKind::Member { .. } | ExprKind::Unary(UnOp::Deref, _)
    )
}

/// Translates one part of a renamed, mapped function. Label parts produce an
/// empty fragment (the rebuilder places the label).
pub fn ref_translate_part(program: &Program, table: &SymbolTable, ctx: &PartContext) -> R<AssemblyFragment> {
    let part = &ctx.part;
    let mut g = Gen::new(program, table, format!(".L_{}__p{}_", table.function, part.id));
    match part.kind {
        PartKind::Label => {}
        PartKind::UncondJump => g.emit(format!("jmp {}", part.payload)),
        PartKind::CondJump => match &part.cond {
            JumpCond::IfZero | JumpCond::Always => {
                g.emit("testq %rax, %rax");
                g.emit(format!("je {}", part.payload));
            }
            JumpCond::IfNonZero => {
                g.emit("testq %rax, %rax");
                g.emit(format!("jne {}", part.payload));
            }
            JumpCond::IfEqual(v) => {
                let k = ctx.switch_kind.unwrap_or(IntKind::Int);
                g.compare_jump(k, *v, &part.payload);
            }
        },
        PartKind::SourceBlock => {
            g.breaks.extend(part.break_target.clone());
            g.continues.extend(part.continue_target.clone());
            match part.role {
                PartRole::Statements | PartRole::ForInit | PartRole::Control => g.stmts(&part.stmts)?,
                PartRole::Condition => match &part.expr {
                    Some(e) => {
                        let t = g.expr(e)?;
                        g.to_bool(&t)?;
                    }
                    None => g.emit("movq $1, %rax"),
                },
                PartRole::ForStep => {
                    if let Some(e) = &part.expr {
                        g.expr(e)?;
                    }
                }
                PartRole::SwitchValue => {
                    let e = part
                        .expr
                        .as_ref()
                        .ok_or_else(|| TranslateError::BadRequest("switch part without operand".into()))?;
                    let t = g.expr(e)?;
                    g.convert(&t, &promote(&t))?;
                }
            }
        }
    }
    Ok(g.finish())
}

/// Whole-function translation, prologue and epilogue included. Without a
/// table the function is renamed and mapped here first.
pub fn ref_translate_function(program: &Program, name: &str, table: Option<&SymbolTable>) -> R<AssemblyFragment> {
    let f = program
        .ast
        .function(name)
        .ok_or_else(|| TranslateError::BadRequest(format!("no function `{name}`")))?;
    let (renamed, owned);
    let (f, table) = match table {
        Some(t) => (f, t),
        None => {
            renamed = rename_in(&program.ast, f).0;
            owned = allocate_frame(&program.ast, &renamed, &program.layouts)
                .map_err(|e| TranslateError::Unsupported(e.to_string()))?;
            (&renamed, &owned)
        }
    };
    let mut g = Gen::new(program, table, format!(".L_{name}__r"));
    g.stmts(&f.body.items)?;
    let body = g.finish();
    let mut frag = AssemblyFragment::from_text(format!("{}{}{}", prologue(table), body.text, epilogue(name)));
    frag.data = body.data;
    frag.clobbers_note = body.clobbers_note;
    Ok(frag)
}

#[derive(Default)]
pub struct RefBackend;

impl Backend for RefBackend {
    fn name(&self) -> &str {
        "ref"
    }

    fn translate(&self, req: &TranslationRequest) -> R<AssemblyFragment> {
        match (req.mode, &req.part) {
            (Mode::Lego, Some(ctx)) => {
                let table = req
                    .symbol_table
                    .as_ref()
                    .ok_or_else(|| TranslateError::BadRequest("missing symbol table".into()))?;
                ref_translate_part(&req.program, table, ctx)
            }
            _ => ref_translate_function(&req.program, &req.function, req.symbol_table.as_ref()),
        }
    }
}
