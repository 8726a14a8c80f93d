//! Recursive-descent parser for the C subset.

use super::ast::*;
use super::lexer::{tokenize, Tok};
use super::types::{IntKind, RecordKind, Type};
use super::FrontendError;

type PResult<T> = Result<T, FrontendError>;

const BUILTIN_TYPEDEFS: &[(&str, IntKind)] = &[
    ("int8_t", IntKind::Char),
    ("uint8_t", IntKind::UChar),
    ("int16_t", IntKind::Short),
    ("uint16_t", IntKind::UShort),
    ("int32_t", IntKind::Int),
    ("uint32_t", IntKind::UInt),
    ("int64_t", IntKind::Long),
    ("uint64_t", IntKind::ULong),
    ("size_t", IntKind::ULong),
    ("ssize_t", IntKind::Long),
    ("intptr_t", IntKind::Long),
    ("uintptr_t", IntKind::ULong),
    ("ptrdiff_t", IntKind::Long),
];

const TYPE_KEYWORDS: &[&str] = &[
    "void", "char", "short", "int", "long", "signed", "unsigned", "float", "double", "struct",
    "union", "const", "volatile", "static", "extern", "register", "inline", "_Bool", "enum",
    "typedef", "auto", "restrict",
];

const KEYWORDS: &[&str] = &[
    "if", "else", "while", "for", "do", "switch", "case", "default", "break", "continue",
    "return", "goto", "sizeof",
];

pub struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
    anon_records: usize,
    /// Record definitions produced while parsing specifiers, flushed into the item list.
    pending_records: Vec<RecordDef>,
}

/// Parses a whole translation unit.
pub fn parse_source(text: &str) -> PResult<Ast> {
    let mut p = Parser::new(text)?;
    let items = p.translation_unit()?;
    Ok(Ast {
        source: text.to_string(),
        items,
    })
}

/// Parses a sequence of block items (statement list without surrounding braces).
pub fn parse_block_items(text: &str) -> PResult<Vec<Stmt>> {
    let mut p = Parser::new(text)?;
    let mut out = Vec::new();
    while !p.at_eof() {
        out.push(p.statement()?);
    }
    p.no_local_records()?;
    Ok(out)
}

/// Parses a single statement that must span the whole text.
pub fn parse_statement(text: &str) -> PResult<Stmt> {
    let mut p = Parser::new(text)?;
    let s = p.statement()?;
    p.expect_eof()?;
    p.no_local_records()?;
    Ok(s)
}

/// Parses a single expression that must span the whole text.
pub fn parse_expression(text: &str) -> PResult<Expr> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

/// Parses a type name, optionally containing record definitions (`struct {char c; int i;}`).
/// Returns the type and the record definitions it introduced, innermost first.
pub fn parse_type_name(text: &str) -> PResult<(Type, Vec<RecordDef>)> {
    let mut p = Parser::new(text)?;
    let ty = p.type_name()?;
    p.expect_eof()?;
    Ok((ty, std::mem::take(&mut p.pending_records)))
}

pub fn is_type_keyword(word: &str) -> bool {
    TYPE_KEYWORDS.contains(&word) || BUILTIN_TYPEDEFS.iter().any(|(n, _)| *n == word)
}

pub fn is_reserved(word: &str) -> bool {
    is_type_keyword(word) || KEYWORDS.contains(&word)
}

struct Specifiers {
    ty: Type,
    is_static: bool,
}

impl Parser {
    pub fn new(text: &str) -> PResult<Parser> {
        Ok(Parser {
            toks: tokenize(text)?,
            pos: 0,
            anon_records: 0,
            pending_records: Vec::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn prev_end(&self) -> usize {
        if self.pos == 0 {
            0
        } else {
            self.toks[self.pos - 1].1.end
        }
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.is_word(w) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error(&self, expected: &[&str]) -> FrontendError {
        FrontendError::Syntax {
            pos: self.span().start,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().describe(),
        }
    }

    fn unsupported(&self, span: Span, feature: &str) -> FrontendError {
        FrontendError::Unsupported {
            span,
            feature: feature.to_string(),
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<Span> {
        if self.is_punct(p) {
            let s = self.span();
            self.bump();
            Ok(s)
        } else {
            Err(self.error(&[&format!("`{p}`")]))
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        if self.at_eof() {
            Ok(())
        } else {
            Err(self.error(&["end of input"]))
        }
    }

    fn no_local_records(&self) -> PResult<()> {
        match self.pending_records.first() {
            Some(r) => Err(self.unsupported(r.span, "record definition inside a function")),
            None => Ok(()),
        }
    }

    fn ident(&mut self) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                let sp = self.span();
                self.bump();
                Ok((s, sp))
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn starts_type(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if is_type_keyword(s))
    }

    // ---- declarations -------------------------------------------------

    fn translation_unit(&mut self) -> PResult<Vec<Item>> {
        let mut items = Vec::new();
        while !self.at_eof() {
            if self.eat_punct(";") {
                continue;
            }
            self.external_decl(&mut items)?;
        }
        Ok(items)
    }

    fn flush_records(&mut self, items: &mut Vec<Item>) {
        for r in self.pending_records.drain(..) {
            items.push(Item::Record(r));
        }
    }

    fn external_decl(&mut self, items: &mut Vec<Item>) -> PResult<()> {
        let start = self.span().start;
        let spec = self.specifiers()?;
        self.flush_records(items);
        if self.eat_punct(";") {
            return Ok(());
        }
        let mut first = true;
        loop {
            let (name, ty, dspan) = self.declarator(spec.ty.clone())?;
            if self.is_punct("(") {
                let (params, variadic) = self.param_list()?;
                let sig_span = Span::new(start, self.prev_end());
                let sig = FnSig {
                    name,
                    ret: ty,
                    params,
                    variadic,
                    span: sig_span,
                };
                if self.is_punct("{") {
                    if sig.variadic {
                        return Err(self.unsupported(sig_span, "variadic function definition"));
                    }
                    if sig.params.iter().any(|p| p.name.is_empty()) {
                        return Err(self.error(&["named parameter"]));
                    }
                    let body = self.block()?;
                    self.no_local_records()?;
                    let span = Span::new(start, body.span.end);
                    items.push(Item::Function(FunctionDef { sig, body, span }));
                    return Ok(());
                }
                items.push(Item::Prototype(sig));
            } else {
                if ty == Type::Void {
                    return Err(self.unsupported(dspan, "void object"));
                }
                let mut ty = ty;
                let init = if self.eat_punct("=") {
                    Some(self.initializer()?)
                } else {
                    None
                };
                complete_array(&mut ty, init.as_ref());
                let from = if first { start } else { dspan.start };
                items.push(Item::Global(GlobalDecl {
                    name,
                    ty,
                    init,
                    span: Span::new(from, self.prev_end()),
                }));
            }
            if self.eat_punct(",") {
                first = false;
                continue;
            }
            self.expect_punct(";")?;
            return Ok(());
        }
    }

    fn specifiers(&mut self) -> PResult<Specifiers> {
        let start = self.span().start;
        let mut is_static = false;
        let mut signed: Option<bool> = None;
        let mut shorts = 0;
        let mut longs = 0;
        let mut base: Option<Type> = None;
        let mut any = false;
        loop {
            let Tok::Ident(word) = self.peek().clone() else {
                break;
            };
            let sp = self.span();
            match word.as_str() {
                "const" | "volatile" | "register" | "inline" | "restrict" | "auto" => {}
                "static" => is_static = true,
                "extern" => {}
                "typedef" => return Err(self.unsupported(sp, "typedef")),
                "enum" => return Err(self.unsupported(sp, "enum")),
                "_Bool" => return Err(self.unsupported(sp, "_Bool")),
                "signed" => signed = Some(true),
                "unsigned" => signed = Some(false),
                "short" => shorts += 1,
                "long" => longs += 1,
                "int" => {}
                "char" | "void" | "float" | "double" => {
                    if base.is_some() {
                        return Err(self.error(&["declarator"]));
                    }
                    base = Some(match word.as_str() {
                        "char" => Type::Int(IntKind::Char),
                        "void" => Type::Void,
                        "float" => Type::Float,
                        _ => Type::Double,
                    });
                }
                "struct" | "union" => {
                    if base.is_some() {
                        return Err(self.error(&["declarator"]));
                    }
                    self.bump();
                    let kind = if word == "struct" {
                        RecordKind::Struct
                    } else {
                        RecordKind::Union
                    };
                    base = Some(self.record_specifier(kind, sp)?);
                    any = true;
                    continue;
                }
                w => {
                    if let Some((_, k)) = BUILTIN_TYPEDEFS.iter().find(|(n, _)| *n == w) {
                        if base.is_some() {
                            return Err(self.error(&["declarator"]));
                        }
                        base = Some(Type::Int(*k));
                    } else {
                        break;
                    }
                }
            }
            any = true;
            self.bump();
        }
        if !any {
            return Err(self.error(&["type specifier"]));
        }
        let span = Span::new(start, self.prev_end());
        let ty = match base {
            Some(Type::Int(IntKind::Char)) => match signed {
                Some(false) => Type::Int(IntKind::UChar),
                _ => Type::Int(IntKind::Char),
            },
            Some(Type::Double) if longs > 0 => return Err(self.unsupported(span, "long double")),
            Some(t) => {
                if signed.is_some() && !t.is_integer() || shorts + longs > 0 && !t.is_integer() {
                    return Err(self.error(&["valid type specifier combination"]));
                }
                t
            }
            None => {
                let unsigned = signed == Some(false);
                let kind = if shorts > 0 {
                    if unsigned {
                        IntKind::UShort
                    } else {
                        IntKind::Short
                    }
                } else if longs > 0 {
                    if unsigned {
                        IntKind::ULong
                    } else {
                        IntKind::Long
                    }
                } else if unsigned {
                    IntKind::UInt
                } else {
                    IntKind::Int
                };
                Type::Int(kind)
            }
        };
        Ok(Specifiers { ty, is_static })
    }

    fn record_specifier(&mut self, kind: RecordKind, kw_span: Span) -> PResult<Type> {
        let tag = match self.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                self.bump();
                Some(s)
            }
            _ => None,
        };
        if !self.is_punct("{") {
            return match tag {
                Some(t) => Ok(Type::Record(kind, t)),
                None => Err(self.error(&["record tag", "`{`"])),
            };
        }
        self.bump();
        let tag = tag.unwrap_or_else(|| {
            let t = format!("__anon{}", self.anon_records);
            self.anon_records += 1;
            t
        });
        let mut fields = Vec::new();
        while !self.eat_punct("}") {
            let fstart = self.span().start;
            let spec = self.specifiers()?;
            loop {
                let (name, ty, _) = self.declarator(spec.ty.clone())?;
                if self.is_punct(":") {
                    return Err(self.unsupported(self.span(), "bitfield"));
                }
                if let Type::Array(_, None) = ty {
                    return Err(self.unsupported(self.span(), "flexible array member"));
                }
                fields.push(Field {
                    name,
                    ty,
                    span: Span::new(fstart, self.prev_end()),
                });
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct(";")?;
        }
        if fields.is_empty() {
            return Err(self.unsupported(kw_span, "empty record"));
        }
        self.pending_records.push(RecordDef {
            kind,
            tag: tag.clone(),
            fields,
            span: Span::new(kw_span.start, self.prev_end()),
        });
        Ok(Type::Record(kind, tag))
    }

    /// Parses pointer stars, a name and array dimensions. Returns the full type.
    fn declarator(&mut self, base: Type) -> PResult<(String, Type, Span)> {
        let start = self.span().start;
        let mut ty = base;
        while self.eat_punct("*") {
            ty = Type::pointer_to(ty);
            while self.eat_word("const") || self.eat_word("volatile") || self.eat_word("restrict")
            {
            }
        }
        if self.is_punct("(") {
            return Err(self.unsupported(self.span(), "parenthesized declarator"));
        }
        let (name, _) = self.ident()?;
        let ty = self.array_suffix(ty)?;
        Ok((name, ty, Span::new(start, self.prev_end())))
    }

    fn array_suffix(&mut self, elem: Type) -> PResult<Type> {
        let mut dims = Vec::new();
        while self.eat_punct("[") {
            if self.eat_punct("]") {
                dims.push(None);
                continue;
            }
            let e = self.conditional()?;
            let n = super::consteval::eval_int(&e)
                .ok_or_else(|| self.unsupported(e.span, "non-constant array size"))?;
            if n <= 0 {
                return Err(self.unsupported(e.span, "non-positive array size"));
            }
            self.expect_punct("]")?;
            dims.push(Some(n as u64));
        }
        let mut ty = elem;
        for d in dims.into_iter().rev() {
            ty = Type::Array(Box::new(ty), d);
        }
        Ok(ty)
    }

    fn abstract_declarator(&mut self, base: Type) -> PResult<Type> {
        let mut ty = base;
        while self.eat_punct("*") {
            ty = Type::pointer_to(ty);
            while self.eat_word("const") || self.eat_word("volatile") {}
        }
        self.array_suffix(ty)
    }

    fn type_name(&mut self) -> PResult<Type> {
        let spec = self.specifiers()?;
        self.abstract_declarator(spec.ty)
    }

    fn param_list(&mut self) -> PResult<(Vec<Param>, bool)> {
        self.expect_punct("(")?;
        let mut params = Vec::new();
        let mut variadic = false;
        if self.is_word("void") && matches!(self.peek_at(1), Tok::Punct(")")) {
            self.bump();
        }
        while !self.is_punct(")") {
            if self.eat_punct("...") {
                variadic = true;
                break;
            }
            let start = self.span().start;
            let spec = self.specifiers()?;
            let mut ty = spec.ty;
            while self.eat_punct("*") {
                ty = Type::pointer_to(ty);
                while self.eat_word("const") || self.eat_word("volatile") || self.eat_word("restrict") {}
            }
            let name = match self.peek().clone() {
                Tok::Ident(s) if !is_reserved(&s) => {
                    self.bump();
                    s
                }
                _ => String::new(),
            };
            let mut ty = self.array_suffix(ty)?;
            if let Type::Array(elem, _) = ty {
                ty = Type::Pointer(elem);
            }
            if ty.is_record() {
                return Err(self.unsupported(Span::new(start, self.prev_end()), "record passed by value"));
            }
            params.push(Param {
                name,
                ty,
                span: Span::new(start, self.prev_end()),
            });
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(")")?;
        Ok((params, variadic))
    }

    fn initializer(&mut self) -> PResult<Initializer> {
        if self.is_punct("{") {
            let start = self.span().start;
            self.bump();
            let mut items = Vec::new();
            while !self.is_punct("}") {
                if self.is_punct(".") || self.is_punct("[") {
                    return Err(self.unsupported(self.span(), "designated initializer"));
                }
                items.push(self.initializer()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
            self.expect_punct("}")?;
            Ok(Initializer::List(items, Span::new(start, self.prev_end())))
        } else {
            Ok(Initializer::Expr(self.assignment()?))
        }
    }

    fn local_decl(&mut self) -> PResult<Stmt> {
        let start = self.span().start;
        let spec = self.specifiers()?;
        if spec.is_static {
            return Err(self.unsupported(Span::new(start, self.prev_end()), "static local"));
        }
        if !self.pending_records.is_empty() {
            return self.no_local_records().map(|_| unreachable!());
        }
        let mut decls = Vec::new();
        loop {
            let dstart = self.span().start;
            let (name, mut ty, _) = self.declarator(spec.ty.clone())?;
            if self.is_punct("(") {
                return Err(self.unsupported(self.span(), "local function declaration"));
            }
            if ty == Type::Void {
                return Err(self.unsupported(Span::new(dstart, self.prev_end()), "void object"));
            }
            let init = if self.eat_punct("=") {
                Some(self.initializer()?)
            } else {
                None
            };
            complete_array(&mut ty, init.as_ref());
            if let Type::Array(_, None) = ty {
                return Err(self.unsupported(Span::new(dstart, self.prev_end()), "incomplete array"));
            }
            decls.push(Declarator {
                name,
                ty,
                init,
                span: Span::new(dstart, self.prev_end()),
            });
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(";")?;
        Ok(Stmt::new(
            StmtKind::Decl(decls),
            Span::new(start, self.prev_end()),
        ))
    }

    // ---- statements ---------------------------------------------------

    fn block(&mut self) -> PResult<Block> {
        let start = self.expect_punct("{")?.start;
        let mut items = Vec::new();
        while !self.is_punct("}") {
            if self.at_eof() {
                return Err(self.error(&["`}`"]));
            }
            items.push(self.statement()?);
        }
        self.bump();
        Ok(Block {
            items,
            span: Span::new(start, self.prev_end()),
        })
    }

    pub fn statement(&mut self) -> PResult<Stmt> {
        let start = self.span().start;
        if self.starts_type() {
            return self.local_decl();
        }
        let fin = |p: &Self, kind: StmtKind| Ok(Stmt::new(kind, Span::new(start, p.prev_end())));
        match self.peek().clone() {
            Tok::Punct("{") => {
                let b = self.block()?;
                fin(self, StmtKind::Block(b))
            }
            Tok::Punct(";") => {
                self.bump();
                fin(self, StmtKind::Blank)
            }
            Tok::Ident(w) => match w.as_str() {
                "if" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let cond = self.expr()?;
                    self.expect_punct(")")?;
                    let then = Box::new(self.statement()?);
                    let els = if self.eat_word("else") {
                        Some(Box::new(self.statement()?))
                    } else {
                        None
                    };
                    fin(self, StmtKind::If { cond, then, els })
                }
                "while" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let cond = self.expr()?;
                    self.expect_punct(")")?;
                    let body = Box::new(self.statement()?);
                    fin(self, StmtKind::While { cond, body })
                }
                "do" => {
                    self.bump();
                    let body = Box::new(self.statement()?);
                    if !self.eat_word("while") {
                        return Err(self.error(&["`while`"]));
                    }
                    self.expect_punct("(")?;
                    let cond = self.expr()?;
                    self.expect_punct(")")?;
                    self.expect_punct(";")?;
                    fin(self, StmtKind::DoWhile { body, cond })
                }
                "for" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let init_start = self.span().start;
                    let init = if self.starts_type() {
                        self.local_decl()?
                    } else if self.eat_punct(";") {
                        Stmt::new(StmtKind::Blank, Span::new(init_start, self.prev_end()))
                    } else {
                        let e = self.expr()?;
                        self.expect_punct(";")?;
                        Stmt::new(StmtKind::Expr(e), Span::new(init_start, self.prev_end()))
                    };
                    let cond = if self.is_punct(";") {
                        None
                    } else {
                        Some(self.expr()?)
                    };
                    self.expect_punct(";")?;
                    let step = if self.is_punct(")") {
                        None
                    } else {
                        Some(self.expr()?)
                    };
                    self.expect_punct(")")?;
                    let body = Box::new(self.statement()?);
                    fin(
                        self,
                        StmtKind::For {
                            init: Box::new(init),
                            cond,
                            step,
                            body,
                        },
                    )
                }
                "switch" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let cond = self.expr()?;
                    self.expect_punct(")")?;
                    let cases = self.switch_body()?;
                    fin(self, StmtKind::Switch { cond, cases })
                }
                "break" => {
                    self.bump();
                    self.expect_punct(";")?;
                    fin(self, StmtKind::Break)
                }
                "continue" => {
                    self.bump();
                    self.expect_punct(";")?;
                    fin(self, StmtKind::Continue)
                }
                "return" => {
                    self.bump();
                    let e = if self.is_punct(";") {
                        None
                    } else {
                        Some(self.expr()?)
                    };
                    self.expect_punct(";")?;
                    fin(self, StmtKind::Return(e))
                }
                "goto" => {
                    self.bump();
                    let (label, _) = self.ident()?;
                    self.expect_punct(";")?;
                    fin(self, StmtKind::Goto(label))
                }
                "case" | "default" => Err(self.unsupported(self.span(), "case label outside switch body")),
                "else" => Err(self.error(&["statement"])),
                _ if matches!(self.peek_at(1), Tok::Punct(":")) && !is_reserved(&w) => {
                    self.bump();
                    self.bump();
                    let inner = Box::new(self.statement()?);
                    fin(self, StmtKind::Labeled(w, inner))
                }
                _ => self.expr_statement(start),
            },
            _ => self.expr_statement(start),
        }
    }

    fn expr_statement(&mut self, start: usize) -> PResult<Stmt> {
        let e = self.expr()?;
        self.expect_punct(";")?;
        Ok(Stmt::new(StmtKind::Expr(e), Span::new(start, self.prev_end())))
    }

    fn switch_body(&mut self) -> PResult<Vec<SwitchCase>> {
        self.expect_punct("{")?;
        let mut cases: Vec<SwitchCase> = Vec::new();
        while !self.eat_punct("}") {
            let start = self.span().start;
            if self.eat_word("case") {
                let e = self.conditional()?;
                self.expect_punct(":")?;
                cases.push(SwitchCase {
                    label: CaseLabel::Case(e),
                    body: Vec::new(),
                    span: Span::new(start, self.prev_end()),
                });
            } else if self.eat_word("default") {
                self.expect_punct(":")?;
                cases.push(SwitchCase {
                    label: CaseLabel::Default,
                    body: Vec::new(),
                    span: Span::new(start, self.prev_end()),
                });
            } else {
                if cases.is_empty() {
                    return Err(self.unsupported(self.span(), "statement before first case label"));
                }
                let s = self.statement()?;
                let last = cases.last_mut().expect("checked above");
                last.span.end = s.span.end;
                last.body.push(s);
            }
        }
        Ok(cases)
    }

    // ---- expressions --------------------------------------------------

    pub fn expr(&mut self) -> PResult<Expr> {
        let e = self.assignment()?;
        if self.is_punct(",") {
            return Err(self.unsupported(self.span(), "comma operator"));
        }
        Ok(e)
    }

    fn assignment(&mut self) -> PResult<Expr> {
        let lhs = self.conditional()?;
        let op = match self.peek() {
            Tok::Punct("=") => None,
            Tok::Punct(p) => match *p {
                "+=" => Some(BinOp::Add),
                "-=" => Some(BinOp::Sub),
                "*=" => Some(BinOp::Mul),
                "/=" => Some(BinOp::Div),
                "%=" => Some(BinOp::Rem),
                "<<=" => Some(BinOp::Shl),
                ">>=" => Some(BinOp::Shr),
                "&=" => Some(BinOp::BitAnd),
                "^=" => Some(BinOp::BitXor),
                "|=" => Some(BinOp::BitOr),
                _ => return Ok(lhs),
            },
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.assignment()?;
        let span = lhs.span.to(rhs.span);
        Ok(Expr::new(
            ExprKind::Assign(op, Box::new(lhs), Box::new(rhs)),
            span,
        ))
    }

    fn conditional(&mut self) -> PResult<Expr> {
        let c = self.binary(1)?;
        if !self.eat_punct("?") {
            return Ok(c);
        }
        let t = self.expr()?;
        self.expect_punct(":")?;
        let e = self.conditional()?;
        let span = c.span.to(e.span);
        Ok(Expr::new(
            ExprKind::Cond(Box::new(c), Box::new(t), Box::new(e)),
            span,
        ))
    }

    fn peek_binop(&self) -> Option<BinOp> {
        let Tok::Punct(p) = self.peek() else {
            return None;
        };
        Some(match *p {
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Rem,
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "<<" => BinOp::Shl,
            ">>" => BinOp::Shr,
            "<" => BinOp::Lt,
            ">" => BinOp::Gt,
            "<=" => BinOp::Le,
            ">=" => BinOp::Ge,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "&" => BinOp::BitAnd,
            "^" => BinOp::BitXor,
            "|" => BinOp::BitOr,
            "&&" => BinOp::LogAnd,
            "||" => BinOp::LogOr,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            let span = lhs.span.to(rhs.span);
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn is_paren_type(&self) -> bool {
        self.is_punct("(") && matches!(self.peek_at(1), Tok::Ident(s) if is_type_keyword(s))
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.span();
        let op = match self.peek() {
            Tok::Punct("-") => Some(UnOp::Neg),
            Tok::Punct("+") => Some(UnOp::Plus),
            Tok::Punct("!") => Some(UnOp::Not),
            Tok::Punct("~") => Some(UnOp::BitNot),
            Tok::Punct("*") => Some(UnOp::Deref),
            Tok::Punct("&") => Some(UnOp::AddrOf),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let e = self.unary()?;
            let span = start.to(e.span);
            return Ok(Expr::new(ExprKind::Unary(op, Box::new(e)), span));
        }
        if self.is_punct("++") || self.is_punct("--") {
            let increment = self.is_punct("++");
            self.bump();
            let e = self.unary()?;
            let span = start.to(e.span);
            return Ok(Expr::new(
                ExprKind::IncDec {
                    prefix: true,
                    increment,
                    expr: Box::new(e),
                },
                span,
            ));
        }
        if self.is_word("sizeof") {
            self.bump();
            if self.is_paren_type() {
                self.bump();
                let ty = self.type_name()?;
                self.no_local_records()?;
                self.expect_punct(")")?;
                return Ok(Expr::new(
                    ExprKind::SizeofType(ty),
                    Span::new(start.start, self.prev_end()),
                ));
            }
            let e = self.unary()?;
            let span = start.to(e.span);
            return Ok(Expr::new(ExprKind::SizeofExpr(Box::new(e)), span));
        }
        if self.is_paren_type() {
            self.bump();
            let ty = self.type_name()?;
            self.no_local_records()?;
            self.expect_punct(")")?;
            if self.is_punct("{") {
                return Err(self.unsupported(self.span(), "compound literal"));
            }
            let e = self.unary()?;
            let span = start.to(e.span);
            return Ok(Expr::new(ExprKind::Cast(ty, Box::new(e)), span));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.eat_punct("[") {
                let idx = self.expr()?;
                self.expect_punct("]")?;
                let span = Span::new(e.span.start, self.prev_end());
                e = Expr::new(ExprKind::Index(Box::new(e), Box::new(idx)), span);
            } else if self.is_punct(".") || self.is_punct("->") {
                let arrow = self.is_punct("->");
                self.bump();
                let (field, fspan) = self.ident()?;
                let span = e.span.to(fspan);
                e = Expr::new(
                    ExprKind::Member {
                        base: Box::new(e),
                        field,
                        arrow,
                    },
                    span,
                );
            } else if self.is_punct("++") || self.is_punct("--") {
                let increment = self.is_punct("++");
                self.bump();
                let span = Span::new(e.span.start, self.prev_end());
                e = Expr::new(
                    ExprKind::IncDec {
                        prefix: false,
                        increment,
                        expr: Box::new(e),
                    },
                    span,
                );
            } else if self.is_punct("(") {
                return Err(self.unsupported(self.span(), "call through expression"));
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let sp = self.span();
        match self.peek().clone() {
            Tok::Int {
                value,
                decimal,
                unsigned,
                long,
            } => {
                self.bump();
                let kind = literal_kind(value, decimal, unsigned, long)
                    .ok_or_else(|| self.unsupported(sp, "integer literal too large"))?;
                Ok(Expr::new(ExprKind::IntLit(value, kind), sp))
            }
            Tok::Float { value, single } => {
                self.bump();
                Ok(Expr::new(ExprKind::FloatLit(value, single), sp))
            }
            Tok::Char(c) => {
                self.bump();
                // Character constants have type int; negative values print as a negation.
                if c < 0 {
                    let lit = Expr::new(ExprKind::IntLit((-c) as u64, IntKind::Int), sp);
                    return Ok(Expr::new(ExprKind::Unary(UnOp::Neg, Box::new(lit)), sp));
                }
                Ok(Expr::new(ExprKind::IntLit(c as u64, IntKind::Int), sp))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::new(ExprKind::StrLit(s), sp))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(name) if !is_reserved(&name) => {
                self.bump();
                if self.is_punct("(") {
                    self.bump();
                    let mut args = Vec::new();
                    while !self.is_punct(")") {
                        args.push(self.assignment()?);
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                    self.expect_punct(")")?;
                    let span = Span::new(sp.start, self.prev_end());
                    return Ok(Expr::new(ExprKind::Call(name, args), span));
                }
                Ok(Expr::new(ExprKind::Ident(name), sp))
            }
            _ => Err(self.error(&["expression"])),
        }
    }
}

/// C rules for the type of an integer literal.
pub fn literal_kind(value: u64, decimal: bool, unsigned: bool, long: bool) -> Option<IntKind> {
    let fits = |k: IntKind| (value as i128) <= k.max_value();
    let candidates: &[IntKind] = match (decimal, unsigned, long) {
        (true, false, false) => &[IntKind::Int, IntKind::Long],
        (false, false, false) => &[IntKind::Int, IntKind::UInt, IntKind::Long, IntKind::ULong],
        (_, true, false) => &[IntKind::UInt, IntKind::ULong],
        (true, false, true) => &[IntKind::Long],
        (false, false, true) => &[IntKind::Long, IntKind::ULong],
        (_, true, true) => &[IntKind::ULong],
    };
    candidates.iter().copied().find(|k| fits(*k))
}

/// Completes `T x[] = {...}` / `char s[] = "..."` from the initializer.
fn complete_array(ty: &mut Type, init: Option<&Initializer>) {
    if let Type::Array(_, len @ None) = ty {
        match init {
            Some(Initializer::List(items, _)) => *len = Some(items.len() as u64),
            Some(Initializer::Expr(Expr {
                kind: ExprKind::StrLit(s),
                ..
            })) => *len = Some(s.len() as u64 + 1),
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body(src: &str) -> Vec<Stmt> {
        let ast = parse_source(src).unwrap();
        let items = ast.functions().next().unwrap().body.items.clone();
        items
    }

    #[test]
    fn minimal_function() {
        let ast = parse_source("int f(){return 0;}").unwrap();
        assert_eq!(ast.functions().count(), 1);
        let b = &ast.functions().next().unwrap().body.items;
        assert_eq!(b.len(), 1);
        match &b[0].kind {
            StmtKind::Return(Some(e)) => assert_eq!(e.kind, ExprKind::IntLit(0, IntKind::Int)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_assignments_in_order() {
        let b = body("int a, b; void f(){ a = b + 3; b = a - 1; }");
        assert_eq!(b.len(), 2);
        assert!(b.iter().all(|s| s.classify() == StatementKind::Assign));
        let StmtKind::Expr(Expr { kind: ExprKind::Assign(None, lhs, _), .. }) = &b[0].kind else {
            panic!()
        };
        assert_eq!(lhs.kind, ExprKind::Ident("a".into()));
    }

    #[test]
    fn precedence_and_assoc() {
        let e = parse_expression("a - b - c * d").unwrap();
        let ExprKind::Binary(BinOp::Sub, l, r) = e.kind else { panic!() };
        assert!(matches!(l.kind, ExprKind::Binary(BinOp::Sub, ..)));
        assert!(matches!(r.kind, ExprKind::Binary(BinOp::Mul, ..)));
        let e = parse_expression("x = y = 3").unwrap();
        let ExprKind::Assign(None, _, r) = e.kind else { panic!() };
        assert!(matches!(r.kind, ExprKind::Assign(..)));
    }

    #[test]
    fn declarations_and_types() {
        let ast = parse_source(
            "struct P { char c; int i; }; struct P g; unsigned long big = 5; int arr[] = {1,2,3}; char s[] = \"hi\";",
        )
        .unwrap();
        let globals: Vec<_> = ast.globals().collect();
        assert_eq!(globals[0].ty, Type::Record(RecordKind::Struct, "P".into()));
        assert_eq!(globals[1].ty, Type::Int(IntKind::ULong));
        assert_eq!(globals[2].ty, Type::array_of(Type::INT, 3));
        assert_eq!(globals[3].ty, Type::array_of(Type::Int(IntKind::Char), 3));
    }

    #[test]
    fn switch_cases_group_statements() {
        let b = body("int f(int x){ switch (x) { case 1: case 2: x = 3; break; default: x = 0; } return x; }");
        let StmtKind::Switch { cases, .. } = &b[0].kind else { panic!() };
        assert_eq!(cases.len(), 3);
        assert!(cases[0].body.is_empty());
        assert_eq!(cases[1].body.len(), 2);
    }

    #[test]
    fn errors() {
        match parse_source("int f( { }") {
            Err(FrontendError::Syntax { .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_source("typedef int T;") {
            Err(FrontendError::Unsupported { feature, .. }) => assert_eq!(feature, "typedef"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_source("int f(){ int a = (1, 2); return a; }"),
            Err(FrontendError::Unsupported { .. })
        ));
    }

    #[test]
    fn literal_types() {
        assert_eq!(literal_kind(0x56671485, false, false, false), Some(IntKind::Int));
        assert_eq!(literal_kind(0xffff_ffff, false, false, false), Some(IntKind::UInt));
        assert_eq!(literal_kind(0xffff_ffff, true, false, false), Some(IntKind::Long));
        assert_eq!(literal_kind(u64::MAX, true, false, false), None);
    }
}
