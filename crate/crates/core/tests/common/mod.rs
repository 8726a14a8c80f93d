//! Random record types and local-variable sets shared by the property tests.
#![allow(dead_code)]

use std::fmt::Write as _;

use legoc_core::frontend::{parse_source, RecordKind, Type};
use legoc_core::layout::{LayoutEngine, SystemCompilerOracle, TypeLayout};
use legoc_core::mapping::{allocate_frame, SymbolTable};
use rand::seq::SliceRandom;
use rand::Rng;

const SCALARS: [&str; 10] = [
    "char", "unsigned char", "short", "unsigned short", "int", "unsigned", "long", "unsigned long", "float", "double",
];

pub struct Records {
    pub source: String,
    pub tops: Vec<Type>,
}

struct RecGen {
    source: String,
    next: usize,
}

impl RecGen {
    /// Defines a record nested at most `depth` levels and returns its type.
    fn record(&mut self, rng: &mut impl Rng, depth: usize) -> Type {
        let nfields = rng.gen_range(1..=5);
        let mut fields = Vec::new();
        for i in 0..nfields {
            let name = format!("m{i}");
            let decl = match rng.gen_range(0..10) {
                0..=4 => format!("{} {name}", SCALARS.choose(rng).unwrap()),
                5 => format!("{} {name}[{}]", SCALARS.choose(rng).unwrap(), rng.gen_range(1..6)),
                6 => format!("{} *{name}", SCALARS.choose(rng).unwrap()),
                _ if depth > 1 => {
                    let inner = self.record(rng, depth - 1);
                    let Type::Record(k, tag) = inner else { unreachable!() };
                    let len = if rng.gen_bool(0.3) { format!("[{}]", rng.gen_range(1..4)) } else { String::new() };
                    format!("{} {tag} {name}{len}", k.keyword())
                }
                _ => format!("{} {name}", SCALARS.choose(rng).unwrap()),
            };
            fields.push(decl);
        }
        let kind = if rng.gen_bool(0.25) { RecordKind::Union } else { RecordKind::Struct };
        let tag = format!("r{}", self.next);
        self.next += 1;
        let _ = write!(self.source, "{} {tag} {{", kind.keyword());
        for f in fields {
            let _ = write!(self.source, " {f};");
        }
        self.source.push_str(" };\n");
        Type::Record(kind, tag)
    }
}

/// `count` top-level compound types, each nested at most four levels deep.
pub fn random_records(rng: &mut impl Rng, count: usize) -> Records {
    let mut g = RecGen {
        source: String::new(),
        next: 0,
    };
    let tops = (0..count)
        .map(|_| {
            let depth = rng.gen_range(1..=4);
            g.record(rng, depth)
        })
        .collect();
    Records {
        source: g.source,
        tops,
    }
}

pub fn layouts_and_oracle(r: &Records) -> (Vec<TypeLayout>, SystemCompilerOracle) {
    let ast = parse_source(&r.source).unwrap();
    let e = LayoutEngine::from_ast(&ast);
    let layouts = r.tops.iter().map(|t| e.compute_layout(t).unwrap()).collect();
    (layouts, SystemCompilerOracle::new(ast.records().cloned().collect()))
}

/// A function with a random set of locals, allocated.
pub fn random_frame(rng: &mut impl Rng) -> SymbolTable {
    let recs = if rng.gen_bool(0.4) {
        let n = rng.gen_range(1..3);
        Some(random_records(rng, n))
    } else {
        None
    };
    let mut src = recs.as_ref().map(|r| r.source.clone()).unwrap_or_default();
    src.push_str("void f(void) {\n");
    for i in 0..rng.gen_range(1..10) {
        let ty = match rng.gen_range(0..6) {
            0 if recs.is_some() => {
                let r = recs.as_ref().unwrap();
                let Type::Record(k, tag) = r.tops.choose(rng).unwrap() else { unreachable!() };
                format!("{} {tag}", k.keyword())
            }
            1 => format!("{} *", SCALARS.choose(rng).unwrap()),
            _ => SCALARS.choose(rng).unwrap().to_string(),
        };
        let arr = if rng.gen_bool(0.25) { format!("[{}]", rng.gen_range(1..9)) } else { String::new() };
        let _ = writeln!(src, "    {ty} v{i}{arr};");
    }
    src.push_str("}\n");
    let ast = parse_source(&src).unwrap();
    let e = LayoutEngine::from_ast(&ast);
    allocate_frame(&ast, ast.function("f").unwrap(), &e).unwrap()
}
