//! Cheap function-level flags used to steer translation and splitting.

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::printer::print_function;
use super::typeck::TypeEnv;
use super::types::Type;
use crate::splitter::SplitConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureFlags {
    pub long: bool,
    pub numerical: bool,
    pub order: bool,
    pub has_goto: bool,
    pub token_estimate: usize,
}

/// Whitespace-delimited lexemes times 1.3, rounded up.
pub fn token_estimate(text: &str) -> usize {
    let n = text.split_whitespace().count();
    (n * 13).div_ceil(10)
}

pub fn analyze_features(f: &FunctionDef, config: &SplitConfig) -> FeatureFlags {
    let mut flags = FeatureFlags {
        token_estimate: token_estimate(&print_function(f)),
        numerical: is_floating_base(&f.sig.ret) || f.sig.params.iter().any(|p| is_floating_base(&p.ty)),
        ..FeatureFlags::default()
    };
    flags.long = flags.token_estimate > config.split_threshold;
    for s in &f.body.items {
        s.walk(&mut |st| {
            if matches!(st.kind, StmtKind::Goto(_)) {
                flags.has_goto = true;
            }
            if let StmtKind::Decl(ds) = &st.kind {
                flags.numerical |= ds.iter().any(|d| is_floating_base(&d.ty));
            }
            for e in st.own_exprs() {
                if e.operator_count() > config.expr_complexity_limit {
                    flags.order = true;
                }
                e.walk(&mut |x| match &x.kind {
                    ExprKind::FloatLit(..) => flags.numerical = true,
                    ExprKind::Cast(t, _) if t.is_floating() => flags.numerical = true,
                    _ => {}
                });
            }
        });
    }
    flags
}

/// Like [`analyze_features`], additionally typing every expression so that
/// floating-point globals and calls returning floating values count as numerical.
pub fn analyze_features_in(ast: &Ast, f: &FunctionDef, config: &SplitConfig) -> FeatureFlags {
    let mut flags = analyze_features(f, config);
    if flags.numerical {
        return flags;
    }
    let env = TypeEnv::from_ast(ast).with_function(f);
    for s in &f.body.items {
        s.walk(&mut |st| {
            for e in st.own_exprs() {
                e.walk(&mut |x| {
                    if env.type_of(x).is_ok_and(|t| t.is_floating()) {
                        flags.numerical = true;
                    }
                });
            }
        });
    }
    flags
}

fn is_floating_base(t: &Type) -> bool {
    t.base().is_floating()
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_source;
    use super::*;

    fn flags(src: &str) -> FeatureFlags {
        let ast = parse_source(src).unwrap();
        let f = ast.functions().last().unwrap().clone();
        analyze_features_in(&ast, &f, &SplitConfig::default())
    }

    #[test]
    fn trivial_function_has_no_flags() {
        let f = flags("int f(){return 1;}");
        assert!(!f.long && !f.numerical && !f.order && !f.has_goto);
    }

    #[test]
    fn double_declaration_is_numerical() {
        assert!(flags("int f(int x, int y, int z){ double d = x*y+z; return 0; }").numerical);
        assert!(flags("double g; int f(){ return g > 0; }").numerical);
    }

    #[test]
    fn goto_and_order() {
        assert!(flags("int f(){ goto l; l: return 0; }").has_goto);
        assert!(flags("int f(int a){ return a+a+a+a+a+a+a+a+a+a; }").order);
    }

    #[test]
    fn estimate_rounds_up() {
        assert_eq!(token_estimate("a b c"), 4);
        assert_eq!(token_estimate(""), 0);
        assert_eq!(token_estimate("x y c d e f g h i j"), 13);
    }

    #[test]
    fn three_thousand_tokens_is_long() {
        let mut body = String::new();
        // each statement prints as 5 lexemes
        for i in 0..470 {
            body.push_str(&format!("x = x + {i};\n"));
        }
        let f = flags(&format!("int f(int x){{ {body} return x; }}"));
        assert!(f.token_estimate >= 3000, "{}", f.token_estimate);
        assert!(f.long);
    }
}
