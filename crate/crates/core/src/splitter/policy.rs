use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{is_atomic, SplitConfig};
use crate::frontend::ast::Stmt;
use crate::frontend::features::token_estimate;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Keep,
    Split,
}

/// A candidate block as seen by a split policy.
pub struct BlockView<'a> {
    pub stmts: &'a [Stmt],
    pub text: &'a str,
    pub tokens: usize,
    /// Contains a control structure (or several top-level segments).
    pub is_control: bool,
    pub loop_depth: usize,
}

impl<'a> BlockView<'a> {
    pub fn new(stmts: &'a [Stmt], text: &'a str, loop_depth: usize) -> BlockView<'a> {
        BlockView {
            stmts,
            text,
            tokens: token_estimate(text),
            is_control: !stmts.iter().all(is_atomic),
            loop_depth,
        }
    }
}

pub trait SplitPolicy: Send + Sync {
    fn decide(&self, block: &BlockView<'_>, config: &SplitConfig) -> Decision;
}

/// Splits control blocks whose token estimate exceeds the threshold.
pub struct HeuristicPolicy;

impl SplitPolicy for HeuristicPolicy {
    fn decide(&self, block: &BlockView<'_>, config: &SplitConfig) -> Decision {
        if block.is_control && block.tokens > config.split_threshold {
            Decision::Split
        } else {
            Decision::Keep
        }
    }
}

pub struct AlwaysSplit;

impl SplitPolicy for AlwaysSplit {
    fn decide(&self, _: &BlockView<'_>, _: &SplitConfig) -> Decision {
        Decision::Split
    }
}

pub struct NeverSplit;

impl SplitPolicy for NeverSplit {
    fn decide(&self, _: &BlockView<'_>, _: &SplitConfig) -> Decision {
        Decision::Keep
    }
}

/// Coin flips from a seeded stream; exercises arbitrary keep/split mixes.
pub struct RandomPolicy(Mutex<ChaCha8Rng>);

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        RandomPolicy(Mutex::new(ChaCha8Rng::seed_from_u64(seed)))
    }
}

impl SplitPolicy for RandomPolicy {
    fn decide(&self, _: &BlockView<'_>, _: &SplitConfig) -> Decision {
        if self.0.lock().expect("rng lock").gen_bool(0.5) {
            Decision::Split
        } else {
            Decision::Keep
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;
    use crate::frontend::printer::print_items;

    fn view_of(src: &str) -> (Vec<Stmt>, String) {
        let f = parse_source(src).unwrap().functions().next().unwrap().clone();
        let text = print_items(&f.body.items, 0);
        (f.body.items, text)
    }

    #[test]
    fn heuristic_thresholds() {
        let cfg = SplitConfig::default();
        let (s, t) = view_of("void f(int a){ if (a) { a = a + 1; } }");
        assert_eq!(HeuristicPolicy.decide(&BlockView::new(&s, &t, 0), &cfg), Decision::Keep);

        let mut body = String::new();
        for i in 0..150 {
            body.push_str(&format!("s = s + {i} * i;\n"));
        }
        let (s, t) = view_of(&format!("void f(int s){{ for (int i = 0; i < 3; i++) {{ {body} }} }}"));
        let v = BlockView::new(&s, &t, 0);
        assert!(v.tokens > 900, "{}", v.tokens);
        assert_eq!(HeuristicPolicy.decide(&v, &cfg), Decision::Split);

        let (s, t) = view_of(&format!("void f(int s, int i){{ {body} }}"));
        assert_eq!(HeuristicPolicy.decide(&BlockView::new(&s, &t, 0), &cfg), Decision::Keep);
    }
}
