//! Inputs shared by the benchmarks.

use legoc_core::suite::gen_subset_program;
use legoc_core::{parse_source, Ast};

/// Parsed generated programs for seeds `0..n` at the given statement budget.
pub fn programs(n: u64, budget: usize) -> Vec<Ast> {
    (0..n)
        .map(|seed| parse_source(&gen_subset_program(seed, budget)).expect("generated programs parse"))
        .collect()
}
