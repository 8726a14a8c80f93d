//! Prompt construction for LLM backends. Output depends only on the request.

use std::fmt::Write as _;

use super::{Mode, TranslationRequest};
use crate::splitter::PartRole;

const DIRECT_INSTRUCTIONS: &str = "\
Translate the following C function into x86-64 assembly in AT&T syntax for the GNU assembler.
Emit the entry label, the prologue and the epilogue. Reply with a single fenced code block.";

const LEGO_INSTRUCTIONS: &str = "\
Translate the following block of a larger C function into x86-64 assembly in AT&T syntax.
The prologue and epilogue are emitted elsewhere: do not save or restore %rbp, do not adjust
the frame and do not emit `ret`. Access every local through the frame offset given in the
symbol table, as `offset(%rbp)`. A `return` sets %rax (or %xmm0) and jumps to the epilogue
label. Reply with a single fenced code block.";

const DIRECT_EXAMPLE: &str = "\
### Example
C:
int add(int a, int b) { return a + b; }
Assembly:
```
add:
\tpushq %rbp
\tmovq %rsp, %rbp
\tmovl %edi, -4(%rbp)
\tmovl %esi, -8(%rbp)
\tmovl -4(%rbp), %eax
\taddl -8(%rbp), %eax
\tleave
\tret
```";

const LEGO_EXAMPLE: &str = "\
### Example
Symbol table:
a__1 -4 4 4
b__2 -8 4 4
C block:
a__1 = b__2 + 3;
Assembly:
```
\tmovl -8(%rbp), %eax
\taddl $3, %eax
\tmovl %eax, -4(%rbp)
```";

const COMMON_ERRORS: &str = "\
### Known pitfalls
- `cmp' instructions cannot compare two immediate values; load one operand into a register first.
- Global variables are addressed rip-relative, as `name(%rip)`, never as absolute addresses.
- An immediate must fit the width of its destination operand.";

const FLOAT_KNOWLEDGE: &str = "\
### Floating point
- Place floating-point constants in .rodata and load them rip-relative, e.g. `movsd .LC0(%rip), %xmm0`.
- `double` and `float` arguments and results travel in %xmm registers; use cvtsi2sd/cvttsd2si for conversions.
- Use ucomisd for comparisons and account for the parity flag on unordered operands.";

const ORDER_KNOWLEDGE: &str = "\
### Evaluation order
- Evaluate operands with side effects exactly once, in the order they appear.";

const LONG_KNOWLEDGE: &str = "\
### Long input
- Keep every label unique; prefer labels derived from the function name.";

fn part_contract(role: PartRole) -> &'static str {
    match role {
        PartRole::Condition => "Leave 1 in %rax if the condition holds and 0 otherwise.",
        PartRole::SwitchValue => "Leave the promoted switch operand, sign- or zero-extended, in %rax.",
        PartRole::ForStep => "Evaluate the expression for its side effects only.",
        PartRole::Control => "Emit only the jump; a preceding block has left its value in %rax.",
        PartRole::Statements | PartRole::ForInit => "Execute the statements in order.",
    }
}

pub fn build_prompt(req: &TranslationRequest) -> String {
    let mut p = String::new();
    let lego = req.mode == Mode::Lego;
    p.push_str(if lego { LEGO_INSTRUCTIONS } else { DIRECT_INSTRUCTIONS });
    p.push_str("\n\n");
    p.push_str(if lego { LEGO_EXAMPLE } else { DIRECT_EXAMPLE });
    p.push_str("\n\n");
    p.push_str(COMMON_ERRORS);
    p.push_str("\n\n");
    if req.flags.numerical {
        p.push_str(FLOAT_KNOWLEDGE);
        p.push_str("\n\n");
    }
    if req.flags.order {
        p.push_str(ORDER_KNOWLEDGE);
        p.push_str("\n\n");
    }
    if req.flags.long {
        p.push_str(LONG_KNOWLEDGE);
        p.push_str("\n\n");
    }
    if let Some(t) = &req.symbol_table {
        let _ = write!(p, "### Symbol table\n{}\n", t.to_text());
        let _ = writeln!(p, "Epilogue label: .L_{}__epilogue\n", t.function);
    }
    if !req.context.trim().is_empty() {
        let _ = write!(p, "### Declarations\n{}\n\n", req.context.trim_end());
    }
    if let Some(ctx) = &req.part {
        let part = &ctx.part;
        let _ = writeln!(p, "### Part {} ({:?}, {:?})", part.id, part.kind, part.role);
        let _ = writeln!(p, "Loop depth: {}", ctx.loop_depth);
        if !ctx.preceding_labels.is_empty() {
            let _ = writeln!(p, "Labels already defined: {}", ctx.preceding_labels.join(" "));
        }
        if let Some(b) = &part.break_target {
            let _ = writeln!(p, "`break` jumps to {b}");
        }
        if let Some(c) = &part.continue_target {
            let _ = writeln!(p, "`continue` jumps to {c}");
        }
        if part.is_jump() {
            let _ = writeln!(p, "Jump target: {} ({:?})", part.payload, part.cond);
        }
        let _ = writeln!(p, "Internal labels must start with .L_{}__p{}_", req.function, part.id);
        let _ = writeln!(p, "{}\n", part_contract(part.role));
    }
    let _ = write!(p, "### Source\n```c\n{}\n```\n", req.source.trim_end());
    if let Some(fb) = &req.feedback {
        let _ = write!(
            p,
            "\n### Diagnostics from attempt {} ({})\n{}\n",
            fb.attempt,
            fb.error_class,
            fb.diagnostics.trim_end()
        );
        if !fb.excerpt.is_empty() {
            let _ = write!(p, "Offending lines:\n{}\n", fb.excerpt.trim_end());
        }
    }
    p
}
