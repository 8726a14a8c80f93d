use std::collections::BTreeSet;

use super::{AssemblyFragment, TranslateError};

const JUMPS: &[&str] = &[
    "jmp", "je", "jne", "jz", "jnz", "jl", "jle", "jg", "jge", "jb", "jbe", "ja", "jae", "js", "jns", "jp", "jnp",
    "jo", "jno", "jc", "jnc", "call",
];

/// Local labels (`.L...`) defined in and referenced by assembly text.
pub fn scan_labels(text: &str) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut defined = BTreeSet::new();
    let mut required = BTreeSet::new();
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(name) = line.strip_suffix(':') {
            if name.starts_with(".L") && !name.contains(char::is_whitespace) {
                defined.insert(name.to_string());
            }
            continue;
        }
        let mut words = line.split_whitespace();
        let Some(op) = words.next() else { continue };
        if JUMPS.contains(&op) {
            if let Some(t) = words.next() {
                if t.starts_with(".L") {
                    required.insert(t.trim_end_matches(',').to_string());
                }
            }
        }
        let mut rest = line;
        while let Some(i) = rest.find("(%rip)") {
            let head = &rest[..i];
            let start = head
                .rfind(|c: char| c.is_whitespace() || c == ',' || c == '$')
                .map_or(0, |p| p + 1);
            let sym = head[start..].split(['+', '-']).next().unwrap_or("");
            if sym.starts_with(".L") {
                required.insert(sym.to_string());
            }
            rest = &rest[i + 6..];
        }
    }
    (defined, required)
}

/// Takes the last fenced code block of an LLM reply.
pub fn extract_assembly(raw: &str) -> Result<AssemblyFragment, TranslateError> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in raw.lines() {
        if line.trim_start().starts_with("```") {
            match current.take() {
                Some(b) => blocks.push(b.join("\n")),
                None => current = Some(Vec::new()),
            }
        } else if let Some(b) = &mut current {
            b.push(line);
        }
    }
    let text = blocks.pop().ok_or(TranslateError::Extraction)?;
    let mut text = text.trim_end().to_string();
    text.push('\n');
    Ok(AssemblyFragment::from_text(text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_block() {
        let f = extract_assembly("Here:\n```asm\n\tmovl $1, %eax\n```\n").unwrap();
        assert_eq!(f.text, "\tmovl $1, %eax\n");
    }

    #[test]
    fn last_block_wins() {
        let raw = "First try:\n```\nnop\n```\nBetter:\n```x86asm\n.L_f__1_body:\n\tjmp .L_f__1_body\n\tmovsd .LC1(%rip), %xmm0\n```\nDone.";
        let f = extract_assembly(raw).unwrap();
        assert!(f.text.starts_with(".L_f__1_body:"));
        assert!(f.defined_labels.contains(".L_f__1_body"));
        assert!(f.required_labels.contains(".L_f__1_body"));
        assert!(f.required_labels.contains(".LC1"));
    }

    #[test]
    fn no_block_is_an_error() {
        assert_eq!(extract_assembly("I cannot do that."), Err(TranslateError::Extraction));
    }
}
