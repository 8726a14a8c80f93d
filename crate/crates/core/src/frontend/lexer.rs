use super::ast::Span;
use super::FrontendError;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Int {
        value: u64,
        decimal: bool,
        unsigned: bool,
        long: bool,
    },
    Float {
        value: f64,
        single: bool,
    },
    Char(i64),
    Str(Vec<u8>),
    Punct(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int { value, .. } => format!("integer {value}"),
            Tok::Float { value, .. } => format!("float {value}"),
            Tok::Char(c) => format!("char literal {c}"),
            Tok::Str(_) => "string literal".to_string(),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

// Longest first so maximal munch works with a linear scan.
const PUNCTS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "&=", "^=", "|=", "{", "}", "(", ")", "[", "]", ";", ",", ".", "+",
    "-", "*", "/", "%", "&", "|", "^", "~", "!", "<", ">", "=", "?", ":",
];

pub fn tokenize(text: &str) -> Result<Vec<(Tok, Span)>, FrontendError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line_start = true;
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            line_start = true;
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        // Preprocessor residue (line markers, pragmas) is skipped.
        if c == b'#' && line_start {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        line_start = false;
        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            let start = i;
            i += 2;
            loop {
                if i + 1 >= bytes.len() {
                    return Err(FrontendError::Syntax {
                        pos: start,
                        expected: vec!["`*/`".into()],
                        found: "end of input".into(),
                    });
                }
                if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                    i += 2;
                    break;
                }
                i += 1;
            }
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), Span::new(start, i)));
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let (tok, end) = lex_number(text, start)?;
            out.push((tok, Span::new(start, end)));
            i = end;
            continue;
        }
        if c == b'\'' {
            let (bytes_val, end) = lex_quoted(text, start, b'\'')?;
            if bytes_val.len() != 1 {
                return Err(FrontendError::Unsupported {
                    span: Span::new(start, end),
                    feature: "multi-character constant".into(),
                });
            }
            // char is signed: '\xff' is -1
            out.push((Tok::Char(bytes_val[0] as i8 as i64), Span::new(start, end)));
            i = end;
            continue;
        }
        if c == b'"' {
            let (mut s, mut end) = lex_quoted(text, start, b'"')?;
            // adjacent string literals concatenate
            loop {
                let mut j = end;
                while j < bytes.len() && bytes[j].is_ascii_whitespace() {
                    j += 1;
                }
                if j < bytes.len() && bytes[j] == b'"' {
                    let (more, e) = lex_quoted(text, j, b'"')?;
                    s.extend(more);
                    end = e;
                } else {
                    break;
                }
            }
            out.push((Tok::Str(s), Span::new(start, end)));
            i = end;
            continue;
        }
        let rest = &text[i..];
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                out.push((Tok::Punct(p), Span::new(i, i + p.len())));
                i += p.len();
            }
            None => {
                return Err(FrontendError::Syntax {
                    pos: i,
                    expected: vec!["token".into()],
                    found: format!("character {:?}", rest.chars().next().unwrap_or(' ')),
                })
            }
        }
    }
    out.push((Tok::Eof, Span::new(text.len(), text.len())));
    Ok(out)
}

fn lex_number(text: &str, start: usize) -> Result<(Tok, usize), FrontendError> {
    let bytes = text.as_bytes();
    let mut i = start;
    let is_hex = bytes[i] == b'0' && matches!(bytes.get(i + 1), Some(b'x' | b'X'));
    if is_hex {
        i += 2;
        while i < bytes.len() && bytes[i].is_ascii_hexdigit() {
            i += 1;
        }
    } else {
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
    }
    let mut is_float = false;
    if !is_hex {
        if i < bytes.len() && bytes[i] == b'.' {
            is_float = true;
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
        }
        if i < bytes.len() && matches!(bytes[i], b'e' | b'E') {
            let mut j = i + 1;
            if j < bytes.len() && matches!(bytes[j], b'+' | b'-') {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                is_float = true;
                i = j;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
        }
    }
    let body_end = i;
    let bad = |end: usize| FrontendError::Syntax {
        pos: start,
        expected: vec!["numeric literal".into()],
        found: text[start..end].to_string(),
    };
    if is_float {
        let value: f64 = text[start..body_end].parse().map_err(|_| bad(body_end))?;
        let mut single = false;
        if i < bytes.len() && matches!(bytes[i], b'f' | b'F') {
            single = true;
            i += 1;
        } else if i < bytes.len() && matches!(bytes[i], b'l' | b'L') {
            return Err(FrontendError::Unsupported {
                span: Span::new(start, i + 1),
                feature: "long double".into(),
            });
        }
        let value = if single { value as f32 as f64 } else { value };
        return Ok((Tok::Float { value, single }, i));
    }
    let digits = &text[start..body_end];
    let value = if is_hex {
        u64::from_str_radix(&digits[2..], 16).map_err(|_| bad(body_end))?
    } else if digits.len() > 1 && digits.starts_with('0') {
        u64::from_str_radix(&digits[1..], 8).map_err(|_| bad(body_end))?
    } else {
        digits.parse().map_err(|_| bad(body_end))?
    };
    let mut unsigned = false;
    let mut long = false;
    while i < bytes.len() {
        match bytes[i] {
            b'u' | b'U' if !unsigned => unsigned = true,
            b'l' | b'L' => long = true,
            _ => break,
        }
        i += 1;
    }
    if i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
        return Err(bad(i + 1));
    }
    Ok((
        Tok::Int {
            value,
            decimal: !is_hex && !(digits.len() > 1 && digits.starts_with('0')),
            unsigned,
            long,
        },
        i,
    ))
}

fn lex_quoted(text: &str, start: usize, quote: u8) -> Result<(Vec<u8>, usize), FrontendError> {
    let bytes = text.as_bytes();
    let mut i = start + 1;
    let mut out = Vec::new();
    loop {
        let Some(&c) = bytes.get(i) else {
            return Err(FrontendError::Syntax {
                pos: start,
                expected: vec![format!("closing {}", quote as char)],
                found: "end of input".into(),
            });
        };
        if c == quote {
            return Ok((out, i + 1));
        }
        if c == b'\n' {
            return Err(FrontendError::Syntax {
                pos: i,
                expected: vec![format!("closing {}", quote as char)],
                found: "newline".into(),
            });
        }
        if c != b'\\' {
            out.push(c);
            i += 1;
            continue;
        }
        let esc = *bytes.get(i + 1).unwrap_or(&b'\\');
        i += 2;
        let v = match esc {
            b'n' => b'\n',
            b't' => b'\t',
            b'r' => b'\r',
            b'a' => 7,
            b'b' => 8,
            b'f' => 12,
            b'v' => 11,
            b'\\' => b'\\',
            b'\'' => b'\'',
            b'"' => b'"',
            b'?' => b'?',
            b'x' => {
                let s = i;
                while i < bytes.len() && bytes[i].is_ascii_hexdigit() {
                    i += 1;
                }
                u32::from_str_radix(&text[s..i], 16).unwrap_or(0) as u8
            }
            b'0'..=b'7' => {
                let s = i - 1;
                while i < bytes.len() && i < s + 3 && (b'0'..=b'7').contains(&bytes[i]) {
                    i += 1;
                }
                u32::from_str_radix(&text[s..i], 8).unwrap_or(0) as u8
            }
            other => other,
        };
        out.push(v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|(t, _)| t).collect()
    }

    #[test]
    fn literals() {
        assert_eq!(
            toks("0x56671485")[0],
            Tok::Int {
                value: 0x56671485,
                decimal: false,
                unsigned: false,
                long: false
            }
        );
        assert_eq!(
            toks("1.5f")[0],
            Tok::Float {
                value: 1.5,
                single: true
            }
        );
        assert_eq!(toks("'\\n'")[0], Tok::Char(10));
        assert_eq!(toks("\"a\" \"b\"")[0], Tok::Str(b"ab".to_vec()));
        assert_eq!(toks("017")[0], Tok::Int { value: 15, decimal: false, unsigned: false, long: false });
    }

    #[test]
    fn comments_and_directives_skipped() {
        let t = toks("# 1 \"x.c\"\nint /* c */ a; // tail\n");
        assert_eq!(
            t,
            vec![
                Tok::Ident("int".into()),
                Tok::Ident("a".into()),
                Tok::Punct(";"),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn maximal_munch() {
        assert_eq!(
            toks("a<<=b->c"),
            vec![
                Tok::Ident("a".into()),
                Tok::Punct("<<="),
                Tok::Ident("b".into()),
                Tok::Punct("->"),
                Tok::Ident("c".into()),
                Tok::Eof
            ]
        );
    }
}
