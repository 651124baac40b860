use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Int(i64),
    Float(f64),
    Str(String),
    Ident(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
    And,
    Or,
    Not,
    True,
    False,
    Null,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Int(i) => format!("number `{i}`"),
            Tok::Float(f) => format!("number `{f}`"),
            Tok::Str(s) => format!("string '{s}'"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Eq => "=",
            Tok::Ne => "!=",
            Tok::Ge => ">=",
            Tok::Gt => ">",
            Tok::And => "and",
            Tok::Or => "or",
            Tok::Not => "not",
            Tok::True => "true",
            Tok::False => "false",
            Tok::Null => "null",
            _ => "?",
        }
    }
}

/// A token and the byte offset where it starts.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub offset: usize,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let simple = |tok, len| (tok, len);
        let (tok, len) = match c {
            b'(' => simple(Tok::LParen, 1),
            b')' => simple(Tok::RParen, 1),
            b'[' => simple(Tok::LBracket, 1),
            b']' => simple(Tok::RBracket, 1),
            b',' => simple(Tok::Comma, 1),
            b'+' => simple(Tok::Plus, 1),
            b'-' => simple(Tok::Minus, 1),
            b'*' => simple(Tok::Star, 1),
            b'/' => simple(Tok::Slash, 1),
            b'<' => match bytes.get(i + 1) {
                Some(b'=') => simple(Tok::Le, 2),
                Some(b'>') => simple(Tok::Ne, 2),
                _ => simple(Tok::Lt, 1),
            },
            b'>' => match bytes.get(i + 1) {
                Some(b'=') => simple(Tok::Ge, 2),
                _ => simple(Tok::Gt, 1),
            },
            b'=' => match bytes.get(i + 1) {
                Some(b'=') => simple(Tok::Eq, 2),
                _ => simple(Tok::Eq, 1),
            },
            b'!' => match bytes.get(i + 1) {
                Some(b'=') => simple(Tok::Ne, 2),
                _ => return Err(ParseError::new(i, "unexpected `!`", &["!="])),
            },
            b'\'' => {
                let (s, len) = lex_string(src, i)?;
                (Tok::Str(s), len)
            }
            b'0'..=b'9' => lex_number(src, i)?,
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i + 1;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                let word = &src[i..j];
                let tok = match word.to_ascii_lowercase().as_str() {
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "not" => Tok::Not,
                    "true" => Tok::True,
                    "false" => Tok::False,
                    "null" => Tok::Null,
                    _ => Tok::Ident(word.to_string()),
                };
                (tok, j - i)
            }
            _ => {
                // Unicode comparison operators.
                let rest = &src[i..];
                if let Some(ch) = rest.chars().next() {
                    let tok = match ch {
                        '≤' => Some(Tok::Le),
                        '≥' => Some(Tok::Ge),
                        '≠' => Some(Tok::Ne),
                        _ => None,
                    };
                    match tok {
                        Some(t) => (t, ch.len_utf8()),
                        None => return Err(ParseError::new(i, format!("unexpected character `{ch}`"), &[])),
                    }
                } else {
                    return Err(ParseError::new(i, "unexpected byte", &[]));
                }
            }
        };
        out.push(Spanned { tok, offset: start });
        i += len;
    }
    out.push(Spanned {
        tok: Tok::Eof,
        offset: src.len(),
    });
    Ok(out)
}

/// Single-quoted, `''` escapes a quote.
fn lex_string(src: &str, start: usize) -> Result<(String, usize), ParseError> {
    let mut s = String::new();
    let mut chars = src[start + 1..].char_indices().peekable();
    while let Some((idx, ch)) = chars.next() {
        if ch == '\'' {
            if let Some((_, '\'')) = chars.peek() {
                chars.next();
                s.push('\'');
                continue;
            }
            return Ok((s, idx + 2));
        }
        s.push(ch);
    }
    Err(ParseError::new(start, "unterminated string literal", &["'"]))
}

fn lex_number(src: &str, start: usize) -> Result<(Tok, usize), ParseError> {
    let bytes = src.as_bytes();
    let mut j = start;
    let digits = |j: &mut usize| {
        let from = *j;
        while *j < bytes.len() && bytes[*j].is_ascii_digit() {
            *j += 1;
        }
        *j > from
    };
    digits(&mut j);
    let mut is_float = false;
    if j < bytes.len() && bytes[j] == b'.' && bytes.get(j + 1).is_some_and(u8::is_ascii_digit) {
        j += 1;
        digits(&mut j);
        is_float = true;
    }
    if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
        let mut k = j + 1;
        if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
            k += 1;
        }
        if digits(&mut k) {
            j = k;
            is_float = true;
        } else {
            return Err(ParseError::new(j, "malformed exponent", &["digit"]));
        }
    }
    let text = &src[start..j];
    if !is_float {
        if let Ok(i) = text.parse::<i64>() {
            return Ok((Tok::Int(i), j - start));
        }
    }
    match text.parse::<f64>() {
        Ok(f) if f.is_finite() => Ok((Tok::Float(f), j - start)),
        _ => Err(ParseError::new(start, format!("number `{text}` is out of range"), &[])),
    }
}
