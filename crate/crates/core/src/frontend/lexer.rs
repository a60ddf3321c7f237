use super::ast::Location;
use super::FrontendError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Int,
    Float,
    Keyword,
    Punct,
    /// The `/*@dispatch*/` marker.
    Annotation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub loc: Location,
}

impl Token {
    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }
}

pub const KEYWORDS: &[&str] = &[
    "int", "float", "void", "fnptr", "if", "else", "while", "goto", "break", "return", "switch",
    "case", "default", "assert", "input",
];

const PUNCT2: &[&str] = &["<=", ">=", "==", "!=", "&&", "||"];
const PUNCT1: &str = "+-*/%<>=!(){}[];:,";

pub const DISPATCH_ANNOTATION: &str = "/*@dispatch*/";

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn loc(&self) -> Location {
        Location::new(self.line, self.col)
    }
}

/// Split source text into tokens. Whitespace, `//` line comments and
/// `/* */` block comments are skipped, except for the dispatch annotation.
pub fn tokenize(source: &str) -> Result<Vec<Token>, FrontendError> {
    let mut cur = Cursor { src: source, pos: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    while let Some(c) = cur.peek() {
        let loc = cur.loc();
        if c.is_whitespace() {
            cur.bump();
        } else if cur.rest().starts_with("//") {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
        } else if cur.rest().starts_with(DISPATCH_ANNOTATION) {
            for _ in 0..DISPATCH_ANNOTATION.len() {
                cur.bump();
            }
            out.push(Token {
                kind: TokenKind::Annotation,
                text: DISPATCH_ANNOTATION.to_string(),
                loc,
            });
        } else if cur.rest().starts_with("/*") {
            cur.bump();
            cur.bump();
            loop {
                if cur.rest().starts_with("*/") {
                    cur.bump();
                    cur.bump();
                    break;
                }
                if cur.bump().is_none() {
                    return Err(FrontendError::Lex { loc, message: "unterminated comment".into() });
                }
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = cur.pos;
            while matches!(cur.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                cur.bump();
            }
            let text = &source[start..cur.pos];
            let kind = if KEYWORDS.contains(&text) { TokenKind::Keyword } else { TokenKind::Ident };
            out.push(Token { kind, text: text.to_string(), loc });
        } else if c.is_ascii_digit() {
            out.push(lex_number(&mut cur, loc)?);
        } else if let Some(p) = PUNCT2.iter().find(|p| cur.rest().starts_with(**p)) {
            cur.bump();
            cur.bump();
            out.push(Token { kind: TokenKind::Punct, text: p.to_string(), loc });
        } else if PUNCT1.contains(c) {
            cur.bump();
            out.push(Token { kind: TokenKind::Punct, text: c.to_string(), loc });
        } else {
            return Err(FrontendError::Lex { loc, message: format!("unexpected character {c:?}") });
        }
    }
    Ok(out)
}

fn lex_number(cur: &mut Cursor<'_>, loc: Location) -> Result<Token, FrontendError> {
    let start = cur.pos;
    let mut is_float = false;
    while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
        cur.bump();
    }
    if cur.peek() == Some('.') && matches!(cur.peek_at(1), Some(c) if c.is_ascii_digit()) {
        is_float = true;
        cur.bump();
        while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
            cur.bump();
        }
    }
    if matches!(cur.peek(), Some('e') | Some('E')) {
        let sign = matches!(cur.peek_at(1), Some('+') | Some('-'));
        let digit_at = if sign { 2 } else { 1 };
        if matches!(cur.peek_at(digit_at), Some(c) if c.is_ascii_digit()) {
            is_float = true;
            for _ in 0..digit_at {
                cur.bump();
            }
            while matches!(cur.peek(), Some(c) if c.is_ascii_digit()) {
                cur.bump();
            }
        }
    }
    if matches!(cur.peek(), Some(c) if c.is_ascii_alphabetic() || c == '_') {
        return Err(FrontendError::Lex { loc, message: "malformed number".into() });
    }
    let text = cur.src[start..cur.pos].to_string();
    let kind = if is_float { TokenKind::Float } else { TokenKind::Int };
    Ok(Token { kind, text, loc })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src).unwrap().into_iter().map(|t| (t.kind, t.text)).collect()
    }

    #[test]
    fn assignment_tokens() {
        use TokenKind::*;
        assert_eq!(
            shape("x = x + 1;"),
            vec![
                (Ident, "x".into()),
                (Punct, "=".into()),
                (Ident, "x".into()),
                (Punct, "+".into()),
                (Int, "1".into()),
                (Punct, ";".into()),
            ]
        );
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").unwrap().is_empty());
        assert!(tokenize("  // only a comment\n").unwrap().is_empty());
    }

    #[test]
    fn while_header() {
        use TokenKind::*;
        assert_eq!(
            shape("while (i<10)"),
            vec![
                (Keyword, "while".into()),
                (Punct, "(".into()),
                (Ident, "i".into()),
                (Punct, "<".into()),
                (Int, "10".into()),
                (Punct, ")".into()),
            ]
        );
    }

    #[test]
    fn floats_and_two_char_ops() {
        use TokenKind::*;
        assert_eq!(
            shape("a<=1.5e3&&b!=2"),
            vec![
                (Ident, "a".into()),
                (Punct, "<=".into()),
                (Float, "1.5e3".into()),
                (Punct, "&&".into()),
                (Ident, "b".into()),
                (Punct, "!=".into()),
                (Int, "2".into()),
            ]
        );
    }

    #[test]
    fn annotation_survives_comment_stripping() {
        let toks = tokenize("/* plain */ /*@dispatch*/ switch").unwrap();
        assert_eq!(toks.len(), 2);
        assert_eq!(toks[0].kind, TokenKind::Annotation);
    }

    #[test]
    fn unknown_character_reports_location() {
        match tokenize("x = 1;\n  y = $;") {
            Err(FrontendError::Lex { loc, .. }) => assert_eq!(loc, Location::new(2, 7)),
            other => panic!("expected lex error, got {other:?}"),
        }
    }

    #[test]
    fn locations_strictly_increase() {
        let toks = tokenize("int x;\nwhile (x < 3) { x = x + 1; }\n").unwrap();
        for w in toks.windows(2) {
            assert!(w[0].loc < w[1].loc);
        }
    }
}
