use crate::ast::Span;
use crate::rational::{parse_rational, Rational};

use super::{ParseError, ParseErrorKind};

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(Rational),
    Sym(&'static str),
    /// Body of a `/*@ ... @*/` comment, with the position of its first character.
    Annot(String, u32, u32),
    Eof,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

const SYMBOLS: [&str; 28] = [
    "&&", "||", "==", "!=", "<=", ">=", "{", "}", "(", ")", "[", "]", ";", ",", ".", "!", "?",
    "=", "<", ">", "+", "-", "*", "/", "&", "|", "'", ":",
];

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: u32,
    col: u32,
    _src: &'a str,
}

impl Cursor<'_> {
    fn peek(&self, k: usize) -> Option<char> {
        self.chars.get(self.pos + k).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars().enumerate().all(|(i, c)| self.peek(i) == Some(c))
    }

    fn here(&self) -> Span {
        Span::point(self.line, self.col)
    }
}

/// Tokenizes `src`, reporting positions relative to `(line, col)`.
pub fn lex_at(src: &str, line: u32, col: u32) -> Result<Vec<Token>, ParseError> {
    let mut cur = Cursor { chars: src.chars().collect(), pos: 0, line, col, _src: src };
    let mut out = Vec::new();
    loop {
        skip_trivia(&mut cur)?;
        let start = cur.here();
        let Some(c) = cur.peek(0) else {
            out.push(Token { tok: Tok::Eof, span: start });
            return Ok(out);
        };
        let tok = if cur.starts_with("/*@") {
            for _ in 0..3 {
                cur.bump();
            }
            let (bl, bc) = (cur.line, cur.col);
            let mut body = String::new();
            loop {
                if cur.starts_with("@*/") {
                    for _ in 0..3 {
                        cur.bump();
                    }
                    break;
                }
                match cur.bump() {
                    Some(ch) => body.push(ch),
                    None => {
                        return Err(ParseError::new(
                            start,
                            "unterminated annotation comment",
                            vec!["@*/".into()],
                        ))
                    }
                }
            }
            Tok::Annot(body, bl, bc)
        } else if c.is_ascii_digit() {
            Tok::Num(lex_number(&mut cur, start)?)
        } else if c.is_alphabetic() || c == '_' || c == '$' {
            let mut s = String::new();
            while let Some(ch) = cur.peek(0) {
                if ch.is_alphanumeric() || ch == '_' || ch == '$' {
                    s.push(ch);
                    cur.bump();
                } else {
                    break;
                }
            }
            Tok::Ident(s)
        } else if let Some(sym) = SYMBOLS.iter().find(|s| cur.starts_with(s)) {
            for _ in 0..sym.len() {
                cur.bump();
            }
            Tok::Sym(sym)
        } else {
            return Err(ParseError::new(start, format!("unexpected character `{c}`"), vec![]));
        };
        let end = Span::point(cur.line, cur.col);
        out.push(Token { tok, span: start.to(end) });
    }
}

fn lex_number(cur: &mut Cursor<'_>, start: Span) -> Result<Rational, ParseError> {
    let mut text = String::new();
    let digits = |cur: &mut Cursor<'_>, text: &mut String| {
        while let Some(ch) = cur.peek(0) {
            if ch.is_ascii_digit() {
                text.push(ch);
                cur.bump();
            } else {
                break;
            }
        }
    };
    digits(cur, &mut text);
    if cur.peek(0) == Some('.') && cur.peek(1).is_some_and(|c| c.is_ascii_digit()) {
        text.push('.');
        cur.bump();
        digits(cur, &mut text);
    } else if cur.peek(0) == Some('/') && cur.peek(1).is_some_and(|c| c.is_ascii_digit()) {
        text.push('/');
        cur.bump();
        digits(cur, &mut text);
    }
    parse_rational(&text).ok_or_else(|| {
        ParseError::new(start, format!("invalid number `{text}`"), vec!["number".into()])
    })
}

fn skip_trivia(cur: &mut Cursor<'_>) -> Result<(), ParseError> {
    loop {
        match cur.peek(0) {
            Some(c) if c.is_whitespace() => {
                cur.bump();
            }
            Some('/') if cur.peek(1) == Some('/') => {
                while let Some(c) = cur.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            Some('/') if cur.peek(1) == Some('*') && cur.peek(2) != Some('@') => {
                let start = cur.here();
                cur.bump();
                cur.bump();
                loop {
                    if cur.starts_with("*/") {
                        cur.bump();
                        cur.bump();
                        break;
                    }
                    if cur.bump().is_none() {
                        return Err(ParseError {
                            kind: ParseErrorKind::Syntax,
                            file: None,
                            span: start,
                            message: "unterminated comment".into(),
                            expected: vec!["*/".into()],
                        });
                    }
                }
            }
            _ => return Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::frac;

    fn toks(src: &str) -> Vec<Tok> {
        lex_at(src, 1, 1).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn rational_literals_are_single_tokens() {
        assert_eq!(toks("1/2"), vec![Tok::Num(frac(1, 2)), Tok::Eof]);
        assert_eq!(
            toks("1 / 2"),
            vec![Tok::Num(frac(1, 1)), Tok::Sym("/"), Tok::Num(frac(2, 1)), Tok::Eof]
        );
        assert_eq!(toks("3.5"), vec![Tok::Num(frac(7, 2)), Tok::Eof]);
    }

    #[test]
    fn comments_and_annotations() {
        let t = toks("a // x\n /* y */ b /*@ timed_requires 1 @*/");
        assert_eq!(t[0], Tok::Ident("a".into()));
        assert_eq!(t[1], Tok::Ident("b".into()));
        assert!(matches!(&t[2], Tok::Annot(s, 2, _) if s.trim() == "timed_requires 1"));
    }

    #[test]
    fn maximal_munch_on_operators() {
        assert_eq!(
            toks("t!=null"),
            vec![Tok::Ident("t".into()), Tok::Sym("!="), Tok::Ident("null".into()), Tok::Eof]
        );
        assert_eq!(toks("level'")[1], Tok::Sym("'"));
    }

    #[test]
    fn bad_character_is_reported_with_position() {
        let e = lex_at("a\n  #", 1, 1).unwrap_err();
        assert_eq!((e.span.line, e.span.col), (2, 3));
    }
}
