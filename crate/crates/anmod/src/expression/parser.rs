//! Lexer and recursive-descent parser for model expressions.
//!
//! Grammar (binding from loosest to tightest: `+ -`, `* /`, unary `-`, `^`):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?          // right-associative
//! atom   := number | name | name '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus, so `-x^2` is `-(x^2)` while the
//! exponent position re-admits unary minus so `2^-3` parses as `2^(-3)`.

use super::{BinOp, Expr, Func, ParseError, UnaryOp, VarRef};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64),
    Name(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Number(v) => format!("number `{v}`"),
            Tok::Name(n) => format!("name `{n}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Returns the next token and its starting byte offset.
    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::Eof, start));
        }
        let c = self.src[self.pos];
        let simple = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = simple {
            self.pos += 1;
            return Ok((tok, start));
        }
        if c.is_ascii_digit() {
            return self.lex_number(start);
        }
        if c == b'_' || c.is_ascii_alphabetic() {
            while self.pos < self.src.len()
                && (self.src[self.pos] == b'_' || self.src[self.pos].is_ascii_alphanumeric())
            {
                self.pos += 1;
            }
            let name = std::str::from_utf8(&self.src[start..self.pos])
                .expect("identifier bytes are ASCII")
                .to_string();
            return Ok((Tok::Name(name), start));
        }
        Err(ParseError::Syntax {
            offset: start,
            expected: "a number, name, operator, or parenthesis".into(),
            found: format!("`{}`", char::from(c)),
        })
    }

    fn lex_number(&mut self, start: usize) -> Result<(Tok, usize), ParseError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            let frac_start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == frac_start {
                return Err(ParseError::Syntax {
                    offset: self.pos,
                    expected: "digits after decimal point".into(),
                    found: self.peek_desc(),
                });
            }
        }
        if self.pos < self.src.len() && (self.src[self.pos] | 0x20) == b'e' {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < self.src.len()
                && (self.src[self.pos] == b'+' || self.src[self.pos] == b'-')
            {
                self.pos += 1;
            }
            let exp_start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if self.pos == exp_start {
                // Not an exponent after all; `1e` could start the identifier-like
                // suffix of a malformed literal, which the grammar has no use for.
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("number bytes are ASCII");
        let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
            offset: start,
            expected: "a numeric literal".into(),
            found: format!("`{text}`"),
        })?;
        Ok((Tok::Number(value), start))
    }

    fn peek_desc(&self) -> String {
        if self.pos >= self.src.len() {
            "end of input".into()
        } else {
            format!("`{}`", char::from(self.src[self.pos]))
        }
    }
}

pub(super) struct Parser {
    toks: Vec<(Tok, usize)>,
    idx: usize,
}

impl Parser {
    pub(super) fn parse(src: &str) -> Result<Expr, ParseError> {
        let mut lexer = Lexer::new(src);
        let mut toks = Vec::new();
        loop {
            let (tok, off) = lexer.next()?;
            let done = tok == Tok::Eof;
            toks.push((tok, off));
            if done {
                break;
            }
        }
        let mut parser = Parser { toks, idx: 0 };
        let expr = parser.expr()?;
        parser.expect_eof()?;
        Ok(expr)
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.idx].0
    }

    fn offset(&self) -> usize {
        self.toks[self.idx].1
    }

    fn bump(&mut self) -> Tok {
        let tok = self.toks[self.idx].0.clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        tok
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.err("an operator (`+`, `-`, `*`, `/`, `^`) or end of input"))
        }
    }

    fn err(&self, expected: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.offset(),
            expected: expected.into(),
            found: self.peek().describe(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::Unary(UnaryOp::Neg, Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            // The exponent re-admits unary minus: `2^-3`.
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Number(v) => {
                self.bump();
                Ok(Expr::Number(v))
            }
            Tok::Name(name) => {
                let name_offset = self.offset();
                self.bump();
                if *self.peek() == Tok::LParen {
                    self.bump();
                    let func = match name.as_str() {
                        "sqrt" => Func::Sqrt,
                        "abs" => Func::Abs,
                        _ => {
                            return Err(ParseError::UnknownFunction {
                                name,
                                offset: name_offset,
                            });
                        }
                    };
                    let arg = self.expr()?;
                    if *self.peek() != Tok::RParen {
                        return Err(self.err("`)` closing the function argument"));
                    }
                    self.bump();
                    Ok(Expr::Call(func, Box::new(arg)))
                } else {
                    Ok(Expr::Ref(VarRef { name, kind: None }))
                }
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.err("`)`"));
                }
                self.bump();
                Ok(inner)
            }
            _ => Err(self.err("a number, name, `-`, or `(`")),
        }
    }
}
