//! Pratt parser for the infix model grammar.
//!
//! Precedence (loosest first): `+ -`, `* /`, unary `-`, `^` (`**`).
//! Power is right-associative and its exponent may start with a unary
//! minus, so `2^-x^2` is `2^(-(x^2))`.

use super::{BinaryOp, Expr, ExprError, UnaryOp};

const BP_ADD: u8 = 10;
const BP_MUL: u8 = 20;
const BP_NEG: u8 = 30;
const BP_POW: u8 = 40;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(BinaryOp),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Eof,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>, ExprError> {
        let mut lexer = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (tok, col) = lexer.next()?;
            let done = tok == Tok::Eof;
            out.push((tok, col));
            if done {
                return Ok(out);
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn next(&mut self) -> Result<(Tok, usize), ExprError> {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
        let start = self.pos;
        let col = start + 1;
        let Some(c) = self.peek() else {
            return Ok((Tok::Eof, col));
        };
        let rest = &self.src[start..];
        let single = |tok| Ok((tok, col));
        self.pos += c.len_utf8();
        match c {
            '+' => single(Tok::Op(BinaryOp::Add)),
            '-' => single(Tok::Op(BinaryOp::Sub)),
            '/' => single(Tok::Op(BinaryOp::Div)),
            '^' => single(Tok::Op(BinaryOp::Pow)),
            '*' if rest.starts_with("**") => {
                self.pos += 1;
                single(Tok::Op(BinaryOp::Pow))
            }
            '*' => single(Tok::Op(BinaryOp::Mul)),
            '(' => single(Tok::LParen),
            ')' => single(Tok::RParen),
            '[' => single(Tok::LBracket),
            ']' => single(Tok::RBracket),
            c if c.is_ascii_digit() || c == '.' => {
                self.pos = start + number_len(rest);
                let text = &self.src[start..self.pos];
                text.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(|v| (Tok::Num(v), col))
                    .ok_or_else(|| ExprError::Syntax {
                        column: col,
                        message: format!("invalid number `{text}`"),
                    })
            }
            c if c.is_alphabetic() || c == '_' => {
                while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
                    self.pos += self.peek().map_or(0, char::len_utf8);
                }
                Ok((Tok::Ident(self.src[start..self.pos].to_string()), col))
            }
            other => Err(ExprError::Syntax {
                column: col,
                message: format!("unexpected character `{other}`"),
            }),
        }
    }
}

fn number_len(s: &str) -> usize {
    let b = s.as_bytes();
    let mut i = 0;
    while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
        i += 1;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        let mut j = i + 1;
        if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
            j += 1;
        }
        if j < b.len() && b[j].is_ascii_digit() {
            while j < b.len() && b[j].is_ascii_digit() {
                j += 1;
            }
            i = j;
        }
    }
    i
}

struct Parser<'v, S> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    vars: &'v [S],
}

impl<S: AsRef<str>> Parser<'_, S> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn column(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ExprError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn error(&self, message: String) -> ExprError {
        ExprError::Syntax { column: self.column(), message }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Expr, ExprError> {
        let mut lhs = self.prefix()?;
        loop {
            let op = match self.peek() {
                Tok::Op(op) => *op,
                _ => break,
            };
            let (lbp, rbp) = match op {
                BinaryOp::Add | BinaryOp::Sub => (BP_ADD, BP_ADD + 1),
                BinaryOp::Mul | BinaryOp::Div => (BP_MUL, BP_MUL + 1),
                BinaryOp::Pow => (BP_POW, BP_POW),
            };
            if lbp < min_bp {
                break;
            }
            self.bump();
            let rhs = self.expr(rbp)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Expr, ExprError> {
        let (tok, col) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::Op(BinaryOp::Sub) => {
                let operand = self.expr(BP_NEG)?;
                Ok(match operand {
                    Expr::Const(c) => Expr::Const(-c),
                    other => Expr::Unary(UnaryOp::Neg, Box::new(other)),
                })
            }
            Tok::Op(BinaryOp::Add) => self.expr(BP_NEG),
            Tok::LParen => {
                let inner = self.expr(0)?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => self.identifier(name, col),
            Tok::Eof => Err(ExprError::Syntax {
                column: col,
                message: "unexpected end of input".into(),
            }),
            other => Err(ExprError::Syntax {
                column: col,
                message: format!("unexpected token {other:?}"),
            }),
        }
    }

    fn identifier(&mut self, name: String, col: usize) -> Result<Expr, ExprError> {
        if *self.peek() == Tok::LParen {
            let op = UnaryOp::from_name(&name)
                .ok_or(ExprError::UnknownFunction { name, column: col })?;
            self.bump();
            let arg = self.expr(0)?;
            self.expect(Tok::RParen, "`)` after function argument")?;
            return Ok(Expr::Unary(op, Box::new(arg)));
        }
        if let Some(k) = self.vars.iter().position(|v| v.as_ref() == name) {
            return Ok(Expr::Var(k));
        }
        if name == "theta" && *self.peek() == Tok::LBracket {
            self.bump();
            let index = match self.bump() {
                (Tok::Num(v), _) if v >= 0.0 && v.fract() == 0.0 => v as usize,
                (_, column) => {
                    return Err(ExprError::Syntax {
                        column,
                        message: "expected a parameter index".into(),
                    })
                }
            };
            self.expect(Tok::RBracket, "`]`")?;
            return Ok(Expr::Param(index));
        }
        if let Some(digits) = name.strip_prefix('t') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                if let Ok(i) = digits.parse() {
                    return Ok(Expr::Param(i));
                }
            }
        }
        Err(ExprError::UnknownIdentifier { name, column: col })
    }
}

/// Parse infix model text.
///
/// Identifiers listed in `variables` become [`Expr::Var`] nodes (by
/// position); `theta[i]` and `t{i}` become [`Expr::Param`] nodes. A unary
/// minus applied directly to a literal is folded into the constant.
pub fn parse<S: AsRef<str>>(source: &str, variables: &[S]) -> Result<Expr, ExprError> {
    let toks = Lexer::tokens(source)?;
    let mut parser = Parser { toks, pos: 0, vars: variables };
    let expr = parser.expr(0)?;
    if *parser.peek() != Tok::Eof {
        return Err(parser.error("unexpected trailing input".into()));
    }
    Ok(expr)
}
