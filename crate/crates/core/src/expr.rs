//! Small arithmetic expression language for model configs and candidate
//! storage functions passed on the command line.
//!
//! Grammar (standard precedence, `^` right-associative and binding tighter
//! than unary minus):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | power
//! power  := atom ('^' factor)?
//! atom   := number | variable | func '(' expr ')' | '(' expr ')'
//! func   := 'exp' | 'ln' | 'sin' | 'cos'
//! ```
//!
//! Variables are `x1..xn` (state), `u1..um` (input), `y1..yp` (output),
//! 1-based in the surface syntax. Which families are legal depends on the
//! slot the expression fills; `validate` enforces that at load time so
//! evaluation never fails on indices.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    State,
    Input,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
}

#[derive(Debug, Clone)]
pub enum Expr {
    Const(f64),
    Var(VarKind, usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Eval(format!(
                "unexpected trailing input at token {:?}",
                p.tokens[p.pos]
            )));
        }
        Ok(e)
    }

    /// Check every variable reference against the allowed dimensions.
    /// A dimension of 0 forbids that family entirely.
    pub fn validate(&self, n_state: usize, n_input: usize, n_output: usize) -> Result<()> {
        match self {
            Expr::Const(_) => Ok(()),
            Expr::Var(kind, idx) => {
                let (dim, name) = match kind {
                    VarKind::State => (n_state, "x"),
                    VarKind::Input => (n_input, "u"),
                    VarKind::Output => (n_output, "y"),
                };
                if *idx >= dim {
                    Err(Error::Eval(format!(
                        "variable {name}{} out of range (dimension is {dim})",
                        idx + 1
                    )))
                } else {
                    Ok(())
                }
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.validate(n_state, n_input, n_output),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => {
                a.validate(n_state, n_input, n_output)?;
                b.validate(n_state, n_input, n_output)
            }
        }
    }

    /// Evaluate with IEEE semantics; the caller decides whether a non-finite
    /// value is an error for its context.
    pub fn eval(&self, x: &[f64], u: &[f64], y: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(VarKind::State, i) => x[*i],
            Expr::Var(VarKind::Input, i) => u[*i],
            Expr::Var(VarKind::Output, i) => y[*i],
            Expr::Neg(a) => -a.eval(x, u, y),
            Expr::Add(a, b) => a.eval(x, u, y) + b.eval(x, u, y),
            Expr::Sub(a, b) => a.eval(x, u, y) - b.eval(x, u, y),
            Expr::Mul(a, b) => a.eval(x, u, y) * b.eval(x, u, y),
            Expr::Div(a, b) => a.eval(x, u, y) / b.eval(x, u, y),
            Expr::Pow(a, b) => a.eval(x, u, y).powf(b.eval(x, u, y)),
            Expr::Call(Func::Exp, a) => a.eval(x, u, y).exp(),
            Expr::Call(Func::Ln, a) => a.eval(x, u, y).ln(),
            Expr::Call(Func::Sin, a) => a.eval(x, u, y).sin(),
            Expr::Call(Func::Cos, a) => a.eval(x, u, y).cos(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Var(VarKind, usize),
    Func(Func),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(src: &str) -> Result<Vec<Token>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '/' => {
                out.push(Token::Slash);
                i += 1;
            }
            '^' => {
                out.push(Token::Caret);
                i += 1;
            }
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && matches!(bytes[i] as char, '0'..='9' | '.') {
                    i += 1;
                }
                // exponent part, only if followed by digits
                if i < bytes.len() && matches!(bytes[i] as char, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j] as char, '+' | '-') {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &src[start..i];
                let v: f64 = text
                    .parse()
                    .map_err(|_| Error::Eval(format!("bad number literal '{text}'")))?;
                out.push(Token::Num(v));
            }
            'a'..='z' | 'A'..='Z' => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_alphabetic() {
                    i += 1;
                }
                let word = &src[start..i];
                let digits_start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
                let digits = &src[digits_start..i];
                match (word, digits.is_empty()) {
                    ("exp", true) => out.push(Token::Func(Func::Exp)),
                    ("ln", true) => out.push(Token::Func(Func::Ln)),
                    ("sin", true) => out.push(Token::Func(Func::Sin)),
                    ("cos", true) => out.push(Token::Func(Func::Cos)),
                    ("x" | "u" | "y", false) => {
                        let idx: usize = digits
                            .parse()
                            .map_err(|_| Error::Eval(format!("bad variable index '{digits}'")))?;
                        if idx == 0 {
                            return Err(Error::Eval(format!(
                                "variable {word}0 is invalid, indices start at 1"
                            )));
                        }
                        let kind = match word {
                            "x" => VarKind::State,
                            "u" => VarKind::Input,
                            _ => VarKind::Output,
                        };
                        out.push(Token::Var(kind, idx - 1));
                    }
                    _ => {
                        return Err(Error::Eval(format!(
                            "unknown identifier '{word}{digits}'"
                        )))
                    }
                }
            }
            other => return Err(Error::Eval(format!("unexpected character '{other}'"))),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Token) -> Result<()> {
        match self.bump() {
            Some(got) if got == t => Ok(()),
            Some(got) => Err(Error::Eval(format!("expected {t:?}, found {got:?}"))),
            None => Err(Error::Eval(format!("expected {t:?}, found end of input"))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if matches!(self.peek(), Some(Token::Minus)) {
            self.pos += 1;
            let inner = self.factor()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Token::Caret)) {
            self.pos += 1;
            let exp = self.factor()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.bump() {
            Some(Token::Num(v)) => Ok(Expr::Const(v)),
            Some(Token::Var(kind, idx)) => Ok(Expr::Var(kind, idx)),
            Some(Token::Func(f)) => {
                self.expect(Token::LParen)?;
                let arg = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(Expr::Call(f, Box::new(arg)))
            }
            Some(Token::LParen) => {
                let e = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(e)
            }
            Some(other) => Err(Error::Eval(format!("unexpected token {other:?}"))),
            None => Err(Error::Eval("unexpected end of input".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: &[f64]) -> f64 {
        Expr::parse(src).unwrap().eval(x, &[], &[])
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1+2*3", &[]), 7.0);
        assert_eq!(ev("(1+2)*3", &[]), 9.0);
        assert_eq!(ev("2^3^2", &[]), 512.0); // right-assoc
        assert_eq!(ev("-2^2", &[]), -4.0); // minus binds looser than ^
        assert_eq!(ev("2^-1", &[]), 0.5);
        assert_eq!(ev("6/3/2", &[]), 1.0); // left-assoc
        assert_eq!(ev("1-2-3", &[]), -4.0);
    }

    #[test]
    fn functions_and_variables() {
        assert!((ev("exp(x1)-1", &[0.1]) - (0.1f64.exp() - 1.0)).abs() < 1e-15);
        assert_eq!(ev("x1*x2", &[3.0, 4.0]), 12.0);
        let e = Expr::parse("u1*y1 - y1^2").unwrap();
        assert_eq!(e.eval(&[], &[2.0], &[3.0]), -3.0);
        assert!((ev("sin(x1)^2 + cos(x1)^2", &[0.7]) - 1.0).abs() < 1e-15);
        assert!((ev("ln(exp(x1))", &[1.25]) - 1.25).abs() < 1e-15);
    }

    #[test]
    fn scientific_literals() {
        assert_eq!(ev("1e-3", &[]), 1e-3);
        assert_eq!(ev("2.5E2", &[]), 250.0);
        assert_eq!(ev("1.5e+1", &[]), 15.0);
    }

    #[test]
    fn validation_catches_bad_indices() {
        let e = Expr::parse("x3 + u1").unwrap();
        assert!(e.validate(2, 1, 0).is_err());
        assert!(e.validate(3, 1, 0).is_ok());
        let s = Expr::parse("u1*y1").unwrap();
        assert!(s.validate(0, 1, 1).is_ok());
        assert!(s.validate(0, 0, 1).is_err());
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("x0").is_err());
        assert!(Expr::parse("foo(x1)").is_err());
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("(x1").is_err());
        assert!(Expr::parse("x1 x2").is_err());
        assert!(Expr::parse("1..2").is_err());
    }
}
