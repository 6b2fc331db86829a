use std::fmt;

use super::{ParseError, Pos};

pub const FUNCTIONS: [&str; 8] = ["sqrt", "abs", "sin", "cos", "exp", "dot", "cross", "norm2"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Num(f64),
    Ident(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
    Vector(Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: Pos,
}

impl Expr {
    pub fn new(kind: ExprKind, pos: Pos) -> Self {
        Expr { kind, pos }
    }

    pub fn num(value: f64) -> Self {
        Expr::new(ExprKind::Num(value), Pos::default())
    }
}

/// Fully parenthesized form that parses back to an equivalent tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Num(x) if *x < 0.0 => write!(f, "(-{:?})", -x),
            ExprKind::Num(x) => write!(f, "{x:?}"),
            ExprKind::Ident(name) => f.write_str(name),
            ExprKind::Neg(e) => write!(f, "(-({e}))"),
            ExprKind::Binary(op, a, b) => write!(f, "(({a}) {} ({b}))", op.symbol()),
            ExprKind::Call(name, args) => {
                write!(f, "{name}(")?;
                write_list(f, args)?;
                f.write_str(")")
            }
            ExprKind::Vector(items) => {
                f.write_str("[")?;
                write_list(f, items)?;
                f.write_str("]")
            }
        }
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, items: &[Expr]) -> fmt::Result {
    for (i, e) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{e}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(x) => format!("number {x}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Sym(c) => format!("`{c}`"),
        Tok::End => "end of input".into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let value: f64 = s.parse().map_err(|_| ParseError::Lexical {
                pos,
                message: format!("malformed number `{s}`"),
            })?;
            if !value.is_finite() {
                return Err(ParseError::Lexical {
                    pos,
                    message: format!("number `{s}` is out of range"),
                });
            }
            out.push((Tok::Num(value), pos));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
        } else if "+-*/^()[],".contains(c) {
            i += 1;
            out.push((Tok::Sym(c), pos));
        } else {
            return Err(ParseError::Lexical {
                pos,
                message: format!("unexpected character `{c}`"),
            });
        }
        col += i - start;
    }
    out.push((Tok::End, Pos { line, col }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{c}`")))
        }
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        ParseError::Syntax {
            pos: self.pos(),
            message: format!("expected {wanted}, found {}", describe(self.peek())),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let (_, pos) = self.bump();
            let rhs = self.term()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), pos);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            let (_, pos) = self.bump();
            let rhs = self.factor()?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), pos);
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() == Tok::Sym('^') {
            let (_, pos) = self.bump();
            let exponent = self.factor()?;
            return Ok(Expr::new(
                ExprKind::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)),
                pos,
            ));
        }
        Ok(base)
    }

    fn list(&mut self, close: char) -> Result<Vec<Expr>, ParseError> {
        let mut items = vec![self.expr()?];
        while self.eat(',') {
            items.push(self.expr()?);
        }
        self.expect(close)?;
        Ok(items)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Num(x) => {
                self.bump();
                Ok(Expr::new(ExprKind::Num(x), pos))
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() != Tok::Sym('(') {
                    return Ok(Expr::new(ExprKind::Ident(name), pos));
                }
                if !FUNCTIONS.contains(&name.as_str()) {
                    return Err(ParseError::UnknownFunction { pos, name });
                }
                self.bump();
                let args = self.list(')')?;
                Ok(Expr::new(ExprKind::Call(name, args), pos))
            }
            Tok::Sym('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Sym('-') => {
                self.bump();
                let e = self.atom()?;
                Ok(Expr::new(ExprKind::Neg(Box::new(e)), pos))
            }
            Tok::Sym('[') => {
                self.bump();
                let items = self.list(']')?;
                Ok(Expr::new(ExprKind::Vector(items), pos))
            }
            _ => Err(self.unexpected("a number, identifier, `(`, `[` or `-`")),
        }
    }
}

pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: lex(text)?, at: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_associativity() {
        let e = parse("1 - 2 - 3").unwrap();
        assert_eq!(e.to_string(), "((((1.0) - (2.0))) - (3.0))");
        let e = parse("2^3^2").unwrap();
        assert_eq!(e.to_string(), "((2.0) ^ (((3.0) ^ (2.0))))");
        let e = parse("-x1^2").unwrap();
        assert_eq!(e.to_string(), "(((-(x1))) ^ (2.0))");
        let e = parse("a + b*c").unwrap();
        assert!(matches!(e.kind, ExprKind::Binary(BinOp::Add, _, _)));
    }

    #[test]
    fn numbers() {
        for (s, v) in [("1.5e-3", 1.5e-3), ("2E+2", 200.0), (".5", 0.5), ("7", 7.0)] {
            assert_eq!(parse(s).unwrap().kind, ExprKind::Num(v), "{s}");
        }
        assert!(matches!(parse("1.2.3"), Err(ParseError::Lexical { .. })));
        assert!(matches!(parse("1e999"), Err(ParseError::Lexical { .. })));
    }

    #[test]
    fn error_positions() {
        match parse("foo(x1)") {
            Err(ParseError::UnknownFunction { name, pos }) => {
                assert_eq!(name, "foo");
                assert_eq!(pos, Pos { line: 1, col: 1 });
            }
            other => panic!("{other:?}"),
        }
        match parse("x1 +\n  * 2") {
            Err(ParseError::Syntax { pos, .. }) => assert_eq!(pos, Pos { line: 2, col: 3 }),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("x1 $ 2"), Err(ParseError::Lexical { pos: Pos { line: 1, col: 4 }, .. })));
        assert!(matches!(parse("(x1"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("x1 x2"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse(""), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn calls_and_vectors() {
        let e = parse("cross([1,0,0], v)").unwrap();
        match e.kind {
            ExprKind::Call(name, args) => {
                assert_eq!(name, "cross");
                assert!(matches!(args[0].kind, ExprKind::Vector(ref items) if items.len() == 3));
            }
            other => panic!("{other:?}"),
        }
    }
}
