//! Spatial coefficient expressions.
//!
//! Grammar: numbers, the coordinates `x` and `y`, `+ - * /`, parentheses,
//! and the functions `abs(e)`, `min(a, b)`, `max(a, b)`, `step(e)` where
//! `step(e) = 1` for `e > 0` and `0` otherwise.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::Point;

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    X,
    Y,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Abs(Box<Node>),
    Min(Box<Node>, Box<Node>),
    Max(Box<Node>, Box<Node>),
    Step(Box<Node>),
}

impl Node {
    fn eval(&self, p: Point) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::X => p[0],
            Node::Y => p[1],
            Node::Neg(a) => -a.eval(p),
            Node::Add(a, b) => a.eval(p) + b.eval(p),
            Node::Sub(a, b) => a.eval(p) - b.eval(p),
            Node::Mul(a, b) => a.eval(p) * b.eval(p),
            Node::Div(a, b) => a.eval(p) / b.eval(p),
            Node::Abs(a) => a.eval(p).abs(),
            Node::Min(a, b) => a.eval(p).min(b.eval(p)),
            Node::Max(a, b) => a.eval(p).max(b.eval(p)),
            Node::Step(a) => {
                if a.eval(p) > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    fn constant(&self) -> Option<f64> {
        match self {
            Node::Num(v) => Some(*v),
            Node::Neg(a) => a.constant().map(|v| -v),
            _ => None,
        }
    }
}

/// A parsed spatial function `Ω → ℝ`.
#[derive(Clone, PartialEq)]
pub struct SpatialFn {
    source: String,
    root: Node,
}

impl fmt::Debug for SpatialFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpatialFn({})", self.source)
    }
}

impl fmt::Display for SpatialFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl SpatialFn {
    pub fn parse(source: &str) -> Result<SpatialFn> {
        let tokens = tokenize(source)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            source,
        };
        let root = parser.expr()?;
        if parser.pos != tokens.len() {
            return Err(parser.error("unexpected trailing input"));
        }
        Ok(SpatialFn {
            source: source.trim().to_string(),
            root,
        })
    }

    pub fn constant(value: f64) -> SpatialFn {
        SpatialFn {
            source: format!("{value}"),
            root: Node::Num(value),
        }
    }

    pub fn eval(&self, p: Point) -> f64 {
        self.root.eval(p)
    }

    /// The value when the expression is a literal constant.
    pub fn as_constant(&self) -> Option<f64> {
        self.root.constant()
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

impl From<f64> for SpatialFn {
    fn from(value: f64) -> Self {
        SpatialFn::constant(value)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
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
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| Error::Parse {
                field: src.to_string(),
                message: format!("bad number `{text}`"),
            })?;
            out.push(Token::Num(v));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect()));
        } else if "+-*/(),×−".contains(c) {
            let op = match c {
                '×' => '*',
                '−' => '-',
                other => other,
            };
            out.push(Token::Op(op));
            i += 1;
        } else {
            return Err(Error::Parse {
                field: src.to_string(),
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    source: &'a str,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Parse {
            field: self.source.to_string(),
            message: format!("{message} at token {}", self.pos),
        }
    }

    fn peek_op(&self, op: char) -> bool {
        matches!(self.tokens.get(self.pos), Some(Token::Op(c)) if *c == op)
    }

    fn expect_op(&mut self, op: char) -> Result<()> {
        if self.peek_op(op) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{op}`")))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            if self.peek_op('+') {
                self.pos += 1;
                lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.peek_op('-') {
                self.pos += 1;
                lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            if self.peek_op('*') {
                self.pos += 1;
                lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.peek_op('/') {
                self.pos += 1;
                lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.peek_op('-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(match inner {
                Node::Num(v) => Node::Num(-v),
                other => Node::Neg(Box::new(other)),
            });
        }
        if self.peek_op('+') {
            self.pos += 1;
            return self.unary();
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Node> {
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| self.error("unexpected end of expression"))?;
        self.pos += 1;
        match tok {
            Token::Num(v) => Ok(Node::Num(v)),
            Token::Op('(') => {
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            Token::Ident(name) => match name.as_str() {
                "x" => Ok(Node::X),
                "y" => Ok(Node::Y),
                "abs" | "step" => {
                    self.expect_op('(')?;
                    let a = Box::new(self.expr()?);
                    self.expect_op(')')?;
                    Ok(if name == "abs" {
                        Node::Abs(a)
                    } else {
                        Node::Step(a)
                    })
                }
                "min" | "max" => {
                    self.expect_op('(')?;
                    let a = Box::new(self.expr()?);
                    self.expect_op(',')?;
                    let b = Box::new(self.expr()?);
                    self.expect_op(')')?;
                    Ok(if name == "min" {
                        Node::Min(a, b)
                    } else {
                        Node::Max(a, b)
                    })
                }
                other => Err(self.error(&format!("unknown identifier `{other}`"))),
            },
            Token::Op(c) => Err(self.error(&format!("unexpected `{c}`"))),
        }
    }
}
