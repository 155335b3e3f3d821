//! Arithmetic expressions in the two variables `u` and `v`.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, numeric literals,
//! named constants and the functions `exp ln log sqrt abs sin cos tanh min max pow`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    U,
    V,
    Neg(Box<Node>),
    Bin(Op, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Exp,
    Ln,
    Sqrt,
    Abs,
    Sin,
    Cos,
    Tanh,
    Min,
    Max,
    Pow,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "exp" => (Func::Exp, 1),
            "ln" | "log" => (Func::Ln, 1),
            "sqrt" => (Func::Sqrt, 1),
            "abs" => (Func::Abs, 1),
            "sin" => (Func::Sin, 1),
            "cos" => (Func::Cos, 1),
            "tanh" => (Func::Tanh, 1),
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            "pow" => (Func::Pow, 2),
            _ => return None,
        })
    }
}

/// A compiled expression `f(u, v)`. Constants are substituted at parse time.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    source: String,
    root: Node,
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Expression {
    pub fn parse(source: &str, constants: &BTreeMap<String, f64>) -> Result<Self> {
        let tokens = tokenize(source)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            constants,
        };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Config(format!(
                "unexpected trailing input in expression '{source}'"
            )));
        }
        Ok(Self {
            source: source.to_string(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn eval(&self, u: f64, v: f64) -> f64 {
        eval(&self.root, u, v)
    }
}

fn eval(n: &Node, u: f64, v: f64) -> f64 {
    match n {
        Node::Num(x) => *x,
        Node::U => u,
        Node::V => v,
        Node::Neg(a) => -eval(a, u, v),
        Node::Bin(op, a, b) => {
            let (x, y) = (eval(a, u, v), eval(b, u, v));
            match op {
                Op::Add => x + y,
                Op::Sub => x - y,
                Op::Mul => x * y,
                Op::Div => x / y,
                Op::Pow => pow(x, y),
            }
        }
        Node::Call(f, args) => {
            let x = eval(&args[0], u, v);
            match f {
                Func::Exp => x.exp(),
                Func::Ln => x.ln(),
                Func::Sqrt => x.sqrt(),
                Func::Abs => x.abs(),
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Tanh => x.tanh(),
                Func::Min => x.min(eval(&args[1], u, v)),
                Func::Max => x.max(eval(&args[1], u, v)),
                Func::Pow => pow(x, eval(&args[1], u, v)),
            }
        }
    }
}

fn pow(x: f64, y: f64) -> f64 {
    if y.fract() == 0.0 && y.abs() <= 64.0 {
        x.powi(y as i32)
    } else {
        x.powf(y)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = s.chars().collect();
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
            let x = text
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number '{text}' in expression")))?;
            out.push(Tok::Num(x));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return Err(Error::Config(format!("unexpected character '{c}' in expression")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Tok>,
    pos: usize,
    constants: &'a BTreeMap<String, f64>,
}

impl Parser<'_> {
    fn peek_sym(&self) -> Option<char> {
        match self.tokens.get(self.pos) {
            Some(Tok::Sym(c)) => Some(*c),
            _ => None,
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek_sym() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Config(format!("expected '{c}' in expression")))
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.term()?;
            let op = if c == '+' { Op::Add } else { Op::Sub };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_sym() {
            self.pos += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { Op::Mul } else { Op::Div };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek_sym() {
            Some('-') => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some('+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    // Right associative; binds tighter than unary minus on its left.
    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.peek_sym() == Some('^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin(Op::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let tok = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Config("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(x) => Ok(Node::Num(x)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.peek_sym() == Some('(') {
                    let (func, arity) = Func::lookup(&name)
                        .ok_or_else(|| Error::Config(format!("unknown function '{name}'")))?;
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while self.peek_sym() == Some(',') {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(')')?;
                    if args.len() != arity {
                        return Err(Error::Config(format!(
                            "function '{name}' takes {arity} argument(s), got {}",
                            args.len()
                        )));
                    }
                    return Ok(Node::Call(func, args));
                }
                match name.as_str() {
                    "u" => Ok(Node::U),
                    "v" => Ok(Node::V),
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    _ => self
                        .constants
                        .get(&name)
                        .map(|x| Node::Num(*x))
                        .ok_or_else(|| Error::Config(format!("unknown symbol '{name}' in expression"))),
                }
            }
            Tok::Sym(c) => Err(Error::Config(format!("unexpected '{c}' in expression"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Expression {
        let mut c = BTreeMap::new();
        c.insert("a".to_string(), 2.0);
        Expression::parse(s, &c).unwrap()
    }

    #[test]
    fn precedence_and_unary() {
        assert_eq!(parse("1 + 2 * 3").eval(0.0, 0.0), 7.0);
        assert_eq!(parse("-2^2").eval(0.0, 0.0), -4.0);
        assert_eq!(parse("2^3^2").eval(0.0, 0.0), 512.0);
        assert_eq!(parse("(1 + 2) * 3").eval(0.0, 0.0), 9.0);
        assert_eq!(parse("2e-1*10").eval(0.0, 0.0), 2.0);
    }

    #[test]
    fn variables_constants_functions() {
        let e = parse("v*(1-u) + a*exp(0) - max(u, v)");
        assert_eq!(e.eval(0.5, 0.25), 0.25 * 0.5 + 2.0 - 0.5);
    }

    #[test]
    fn rejects_unknown_symbols() {
        let c = BTreeMap::new();
        assert!(Expression::parse("w + 1", &c).is_err());
        assert!(Expression::parse("foo(u)", &c).is_err());
        assert!(Expression::parse("u +", &c).is_err());
        assert!(Expression::parse("u # v", &c).is_err());
        assert!(Expression::parse("min(u)", &c).is_err());
    }
}
