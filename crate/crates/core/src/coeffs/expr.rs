//! Scalar field expressions over `x1..xd`.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?          // right associative
//! atom    := number | 'pi' | xN | func '(' args ')' | '(' sum ')'
//! ```
//!
//! so `-x1^2` is `-(x1^2)` and `2^3^2` is `2^(3^2)`. Evaluation runs a flat
//! postfix program with a fixed-size stack, which keeps per-step cost low in
//! the path simulation loop.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

const MAX_STACK: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function `{name}` at byte {offset} expects {expected} argument(s), got {found}")]
    Arity {
        name: String,
        offset: usize,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("zero raised to a negative power")]
    ZeroToNegativePower,
    #[error("non-finite intermediate value")]
    NonFinite,
    #[error("variable x{index} referenced but the point has dimension {dim}")]
    VariableOutOfRange { index: usize, dim: usize },
}

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

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Tanh,
    Abs,
    Min,
    Max,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "tanh" => Func::Tanh,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }
}

/// Expression tree. Variables are stored zero-based (`x1` is `Var(0)`).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(e) => e.max_var(),
            Expr::Bin(_, l, r) => match (l.max_var(), r.max_var()) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            },
            Expr::Call(_, args) => args.iter().filter_map(Expr::max_var).max(),
        }
    }

    fn compile(&self, out: &mut Vec<Op>) {
        match self {
            Expr::Num(v) => out.push(Op::Const(*v)),
            Expr::Var(i) => out.push(Op::Var(*i)),
            Expr::Neg(e) => {
                e.compile(out);
                out.push(Op::Neg);
            }
            Expr::Bin(op, l, r) => {
                l.compile(out);
                // integer exponents take the powi fast path
                if *op == BinOp::Pow {
                    if let Expr::Num(p) = **r {
                        if p.fract() == 0.0 && p.abs() <= 64.0 {
                            out.push(Op::PowI(p as i32));
                            return;
                        }
                    }
                }
                r.compile(out);
                out.push(match op {
                    BinOp::Add => Op::Add,
                    BinOp::Sub => Op::Sub,
                    BinOp::Mul => Op::Mul,
                    BinOp::Div => Op::Div,
                    BinOp::Pow => Op::Pow,
                });
            }
            Expr::Call(f, args) => {
                for a in args {
                    a.compile(out);
                }
                out.push(Op::Call(*f));
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Var(usize),
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    PowI(i32),
    Call(Func),
}

fn pow_checked(base: f64, exp: f64) -> Result<f64, EvalError> {
    if base == 0.0 && exp < 0.0 {
        return Err(EvalError::ZeroToNegativePower);
    }
    Ok(base.powf(exp))
}

/// A parsed, compiled scalar field.
#[derive(Debug, Clone)]
pub struct FieldExpr {
    ast: Expr,
    program: Vec<Op>,
    /// Number of variables the expression needs (highest index + 1).
    arity: usize,
    constant: Option<f64>,
}

impl PartialEq for FieldExpr {
    fn eq(&self, other: &Self) -> bool {
        self.ast == other.ast
    }
}

impl FieldExpr {
    pub fn from_ast(ast: Expr) -> Result<Self, ParseError> {
        let mut program = Vec::new();
        ast.compile(&mut program);
        let depth = stack_depth(&program);
        if depth > MAX_STACK {
            return Err(ParseError::Syntax {
                offset: 0,
                message: format!("expression needs stack depth {depth} (limit {MAX_STACK})"),
            });
        }
        let arity = ast.max_var().map_or(0, |i| i + 1);
        let mut fe = FieldExpr {
            ast,
            program,
            arity,
            constant: None,
        };
        if arity == 0 {
            fe.constant = fe.run(&[]).ok();
        }
        Ok(fe)
    }

    pub fn constant(value: f64) -> Self {
        FieldExpr::from_ast(Expr::Num(value)).expect("literal always compiles")
    }

    pub fn zero() -> Self {
        FieldExpr::constant(0.0)
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    /// Highest variable index referenced, plus one.
    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Value when the expression has no variables and evaluates cleanly.
    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }

    pub fn is_zero(&self) -> bool {
        self.constant == Some(0.0)
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        if let Some(c) = self.constant {
            return Ok(c);
        }
        if self.arity > x.len() {
            return Err(EvalError::VariableOutOfRange {
                index: self.arity,
                dim: x.len(),
            });
        }
        self.run(x)
    }

    fn run(&self, x: &[f64]) -> Result<f64, EvalError> {
        let mut stack = [0.0f64; MAX_STACK];
        let mut sp = 0usize;
        for op in &self.program {
            match *op {
                Op::Const(v) => {
                    stack[sp] = v;
                    sp += 1;
                }
                Op::Var(i) => {
                    stack[sp] = x[i];
                    sp += 1;
                }
                Op::Neg => stack[sp - 1] = -stack[sp - 1],
                Op::PowI(p) => {
                    let b = stack[sp - 1];
                    if b == 0.0 && p < 0 {
                        return Err(EvalError::ZeroToNegativePower);
                    }
                    stack[sp - 1] = b.powi(p);
                }
                Op::Call(f) if f.arity() == 1 => {
                    let a = stack[sp - 1];
                    stack[sp - 1] = match f {
                        Func::Sin => a.sin(),
                        Func::Cos => a.cos(),
                        Func::Exp => a.exp(),
                        Func::Tanh => a.tanh(),
                        Func::Abs => a.abs(),
                        Func::Min | Func::Max => unreachable!(),
                    };
                }
                _ => {
                    let r = stack[sp - 1];
                    let l = stack[sp - 2];
                    sp -= 1;
                    stack[sp - 1] = match *op {
                        Op::Add => l + r,
                        Op::Sub => l - r,
                        Op::Mul => l * r,
                        Op::Div => {
                            if r == 0.0 {
                                return Err(EvalError::DivisionByZero);
                            }
                            l / r
                        }
                        Op::Pow => pow_checked(l, r)?,
                        Op::Call(Func::Min) => l.min(r),
                        Op::Call(Func::Max) => l.max(r),
                        _ => unreachable!(),
                    };
                }
            }
        }
        let v = stack[0];
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }
}

fn stack_depth(program: &[Op]) -> usize {
    let mut depth = 0usize;
    let mut max = 0usize;
    for op in program {
        match op {
            Op::Const(_) | Op::Var(_) => depth += 1,
            Op::Neg | Op::PowI(_) => {}
            Op::Call(f) if f.arity() == 1 => {}
            _ => depth -= 1,
        }
        max = max.max(depth);
    }
    max
}

impl fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.ast.fmt(f)
    }
}

impl FromStr for FieldExpr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_field_expr(s)
    }
}

/// Parses an expression in the coefficient language.
pub fn parse_field_expr(src: &str) -> Result<FieldExpr, ParseError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0 };
    if p.tokens.len() == 1 {
        return Err(ParseError::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let ast = p.sum()?;
    let tok = p.peek();
    if tok.kind != Tok::End {
        return Err(ParseError::Syntax {
            offset: tok.offset,
            message: format!("unexpected {}", tok.kind.describe()),
        });
    }
    FieldExpr::from_ast(ast)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Op(c) => format!("operator `{c}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Tok,
    offset: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
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
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })?;
            out.push(Token {
                kind: Tok::Num(v),
                offset: start,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token {
                kind: Tok::Ident(src[start..i].to_string()),
                offset: start,
            });
            continue;
        }
        let kind = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        i += 1;
        out.push(Token {
            kind,
            offset: start,
        });
    }
    out.push(Token {
        kind: Tok::End,
        offset: src.len(),
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.kind != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, kind: Tok) -> Result<(), ParseError> {
        let t = self.next();
        if t.kind == kind {
            Ok(())
        } else {
            Err(ParseError::Syntax {
                offset: t.offset,
                message: format!("expected {}, found {}", kind.describe(), t.kind.describe()),
            })
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek().kind {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.product()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().kind {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek().kind == Tok::Op('-') {
            self.next();
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek().kind == Tok::Op('^') {
            self.next();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let t = self.next();
        match t.kind {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.sum()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => self.identifier(name, t.offset),
            other => Err(ParseError::Syntax {
                offset: t.offset,
                message: format!("unexpected {}", other.describe()),
            }),
        }
    }

    fn identifier(&mut self, name: String, offset: usize) -> Result<Expr, ParseError> {
        if name == "pi" {
            return Ok(Expr::Num(std::f64::consts::PI));
        }
        if let Some(rest) = name.strip_prefix('x') {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                let idx: usize = rest.parse().unwrap_or(0);
                if idx >= 1 {
                    return Ok(Expr::Var(idx - 1));
                }
            }
        }
        let Some(func) = Func::lookup(&name) else {
            return Err(ParseError::UnknownIdentifier { name, offset });
        };
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if self.peek().kind != Tok::RParen {
            loop {
                args.push(self.sum()?);
                if self.peek().kind == Tok::Comma {
                    self.next();
                    continue;
                }
                break;
            }
        }
        self.expect(Tok::RParen)?;
        if args.len() != func.arity() {
            return Err(ParseError::Arity {
                name,
                offset,
                expected: func.arity(),
                found: args.len(),
            });
        }
        Ok(Expr::Call(func, args))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: &[f64]) -> Result<f64, EvalError> {
        parse_field_expr(src).unwrap().eval(x)
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("1+2*3", &[]).unwrap(), 7.0);
        assert_eq!(ev("1+2*3", &[4.0, 5.0]).unwrap(), 7.0);
        assert_eq!(ev("-2^2", &[]).unwrap(), -4.0);
        assert_eq!(ev("2^3^2", &[]).unwrap(), 512.0);
        assert_eq!(ev("2^-1", &[]).unwrap(), 0.5);
        assert_eq!(ev("8/4/2", &[]).unwrap(), 1.0);
        assert_eq!(ev("8-4-2", &[]).unwrap(), 2.0);
        assert_eq!(ev("(1+2)*3", &[]).unwrap(), 9.0);
    }

    #[test]
    fn variables_and_functions() {
        assert_eq!(ev("x1^2 + sin(x2)", &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(ev("max(x1, 3) - min(2, x2)", &[1.0, 5.0]).unwrap(), 1.0);
        assert_eq!(ev("abs(-2.5e0)", &[]).unwrap(), 2.5);
        assert!((ev("cos(pi)", &[]).unwrap() + 1.0).abs() < 1e-15);
        assert!((ev("tanh(0) + exp(0)", &[]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eval_errors_are_deferred() {
        let f = parse_field_expr("x1/0").unwrap();
        assert_eq!(f.eval(&[0.3]), Err(EvalError::DivisionByZero));
        assert_eq!(ev("0^(-1)", &[]), Err(EvalError::ZeroToNegativePower));
        assert_eq!(ev("x1^-2", &[0.0]), Err(EvalError::ZeroToNegativePower));
        assert_eq!(ev("exp(1000)", &[]), Err(EvalError::NonFinite));
        assert!(matches!(
            ev("x3", &[1.0, 2.0]),
            Err(EvalError::VariableOutOfRange { .. })
        ));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_field_expr(""),
            Err(ParseError::Syntax { offset: 0, .. })
        ));
        assert!(matches!(
            parse_field_expr("1 + * 2"),
            Err(ParseError::Syntax { offset: 4, .. })
        ));
        assert!(matches!(
            parse_field_expr("foo(1)"),
            Err(ParseError::UnknownIdentifier { offset: 0, .. })
        ));
        assert!(matches!(
            parse_field_expr("x0 + 1"),
            Err(ParseError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            parse_field_expr("min(1)"),
            Err(ParseError::Arity {
                expected: 2,
                found: 1,
                ..
            })
        ));
        assert!(matches!(
            parse_field_expr("sin(1, 2)"),
            Err(ParseError::Arity { .. })
        ));
        assert!(matches!(
            parse_field_expr("(1 + 2"),
            Err(ParseError::Syntax { offset: 6, .. })
        ));
        assert!(matches!(
            parse_field_expr("1 $ 2"),
            Err(ParseError::Syntax { offset: 2, .. })
        ));
    }

    #[test]
    fn constants_are_folded() {
        let f = parse_field_expr("2*3 - 6").unwrap();
        assert!(f.is_zero());
        assert_eq!(f.arity(), 0);
        let g = parse_field_expr("x2 + 1").unwrap();
        assert_eq!(g.arity(), 2);
        assert_eq!(g.as_constant(), None);
    }

    #[test]
    fn printing_round_trips() {
        for src in ["-x1^2 + 3*x2", "2^3^2", "max(x1, -0.5) / (1 + x2)", "x1 - (x2 - 1)"] {
            let a = parse_field_expr(src).unwrap();
            let b = parse_field_expr(&a.to_string()).unwrap();
            assert_eq!(a.ast(), b.ast(), "{src}");
        }
    }

    fn arb_expr() -> impl proptest::strategy::Strategy<Value = String> {
        use proptest::prelude::*;
        let leaf = prop_oneof![
            (0u32..1000).prop_map(|n| format!("{}", n as f64 / 8.0)),
            (1usize..=3).prop_map(|i| format!("x{i}")),
            Just("pi".to_string()),
        ];
        leaf.prop_recursive(4, 32, 2, |inner| {
            prop_oneof![
                (inner.clone(), prop::sample::select(vec!["+", "-", "*", "/"]), inner.clone())
                    .prop_map(|(a, op, b)| format!("({a}) {op} ({b})")),
                inner.clone().prop_map(|a| format!("-{a}")),
                (inner.clone(), 0u32..4).prop_map(|(a, k)| format!("({a})^{k}")),
                (prop::sample::select(vec!["sin", "cos", "tanh", "abs", "exp"]), inner.clone())
                    .prop_map(|(f, a)| format!("{f}({a})")),
                (prop::sample::select(vec!["min", "max"]), inner.clone(), inner).prop_map(|(f, a, b)| format!("{f}({a}, {b})")),
            ]
        })
    }

    proptest::proptest! {
        #[test]
        fn printed_form_parses_to_the_same_tree(src in arb_expr(), x in proptest::collection::vec(-2.0f64..2.0, 3)) {
            let a = parse_field_expr(&src).unwrap();
            let b = parse_field_expr(&a.to_string()).unwrap();
            proptest::prop_assert_eq!(a.ast(), b.ast());
            let (va, vb) = (a.eval(&x), b.eval(&x));
            match (va, vb) {
                (Ok(u), Ok(v)) => proptest::prop_assert!(u.to_bits() == v.to_bits() || (u.is_nan() && v.is_nan())),
                (Err(_), Err(_)) => {}
                (u, v) => proptest::prop_assert!(false, "{:?} vs {:?}", u, v),
            }
        }
    }
}
