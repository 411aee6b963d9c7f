//! Arithmetic expressions over state and noise variables.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?            right-associative
//! primary := number | 'pi' | variable | func '(' expr ')' | '(' expr ')'
//! variable:= x<k> | w<k> | x '(' k ')' | w '(' k ')'      k ≥ 1
//! func    := sin | cos | tan | exp | log | log10 | abs | sqrt
//! ```
//!
//! `log` is the natural logarithm.

use std::fmt;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarKind {
    State,
    Noise,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VarRef {
    pub kind: VarKind,
    /// Zero-based.
    pub index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Log10,
    Abs,
    Sqrt,
}

impl Func {
    const ALL: [Func; 8] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Log10,
        Func::Abs,
        Func::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Log10 => "log10",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
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

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(VarRef),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

const UNARY_PRECEDENCE: u8 = 3;
const ATOM_PRECEDENCE: u8 = 5;

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, _, _) => op.precedence(),
            Expr::Neg(_) => UNARY_PRECEDENCE,
            _ => ATOM_PRECEDENCE,
        }
    }

    /// Largest state and noise indices referenced (one-based counts).
    pub fn arity(&self) -> (usize, usize) {
        match self {
            Expr::Num(_) | Expr::Pi => (0, 0),
            Expr::Var(v) => match v.kind {
                VarKind::State => (v.index + 1, 0),
                VarKind::Noise => (0, v.index + 1),
            },
            Expr::Neg(e) | Expr::Call(_, e) => e.arity(),
            Expr::Binary(_, a, b) => {
                let (a1, a2) = a.arity();
                let (b1, b2) = b.arity();
                (a1.max(b1), a2.max(b2))
            }
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Pi => write!(f, "pi"),
            Expr::Var(v) => match v.kind {
                VarKind::State => write!(f, "x{}", v.index + 1),
                VarKind::Noise => write!(f, "w{}", v.index + 1),
            },
            Expr::Neg(e) => {
                write!(f, "-")?;
                e.fmt_child(f, UNARY_PRECEDENCE)
            }
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                let (left_min, right_min) = if *op == BinOp::Pow {
                    (ATOM_PRECEDENCE, UNARY_PRECEDENCE)
                } else {
                    (p, p + 1)
                };
                a.fmt_child(f, left_min)?;
                if *op == BinOp::Pow {
                    write!(f, "{}", op.symbol())?;
                } else {
                    write!(f, " {} ", op.symbol())?;
                }
                b.fmt_child(f, right_min)
            }
        }
    }
}

/// Syntax error with a one-based position and the tokens that would have
/// been accepted there.
#[derive(Clone, Debug, PartialEq, Error)]
#[error("line {line}, column {column}: {message}{}", expected_suffix(.expected))]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub expected: Vec<String>,
}

fn expected_suffix(expected: &[String]) -> String {
    if expected.is_empty() {
        String::new()
    } else {
        format!(" (expected {})", expected.join(", "))
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Op(c) => write!(f, "'{c}'"),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
            Tok::Comma => write!(f, "','"),
            Tok::End => write!(f, "end of input"),
        }
    }
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let err = |message: String| ParseError {
            line: l0,
            column: c0,
            message,
            expected: Vec::new(),
        };
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
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
            let v: f64 = text
                .parse()
                .map_err(|_| err(format!("malformed number '{text}'")))?;
            Tok::Num(v)
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else {
            i += 1;
            match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                other => return Err(err(format!("unexpected character '{other}'"))),
            }
        };
        col += i - start;
        out.push(Spanned {
            tok,
            line: l0,
            column: c0,
        });
    }
    out.push(Spanned {
        tok: Tok::End,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

const OPERAND: &[&str] = &["number", "variable", "function", "'('", "'-'"];

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, t: &Spanned, message: String, expected: &[&str]) -> ParseError {
        ParseError {
            line: t.line,
            column: t.column,
            message,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        let t = self.peek();
        self.error_at(t, format!("unexpected {}", t.tok), expected)
    }

    fn expect(&mut self, want: Tok, name: &str) -> Result<(), ParseError> {
        if self.peek().tok == want {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&[name]))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().tok {
            Tok::Op('-') => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek().tok == Tok::Op('^') {
            self.bump();
            let exp = self.unary()?;
            Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)))
        } else {
            Ok(base)
        }
    }

    fn index_arg(&mut self) -> Result<usize, ParseError> {
        self.expect(Tok::LParen, "'('")?;
        let t = self.bump();
        let k = match t.tok {
            Tok::Num(v) if v >= 1.0 && v.fract() == 0.0 && v < 1e6 => v as usize,
            _ => return Err(self.error_at(&t, "variable index must be a positive integer".into(), &["index"])),
        };
        self.expect(Tok::RParen, "')'")?;
        Ok(k - 1)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let t = self.peek().clone();
        match &t.tok {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(*v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if name == "pi" {
                    return Ok(Expr::Pi);
                }
                if let Some(func) = Func::from_name(name) {
                    if self.peek().tok != Tok::LParen {
                        return Err(self.unexpected(&["'('"]));
                    }
                    self.bump();
                    let arg = self.expr()?;
                    if self.peek().tok == Tok::Comma {
                        let c = self.peek().clone();
                        return Err(self.error_at(&c, format!("{} takes exactly one argument", func.name()), &["')'"]));
                    }
                    self.expect(Tok::RParen, "')'")?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                let kind = match name.chars().next() {
                    Some('x') => VarKind::State,
                    Some('w') => VarKind::Noise,
                    _ => return Err(self.error_at(&t, format!("unknown identifier '{name}'"), &["variable", "function", "pi"])),
                };
                let rest = &name[1..];
                if rest.is_empty() {
                    let index = self.index_arg()?;
                    return Ok(Expr::Var(VarRef { kind, index }));
                }
                match rest.parse::<usize>() {
                    Ok(k) if k >= 1 && !rest.starts_with('0') => Ok(Expr::Var(VarRef { kind, index: k - 1 })),
                    _ => Err(self.error_at(&t, format!("unknown identifier '{name}'"), &["variable", "function", "pi"])),
                }
            }
            _ => Err(self.unexpected(OPERAND)),
        }
    }
}

pub fn parse_expression(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let e = p.expr()?;
    if p.peek().tok != Tok::End {
        return Err(p.unexpected(&["operator", "end of input"]));
    }
    Ok(e)
}

/// Evaluation failure inside a model expression.
#[derive(Clone, Debug, PartialEq, Error)]
#[error("domain error in {component}: {message} in '{subexpression}'")]
pub struct DomainError {
    pub component: String,
    pub subexpression: String,
    pub message: String,
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Push(f64),
    State(usize),
    Noise(usize),
    Neg,
    Add,
    Sub,
    Mul,
    /// Checked operations carry the index of their source text.
    Div(usize),
    Pow(usize),
    PowI(i32, usize),
    Call(Func, usize),
}

/// Stack bytecode for one expression.
#[derive(Clone, Debug)]
pub struct Compiled {
    ops: Vec<Op>,
    texts: Vec<String>,
    depth: usize,
    expr: Expr,
}

/// Integer exponents up to this magnitude use repeated multiplication.
const MAX_INT_POWER: f64 = 64.0;

impl Compiled {
    pub fn new(expr: Expr) -> Compiled {
        let mut c = Compiled {
            ops: Vec::new(),
            texts: Vec::new(),
            depth: 0,
            expr: expr.clone(),
        };
        let mut depth = 0;
        c.emit(&expr, &mut depth);
        c
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    fn text(&mut self, e: &Expr) -> usize {
        self.texts.push(e.to_string());
        self.texts.len() - 1
    }

    fn push(&mut self, depth: &mut usize) {
        *depth += 1;
        self.depth = self.depth.max(*depth);
    }

    fn emit(&mut self, e: &Expr, depth: &mut usize) {
        match e {
            Expr::Num(v) => {
                self.ops.push(Op::Push(*v));
                self.push(depth);
            }
            Expr::Pi => {
                self.ops.push(Op::Push(std::f64::consts::PI));
                self.push(depth);
            }
            Expr::Var(v) => {
                self.ops.push(match v.kind {
                    VarKind::State => Op::State(v.index),
                    VarKind::Noise => Op::Noise(v.index),
                });
                self.push(depth);
            }
            Expr::Neg(a) => {
                self.emit(a, depth);
                self.ops.push(Op::Neg);
            }
            Expr::Call(f, a) => {
                self.emit(a, depth);
                let t = self.text(e);
                self.ops.push(Op::Call(*f, t));
            }
            Expr::Binary(BinOp::Pow, a, b) => {
                let int_exp = match b.as_ref() {
                    Expr::Num(v) if v.fract() == 0.0 && v.abs() <= MAX_INT_POWER => Some(*v as i32),
                    Expr::Neg(inner) => match inner.as_ref() {
                        Expr::Num(v) if v.fract() == 0.0 && v.abs() <= MAX_INT_POWER => Some(-(*v as i32)),
                        _ => None,
                    },
                    _ => None,
                };
                self.emit(a, depth);
                let t = self.text(e);
                if let Some(k) = int_exp {
                    self.ops.push(Op::PowI(k, t));
                } else {
                    self.emit(b, depth);
                    self.ops.push(Op::Pow(t));
                    *depth -= 1;
                }
            }
            Expr::Binary(op, a, b) => {
                self.emit(a, depth);
                self.emit(b, depth);
                let code = match op {
                    BinOp::Add => Op::Add,
                    BinOp::Sub => Op::Sub,
                    BinOp::Mul => Op::Mul,
                    BinOp::Div => Op::Div(self.text(e)),
                    BinOp::Pow => unreachable!(),
                };
                self.ops.push(code);
                *depth -= 1;
            }
        }
    }

    /// Evaluates at `(x, w)`; `component` labels domain errors. Variables
    /// beyond the given slices must have been rejected at model build time.
    pub fn eval(&self, x: &[f64], w: &[f64], component: &str) -> Result<f64, DomainError> {
        let mut stack = [0.0f64; 64];
        if self.depth > stack.len() {
            let mut heap = vec![0.0; self.depth];
            return self.run(x, w, component, &mut heap);
        }
        self.run(x, w, component, &mut stack)
    }

    fn fail(&self, component: &str, t: usize, message: &str) -> DomainError {
        DomainError {
            component: component.to_string(),
            subexpression: self.texts[t].clone(),
            message: message.to_string(),
        }
    }

    fn run(&self, x: &[f64], w: &[f64], component: &str, stack: &mut [f64]) -> Result<f64, DomainError> {
        let mut sp = 0;
        for op in &self.ops {
            match *op {
                Op::Push(v) => {
                    stack[sp] = v;
                    sp += 1;
                }
                Op::State(i) => {
                    stack[sp] = x[i];
                    sp += 1;
                }
                Op::Noise(i) => {
                    stack[sp] = w[i];
                    sp += 1;
                }
                Op::Neg => stack[sp - 1] = -stack[sp - 1],
                Op::Add | Op::Sub | Op::Mul | Op::Div(_) | Op::Pow(_) => {
                    let b = stack[sp - 1];
                    let a = stack[sp - 2];
                    sp -= 1;
                    stack[sp - 1] = match *op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        Op::Div(t) => {
                            if b == 0.0 {
                                return Err(self.fail(component, t, "division by zero"));
                            }
                            a / b
                        }
                        Op::Pow(t) => {
                            if a < 0.0 && b.fract() != 0.0 {
                                return Err(self.fail(component, t, "negative base with non-integer exponent"));
                            }
                            if a == 0.0 && b < 0.0 {
                                return Err(self.fail(component, t, "zero raised to a negative power"));
                            }
                            let r = a.powf(b);
                            if !r.is_finite() {
                                return Err(self.fail(component, t, "overflow"));
                            }
                            r
                        }
                        _ => unreachable!(),
                    };
                }
                Op::PowI(k, t) => {
                    let a = stack[sp - 1];
                    if a == 0.0 && k < 0 {
                        return Err(self.fail(component, t, "zero raised to a negative power"));
                    }
                    let mut r = 1.0;
                    for _ in 0..k.unsigned_abs() {
                        r *= a;
                    }
                    if k < 0 {
                        r = 1.0 / r;
                    }
                    if !r.is_finite() {
                        return Err(self.fail(component, t, "overflow"));
                    }
                    stack[sp - 1] = r;
                }
                Op::Call(f, t) => {
                    let a = stack[sp - 1];
                    let r = match f {
                        Func::Sin => a.sin(),
                        Func::Cos => a.cos(),
                        Func::Tan => a.tan(),
                        Func::Exp => a.exp(),
                        Func::Abs => a.abs(),
                        Func::Log | Func::Log10 => {
                            if a <= 0.0 {
                                return Err(self.fail(component, t, "logarithm of a non-positive number"));
                            }
                            if f == Func::Log {
                                a.ln()
                            } else {
                                a.log10()
                            }
                        }
                        Func::Sqrt => {
                            if a < 0.0 {
                                return Err(self.fail(component, t, "square root of a negative number"));
                            }
                            a.sqrt()
                        }
                    };
                    if !r.is_finite() {
                        return Err(self.fail(component, t, "non-finite result"));
                    }
                    stack[sp - 1] = r;
                }
            }
        }
        let r = stack[0];
        if r.is_finite() {
            Ok(r)
        } else {
            Err(DomainError {
                component: component.to_string(),
                subexpression: self.expr.to_string(),
                message: "non-finite result".into(),
            })
        }
    }
}
