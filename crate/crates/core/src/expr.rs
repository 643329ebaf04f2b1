//! Profile expressions: a small real-valued language in one variable `x`.
//!
//! Profiles are given as derivatives (`f'`, `g'`) so that no assembled form
//! ever needs an antiderivative. The grammar is deliberately restricted to
//! smooth primitives, which guarantees that a symbolic second derivative
//! always exists.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' ['-'] INTEGER)?
//! atom    := NUMBER | 'x' | 'pi' | FUNC '(' expr ')' | '(' expr ')'
//! FUNC    := sin | cos | tan | exp | ln | tanh | sech | sqrt | atan
//! ```
//!
//! A `-` immediately followed by a numeric literal is folded into a negative
//! literal, so `print` wraps negative literals as `(-c)`.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at byte {pos}")]
    UnknownIdentifier { pos: usize, name: String },
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Tanh,
    Sech,
    Sqrt,
    Atan,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Ln,
        Func::Tanh,
        Func::Sech,
        Func::Sqrt,
        Func::Atan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Tanh => "tanh",
            Func::Sech => "sech",
            Func::Sqrt => "sqrt",
            Func::Atan => "atan",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }

    fn apply(self, u: f64) -> Result<f64, ExprError> {
        let v = match self {
            Func::Sin => u.sin(),
            Func::Cos => u.cos(),
            Func::Tan => {
                if u.cos() == 0.0 {
                    return Err(ExprError::Domain(format!("tan pole at {u}")));
                }
                u.tan()
            }
            Func::Exp => u.exp(),
            Func::Ln => {
                if u <= 0.0 {
                    return Err(ExprError::Domain(format!("ln of nonpositive value {u}")));
                }
                u.ln()
            }
            Func::Tanh => u.tanh(),
            Func::Sech => 1.0 / u.cosh(),
            Func::Sqrt => {
                if u < 0.0 {
                    return Err(ExprError::Domain(format!("sqrt of negative value {u}")));
                }
                u.sqrt()
            }
            Func::Atan => u.atan(),
        };
        Ok(v)
    }
}

/// Abstract syntax tree of a profile expression.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

pub fn parse(src: &str) -> Result<Expr, ExprError> {
    let mut p = Parser { src: src.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> ExprError {
        ExprError::Syntax { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ExprError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.term()?;
                lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.unary()?;
                lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'/') {
                let rhs = self.unary()?;
                lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            if matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == b'.') {
                let v = self.number()?;
                // `-2^2` is `-(2^2)`, not `(-2)^2`
                if self.peek() == Some(b'^') {
                    let p = self.power_suffix(Expr::Num(v))?;
                    return Ok(Expr::Neg(Box::new(p)));
                }
                return Ok(Expr::Num(-v));
            }
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        self.power_suffix(base)
    }

    fn power_suffix(&mut self, base: Expr) -> Result<Expr, ExprError> {
        if !self.eat(b'^') {
            return Ok(base);
        }
        let paren = self.eat(b'(');
        let neg = self.eat(b'-');
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("exponent must be an integer literal"));
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        let mag: i32 = text.parse().map_err(|_| self.err("exponent out of range"))?;
        if paren {
            self.expect(b')')?;
        }
        let n = if neg { -mag } else { mag };
        Ok(Expr::Pow(Box::new(base), n))
    }

    fn number(&mut self) -> Result<f64, ExprError> {
        self.skip_ws();
        let start = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            let digits = self.pos;
            while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if digits == self.pos {
                // `2exp(x)` style juxtaposition is not allowed, but a bare `e`
                // suffix without digits is not an exponent either.
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap();
        text.parse::<f64>().map_err(|_| ExprError::Syntax {
            pos: start,
            msg: format!("malformed number `{text}`"),
        })
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(Expr::Num(self.number()?)),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                match name {
                    "x" => Ok(Expr::X),
                    "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                    _ => match Func::from_name(name) {
                        Some(f) => {
                            self.expect(b'(')?;
                            let arg = self.expr()?;
                            self.expect(b')')?;
                            Ok(Expr::Call(f, Box::new(arg)))
                        }
                        None => Err(ExprError::UnknownIdentifier {
                            pos: start,
                            name: name.to_string(),
                        }),
                    },
                }
            }
            Some(c) => Err(self.err(&format!("unexpected character `{}`", c as char))),
        }
    }
}

// Printing precedence levels: higher binds tighter.
const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POW: u8 = 4;

impl Expr {
    fn prec(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => PREC_ADD,
            Expr::Mul(..) | Expr::Div(..) => PREC_MUL,
            Expr::Neg(_) => PREC_UNARY,
            Expr::Pow(..) => PREC_POW,
            _ => PREC_POW + 1,
        }
    }

    fn write_prec(&self, out: &mut String, min: u8) {
        let wrap = self.prec() < min;
        if wrap {
            out.push('(');
        }
        match self {
            Expr::Num(v) => {
                if v.is_sign_negative() {
                    out.push_str(&format!("(-{:?})", -v));
                } else {
                    out.push_str(&format!("{v:?}"));
                }
            }
            Expr::X => out.push('x'),
            Expr::Neg(e) => {
                out.push('-');
                if matches!(**e, Expr::Num(_)) {
                    out.push('(');
                    e.write_prec(out, 0);
                    out.push(')');
                } else {
                    e.write_prec(out, PREC_UNARY);
                }
            }
            Expr::Add(a, b) => {
                a.write_prec(out, PREC_ADD);
                out.push_str(" + ");
                b.write_prec(out, PREC_MUL);
            }
            Expr::Sub(a, b) => {
                a.write_prec(out, PREC_ADD);
                out.push_str(" - ");
                b.write_prec(out, PREC_MUL);
            }
            Expr::Mul(a, b) => {
                a.write_prec(out, PREC_MUL);
                out.push('*');
                b.write_prec(out, PREC_UNARY);
            }
            Expr::Div(a, b) => {
                a.write_prec(out, PREC_MUL);
                out.push('/');
                b.write_prec(out, PREC_UNARY);
            }
            Expr::Pow(a, n) => {
                a.write_prec(out, PREC_POW + 1);
                if *n < 0 {
                    out.push_str(&format!("^({n})"));
                } else {
                    out.push_str(&format!("^{n}"));
                }
            }
            Expr::Call(f, a) => {
                out.push_str(f.name());
                out.push('(');
                a.write_prec(out, 0);
                out.push(')');
            }
        }
        if wrap {
            out.push(')');
        }
    }

    /// Canonical text form; `parse(&e.print()) == Ok(e)` for every AST the
    /// parser can produce.
    pub fn print(&self) -> String {
        let mut s = String::new();
        self.write_prec(&mut s, 0);
        s
    }

    pub fn eval(&self, x: f64) -> Result<f64, ExprError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::X => x,
            Expr::Neg(e) => -e.eval(x)?,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let d = b.eval(x)?;
                if d == 0.0 {
                    return Err(ExprError::Domain(format!("division by zero at x = {x}")));
                }
                a.eval(x)? / d
            }
            Expr::Pow(a, n) => {
                let base = a.eval(x)?;
                if base == 0.0 && *n < 0 {
                    return Err(ExprError::Domain(format!("zero raised to {n} at x = {x}")));
                }
                base.powi(*n)
            }
            Expr::Call(f, a) => f.apply(a.eval(x)?)?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::Domain(format!("non-finite value at x = {x}")))
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::X => false,
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Call(_, e) => e.is_constant(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }

    /// Exact symbolic derivative with respect to `x`, constant-folded.
    pub fn differentiate(&self) -> Expr {
        match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::X => Expr::Num(1.0),
            Expr::Neg(e) => neg(e.differentiate()),
            Expr::Add(a, b) => add(a.differentiate(), b.differentiate()),
            Expr::Sub(a, b) => sub(a.differentiate(), b.differentiate()),
            Expr::Mul(a, b) => add(
                mul(a.differentiate(), (**b).clone()),
                mul((**a).clone(), b.differentiate()),
            ),
            Expr::Div(a, b) => {
                let num = sub(
                    mul(a.differentiate(), (**b).clone()),
                    mul((**a).clone(), b.differentiate()),
                );
                div(num, pow((**b).clone(), 2))
            }
            Expr::Pow(a, n) => {
                let n = *n;
                mul(mul(Expr::Num(n as f64), pow((**a).clone(), n - 1)), a.differentiate())
            }
            Expr::Call(f, a) => {
                let u = (**a).clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, u),
                    Func::Cos => neg(call(Func::Sin, u)),
                    Func::Tan => add(Expr::Num(1.0), pow(call(Func::Tan, u), 2)),
                    Func::Exp => call(Func::Exp, u),
                    Func::Ln => div(Expr::Num(1.0), u),
                    Func::Tanh => pow(call(Func::Sech, u), 2),
                    Func::Sech => neg(mul(call(Func::Sech, u.clone()), call(Func::Tanh, u))),
                    Func::Sqrt => div(Expr::Num(1.0), mul(Expr::Num(2.0), call(Func::Sqrt, u))),
                    Func::Atan => div(Expr::Num(1.0), add(Expr::Num(1.0), pow(u, 2))),
                };
                mul(outer, a.differentiate())
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.print())
    }
}

impl std::str::FromStr for Expr {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

fn num_of(e: &Expr) -> Option<f64> {
    match e {
        Expr::Num(v) => Some(*v),
        _ => None,
    }
}

fn neg(e: Expr) -> Expr {
    match e {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        e => Expr::Neg(Box::new(e)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (num_of(&a), num_of(&b)) {
        (Some(x), Some(y)) => Expr::Num(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (num_of(&a), num_of(&b)) {
        (Some(x), Some(y)) => Expr::Num(x - y),
        (Some(0.0), _) => neg(b),
        (_, Some(0.0)) => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (num_of(&a), num_of(&b)) {
        (Some(x), Some(y)) => Expr::Num(x * y),
        (Some(0.0), _) | (_, Some(0.0)) => Expr::Num(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        (Some(-1.0), _) => neg(b),
        (_, Some(-1.0)) => neg(a),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (num_of(&a), num_of(&b)) {
        (Some(x), Some(y)) if y != 0.0 => Expr::Num(x / y),
        (Some(0.0), _) => Expr::Num(0.0),
        (_, Some(1.0)) => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, n: i32) -> Expr {
    match (n, num_of(&a)) {
        (0, _) => Expr::Num(1.0),
        (1, _) => a,
        (_, Some(x)) if x != 0.0 || n > 0 => Expr::Num(x.powi(n)),
        _ => Expr::Pow(Box::new(a), n),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}

/// Outcome of probing an expression's far-field behaviour against a declared limit.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TailReport {
    pub beta: f64,
    pub tol: f64,
    /// `(x, value, |value - beta|)` at ±X, ±2X, ±4X.
    pub samples: Vec<(f64, f64, f64)>,
    pub pass: bool,
    pub reason: Option<String>,
}

/// Checks that `e(x)` approaches `beta` at both ends: every sample at ±X, ±2X,
/// ±4X lies within `tol` of `beta` and the deviation does not grow with `|x|`.
pub fn tail_limit_check(e: &Expr, beta: f64, x_far: f64, tol: f64) -> Result<TailReport, ExprError> {
    assert!(x_far > 0.0 && tol > 0.0, "tail check needs X > 0 and tol > 0");
    let slack = 4.0 * f64::EPSILON * beta.abs().max(1.0);
    let mut samples = Vec::with_capacity(6);
    let mut reason = None;
    for side in [-1.0, 1.0] {
        let mut prev: Option<f64> = None;
        for mult in [1.0, 2.0, 4.0] {
            let x = side * mult * x_far;
            let v = e.eval(x)?;
            let dev = (v - beta).abs();
            samples.push((x, v, dev));
            if reason.is_none() && dev > tol {
                reason = Some(format!("|e({x}) - {beta}| = {dev:.3e} exceeds tol {tol:.1e}"));
            }
            if let Some(p) = prev {
                if reason.is_none() && dev > p + slack {
                    reason = Some(format!("deviation grows towards x = {x}"));
                }
            }
            prev = Some(dev);
        }
    }
    Ok(TailReport { beta, tol, samples, pass: reason.is_none(), reason })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, x: f64) -> f64 {
        parse(src).unwrap().eval(x).unwrap()
    }

    fn dev(src: &str, x: f64) -> f64 {
        parse(src).unwrap().differentiate().eval(x).unwrap()
    }

    #[test]
    fn parses_variable() {
        assert_eq!(parse("x").unwrap(), Expr::X);
    }

    #[test]
    fn gaussian_dip_profile() {
        let e = parse("1 - 0.8*exp(-x^2)").unwrap();
        fn interior(e: &Expr) -> usize {
            match e {
                Expr::Num(_) | Expr::X => 0,
                Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => 1 + interior(a),
                Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                    1 + interior(a) + interior(b)
                }
            }
        }
        assert_eq!(interior(&e), 5);
        assert!((e.eval(0.0).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn sech_squared_at_origin() {
        assert_eq!(ev("sech(x)^2", 0.0), 1.0);
    }

    #[test]
    fn eval_examples() {
        assert!((ev("exp(-x^2)", 1.0) - 0.36787944).abs() < 1e-8);
        assert_eq!(ev("x/ (1+x^2)", 0.0), 0.0);
        assert!((ev("tanh(x)", 50.0) - 1.0).abs() < 1e-12);
        assert!((ev("pi", 0.0) - std::f64::consts::PI).abs() < 1e-15);
        assert!((ev("2.5e-1*x", 4.0) - 1.0).abs() < 1e-15);
        assert!((ev("x^-2", 2.0) - 0.25).abs() < 1e-15);
        assert!((ev("-x^2", 3.0) + 9.0).abs() < 1e-15);
        assert!((ev("2*-3", 0.0) + 6.0).abs() < 1e-15);
        assert!((ev("-2^2", 0.0) + 4.0).abs() < 1e-15);
        assert!((ev("(-2)^2", 0.0) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        let e = parse("ln(x)").unwrap();
        assert!(matches!(e.eval(0.0), Err(ExprError::Domain(_))));
        assert!(matches!(parse("sqrt(x)").unwrap().eval(-1.0), Err(ExprError::Domain(_))));
        assert!(matches!(parse("1/x").unwrap().eval(0.0), Err(ExprError::Domain(_))));
        assert!(matches!(parse("x^(-1)").unwrap().eval(0.0), Err(ExprError::Domain(_))));
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse("1 + * x") {
            Err(ExprError::Syntax { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("x^1.5"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("(x"), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("x x"), Err(ExprError::Syntax { .. })));
        match parse("abs(x)") {
            Err(ExprError::UnknownIdentifier { name, pos }) => {
                assert_eq!(name, "abs");
                assert_eq!(pos, 0);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("y + 1"), Err(ExprError::UnknownIdentifier { .. })));
    }

    #[test]
    fn derivative_examples() {
        assert!((dev("x^2", 3.0) - 6.0).abs() < 1e-14);
        let want = 1.6 * (-1.0f64).exp();
        assert!((dev("1 - 0.8*exp(-x^2)", 1.0) - want).abs() < 1e-14);
        assert!((want - 0.588_607_106).abs() < 1e-9);
        assert!((dev("tanh(x)", 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn derivative_of_every_primitive_matches_finite_difference() {
        let h = 1e-5;
        for src in [
            "sin(x)", "cos(x)", "tan(x)", "exp(x)", "ln(x)", "tanh(x)", "sech(x)", "sqrt(x)",
            "atan(x)", "x^(-3)", "1/(1+x)",
        ] {
            let e = parse(src).unwrap();
            let d = e.differentiate();
            for x in [0.3, 0.7, 1.1] {
                let fd = (e.eval(x + h).unwrap() - e.eval(x - h).unwrap()) / (2.0 * h);
                let exact = d.eval(x).unwrap();
                assert!((fd - exact).abs() < 1e-8 * (1.0 + exact.abs()), "{src} at {x}");
            }
        }
    }

    #[test]
    fn constant_folding() {
        assert_eq!(parse("3").unwrap().differentiate(), Expr::Num(0.0));
        assert_eq!(parse("2*x").unwrap().differentiate(), Expr::Num(2.0));
        assert!(parse("0.5 + 2").unwrap().is_constant());
        assert!(!parse("sin(x)").unwrap().is_constant());
    }

    #[test]
    fn print_parse_identity_on_examples() {
        for src in [
            "1 - 0.8*exp(-x^2)",
            "-(x - 2)^3/(1 + -2)",
            "sech(x)^2 - -x",
            "x^(-2)*(-1.5)",
            "-(3)",
            "-2^2",
            "(-3)^2",
            "-x^2",
            "1e-7*atan(x/2)",
        ] {
            let e = parse(src).unwrap();
            assert_eq!(parse(&e.print()).unwrap(), e, "{src} -> {}", e.print());
        }
    }

    #[test]
    fn tail_checks() {
        let e = parse("1 - 0.8*exp(-x^2)").unwrap();
        assert!(tail_limit_check(&e, 1.0, 5.0, 1e-6).unwrap().pass);
        let r = tail_limit_check(&parse("x").unwrap(), 0.0, 5.0, 1e-6).unwrap();
        assert!(!r.pass);
        assert!(tail_limit_check(&parse("0").unwrap(), 0.0, 5.0, 1e-6).unwrap().pass);
        // within tolerance but moving away from the limit
        let r = tail_limit_check(&parse("1e-9*x^2").unwrap(), 0.0, 5.0, 1e-6).unwrap();
        assert!(!r.pass);
        assert!(tail_limit_check(&parse("ln(x)").unwrap(), 0.0, 5.0, 1e-6).is_err());
    }
}
