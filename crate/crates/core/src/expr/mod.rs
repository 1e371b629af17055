//! Expression trees for regression models.
//!
//! An [`Expr`] is an immutable tree over input variables `x_k`, model
//! parameters `θ_i`, finite constants and a fixed set of elementary
//! functions. Trees are parsed from infix text ([`parse`]), evaluated
//! ([`Expr::eval`]), printed back in the same grammar and differentiated
//! symbolically with respect to a parameter ([`Expr::differentiate`]).

mod diff;
mod parse;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::parse;

/// Errors produced while parsing, evaluating or differentiating expressions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("unknown identifier `{name}` at column {column}")]
    UnknownIdentifier { name: String, column: usize },
    #[error("unknown function `{name}` at column {column}")]
    UnknownFunction { name: String, column: usize },
    #[error("{kind} index {index} out of bounds (length {len})")]
    IndexOutOfBounds { kind: &'static str, index: usize, len: usize },
    #[error("`{op}` is not differentiable with respect to theta[{param}]")]
    NotDifferentiable { op: &'static str, param: usize },
}

/// Unary operators and elementary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnaryOp {
    Neg,
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Abs,
    Cube,
}

impl UnaryOp {
    /// Function registry: every callable name accepted by the parser.
    pub const FUNCTIONS: [UnaryOp; 7] = [
        UnaryOp::Exp,
        UnaryOp::Log,
        UnaryOp::Sqrt,
        UnaryOp::Sin,
        UnaryOp::Cos,
        UnaryOp::Abs,
        UnaryOp::Cube,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Abs => "abs",
            UnaryOp::Cube => "cube",
        }
    }

    pub fn from_name(name: &str) -> Option<UnaryOp> {
        Self::FUNCTIONS.iter().copied().find(|f| f.name() == name)
    }

    #[inline]
    pub fn apply(self, a: f64) -> f64 {
        match self {
            UnaryOp::Neg => -a,
            UnaryOp::Exp => a.exp(),
            UnaryOp::Log => a.ln(),
            UnaryOp::Sqrt => a.sqrt(),
            UnaryOp::Sin => a.sin(),
            UnaryOp::Cos => a.cos(),
            UnaryOp::Abs => a.abs(),
            UnaryOp::Cube => a * a * a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }

    #[inline]
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => a / b,
            BinaryOp::Pow => pow_f64(a, b),
        }
    }
}

/// `a^b` with integer exponents evaluated exactly (negative bases allowed).
#[inline]
fn pow_f64(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

/// A model expression.
///
/// Constants are always finite. Domain violations during evaluation
/// (`log` of a negative number, division by zero, ...) produce non-finite
/// results instead of errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Const(f64),
    /// Input column `x_k`.
    Var(usize),
    /// Parameter `θ_i`.
    Param(usize),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn num(value: f64) -> Expr {
        debug_assert!(value.is_finite(), "non-finite constant {value}");
        Expr::Const(value)
    }

    pub fn is_const(&self, value: f64) -> bool {
        matches!(self, Expr::Const(c) if *c == value)
    }

    /// True for integer-valued constant exponents, which are differentiated
    /// exactly and never turned into parameters.
    pub fn is_integer_const(&self) -> bool {
        matches!(self, Expr::Const(c) if c.fract() == 0.0)
    }

    /// Evaluate without bounds checking; panics if an index is out of range.
    /// Use [`Expr::evaluate`] for a checked variant.
    pub fn eval(&self, theta: &[f64], x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(k) => x[*k],
            Expr::Param(i) => theta[*i],
            Expr::Unary(op, a) => op.apply(a.eval(theta, x)),
            Expr::Binary(op, a, b) => op.apply(a.eval(theta, x), b.eval(theta, x)),
        }
    }

    pub fn evaluate(&self, theta: &[f64], x: &[f64]) -> Result<f64, ExprError> {
        self.check_bounds(theta.len(), x.len())?;
        Ok(self.eval(theta, x))
    }

    pub fn check_bounds(&self, n_params: usize, n_vars: usize) -> Result<(), ExprError> {
        if let Some(i) = self.max_param().filter(|&i| i >= n_params) {
            return Err(ExprError::IndexOutOfBounds { kind: "parameter", index: i, len: n_params });
        }
        if let Some(k) = self.max_var().filter(|&k| k >= n_vars) {
            return Err(ExprError::IndexOutOfBounds { kind: "variable", index: k, len: n_vars });
        }
        Ok(())
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Unary(_, a) => a.visit(f),
            Expr::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    pub fn max_param(&self) -> Option<usize> {
        let mut max = None;
        self.visit(&mut |e| {
            if let Expr::Param(i) = e {
                max = max.max(Some(*i));
            }
        });
        max
    }

    pub fn max_var(&self) -> Option<usize> {
        let mut max = None;
        self.visit(&mut |e| {
            if let Expr::Var(k) = e {
                max = max.max(Some(*k));
            }
        });
        max
    }

    pub fn param_occurrences(&self, i: usize) -> usize {
        let mut count = 0;
        self.visit(&mut |e| {
            if matches!(e, Expr::Param(j) if *j == i) {
                count += 1;
            }
        });
        count
    }

    pub fn contains_param(&self, i: usize) -> bool {
        self.param_occurrences(i) > 0
    }

    pub fn has_params(&self) -> bool {
        self.max_param().is_some()
    }

    /// Replace every `Param(i)` by `f(i)`.
    pub fn map_params(&self, f: &impl Fn(usize) -> Expr) -> Expr {
        match self {
            Expr::Param(i) => f(*i),
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(a.map_params(f))),
            Expr::Binary(op, a, b) => {
                Expr::Binary(*op, Box::new(a.map_params(f)), Box::new(b.map_params(f)))
            }
            other => other.clone(),
        }
    }

    /// Replace every `Var(k)` by the constant `x[k]`.
    pub fn substitute_vars(&self, x: &[f64]) -> Expr {
        match self {
            Expr::Var(k) => Expr::num(x[*k]),
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(a.substitute_vars(x))),
            Expr::Binary(op, a, b) => {
                Expr::Binary(*op, Box::new(a.substitute_vars(x)), Box::new(b.substitute_vars(x)))
            }
            other => other.clone(),
        }
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    /// Printer using the given variable names (falls back to `x{k}`).
    pub fn display<'a>(&'a self, var_names: &'a [String]) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, var_names }
    }
}

// Folding constructors. Only identity and annihilator rules are applied.

pub fn add(a: Expr, b: Expr) -> Expr {
    if a.is_const(0.0) {
        b
    } else if b.is_const(0.0) {
        a
    } else {
        Expr::Binary(BinaryOp::Add, Box::new(a), Box::new(b))
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    if b.is_const(0.0) {
        a
    } else if a.is_const(0.0) {
        neg(b)
    } else {
        Expr::Binary(BinaryOp::Sub, Box::new(a), Box::new(b))
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    if a.is_const(0.0) || b.is_const(0.0) {
        Expr::num(0.0)
    } else if a.is_const(1.0) {
        b
    } else if b.is_const(1.0) {
        a
    } else {
        Expr::Binary(BinaryOp::Mul, Box::new(a), Box::new(b))
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    if a.is_const(0.0) {
        Expr::num(0.0)
    } else if b.is_const(1.0) {
        a
    } else {
        Expr::Binary(BinaryOp::Div, Box::new(a), Box::new(b))
    }
}

pub fn pow(a: Expr, b: Expr) -> Expr {
    if b.is_const(1.0) {
        a
    } else if b.is_const(0.0) {
        Expr::num(1.0)
    } else {
        Expr::Binary(BinaryOp::Pow, Box::new(a), Box::new(b))
    }
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::num(-c),
        Expr::Unary(UnaryOp::Neg, inner) => *inner,
        other => Expr::Unary(UnaryOp::Neg, Box::new(other)),
    }
}

pub fn unary(op: UnaryOp, a: Expr) -> Expr {
    if op == UnaryOp::Neg {
        neg(a)
    } else {
        Expr::Unary(op, Box::new(a))
    }
}

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Const(c) if c.is_sign_negative() => PREC_NEG,
        Expr::Const(_) | Expr::Var(_) | Expr::Param(_) => PREC_ATOM,
        Expr::Unary(UnaryOp::Neg, _) => PREC_NEG,
        Expr::Unary(_, _) => PREC_ATOM,
        Expr::Binary(BinaryOp::Add | BinaryOp::Sub, _, _) => PREC_ADD,
        Expr::Binary(BinaryOp::Mul | BinaryOp::Div, _, _) => PREC_MUL,
        Expr::Binary(BinaryOp::Pow, _, _) => PREC_POW,
    }
}

/// Shortest round-trip decimal, switching to exponent form for very large
/// or very small magnitudes.
fn write_number(c: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let a = c.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        write!(f, "{c:e}")
    } else {
        write!(f, "{c}")
    }
}

/// Canonical printer; output re-parses to the same tree.
pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    var_names: &'a [String],
}

impl ExprDisplay<'_> {
    fn write(&self, e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match e {
            Expr::Const(c) => write_number(*c, f),
            Expr::Var(k) => match self.var_names.get(*k) {
                Some(name) => f.write_str(name),
                None => write!(f, "x{k}"),
            },
            Expr::Param(i) => write!(f, "theta[{i}]"),
            Expr::Unary(UnaryOp::Neg, a) => {
                f.write_str("-")?;
                // `-(3)` keeps a negated literal distinct from the literal `-3`
                self.write_child(a, precedence(a) < PREC_NEG || matches!(**a, Expr::Const(_)), f)
            }
            Expr::Unary(op, a) => {
                write!(f, "{}(", op.name())?;
                self.write(a, f)?;
                f.write_str(")")
            }
            Expr::Binary(op, a, b) => {
                let prec = precedence(e);
                let (left_paren, right_paren) = if *op == BinaryOp::Pow {
                    (precedence(a) <= prec, precedence(b) < prec)
                } else {
                    (precedence(a) < prec, precedence(b) <= prec)
                };
                self.write_child(a, left_paren, f)?;
                if *op == BinaryOp::Pow {
                    f.write_str("^")?;
                } else {
                    write!(f, " {} ", op.symbol())?;
                }
                self.write_child(b, right_paren, f)
            }
        }
    }

    fn write_child(&self, e: &Expr, paren: bool, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if paren {
            f.write_str("(")?;
            self.write(e, f)?;
            f.write_str(")")
        } else {
            self.write(e, f)
        }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.expr, f)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.display(&[]).fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn evaluates_exponential_at_origin() {
        let e = parse("theta[0]*exp(theta[1]*x0)", &names(&["x0"])).unwrap();
        assert_eq!(e.evaluate(&[2.0, 0.5], &[0.0]).unwrap(), 2.0);
    }

    #[test]
    fn evaluates_pcb_model_at_age_zero() {
        let e = parse("-3.93*exp(-0.19*age) + 3.13", &names(&["age"])).unwrap();
        let v = e.evaluate(&[], &[0.0]).unwrap();
        assert!((v - (-0.80)).abs() < 1e-12);
    }

    #[test]
    fn evaluates_kotanchek_peak() {
        let e = parse("exp(-(x - 1)^2) / (1.2 + (y - 2.5)^2)", &names(&["x", "y"])).unwrap();
        let v = e.evaluate(&[], &[1.0, 2.5]).unwrap();
        assert!((v - 1.0 / 1.2).abs() < 1e-15);
    }

    #[test]
    fn domain_violations_are_non_finite() {
        let vars = names(&["x"]);
        for src in ["log(x)", "1/x", "x^-1", "sqrt(x - 1)"] {
            let e = parse(src, &vars).unwrap();
            assert!(!e.evaluate(&[], &[0.0]).unwrap().is_finite(), "{src}");
        }
    }

    #[test]
    fn out_of_bounds_is_an_error() {
        let e = parse("theta[2] * x1", &names(&["x0", "x1"])).unwrap();
        assert!(matches!(
            e.evaluate(&[1.0], &[0.0, 1.0]),
            Err(ExprError::IndexOutOfBounds { kind: "parameter", index: 2, .. })
        ));
        assert!(matches!(
            e.evaluate(&[1.0, 1.0, 1.0], &[0.0]),
            Err(ExprError::IndexOutOfBounds { kind: "variable", index: 1, .. })
        ));
    }

    #[test]
    fn integer_powers_of_negative_bases() {
        let e = parse("x^3", &names(&["x"])).unwrap();
        assert_eq!(e.eval(&[], &[-2.0]), -8.0);
    }

    #[test]
    fn printer_uses_minimal_parentheses() {
        let vars = names(&["x", "y"]);
        let cases = [
            ("(x + y) * 2", "(x + y) * 2"),
            ("x - (y - 1)", "x - (y - 1)"),
            ("-x^2", "-x^2"),
            ("(-x)^2", "(-x)^2"),
            ("x^y^2", "x^y^2"),
            ("(x^y)^2", "(x^y)^2"),
            ("x * -3", "x * -3"),
            ("exp(-0.19*x)", "exp(-0.19 * x)"),
            ("1e-7 + 2.5e20*x", "1e-7 + 2.5e20 * x"),
        ];
        for (src, want) in cases {
            let e = parse(src, &vars).unwrap();
            assert_eq!(e.display(&vars).to_string(), want, "{src}");
        }
    }
}
