//! Symbolic differentiation with respect to a single parameter.

use super::{add, div, mul, neg, pow, sub, unary, BinaryOp, Expr, ExprError, UnaryOp};

impl Expr {
    /// Exact partial derivative `∂self/∂θ_param`.
    ///
    /// Subtrees that do not mention `θ_param` differentiate to `0` without
    /// being inspected, so `abs` is only rejected on paths that actually
    /// contain the parameter.
    pub fn differentiate(&self, param: usize) -> Result<Expr, ExprError> {
        if !self.contains_param(param) {
            return Ok(Expr::num(0.0));
        }
        Ok(match self {
            Expr::Const(_) | Expr::Var(_) => Expr::num(0.0),
            Expr::Param(i) => Expr::num(if *i == param { 1.0 } else { 0.0 }),
            Expr::Unary(op, a) => {
                let da = a.differentiate(param)?;
                let a = (**a).clone();
                match op {
                    UnaryOp::Neg => neg(da),
                    UnaryOp::Exp => mul(unary(UnaryOp::Exp, a), da),
                    UnaryOp::Log => div(da, a),
                    UnaryOp::Sqrt => div(da, mul(Expr::num(2.0), unary(UnaryOp::Sqrt, a))),
                    UnaryOp::Sin => mul(unary(UnaryOp::Cos, a), da),
                    UnaryOp::Cos => neg(mul(unary(UnaryOp::Sin, a), da)),
                    UnaryOp::Cube => mul(mul(Expr::num(3.0), pow(a, Expr::num(2.0))), da),
                    UnaryOp::Abs => return Err(ExprError::NotDifferentiable { op: "abs", param }),
                }
            }
            Expr::Binary(op, a, b) => {
                let da = a.differentiate(param)?;
                let db = b.differentiate(param)?;
                let (a, b) = ((**a).clone(), (**b).clone());
                match op {
                    BinaryOp::Add => add(da, db),
                    BinaryOp::Sub => sub(da, db),
                    BinaryOp::Mul => add(mul(da, b), mul(a, db)),
                    BinaryOp::Div => {
                        if db.is_const(0.0) {
                            div(da, b)
                        } else {
                            // (a'b - ab') / b^2
                            let num = sub(mul(da, b.clone()), mul(a, db));
                            div(num, pow(b, Expr::num(2.0)))
                        }
                    }
                    BinaryOp::Pow => diff_pow(a, b, da, db),
                }
            }
        })
    }
}

fn diff_pow(a: Expr, b: Expr, da: Expr, db: Expr) -> Expr {
    if db.is_const(0.0) {
        // b · a^(b-1) · a'
        let lowered = match b {
            Expr::Const(c) => Expr::num(c - 1.0),
            ref other => sub(other.clone(), Expr::num(1.0)),
        };
        mul(mul(b, pow(a, lowered)), da)
    } else if da.is_const(0.0) {
        // a^b · log(a) · b'
        mul(mul(pow(a.clone(), b), unary(UnaryOp::Log, a)), db)
    } else {
        // a^b · (b' log(a) + b a'/a)
        let inner = add(
            mul(db, unary(UnaryOp::Log, a.clone())),
            div(mul(b.clone(), da), a.clone()),
        );
        mul(pow(a, b), inner)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn central_difference(e: &Expr, theta: &[f64], x: &[f64], i: usize) -> f64 {
        let h = 1e-6 * theta[i].abs().max(1.0);
        let mut up = theta.to_vec();
        let mut down = theta.to_vec();
        up[i] += h;
        down[i] -= h;
        (e.eval(&up, x) - e.eval(&down, x)) / (2.0 * h)
    }

    #[test]
    fn exponential_rate_derivative() {
        let vars = ["x"];
        let e = parse("theta[0]*exp(theta[1]*x)", &vars).unwrap();
        let d = e.differentiate(1).unwrap();
        let want = parse("theta[0]*(exp(theta[1]*x)*x)", &vars).unwrap();
        for (t0, t1, x) in [(2.0, 0.5, 1.3), (-1.0, 0.1, 0.2)] {
            let (got, exp) = (d.eval(&[t0, t1], &[x]), want.eval(&[t0, t1], &[x]));
            assert!((got - exp).abs() < 1e-14 * exp.abs().max(1.0));
        }
    }

    #[test]
    fn additive_offset_derivative_is_one() {
        let e = parse("theta[0] + theta[1]/(theta[2]*x + theta[3])", &["x"]).unwrap();
        assert_eq!(e.differentiate(0).unwrap(), Expr::Const(1.0));
    }

    #[test]
    fn parameter_free_expression_differentiates_to_zero() {
        let e = parse("exp(x)*abs(x) + 3", &["x"]).unwrap();
        assert_eq!(e.differentiate(0).unwrap(), Expr::Const(0.0));
    }

    #[test]
    fn abs_on_parameter_path_is_rejected() {
        let e = parse("abs(theta[0]*x) + theta[1]", &["x"]).unwrap();
        assert_eq!(
            e.differentiate(0),
            Err(ExprError::NotDifferentiable { op: "abs", param: 0 })
        );
        assert_eq!(e.differentiate(1).unwrap(), Expr::Const(1.0));
    }

    #[test]
    fn matches_finite_differences_for_every_node_kind() {
        let vars = ["x"];
        let sources = [
            "theta[0]*exp(theta[1]*x) + theta[2]",
            "theta[0] + theta[1]/(theta[2]*x + theta[3])",
            "log(theta[0]*x + theta[1]) - sqrt(theta[2] + x)",
            "sin(theta[0]*x)*cos(theta[1] - x)",
            "cube(theta[0] - x) + (theta[1]*x)^3",
            "x^theta[0] + theta[1]^x + theta[2]^theta[0]",
            "-(theta[0]/x)^2.5",
        ];
        let points = [([0.9, 1.3, 0.7, 1.1], 0.5), ([1.7, 0.6, 1.2, 0.8], 1.4), ([1.1, 1.9, 0.55, 1.6], 2.0)];
        for src in sources {
            let e = parse(src, &vars).unwrap();
            for (theta, x) in points {
                for i in 0..=e.max_param().unwrap() {
                    let sym = e.differentiate(i).unwrap().eval(&theta, &[x]);
                    let fd = central_difference(&e, &theta, &[x], i);
                    let rel = (sym - fd).abs() / sym.abs().max(1e-3);
                    assert!(rel < 1e-6, "{src} d/dθ{i}: {sym} vs {fd}");
                }
            }
        }
    }
}
