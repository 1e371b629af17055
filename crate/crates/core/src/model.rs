//! Parameterized models: literal-to-parameter rewriting, Jacobians,
//! identifiability diagnostics and per-point re-parameterization for
//! profile prediction intervals.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::expr::{self, BinaryOp, Expr, ExprError, UnaryOp};
use crate::fit::FitResult;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("parameter indices must be exactly 0..{p}; theta[{missing}] never occurs")]
    MissingParameter { p: usize, missing: usize },
    #[error("expected {expected} initial values, got {got}")]
    ThetaLength { expected: usize, got: usize },
    #[error("non-finite initial value for theta[{0}]")]
    NonFiniteTheta(usize),
    #[error("model uses input x{needed} but the dataset has {available} inputs")]
    VariableCount { needed: usize, available: usize },
    #[error("non-finite Jacobian entry at row {row}, column {col}")]
    NonFiniteJacobian { row: usize, col: usize },
    #[error("no extractable parameter: no parameter occurs once on an invertible path")]
    NoExtractableParameter,
}

/// Why a literal was left in place instead of becoming a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixedReason {
    /// Scale of an affine combination whose terms are all parameterized.
    RedundantScale,
    /// Integer exponent of a power.
    IntegerExponent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedConstant {
    /// Pre-order node index in the source expression.
    pub position: usize,
    pub value: f64,
    pub reason: FixedReason,
}

/// An expression with parameters `θ_0 … θ_{p-1}`, its initial values and
/// the symbolic partial derivatives used for Jacobians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamModel {
    expr: Expr,
    theta0: Vec<f64>,
    n_vars: usize,
    fixed_constants: Vec<FixedConstant>,
    partials: Vec<Expr>,
}

impl ParamModel {
    pub fn new(expr: Expr, theta0: Vec<f64>, n_vars: usize) -> Result<ParamModel, ModelError> {
        let p = expr.max_param().map_or(0, |i| i + 1);
        if let Some(missing) = (0..p).find(|&i| !expr.contains_param(i)) {
            return Err(ModelError::MissingParameter { p, missing });
        }
        if theta0.len() != p {
            return Err(ModelError::ThetaLength { expected: p, got: theta0.len() });
        }
        if let Some(i) = theta0.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteTheta(i));
        }
        if let Some(k) = expr.max_var().filter(|&k| k >= n_vars) {
            return Err(ModelError::VariableCount { needed: k, available: n_vars });
        }
        let partials = (0..p).map(|i| expr.differentiate(i)).collect::<Result<Vec<_>, _>>()?;
        Ok(ParamModel { expr, theta0, n_vars, fixed_constants: Vec::new(), partials })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn theta0(&self) -> &[f64] {
        &self.theta0
    }

    pub fn n_params(&self) -> usize {
        self.theta0.len()
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn fixed_constants(&self) -> &[FixedConstant] {
        &self.fixed_constants
    }

    pub fn partial(&self, i: usize) -> &Expr {
        &self.partials[i]
    }

    pub fn with_theta0(mut self, theta0: Vec<f64>) -> Result<ParamModel, ModelError> {
        if theta0.len() != self.n_params() {
            return Err(ModelError::ThetaLength { expected: self.n_params(), got: theta0.len() });
        }
        self.theta0 = theta0;
        Ok(self)
    }

    pub fn check_data(&self, data: &Dataset) -> Result<(), ModelError> {
        match self.expr.max_var() {
            Some(k) if k >= data.n_vars() => {
                Err(ModelError::VariableCount { needed: k, available: data.n_vars() })
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn predict(&self, theta: &[f64], x: &[f64]) -> f64 {
        self.expr.eval(theta, x)
    }

    pub fn predict_all(&self, data: &Dataset, theta: &[f64]) -> Vec<f64> {
        data.rows().map(|x| self.predict(theta, x)).collect()
    }

    /// `y - f(x, θ)` for every observation.
    pub fn residuals(&self, data: &Dataset, theta: &[f64]) -> Vec<f64> {
        data.rows().zip(data.y()).map(|(x, y)| y - self.predict(theta, x)).collect()
    }

    pub fn jacobian_row(&self, theta: &[f64], x: &[f64]) -> Vec<f64> {
        self.partials.iter().map(|d| d.eval(theta, x)).collect()
    }

    /// Derivatives of the predictions (not the residuals): entry `(k, j)`
    /// is `∂f(x_k, θ)/∂θ_j`. Non-finite values are passed through.
    pub fn jacobian_raw(&self, data: &Dataset, theta: &[f64]) -> DMatrix<f64> {
        let p = self.n_params();
        DMatrix::from_fn(data.n(), p, |k, j| self.partials[j].eval(theta, data.row(k)))
    }

    pub fn jacobian(&self, data: &Dataset, theta: &[f64]) -> Result<DMatrix<f64>, ModelError> {
        if theta.len() != self.n_params() {
            return Err(ModelError::ThetaLength { expected: self.n_params(), got: theta.len() });
        }
        self.check_data(data)?;
        let j = self.jacobian_raw(data, theta);
        for row in 0..j.nrows() {
            for col in 0..j.ncols() {
                if !j[(row, col)].is_finite() {
                    return Err(ModelError::NonFiniteJacobian { row, col });
                }
            }
        }
        Ok(j)
    }
}

/// True when `e` contains no literal that would be parameterized.
fn literal_free(e: &Expr) -> bool {
    match e {
        Expr::Const(_) => false,
        Expr::Var(_) | Expr::Param(_) => true,
        Expr::Unary(_, a) => literal_free(a),
        Expr::Binary(BinaryOp::Pow, a, b) if b.is_integer_const() => literal_free(a),
        Expr::Binary(_, a, b) => literal_free(a) && literal_free(b),
    }
}

/// A term that is linear in exactly one literal: `c`, `c*g`, `g*c`, `-term`.
fn literal_scaled_term(e: &Expr) -> bool {
    match e {
        Expr::Const(_) => true,
        Expr::Unary(UnaryOp::Neg, a) => literal_scaled_term(a),
        Expr::Binary(BinaryOp::Mul, a, b) => match (&**a, &**b) {
            (Expr::Const(_), g) | (g, Expr::Const(_)) => literal_free(g),
            _ => false,
        },
        Expr::Binary(BinaryOp::Div, a, b) => matches!(**b, Expr::Const(_)) && literal_free(a),
        _ => false,
    }
}

fn affine_terms_ok(e: &Expr) -> bool {
    match e {
        Expr::Binary(BinaryOp::Add | BinaryOp::Sub, a, b) => affine_terms_ok(a) && affine_terms_ok(b),
        Expr::Unary(UnaryOp::Neg, a) => affine_terms_ok(a),
        other => literal_scaled_term(other),
    }
}

/// An additive combination of literal-scaled terms, e.g. `3*x + 1`.
fn is_affine_combination(e: &Expr) -> bool {
    let inner = match e {
        Expr::Unary(UnaryOp::Neg, a) => a,
        other => other,
    };
    matches!(inner, Expr::Binary(BinaryOp::Add | BinaryOp::Sub, _, _)) && affine_terms_ok(inner)
}

/// Multiplication-of-addition pattern: `c * (Σ c_j g_j)`, `(Σ c_j g_j) * c`,
/// `c / (Σ c_j g_j)` or `(Σ c_j g_j) / c`. Parameterizing the outer literal
/// `c` would only add a redundant scale, so it stays fixed.
pub fn mul_add_pattern(node: &Expr) -> bool {
    match node {
        Expr::Binary(BinaryOp::Mul | BinaryOp::Div, a, b) => match (&**a, &**b) {
            (Expr::Const(_), other) | (other, Expr::Const(_)) => is_affine_combination(other),
            _ => false,
        },
        _ => false,
    }
}

struct Rewriter {
    values: Vec<f64>,
    fixed: Vec<FixedConstant>,
    position: usize,
}

impl Rewriter {
    fn rewrite(&mut self, e: &Expr, can_replace: bool, reason: FixedReason) -> Expr {
        let position = self.position;
        self.position += 1;
        match e {
            Expr::Const(c) if can_replace => {
                self.values.push(*c);
                Expr::Param(self.values.len() - 1)
            }
            Expr::Const(c) => {
                self.fixed.push(FixedConstant { position, value: *c, reason });
                e.clone()
            }
            Expr::Var(_) | Expr::Param(_) => e.clone(),
            Expr::Unary(op, a) => Expr::Unary(*op, Box::new(self.rewrite(a, true, reason))),
            Expr::Binary(op, a, b) => {
                let scale_fixed = mul_add_pattern(e);
                let left = self.rewrite(a, !(scale_fixed && matches!(**a, Expr::Const(_))), FixedReason::RedundantScale);
                let right = if *op == BinaryOp::Pow && b.is_integer_const() {
                    self.rewrite(b, false, FixedReason::IntegerExponent)
                } else {
                    self.rewrite(b, !(scale_fixed && matches!(**b, Expr::Const(_))), FixedReason::RedundantScale)
                };
                Expr::Binary(*op, Box::new(left), Box::new(right))
            }
        }
    }
}

/// Replace numeric literals by parameters in left-to-right order.
///
/// Literals matched by [`mul_add_pattern`] and integer exponents are kept
/// as constants and listed in [`ParamModel::fixed_constants`]. Existing
/// `theta[i]` nodes in the input are not allowed to clash: the input should
/// be a concrete expression.
pub fn parameterize(source: &Expr, n_vars: usize) -> Result<ParamModel, ModelError> {
    let mut rw = Rewriter { values: Vec::new(), fixed: Vec::new(), position: 0 };
    let expr = rw.rewrite(source, true, FixedReason::RedundantScale);
    let mut model = ParamModel::new(expr, rw.values, n_vars)?;
    model.fixed_constants = rw.fixed;
    Ok(model)
}

/// Advisory diagnostics for redundant or poorly determined parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identifiability {
    /// `se_i / |θ̂_i|`.
    pub se_ratio: Vec<f64>,
    pub corr: Vec<Vec<f64>>,
    /// Pairs with `|corr| > 0.999`.
    pub correlated_pairs: Vec<(usize, usize, f64)>,
    /// Parameters with `se/|θ̂| > 1e3`.
    pub weak_parameters: Vec<usize>,
    /// Parameters whose estimate is exactly zero.
    pub zero_parameters: Vec<usize>,
    /// Set when the Jacobian's R factor is singular.
    pub rank_deficient: Option<String>,
}

impl Identifiability {
    pub fn is_clean(&self) -> bool {
        self.correlated_pairs.is_empty() && self.weak_parameters.is_empty() && self.rank_deficient.is_none()
    }
}

pub const CORRELATION_FLAG: f64 = 0.999;
pub const SE_RATIO_FLAG: f64 = 1e3;

pub fn check_identifiability(fit: &FitResult) -> Identifiability {
    let p = fit.p;
    let se_ratio: Vec<f64> = fit.se.iter().zip(&fit.theta_hat).map(|(se, t)| se / t.abs()).collect();
    let mut correlated_pairs = Vec::new();
    for i in 0..p {
        for j in 0..i {
            let c = fit.corr[i][j];
            if c.abs() > CORRELATION_FLAG || c.is_nan() {
                correlated_pairs.push((i, j, c));
            }
        }
    }
    let weak_parameters = (0..p).filter(|&i| !(se_ratio[i] <= SE_RATIO_FLAG)).collect();
    let zero_parameters = (0..p).filter(|&i| fit.theta_hat[i] == 0.0).collect();
    let rank_deficient = (!fit.deficient.is_empty())
        .then(|| "rank-deficient Jacobian: model over-parameterized".to_string());
    Identifiability { se_ratio, corr: fit.corr.clone(), correlated_pairs, weak_parameters, zero_parameters, rank_deficient }
}

/// A model rewritten so that parameter `pivot` equals the prediction at `x0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reparameterization {
    pub pivot: usize,
    pub x0: Vec<f64>,
    pub model: ParamModel,
    pub theta_prime0: Vec<f64>,
}

/// Steps from the root to a parameter: (node, child index).
fn path_to<'a>(e: &'a Expr, param: usize, path: &mut Vec<(&'a Expr, usize)>) -> bool {
    match e {
        Expr::Param(i) => *i == param,
        Expr::Unary(_, a) => {
            path.push((e, 0));
            if path_to(a, param, path) {
                return true;
            }
            path.pop();
            false
        }
        Expr::Binary(_, a, b) => {
            for (k, child) in [a, b].into_iter().enumerate() {
                path.push((e, k));
                if path_to(child, param, path) {
                    return true;
                }
                path.pop();
            }
            false
        }
        _ => false,
    }
}

fn invertible(step: &(&Expr, usize)) -> bool {
    match step.0 {
        Expr::Unary(op, _) => matches!(op, UnaryOp::Neg | UnaryOp::Exp | UnaryOp::Log | UnaryOp::Sqrt),
        Expr::Binary(op, _, _) => !matches!(op, BinaryOp::Pow),
        _ => false,
    }
}

fn additive_or_multiplicative(step: &(&Expr, usize)) -> bool {
    matches!(step.0, Expr::Binary(BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div, _, _))
        || matches!(step.0, Expr::Unary(UnaryOp::Neg, _))
}

/// Peel invertible operations from the root down to the pivot, solving
/// `f(x0, θ) = θ'_pivot` for `θ_pivot`.
fn solve_for_pivot(path: &[(&Expr, usize)], pivot: usize, x0: &[f64]) -> Expr {
    let mut target = Expr::Param(pivot);
    for &(node, k) in path {
        target = match node {
            Expr::Unary(op, _) => match op {
                UnaryOp::Neg => expr::neg(target),
                UnaryOp::Exp => expr::unary(UnaryOp::Log, target),
                UnaryOp::Log => expr::unary(UnaryOp::Exp, target),
                UnaryOp::Sqrt => expr::pow(target, Expr::num(2.0)),
                _ => unreachable!("non-invertible step"),
            },
            Expr::Binary(op, a, b) => {
                let other = if k == 0 { b.substitute_vars(x0) } else { a.substitute_vars(x0) };
                match (op, k) {
                    (BinaryOp::Add, _) => expr::sub(target, other),
                    (BinaryOp::Sub, 0) => expr::add(target, other),
                    (BinaryOp::Sub, _) => expr::sub(other, target),
                    (BinaryOp::Mul, _) => expr::div(target, other),
                    (BinaryOp::Div, 0) => expr::mul(target, other),
                    (BinaryOp::Div, _) => expr::div(other, target),
                    (BinaryOp::Pow, _) => unreachable!("non-invertible step"),
                }
            }
            _ => unreachable!("path nodes are operators"),
        };
    }
    target
}

/// Rewrite `model` so one parameter equals `f(x0, θ)`.
///
/// The pivot is the parameter occurring exactly once on a path of
/// invertible operations, preferring purely additive/multiplicative paths,
/// then the shallowest depth, then the lowest index. Candidates whose
/// rewrite is not finite at `theta_hat` are skipped.
pub fn reparameterize(model: &ParamModel, theta_hat: &[f64], x0: &[f64]) -> Result<Reparameterization, ModelError> {
    if theta_hat.len() != model.n_params() {
        return Err(ModelError::ThetaLength { expected: model.n_params(), got: theta_hat.len() });
    }
    if let Some(k) = model.expr.max_var().filter(|&k| k >= x0.len()) {
        return Err(ModelError::VariableCount { needed: k, available: x0.len() });
    }
    let mut candidates = Vec::new();
    for i in 0..model.n_params() {
        if model.expr.param_occurrences(i) != 1 {
            continue;
        }
        let mut path = Vec::new();
        path_to(&model.expr, i, &mut path);
        if path.iter().all(invertible) {
            let simple = path.iter().all(additive_or_multiplicative);
            candidates.push((!simple, path.len(), i, path));
        }
    }
    candidates.sort_by_key(|c| (c.0, c.1, c.2));
    let y0 = model.predict(theta_hat, x0);
    if !y0.is_finite() {
        return Err(ModelError::NoExtractableParameter);
    }
    for (_, _, pivot, path) in candidates {
        let solution = solve_for_pivot(&path, pivot, x0);
        let new_expr = model.expr.map_params(&|j| if j == pivot { solution.clone() } else { Expr::Param(j) });
        let mut theta_prime0 = theta_hat.to_vec();
        theta_prime0[pivot] = y0;
        let recovered = solution.eval(&theta_prime0, x0);
        let scale = theta_hat[pivot].abs().max(1e-300);
        if !recovered.is_finite() || (recovered - theta_hat[pivot]).abs() > 1e-6 * scale.max(1.0) {
            continue;
        }
        let Ok(rewritten) = ParamModel::new(new_expr, theta_prime0.clone(), model.n_vars) else {
            continue;
        };
        return Ok(Reparameterization { pivot, x0: x0.to_vec(), model: rewritten, theta_prime0 });
    }
    Err(ModelError::NoExtractableParameter)
}
