//! Payoff-expression DSL: parsing, printing, evaluation, exact symbolic
//! differentiation, and algebraic simplification.
//!
//! Expressions are immutable trees over the identifiers `s1, s2, u, v, x, y`
//! (plus the constant `pi`), the arithmetic operators `+ - * / ^`, and the
//! functions `exp, ln, sin, cos, max`. This is the substrate the series
//! recursion operates on: every generated term is kept in a canonical
//! sum-of-products form by [`simplify`] so that like terms collect instead of
//! exploding.

mod diff;
mod parse;
mod simplify;

pub use diff::differentiate;
pub use parse::{parse_expr, ParseError, ParseErrorKind};
pub use simplify::simplify;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The closed set of variable identifiers the grammar admits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Var {
    S1,
    S2,
    U,
    V,
    X,
    Y,
}

impl Var {
    pub const ALL: [Var; 6] = [Var::S1, Var::S2, Var::U, Var::V, Var::X, Var::Y];

    pub fn name(self) -> &'static str {
        match self {
            Var::S1 => "s1",
            Var::S2 => "s2",
            Var::U => "u",
            Var::V => "v",
            Var::X => "x",
            Var::Y => "y",
        }
    }

    pub fn from_name(name: &str) -> Option<Var> {
        Var::ALL.iter().copied().find(|v| v.name() == name)
    }

    fn index(self) -> usize {
        match self {
            Var::S1 => 0,
            Var::S2 => 1,
            Var::U => 2,
            Var::V => 3,
            Var::X => 4,
            Var::Y => 5,
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Immutable expression tree. Constants are finite `f64`s; the parser and the
/// simplifier both refuse to materialize NaN or infinite constants.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Ln(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

/// Variable bindings for evaluation; one optional slot per identifier.
#[derive(Debug, Clone, Default)]
pub struct VarEnv {
    vals: [Option<f64>; 6],
}

impl VarEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, var: Var, value: f64) -> Self {
        self.vals[var.index()] = Some(value);
        self
    }

    pub fn bind(&mut self, var: Var, value: f64) {
        self.vals[var.index()] = Some(value);
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        self.vals[var.index()]
    }
}

impl From<&[(Var, f64)]> for VarEnv {
    fn from(pairs: &[(Var, f64)]) -> Self {
        let mut env = VarEnv::new();
        for &(v, x) in pairs {
            env.bind(v, x);
        }
        env
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}` in evaluation environment")]
    UnboundVariable(Var),
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiffError {
    #[error("cannot differentiate through `max`; strip the payoff kink first")]
    MaxNode,
}

impl Expr {
    pub fn num(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn exp_of(e: Expr) -> Expr {
        Expr::Exp(Box::new(e))
    }

    pub fn ln_of(e: Expr) -> Expr {
        Expr::Ln(Box::new(e))
    }

    pub fn sin_of(e: Expr) -> Expr {
        Expr::Sin(Box::new(e))
    }

    pub fn cos_of(e: Expr) -> Expr {
        Expr::Cos(Box::new(e))
    }

    pub fn pow(base: Expr, exponent: Expr) -> Expr {
        Expr::Pow(Box::new(base), Box::new(exponent))
    }

    pub fn max_of(a: Expr, b: Expr) -> Expr {
        Expr::Max(Box::new(a), Box::new(b))
    }

    /// IEEE double evaluation. `max` is the pointwise maximum. Domain
    /// failures (`ln` of a non-positive value, division by zero, any NaN
    /// produced mid-computation) are reported, never silently propagated.
    pub fn eval(&self, env: &VarEnv) -> Result<f64, EvalError> {
        let checked = |x: f64, what: &str| {
            if x.is_nan() {
                Err(EvalError::Domain(format!("{what} produced NaN")))
            } else {
                Ok(x)
            }
        };
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(v) => env.get(*v).ok_or(EvalError::UnboundVariable(*v)),
            Expr::Add(a, b) => checked(a.eval(env)? + b.eval(env)?, "addition"),
            Expr::Sub(a, b) => checked(a.eval(env)? - b.eval(env)?, "subtraction"),
            Expr::Mul(a, b) => checked(a.eval(env)? * b.eval(env)?, "multiplication"),
            Expr::Div(a, b) => {
                let d = b.eval(env)?;
                if d == 0.0 {
                    return Err(EvalError::Domain("division by zero".into()));
                }
                checked(a.eval(env)? / d, "division")
            }
            Expr::Pow(a, b) => {
                let base = a.eval(env)?;
                let ex = b.eval(env)?;
                let r = base.powf(ex);
                if r.is_nan() {
                    return Err(EvalError::Domain(format!(
                        "power {base}^{ex} is undefined in the reals"
                    )));
                }
                Ok(r)
            }
            Expr::Exp(a) => Ok(a.eval(env)?.exp()),
            Expr::Ln(a) => {
                let x = a.eval(env)?;
                if x <= 0.0 {
                    return Err(EvalError::Domain(format!("ln of non-positive value {x}")));
                }
                Ok(x.ln())
            }
            Expr::Sin(a) => Ok(a.eval(env)?.sin()),
            Expr::Cos(a) => Ok(a.eval(env)?.cos()),
            Expr::Max(a, b) => Ok(a.eval(env)?.max(b.eval(env)?)),
        }
    }

    /// True if any `max` node occurs in the tree.
    pub fn contains_max(&self) -> bool {
        match self {
            Expr::Max(_, _) => true,
            Expr::Const(_) | Expr::Var(_) => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.contains_max() || b.contains_max(),
            Expr::Exp(a) | Expr::Ln(a) | Expr::Sin(a) | Expr::Cos(a) => a.contains_max(),
        }
    }

    /// Replace each `max` node by its smooth branch: `max(e, 0) -> e`,
    /// `max(0, e) -> e`, and for two non-zero branches the first argument.
    /// This happens once at scenario setup; the smooth branch seeds the
    /// series.
    pub fn strip_max(&self) -> Expr {
        match self {
            Expr::Max(a, b) => {
                if matches!(**b, Expr::Const(c) if c == 0.0) {
                    a.strip_max()
                } else if matches!(**a, Expr::Const(c) if c == 0.0) {
                    b.strip_max()
                } else {
                    a.strip_max()
                }
            }
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Add(a, b) => Expr::Add(Box::new(a.strip_max()), Box::new(b.strip_max())),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.strip_max()), Box::new(b.strip_max())),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.strip_max()), Box::new(b.strip_max())),
            Expr::Div(a, b) => Expr::Div(Box::new(a.strip_max()), Box::new(b.strip_max())),
            Expr::Pow(a, b) => Expr::Pow(Box::new(a.strip_max()), Box::new(b.strip_max())),
            Expr::Exp(a) => Expr::Exp(Box::new(a.strip_max())),
            Expr::Ln(a) => Expr::Ln(Box::new(a.strip_max())),
            Expr::Sin(a) => Expr::Sin(Box::new(a.strip_max())),
            Expr::Cos(a) => Expr::Cos(Box::new(a.strip_max())),
        }
    }

    /// Rename variables according to `map` (first match wins).
    pub fn rename_vars(&self, map: &[(Var, Var)]) -> Expr {
        match self {
            Expr::Var(v) => {
                let target = map.iter().find(|(from, _)| from == v).map(|&(_, to)| to);
                Expr::Var(target.unwrap_or(*v))
            }
            Expr::Const(_) => self.clone(),
            Expr::Add(a, b) => Expr::Add(
                Box::new(a.rename_vars(map)),
                Box::new(b.rename_vars(map)),
            ),
            Expr::Sub(a, b) => Expr::Sub(
                Box::new(a.rename_vars(map)),
                Box::new(b.rename_vars(map)),
            ),
            Expr::Mul(a, b) => Expr::Mul(
                Box::new(a.rename_vars(map)),
                Box::new(b.rename_vars(map)),
            ),
            Expr::Div(a, b) => Expr::Div(
                Box::new(a.rename_vars(map)),
                Box::new(b.rename_vars(map)),
            ),
            Expr::Pow(a, b) => Expr::Pow(
                Box::new(a.rename_vars(map)),
                Box::new(b.rename_vars(map)),
            ),
            Expr::Exp(a) => Expr::Exp(Box::new(a.rename_vars(map))),
            Expr::Ln(a) => Expr::Ln(Box::new(a.rename_vars(map))),
            Expr::Sin(a) => Expr::Sin(Box::new(a.rename_vars(map))),
            Expr::Cos(a) => Expr::Cos(Box::new(a.rename_vars(map))),
            Expr::Max(a, b) => Expr::Max(
                Box::new(a.rename_vars(map)),
                Box::new(b.rename_vars(map)),
            ),
        }
    }

    /// All variables occurring in the tree, in `Var::ALL` order.
    pub fn variables(&self) -> Vec<Var> {
        let mut seen = [false; 6];
        self.collect_vars(&mut seen);
        Var::ALL
            .iter()
            .copied()
            .filter(|v| seen[v.index()])
            .collect()
    }

    fn collect_vars(&self, seen: &mut [bool; 6]) {
        match self {
            Expr::Var(v) => seen[v.index()] = true,
            Expr::Const(_) => {}
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b)
            | Expr::Pow(a, b) | Expr::Max(a, b) => {
                a.collect_vars(seen);
                b.collect_vars(seen);
            }
            Expr::Exp(a) | Expr::Ln(a) | Expr::Sin(a) | Expr::Cos(a) => a.collect_vars(seen),
        }
    }

    /// Number of nodes in the tree; the series builder's growth guard.
    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b)
            | Expr::Pow(a, b) | Expr::Max(a, b) => 1 + a.node_count() + b.node_count(),
            Expr::Exp(a) | Expr::Ln(a) | Expr::Sin(a) | Expr::Cos(a) => 1 + a.node_count(),
        }
    }

    /// Total order used by the canonical term ordering. Constants compare by
    /// `total_cmp`, everything else structurally.
    pub(crate) fn cmp_structural(&self, other: &Expr) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        fn rank(e: &Expr) -> u8 {
            match e {
                Expr::Const(_) => 0,
                Expr::Var(_) => 1,
                Expr::Add(..) => 2,
                Expr::Sub(..) => 3,
                Expr::Mul(..) => 4,
                Expr::Div(..) => 5,
                Expr::Pow(..) => 6,
                Expr::Exp(_) => 7,
                Expr::Ln(_) => 8,
                Expr::Sin(_) => 9,
                Expr::Cos(_) => 10,
                Expr::Max(..) => 11,
            }
        }
        match rank(self).cmp(&rank(other)) {
            Ordering::Equal => {}
            ord => return ord,
        }
        match (self, other) {
            (Expr::Const(a), Expr::Const(b)) => a.total_cmp(b),
            (Expr::Var(a), Expr::Var(b)) => a.cmp(b),
            (Expr::Add(a, b), Expr::Add(c, d))
            | (Expr::Sub(a, b), Expr::Sub(c, d))
            | (Expr::Mul(a, b), Expr::Mul(c, d))
            | (Expr::Div(a, b), Expr::Div(c, d))
            | (Expr::Pow(a, b), Expr::Pow(c, d))
            | (Expr::Max(a, b), Expr::Max(c, d)) => a
                .cmp_structural(c)
                .then_with(|| b.cmp_structural(d)),
            (Expr::Exp(a), Expr::Exp(b))
            | (Expr::Ln(a), Expr::Ln(b))
            | (Expr::Sin(a), Expr::Sin(b))
            | (Expr::Cos(a), Expr::Cos(b)) => a.cmp_structural(b),
            _ => unreachable!("rank() already separated the variants"),
        }
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::Sub(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::Div(Box::new(self), Box::new(rhs))
    }
}

// Printing. The emitted text parses back to the identical tree: binary
// operators are printed left-associatively with parentheses wherever the tree
// shape departs from what the grammar would rebuild, a leading `-1 *` factor
// prints as unary minus, and `^` operands are parenthesized unless they are
// atoms.
const PREC_SUM: u8 = 1;
const PREC_PROD: u8 = 2;
const PREC_POW: u8 = 3;
const PREC_ATOM: u8 = 4;

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl Expr {
    fn is_atom(&self) -> bool {
        matches!(
            self,
            Expr::Var(_)
                | Expr::Exp(_)
                | Expr::Ln(_)
                | Expr::Sin(_)
                | Expr::Cos(_)
                | Expr::Max(..)
        ) || matches!(self, Expr::Const(c) if *c >= 0.0)
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, parent: u8) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if *c < 0.0 && parent >= PREC_PROD {
                    write!(f, "({c})")
                } else {
                    write!(f, "{c}")
                }
            }
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Add(a, b) => {
                let wrap = parent > PREC_SUM;
                if wrap {
                    f.write_str("(")?;
                }
                a.fmt_prec(f, PREC_SUM)?;
                f.write_str(" + ")?;
                b.fmt_prec(f, PREC_SUM + 1)?;
                if wrap {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Expr::Sub(a, b) => {
                let wrap = parent > PREC_SUM;
                if wrap {
                    f.write_str("(")?;
                }
                a.fmt_prec(f, PREC_SUM)?;
                f.write_str(" - ")?;
                b.fmt_prec(f, PREC_SUM + 1)?;
                if wrap {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Expr::Mul(a, b) => {
                let wrap = parent > PREC_PROD;
                if wrap {
                    f.write_str("(")?;
                }
                if matches!(**a, Expr::Const(c) if c == -1.0) {
                    f.write_str("-")?;
                    b.fmt_prec(f, PREC_PROD + 1)?;
                } else {
                    a.fmt_prec(f, PREC_PROD)?;
                    f.write_str("*")?;
                    b.fmt_prec(f, PREC_PROD + 1)?;
                }
                if wrap {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Expr::Div(a, b) => {
                let wrap = parent > PREC_PROD;
                if wrap {
                    f.write_str("(")?;
                }
                a.fmt_prec(f, PREC_PROD)?;
                f.write_str("/")?;
                b.fmt_prec(f, PREC_PROD + 1)?;
                if wrap {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Expr::Pow(a, b) => {
                let wrap = parent > PREC_POW;
                if wrap {
                    f.write_str("(")?;
                }
                if a.is_atom() {
                    a.fmt_prec(f, PREC_ATOM)?;
                } else {
                    f.write_str("(")?;
                    a.fmt_prec(f, 0)?;
                    f.write_str(")")?;
                }
                f.write_str("^")?;
                if b.is_atom() {
                    b.fmt_prec(f, PREC_ATOM)?;
                } else {
                    f.write_str("(")?;
                    b.fmt_prec(f, 0)?;
                    f.write_str(")")?;
                }
                if wrap {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Ln(a) => write!(f, "ln({a})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Max(a, b) => write!(f, "max({a}, {b})"),
        }
    }
}
