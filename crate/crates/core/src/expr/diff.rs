//! Exact symbolic differentiation over the max-free fragment.

use super::{simplify, DiffError, Expr, Var};

/// d/d`var` of `e`, simplified. Trees containing `max` are rejected; the
/// series always works on the smooth branch.
pub fn differentiate(e: &Expr, var: Var) -> Result<Expr, DiffError> {
    if e.contains_max() {
        return Err(DiffError::MaxNode);
    }
    Ok(simplify(&d(e, var)))
}

fn d(e: &Expr, var: Var) -> Expr {
    match e {
        Expr::Const(_) => Expr::Const(0.0),
        Expr::Var(v) => Expr::Const(if *v == var { 1.0 } else { 0.0 }),
        Expr::Add(a, b) => Expr::Add(Box::new(d(a, var)), Box::new(d(b, var))),
        Expr::Sub(a, b) => Expr::Sub(Box::new(d(a, var)), Box::new(d(b, var))),
        Expr::Mul(a, b) => Expr::Add(
            Box::new(Expr::Mul(Box::new(d(a, var)), b.clone())),
            Box::new(Expr::Mul(a.clone(), Box::new(d(b, var)))),
        ),
        Expr::Div(a, b) => {
            // (a'b - ab') / b^2
            let num = Expr::Sub(
                Box::new(Expr::Mul(Box::new(d(a, var)), b.clone())),
                Box::new(Expr::Mul(a.clone(), Box::new(d(b, var)))),
            );
            Expr::Div(
                Box::new(num),
                Box::new(Expr::Pow(b.clone(), Box::new(Expr::Const(2.0)))),
            )
        }
        Expr::Pow(base, exponent) => {
            if let Expr::Const(k) = **exponent {
                // k * base^(k-1) * base'
                return Expr::Mul(
                    Box::new(Expr::Mul(
                        Box::new(Expr::Const(k)),
                        Box::new(Expr::Pow(base.clone(), Box::new(Expr::Const(k - 1.0)))),
                    )),
                    Box::new(d(base, var)),
                );
            }
            // general rule: base^exp * (exp' ln(base) + exp * base'/base)
            let log_part = Expr::Mul(Box::new(d(exponent, var)), Box::new(Expr::Ln(base.clone())));
            let ratio_part = Expr::Mul(
                exponent.clone(),
                Box::new(Expr::Div(Box::new(d(base, var)), base.clone())),
            );
            Expr::Mul(
                Box::new(e.clone()),
                Box::new(Expr::Add(Box::new(log_part), Box::new(ratio_part))),
            )
        }
        Expr::Exp(a) => Expr::Mul(Box::new(d(a, var)), Box::new(e.clone())),
        Expr::Ln(a) => Expr::Div(Box::new(d(a, var)), a.clone()),
        Expr::Sin(a) => Expr::Mul(Box::new(d(a, var)), Box::new(Expr::Cos(a.clone()))),
        Expr::Cos(a) => Expr::Mul(
            Box::new(Expr::Const(-1.0)),
            Box::new(Expr::Mul(Box::new(d(a, var)), Box::new(Expr::Sin(a.clone())))),
        ),
        Expr::Max(..) => unreachable!("contains_max checked before recursion"),
    }
}
