//! Canonical sum-of-products normalization.
//!
//! Every expression is flattened into a list of terms, each a coefficient
//! times a monomial of `base^exponent` factors. Bases are themselves
//! simplified sub-expressions (variables, function applications, or
//! parenthesized sums), compared structurally. Like factors merge by adding
//! exponents, like terms merge by adding coefficients, and the result is
//! rebuilt as a left-associated tree in a fixed total order, so the printed
//! form parses back to the identical tree and `simplify` is idempotent.
//!
//! Ordering of factors inside a monomial: variables first (s1 < s2 < u < v <
//! x < y), then function factors alphabetically (cos < exp < ln < max < sin),
//! then compound bases. Terms are ordered by comparing their factor lists,
//! with the pure-constant term first.

use super::Expr;
use std::cmp::Ordering;

#[derive(Debug, Clone)]
struct Term {
    coeff: f64,
    // (base, exponent), base already simplified, sorted by factor_cmp
    factors: Vec<(Expr, f64)>,
}

impl Term {
    fn constant(c: f64) -> Term {
        Term {
            coeff: c,
            factors: Vec::new(),
        }
    }
}

fn factor_class(base: &Expr) -> u8 {
    match base {
        Expr::Var(_) => 0,
        Expr::Cos(_) => 1,
        Expr::Exp(_) => 2,
        Expr::Ln(_) => 3,
        Expr::Max(..) => 4,
        Expr::Sin(_) => 5,
        _ => 6,
    }
}

fn factor_cmp(a: &(Expr, f64), b: &(Expr, f64)) -> Ordering {
    factor_class(&a.0)
        .cmp(&factor_class(&b.0))
        .then_with(|| a.0.cmp_structural(&b.0))
        .then_with(|| a.1.total_cmp(&b.1))
}

fn monomial_cmp(a: &Term, b: &Term) -> Ordering {
    // constant term (no factors) sorts first; then lexicographic on factors
    let mut ia = a.factors.iter();
    let mut ib = b.factors.iter();
    loop {
        match (ia.next(), ib.next()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(fa), Some(fb)) => match factor_cmp(fa, fb) {
                Ordering::Equal => continue,
                ord => return ord,
            },
        }
    }
}

fn same_monomial(a: &Term, b: &Term) -> bool {
    a.factors.len() == b.factors.len()
        && a.factors
            .iter()
            .zip(&b.factors)
            .all(|(fa, fb)| factor_cmp(fa, fb) == Ordering::Equal)
}

/// Merge equal factors within a term and drop zero exponents.
fn canonicalize_term(mut t: Term) -> Term {
    t.factors.sort_by(factor_cmp);
    let mut merged: Vec<(Expr, f64)> = Vec::with_capacity(t.factors.len());
    for (base, exp) in t.factors {
        if let Some(last) = merged.last_mut() {
            if factor_class(&last.0) == factor_class(&base)
                && last.0.cmp_structural(&base) == Ordering::Equal
            {
                last.1 += exp;
                continue;
            }
        }
        merged.push((base, exp));
    }
    merged.retain(|(_, e)| *e != 0.0);
    Term {
        coeff: t.coeff,
        factors: merged,
    }
}

fn collect(terms: Vec<Term>) -> Vec<Term> {
    let mut terms: Vec<Term> = terms
        .into_iter()
        .map(canonicalize_term)
        .filter(|t| t.coeff != 0.0)
        .collect();
    terms.sort_by(monomial_cmp);
    let mut out: Vec<Term> = Vec::with_capacity(terms.len());
    for t in terms {
        if let Some(last) = out.last_mut() {
            if same_monomial(last, &t) {
                last.coeff += t.coeff;
                continue;
            }
        }
        out.push(t);
    }
    out.retain(|t| t.coeff != 0.0 && !t.coeff.is_nan());
    out
}

fn mul_terms(a: &Term, b: &Term) -> Term {
    let mut factors = a.factors.clone();
    factors.extend(b.factors.iter().cloned());
    canonicalize_term(Term {
        coeff: a.coeff * b.coeff,
        factors,
    })
}

fn mul_polys(a: &[Term], b: &[Term]) -> Vec<Term> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for ta in a {
        for tb in b {
            out.push(mul_terms(ta, tb));
        }
    }
    collect(out)
}

/// Raise a single term to a constant power. Fractional powers assume positive
/// bases, which holds on the price/log-price domains this DSL serves.
fn pow_term(t: &Term, k: f64) -> Option<Term> {
    let coeff = t.coeff.powf(k);
    if !coeff.is_finite() {
        return None;
    }
    Some(canonicalize_term(Term {
        coeff,
        factors: t.factors.iter().map(|(b, e)| (b.clone(), e * k)).collect(),
    }))
}

fn normalize(e: &Expr) -> Vec<Term> {
    match e {
        Expr::Const(c) => vec![Term::constant(*c)],
        Expr::Var(_) => vec![Term {
            coeff: 1.0,
            factors: vec![(e.clone(), 1.0)],
        }],
        Expr::Add(a, b) => {
            let mut terms = normalize(a);
            terms.extend(normalize(b));
            collect(terms)
        }
        Expr::Sub(a, b) => {
            let mut terms = normalize(a);
            terms.extend(normalize(b).into_iter().map(|mut t| {
                t.coeff = -t.coeff;
                t
            }));
            collect(terms)
        }
        Expr::Mul(a, b) => mul_polys(&normalize(a), &normalize(b)),
        Expr::Div(a, b) => {
            let num = normalize(a);
            let den = normalize(b);
            if den.len() == 1 && den[0].coeff != 0.0 {
                if let Some(inv) = pow_term(&den[0], -1.0) {
                    return mul_polys(&num, &[inv]);
                }
            }
            // opaque denominator (multi-term sum, or zero): keep as a factor
            let den_expr = to_expr(&den);
            if matches!(den_expr, Expr::Const(c) if c == 0.0) {
                // division by literal zero survives so evaluation can report it
                return vec![Term {
                    coeff: 1.0,
                    factors: vec![(
                        Expr::Div(Box::new(to_expr(&num)), Box::new(den_expr)),
                        1.0,
                    )],
                }];
            }
            mul_polys(
                &num,
                &[Term {
                    coeff: 1.0,
                    factors: vec![(den_expr, -1.0)],
                }],
            )
        }
        Expr::Pow(base, exponent) => {
            let ex = normalize(exponent);
            let base_n = normalize(base);
            // constant exponent folds into monomial exponents
            if ex.len() == 1 && ex[0].factors.is_empty() {
                let k = ex[0].coeff;
                if k == 0.0 {
                    return vec![Term::constant(1.0)];
                }
                if k == 1.0 {
                    return base_n;
                }
                if base_n.is_empty() {
                    // 0^k
                    return if k > 0.0 {
                        Vec::new()
                    } else {
                        vec![Term {
                            coeff: 1.0,
                            factors: vec![(Expr::Const(0.0), k)],
                        }]
                    };
                }
                if base_n.len() == 1 {
                    if let Some(t) = pow_term(&base_n[0], k) {
                        return vec![t];
                    }
                }
                return vec![Term {
                    coeff: 1.0,
                    factors: vec![(to_expr(&base_n), k)],
                }];
            }
            if ex.is_empty() {
                return vec![Term::constant(1.0)];
            }
            vec![Term {
                coeff: 1.0,
                factors: vec![(
                    Expr::Pow(Box::new(to_expr(&base_n)), Box::new(to_expr(&ex))),
                    1.0,
                )],
            }]
        }
        Expr::Exp(a) => unary_fn(a, f64::exp, Expr::Exp),
        Expr::Ln(a) => {
            let inner = simplify_inner(a);
            if let Expr::Const(c) = inner {
                if c > 0.0 {
                    let v = c.ln();
                    if v.is_finite() {
                        return vec![Term::constant(v)];
                    }
                }
                // non-positive argument: keep symbolic, evaluation reports it
            }
            vec![Term {
                coeff: 1.0,
                factors: vec![(Expr::Ln(Box::new(inner)), 1.0)],
            }]
        }
        Expr::Sin(a) => unary_fn(a, f64::sin, Expr::Sin),
        Expr::Cos(a) => unary_fn(a, f64::cos, Expr::Cos),
        Expr::Max(a, b) => {
            let sa = simplify_inner(a);
            let sb = simplify_inner(b);
            if let (Expr::Const(ca), Expr::Const(cb)) = (&sa, &sb) {
                return vec![Term::constant(ca.max(*cb))];
            }
            vec![Term {
                coeff: 1.0,
                factors: vec![(Expr::Max(Box::new(sa), Box::new(sb)), 1.0)],
            }]
        }
    }
}

fn unary_fn(arg: &Expr, fold: fn(f64) -> f64, wrap: fn(Box<Expr>) -> Expr) -> Vec<Term> {
    let inner = simplify_inner(arg);
    if let Expr::Const(c) = inner {
        let v = fold(c);
        if v.is_finite() {
            return vec![Term::constant(v)];
        }
    }
    vec![Term {
        coeff: 1.0,
        factors: vec![(wrap(Box::new(inner)), 1.0)],
    }]
}

fn simplify_inner(e: &Expr) -> Expr {
    to_expr(&normalize(e))
}

fn factor_to_expr(base: &Expr, exp: f64) -> Expr {
    if exp == 1.0 {
        base.clone()
    } else {
        Expr::Pow(Box::new(base.clone()), Box::new(Expr::Const(exp)))
    }
}

/// Rebuild one term as a left-associated product with the coefficient first.
/// A coefficient of -1 becomes a leading `-1 *` factor, which the printer
/// renders as unary minus and the parser rebuilds identically.
fn term_to_expr(t: &Term) -> Expr {
    if t.factors.is_empty() {
        return Expr::Const(t.coeff);
    }
    let mut iter = t.factors.iter();
    let first = iter.next().unwrap();
    let mut acc = if t.coeff == 1.0 {
        factor_to_expr(&first.0, first.1)
    } else {
        Expr::Mul(
            Box::new(Expr::Const(t.coeff)),
            Box::new(factor_to_expr(&first.0, first.1)),
        )
    };
    for (base, exp) in iter {
        acc = Expr::Mul(Box::new(acc), Box::new(factor_to_expr(base, *exp)));
    }
    acc
}

fn negated(t: &Term) -> Term {
    Term {
        coeff: -t.coeff,
        factors: t.factors.clone(),
    }
}

fn to_expr(terms: &[Term]) -> Expr {
    if terms.is_empty() {
        return Expr::Const(0.0);
    }
    let mut iter = terms.iter();
    let mut acc = term_to_expr(iter.next().unwrap());
    for t in iter {
        if t.coeff < 0.0 {
            acc = Expr::Sub(Box::new(acc), Box::new(term_to_expr(&negated(t))));
        } else {
            acc = Expr::Add(Box::new(acc), Box::new(term_to_expr(t)));
        }
    }
    acc
}

/// Normalize to the canonical sum-of-products form. Idempotent; preserves
/// value everywhere the original expression is defined.
pub fn simplify(e: &Expr) -> Expr {
    to_expr(&collect(normalize(e)))
}
