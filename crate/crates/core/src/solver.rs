//! The series method: spatial operator of the two-stock PDE, the recursion
//! `g_{n+1} = -L g_n`, series assembly with Mittag-Leffler weights, and the
//! log-price change of variables.
//!
//! Two operator modes exist because the worked examples visibly iterate in
//! different coordinates. In log mode the operator acts on `(u, v)`:
//!
//! ```text
//! L g = (s1^2/2) g_uu + (s2^2/2) g_vv + rho s1 s2 g_uv - r g
//! ```
//!
//! In asset mode it acts on raw prices `(s1, s2)`:
//!
//! ```text
//! L g = (sig1^2/2) s1^2 g_11 + (sig2^2/2) s2^2 g_22
//!     + rho sig1 sig2 s1 s2 g_12 + r s1 g_1 + r s2 g_2 - r g
//! ```

use crate::expr::{differentiate, simplify, DiffError, EvalError, Expr, Var, VarEnv};
use crate::specfun::{gamma, SpecFunError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which coordinates the spatial operator differentiates in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceMode {
    Log,
    Asset,
}

impl SpaceMode {
    /// The variable pair expressions must use in this mode.
    pub fn vars(self) -> (Var, Var) {
        match self {
            SpaceMode::Log => (Var::U, Var::V),
            SpaceMode::Asset => (Var::S1, Var::S2),
        }
    }
}

/// Model parameters of the two-stock PDE. Volatilities and the risk-free
/// rate are annualized; `maturity` is in years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub sigma1: f64,
    pub sigma2: f64,
    pub r: f64,
    pub rho: f64,
    pub alpha: f64,
    pub w1: f64,
    pub w2: f64,
    pub strike: f64,
    pub maturity: f64,
    pub space_mode: SpaceMode,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("volatilities must be nonnegative (sigma1 = {0}, sigma2 = {1})")]
    NegativeVolatility(f64, f64),
    #[error("correlation must satisfy |rho| <= 1, got {0}")]
    CorrelationOutOfRange(f64),
    #[error("fractional order must satisfy 0 < alpha <= 1, got {0}")]
    AlphaOutOfRange(f64),
    #[error("maturity must be positive, got {0}")]
    NonPositiveMaturity(f64),
    #[error("strike must be nonnegative, got {0}")]
    NegativeStrike(f64),
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if self.sigma1 < 0.0 || self.sigma2 < 0.0 {
            return Err(ParamError::NegativeVolatility(self.sigma1, self.sigma2));
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(ParamError::CorrelationOutOfRange(self.rho));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ParamError::AlphaOutOfRange(self.alpha));
        }
        if !(self.maturity > 0.0) {
            return Err(ParamError::NonPositiveMaturity(self.maturity));
        }
        if self.strike < 0.0 {
            return Err(ParamError::NegativeStrike(self.strike));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("prices must be positive for the log-space map, got s1 = {0}, s2 = {1}")]
    NonPositivePrice(f64, f64),
    #[error("expression uses variable `{found}` but {mode:?} mode expects {expected}")]
    VariableMismatch {
        found: Var,
        mode: SpaceMode,
        expected: String,
    },
    #[error("series seed must be max-free; call strip_max first")]
    MaxInSeed,
    #[error(
        "expression growth guard tripped at term {term}: {nodes} nodes exceeds the {limit} limit"
    )]
    ExpressionGrowth {
        term: usize,
        nodes: usize,
        limit: usize,
    },
    #[error("series needs at least one recursion step (N >= 1), got {0}")]
    TooFewTerms(usize),
    #[error("series truncation order {0} exceeds the supported maximum {1}")]
    TooManyTerms(usize, usize),
    #[error("domain box is not bounded or has zero extent")]
    BadDomainBox,
    #[error("negative evaluation time {0}")]
    NegativeTime(f64),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

/// Node budget per simplified series term.
pub const GROWTH_GUARD_NODES: usize = 20_000;

/// Highest supported truncation order; keeps `t^{N alpha}/Gamma(1 + N alpha)`
/// representable for the admissible alpha range.
pub const MAX_TERMS: usize = 150;

/// `u = ln s1 - (r - sigma1^2/2) t`, `v = ln s2 - (r - sigma2^2/2) t`.
/// Both coordinates carry the minus sign; the drift convention is symmetric
/// in the two assets.
pub fn to_log_space(
    s1: f64,
    s2: f64,
    t: f64,
    p: &ModelParams,
) -> Result<(f64, f64), SolverError> {
    if !(s1 > 0.0 && s2 > 0.0) {
        return Err(SolverError::NonPositivePrice(s1, s2));
    }
    let u = s1.ln() - (p.r - 0.5 * p.sigma1 * p.sigma1) * t;
    let v = s2.ln() - (p.r - 0.5 * p.sigma2 * p.sigma2) * t;
    Ok((u, v))
}

/// Exact inverse of [`to_log_space`].
pub fn from_log_space(u: f64, v: f64, t: f64, p: &ModelParams) -> (f64, f64) {
    let s1 = (u + (p.r - 0.5 * p.sigma1 * p.sigma1) * t).exp();
    let s2 = (v + (p.r - 0.5 * p.sigma2 * p.sigma2) * t).exp();
    (s1, s2)
}

fn check_vars(g: &Expr, mode: SpaceMode) -> Result<(), SolverError> {
    let (a, b) = mode.vars();
    for v in g.variables() {
        if v != a && v != b {
            return Err(SolverError::VariableMismatch {
                found: v,
                mode,
                expected: format!("{{{a}, {b}}}"),
            });
        }
    }
    Ok(())
}

/// The spatial operator `L` applied to `g`, simplified.
pub fn spatial_operator(g: &Expr, p: &ModelParams) -> Result<Expr, SolverError> {
    check_vars(g, p.space_mode)?;
    if g.contains_max() {
        return Err(SolverError::MaxInSeed);
    }
    let half_s1 = 0.5 * p.sigma1 * p.sigma1;
    let half_s2 = 0.5 * p.sigma2 * p.sigma2;
    let cross = p.rho * p.sigma1 * p.sigma2;
    let result = match p.space_mode {
        SpaceMode::Log => {
            let guu = differentiate(&differentiate(g, Var::U)?, Var::U)?;
            let gvv = differentiate(&differentiate(g, Var::V)?, Var::V)?;
            let guv = differentiate(&differentiate(g, Var::U)?, Var::V)?;
            Expr::num(half_s1) * guu
                + Expr::num(half_s2) * gvv
                + Expr::num(cross) * guv
                - Expr::num(p.r) * g.clone()
        }
        SpaceMode::Asset => {
            let g1 = differentiate(g, Var::S1)?;
            let g2 = differentiate(g, Var::S2)?;
            let g11 = differentiate(&g1, Var::S1)?;
            let g22 = differentiate(&g2, Var::S2)?;
            let g12 = differentiate(&g1, Var::S2)?;
            let s1 = Expr::var(Var::S1);
            let s2 = Expr::var(Var::S2);
            Expr::num(half_s1) * s1.clone() * s1.clone() * g11
                + Expr::num(half_s2) * s2.clone() * s2.clone() * g22
                + Expr::num(cross) * s1.clone() * s2.clone() * g12
                + Expr::num(p.r) * s1 * g1
                + Expr::num(p.r) * s2 * g2
                - Expr::num(p.r) * g.clone()
        }
    };
    Ok(simplify(&result))
}

/// One recursion step: `g_{n+1} = simplify(-L g_n)`.
pub fn next_term(g_n: &Expr, p: &ModelParams) -> Result<Expr, SolverError> {
    let l = spatial_operator(g_n, p)?;
    Ok(simplify(&(Expr::num(-1.0) * l)))
}

/// Recursion step with a constant-in-time source term, mirroring the general
/// construction `g_{n+1} = f - L g_n`. Extension point only: no scenario or
/// test exercises a nonzero source, and the series weights assume the
/// homogeneous recursion.
pub fn next_term_with_source(
    g_n: &Expr,
    source: Option<&Expr>,
    p: &ModelParams,
) -> Result<Expr, SolverError> {
    let base = next_term(g_n, p)?;
    match source {
        Some(f) => Ok(simplify(&(f.clone() + base))),
        None => Ok(base),
    }
}

/// Rectangular evaluation box in solution coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub first: (f64, f64),
    pub second: (f64, f64),
}

impl DomainBox {
    pub fn new(first: (f64, f64), second: (f64, f64)) -> Self {
        DomainBox { first, second }
    }

    fn is_valid(&self) -> bool {
        self.first.0.is_finite()
            && self.first.1.is_finite()
            && self.second.0.is_finite()
            && self.second.1.is_finite()
            && self.first.1 >= self.first.0
            && self.second.1 >= self.second.0
    }
}

/// Truncation bookkeeping: order, sup-norm box, and the sampled sup of the
/// last retained term.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationMeta {
    pub order: usize,
    pub domain: DomainBox,
    pub sup_last_term: f64,
}

/// A built series `g_0 .. g_N` with its fractional order and evaluation
/// metadata. Immutable after construction; evaluation is pure.
#[derive(Debug, Clone)]
pub struct SeriesSolution {
    pub alpha: f64,
    pub terms: Vec<Expr>,
    pub space_mode: SpaceMode,
    pub vars: (Var, Var),
    pub meta: TruncationMeta,
}

const SUP_SAMPLES: usize = 33;

/// Build `[g_0, g_1, ..., g_N]` by repeated [`next_term`]. The tail metadata
/// records `sup_box |g_N|` estimated on a 33x33 sample of `domain`.
pub fn build_series(
    g0: &Expr,
    p: &ModelParams,
    n_terms: usize,
    domain: DomainBox,
) -> Result<SeriesSolution, SolverError> {
    p.validate()?;
    if n_terms < 1 {
        return Err(SolverError::TooFewTerms(n_terms));
    }
    if n_terms > MAX_TERMS {
        return Err(SolverError::TooManyTerms(n_terms, MAX_TERMS));
    }
    if !domain.is_valid() {
        return Err(SolverError::BadDomainBox);
    }
    if g0.contains_max() {
        return Err(SolverError::MaxInSeed);
    }
    check_vars(g0, p.space_mode)?;

    let mut terms = Vec::with_capacity(n_terms + 1);
    terms.push(simplify(g0));
    for k in 1..=n_terms {
        let next = next_term(terms.last().unwrap(), p)?;
        let nodes = next.node_count();
        if nodes > GROWTH_GUARD_NODES {
            return Err(SolverError::ExpressionGrowth {
                term: k,
                nodes,
                limit: GROWTH_GUARD_NODES,
            });
        }
        terms.push(next);
    }

    let sup_last_term = sup_on_box(terms.last().unwrap(), p.space_mode, &domain)?;
    Ok(SeriesSolution {
        alpha: p.alpha,
        terms,
        space_mode: p.space_mode,
        vars: p.space_mode.vars(),
        meta: TruncationMeta {
            order: n_terms,
            domain,
            sup_last_term,
        },
    })
}

fn sup_on_box(e: &Expr, mode: SpaceMode, domain: &DomainBox) -> Result<f64, SolverError> {
    let (va, vb) = mode.vars();
    let mut sup = 0.0f64;
    for i in 0..SUP_SAMPLES {
        let fa = i as f64 / (SUP_SAMPLES - 1) as f64;
        let a = domain.first.0 + fa * (domain.first.1 - domain.first.0);
        for j in 0..SUP_SAMPLES {
            let fb = j as f64 / (SUP_SAMPLES - 1) as f64;
            let b = domain.second.0 + fb * (domain.second.1 - domain.second.0);
            let mut env = VarEnv::new();
            env.bind(va, a);
            env.bind(vb, b);
            let val = e.eval(&env)?;
            sup = sup.max(val.abs());
        }
    }
    Ok(sup)
}

/// `t^{n alpha} / Gamma(1 + n alpha)`. With alpha exactly 1 this is
/// `t^n / n!` computed from the factorial directly.
pub fn series_weight(alpha: f64, n: usize, t: f64) -> Result<f64, SolverError> {
    if n == 0 {
        return Ok(1.0);
    }
    if alpha == 1.0 {
        let mut fact = 1.0f64;
        for k in 1..=n {
            fact *= k as f64;
        }
        return Ok(t.powi(n as i32) / fact);
    }
    Ok(t.powf(n as f64 * alpha) / gamma(1.0 + n as f64 * alpha)?)
}

impl SeriesSolution {
    /// Compensated evaluation of `sum_n g_n(point) t^{n alpha} / Gamma(1 + n alpha)`.
    pub fn eval(&self, point: (f64, f64), t: f64) -> Result<f64, SolverError> {
        if t < 0.0 {
            return Err(SolverError::NegativeTime(t));
        }
        let mut env = VarEnv::new();
        env.bind(self.vars.0, point.0);
        env.bind(self.vars.1, point.1);
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for (n, g) in self.terms.iter().enumerate() {
            let term = g.eval(&env)? * series_weight(self.alpha, n, t)?;
            let y = term - comp;
            let tt = sum + y;
            comp = (tt - sum) - y;
            sum = tt;
        }
        Ok(sum)
    }

    /// Sup-norm bound on the first omitted contribution:
    /// `sup_box |g_N| * t^{N alpha} / Gamma(1 + N alpha)`.
    pub fn truncation_estimate(&self, t: f64) -> Result<f64, SolverError> {
        if t < 0.0 {
            return Err(SolverError::NegativeTime(t));
        }
        Ok(self.meta.sup_last_term * series_weight(self.alpha, self.meta.order, t)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::specfun::mittag_leffler;

    fn example_one_params(mode: SpaceMode) -> ModelParams {
        ModelParams {
            sigma1: 0.4,
            sigma2: 0.25,
            r: 0.08,
            rho: 0.75,
            alpha: 0.5,
            w1: 2.0,
            w2: 2.0,
            strike: 80.0,
            maturity: 8.0 / 12.0,
            space_mode: mode,
        }
    }

    fn unit_box() -> DomainBox {
        DomainBox::new((-1.0, 1.0), (-1.0, 1.0))
    }

    /// If `e` is a scalar multiple of `base`, return the scalar.
    fn scalar_multiple_of(e: &Expr, base: &Expr) -> Option<f64> {
        if e == base {
            return Some(1.0);
        }
        if let Expr::Const(c) = e {
            if *c == 0.0 {
                return Some(0.0);
            }
        }
        if let Expr::Mul(a, b) = e {
            if let (Expr::Const(c), rest) = (&**a, &**b) {
                if rest == base {
                    return Some(*c);
                }
            }
        }
        None
    }

    #[test]
    fn log_space_map_examples() {
        let mut p = example_one_params(SpaceMode::Log);
        let (u, _) = to_log_space(1.0, 1.0, 0.0, &p).unwrap();
        assert_eq!(u, 0.0);

        // zero drift: r = sigma1^2/2 makes u = ln s1 for every t
        p.r = 0.08;
        p.sigma1 = 0.4;
        let (u, _) = to_log_space(std::f64::consts::E, 1.0, 3.7, &p).unwrap();
        assert!((u - 1.0).abs() < 1e-15);

        let (u, _) = to_log_space(100.0, 1.0, 0.5, &p).unwrap();
        assert!((u - 4.605_170_185_988_092).abs() < 1e-9);

        assert!(matches!(
            to_log_space(-1.0, 1.0, 0.0, &p),
            Err(SolverError::NonPositivePrice(_, _))
        ));
    }

    #[test]
    fn log_space_round_trip() {
        let p = example_one_params(SpaceMode::Log);
        for (s1, s2, t) in [(20.0, 50.0, 0.0), (100.0, 180.0, 0.66), (1.5, 0.3, 2.0)] {
            let (u, v) = to_log_space(s1, s2, t, &p).unwrap();
            let (r1, r2) = from_log_space(u, v, t, &p);
            assert!((r1 - s1).abs() < 1e-12 * s1);
            assert!((r2 - s2).abs() < 1e-12 * s2);
        }
    }

    #[test]
    fn operator_on_constant_in_log_mode() {
        let p = example_one_params(SpaceMode::Log);
        let g = Expr::num(5.0);
        let lg = spatial_operator(&g, &p).unwrap();
        assert_eq!(lg, Expr::num(-0.4)); // -r * c0 = -0.08 * 5
    }

    #[test]
    fn operator_on_exponential_is_eigen() {
        let p = example_one_params(SpaceMode::Log);
        let g = simplify(&parse_expr("exp(0.5*u + 0.25*v)").unwrap());
        let lg = spatial_operator(&g, &p).unwrap();
        // ((s1^2/2) a^2 + (s2^2/2) b^2 + rho s1 s2 a b - r) e^{au+bv}
        let coef = 0.08 * 0.25 + 0.03125 * 0.0625 + 0.075 * 0.125 - 0.08;
        let got = scalar_multiple_of(&lg, &g).expect("operator should preserve the exponential");
        assert!((got - coef).abs() <= 1e-15, "coefficient {got} vs {coef}");
    }

    #[test]
    fn operator_on_cubic_in_asset_mode() {
        let mut p = example_one_params(SpaceMode::Asset);
        p.sigma1 = 0.4;
        p.r = 0.07;
        let g = parse_expr("s1^3").unwrap();
        let lg = spatial_operator(&g, &p).unwrap();
        // (sig1^2/2)*6*s1^3 + r*3*s1^3 - r*s1^3 = (3 sig1^2 + 2 r) s1^3
        let want = 3.0 * 0.16 + 2.0 * 0.07;
        let got = scalar_multiple_of(&lg, &simplify(&g)).expect("cubic should stay a monomial");
        assert!(
            (got - want).abs() <= 1e-14,
            "coefficient {got} vs 0.62 expected"
        );
    }

    #[test]
    fn operator_rejects_wrong_variables() {
        let p = example_one_params(SpaceMode::Log);
        let g = parse_expr("s1 + s2").unwrap();
        assert!(matches!(
            spatial_operator(&g, &p),
            Err(SolverError::VariableMismatch { .. })
        ));
    }

    #[test]
    fn next_term_of_constant() {
        let p = example_one_params(SpaceMode::Log);
        let g1 = next_term(&Expr::num(-80.0), &p).unwrap();
        assert_eq!(g1, Expr::num(-6.4));
    }

    #[test]
    fn next_term_zero_eigenvalue() {
        // r - sigma1^2/2 = 0 in exact arithmetic; floating evaluation leaves
        // at most rounding dust in the coefficient
        let p = example_one_params(SpaceMode::Log);
        let g = simplify(&parse_expr("exp(u)").unwrap());
        let g1 = next_term(&g, &p).unwrap();
        let coef = scalar_multiple_of(&g1, &g).expect("e^u should stay an eigenfunction");
        assert!(coef.abs() < 1e-16, "eigenvalue should vanish, got {coef}");
    }

    #[test]
    fn next_term_null_operator() {
        let mut p = example_one_params(SpaceMode::Log);
        p.sigma1 = 0.0;
        p.sigma2 = 0.0;
        p.r = 0.0;
        for text in ["exp(u) + exp(v)", "u^2*v", "sin(u)"] {
            let g1 = next_term(&parse_expr(text).unwrap(), &p).unwrap();
            assert_eq!(g1, Expr::num(0.0), "operator not null on {text}");
        }
    }

    #[test]
    fn series_of_constant_payoff() {
        let mut p = example_one_params(SpaceMode::Log);
        p.alpha = 1.0;
        let s = build_series(&Expr::num(-80.0), &p, 3, unit_box()).unwrap();
        let expect = [-80.0, -6.4, -0.512, -0.04096];
        assert_eq!(s.terms.len(), 4);
        for (term, want) in s.terms.iter().zip(expect) {
            let got = match term {
                Expr::Const(c) => *c,
                other => panic!("expected constant term, got {other}"),
            };
            assert!((got - want).abs() < 1e-12 * want.abs().max(1.0));
        }
    }

    #[test]
    fn series_null_operator_zeroes_tail() {
        let mut p = example_one_params(SpaceMode::Log);
        p.sigma1 = 0.0;
        p.sigma2 = 0.0;
        p.r = 0.0;
        let g0 = parse_expr("exp(u) + 3*v").unwrap();
        let s = build_series(&g0, &p, 5, unit_box()).unwrap();
        assert_eq!(s.terms.len(), 6);
        for term in &s.terms[1..] {
            assert_eq!(*term, Expr::num(0.0));
        }
    }

    #[test]
    fn series_shared_eigenvalue() {
        let mut p = example_one_params(SpaceMode::Log);
        p.sigma1 = 0.2;
        p.sigma2 = 0.2;
        p.r = 0.1;
        let g0 = parse_expr("exp(u) + exp(v)").unwrap();
        let s = build_series(&g0, &p, 2, unit_box()).unwrap();
        // g_n = 0.08^n (e^u + e^v): check pointwise, floating coefficient
        // arithmetic differs from powi at the last ulp
        let mut env = VarEnv::new();
        env.bind(Var::U, 0.3);
        env.bind(Var::V, -0.8);
        let base = g0.eval(&env).unwrap();
        for (n, term) in s.terms.iter().enumerate() {
            let got = term.eval(&env).unwrap();
            let want = 0.08f64.powi(n as i32) * base;
            assert!(
                (got - want).abs() <= 1e-13 * want.abs(),
                "term {n}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn eval_at_time_zero_is_seed() {
        let p = example_one_params(SpaceMode::Log);
        let g0 = parse_expr("exp(u) + 2*exp(v) - 80").unwrap();
        let s = build_series(&g0, &p, 10, unit_box()).unwrap();
        let point = (0.3, -0.2);
        // at t = 0 only the stored (simplified) seed contributes, exactly
        let direct = {
            let mut env = VarEnv::new();
            env.bind(Var::U, point.0);
            env.bind(Var::V, point.1);
            s.terms[0].eval(&env).unwrap()
        };
        assert_eq!(s.eval(point, 0.0).unwrap(), direct);
    }

    #[test]
    fn classical_limit_constant_growth() {
        let mut p = example_one_params(SpaceMode::Log);
        p.alpha = 1.0;
        p.r = 0.08;
        let s = build_series(&Expr::num(100.0), &p, 14, unit_box()).unwrap();
        let v = s.eval((0.0, 0.0), 1.0).unwrap();
        assert!((v - 108.328_706_767_495_85).abs() < 1e-6, "got {v}");
    }

    #[test]
    fn zero_eigenvalue_series_is_time_constant() {
        let p = example_one_params(SpaceMode::Log);
        let s = build_series(&parse_expr("exp(u)").unwrap(), &p, 8, unit_box()).unwrap();
        for t in [0.0, 0.1, 0.5, 1.0] {
            let v = s.eval((0.7, 0.0), t).unwrap();
            assert!((v - 0.7f64.exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_estimate_examples() {
        let mut p = example_one_params(SpaceMode::Log);
        p.alpha = 1.0;

        // zero last term gives a zero bound
        let mut null = p.clone();
        null.sigma1 = 0.0;
        null.sigma2 = 0.0;
        null.r = 0.0;
        let s = build_series(&parse_expr("exp(u)").unwrap(), &null, 4, unit_box()).unwrap();
        assert_eq!(s.truncation_estimate(0.5).unwrap(), 0.0);

        // constant payoff -K: bound is K (r t)^N / N!
        let n = 6;
        let s = build_series(&Expr::num(-80.0), &p, n, unit_box()).unwrap();
        let t = 0.7;
        let expect = 80.0 * (p.r * t).powi(n as i32) / 720.0;
        let got = s.truncation_estimate(t).unwrap();
        assert!((got - expect).abs() < 1e-12 * expect.max(1.0), "got {got}");

        // t = 0 gives zero for N >= 1
        assert_eq!(s.truncation_estimate(0.0).unwrap(), 0.0);
    }

    #[test]
    fn eigenfunction_series_matches_mittag_leffler() {
        let p = example_one_params(SpaceMode::Log);
        for (a, b) in [(0.0, 0.5), (0.5, 0.5), (1.0, -0.5), (1.0, 1.0)] {
            for alpha in [0.25, 0.5, 0.75, 1.0] {
                let mut pp = p.clone();
                pp.alpha = alpha;
                let g0 = simplify(
                    &Expr::exp_of(
                        Expr::num(a) * Expr::var(Var::U) + Expr::num(b) * Expr::var(Var::V),
                    ),
                );
                let lambda = pp.r
                    - 0.5 * pp.sigma1 * pp.sigma1 * a * a
                    - 0.5 * pp.sigma2 * pp.sigma2 * b * b
                    - pp.rho * pp.sigma1 * pp.sigma2 * a * b;
                let s = build_series(&g0, &pp, 40, unit_box()).unwrap();
                for (u, v, t) in [(0.2, -0.4, 0.3), (-0.9, 0.8, 1.0)] {
                    let got = s.eval((u, v), t).unwrap();
                    let ml = mittag_leffler(alpha, lambda * t.powf(alpha)).unwrap().value;
                    let want = (a * u + b * v).exp() * ml;
                    assert!(
                        (got - want).abs() <= 1e-9 * want.abs().max(1.0),
                        "a={a} b={b} alpha={alpha}: got {got}, want {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn series_is_linear_in_seed() {
        let p = example_one_params(SpaceMode::Log);
        let f = parse_expr("exp(u)").unwrap();
        let g = parse_expr("exp(0.5*u + 0.5*v)").unwrap();
        let (a, b) = (2.5, -1.25);
        let combo = simplify(&(Expr::num(a) * f.clone() + Expr::num(b) * g.clone()));
        let s_f = build_series(&f, &p, 15, unit_box()).unwrap();
        let s_g = build_series(&g, &p, 15, unit_box()).unwrap();
        let s_c = build_series(&combo, &p, 15, unit_box()).unwrap();
        for (pt, t) in [((0.3, 0.4), 0.5), ((-0.5, 0.9), 1.0)] {
            let lhs = s_c.eval(pt, t).unwrap();
            let rhs = a * s_f.eval(pt, t).unwrap() + b * s_g.eval(pt, t).unwrap();
            assert!(
                (lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0),
                "linearity broke at {pt:?}, t={t}"
            );
        }
    }

    #[test]
    fn small_time_continuity() {
        let p = example_one_params(SpaceMode::Log);
        let g0 = parse_expr("exp(u) + 2*exp(v) - 80").unwrap();
        let s = build_series(&g0, &p, 12, unit_box()).unwrap();
        let one_term = build_series(&g0, &p, 1, unit_box()).unwrap();
        let pt = (0.2, 0.1);
        let mut env = VarEnv::new();
        env.bind(Var::U, pt.0);
        env.bind(Var::V, pt.1);
        let seed = g0.eval(&env).unwrap();
        for t in [1e-3, 1e-2, 0.05] {
            let diff = (s.eval(pt, t).unwrap() - seed).abs();
            let bound = 2.0 * one_term.truncation_estimate(t).unwrap();
            assert!(diff <= bound, "t={t}: |c(t)-g0| = {diff} > 2*tail = {bound}");
        }
    }

    #[test]
    fn alpha_one_matches_ode_integration() {
        // classical limit: coefficients of eigen-atoms satisfy dc/dt = lambda c;
        // integrate with RK4 at fine steps and compare the assembled solution
        let mut p = example_one_params(SpaceMode::Log);
        p.alpha = 1.0;
        let atoms = [
            (parse_expr("exp(u)").unwrap(), 1.0, 0.0),
            (parse_expr("exp(v)").unwrap(), 0.0, 1.0),
        ];
        let g0 = simplify(&(atoms[0].0.clone() + atoms[1].0.clone()));
        let s = build_series(&g0, &p, 30, unit_box()).unwrap();
        let lambda = |a: f64, b: f64| {
            p.r - 0.5 * p.sigma1 * p.sigma1 * a * a
                - 0.5 * p.sigma2 * p.sigma2 * b * b
                - p.rho * p.sigma1 * p.sigma2 * a * b
        };
        let rk4 = |lam: f64, t: f64| {
            let n = 2000;
            let h = t / n as f64;
            let mut y = 1.0f64;
            for _ in 0..n {
                let k1 = lam * y;
                let k2 = lam * (y + 0.5 * h * k1);
                let k3 = lam * (y + 0.5 * h * k2);
                let k4 = lam * (y + h * k3);
                y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            y
        };
        let (u, v, t): (f64, f64, f64) = (0.4, -0.3, 1.0);
        let want = u.exp() * rk4(lambda(1.0, 0.0), t) + v.exp() * rk4(lambda(0.0, 1.0), t);
        let got = s.eval((u, v), t).unwrap();
        assert!(
            (got - want).abs() <= 1e-8 * want.abs(),
            "got {got}, ode {want}"
        );
    }

    #[test]
    fn linear_payoff_produces_constant_terms_in_asset_mode() {
        let mut p = example_one_params(SpaceMode::Asset);
        p.alpha = 1.0;
        let g0 = parse_expr("2*s1 + 2*s2 - 80").unwrap();
        let s = build_series(&g0, &p, 5, DomainBox::new((20.0, 150.0), (50.0, 200.0))).unwrap();
        // L(s_i) = r s_i - r s_i = 0, so only the constant evolves: g_n = -K r^n
        let mut expect = -80.0;
        for n in 1..=5 {
            expect *= p.r;
            match &s.terms[n] {
                Expr::Const(c) => {
                    assert!((c - expect).abs() <= 1e-12 * expect.abs());
                }
                other => panic!("g_{n} should be a bare constant, got {other}"),
            }
        }
    }

    #[test]
    fn growth_guard_trips_on_exploding_seed() {
        let p = example_one_params(SpaceMode::Asset);
        // sin(s1) under the asset operator grows polynomial envelopes every
        // step; a tight guard cannot absorb 40 iterations
        let g0 = parse_expr("sin(s1)*sin(s2)").unwrap();
        let result = build_series(&g0, &p, 40, DomainBox::new((1.0, 2.0), (1.0, 2.0)));
        match result {
            Err(SolverError::ExpressionGrowth { .. }) => {}
            Err(other) => panic!("expected growth guard, got {other}"),
            Ok(s) => {
                // guard not tripped: terms must at least have stayed bounded
                assert!(s.terms.last().unwrap().node_count() <= GROWTH_GUARD_NODES);
            }
        }
    }

    #[test]
    fn validate_rejects_bad_params() {
        let mut p = example_one_params(SpaceMode::Log);
        p.alpha = 1.5;
        assert!(matches!(p.validate(), Err(ParamError::AlphaOutOfRange(_))));
        let mut p = example_one_params(SpaceMode::Log);
        p.rho = -1.2;
        assert!(matches!(
            p.validate(),
            Err(ParamError::CorrelationOutOfRange(_))
        ));
    }
}
