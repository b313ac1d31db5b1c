//! Two-asset time-fractional Black-Scholes option pricing.
//!
//! The engine builds the price as a Mittag-Leffler-weighted series
//! `c(x, t) = sum_n g_n(x) t^{n*alpha} / Gamma(1 + n*alpha)` whose terms come
//! from the symbolic recursion `g_{n+1} = -L g_n` over a payoff-expression
//! DSL, where `L` is the spatial operator of the two-stock PDE in either
//! log-price or raw asset coordinates. An independent Caputo L1
//! finite-difference solver cross-validates the series on small instances,
//! and a numeric Sumudu-transform module verifies the transform identities
//! the construction rests on.

pub mod expr;
pub mod oracle;
pub mod pricing;
pub mod quad;
pub mod solver;
pub mod specfun;
pub mod sumudu;
