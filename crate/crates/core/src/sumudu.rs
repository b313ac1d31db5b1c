//! Numeric verification of the transform calculus behind the series method:
//! the Sumudu transform `S[f](w) = integral of f(w t) e^{-t} dt`, the Caputo
//! fractional derivative, the Riemann-Liouville fractional integral, and the
//! identity suite connecting them.
//!
//! This module is verification-only. The production solver uses the symbolic
//! recursion the transform derivation yields once; nothing here sits on the
//! pricing path. The transform variable is called `w` throughout to keep it
//! clearly apart from the log-price coordinate `u`.

use crate::quad::{integrate, QuadError};
use crate::specfun::{gamma, SpecFunError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SumuduError {
    #[error("growth bound violated: c*w = {0} must be < 1 for the transform integral to exist")]
    GrowthBound(f64),
    #[error("transform tail does not decay fast enough (c*w = {0} too close to 1)")]
    TailTooSlow(f64),
    #[error("alpha = {0} outside (0, 1)")]
    AlphaOutOfRange(f64),
    #[error("time argument must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

/// A real function of nonnegative time together with its declared exponential
/// growth bound `|f(t)| <= M e^{c t}`, which the transform needs to truncate
/// its integration range.
pub struct SampledFunction {
    f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub growth_m: f64,
    pub growth_c: f64,
}

impl SampledFunction {
    pub fn new<F>(f: F, growth_m: f64, growth_c: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        SampledFunction {
            f: Box::new(f),
            growth_m,
            growth_c,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.f)(t)
    }
}

/// `S[f](w) = integral over [0, inf) of f(w t) e^{-t} dt`, by adaptive
/// quadrature on [0, 40] plus numerically integrated 40-wide tail extensions
/// until the growth-bound tail estimate drops below 1e-12. Absolute error
/// target 1e-9 (scaled up with the declared growth constant M).
pub fn sumudu_transform(f: &SampledFunction, w: f64) -> Result<f64, SumuduError> {
    let tol = 1e-10 * (1.0 + f.growth_m.abs());
    sumudu_transform_with_tol(f, w, tol)
}

/// [`sumudu_transform`] with an explicit quadrature tolerance. Needed when
/// each evaluation of `f` is itself numeric (a Caputo derivative, say) and
/// carries noise the default tolerance would chase forever.
pub fn sumudu_transform_with_tol(
    f: &SampledFunction,
    w: f64,
    tol: f64,
) -> Result<f64, SumuduError> {
    let cw = f.growth_c * w;
    if cw >= 1.0 {
        return Err(SumuduError::GrowthBound(cw));
    }
    let integrand = |t: f64| f.value(w * t) * (-t).exp();
    let mut upper = 40.0;
    let mut total = integrate(&integrand, 0.0, upper, tol)?;
    // remaining tail after `upper` is bounded by M e^{(cw-1) upper} / (1-cw)
    let tail_bound = |t: f64| f.growth_m * ((cw - 1.0) * t).exp() / (1.0 - cw);
    while tail_bound(upper) > 1e-12 {
        if upper > 2000.0 {
            return Err(SumuduError::TailTooSlow(cw));
        }
        total += integrate(&integrand, upper, upper + 40.0, tol)?;
        upper += 40.0;
    }
    Ok(total)
}

/// Caputo derivative of order `alpha` in (0, 1):
/// `(1/Gamma(1-alpha)) * integral of f'(tau) (t-tau)^{-alpha} dtau`.
///
/// The weak endpoint singularity is absorbed exactly by the substitution
/// `tau = t (1 - s^{1/(1-alpha)})`, which turns the integral into
/// `t^{1-alpha}/Gamma(2-alpha) * integral over [0,1] of f'(tau(s)) ds` with a
/// bounded integrand. `f'` is a fourth-order finite-difference stencil
/// (one-sided near zero, where f is not defined for negative arguments).
pub fn caputo_derivative(f: &SampledFunction, alpha: f64, t: f64) -> Result<f64, SumuduError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SumuduError::AlphaOutOfRange(alpha));
    }
    if !(t > 0.0) {
        return Err(SumuduError::NonPositiveTime(t));
    }
    let p = 1.0 / (1.0 - alpha);
    let h = 1e-3 * t.min(1.0).max(1e-3);
    let df = |tau: f64| derivative5(f, tau, h);
    // tolerance scaled to the integrand so stencil noise cannot stall the
    // panel refinement; accuracy stays far inside the 1e-6 relative target
    let scale = df(t).abs().max(df(0.25 * t).abs()).max(1.0);
    let inner = integrate(&|s: f64| df(t * (1.0 - s.powf(p))), 0.0, 1.0, 1e-9 * scale)?;
    Ok(t.powf(1.0 - alpha) / gamma(2.0 - alpha)? * inner)
}

/// Riemann-Liouville fractional integral of order `alpha` in (0, 1]:
/// `(1/Gamma(alpha)) * integral of g(tau) (t-tau)^{alpha-1} dtau`, with the
/// same singularity-absorbing substitution (`tau = t (1 - s^{1/alpha})`).
pub fn fractional_integral(g: &SampledFunction, alpha: f64, t: f64) -> Result<f64, SumuduError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(SumuduError::AlphaOutOfRange(alpha));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    if !(t > 0.0) {
        return Err(SumuduError::NonPositiveTime(t));
    }
    let p = 1.0 / alpha;
    let scale = g.value(t).abs().max(g.value(0.5 * t).abs()).max(1.0);
    let inner = integrate(&|s: f64| g.value(t * (1.0 - s.powf(p))), 0.0, 1.0, 1e-9 * scale)?;
    Ok(t.powf(alpha) / gamma(1.0 + alpha)? * inner)
}

/// Fourth-order five-point derivative; switches to the one-sided stencil
/// close to t = 0 so the callback is never probed at negative times.
fn derivative5(f: &SampledFunction, t: f64, h: f64) -> f64 {
    if t >= 2.0 * h {
        (f.value(t - 2.0 * h) - 8.0 * f.value(t - h) + 8.0 * f.value(t + h)
            - f.value(t + 2.0 * h))
            / (12.0 * h)
    } else {
        (-25.0 * f.value(t) + 48.0 * f.value(t + h) - 36.0 * f.value(t + 2.0 * h)
            + 16.0 * f.value(t + 3.0 * h)
            - 3.0 * f.value(t + 4.0 * h))
            / (12.0 * h)
    }
}

/// One row of the identity suite.
#[derive(Debug, Clone)]
pub struct IdentityCheck {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
}

impl IdentityCheck {
    pub fn deviation(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }

    pub fn passed(&self) -> bool {
        self.deviation() <= self.tolerance
    }
}

const IDENTITY_TOL: f64 = 1e-5;

/// The transform-identity suite: `S[t^n] = n! w^n` for n <= 3,
/// `S[D^alpha f] = w^{-alpha} (S[f] - f(0))` for f in {t, t^2, e^{0.3 t}},
/// and `S[I^alpha g] = w^alpha S[g]` for g = t^n, n <= 3, each over
/// alpha in {0.3, 0.5, 0.8} and w in {0.1, 0.25, 0.5}.
pub fn identity_suite() -> Result<Vec<IdentityCheck>, SumuduError> {
    let ws = [0.1, 0.25, 0.5];
    let alphas = [0.3, 0.5, 0.8];
    let mut checks = Vec::new();

    let monomial = |n: u32| {
        SampledFunction::new(move |t: f64| t.powi(n as i32), {
            // |t^n| <= n! e^t on t >= 0
            (1..=n).map(f64::from).product::<f64>().max(1.0)
        }, 1.0)
    };
    let factorial = |n: u32| (1..=n).map(f64::from).product::<f64>().max(1.0);

    for n in 0..=3u32 {
        for &w in &ws {
            let lhs = sumudu_transform(&monomial(n), w)?;
            let rhs = factorial(n) * w.powi(n as i32);
            checks.push(IdentityCheck {
                label: format!("S[t^{n}](w={w}) = {n}! w^{n}"),
                lhs,
                rhs,
                tolerance: IDENTITY_TOL,
            });
        }
    }

    struct TestFn {
        name: &'static str,
        make: fn() -> SampledFunction,
        at_zero: f64,
    }
    let fns = [
        TestFn {
            name: "t",
            make: || SampledFunction::new(|t: f64| t, 1.0, 1.0),
            at_zero: 0.0,
        },
        TestFn {
            name: "t^2",
            make: || SampledFunction::new(|t: f64| t * t, 2.0, 1.0),
            at_zero: 0.0,
        },
        TestFn {
            name: "e^{0.3t}",
            make: || SampledFunction::new(|t: f64| (0.3 * t).exp(), 1.0, 0.3),
            at_zero: 1.0,
        },
    ];

    for tf in &fns {
        for &alpha in &alphas {
            for &w in &ws {
                let f = (tf.make)();
                let growth_c = f.growth_c;
                let f_for_caputo = (tf.make)();
                // D^alpha f of a function with growth rate c keeps rate c
                let df = SampledFunction::new(
                    move |t: f64| {
                        if t <= 0.0 {
                            0.0
                        } else {
                            caputo_derivative(&f_for_caputo, alpha, t).unwrap_or(f64::NAN)
                        }
                    },
                    10.0,
                    growth_c,
                );
                let lhs = sumudu_transform_with_tol(&df, w, 3e-8)?;
                let rhs = w.powf(-alpha) * (sumudu_transform(&f, w)? - tf.at_zero);
                checks.push(IdentityCheck {
                    label: format!(
                        "S[D^{alpha} {}](w={w}) = w^-{alpha} (S[{}] - f(0))",
                        tf.name, tf.name
                    ),
                    lhs,
                    rhs,
                    tolerance: IDENTITY_TOL,
                });
            }
        }
    }

    for n in 0..=3u32 {
        for &alpha in &alphas {
            for &w in &ws {
                let g = monomial(n);
                let ig = SampledFunction::new(
                    move |t: f64| {
                        let g_inner = SampledFunction::new(
                            move |s: f64| s.powi(n as i32),
                            1.0,
                            1.0,
                        );
                        fractional_integral(&g_inner, alpha, t).unwrap_or(f64::NAN)
                    },
                    10.0,
                    1.0,
                );
                let lhs = sumudu_transform_with_tol(&ig, w, 3e-8)?;
                let rhs = w.powf(alpha) * sumudu_transform(&g, w)?;
                checks.push(IdentityCheck {
                    label: format!("S[I^{alpha} t^{n}](w={w}) = w^{alpha} S[t^{n}]"),
                    lhs,
                    rhs,
                    tolerance: IDENTITY_TOL,
                });
            }
        }
    }

    Ok(checks)
}
