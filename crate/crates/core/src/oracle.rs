//! Independent numerical ground truth: a Caputo L1 finite-difference solver
//! for the log-space PDE, used to cross-validate the series method on small
//! instances.
//!
//! The marching direction follows the series construction, which makes the
//! continuous problem backward-parabolic: high-frequency content grows like
//! `E_alpha(mu t^alpha)` with `mu ~ sigma^2 k^2 / 2`. Interior comparisons
//! are therefore meaningful only over short horizons relative to the grid's
//! resolvable frequencies; the validation suites pin such horizons
//! explicitly. The solver itself is a plain L1 scheme: second-order central
//! differences, implicit diffusion and reaction (one banded solve per step,
//! factored once), and the mixed derivative on the standard four-point
//! stencil, explicit by default or folded into the matrix when requested.

use crate::expr::{EvalError, Expr, VarEnv};
use crate::solver::{ModelParams, ParamError, SpaceMode};
use crate::specfun::{gamma, SpecFunError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("alpha must lie in (0, 1], got {0}")]
    AlphaOutOfRange(f64),
    #[error("the oracle integrates the log-space equation; params must use SpaceMode::Log")]
    WrongSpaceMode,
    #[error("grid needs at least 3 interior nodes per direction, got {0}x{1}")]
    GridTooSmall(usize, usize),
    #[error("need at least one time step")]
    NoTimeSteps,
    #[error("final time must be positive, got {0}")]
    NonPositiveHorizon(f64),
    #[error("grid rectangle is degenerate")]
    DegenerateRectangle,
    #[error("explicit cross-term guard tripped: coupling coefficient {0:.3e} exceeds 1; refine dt or use the fully implicit scheme")]
    CrossTermGuard(f64),
    #[error("banded solve broke down at row {row}: pivot {pivot:.3e}")]
    SolveBreakdown { row: usize, pivot: f64 },
    #[error("initial condition contains max; strip it first")]
    MaxInInitialCondition,
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    SpecFun(#[from] SpecFunError),
}

/// How the mixed-derivative term enters the time stepping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossScheme {
    /// Lagged to the previous time level (operator split); guarded.
    #[default]
    Explicit,
    /// Included in the banded matrix.
    Implicit,
}

/// Discretization request: rectangle, interior node counts, steps, horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
    /// Interior node counts (boundary nodes come on top).
    pub nu: usize,
    pub nv: usize,
    pub steps: usize,
    pub t_final: f64,
    #[serde(default)]
    pub cross: CrossScheme,
}

/// Solved space-time field `c[m][i][j]` (time level, u index, v index),
/// boundary nodes included.
#[derive(Debug)]
pub struct OracleGrid {
    pub spec: GridSpec,
    pub dt: f64,
    pub us: Vec<f64>,
    pub vs: Vec<f64>,
    levels: Vec<Vec<f64>>, // each level row-major over (nu+2) x (nv+2)
}

impl OracleGrid {
    pub fn value(&self, m: usize, i: usize, j: usize) -> f64 {
        self.levels[m][i * self.vs.len() + j]
    }

    pub fn time_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn final_level(&self) -> &[f64] {
        self.levels.last().unwrap()
    }

    /// Maximum relative deviation against `reference(u, v)` over interior
    /// nodes at the final time.
    pub fn interior_max_rel_dev<F: Fn(f64, f64) -> f64>(&self, reference: F) -> f64 {
        let mut worst = 0.0f64;
        for i in 1..self.us.len() - 1 {
            for j in 1..self.vs.len() - 1 {
                let want = reference(self.us[i], self.vs[j]);
                let got = self.value(self.levels.len() - 1, i, j);
                let dev = (got - want).abs() / want.abs().max(1e-300);
                worst = worst.max(dev);
            }
        }
        worst
    }
}

/// L1 weights `b_j = (j+1)^{1-alpha} - j^{1-alpha}`, strictly decreasing for
/// alpha < 1; at alpha = 1 they collapse to a Kronecker delta and the scheme
/// is plain backward Euler.
pub fn l1_weights(alpha: f64, m: usize) -> Result<Vec<f64>, OracleError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(OracleError::AlphaOutOfRange(alpha));
    }
    if m < 1 {
        return Err(OracleError::NoTimeSteps);
    }
    let e = 1.0 - alpha;
    // j = 0 is exactly 1 for every alpha; IEEE 0^0 would say otherwise at
    // alpha = 1
    Ok((0..m)
        .map(|j| {
            if j == 0 {
                1.0
            } else {
                ((j + 1) as f64).powf(e) - (j as f64).powf(e)
            }
        })
        .collect())
}

/// Banded matrix in row-major band storage: for row i, the entries for
/// columns `i-b ..= i+b` live at offsets `0 ..= 2b`. No pivoting: the
/// well-posed regimes this oracle validates give diagonally dominant
/// matrices, and a vanishing pivot is reported as a solve breakdown.
struct BandedMatrix {
    n: usize,
    half_bw: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    fn zeros(n: usize, half_bw: usize) -> Self {
        BandedMatrix {
            n,
            half_bw,
            data: vec![0.0; n * (2 * half_bw + 1)],
        }
    }

    fn width(&self) -> usize {
        2 * self.half_bw + 1
    }

    fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(col + self.half_bw >= row && col <= row + self.half_bw);
        let idx = row * self.width() + (col + self.half_bw - row);
        self.data[idx] += value;
    }

    fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width() + (col + self.half_bw - row)]
    }

    fn at_mut(&mut self, row: usize, col: usize) -> &mut f64 {
        let idx = row * self.width() + (col + self.half_bw - row);
        &mut self.data[idx]
    }

    /// In-place LU factorization (Doolittle, no pivoting). L's multipliers
    /// overwrite the subdiagonal band.
    fn factor(&mut self) -> Result<(), OracleError> {
        let n = self.n;
        let b = self.half_bw;
        for k in 0..n {
            let pivot = self.at(k, k);
            if pivot.abs() < 1e-300 {
                return Err(OracleError::SolveBreakdown { row: k, pivot });
            }
            let i_end = (k + b).min(n - 1);
            for i in (k + 1)..=i_end {
                let m = self.at(i, k) / pivot;
                if m != 0.0 {
                    *self.at_mut(i, k) = m;
                    let j_end = (k + b).min(n - 1);
                    for j in (k + 1)..=j_end {
                        let u = self.at(k, j);
                        if u != 0.0 {
                            *self.at_mut(i, j) -= m * u;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Solve with the factored matrix.
    fn solve(&self, rhs: &mut [f64]) {
        let n = self.n;
        let b = self.half_bw;
        for i in 0..n {
            let j_start = i.saturating_sub(b);
            let mut acc = rhs[i];
            for j in j_start..i {
                acc -= self.at(i, j) * rhs[j];
            }
            rhs[i] = acc;
        }
        for i in (0..n).rev() {
            let j_end = (i + b).min(n - 1);
            let mut acc = rhs[i];
            for j in (i + 1)..=j_end {
                acc -= self.at(i, j) * rhs[j];
            }
            rhs[i] = acc / self.at(i, i);
        }
    }
}

struct Stencil {
    cu: f64,     // beta * sigma1^2/2 / hu^2
    cv: f64,     // beta * sigma2^2/2 / hv^2
    cx: f64,     // beta * rho sigma1 sigma2 / (4 hu hv)
    beta_r: f64, // beta * r
}

/// Integrate `D_t^alpha c = -[(sig1^2/2) c_uu + (sig2^2/2) c_vv
/// + rho sig1 sig2 c_uv - r c]` from `ic` with Dirichlet data `boundary`
/// prescribed on all four edges at every time level.
pub fn solve_fd(
    p: &ModelParams,
    ic: &Expr,
    spec: &GridSpec,
    boundary: &dyn Fn(f64, f64, f64) -> f64,
) -> Result<OracleGrid, OracleError> {
    p.validate()?;
    if p.space_mode != SpaceMode::Log {
        return Err(OracleError::WrongSpaceMode);
    }
    let weights = l1_weights(p.alpha, spec.steps)?;
    let beta = gamma(2.0 - p.alpha)? * (spec.t_final / spec.steps as f64).powf(p.alpha);
    step_grid(p, ic, spec, boundary, Memory::L1(weights), beta)
}

/// The same spatial discretization stepped by plain backward Euler. Exists
/// as an independently coded path so the alpha = 1 reduction of [`solve_fd`]
/// can be checked field-by-field.
pub fn solve_backward_euler(
    p: &ModelParams,
    ic: &Expr,
    spec: &GridSpec,
    boundary: &dyn Fn(f64, f64, f64) -> f64,
) -> Result<OracleGrid, OracleError> {
    p.validate()?;
    if p.space_mode != SpaceMode::Log {
        return Err(OracleError::WrongSpaceMode);
    }
    if spec.steps < 1 {
        return Err(OracleError::NoTimeSteps);
    }
    let dt = spec.t_final / spec.steps as f64;
    step_grid(p, ic, spec, boundary, Memory::None, dt)
}

enum Memory {
    /// Caputo history with L1 weights.
    L1(Vec<f64>),
    /// No memory: classic one-level stepping.
    None,
}

fn step_grid(
    p: &ModelParams,
    ic: &Expr,
    spec: &GridSpec,
    boundary: &dyn Fn(f64, f64, f64) -> f64,
    memory: Memory,
    beta: f64,
) -> Result<OracleGrid, OracleError> {
    if spec.nu < 3 || spec.nv < 3 {
        return Err(OracleError::GridTooSmall(spec.nu, spec.nv));
    }
    if spec.steps < 1 {
        return Err(OracleError::NoTimeSteps);
    }
    if !(spec.t_final > 0.0) {
        return Err(OracleError::NonPositiveHorizon(spec.t_final));
    }
    if !(spec.u_range.1 > spec.u_range.0 && spec.v_range.1 > spec.v_range.0) {
        return Err(OracleError::DegenerateRectangle);
    }
    if ic.contains_max() {
        return Err(OracleError::MaxInInitialCondition);
    }

    let n_u = spec.nu + 2;
    let n_v = spec.nv + 2;
    let hu = (spec.u_range.1 - spec.u_range.0) / (n_u - 1) as f64;
    let hv = (spec.v_range.1 - spec.v_range.0) / (n_v - 1) as f64;
    let us: Vec<f64> = (0..n_u).map(|i| spec.u_range.0 + i as f64 * hu).collect();
    let vs: Vec<f64> = (0..n_v).map(|j| spec.v_range.0 + j as f64 * hv).collect();
    let dt = spec.t_final / spec.steps as f64;

    let st = Stencil {
        cu: beta * 0.5 * p.sigma1 * p.sigma1 / (hu * hu),
        cv: beta * 0.5 * p.sigma2 * p.sigma2 / (hv * hv),
        cx: beta * p.rho * p.sigma1 * p.sigma2 / (4.0 * hu * hv),
        beta_r: beta * p.r,
    };
    if spec.cross == CrossScheme::Explicit {
        let coupling = beta * p.rho.abs() * p.sigma1 * p.sigma2 / (hu * hv);
        if coupling > 1.0 {
            return Err(OracleError::CrossTermGuard(coupling));
        }
    }

    // initial level
    let mut level0 = vec![0.0f64; n_u * n_v];
    for i in 0..n_u {
        for j in 0..n_v {
            let mut env = VarEnv::new();
            env.bind(crate::expr::Var::U, us[i]);
            env.bind(crate::expr::Var::V, vs[j]);
            level0[i * n_v + j] = ic.eval(&env)?;
        }
    }
    let mut levels = vec![level0];

    // implicit matrix over interior unknowns, constant across steps
    let n_unknown = spec.nu * spec.nv;
    let half_bw = spec.nv + 1;
    let idx = |i: usize, j: usize| (i - 1) * spec.nv + (j - 1);
    let mut mat = BandedMatrix::zeros(n_unknown, half_bw);
    for i in 1..=spec.nu {
        for j in 1..=spec.nv {
            let k = idx(i, j);
            mat.add(k, k, 1.0 - 2.0 * st.cu - 2.0 * st.cv - st.beta_r);
            if i > 1 {
                mat.add(k, idx(i - 1, j), st.cu);
            }
            if i < spec.nu {
                mat.add(k, idx(i + 1, j), st.cu);
            }
            if j > 1 {
                mat.add(k, idx(i, j - 1), st.cv);
            }
            if j < spec.nv {
                mat.add(k, idx(i, j + 1), st.cv);
            }
            if spec.cross == CrossScheme::Implicit {
                if i > 1 && j > 1 {
                    mat.add(k, idx(i - 1, j - 1), st.cx);
                }
                if i < spec.nu && j < spec.nv {
                    mat.add(k, idx(i + 1, j + 1), st.cx);
                }
                if i > 1 && j < spec.nv {
                    mat.add(k, idx(i - 1, j + 1), -st.cx);
                }
                if i < spec.nu && j > 1 {
                    mat.add(k, idx(i + 1, j - 1), -st.cx);
                }
            }
        }
    }
    mat.factor()?;

    let mut rhs = vec![0.0f64; n_unknown];
    for m in 1..=spec.steps {
        let t_new = m as f64 * dt;
        // boundary values at the new level
        let mut new_level = vec![0.0f64; n_u * n_v];
        for i in 0..n_u {
            new_level[i * n_v] = boundary(us[i], vs[0], t_new);
            new_level[i * n_v + (n_v - 1)] = boundary(us[i], vs[n_v - 1], t_new);
        }
        for j in 0..n_v {
            new_level[j] = boundary(us[0], vs[j], t_new);
            new_level[(n_u - 1) * n_v + j] = boundary(us[n_u - 1], vs[j], t_new);
        }

        let prev = &levels[m - 1];
        for i in 1..=spec.nu {
            for j in 1..=spec.nv {
                let k = idx(i, j);
                let mut acc = prev[i * n_v + j];
                if let Memory::L1(weights) = &memory {
                    // sum_{j'=1}^{m-1} b_j' (c^{m-j'} - c^{m-j'-1})
                    for jj in 1..m {
                        acc -= weights[jj]
                            * (levels[m - jj][i * n_v + j] - levels[m - jj - 1][i * n_v + j]);
                    }
                }
                if spec.cross == CrossScheme::Explicit {
                    let cross = prev[(i + 1) * n_v + (j + 1)] - prev[(i + 1) * n_v + (j - 1)]
                        - prev[(i - 1) * n_v + (j + 1)]
                        + prev[(i - 1) * n_v + (j - 1)];
                    acc -= st.cx * cross;
                }
                rhs[k] = acc;
            }
        }

        // fold the new-level Dirichlet data into the right-hand side
        for i in 1..=spec.nu {
            for j in 1..=spec.nv {
                let k = idx(i, j);
                if i == 1 {
                    rhs[k] -= st.cu * new_level[j];
                }
                if i == spec.nu {
                    rhs[k] -= st.cu * new_level[(n_u - 1) * n_v + j];
                }
                if j == 1 {
                    rhs[k] -= st.cv * new_level[i * n_v];
                }
                if j == spec.nv {
                    rhs[k] -= st.cv * new_level[i * n_v + (n_v - 1)];
                }
                if spec.cross == CrossScheme::Implicit {
                    // corner neighbors that fall on the boundary
                    if i == 1 || j == 1 {
                        rhs[k] -= st.cx * new_level[(i - 1) * n_v + (j - 1)];
                    }
                    if i == spec.nu || j == spec.nv {
                        rhs[k] -= st.cx * new_level[(i + 1) * n_v + (j + 1)];
                    }
                    if i == 1 || j == spec.nv {
                        rhs[k] += st.cx * new_level[(i - 1) * n_v + (j + 1)];
                    }
                    if i == spec.nu || j == 1 {
                        rhs[k] += st.cx * new_level[(i + 1) * n_v + (j - 1)];
                    }
                }
            }
        }

        mat.solve(&mut rhs);
        for i in 1..=spec.nu {
            for j in 1..=spec.nv {
                new_level[i * n_v + j] = rhs[idx(i, j)];
            }
        }
        levels.push(new_level);
    }

    Ok(OracleGrid {
        spec: spec.clone(),
        dt,
        us,
        vs,
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::specfun::mittag_leffler;

    fn log_params(alpha: f64) -> ModelParams {
        ModelParams {
            sigma1: 0.4,
            sigma2: 0.25,
            r: 0.08,
            rho: 0.75,
            alpha,
            w1: 2.0,
            w2: 2.0,
            strike: 80.0,
            maturity: 8.0 / 12.0,
            space_mode: SpaceMode::Log,
        }
    }

    fn spec(n: usize, steps: usize, t_final: f64) -> GridSpec {
        GridSpec {
            u_range: (-1.0, 1.0),
            v_range: (-1.0, 1.0),
            nu: n,
            nv: n,
            steps,
            t_final,
            cross: CrossScheme::Explicit,
        }
    }

    #[test]
    fn weights_classical_limit() {
        let w = l1_weights(1.0, 5).unwrap();
        assert_eq!(w[0], 1.0);
        for &b in &w[1..] {
            assert_eq!(b, 0.0);
        }
    }

    #[test]
    fn weights_half_order_values() {
        let w = l1_weights(0.5, 3).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-15);
        assert!((w[1] - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        // strictly decreasing for alpha < 1
        assert!(w[0] > w[1] && w[1] > w[2]);
    }

    #[test]
    fn weights_telescope() {
        for alpha in [0.3, 0.5, 0.8, 1.0] {
            for m in [1usize, 7, 40] {
                let w = l1_weights(alpha, m).unwrap();
                let sum: f64 = w.iter().sum();
                let want = (m as f64).powf(1.0 - alpha);
                assert!((sum - want).abs() < 1e-12 * want.max(1.0));
            }
        }
    }

    #[test]
    fn weights_reject_bad_alpha() {
        assert!(matches!(
            l1_weights(1.2, 3),
            Err(OracleError::AlphaOutOfRange(_))
        ));
    }

    #[test]
    fn banded_solver_matches_dense_elimination() {
        // small diagonally dominant system with pseudorandom band entries
        let n = 12;
        let b = 3;
        let mut mat = BandedMatrix::zeros(n, b);
        let mut dense = vec![vec![0.0f64; n]; n];
        let mut seed = 1234u64;
        let mut rnd = || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((seed >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        for i in 0..n {
            for j in i.saturating_sub(b)..(i + b + 1).min(n) {
                let v = if i == j { 10.0 + rnd() } else { rnd() * 0.5 };
                mat.add(i, j, v);
                dense[i][j] = v;
            }
        }
        let rhs_orig: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();

        // dense Gaussian elimination with partial pivoting as reference
        let mut a = dense.clone();
        let mut x = rhs_orig.clone();
        for k in 0..n {
            let (piv_row, _) = (k..n)
                .map(|r| (r, a[r][k].abs()))
                .max_by(|p, q| p.1.total_cmp(&q.1))
                .unwrap();
            a.swap(k, piv_row);
            x.swap(k, piv_row);
            for r in (k + 1)..n {
                let m = a[r][k] / a[k][k];
                for c in k..n {
                    a[r][c] -= m * a[k][c];
                }
                x[r] -= m * x[k];
            }
        }
        for k in (0..n).rev() {
            for c in (k + 1)..n {
                x[k] -= a[k][c] * x[c];
            }
            x[k] /= a[k][k];
        }

        mat.factor().unwrap();
        let mut got = rhs_orig;
        mat.solve(&mut got);
        for i in 0..n {
            assert!((got[i] - x[i]).abs() < 1e-11, "component {i}");
        }
    }

    #[test]
    fn field_constant_when_operator_is_null() {
        let mut p = log_params(0.5);
        p.sigma1 = 0.0;
        p.sigma2 = 0.0;
        p.r = 0.0;
        let ic = parse_expr("exp(0.3*u) + v^2").unwrap();
        let sp = spec(7, 20, 0.5);
        let grid = solve_fd(&p, &ic, &sp, &|u, v, _t| (0.3f64 * u).exp() + v * v).unwrap();
        let dev = grid.interior_max_rel_dev(|u, v| (0.3f64 * u).exp() + v * v);
        assert!(dev < 1e-12, "field drifted: {dev:.3e}");
    }

    #[test]
    fn alpha_one_constant_ic_grows_at_risk_free_rate() {
        // spatially uniform solution: the equation reduces to dy/dt = r y
        let mut p = log_params(1.0);
        p.sigma1 = 0.0;
        p.sigma2 = 0.0;
        let sp = spec(5, 400, 1.0);
        let grid = solve_fd(&p, &Expr::num(100.0), &sp, &|_u, _v, t| {
            100.0 * (p.r * t).exp()
        })
        .unwrap();
        let got = grid.value(grid.time_levels() - 1, 3, 3);
        assert!(
            (got - 108.328_7).abs() < 1e-3,
            "expected ~108.3287, got {got}"
        );
    }

    #[test]
    fn alpha_one_equals_backward_euler_bitwise() {
        let p = log_params(1.0);
        let ic = parse_expr("exp(0.5*u + 0.5*v)").unwrap();
        let sp = spec(9, 30, 1e-4);
        let lambda = p.r
            - 0.5 * p.sigma1 * p.sigma1 * 0.25
            - 0.5 * p.sigma2 * p.sigma2 * 0.25
            - p.rho * p.sigma1 * p.sigma2 * 0.25;
        let bc = move |u: f64, v: f64, t: f64| (0.5 * (u + v)).exp() * (lambda * t).exp();
        let l1 = solve_fd(&p, &ic, &sp, &bc).unwrap();
        let be = solve_backward_euler(&p, &ic, &sp, &bc).unwrap();
        for m in 0..l1.time_levels() {
            for i in 0..l1.us.len() {
                for j in 0..l1.vs.len() {
                    let a = l1.value(m, i, j);
                    let b = be.value(m, i, j);
                    assert!(
                        (a - b).abs() <= 1e-12 * a.abs().max(1.0),
                        "fields differ at level {m}, node ({i},{j}): {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn eigenfunction_interior_agreement() {
        // short-horizon cross-validation against the closed form
        let p = log_params(0.5);
        let ic = parse_expr("exp(0.5*u + 0.5*v)").unwrap();
        let lambda = p.r
            - 0.5 * p.sigma1 * p.sigma1 * 0.25
            - 0.5 * p.sigma2 * p.sigma2 * 0.25
            - p.rho * p.sigma1 * p.sigma2 * 0.25;
        let alpha = p.alpha;
        let closed = move |u: f64, v: f64, t: f64| {
            (0.5 * (u + v)).exp() * mittag_leffler(alpha, lambda * t.powf(alpha)).unwrap().value
        };
        let sp = spec(31, 100, 2e-7);
        let grid = solve_fd(&p, &ic, &sp, &closed).unwrap();
        let dev = grid.interior_max_rel_dev(|u, v| closed(u, v, sp.t_final));
        assert!(dev < 2e-2, "interior deviation {dev:.3e}");
    }

    #[test]
    fn implicit_cross_matches_explicit_in_smooth_regime() {
        let p = log_params(0.8);
        let ic = parse_expr("exp(0.5*u + 0.5*v)").unwrap();
        let mut sp = spec(9, 50, 1e-5);
        let bc = |u: f64, v: f64, _t: f64| (0.5 * (u + v)).exp();
        let a = solve_fd(&p, &ic, &sp, &bc).unwrap();
        sp.cross = CrossScheme::Implicit;
        let b = solve_fd(&p, &ic, &sp, &bc).unwrap();
        let mut worst = 0.0f64;
        let last = a.time_levels() - 1;
        for i in 0..a.us.len() {
            for j in 0..a.vs.len() {
                worst = worst.max((a.value(last, i, j) - b.value(last, i, j)).abs());
            }
        }
        assert!(worst < 1e-8, "schemes diverged: {worst:.3e}");
    }

    #[test]
    fn rejects_asset_mode() {
        let mut p = log_params(0.5);
        p.space_mode = SpaceMode::Asset;
        let err = solve_fd(&p, &Expr::num(1.0), &spec(5, 5, 0.1), &|_, _, _| 1.0).unwrap_err();
        assert!(matches!(err, OracleError::WrongSpaceMode));
    }
}
