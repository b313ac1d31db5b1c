//! Scenario layer: the five bundled worked examples as executable fixtures,
//! grid pricing through the series solver, and reconciliation against the
//! published reference tables and closed forms those examples printed.
//!
//! The reference tables are reconciliation targets, not oracles: they are
//! internally inconsistent with their own printed closed forms (ex3's
//! formula evaluates three orders of magnitude away from its own table), so
//! the engine computes its canonical values and the report records every
//! deviation rather than asserting agreement.

use crate::expr::{parse_expr, simplify, Expr, Var, VarEnv};
use crate::solver::{
    build_series, to_log_space, DomainBox, ModelParams, SeriesSolution, SolverError, SpaceMode,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PricingError {
    #[error("unknown scenario id `{0}`")]
    UnknownScenario(String),
    #[error("scenario initial condition failed to parse: {0}")]
    BadInitialCondition(#[from] crate::expr::ParseError),
    #[error("scenario grid must be strictly increasing and nonempty")]
    BadGrid,
    #[error("fixture dimensions {rows}x{cols} do not match the {want_rows}x{want_cols} grid")]
    FixtureDimensionMismatch {
        rows: usize,
        cols: usize,
        want_rows: usize,
        want_cols: usize,
    },
    #[error("scenario `{0}` carries no reference fixture")]
    MissingFixture(String),
    #[error("price tables have different dimensions")]
    TableDimensionMismatch,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Eval(#[from] crate::expr::EvalError),
}

/// How grid prices map into the solution coordinates at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoordConvention {
    /// `(u, v) = to_log_space(s1, s2, t)`: the substitution-based reading.
    LogOfPrice,
    /// Coordinates are the grid values verbatim (also the only choice in
    /// asset mode, where the grid *is* the coordinate system).
    Identity,
}

/// A priced example: payoff text, model parameters, price grid, optional
/// reference fixture and closed form, and the conventions needed to
/// reproduce it.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub label: String,
    pub ic_text: String,
    pub params: ModelParams,
    pub maturity_months: f64,
    pub s1_grid: Vec<f64>,
    pub s2_grid: Vec<f64>,
    /// Reference prices indexed `[s2 row][s1 column]`, when published.
    pub fixture: Option<Vec<Vec<f64>>>,
    pub closed_form_text: Option<String>,
    pub coords: CoordConvention,
    /// Variable renames applied to the payoff before seeding the series.
    pub var_map: Vec<(Var, Var)>,
    pub notes: String,
}

/// Grid of prices produced by one series evaluation.
#[derive(Debug, Clone)]
pub struct PriceTable {
    pub scenario_id: String,
    pub s1_grid: Vec<f64>,
    pub s2_grid: Vec<f64>,
    /// Indexed `[s2 row][s1 column]`, matching the reference layout.
    pub prices: Vec<Vec<f64>>,
    pub t_years: f64,
    pub terms: usize,
    pub tail_bound: f64,
}

/// Per-cell and aggregate deviations of a price table from the scenario's
/// reference fixture, plus the fixture-vs-closed-form internal consistency
/// check where a closed form exists. Reporting never fails on disagreement.
#[derive(Debug, Clone)]
pub struct ReconciliationReport {
    pub scenario_id: String,
    pub abs_dev: Vec<Vec<f64>>,
    pub rel_dev: Vec<Vec<f64>>,
    pub max_abs_dev: f64,
    pub mean_abs_dev: f64,
    pub max_rel_dev: f64,
    pub mean_rel_dev: f64,
    pub internal: Option<InternalConsistency>,
}

/// Deviation of the published closed form from the published table itself.
#[derive(Debug, Clone)]
pub struct InternalConsistency {
    pub max_rel_dev: f64,
    pub worst_cell: (f64, f64),
    pub closed_form_at_worst: f64,
    pub fixture_at_worst: f64,
    pub flagged: bool,
}

/// Relative deviation at which the closed-form-vs-table check is flagged as
/// an internal inconsistency of the reference material.
pub const INTERNAL_FLAG_THRESHOLD: f64 = 1e2;

impl Scenario {
    /// Years to expiry (the reference examples quote months).
    pub fn t_years(&self) -> f64 {
        self.maturity_months / 12.0
    }

    /// The series seed: payoff parsed, kink stripped, variables renamed into
    /// the operator's coordinate system.
    pub fn seed(&self) -> Result<Expr, PricingError> {
        let parsed = parse_expr(&self.ic_text)?;
        Ok(simplify(&parsed.strip_max().rename_vars(&self.var_map)))
    }

    fn validate(&self) -> Result<(), PricingError> {
        if self.s1_grid.is_empty()
            || self.s2_grid.is_empty()
            || self.s1_grid.windows(2).any(|w| w[1] <= w[0])
            || self.s2_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(PricingError::BadGrid);
        }
        if let Some(fix) = &self.fixture {
            if fix.len() != self.s2_grid.len()
                || fix.iter().any(|row| row.len() != self.s1_grid.len())
            {
                return Err(PricingError::FixtureDimensionMismatch {
                    rows: fix.len(),
                    cols: fix.first().map_or(0, |r| r.len()),
                    want_rows: self.s2_grid.len(),
                    want_cols: self.s1_grid.len(),
                });
            }
        }
        Ok(())
    }

    /// Map a grid node into solution coordinates at time `t`.
    pub fn coords_at(&self, s1: f64, s2: f64, t: f64) -> Result<(f64, f64), PricingError> {
        match (self.params.space_mode, self.coords) {
            (SpaceMode::Asset, _) | (_, CoordConvention::Identity) => Ok((s1, s2)),
            (SpaceMode::Log, CoordConvention::LogOfPrice) => {
                Ok(to_log_space(s1, s2, t, &self.params)?)
            }
        }
    }

    fn domain_box(&self, t: f64) -> Result<DomainBox, PricingError> {
        let mut first = (f64::INFINITY, f64::NEG_INFINITY);
        let mut second = (f64::INFINITY, f64::NEG_INFINITY);
        for &s1 in &self.s1_grid {
            for &s2 in &self.s2_grid {
                let (a, b) = self.coords_at(s1, s2, t)?;
                first = (first.0.min(a), first.1.max(a));
                second = (second.0.min(b), second.1.max(b));
            }
        }
        Ok(DomainBox::new(first, second))
    }

    /// Build the series at truncation order `terms`.
    pub fn build(&self, terms: usize) -> Result<SeriesSolution, PricingError> {
        self.validate()?;
        let t = self.t_years();
        Ok(build_series(
            &self.seed()?,
            &self.params,
            terms,
            self.domain_box(t)?,
        )?)
    }
}

/// Price the scenario's grid at expiry with a `terms`-term series.
pub fn price_grid(sc: &Scenario, terms: usize) -> Result<PriceTable, PricingError> {
    let series = sc.build(terms)?;
    price_grid_with_series(sc, &series, sc.t_years())
}

/// Price the grid from an already-built series at an arbitrary time.
pub fn price_grid_with_series(
    sc: &Scenario,
    series: &SeriesSolution,
    t: f64,
) -> Result<PriceTable, PricingError> {
    let mut prices = Vec::with_capacity(sc.s2_grid.len());
    for &s2 in &sc.s2_grid {
        let mut row = Vec::with_capacity(sc.s1_grid.len());
        for &s1 in &sc.s1_grid {
            let point = sc.coords_at(s1, s2, t)?;
            row.push(series.eval(point, t)?);
        }
        prices.push(row);
    }
    Ok(PriceTable {
        scenario_id: sc.id.clone(),
        s1_grid: sc.s1_grid.clone(),
        s2_grid: sc.s2_grid.clone(),
        prices,
        t_years: t,
        terms: series.meta.order,
        tail_bound: series.truncation_estimate(t)?,
    })
}

/// Compare a price table against the scenario's reference fixture and, when
/// a published closed form exists, check the reference against itself.
pub fn reconcile(pt: &PriceTable, sc: &Scenario) -> Result<ReconciliationReport, PricingError> {
    let fixture = sc
        .fixture
        .as_ref()
        .ok_or_else(|| PricingError::MissingFixture(sc.id.clone()))?;
    if fixture.len() != pt.prices.len()
        || fixture
            .iter()
            .zip(&pt.prices)
            .any(|(f, p)| f.len() != p.len())
    {
        return Err(PricingError::TableDimensionMismatch);
    }

    let mut abs_dev = Vec::with_capacity(fixture.len());
    let mut rel_dev = Vec::with_capacity(fixture.len());
    let (mut max_abs, mut sum_abs) = (0.0f64, 0.0f64);
    let (mut max_rel, mut sum_rel) = (0.0f64, 0.0f64);
    let mut cells = 0usize;
    for (frow, prow) in fixture.iter().zip(&pt.prices) {
        let mut arow = Vec::with_capacity(frow.len());
        let mut rrow = Vec::with_capacity(frow.len());
        for (&f, &p) in frow.iter().zip(prow) {
            let a = (p - f).abs();
            let r = a / f.abs().max(1e-300);
            arow.push(a);
            rrow.push(r);
            max_abs = max_abs.max(a);
            max_rel = max_rel.max(r);
            sum_abs += a;
            sum_rel += r;
            cells += 1;
        }
        abs_dev.push(arow);
        rel_dev.push(rrow);
    }

    let internal = match &sc.closed_form_text {
        Some(text) => Some(internal_check(text, sc, fixture)?),
        None => None,
    };

    Ok(ReconciliationReport {
        scenario_id: sc.id.clone(),
        abs_dev,
        rel_dev,
        max_abs_dev: max_abs,
        mean_abs_dev: sum_abs / cells as f64,
        max_rel_dev: max_rel,
        mean_rel_dev: sum_rel / cells as f64,
        internal,
    })
}

fn internal_check(
    closed_form: &str,
    sc: &Scenario,
    fixture: &[Vec<f64>],
) -> Result<InternalConsistency, PricingError> {
    let expr = parse_expr(closed_form)?;
    let mut worst = InternalConsistency {
        max_rel_dev: 0.0,
        worst_cell: (0.0, 0.0),
        closed_form_at_worst: 0.0,
        fixture_at_worst: 0.0,
        flagged: false,
    };
    for (j, &s2) in sc.s2_grid.iter().enumerate() {
        for (i, &s1) in sc.s1_grid.iter().enumerate() {
            // published closed forms take the raw grid values, under
            // whichever variable names they were printed with
            let mut env = VarEnv::new();
            env.bind(Var::S1, s1);
            env.bind(Var::S2, s2);
            env.bind(Var::X, s1);
            env.bind(Var::Y, s2);
            let cf = expr.eval(&env)?;
            let fx = fixture[j][i];
            let rel = (cf - fx).abs() / fx.abs().max(1e-300);
            if rel > worst.max_rel_dev {
                worst.max_rel_dev = rel;
                worst.worst_cell = (s1, s2);
                worst.closed_form_at_worst = cf;
                worst.fixture_at_worst = fx;
            }
        }
    }
    worst.flagged = worst.max_rel_dev >= INTERNAL_FLAG_THRESHOLD;
    Ok(worst)
}

impl std::fmt::Display for ReconciliationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "reconciliation report for scenario {}", self.scenario_id)?;
        writeln!(
            f,
            "  vs reference table: max abs dev {:.6e}, mean abs dev {:.6e}",
            self.max_abs_dev, self.mean_abs_dev
        )?;
        writeln!(
            f,
            "  vs reference table: max rel dev {:.6e}, mean rel dev {:.6e}",
            self.max_rel_dev, self.mean_rel_dev
        )?;
        match &self.internal {
            Some(ic) => {
                writeln!(
                    f,
                    "  reference closed form vs its own table: max rel dev {:.6e} at (s1={}, s2={})",
                    ic.max_rel_dev, ic.worst_cell.0, ic.worst_cell.1
                )?;
                writeln!(
                    f,
                    "    closed form {:.6e} vs table {:.6e}",
                    ic.closed_form_at_worst, ic.fixture_at_worst
                )?;
                if ic.flagged {
                    writeln!(
                        f,
                        "    FLAG: reference material internally inconsistent (>= {:.0e}x)",
                        INTERNAL_FLAG_THRESHOLD
                    )?;
                }
            }
            None => writeln!(f, "  no published closed form to cross-check")?,
        }
        Ok(())
    }
}

// --- bundled scenarios -----------------------------------------------------

const EX1_FIXTURE: &str = include_str!("../fixtures/ex1_call.csv");
const EX2_FIXTURE: &str = include_str!("../fixtures/ex2_put.csv");
const EX3_FIXTURE: &str = include_str!("../fixtures/ex3_call.csv");
const EX4_FIXTURE: &str = include_str!("../fixtures/ex4_put.csv");
const EX5_FIXTURE: &str = include_str!("../fixtures/ex5_put.csv");

/// Raw fixture CSV text by scenario id, for integrity checks and re-export.
pub fn fixture_csv(id: &str) -> Option<&'static str> {
    match id {
        "ex1" | "ex1-logprice" | "ex1-literal" => Some(EX1_FIXTURE),
        "ex2" => Some(EX2_FIXTURE),
        "ex3" => Some(EX3_FIXTURE),
        "ex4" => Some(EX4_FIXTURE),
        "ex5" => Some(EX5_FIXTURE),
        _ => None,
    }
}

fn parse_fixture(csv: &'static str) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("s2"))
        .map(|l| {
            l.split(',')
                .skip(1)
                .map(|cell| cell.trim().parse().expect("fixture cell"))
                .collect()
        })
        .collect()
}

const GRID_S1: [f64; 5] = [20.0, 40.0, 70.0, 100.0, 150.0];
const GRID_S2: [f64; 5] = [50.0, 80.0, 120.0, 180.0, 200.0];

#[allow(clippy::too_many_arguments)]
fn base_scenario(
    id: &str,
    label: &str,
    ic: &str,
    params: ModelParams,
    maturity_months: f64,
    fixture: &'static str,
    closed_form: &str,
    coords: CoordConvention,
    var_map: &[(Var, Var)],
    notes: &str,
) -> Scenario {
    Scenario {
        id: id.to_string(),
        label: label.to_string(),
        ic_text: ic.to_string(),
        params,
        maturity_months,
        s1_grid: GRID_S1.to_vec(),
        s2_grid: GRID_S2.to_vec(),
        fixture: Some(parse_fixture(fixture)),
        closed_form_text: Some(closed_form.to_string()),
        coords,
        var_map: var_map.to_vec(),
        notes: notes.to_string(),
    }
}

/// The bundled example scenarios. `ex1` resolves to the log-price reading;
/// its verbatim-coordinate sibling is `ex1-literal`.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let ex1_params = |mode| ModelParams {
        sigma1: 0.40,
        sigma2: 0.25,
        r: 0.08,
        rho: 0.75,
        alpha: 0.005,
        w1: 2.0,
        w2: 2.0,
        strike: 80.0,
        maturity: 8.0 / 12.0,
        space_mode: mode,
    };
    let ex1_ic = "max(exp(s1) + 2*exp(s2) - 80, 0)";
    let ex1_cf = "1.0512*exp(s1) + 2.1274*exp(s2) - 86.942";
    let log_vars = [(Var::S1, Var::U), (Var::S2, Var::V)];

    vec![
        base_scenario(
            "ex1-logprice",
            "European call, exponential payoff, log-price coordinates",
            ex1_ic,
            ex1_params(SpaceMode::Log),
            8.0,
            EX1_FIXTURE,
            ex1_cf,
            CoordConvention::LogOfPrice,
            &log_vars,
            "The printed payoff symbols are read as exp(u) with u = ln s1 - \
             drift, i.e. e^{s_1} means the price itself after the \
             substitution; the reference table's own growth pattern matches \
             this reading. Declared proportions (w1, w2) = (2, 2) conflict \
             with the printed payoff coefficients (1, 2); the literal payoff \
             wins.",
        ),
        base_scenario(
            "ex1-literal",
            "European call, exponential payoff, verbatim coordinates",
            ex1_ic,
            ex1_params(SpaceMode::Log),
            8.0,
            EX1_FIXTURE,
            ex1_cf,
            CoordConvention::Identity,
            &log_vars,
            "The printed payoff symbols feed the log-space operator \
             verbatim: the coordinate u IS the tabulated price 20..150, so \
             exp(u) reaches e^150. Prices land astronomically far from the \
             reference table; the reconciliation report records that.",
        ),
        base_scenario(
            "ex2",
            "Put, trigonometric payoff",
            "max(60 - 3*sin(pi*s1) - 5*cos(pi*s2), 0)",
            ModelParams {
                sigma1: 0.45,
                sigma2: 0.85,
                r: 0.03,
                rho: 0.65,
                alpha: 0.755,
                w1: 3.0,
                w2: 5.0,
                strike: 60.0,
                maturity: 2.0 / 12.0,
                space_mode: SpaceMode::Log,
            },
            2.0,
            EX2_FIXTURE,
            "27.459*cos(3.1416*s2) - 2.0559*cos(3.1416*s1) - 1.4938*sin(3.1416*s1) \
             - 32.852*sin(3.1416*s2) + 60.514",
            CoordConvention::Identity,
            &log_vars,
            "The published closed form plugs raw prices into the trig \
             arguments (cos(3.1416 s2)), so the payoff symbols are read \
             verbatim as the log-space coordinates. Under the raw asset \
             operator the iterates grow s^2 envelopes per order and are \
             nowhere near their decreasing regime by order 30, which would \
             void every truncation bound; the log-space reading keeps \
             sin/cos as eigenfunctions and the series convergent.",
        ),
        base_scenario(
            "ex3",
            "European call, polynomial payoff, asset coordinates",
            "max(2*s1^3 + 5*s2^2, 0)",
            ModelParams {
                sigma1: 0.40,
                sigma2: 0.65,
                r: 0.07,
                rho: 0.85,
                alpha: 0.125,
                w1: 2.0,
                w2: 5.0,
                strike: 90.0,
                maturity: 2.0 / 12.0,
                space_mode: SpaceMode::Asset,
            },
            2.0,
            EX3_FIXTURE,
            "2.1517*s1^3 + 5.3794*s2^2 - 99.777",
            CoordConvention::Identity,
            &[],
            "Monomials are eigenfunctions of the raw asset operator, which \
             matches the polynomial shape of the published result. The \
             published closed form disagrees with its own table by three \
             orders of magnitude; the reconciliation report flags it.",
        ),
        base_scenario(
            "ex4",
            "Put, quadratic-plus-log payoff, asset coordinates",
            "max(2*(x^2 + y^2) - ln(y) + ln(x), 0)",
            ModelParams {
                sigma1: 0.40,
                sigma2: 0.20,
                r: 0.08,
                rho: 0.75,
                alpha: 0.125,
                w1: 1.0,
                w2: 1.0,
                strike: 0.0,
                maturity: 5.0 / 12.0,
                space_mode: SpaceMode::Asset,
            },
            5.0,
            EX4_FIXTURE,
            "2.1735*x^2 - 1.0868*ln(y) - 1.0868*ln(x) + 0.073569/x^3 + 0.14482/x^6 \
             + 1.2248/x^9 + 2.1735*y^2 + 0.047084/y^2 + 0.05932/y^6 + 0.32106/y^9 \
             - 48.905",
            CoordConvention::Identity,
            &[(Var::X, Var::S1), (Var::Y, Var::S2)],
            "Payoff printed in (x, y), mapped x -> s1, y -> s2. The quoted \
             exercise price is a formula, not a number, so the strike field \
             stays zero. {x^2, y^2, ln x, ln y, 1} close under the asset \
             operator, so the series stays small.",
        ),
        base_scenario(
            "ex5",
            "Put, mixed trig-bilinear payoff",
            "max(-5*s1*sin(x) - 8*y + 5*x*y, 0)",
            ModelParams {
                sigma1: 0.40,
                sigma2: 0.20,
                r: 0.08,
                rho: 0.75,
                alpha: 0.125,
                w1: 1.0,
                w2: 1.0,
                strike: 0.0,
                maturity: 5.0 / 12.0,
                space_mode: SpaceMode::Log,
            },
            5.0,
            EX5_FIXTURE,
            "5.4338*x*y - 0.18377*cos(x) - 5.4278*sin(x) - 8.6942*y - 0.22071",
            CoordConvention::Identity,
            &[(Var::S1, Var::U), (Var::X, Var::U), (Var::Y, Var::V)],
            "The payoff mixes s1 and x for the same quantity; both map to \
             the first coordinate. Under the raw asset operator sin(s1) \
             breeds s1^2 envelopes each order and the series is nowhere \
             near convergent by order 30 on this grid, so the log-space \
             verbatim reading is used: {u sin u, u cos u, sin u, cos u, uv, \
             v, 1} close under the log operator with bounded coefficients.",
        ),
    ]
}

/// Look up a bundled scenario; `ex1` aliases `ex1-logprice`.
pub fn builtin(id: &str) -> Result<Scenario, PricingError> {
    let target = if id == "ex1" { "ex1-logprice" } else { id };
    builtin_scenarios()
        .into_iter()
        .find(|s| s.id == target)
        .ok_or_else(|| PricingError::UnknownScenario(id.to_string()))
}

// --- user-supplied scenario files --------------------------------------------

/// JSON document describing a user scenario; mirrors [`Scenario`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default = "default_id")]
    pub id: String,
    pub ic: String,
    pub sigma1: f64,
    pub sigma2: f64,
    pub r: f64,
    pub rho: f64,
    pub alpha: f64,
    #[serde(default = "one")]
    pub w1: f64,
    #[serde(default = "one")]
    pub w2: f64,
    #[serde(default)]
    pub strike: f64,
    pub maturity_months: f64,
    pub s1_grid: Vec<f64>,
    pub s2_grid: Vec<f64>,
    pub space_mode: SpaceMode,
    #[serde(default)]
    pub coords: Option<CoordConvention>,
    #[serde(default)]
    pub fixture: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub closed_form: Option<String>,
    #[serde(default)]
    pub notes: String,
}

fn default_id() -> String {
    "user".to_string()
}

fn one() -> f64 {
    1.0
}

impl ScenarioConfig {
    pub fn into_scenario(self) -> Result<Scenario, PricingError> {
        let params = ModelParams {
            sigma1: self.sigma1,
            sigma2: self.sigma2,
            r: self.r,
            rho: self.rho,
            alpha: self.alpha,
            w1: self.w1,
            w2: self.w2,
            strike: self.strike,
            maturity: self.maturity_months / 12.0,
            space_mode: self.space_mode,
        };
        params.validate().map_err(SolverError::Params)?;
        let coords = self.coords.unwrap_or(match self.space_mode {
            SpaceMode::Log => CoordConvention::LogOfPrice,
            SpaceMode::Asset => CoordConvention::Identity,
        });
        let var_map = match self.space_mode {
            SpaceMode::Log => vec![
                (Var::S1, Var::U),
                (Var::S2, Var::V),
                (Var::X, Var::U),
                (Var::Y, Var::V),
            ],
            SpaceMode::Asset => vec![(Var::X, Var::S1), (Var::Y, Var::S2)],
        };
        let sc = Scenario {
            id: self.id,
            label: "user scenario".to_string(),
            ic_text: self.ic,
            params,
            maturity_months: self.maturity_months,
            s1_grid: self.s1_grid,
            s2_grid: self.s2_grid,
            fixture: self.fixture,
            closed_form_text: self.closed_form,
            coords,
            var_map,
            notes: self.notes,
        };
        sc.validate()?;
        sc.seed()?;
        Ok(sc)
    }
}
