//! Command-line front end: scenario execution, user configs, oracle runs,
//! transform-identity checks, and CSV/plot-data emission.
//!
//! Exit codes: 0 success, 2 validation or configuration error, 3 numerical
//! failure (growth guard, quadrature, linear-solve breakdown).

use clap::{Args, Parser, Subcommand};
use fracbs_core::expr::parse_expr;
use fracbs_core::oracle::{self, CrossScheme, GridSpec, OracleError};
use fracbs_core::pricing::{
    builtin, price_grid, reconcile, CoordConvention, PriceTable, PricingError, Scenario,
    ScenarioConfig,
};
use fracbs_core::solver::{build_series, DomainBox, SolverError, SpaceMode};
use fracbs_core::sumudu;
use fracbs_core::expr::Var;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "fracbs",
    about = "Two-asset time-fractional Black-Scholes series pricer",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Price a bundled example scenario and reconcile it against its
    /// reference table.
    Scenario {
        /// Scenario id: ex1 (alias of ex1-logprice), ex1-literal, ex2..ex5.
        id: String,
        #[command(flatten)]
        run: RunOpts,
    },
    /// Price a user scenario described by a JSON config file.
    Price {
        /// Path to the scenario JSON document.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        run: RunOpts,
    },
    /// Run the finite-difference solver on a JSON config and emit the
    /// final-time field as CSV (u, v, value).
    Oracle {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Sumudu/Caputo transform identity suite and print a pass/fail
    /// table.
    SumuduCheck,
    /// Emit (s1, s2, price) triples for external plotting.
    PlotData {
        /// Bundled scenario id (or use --config).
        id: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 25)]
        terms: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 6)]
        precision: usize,
    },
}

#[derive(Debug, Args)]
struct RunOpts {
    /// Series truncation order N.
    #[arg(long, default_value_t = 25)]
    terms: usize,
    /// Output CSV path (long form `s1,s2,price`); the reconciliation report
    /// lands next to it with extension `.report.txt`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit the table in matrix layout (rows s2, columns s1) instead of
    /// long form.
    #[arg(long)]
    matrix: bool,
    /// Significant digits for printed numbers.
    #[arg(long, default_value_t = 6)]
    precision: usize,
    /// Override the scenario's operator coordinates (log or asset).
    #[arg(long)]
    mode: Option<ModeArg>,
    /// Print scenario notes and series diagnostics.
    #[arg(long, short)]
    verbose: bool,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Log,
    Asset,
}

enum CliError {
    Validation(String),
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<PricingError> for CliError {
    fn from(e: PricingError) -> Self {
        match &e {
            PricingError::Solver(s) => classify_solver(s, e.to_string()),
            PricingError::Eval(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        classify_solver(&e, e.to_string())
    }
}

fn classify_solver(e: &SolverError, msg: String) -> CliError {
    match e {
        SolverError::ExpressionGrowth { .. }
        | SolverError::Eval(_)
        | SolverError::SpecFun(_) => CliError::Numerical(msg),
        _ => CliError::Validation(msg),
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match &e {
            OracleError::CrossTermGuard(_)
            | OracleError::SolveBreakdown { .. }
            | OracleError::Eval(_)
            | OracleError::SpecFun(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("io error: {e}"))
    }
}

/// Parse `argv` and execute; returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own help/version output on stdout with code 0
            if e.use_stderr() {
                eprintln!("{e}");
                return EXIT_VALIDATION;
            }
            print!("{e}");
            return EXIT_OK;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Scenario { id, run } => {
            let sc = builtin(&id)?;
            run_scenario(sc, &run)
        }
        Command::Price { config, run } => {
            let sc = load_scenario_config(&config)?;
            run_scenario(sc, &run)
        }
        Command::Oracle { config, out } => run_oracle(&config, out.as_deref()),
        Command::SumuduCheck => run_sumudu_check(),
        Command::PlotData {
            id,
            config,
            terms,
            out,
            precision,
        } => run_plot_data(id, config, terms, out.as_deref(), precision),
    }
}

fn load_scenario_config(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: ScenarioConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("malformed config {}: {e}", path.display())))?;
    Ok(cfg.into_scenario()?)
}

fn override_mode(mut sc: Scenario, mode: ModeArg) -> Scenario {
    let space_mode = match mode {
        ModeArg::Log => SpaceMode::Log,
        ModeArg::Asset => SpaceMode::Asset,
    };
    if sc.params.space_mode == space_mode {
        return sc;
    }
    sc.params.space_mode = space_mode;
    match space_mode {
        SpaceMode::Log => {
            sc.coords = CoordConvention::LogOfPrice;
            sc.var_map = vec![
                (Var::S1, Var::U),
                (Var::S2, Var::V),
                (Var::X, Var::U),
                (Var::Y, Var::V),
            ];
        }
        SpaceMode::Asset => {
            sc.coords = CoordConvention::Identity;
            sc.var_map = vec![(Var::X, Var::S1), (Var::Y, Var::S2)];
        }
    }
    sc
}

fn run_scenario(sc: Scenario, run: &RunOpts) -> Result<(), CliError> {
    let sc = match run.mode {
        Some(mode) => override_mode(sc, mode),
        None => sc,
    };
    let table = price_grid(&sc, run.terms)?;
    if run.verbose {
        println!("scenario {} ({})", sc.id, sc.label);
        println!("  payoff: {}", sc.ic_text);
        println!("  notes: {}", sc.notes);
        println!(
            "  terms: {}, t = {} years, tail bound {}",
            table.terms,
            format_sig(table.t_years, run.precision),
            format_sig(table.tail_bound, run.precision)
        );
    }

    let csv = if run.matrix {
        matrix_csv(&table, run.precision)
    } else {
        long_csv(&table, run.precision)
    };
    match &run.out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }

    if sc.fixture.is_some() {
        let report = reconcile(&table, &sc)?;
        let rendered = report.to_string();
        println!("{rendered}");
        if let Some(path) = &run.out {
            let report_path = path.with_extension("report.txt");
            std::fs::write(report_path, rendered)?;
        }
    } else if run.verbose {
        println!("no reference fixture; skipping reconciliation");
    }
    Ok(())
}

fn run_oracle(config: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(config)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", config.display())))?;
    let cfg: OracleRunConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("malformed config {}: {e}", config.display())))?;
    let grid = cfg.solve()?;

    let mut csv = String::from("u,v,value\n");
    let last = grid.time_levels() - 1;
    for (i, &u) in grid.us.iter().enumerate() {
        for (j, &v) in grid.vs.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{},{},{}",
                format_sig(u, 9),
                format_sig(v, 9),
                format_sig(grid.value(last, i, j), 9)
            );
        }
    }
    match out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    println!(
        "oracle: {}x{} interior nodes, {} steps to t = {}",
        grid.spec.nu, grid.spec.nv, grid.spec.steps, grid.spec.t_final
    );
    Ok(())
}

/// JSON document for `oracle`: model parameters, the initial condition in
/// log coordinates (u, v), the grid, and the series order used to feed the
/// Dirichlet boundaries.
#[derive(Debug, serde::Deserialize)]
struct OracleRunConfig {
    sigma1: f64,
    sigma2: f64,
    r: f64,
    rho: f64,
    alpha: f64,
    ic: String,
    u_range: (f64, f64),
    v_range: (f64, f64),
    nu: usize,
    nv: usize,
    steps: usize,
    t_final: f64,
    #[serde(default)]
    cross: CrossScheme,
    #[serde(default = "default_boundary_terms")]
    boundary_terms: usize,
}

fn default_boundary_terms() -> usize {
    40
}

impl OracleRunConfig {
    fn solve(&self) -> Result<fracbs_core::oracle::OracleGrid, CliError> {
        let params = fracbs_core::solver::ModelParams {
            sigma1: self.sigma1,
            sigma2: self.sigma2,
            r: self.r,
            rho: self.rho,
            alpha: self.alpha,
            w1: 1.0,
            w2: 1.0,
            strike: 0.0,
            maturity: self.t_final.max(f64::MIN_POSITIVE),
            space_mode: SpaceMode::Log,
        };
        let ic = parse_expr(&self.ic)
            .map_err(|e| CliError::Validation(format!("bad oracle initial condition: {e}")))?
            .strip_max();
        let spec = GridSpec {
            u_range: self.u_range,
            v_range: self.v_range,
            nu: self.nu,
            nv: self.nv,
            steps: self.steps,
            t_final: self.t_final,
            cross: self.cross,
        };
        // Dirichlet data comes from the series solution on the same box
        let domain = DomainBox::new(self.u_range, self.v_range);
        let series = build_series(&ic, &params, self.boundary_terms, domain)?;
        let boundary = |u: f64, v: f64, t: f64| series.eval((u, v), t).unwrap_or(f64::NAN);
        Ok(oracle::solve_fd(&params, &ic, &spec, &boundary)?)
    }
}

fn run_sumudu_check() -> Result<(), CliError> {
    let checks = sumudu::identity_suite()
        .map_err(|e| CliError::Numerical(format!("identity suite failed to run: {e}")))?;
    let mut failures = 0usize;
    println!(
        "{:<58} {:>14} {:>14} {:>10} {:>6}",
        "identity", "lhs", "rhs", "|dev|", "status"
    );
    for c in &checks {
        let ok = c.passed();
        if !ok {
            failures += 1;
        }
        println!(
            "{:<58} {:>14} {:>14} {:>10.2e} {:>6}",
            c.label,
            format_sig(c.lhs, 8),
            format_sig(c.rhs, 8),
            c.deviation(),
            if ok { "pass" } else { "FAIL" }
        );
    }
    println!(
        "{} checks, {} failed (tolerance 1e-5 each)",
        checks.len(),
        failures
    );
    if failures > 0 {
        return Err(CliError::Numerical(format!(
            "{failures} transform identities out of tolerance"
        )));
    }
    Ok(())
}

fn run_plot_data(
    id: Option<String>,
    config: Option<PathBuf>,
    terms: usize,
    out: Option<&Path>,
    precision: usize,
) -> Result<(), CliError> {
    let sc = match (&id, &config) {
        (Some(id), None) => builtin(id)?,
        (None, Some(path)) => load_scenario_config(path)?,
        _ => {
            return Err(CliError::Validation(
                "plot-data needs exactly one of a scenario id or --config".into(),
            ))
        }
    };
    let table = price_grid(&sc, terms)?;
    // gnuplot-style blocks: one s2 row per block, blank line between blocks
    let mut text = String::from("# s1 s2 price\n");
    for (j, &s2) in table.s2_grid.iter().enumerate() {
        for (i, &s1) in table.s1_grid.iter().enumerate() {
            let _ = writeln!(
                text,
                "{} {} {}",
                format_sig(s1, precision),
                format_sig(s2, precision),
                format_sig(table.prices[j][i], precision)
            );
        }
        if j + 1 < table.s2_grid.len() {
            text.push('\n');
        }
    }
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn long_csv(t: &PriceTable, precision: usize) -> String {
    let mut csv = String::from("s1,s2,price\n");
    for (j, &s2) in t.s2_grid.iter().enumerate() {
        for (i, &s1) in t.s1_grid.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{},{},{}",
                format_sig(s1, precision),
                format_sig(s2, precision),
                format_sig(t.prices[j][i], precision)
            );
        }
    }
    csv
}

fn matrix_csv(t: &PriceTable, precision: usize) -> String {
    let mut csv = String::from("s2\\s1");
    for &s1 in &t.s1_grid {
        let _ = write!(csv, ",{}", format_sig(s1, precision));
    }
    csv.push('\n');
    for (j, &s2) in t.s2_grid.iter().enumerate() {
        let _ = write!(csv, "{}", format_sig(s2, precision));
        for i in 0..t.s1_grid.len() {
            let _ = write!(csv, ",{}", format_sig(t.prices[j][i], precision));
        }
        csv.push('\n');
    }
    csv
}

/// Fixed-significant-digit decimal formatting. Plain decimal inside a
/// reasonable magnitude window, scientific outside it; trailing zeros
/// trimmed. Deterministic for identical inputs.
pub fn format_sig(x: f64, sig: usize) -> String {
    let sig = sig.max(1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if magnitude >= sig as i32 + 6 || magnitude < -7 {
        let s = format!("{:.*e}", sig - 1, x);
        return trim_scientific(&s);
    }
    let decimals = (sig as i32 - 1 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn trim_scientific(s: &str) -> String {
    match s.split_once('e') {
        Some((mantissa, exponent)) => {
            let m = if mantissa.contains('.') {
                mantissa.trim_end_matches('0').trim_end_matches('.')
            } else {
                mantissa
            };
            format!("{m}e{exponent}")
        }
        None => s.to_string(),
    }
}
