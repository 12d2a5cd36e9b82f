//! Command-line front end for the periodic-dividend barrier solver.
//!
//! Seven subcommands cover the workflow end to end:
//!
//! * `solve`      -- optimal barrier `b*`, coefficient `C_{b*}`, and `g(0)`;
//! * `g-curve`    -- the barrier criterion `b -> g(b)` with the root flagged;
//! * `value`      -- value curves `x -> v_b(x)` for one or more barriers;
//! * `sweep-beta` -- re-solve across injection costs, check monotonicity;
//! * `sweep-r`    -- re-solve across observation rates, check monotonicity;
//! * `simulate`   -- Monte Carlo estimates against the analytic values;
//! * `vi-check`   -- pointwise variational-inequality verification.
//!
//! Every CSV starts with a `#` comment row recording the SHA-256 of the
//! canonical configuration serialization and the crate version, followed by a
//! header row.  Numbers are always printed with the same `{:.12e}` pattern, so
//! a given (configuration, seed) pair reproduces byte-identical output.
//! Commands exit with status 0 only when every requested assertion holds;
//! failures emit a single-line JSON record on stderr and a nonzero status.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use levy_dividends::solver::default_vi_grid;
use levy_dividends::{BarrierProblem, PathVariation, ProblemConfig, SimConfig};

/// Observation rate treated as "effectively continuous" in `sweep-r` output.
const LARGE_R_PROXY: f64 = 50.0;

/// Slack for the sweep monotonicity assertions; the solved quantities are
/// accurate to roughly 1e-10, so a violation beyond this is structural.
const MONOTONE_TOL: f64 = 1e-9;

/// A grid point within this distance of a special abscissa (`b*`, or the
/// barrier itself) is flagged in place instead of inserting a duplicate row.
const MARKER_MATCH_TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(
    name = "levy-dividends",
    version,
    about = "Optimal periodic-dividend barriers with capital injections for spectrally negative Levy models",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the optimal barrier and print b*, C_{b*}, g(0), and the
    /// path-variation kind.
    Solve(SolveArgs),
    /// Emit the criterion curve (b, g(b)) with the root row flagged.
    #[command(name = "g-curve")]
    GCurve(GCurveArgs),
    /// Emit value-function curves (x, v_b(x)) with barrier marker rows.
    Value(ValueArgs),
    /// Re-solve over an injection-cost grid; v must decrease and b* must not
    /// decrease as beta grows.
    #[command(name = "sweep-beta")]
    SweepBeta(SweepBetaArgs),
    /// Re-solve over an observation-rate grid; v and b* must not decrease as
    /// r grows.  The r = 50 row is labeled as the large-r proxy.
    #[command(name = "sweep-r")]
    SweepR(SweepRArgs),
    /// Monte Carlo estimates of v_b(x) compared against the analytic values.
    Simulate(SimulateArgs),
    /// Variational-inequality report; exits nonzero if any grid point fails.
    #[command(name = "vi-check")]
    ViCheck(ViCheckArgs),
}

/// Where the problem parameters come from; exactly one option is required.
#[derive(Args, Clone)]
#[group(required = true, multiple = false)]
struct SourceArgs {
    /// Path to a TOML problem-configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in configuration: "case1" (unbounded variation) or "case2"
    /// (bounded variation, zero optimal barrier).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
}

#[derive(Args, Clone)]
struct OutputArg {
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    output: OutputArg,
}

#[derive(Args)]
struct GCurveArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    output: OutputArg,
    /// Comma-separated, strictly increasing barrier levels.  Default: 201
    /// points from 0 to max(4, 2 b*).
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    b_list: Option<Vec<f64>>,
}

#[derive(Args)]
struct ValueArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    output: OutputArg,
    /// Comma-separated, strictly increasing barriers.  Default: the optimal
    /// barrier b*.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    b_list: Option<Vec<f64>>,
    /// Comma-separated, strictly increasing surplus levels.  Default: 201
    /// points from 0 to 10.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    x_grid: Option<Vec<f64>>,
}

#[derive(Args)]
struct SweepBetaArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    output: OutputArg,
    /// Comma-separated, strictly increasing injection costs (> 1).  Default:
    /// 1.01..1.09, 1.1..1.9, and 2..20.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    beta_grid: Option<Vec<f64>>,
    /// Comma-separated, strictly increasing surplus levels.  Default: 21
    /// points from 0 to 10.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    x_grid: Option<Vec<f64>>,
}

#[derive(Args)]
struct SweepRArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    output: OutputArg,
    /// Comma-separated, strictly increasing observation rates (> 0).
    /// Default: 1e-4..9e-4 through 1..9 decade by decade, then 10..50.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    r_grid: Option<Vec<f64>>,
    /// Comma-separated, strictly increasing surplus levels.  Default: 21
    /// points from 0 to 10.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    x_grid: Option<Vec<f64>>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    output: OutputArg,
    /// Comma-separated, strictly increasing barriers.  Default: the optimal
    /// barrier b*.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    b_list: Option<Vec<f64>>,
    /// Comma-separated, strictly increasing starting surpluses.  Default:
    /// 0, 1, 2.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    x_grid: Option<Vec<f64>>,
    /// Number of simulated paths per (b, x) cell.
    #[arg(long, value_name = "N", default_value_t = 20_000)]
    paths: usize,
    /// Euler step for the Brownian part; ignored when sigma = 0.
    #[arg(long, value_name = "H", default_value_t = 1e-3)]
    dt: f64,
    /// Base seed of the deterministic per-path random streams.
    #[arg(long, value_name = "N", default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct ViCheckArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    output: OutputArg,
    /// Comma-separated, strictly increasing barriers to verify.  Default:
    /// the optimal barrier b* (the only one expected to pass).
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    b_list: Option<Vec<f64>>,
    /// Comma-separated, strictly increasing evaluation points (positive,
    /// excluding the barrier itself).  Default: the built-in grid.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    x_grid: Option<Vec<f64>>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = serde_json::json!({ "error": format!("{err:#}") });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Solve(args) => run_solve(args),
        Command::GCurve(args) => run_g_curve(args),
        Command::Value(args) => run_value(args),
        Command::SweepBeta(args) => run_sweep_beta(args),
        Command::SweepR(args) => run_sweep_r(args),
        Command::Simulate(args) => run_simulate(args),
        Command::ViCheck(args) => run_vi_check(args),
    }
}

// ---------------------------------------------------------------------------
// configuration loading and shared output helpers
// ---------------------------------------------------------------------------

struct Loaded {
    problem: BarrierProblem,
    config: ProblemConfig,
    /// First 16 hex digits of the SHA-256 of the canonical TOML serialization.
    hash: String,
}

impl SourceArgs {
    fn load(&self) -> anyhow::Result<Loaded> {
        let config = match (&self.config, &self.preset) {
            (Some(path), None) => ProblemConfig::from_file(path)
                .with_context(|| format!("loading configuration from {}", path.display()))?,
            (None, Some(name)) => ProblemConfig::preset(name)?,
            // clap's argument group enforces exactly one source.
            _ => unreachable!("argument group guarantees exactly one source"),
        };
        let hash = config_hash(&config);
        let problem = config.build_problem().context("building the problem")?;
        Ok(Loaded {
            problem,
            config,
            hash,
        })
    }
}

fn config_hash(config: &ProblemConfig) -> String {
    let digest = Sha256::digest(config.canonical_toml().as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    hex[..16].to_string()
}

/// Fixed-width scientific notation; normalizes `-0.0` so reruns and
/// algebraically equal paths cannot disagree on the sign of zero.
fn fmt(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.12e}")
}

fn fmt_flag(flag: bool) -> &'static str {
    if flag {
        "1"
    } else {
        "0"
    }
}

fn variation_name(variation: PathVariation) -> &'static str {
    match variation {
        PathVariation::Bounded => "bounded",
        PathVariation::Unbounded => "unbounded",
    }
}

/// `# config_sha256=<hash> version=<crate version>` plus optional extras
/// (for example the simulation seed), then the header row.
fn preamble(hash: &str, extra: &str, header: &str) -> Vec<String> {
    let mut comment = format!("# config_sha256={hash} version={}", env!("CARGO_PKG_VERSION"));
    if !extra.is_empty() {
        comment.push(' ');
        comment.push_str(extra);
    }
    vec![comment, header.to_string()]
}

fn write_rows(out: &Option<PathBuf>, lines: &[String]) -> anyhow::Result<()> {
    let mut body = lines.join("\n");
    body.push('\n');
    match out {
        Some(path) => fs::write(path, body)
            .with_context(|| format!("writing output to {}", path.display()))?,
        None => std::io::stdout()
            .write_all(body.as_bytes())
            .context("writing output to stdout")?,
    }
    Ok(())
}

/// Grids must be nonempty, finite, and strictly increasing; rejecting the
/// degenerate cases here keeps every downstream loop panic-free.
fn validate_grid(name: &str, grid: &[f64]) -> anyhow::Result<()> {
    if grid.is_empty() {
        bail!("{name} must contain at least one value");
    }
    for &v in grid {
        if !v.is_finite() {
            bail!("{name} contains a non-finite value ({v})");
        }
    }
    for pair in grid.windows(2) {
        if pair[1] <= pair[0] {
            bail!(
                "{name} must be strictly increasing; found {} after {}",
                pair[1],
                pair[0]
            );
        }
    }
    Ok(())
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && hi > lo);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|k| lo + step * k as f64).collect()
}

fn default_beta_grid() -> Vec<f64> {
    let mut grid: Vec<f64> = (101..=109).map(|k| f64::from(k) / 100.0).collect();
    grid.extend((11..=19).map(|k| f64::from(k) / 10.0));
    grid.extend((2..=20).map(f64::from));
    grid
}

fn default_r_grid() -> Vec<f64> {
    let mut grid = Vec::new();
    for exponent in -4..=0_i32 {
        let scale = 10f64.powi(exponent);
        grid.extend((1..=9).map(|m| f64::from(m) * scale));
    }
    grid.extend([10.0, 20.0, 30.0, 40.0, LARGE_R_PROXY]);
    grid
}

/// Index at which to flag or insert a marker abscissa in a sorted grid:
/// `Ok(i)` flags the existing row `i`, `Err(i)` inserts before row `i`.
fn marker_position(grid: &[f64], target: f64) -> Result<usize, usize> {
    let insert_at = grid.partition_point(|&v| v < target);
    for candidate in [insert_at.wrapping_sub(1), insert_at] {
        if let Some(&v) = grid.get(candidate) {
            if (v - target).abs() <= MARKER_MATCH_TOL {
                return Ok(candidate);
            }
        }
    }
    Err(insert_at)
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

fn run_solve(args: SolveArgs) -> anyhow::Result<()> {
    let loaded = args.source.load()?;
    let problem = &loaded.problem;
    let diagnostics = problem.model().diagnostics();
    let solution = problem.optimal_barrier()?;
    if !solution.converged {
        bail!(
            "barrier search did not converge (b = {}, g = {})",
            solution.b_star,
            problem.g(solution.b_star)
        );
    }
    let value_at_b_star = problem.value(solution.b_star, solution.b_star)?;

    println!("variation = {}", variation_name(diagnostics.variation));
    println!("psi_prime_at_zero = {}", fmt(diagnostics.psi_prime_at_zero));
    println!("phi_q = {}", fmt(problem.pair().phi_q()));
    println!("phi_q_plus_r = {}", fmt(problem.pair().phi_qr()));
    println!("g_at_zero = {}", fmt(solution.g_at_zero));
    println!("b_star = {}", fmt(solution.b_star));
    println!("c_at_b_star = {}", fmt(solution.c_at_b_star));
    println!("value_at_b_star = {}", fmt(value_at_b_star));
    if solution.b_star == 0.0 {
        // Reflection at zero: the zero-barrier criterion g(0) <= 0 is the
        // whole optimality certificate, so surface its value explicitly.
        println!(
            "zero_barrier_condition = g(0) = {} <= 0 (reflection at zero is optimal)",
            fmt(solution.g_at_zero)
        );
    }

    if args.output.out.is_some() {
        let mut lines = preamble(
            &loaded.hash,
            "",
            "variation,psi_prime_at_zero,phi_q,phi_q_plus_r,g_at_zero,b_star,c_at_b_star,value_at_b_star,converged",
        );
        lines.push(format!(
            "{},{},{},{},{},{},{},{},{}",
            variation_name(diagnostics.variation),
            fmt(diagnostics.psi_prime_at_zero),
            fmt(problem.pair().phi_q()),
            fmt(problem.pair().phi_qr()),
            fmt(solution.g_at_zero),
            fmt(solution.b_star),
            fmt(solution.c_at_b_star),
            fmt(value_at_b_star),
            fmt_flag(solution.converged),
        ));
        write_rows(&args.output.out, &lines)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// g-curve
// ---------------------------------------------------------------------------

fn run_g_curve(args: GCurveArgs) -> anyhow::Result<()> {
    let loaded = args.source.load()?;
    let problem = &loaded.problem;
    let solution = problem.optimal_barrier()?;
    let grid = match args.b_list {
        Some(list) => list,
        None => linspace(0.0, (2.0 * solution.b_star).max(4.0), 201),
    };
    validate_grid("--b-list", &grid)?;
    if grid[0] < 0.0 {
        bail!("--b-list contains a negative barrier ({})", grid[0]);
    }

    let mut rows: Vec<(f64, bool)> = grid.iter().map(|&b| (b, false)).collect();
    match marker_position(&grid, solution.b_star) {
        Ok(i) => rows[i] = (solution.b_star, true),
        Err(i) => rows.insert(i, (solution.b_star, true)),
    }

    let mut lines = preamble(&loaded.hash, "", "b,g,is_b_star");
    for (b, is_root) in rows {
        lines.push(format!("{},{},{}", fmt(b), fmt(problem.g(b)), fmt_flag(is_root)));
    }
    write_rows(&args.output.out, &lines)
}

// ---------------------------------------------------------------------------
// value
// ---------------------------------------------------------------------------

fn run_value(args: ValueArgs) -> anyhow::Result<()> {
    let loaded = args.source.load()?;
    let problem = &loaded.problem;
    let solution = problem.optimal_barrier()?;
    let b_list = args.b_list.unwrap_or_else(|| vec![solution.b_star]);
    validate_grid("--b-list", &b_list)?;
    if b_list[0] < 0.0 {
        bail!("--b-list contains a negative barrier ({})", b_list[0]);
    }
    let x_grid = args.x_grid.unwrap_or_else(|| linspace(0.0, 10.0, 201));
    validate_grid("--x-grid", &x_grid)?;

    let mut lines = preamble(&loaded.hash, "", "b,x,v,is_barrier");
    for &b in &b_list {
        let vf = problem.value_function(b)?;
        let mut rows: Vec<(f64, bool)> = x_grid.iter().map(|&x| (x, false)).collect();
        // Marker row (b, v_b(b)) so plots can dot the barrier on each curve.
        match marker_position(&x_grid, b) {
            Ok(i) => rows[i] = (b, true),
            Err(i) => rows.insert(i, (b, true)),
        }
        for (x, is_barrier) in rows {
            lines.push(format!(
                "{},{},{},{}",
                fmt(b),
                fmt(x),
                fmt(vf.value(x)),
                fmt_flag(is_barrier)
            ));
        }
    }
    write_rows(&args.output.out, &lines)
}

// ---------------------------------------------------------------------------
// sweeps
// ---------------------------------------------------------------------------

/// One solved member of a parameter sweep: the re-solved barrier and the
/// value curve on the common surplus grid, plus the value at the barrier.
struct SweepMember {
    parameter: f64,
    b_star: f64,
    values: Vec<f64>,
    value_at_b_star: f64,
}

/// Solve every member in parallel; results come back in grid order.
fn solve_sweep(
    base: &ProblemConfig,
    parameters: &[f64],
    x_grid: &[f64],
    apply: impl Fn(&mut ProblemConfig, f64) + Sync,
) -> anyhow::Result<Vec<SweepMember>> {
    parameters
        .par_iter()
        .map(|&parameter| {
            let mut config = base.clone();
            apply(&mut config, parameter);
            let problem = config
                .build_problem()
                .with_context(|| format!("building problem for parameter {parameter}"))?;
            let solution = problem.optimal_barrier()?;
            if !solution.converged {
                bail!("barrier search did not converge for parameter {parameter}");
            }
            let vf = problem.value_function(solution.b_star)?;
            Ok(SweepMember {
                parameter,
                b_star: solution.b_star,
                values: x_grid.iter().map(|&x| vf.value(x)).collect(),
                value_at_b_star: vf.value(solution.b_star),
            })
        })
        .collect()
}

/// `label` is `None` for sweeps without a label column and `Some(text)` when
/// the schema carries one (empty text for unlabeled rows).
fn push_sweep_rows(
    lines: &mut Vec<String>,
    member: &SweepMember,
    x_grid: &[f64],
    label: Option<&str>,
) {
    let mut rows: Vec<(f64, f64, bool)> = x_grid
        .iter()
        .zip(&member.values)
        .map(|(&x, &v)| (x, v, false))
        .collect();
    let marker = (member.b_star, member.value_at_b_star, true);
    match marker_position(x_grid, member.b_star) {
        Ok(i) => rows[i] = marker,
        Err(i) => rows.insert(i, marker),
    }
    for (x, v, is_b_star) in rows {
        let mut line = format!(
            "{},{},{},{},{}",
            fmt(member.parameter),
            fmt(member.b_star),
            fmt(x),
            fmt(v),
            fmt_flag(is_b_star)
        );
        if let Some(text) = label {
            line.push(',');
            line.push_str(text);
        }
        lines.push(line);
    }
}

fn run_sweep_beta(args: SweepBetaArgs) -> anyhow::Result<()> {
    let loaded = args.source.load()?;
    let beta_grid = args.beta_grid.unwrap_or_else(default_beta_grid);
    validate_grid("--beta-grid", &beta_grid)?;
    if beta_grid[0] <= 1.0 {
        bail!("--beta-grid values must exceed 1 (found {})", beta_grid[0]);
    }
    let x_grid = args.x_grid.unwrap_or_else(|| linspace(0.0, 10.0, 21));
    validate_grid("--x-grid", &x_grid)?;

    let members = solve_sweep(&loaded.config, &beta_grid, &x_grid, |config, beta| {
        config.beta = beta;
    })?;

    let mut lines = preamble(&loaded.hash, "", "beta,b_star,x,v,is_b_star");
    for member in &members {
        push_sweep_rows(&mut lines, member, &x_grid, None);
    }
    write_rows(&args.output.out, &lines)?;

    // Dearer injections can only lower the value, and the optimal buffer
    // against them can only grow.
    for pair in members.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        for (k, &x) in x_grid.iter().enumerate() {
            if hi.values[k] > lo.values[k] + MONOTONE_TOL {
                bail!(
                    "monotonicity violated: v(x = {x}) rises from {} to {} as beta goes {} -> {}",
                    lo.values[k],
                    hi.values[k],
                    lo.parameter,
                    hi.parameter
                );
            }
        }
        if hi.b_star < lo.b_star - MONOTONE_TOL {
            bail!(
                "monotonicity violated: b* falls from {} to {} as beta goes {} -> {}",
                lo.b_star,
                hi.b_star,
                lo.parameter,
                hi.parameter
            );
        }
    }
    Ok(())
}

fn run_sweep_r(args: SweepRArgs) -> anyhow::Result<()> {
    let loaded = args.source.load()?;
    let r_grid = args.r_grid.unwrap_or_else(default_r_grid);
    validate_grid("--r-grid", &r_grid)?;
    if r_grid[0] <= 0.0 {
        bail!("--r-grid values must be positive (found {})", r_grid[0]);
    }
    let x_grid = args.x_grid.unwrap_or_else(|| linspace(0.0, 10.0, 21));
    validate_grid("--x-grid", &x_grid)?;

    let members = solve_sweep(&loaded.config, &r_grid, &x_grid, |config, r| {
        config.r = r;
    })?;

    let mut lines = preamble(&loaded.hash, "", "r,b_star,x,v,is_b_star,label");
    for member in &members {
        let label = if member.parameter == LARGE_R_PROXY {
            "large-r-proxy"
        } else {
            ""
        };
        push_sweep_rows(&mut lines, member, &x_grid, Some(label));
    }
    write_rows(&args.output.out, &lines)?;

    // More frequent dividend opportunities can only add value, and the
    // barrier creeps up toward its continuous-observation limit.
    for pair in members.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        for (k, &x) in x_grid.iter().enumerate() {
            if hi.values[k] < lo.values[k] - MONOTONE_TOL {
                bail!(
                    "monotonicity violated: v(x = {x}) falls from {} to {} as r goes {} -> {}",
                    lo.values[k],
                    hi.values[k],
                    lo.parameter,
                    hi.parameter
                );
            }
        }
        if hi.b_star < lo.b_star - MONOTONE_TOL {
            bail!(
                "monotonicity violated: b* falls from {} to {} as r goes {} -> {}",
                lo.b_star,
                hi.b_star,
                lo.parameter,
                hi.parameter
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn run_simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let loaded = args.source.load()?;
    let problem = &loaded.problem;
    let solution = problem.optimal_barrier()?;
    let b_list = args.b_list.unwrap_or_else(|| vec![solution.b_star]);
    validate_grid("--b-list", &b_list)?;
    if b_list[0] < 0.0 {
        bail!("--b-list contains a negative barrier ({})", b_list[0]);
    }
    let x_grid = args.x_grid.unwrap_or_else(|| vec![0.0, 1.0, 2.0]);
    validate_grid("--x-grid", &x_grid)?;

    let config = SimConfig {
        time_step: args.dt,
        n_paths: args.paths,
        discount_cutoff: 1e-4,
        seed: args.seed,
        antithetic: true,
    };

    let mut lines = preamble(
        &loaded.hash,
        &format!("seed={} paths={} dt={}", args.seed, args.paths, fmt(args.dt)),
        "b,x,mc_mean,mc_std_error,truncation_bound,analytic_value,abs_error,tolerance,ok",
    );
    let mut failures = Vec::new();
    for &b in &b_list {
        let vf = problem.value_function(b)?;
        for &x in &x_grid {
            let estimate = levy_dividends::simulate::estimate_value(problem, b, x, &config)?;
            let analytic = vf.value(x);
            let abs_error = (estimate.mean - analytic).abs();
            // Accept within three standard errors or 1% of the value,
            // whichever is looser; the truncation bound is reported so the
            // reader can see how much of the tolerance the horizon eats.
            let tolerance = (3.0 * estimate.std_error).max(0.01 * analytic.abs());
            let ok = abs_error <= tolerance;
            if !ok {
                failures.push(format!(
                    "b = {b}, x = {x}: |{} - {}| = {} > {}",
                    estimate.mean, analytic, abs_error, tolerance
                ));
            }
            lines.push(format!(
                "{},{},{},{},{},{},{},{},{}",
                fmt(b),
                fmt(x),
                fmt(estimate.mean),
                fmt(estimate.std_error),
                fmt(estimate.truncation_bound),
                fmt(analytic),
                fmt(abs_error),
                fmt(tolerance),
                fmt_flag(ok)
            ));
        }
    }
    write_rows(&args.output.out, &lines)?;
    if !failures.is_empty() {
        bail!("monte carlo mismatch: {}", failures.join("; "));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// vi-check
// ---------------------------------------------------------------------------

fn run_vi_check(args: ViCheckArgs) -> anyhow::Result<()> {
    let loaded = args.source.load()?;
    let problem = &loaded.problem;
    let solution = problem.optimal_barrier()?;
    let b_list = args.b_list.unwrap_or_else(|| vec![solution.b_star]);
    validate_grid("--b-list", &b_list)?;
    if b_list[0] < 0.0 {
        bail!("--b-list contains a negative barrier ({})", b_list[0]);
    }
    if let Some(grid) = &args.x_grid {
        validate_grid("--x-grid", grid)?;
    }

    let mut lines = preamble(
        &loaded.hash,
        "",
        "b,x,generator_residual,scan_gain,analytic_gain,vi_lhs,v_prime,ok",
    );
    let mut failures = Vec::new();
    for &b in &b_list {
        let grid = match &args.x_grid {
            Some(grid) => grid.clone(),
            None => default_vi_grid(b),
        };
        let report = problem.vi_report(b, &grid)?;
        for point in &report.points {
            lines.push(format!(
                "{},{},{},{},{},{},{},{}",
                fmt(b),
                fmt(point.x),
                fmt(point.generator_residual),
                fmt(point.scan_gain),
                fmt(point.analytic_gain),
                fmt(point.vi_lhs),
                fmt(point.v_prime),
                fmt_flag(point.ok)
            ));
        }
        if !report.ok {
            failures.push(format!(
                "b = {b}: worst excess {} over {} points",
                report.worst_excess,
                report.points.len()
            ));
        }
    }
    write_rows(&args.output.out, &lines)?;
    if !failures.is_empty() {
        bail!("variational inequality violated: {}", failures.join("; "));
    }
    Ok(())
}
