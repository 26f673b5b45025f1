//! Command-line front end: single solves, convergence studies, and the
//! coefficient/phi self-checks.
//!
//! Run options may come from a line-oriented `key=value` config file
//! (`--config`); any flag passed explicitly on the command line overrides
//! the file. Exit codes: 0 on success, 1 on usage errors, 2 on numerical
//! failure.

use std::collections::HashMap;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::harness::{
    check_order_conditions, check_phi, emit_outputs, run_convergence, HarnessError, ReferenceMode,
    RunConfig,
};
use crate::integrators::{integrate, MethodId, TimeGrid};
use crate::phi::{Backend, PhiEvaluator};
use crate::problems::{by_name, PROBLEM_NAMES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Parser)]
#[command(
    name = "expdpg",
    version,
    about = "Exponential time integrators for stiff ODE systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and emit it as CSV.
    Solve(RunArgs),
    /// Run a convergence study over a ladder of step counts.
    Converge(RunArgs),
    /// Verify the stiff order-condition identities of the coefficient formulas.
    CheckOrderConditions {
        /// Number of scalar samples in [-5, 5].
        #[arg(long, default_value_t = 20)]
        samples: usize,
        /// Dimension of the random test matrices.
        #[arg(long, default_value_t = 6)]
        dim: usize,
    },
    /// Self-test the phi-function kernel against its dense oracle.
    CheckPhi {
        /// Action tolerance for the Krylov comparison.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
}

#[derive(Args, Default)]
struct RunArgs {
    /// Config file with `key=value` lines; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem name (ho, riccati, linear-decay).
    #[arg(long)]
    problem: Option<String>,
    /// Method name (euler-classic, hybrid-euler, dpg2, dpg3, linear-dpg-p0).
    #[arg(long)]
    method: Option<String>,
    /// Interior grid points per dimension for PDE problems.
    #[arg(long)]
    grid: Option<usize>,
    /// Initial time.
    #[arg(long)]
    t0: Option<f64>,
    /// Final time.
    #[arg(long = "T")]
    t_end: Option<f64>,
    /// Step counts: a comma list (4,8,16) or a doubling range (4..128).
    #[arg(long)]
    steps: Option<String>,
    /// Phi-action tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Phi backend (dense, krylov, taylor).
    #[arg(long)]
    backend: Option<String>,
    /// Error reference: `exact` or `self` (same method at 8x the finest N).
    #[arg(long)]
    reference: Option<String>,
    /// Output base path; writes `<out>.csv` (and `<out>.plot.csv` for studies).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A usage-level error (bad flags, names, or config), distinct from a
/// numerical failure during integration.
#[derive(Debug)]
struct UsageError(String);

fn parse_steps(spec: &str) -> Result<Vec<usize>, UsageError> {
    let bad = |s: &str| UsageError(format!("invalid step count '{s}'"));
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad(lo))?;
        let hi: usize = hi.trim().parse().map_err(|_| bad(hi))?;
        if lo == 0 || hi < lo {
            return Err(UsageError(format!("invalid step range '{spec}'")));
        }
        let mut list = Vec::new();
        let mut n = lo;
        while n <= hi {
            list.push(n);
            n *= 2;
        }
        return Ok(list);
    }
    spec.split(',')
        .map(|s| s.trim().parse().map_err(|_| bad(s)))
        .collect()
}

fn load_config(path: &PathBuf) -> Result<HashMap<String, String>, UsageError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            UsageError(format!(
                "config line {} is not `key=value`: '{raw}'",
                lineno + 1
            ))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn config_value<T: FromStr>(
    map: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>, UsageError>
where
    T::Err: std::fmt::Display,
{
    match map.get(key) {
        None => Ok(None),
        Some(raw) => raw
            .parse()
            .map(Some)
            .map_err(|e| UsageError(format!("config key '{key}': {e}"))),
    }
}

/// Fully resolved run options: config-file values overridden by flags,
/// then defaults.
struct Resolved {
    problem: String,
    method: MethodId,
    grid_m: usize,
    t0: f64,
    t_end: f64,
    steps: Vec<usize>,
    evaluator: PhiEvaluator,
    reference: ReferenceMode,
    out: Option<PathBuf>,
}

fn resolve(args: &RunArgs, default_steps: &str) -> Result<Resolved, UsageError> {
    let file = match &args.config {
        Some(path) => load_config(path)?,
        None => HashMap::new(),
    };
    let known = [
        "problem",
        "method",
        "grid",
        "t0",
        "T",
        "steps",
        "tol",
        "backend",
        "reference",
        "out",
    ];
    for key in file.keys() {
        if !known.contains(&key.as_str()) {
            return Err(UsageError(format!(
                "unknown config key '{key}' (known: {})",
                known.join(", ")
            )));
        }
    }

    let problem = args
        .problem
        .clone()
        .or_else(|| file.get("problem").cloned())
        .ok_or_else(|| {
            UsageError(format!(
                "missing --problem (available: {})",
                PROBLEM_NAMES.join(", ")
            ))
        })?;
    let method_name = args
        .method
        .clone()
        .or_else(|| file.get("method").cloned())
        .ok_or_else(|| {
            UsageError(format!(
                "missing --method (available: {})",
                MethodId::ALL_NAMES.join(", ")
            ))
        })?;
    let method = MethodId::from_str(&method_name).map_err(UsageError)?;

    let mut evaluator = PhiEvaluator::default();
    evaluator.tol = args
        .tol
        .or(config_value(&file, "tol")?)
        .unwrap_or(evaluator.tol);
    if let Some(backend) = args.backend.clone().or_else(|| file.get("backend").cloned()) {
        evaluator.backend = Backend::from_str(&backend).map_err(UsageError)?;
    }
    evaluator.validate().map_err(UsageError)?;

    let reference = match args
        .reference
        .clone()
        .or_else(|| file.get("reference").cloned())
    {
        Some(raw) => ReferenceMode::from_str(&raw).map_err(UsageError)?,
        None => ReferenceMode::SelfConverged,
    };

    let steps_spec = args
        .steps
        .clone()
        .or_else(|| file.get("steps").cloned())
        .unwrap_or_else(|| default_steps.to_string());

    Ok(Resolved {
        problem,
        method,
        grid_m: args.grid.or(config_value(&file, "grid")?).unwrap_or(32),
        t0: args.t0.or(config_value(&file, "t0")?).unwrap_or(0.0),
        t_end: args.t_end.or(config_value(&file, "T")?).unwrap_or(1.0),
        steps: parse_steps(&steps_spec)?,
        evaluator,
        reference,
        out: args.out.clone().or_else(|| file.get("out").map(PathBuf::from)),
    })
}

fn numerical_exit(err: &HarnessError) -> i32 {
    match err {
        HarnessError::Config(_) | HarnessError::Problem(_) | HarnessError::NoExactSolution(_) => {
            EXIT_USAGE
        }
        _ => EXIT_NUMERICAL,
    }
}

fn run_solve(args: &RunArgs) -> Result<i32, UsageError> {
    let opts = resolve(args, "64")?;
    if opts.steps.len() != 1 {
        return Err(UsageError(
            "solve takes a single step count, e.g. --steps 64".into(),
        ));
    }
    let problem = match by_name(&opts.problem, opts.grid_m) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(EXIT_USAGE);
        }
    };
    let grid = match TimeGrid::new(opts.t0, opts.t_end, opts.steps[0]) {
        Ok(g) => g,
        Err(e) => return Err(UsageError(e)),
    };
    let traj = match integrate(
        &problem.system,
        &grid,
        &problem.u0,
        opts.method,
        &opts.evaluator,
    ) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(EXIT_NUMERICAL);
        }
    };

    let dim = problem.u0.len();
    let mut csv = String::from("t");
    for i in 0..dim {
        csv.push_str(&format!(",u{i}"));
    }
    csv.push('\n');
    for (t, u) in traj.times.iter().zip(&traj.states) {
        csv.push_str(&format!("{t:.16e}"));
        for i in 0..dim {
            csv.push_str(&format!(",{:.16e}", u[i]));
        }
        csv.push('\n');
    }
    match &opts.out {
        Some(base) => {
            let path = base.with_extension("csv");
            if let Err(e) = std::fs::write(&path, &csv) {
                eprintln!("error: failed to write {}: {e}", path.display());
                return Ok(EXIT_NUMERICAL);
            }
            println!(
                "wrote {} ({} states, {} phi actions)",
                path.display(),
                traj.states.len(),
                traj.total_phi_actions()
            );
        }
        None => print!("{csv}"),
    }
    Ok(EXIT_OK)
}

fn run_converge(args: &RunArgs) -> Result<i32, UsageError> {
    let opts = resolve(args, "4..128")?;
    let cfg = RunConfig {
        problem: opts.problem,
        method: opts.method,
        grid_m: opts.grid_m,
        t0: opts.t0,
        t_end: opts.t_end,
        steps_list: opts.steps,
        evaluator: opts.evaluator,
        reference: opts.reference,
        out: opts.out.clone(),
    };
    let report = match run_convergence(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(numerical_exit(&e));
        }
    };

    println!(
        "problem={} method={} norm={} reference={}",
        report.problem,
        report.method.name(),
        report.norm,
        report.reference.label()
    );
    println!("{:>8} {:>14} {:>14}  flag", "N", "h", "error");
    for row in &report.rows {
        println!(
            "{:>8} {:>14.6e} {:>14.6e}  {}",
            row.steps,
            row.h,
            row.error,
            if row.roundoff { "round-off floor" } else { "" }
        );
    }
    let pairwise: Vec<String> = report
        .pairwise_slopes
        .iter()
        .map(|s| format!("{s:.3}"))
        .collect();
    println!(
        "fitted slope: {:.4} (pairwise: {})",
        report.fitted_slope,
        pairwise.join(", ")
    );

    if let Some(base) = &opts.out {
        if let Err(e) = emit_outputs(&report, base) {
            eprintln!("error: {e}");
            return Ok(EXIT_NUMERICAL);
        }
        println!(
            "wrote {} and {}",
            base.with_extension("csv").display(),
            base.with_extension("plot.csv").display()
        );
    }
    Ok(EXIT_OK)
}

fn run_check_order_conditions(samples: usize, dim: usize) -> i32 {
    let zs: Vec<f64> = (0..samples)
        .map(|i| {
            if samples == 1 {
                0.0
            } else {
                -5.0 + 10.0 * i as f64 / (samples - 1) as f64
            }
        })
        .collect();
    let table = check_order_conditions(&zs, dim, 5);
    let mut worst: f64 = 0.0;
    println!("{:<40} max residual", "condition");
    for row in &table {
        println!("{:<40} {:.3e}", row.name, row.max_residual);
        worst = worst.max(row.max_residual);
    }
    if worst <= 1e-12 {
        println!("all residuals <= 1e-12");
        EXIT_OK
    } else {
        eprintln!("error: worst residual {worst:.3e} exceeds 1e-12");
        EXIT_NUMERICAL
    }
}

fn run_check_phi(tol: f64) -> i32 {
    let mut eval = PhiEvaluator::default();
    eval.tol = tol;
    if let Err(e) = eval.validate() {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    let table = check_phi(&eval);
    let bounds = [1e-10, 1e-14, 10.0 * eval.tol];
    println!("{:<50} residual     bound", "check");
    let mut ok = true;
    for (row, bound) in table.iter().zip(bounds) {
        println!("{:<50} {:.3e}   {:.1e}", row.name, row.max_residual, bound);
        ok &= row.max_residual <= bound;
    }
    if ok {
        println!("phi kernel self-test passed");
        EXIT_OK
    } else {
        eprintln!("error: phi kernel self-test failed");
        EXIT_NUMERICAL
    }
}

/// Entry point shared by the binary and the tests. Returns the process
/// exit code instead of exiting, so callers stay testable.
pub fn cli_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Solve(args) => run_solve(args),
        Command::Converge(args) => run_converge(args),
        Command::CheckOrderConditions { samples, dim } => {
            return run_check_order_conditions(*samples, *dim)
        }
        Command::CheckPhi { tol } => return run_check_phi(*tol),
    };
    match result {
        Ok(code) => code,
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_comma_list_and_doubling_range() {
        assert_eq!(parse_steps("4,8,16").unwrap(), vec![4, 8, 16]);
        assert_eq!(parse_steps("4..128").unwrap(), vec![4, 8, 16, 32, 64, 128]);
        assert_eq!(parse_steps("3..20").unwrap(), vec![3, 6, 12]);
        assert!(parse_steps("0..8").is_err());
        assert!(parse_steps("x,2").is_err());
    }

    #[test]
    fn config_file_overridden_by_flags() {
        let dir = std::env::temp_dir().join("expdpg-cli-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        std::fs::write(
            &path,
            "# study setup\nproblem = riccati\nmethod = dpg2\nT = 0.5\nsteps = 8,16\n",
        )
        .unwrap();
        let args = RunArgs {
            config: Some(path),
            method: Some("dpg3".into()),
            ..RunArgs::default()
        };
        let opts = resolve(&args, "4..128").unwrap();
        assert_eq!(opts.problem, "riccati");
        assert_eq!(opts.method, MethodId::Dpg3);
        assert_eq!(opts.t_end, 0.5);
        assert_eq!(opts.steps, vec![8, 16]);
    }

    #[test]
    fn unknown_config_key_rejected() {
        let dir = std::env::temp_dir().join("expdpg-cli-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.cfg");
        std::fs::write(&path, "stepz = 8\n").unwrap();
        let args = RunArgs {
            config: Some(path),
            problem: Some("riccati".into()),
            method: Some("dpg2".into()),
            ..RunArgs::default()
        };
        assert!(resolve(&args, "4..128").is_err());
    }

    #[test]
    fn missing_method_names_the_options() {
        let args = RunArgs {
            problem: Some("riccati".into()),
            ..RunArgs::default()
        };
        let err = match resolve(&args, "4..128") {
            Err(UsageError(msg)) => msg,
            Ok(_) => panic!("expected a usage error"),
        };
        assert!(err.contains("dpg3"), "{err}");
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(
            cli_main(["expdpg", "converge", "--problem", "riccati", "--method", "nosuch"]),
            EXIT_USAGE
        );
        assert_eq!(cli_main(["expdpg", "nosuch-command"]), EXIT_USAGE);
    }

    #[test]
    fn order_condition_check_passes() {
        assert_eq!(cli_main(["expdpg", "check-order-conditions"]), EXIT_OK);
    }

    #[test]
    fn riccati_converge_runs_clean() {
        assert_eq!(
            cli_main([
                "expdpg", "converge", "--problem", "riccati", "--method", "dpg3", "--T", "0.5",
                "--steps", "8,16,32", "--reference", "exact",
            ]),
            EXIT_OK
        );
    }
}
