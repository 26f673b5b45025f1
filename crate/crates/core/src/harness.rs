//! Convergence studies and verification reports.
//!
//! Runs a method over a ladder of step counts, measures the final-time
//! infinity-norm error against an exact or self-converged reference, fits
//! the observed order, and writes CSV / plot-ready data. Also hosts the
//! coefficient-identity and phi-kernel self-checks exposed by the CLI.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dense;
use crate::integrators::{integrate, IntegrateError, MethodId, TimeGrid};
use crate::phi::PhiEvaluator;
use crate::problems::{by_name, Problem, ProblemError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("run with {steps} steps failed: {source}")]
    Run {
        steps: usize,
        source: IntegrateError,
    },
    #[error("problem '{0}' has no exact solution; use the self-converged reference")]
    NoExactSolution(String),
    #[error("need at least 2 rows above the round-off floor to fit a slope, got {0}")]
    TooFewRows(usize),
    #[error("failed to write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// How the error of each run is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceMode {
    /// Compare against the problem's closed-form solution.
    Exact,
    /// Compare against the same method run at 8x the finest step count.
    SelfConverged,
}

impl ReferenceMode {
    pub fn label(&self) -> &'static str {
        match self {
            ReferenceMode::Exact => "exact",
            ReferenceMode::SelfConverged => "self-converged",
        }
    }
}

impl std::str::FromStr for ReferenceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(ReferenceMode::Exact),
            "self" => Ok(ReferenceMode::SelfConverged),
            other => Err(format!(
                "unknown reference mode '{other}' (available: exact, self)"
            )),
        }
    }
}

/// One row of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub steps: usize,
    pub h: f64,
    pub error: f64,
    /// True when the error sits below 100x the evaluator tolerance and is
    /// therefore excluded from the slope fit.
    pub roundoff: bool,
}

/// Result of a convergence study for one (problem, method) pair.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub problem: String,
    pub method: MethodId,
    /// Norm identifier; always the infinity norm at the final time.
    pub norm: &'static str,
    /// Rows sorted by decreasing h.
    pub rows: Vec<ConvergenceRow>,
    pub fitted_slope: f64,
    /// Slopes between consecutive fitted rows, for diagnostics.
    pub pairwise_slopes: Vec<f64>,
    pub reference: ReferenceMode,
}

/// Full description of one convergence study.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: String,
    pub method: MethodId,
    pub grid_m: usize,
    pub t0: f64,
    pub t_end: f64,
    /// Step counts, strictly increasing.
    pub steps_list: Vec<usize>,
    pub evaluator: PhiEvaluator,
    pub reference: ReferenceMode,
    /// Base path for emitted files; `<out>.csv` and `<out>.plot.csv`.
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.steps_list.is_empty() {
            return Err(HarnessError::Config("step list is empty".into()));
        }
        if !self.steps_list.windows(2).all(|w| w[0] < w[1]) {
            return Err(HarnessError::Config(
                "step list must be strictly increasing".into(),
            ));
        }
        if self.steps_list[0] == 0 {
            return Err(HarnessError::Config("step counts must be positive".into()));
        }
        if !(self.t_end > self.t0) {
            return Err(HarnessError::Config(format!(
                "final time {} must exceed initial time {}",
                self.t_end, self.t0
            )));
        }
        self.evaluator.validate().map_err(HarnessError::Config)
    }
}

fn final_state_for(
    problem: &Problem,
    t0: f64,
    t_end: f64,
    steps: usize,
    method: MethodId,
    eval: &PhiEvaluator,
) -> Result<DVector<f64>, HarnessError> {
    let grid = TimeGrid::new(t0, t_end, steps).map_err(HarnessError::Config)?;
    let traj = integrate(&problem.system, &grid, &problem.u0, method, eval)
        .map_err(|source| HarnessError::Run { steps, source })?;
    Ok(traj.final_state().clone())
}

/// Run one convergence study: integrate at every step count, measure the
/// final-time infinity-norm error against the configured reference, and fit
/// the observed order over the rows above the round-off floor.
pub fn run_convergence(cfg: &RunConfig) -> Result<ConvergenceReport, HarnessError> {
    cfg.validate()?;
    let problem = by_name(&cfg.problem, cfg.grid_m)?;

    let reference: Arc<dyn Fn(f64) -> DVector<f64>> = match cfg.reference {
        ReferenceMode::Exact => {
            let exact = problem
                .exact
                .clone()
                .ok_or_else(|| HarnessError::NoExactSolution(cfg.problem.clone()))?;
            Arc::new(move |t| exact(t))
        }
        ReferenceMode::SelfConverged => {
            let n_ref = 8 * cfg.steps_list.last().unwrap();
            let u_ref = final_state_for(
                &problem,
                cfg.t0,
                cfg.t_end,
                n_ref,
                cfg.method,
                &cfg.evaluator,
            )?;
            Arc::new(move |_| u_ref.clone())
        }
    };

    let floor = 100.0 * cfg.evaluator.tol;
    let mut rows = Vec::with_capacity(cfg.steps_list.len());
    for &steps in &cfg.steps_list {
        let u_end = final_state_for(
            &problem,
            cfg.t0,
            cfg.t_end,
            steps,
            cfg.method,
            &cfg.evaluator,
        )?;
        let error = (u_end - reference(cfg.t_end)).amax();
        rows.push(ConvergenceRow {
            steps,
            h: (cfg.t_end - cfg.t0) / steps as f64,
            error,
            roundoff: error < floor,
        });
    }

    let fitted: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| !r.roundoff)
        .map(|r| (r.h, r.error))
        .collect();
    let (fitted_slope, pairwise_slopes) = estimate_order(&fitted)?;

    Ok(ConvergenceReport {
        problem: cfg.problem.clone(),
        method: cfg.method,
        norm: "inf-final",
        rows,
        fitted_slope,
        pairwise_slopes,
        reference: cfg.reference,
    })
}

/// Least-squares slope of log(error) against log(h), plus the pairwise
/// slopes between consecutive rows for diagnostics.
pub fn estimate_order(rows: &[(f64, f64)]) -> Result<(f64, Vec<f64>), HarnessError> {
    if rows.len() < 2 {
        return Err(HarnessError::TooFewRows(rows.len()));
    }
    if rows.iter().any(|&(h, e)| !(h > 0.0) || !(e > 0.0)) {
        return Err(HarnessError::Config(
            "slope fitting needs positive step sizes and errors".into(),
        ));
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|&(h, e)| (h.ln(), e.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    let pairwise = pts
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    Ok((slope, pairwise))
}

/// One coefficient-identity residual.
#[derive(Debug, Clone)]
pub struct ConditionResidual {
    pub name: &'static str,
    pub max_residual: f64,
}

/// Verify the stiff order conditions satisfied by the two- and three-stage
/// coefficient formulas: for the two-stage scheme b1 + b2 = phi_1 and
/// b2/8 = phi_3; for the three-stage scheme b1 + b2 + b3 = phi_1,
/// b2/4 + b3 = 2*phi_3, and b2/8 + b3 = 6*phi_4. Each identity is evaluated
/// at every scalar sample and at seeded random matrices of the given
/// dimension; the returned table holds the worst residual per identity.
pub fn check_order_conditions(
    z_samples: &[f64],
    matrix_dim: usize,
    matrix_count: usize,
) -> Vec<ConditionResidual> {
    let mut table = vec![
        ConditionResidual {
            name: "two-stage: b1 + b2 - phi1",
            max_residual: 0.0,
        },
        ConditionResidual {
            name: "two-stage: b2/8 - phi3",
            max_residual: 0.0,
        },
        ConditionResidual {
            name: "three-stage: b1 + b2 + b3 - phi1",
            max_residual: 0.0,
        },
        ConditionResidual {
            name: "three-stage: b2/4 + b3 - 2*phi3",
            max_residual: 0.0,
        },
        ConditionResidual {
            name: "three-stage: b2/8 + b3 - 6*phi4",
            max_residual: 0.0,
        },
    ];

    let record = |table: &mut Vec<ConditionResidual>, residuals: [f64; 5]| {
        for (slot, r) in table.iter_mut().zip(residuals) {
            slot.max_residual = slot.max_residual.max(r);
        }
    };

    for &z in z_samples {
        let p1 = dense::phi_scalar(1, z);
        let p3 = dense::phi_scalar(3, z);
        let p4 = dense::phi_scalar(4, z);
        let (b1_2, b2_2) = (p1 - 8.0 * p3, 8.0 * p3);
        let b1_3 = p1 - 14.0 * p3 + 36.0 * p4;
        let b2_3 = 16.0 * p3 - 48.0 * p4;
        let b3_3 = 12.0 * p4 - 2.0 * p3;
        record(
            &mut table,
            [
                (b1_2 + b2_2 - p1).abs(),
                (b2_2 / 8.0 - p3).abs(),
                (b1_3 + b2_3 + b3_3 - p1).abs(),
                (b2_3 / 4.0 + b3_3 - 2.0 * p3).abs(),
                (b2_3 / 8.0 + b3_3 - 6.0 * p4).abs(),
            ],
        );
    }

    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..matrix_count {
        let m = DMatrix::from_fn(matrix_dim, matrix_dim, |_, _| rng.gen_range(-1.0..1.0));
        let phis = dense::phi_all(4, &m).expect("phi evaluation on a finite matrix");
        let (p1, p3, p4) = (&phis[1], &phis[3], &phis[4]);
        let b1_2 = p1 - p3 * 8.0;
        let b2_2 = p3 * 8.0;
        let b1_3 = p1 - p3 * 14.0 + p4 * 36.0;
        let b2_3 = p3 * 16.0 - p4 * 48.0;
        let b3_3 = p4 * 12.0 - p3 * 2.0;
        record(
            &mut table,
            [
                (&b1_2 + &b2_2 - p1).amax(),
                (&b2_2 / 8.0 - p3).amax(),
                (&b1_3 + &b2_3 + &b3_3 - p1).amax(),
                (&b2_3 / 4.0 + &b3_3 - p3 * 2.0).amax(),
                (&b2_3 / 8.0 + &b3_3 - p4 * 6.0).amax(),
            ],
        );
    }

    table
}

/// Phi-kernel self-test: recurrence residuals on random matrices, values at
/// zero, and Krylov-vs-dense agreement on a random stiff instance.
pub fn check_phi(eval: &PhiEvaluator) -> Vec<ConditionResidual> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);

    // Recurrence phi_{p+1}(M)*M = phi_p(M) - I/p! on random 8x8 matrices.
    let mut recurrence: f64 = 0.0;
    for _ in 0..5 {
        let m = DMatrix::from_fn(8, 8, |_, _| rng.gen_range(-1.0..1.0));
        let phis = dense::phi_all(5, &m).expect("phi evaluation on a finite matrix");
        for p in 0..5 {
            let mut factorial = 1.0;
            for k in 1..=p {
                factorial *= k as f64;
            }
            let lhs = &phis[p + 1] * &m;
            let rhs = &phis[p] - DMatrix::identity(8, 8) / factorial;
            recurrence = recurrence.max((lhs - rhs).amax());
        }
    }

    // phi_p(0) = 1/p!.
    let zero = DMatrix::zeros(4, 4);
    let phis0 = dense::phi_all(5, &zero).expect("phi evaluation at zero");
    let mut at_zero: f64 = 0.0;
    let mut factorial = 1.0;
    for (p, phi_p) in phis0.iter().enumerate() {
        if p > 0 {
            factorial *= p as f64;
        }
        at_zero = at_zero.max((phi_p - DMatrix::identity(4, 4) / factorial).amax());
    }

    // Krylov action against the dense oracle on a random dim-16 instance.
    let dim = 16;
    let a = DMatrix::from_fn(dim, dim, |r, c| {
        if r == c {
            -rng.gen_range(1.0..20.0)
        } else {
            rng.gen_range(-0.5..0.5)
        }
    });
    let v = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
    let op = crate::operator::LinearOperator::dense(a.clone());
    let mut krylov_eval = eval.clone();
    krylov_eval.backend = crate::phi::Backend::KrylovArnoldi;
    krylov_eval.dense_threshold = 1;
    let h = 0.5;
    let mut krylov_vs_dense: f64 = 0.0;
    for p in 0..=4 {
        let got = crate::phi::phi_action(&op, h, &v, p, &krylov_eval)
            .expect("Krylov phi action on a small dense instance");
        let want = dense::phi(p, &(&a * h)).expect("dense phi oracle") * &v;
        krylov_vs_dense = krylov_vs_dense.max((got - want).amax() / v.amax());
    }

    vec![
        ConditionResidual {
            name: "recurrence phi_{p+1}(M)*M - (phi_p(M) - I/p!)",
            max_residual: recurrence,
        },
        ConditionResidual {
            name: "phi_p(0) - I/p!",
            max_residual: at_zero,
        },
        ConditionResidual {
            name: "krylov vs dense action (relative)",
            max_residual: krylov_vs_dense,
        },
    ]
}

/// Render the report as CSV. Header is `N,h,error`; rows are sorted by
/// decreasing h; rows under the round-off floor are flagged in trailing
/// comment lines and the fitted slope is recorded as a comment.
pub fn report_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from("N,h,error\n");
    for row in &report.rows {
        writeln!(out, "{},{:.16e},{:.16e}", row.steps, row.h, row.error).unwrap();
    }
    for row in report.rows.iter().filter(|r| r.roundoff) {
        writeln!(
            out,
            "# round-off floor: N={} excluded from the slope fit",
            row.steps
        )
        .unwrap();
    }
    writeln!(out, "# fitted_slope,{:.6}", report.fitted_slope).unwrap();
    out
}

/// Render plot-ready log-log data: per row, log10 h and log10 error plus
/// rate-2/3/4 guide lines anchored at the first data point, so that
/// guide_k(h) = e0 * (h/h0)^k.
pub fn plot_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from("log10_h,log10_error,rate2_guide,rate3_guide,rate4_guide\n");
    if report.rows.is_empty() {
        return out;
    }
    let (h0, e0) = (report.rows[0].h, report.rows[0].error);
    for row in &report.rows {
        let lh = row.h.log10();
        let guide = |k: f64| e0.log10() + k * (row.h / h0).log10();
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            lh,
            row.error.log10(),
            guide(2.0),
            guide(3.0),
            guide(4.0)
        )
        .unwrap();
    }
    out
}

/// Write `<base>.csv` and `<base>.plot.csv` for the report.
pub fn emit_outputs(report: &ConvergenceReport, base: &Path) -> Result<(), HarnessError> {
    let csv_path = base.with_extension("csv");
    let plot_path = base.with_extension("plot.csv");
    std::fs::write(&csv_path, report_csv(report)).map_err(|source| HarnessError::Io {
        path: csv_path.clone(),
        source,
    })?;
    std::fs::write(&plot_path, plot_csv(report)).map_err(|source| HarnessError::Io {
        path: plot_path.clone(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn riccati_config(method: MethodId, steps_list: Vec<usize>) -> RunConfig {
        RunConfig {
            problem: "riccati".into(),
            method,
            grid_m: 32,
            t0: 0.0,
            t_end: 0.5,
            steps_list,
            evaluator: PhiEvaluator::default(),
            reference: ReferenceMode::Exact,
            out: None,
        }
    }

    #[test]
    fn exact_halving_gives_slope_two() {
        let (slope, pairwise) = estimate_order(&[(0.1, 1e-2), (0.05, 2.5e-3)]).unwrap();
        assert!((slope - 2.0).abs() <= 1e-12);
        assert_eq!(pairwise.len(), 1);
        assert!((pairwise[0] - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn collinear_rows_match_pairwise_slopes() {
        let rows = [(0.2, 8e-3), (0.1, 1e-3), (0.05, 1.25e-4)];
        let (slope, pairwise) = estimate_order(&rows).unwrap();
        for p in &pairwise {
            assert!((slope - p).abs() <= 1e-12);
        }
    }

    #[test]
    fn perturbed_rows_stay_within_pairwise_spread() {
        let rows = [(0.2, 8.4e-3), (0.1, 0.97e-3), (0.05, 1.31e-4)];
        let (slope, pairwise) = estimate_order(&rows).unwrap();
        let lo = pairwise.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = pairwise.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(slope >= lo - 1e-12 && slope <= hi + 1e-12);
    }

    #[test]
    fn too_few_rows_rejected() {
        assert!(matches!(
            estimate_order(&[(0.1, 1e-2)]),
            Err(HarnessError::TooFewRows(1))
        ));
    }

    #[test]
    fn riccati_dpg2_fits_third_order() {
        let cfg = riccati_config(MethodId::Dpg2, vec![8, 16, 32, 64]);
        let report = run_convergence(&cfg).unwrap();
        assert!(
            (report.fitted_slope - 3.0).abs() <= 0.15,
            "slope {}",
            report.fitted_slope
        );
    }

    #[test]
    fn riccati_reference_modes_agree() {
        let exact = run_convergence(&riccati_config(MethodId::Dpg2, vec![8, 16, 32, 64])).unwrap();
        let mut cfg = riccati_config(MethodId::Dpg2, vec![8, 16, 32, 64]);
        cfg.reference = ReferenceMode::SelfConverged;
        let selfref = run_convergence(&cfg).unwrap();
        assert!(
            (exact.fitted_slope - selfref.fitted_slope).abs() <= 0.1,
            "exact {} vs self {}",
            exact.fitted_slope,
            selfref.fitted_slope
        );
    }

    #[test]
    fn roundoff_rows_are_flagged_and_excluded() {
        let mut cfg = riccati_config(MethodId::Dpg3, vec![8, 16, 32, 64, 128, 256]);
        cfg.evaluator.tol = 1e-12;
        let report = run_convergence(&cfg).unwrap();
        // The finest runs of a fourth-order method on this problem sit below
        // the 1e-10 floor; flagged rows must not feed the fit.
        assert!(report.rows.iter().any(|r| r.roundoff), "no flagged rows");
        assert!(
            (report.fitted_slope - 4.0).abs() <= 0.2,
            "slope {}",
            report.fitted_slope
        );
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = riccati_config(MethodId::Dpg2, vec![]);
        assert!(matches!(
            run_convergence(&cfg),
            Err(HarnessError::Config(_))
        ));
        cfg.steps_list = vec![16, 8];
        assert!(matches!(
            run_convergence(&cfg),
            Err(HarnessError::Config(_))
        ));
        cfg.steps_list = vec![8, 16];
        cfg.t_end = cfg.t0;
        assert!(matches!(
            run_convergence(&cfg),
            Err(HarnessError::Config(_))
        ));
    }

    #[test]
    fn order_condition_residuals_vanish() {
        let samples: Vec<f64> = (0..20).map(|i| -5.0 + 10.0 * i as f64 / 19.0).collect();
        for row in check_order_conditions(&samples, 6, 5) {
            assert!(row.max_residual <= 1e-12, "{}: {}", row.name, row.max_residual);
        }
    }

    #[test]
    fn order_conditions_trivial_at_zero() {
        let table = check_order_conditions(&[0.0], 2, 0);
        for row in &table {
            assert!(row.max_residual <= 1e-15, "{}: {}", row.name, row.max_residual);
        }
    }

    #[test]
    fn phi_self_check_is_clean() {
        let table = check_phi(&PhiEvaluator::default());
        assert!(table[0].max_residual <= 1e-10, "recurrence {}", table[0].max_residual);
        assert!(table[1].max_residual <= 1e-14, "at zero {}", table[1].max_residual);
        assert!(
            table[2].max_residual <= 10.0 * PhiEvaluator::default().tol,
            "krylov vs dense {}",
            table[2].max_residual
        );
    }

    #[test]
    fn csv_has_header_and_one_line_per_row() {
        let report = ConvergenceReport {
            problem: "riccati".into(),
            method: MethodId::Dpg2,
            norm: "inf-final",
            rows: vec![
                ConvergenceRow { steps: 4, h: 0.25, error: 1e-2, roundoff: false },
                ConvergenceRow { steps: 8, h: 0.125, error: 1.25e-3, roundoff: false },
                ConvergenceRow { steps: 16, h: 0.0625, error: 1e-11, roundoff: true },
            ],
            fitted_slope: 3.0,
            pairwise_slopes: vec![3.0],
            reference: ReferenceMode::Exact,
        };
        let csv = report_csv(&report);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "N,h,error");
        assert_eq!(lines.iter().filter(|l| !l.starts_with('#')).count(), 4);
        assert!(lines.iter().any(|l| l.contains("round-off floor: N=16")));

        // Round-trip: parsing the emitted rows reproduces the report.
        let parsed: Vec<(usize, f64, f64)> = lines[1..]
            .iter()
            .filter(|l| !l.starts_with('#'))
            .map(|l| {
                let mut it = l.split(',');
                (
                    it.next().unwrap().parse().unwrap(),
                    it.next().unwrap().parse().unwrap(),
                    it.next().unwrap().parse().unwrap(),
                )
            })
            .collect();
        for (row, &(n, h, e)) in report.rows.iter().zip(&parsed) {
            assert_eq!(row.steps, n);
            assert_eq!(row.h, h);
            assert_eq!(row.error, e);
        }
    }

    #[test]
    fn plot_guides_anchor_at_first_point() {
        let report = ConvergenceReport {
            problem: "riccati".into(),
            method: MethodId::Dpg3,
            norm: "inf-final",
            rows: vec![
                ConvergenceRow { steps: 4, h: 0.25, error: 1e-2, roundoff: false },
                ConvergenceRow { steps: 8, h: 0.125, error: 6.25e-4, roundoff: false },
            ],
            fitted_slope: 4.0,
            pairwise_slopes: vec![4.0],
            reference: ReferenceMode::Exact,
        };
        let plot = plot_csv(&report);
        let lines: Vec<&str> = plot.lines().collect();
        let second: Vec<f64> = lines[2].split(',').map(|v| v.parse().unwrap()).collect();
        // rate-4 guide at h = h0/2: log10(e0) - 4 log10(2).
        let expected = (1e-2f64).log10() - 4.0 * 2.0f64.log10();
        assert!((second[4] - expected).abs() <= 1e-12);
        // A fourth-order data set lies on its own rate-4 guide.
        assert!((second[1] - second[4]).abs() <= 1e-12);
    }

    #[test]
    fn determinism_byte_identical_reports() {
        let cfg = riccati_config(MethodId::Dpg2, vec![8, 16, 32]);
        let a = report_csv(&run_convergence(&cfg).unwrap());
        let b = report_csv(&run_convergence(&cfg).unwrap());
        assert_eq!(a, b);
    }
}
