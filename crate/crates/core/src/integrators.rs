//! Time-stepping schemes.
//!
//! All nonlinear methods share the same exponential stage
//!
//! ```text
//!     u_n2 = u_n + h phi_2(h J_n) F(u_n),
//! ```
//!
//! and differ in how the trace u_{n+1} is assembled:
//!
//! * hybrid Euler: trace post-processed with a matrix-vector product,
//!   no further φ-action; equivalent to classical exponential Euler.
//! * two-stage: trace from phi_1 and phi_3 acting on remainder
//!   differences (third order).
//! * three-stage: second internal stage post-processed from the first,
//!   a Jacobian-dependent correction factor, phi_1/phi_3/phi_4 in the
//!   update (fourth order).
//!
//! Each φ-linear combination with a shared operator is batched into a
//! single augmented action, so per-step exponential solves are 1 for
//! the Euler variants and 2 for both DPG methods.

use nalgebra::DVector;
use thiserror::Error;

use crate::model::{Linearization, ModelError, NonlinearSystem};
use crate::operator::LinearOperator;
use crate::phi::{combo_action, PhiError, PhiEvaluator};

#[derive(Debug, Error)]
pub enum StepError {
    #[error(transparent)]
    Phi(#[from] PhiError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("step size must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("method linear-dpg-p0 requires a semilinear system")]
    NotSemilinear,
}

#[derive(Debug, Error)]
#[error("integration failed at step {step}: {source}")]
pub struct IntegrateError {
    pub step: usize,
    #[source]
    pub source: StepError,
}

/// Method selector for `integrate` and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodId {
    ExpEulerClassic,
    HybridEuler,
    Dpg2,
    Dpg3,
    LinearDpgP0,
}

impl MethodId {
    pub const ALL_NAMES: [&'static str; 5] =
        ["euler-classic", "hybrid-euler", "dpg2", "dpg3", "linear-dpg-p0"];

    pub fn name(&self) -> &'static str {
        match self {
            Self::ExpEulerClassic => "euler-classic",
            Self::HybridEuler => "hybrid-euler",
            Self::Dpg2 => "dpg2",
            Self::Dpg3 => "dpg3",
            Self::LinearDpgP0 => "linear-dpg-p0",
        }
    }
}

impl std::str::FromStr for MethodId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euler-classic" => Ok(Self::ExpEulerClassic),
            "hybrid-euler" => Ok(Self::HybridEuler),
            "dpg2" => Ok(Self::Dpg2),
            "dpg3" => Ok(Self::Dpg3),
            "linear-dpg-p0" => Ok(Self::LinearDpgP0),
            other => Err(format!(
                "unknown method '{other}' (available: {})",
                Self::ALL_NAMES.join(", ")
            )),
        }
    }
}

/// Uniform partition of `[t0, t_end]` into `steps` intervals.
#[derive(Debug, Clone, Copy)]
pub struct TimeGrid {
    pub t0: f64,
    pub t_end: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_end: f64, steps: usize) -> Result<Self, String> {
        if steps < 1 {
            return Err("step count must be at least 1".into());
        }
        if !(t_end > t0) {
            return Err(format!("final time {t_end} must exceed initial time {t0}"));
        }
        Ok(Self { t0, t_end, steps })
    }

    pub fn h(&self) -> f64 {
        (self.t_end - self.t0) / self.steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.h()
    }
}

/// Internal stages of the multistage methods.
#[derive(Debug, Clone)]
pub struct Stages {
    pub u_n2: DVector<f64>,
    pub u_n3: Option<DVector<f64>>,
}

/// One step's hybrid output: the trace at t_{n+1} plus the interval
/// interior constant, with a count of exponential-action solves.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub trace: DVector<f64>,
    pub field: Option<DVector<f64>>,
    pub stages: Option<Stages>,
    pub phi_action_count: usize,
}

fn check_step(h: f64) -> Result<(), StepError> {
    if h > 0.0 {
        Ok(())
    } else {
        Err(StepError::NonPositiveStep(h))
    }
}

/// The shared exponential stage u_n + h phi_2(h J_n) F(u_n).
fn exponential_stage(
    lin: &Linearization,
    h: f64,
    eval: &PhiEvaluator,
) -> Result<DVector<f64>, PhiError> {
    let w = combo_action(&lin.j_n, h, &[(2, &lin.f_un * h)], eval)?;
    Ok(&lin.u_n + w)
}

/// Hybrid exponential Euler: exponential field stage, trace
/// post-processed without a second φ-action.
pub fn step_hybrid_euler(
    lin: &Linearization,
    h: f64,
    eval: &PhiEvaluator,
) -> Result<StepOutput, StepError> {
    check_step(h)?;
    let field = exponential_stage(lin, h, eval)?;
    let trace = &lin.u_n + lin.j_n.apply(&field) * h + &lin.g_un * h;
    Ok(StepOutput {
        trace,
        field: Some(field),
        stages: None,
        phi_action_count: 1,
    })
}

/// Classical exponential Euler: u_n + h phi_1(h J_n) F(u_n).
pub fn step_exp_euler_classic(
    lin: &Linearization,
    h: f64,
    eval: &PhiEvaluator,
) -> Result<StepOutput, StepError> {
    check_step(h)?;
    let w = combo_action(&lin.j_n, h, &[(1, &lin.f_un * h)], eval)?;
    Ok(StepOutput {
        trace: &lin.u_n + w,
        field: None,
        stages: None,
        phi_action_count: 1,
    })
}

/// Two-stage method, third order. Update in the rewritten difference
/// form with b_2 = 8 phi_3:
///
/// ```text
///     u_{n+1} = u_n + h phi_1 F(u_n) + 8 h phi_3 (g_n(u_n2) - g_n(u_n)).
/// ```
pub fn step_dpg2(
    lin: &Linearization,
    h: f64,
    eval: &PhiEvaluator,
) -> Result<StepOutput, StepError> {
    check_step(h)?;
    let u_n2 = exponential_stage(lin, h, eval)?;
    let d2 = lin.g(&u_n2)? - &lin.g_un;
    let w = combo_action(
        &lin.j_n,
        h,
        &[(1, &lin.f_un * h), (3, &d2 * (8.0 * h))],
        eval,
    )?;
    Ok(StepOutput {
        trace: &lin.u_n + w,
        field: Some(u_n2.clone()),
        stages: Some(Stages { u_n2, u_n3: None }),
        phi_action_count: 2,
    })
}

/// Three-stage method, fourth order. The second internal stage is
/// post-processed from the first without an exponential solve, and the
/// update carries the Jacobian-dependent correction factor
/// C_n2 = -1/4 g'_n(u_n2)(u_n3 - 2 u_n2 + u_n) with b_2 = 16 phi_3 - 48 phi_4
/// and b_3 = 12 phi_4 - 2 phi_3.
pub fn step_dpg3(
    lin: &Linearization,
    h: f64,
    eval: &PhiEvaluator,
) -> Result<StepOutput, StepError> {
    check_step(h)?;
    let u_n2 = exponential_stage(lin, h, eval)?;
    let u_n3 = &lin.u_n + lin.j_n.apply(&u_n2) * h + &lin.g_un * h;

    let spread = &u_n3 - &u_n2 * 2.0 + &lin.u_n;
    let correction = lin.remainder_directional(&u_n2, &spread)? * -0.25;
    let d2 = lin.g(&u_n2)? - &lin.g_un + correction;
    let d3 = lin.g(&u_n3)? - &lin.g_un;

    let w3 = (&d2 * 16.0 - &d3 * 2.0) * h;
    let w4 = (&d3 * 12.0 - &d2 * 48.0) * h;
    let w = combo_action(&lin.j_n, h, &[(1, &lin.f_un * h), (3, w3), (4, w4)], eval)?;
    Ok(StepOutput {
        trace: &lin.u_n + w,
        field: Some(u_n2.clone()),
        stages: Some(Stages {
            u_n2,
            u_n3: Some(u_n3),
        }),
        phi_action_count: 2,
    })
}

/// Lowest-order linear scheme for u' + A u = f with the source frozen
/// at t_n: exponential field stage, post-processed trace.
pub fn step_linear_dpg_p0(
    a: &LinearOperator,
    f_tn: &DVector<f64>,
    u_n: &DVector<f64>,
    h: f64,
    eval: &PhiEvaluator,
) -> Result<StepOutput, StepError> {
    check_step(h)?;
    if a.dim() != u_n.len() || f_tn.len() != u_n.len() {
        return Err(StepError::Phi(PhiError::DimensionMismatch {
            op: a.dim(),
            vec: u_n.len(),
        }));
    }
    let neg_a = a.scaled(-1.0);
    let field = combo_action(&neg_a, h, &[(1, u_n.clone()), (2, f_tn * h)], eval)?;
    let trace = u_n - a.apply(&field) * h + f_tn * h;
    Ok(StepOutput {
        trace,
        field: Some(field),
        stages: None,
        phi_action_count: 1,
    })
}

/// Full trajectory of one method over a uniform grid.
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Traces u_0, ..., u_N.
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<StepOutput>,
}

impl Trajectory {
    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory contains u_0")
    }

    pub fn total_phi_actions(&self) -> usize {
        self.outputs.iter().map(|o| o.phi_action_count).sum()
    }
}

/// March `method` over `grid`, relinearizing at every step.
pub fn integrate(
    sys: &NonlinearSystem,
    grid: &TimeGrid,
    u0: &DVector<f64>,
    method: MethodId,
    eval: &PhiEvaluator,
) -> Result<Trajectory, IntegrateError> {
    let h = grid.h();
    let mut states = Vec::with_capacity(grid.steps + 1);
    let mut outputs = Vec::with_capacity(grid.steps);
    let mut times = Vec::with_capacity(grid.steps + 1);
    states.push(u0.clone());
    times.push(grid.t0);

    for n in 0..grid.steps {
        let u_n = states.last().unwrap();
        let out = single_step(sys, u_n, h, method, eval)
            .map_err(|source| IntegrateError { step: n, source })?;
        states.push(out.trace.clone());
        times.push(grid.time(n + 1));
        outputs.push(out);
    }
    Ok(Trajectory {
        times,
        states,
        outputs,
    })
}

fn single_step(
    sys: &NonlinearSystem,
    u_n: &DVector<f64>,
    h: f64,
    method: MethodId,
    eval: &PhiEvaluator,
) -> Result<StepOutput, StepError> {
    if method == MethodId::LinearDpgP0 {
        // u' = A_split u + f interpreted as u' + (-A_split) u = f(t_n),
        // valid when f does not depend on the state.
        let split = sys.semilinear().ok_or(StepError::NotSemilinear)?;
        let a = split.a.scaled(-1.0);
        let f_tn = (split.f)(u_n);
        return step_linear_dpg_p0(&a, &f_tn, u_n, h, eval);
    }
    let lin = sys.linearize(u_n)?;
    match method {
        MethodId::ExpEulerClassic => step_exp_euler_classic(&lin, h, eval),
        MethodId::HybridEuler => step_hybrid_euler(&lin, h, eval),
        MethodId::Dpg2 => step_dpg2(&lin, h, eval),
        MethodId::Dpg3 => step_dpg3(&lin, h, eval),
        MethodId::LinearDpgP0 => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense;
    use nalgebra::{dvector, DMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn riccati() -> NonlinearSystem {
        NonlinearSystem::autonomous(1, |u: &DVector<f64>| dvector![u[0] * u[0]])
            .with_jac_apply(|u, v| dvector![2.0 * u[0] * v[0]])
    }

    fn decay() -> NonlinearSystem {
        NonlinearSystem::autonomous(1, |u: &DVector<f64>| -u).with_jac_apply(|_, v| -v)
    }

    #[test]
    fn hybrid_euler_exact_on_linear_scalar() {
        let sys = decay();
        let lin = sys.linearize(&dvector![1.0]).unwrap();
        let out = step_hybrid_euler(&lin, 0.1, &PhiEvaluator::default()).unwrap();
        assert!((out.trace[0] - (-0.1f64).exp()).abs() <= 1e-13);
        assert_eq!(out.phi_action_count, 1);
    }

    #[test]
    fn classic_equals_hybrid_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let eval = PhiEvaluator::default();
        for _ in 0..20 {
            let sys = riccati();
            let u = dvector![rng.gen_range(0.1..1.5)];
            let h = rng.gen_range(0.01..0.3);
            let lin = sys.linearize(&u).unwrap();
            let a = step_hybrid_euler(&lin, h, &eval).unwrap().trace;
            let b = step_exp_euler_classic(&lin, h, &eval).unwrap().trace;
            assert!((a[0] - b[0]).abs() <= 1e-12 * b[0].abs().max(1.0));
        }
    }

    #[test]
    fn equilibrium_is_preserved_by_all_methods() {
        // F(u) = A (u - u*) + (u - u*)^2 elementwise
        let ustar = dvector![0.3, -1.2, 2.0];
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 0.2, 0.0, 0.1, -2.0, 0.3, 0.0, 0.1, -0.5]);
        let (us, am) = (ustar.clone(), a.clone());
        let sys = NonlinearSystem::autonomous(3, move |u: &DVector<f64>| {
            let d = u - &us;
            &am * &d + d.component_mul(&d)
        })
        .with_jac_apply(move |u, v| {
            let d = u - &ustar;
            &a * v + (d * 2.0).component_mul(v)
        });
        let ustar = dvector![0.3, -1.2, 2.0];
        let lin = sys.linearize(&ustar).unwrap();
        let eval = PhiEvaluator::default();
        for out in [
            step_hybrid_euler(&lin, 0.2, &eval).unwrap(),
            step_exp_euler_classic(&lin, 0.2, &eval).unwrap(),
            step_dpg2(&lin, 0.2, &eval).unwrap(),
            step_dpg3(&lin, 0.2, &eval).unwrap(),
        ] {
            let dev = (&out.trace - &ustar).norm();
            assert!(dev <= 1e-12 * (1.0 + ustar.norm()), "dev = {dev:e}");
        }
    }

    #[test]
    fn dpg_methods_exact_on_linear_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 5;
        let a = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                -1.0 - rng.gen_range(0.0..1.0)
            } else {
                rng.gen_range(-0.3..0.3)
            }
        });
        let am = a.clone();
        let sys = NonlinearSystem::autonomous(n, move |u: &DVector<f64>| &am * u);
        let am2 = a.clone();
        let sys = sys.with_jac_apply(move |_, v| &am2 * v);
        let u0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let h = 0.4;
        let expected = dense::expm(&(&a * h)).unwrap() * &u0;
        let lin = sys.linearize(&u0).unwrap();
        let eval = PhiEvaluator::default();
        for out in [
            step_dpg2(&lin, h, &eval).unwrap(),
            step_dpg3(&lin, h, &eval).unwrap(),
        ] {
            let rel = (&out.trace - &expected).norm() / expected.norm();
            assert!(rel <= 1e-12, "rel = {rel:e}");
        }
    }

    fn global_order(sys_fn: impl Fn() -> NonlinearSystem, method: MethodId, t_end: f64) -> f64 {
        let exact = 1.0 / (1.0 - t_end); // riccati with u0 = 1
        let eval = PhiEvaluator::default();
        let mut rows = Vec::new();
        for &n in &[8usize, 16, 32, 64] {
            let grid = TimeGrid::new(0.0, t_end, n).unwrap();
            let traj = integrate(&sys_fn(), &grid, &dvector![1.0], method, &eval).unwrap();
            let err = (traj.final_state()[0] - exact).abs();
            rows.push(((grid.h()).ln(), err.ln()));
        }
        // least-squares slope
        let m = rows.len() as f64;
        let sx: f64 = rows.iter().map(|r| r.0).sum();
        let sy: f64 = rows.iter().map(|r| r.1).sum();
        let sxx: f64 = rows.iter().map(|r| r.0 * r.0).sum();
        let sxy: f64 = rows.iter().map(|r| r.0 * r.1).sum();
        (m * sxy - sx * sy) / (m * sxx - sx * sx)
    }

    #[test]
    fn riccati_orders() {
        let s2 = global_order(riccati, MethodId::HybridEuler, 0.5);
        assert!((s2 - 2.0).abs() <= 0.1, "hybrid slope {s2}");
        let s3 = global_order(riccati, MethodId::Dpg2, 0.5);
        assert!((s3 - 3.0).abs() <= 0.15, "dpg2 slope {s3}");
        let s4 = global_order(riccati, MethodId::Dpg3, 0.5);
        assert!((s4 - 4.0).abs() <= 0.2, "dpg3 slope {s4}");
    }

    #[test]
    fn dpg2_dpg3_share_bitwise_identical_stage() {
        let sys = riccati();
        let lin = sys.linearize(&dvector![0.8]).unwrap();
        let eval = PhiEvaluator::default();
        let a = step_dpg2(&lin, 0.05, &eval).unwrap();
        let b = step_dpg3(&lin, 0.05, &eval).unwrap();
        assert_eq!(a.stages.unwrap().u_n2, b.stages.unwrap().u_n2);
    }

    #[test]
    fn linear_dpg_p0_scalar_cases() {
        let eval = PhiEvaluator::default();
        // A = 0, f = 0: trace = field = u_n
        let a0 = LinearOperator::dense(DMatrix::zeros(1, 1));
        let out = step_linear_dpg_p0(&a0, &dvector![0.0], &dvector![2.5], 0.3, &eval).unwrap();
        assert_eq!(out.trace[0], 2.5);
        assert_eq!(out.field.unwrap()[0], 2.5);
        // A = 1, f = 0: exact decay
        let a1 = LinearOperator::dense(DMatrix::from_element(1, 1, 1.0));
        let out = step_linear_dpg_p0(&a1, &dvector![0.0], &dvector![1.0], 0.1, &eval).unwrap();
        assert!((out.trace[0] - (-0.1f64).exp()).abs() <= 1e-14);
    }

    #[test]
    fn linear_dpg_p0_exact_for_constant_source() {
        // With a time-constant source the h*phi2 field term telescopes the
        // trace into the variation-of-constants solution exactly.
        let a = LinearOperator::dense(DMatrix::from_element(1, 1, 1.0));
        let eval = PhiEvaluator::default();
        for &h in &[0.1, 0.5, 1.0] {
            let out = step_linear_dpg_p0(&a, &dvector![1.0], &dvector![0.0], h, &eval).unwrap();
            assert!((out.trace[0] - (1.0 - (-h).exp())).abs() <= 1e-14, "h={h}");
        }
    }

    #[test]
    fn linear_dpg_p0_forced_accuracy() {
        // u' + u = t, u(0) = 1, exact u(t) = t - 1 + 2e^{-t}. Freezing the
        // source at f(t_n) = 0 leaves a one-step defect of h^2/2 - h^3/6,
        // so errors shrink close to 4x under step halving.
        let a = LinearOperator::dense(DMatrix::from_element(1, 1, 1.0));
        let eval = PhiEvaluator::default();
        let mut prev = f64::NAN;
        for &h in &[0.1, 0.05, 0.025] {
            let out = step_linear_dpg_p0(&a, &dvector![0.0], &dvector![1.0], h, &eval).unwrap();
            let err = (out.trace[0] - (h - 1.0 + 2.0 * (-h).exp())).abs();
            if prev.is_finite() {
                let ratio = prev / err;
                assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}");
            }
            prev = err;
        }
    }

    #[test]
    fn integrate_single_step_matches_step_call() {
        let sys = riccati();
        let grid = TimeGrid::new(0.0, 0.1, 1).unwrap();
        let eval = PhiEvaluator::default();
        let traj = integrate(&sys, &grid, &dvector![1.0], MethodId::Dpg2, &eval).unwrap();
        let lin = sys.linearize(&dvector![1.0]).unwrap();
        let one = step_dpg2(&lin, 0.1, &eval).unwrap();
        assert_eq!(traj.final_state(), &one.trace);
        assert_eq!(traj.states.len(), 2);
    }

    #[test]
    fn integrate_linear_autonomous_matches_expm() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]);
        let am = a.clone();
        let sys = NonlinearSystem::autonomous(2, move |u: &DVector<f64>| &am * u);
        let am2 = a.clone();
        let sys = sys.with_jac_apply(move |_, v| &am2 * v);
        let u0 = dvector![1.0, -1.0];
        let grid = TimeGrid::new(0.0, 1.0, 7).unwrap();
        let eval = PhiEvaluator::default();
        let expected = dense::expm(&a).unwrap() * &u0;
        for method in [MethodId::HybridEuler, MethodId::Dpg2, MethodId::Dpg3] {
            let traj = integrate(&sys, &grid, &u0, method, &eval).unwrap();
            let rel = (traj.final_state() - &expected).norm() / expected.norm();
            assert!(rel <= 1e-11, "{method:?}: rel = {rel:e}");
        }
    }

    #[test]
    fn step_error_carries_step_index() {
        // Riccati blows up before t = 1 with u0 = 1; a wildly long
        // integration produces non-finite states at some step.
        let sys = riccati();
        let grid = TimeGrid::new(0.0, 2.0, 50).unwrap();
        let eval = PhiEvaluator::default();
        let err = integrate(&sys, &grid, &dvector![1.0], MethodId::HybridEuler, &eval);
        assert!(err.is_err());
    }
}
