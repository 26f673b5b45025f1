//! Nonlinear system abstraction, per-step linearization, and
//! autonomization of time-dependent systems.
//!
//! At each step the right-hand side is split around the current state,
//!
//! ```text
//!     F(u) = J_n u + g_n(u),      J_n = dF/du (u_n),
//! ```
//!
//! so the remainder g_n has a vanishing derivative at u_n. Non-autonomous
//! systems are rewritten over the augmented state `[t; u]`, whose
//! Jacobian has an identically zero first row.

use std::sync::Arc;

use nalgebra::DVector;
use thiserror::Error;

use crate::operator::LinearOperator;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("state contains non-finite entries")]
    NonFiniteState,
    #[error("dimension mismatch: system dim {sys}, state len {state}")]
    DimensionMismatch { sys: usize, state: usize },
    #[error("system is already autonomous")]
    AlreadyAutonomous,
    #[error("system is non-autonomous; call autonomize first")]
    NotAutonomous,
}

pub type StateFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type JacApplyFn = Arc<dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type TimeStateFn = Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type TimeJacApplyFn =
    Arc<dyn Fn(f64, &DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Semilinear split F(u) = A u + f(u) with diagonal f'.
pub struct SemilinearSplit {
    pub a: LinearOperator,
    pub f: StateFn,
    pub f_prime_diag: StateFn,
}

/// Semilinear split of a time-dependent right-hand side.
pub struct TimeSemilinearSplit {
    pub a: LinearOperator,
    pub f: TimeStateFn,
    pub f_prime_diag: TimeStateFn,
}

pub(crate) struct AutonomousParts {
    pub f: StateFn,
    pub jac_apply: Option<JacApplyFn>,
    pub semilinear: Option<SemilinearSplit>,
}

pub(crate) struct NonAutonomousParts {
    pub rhs: TimeStateFn,
    pub jac_apply: Option<TimeJacApplyFn>,
    /// Analytic ∂F/∂t; finite differences in t are used when absent.
    pub dfdt: Option<TimeStateFn>,
    pub semilinear: Option<TimeSemilinearSplit>,
}

pub(crate) enum SystemForm {
    Autonomous(AutonomousParts),
    NonAutonomous(NonAutonomousParts),
    /// Augmented state `[t; u]` over the wrapped time-dependent parts.
    Autonomized(NonAutonomousParts),
}

/// A first-order system u' = F(u) (or u' = F(t, u) before autonomization).
pub struct NonlinearSystem {
    dim: usize,
    form: SystemForm,
}

impl NonlinearSystem {
    pub fn autonomous<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            dim,
            form: SystemForm::Autonomous(AutonomousParts {
                f: Arc::new(f),
                jac_apply: None,
                semilinear: None,
            }),
        }
    }

    pub fn non_autonomous<F>(dim: usize, rhs: F) -> Self
    where
        F: Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        Self {
            dim,
            form: SystemForm::NonAutonomous(NonAutonomousParts {
                rhs: Arc::new(rhs),
                jac_apply: None,
                dfdt: None,
                semilinear: None,
            }),
        }
    }

    pub fn with_jac_apply<J>(mut self, jac: J) -> Self
    where
        J: Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        match &mut self.form {
            SystemForm::Autonomous(p) => p.jac_apply = Some(Arc::new(jac)),
            _ => panic!("with_jac_apply applies to autonomous systems"),
        }
        self
    }

    pub fn with_time_jac_apply<J>(mut self, jac: J) -> Self
    where
        J: Fn(f64, &DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        match &mut self.form {
            SystemForm::NonAutonomous(p) => p.jac_apply = Some(Arc::new(jac)),
            _ => panic!("with_time_jac_apply applies to non-autonomous systems"),
        }
        self
    }

    pub fn with_semilinear(mut self, split: SemilinearSplit) -> Self {
        match &mut self.form {
            SystemForm::Autonomous(p) => p.semilinear = Some(split),
            _ => panic!("with_semilinear applies to autonomous systems"),
        }
        self
    }

    pub fn with_time_semilinear(mut self, split: TimeSemilinearSplit) -> Self {
        match &mut self.form {
            SystemForm::NonAutonomous(p) => p.semilinear = Some(split),
            _ => panic!("with_time_semilinear applies to non-autonomous systems"),
        }
        self
    }

    pub fn with_dfdt<F>(mut self, dfdt: F) -> Self
    where
        F: Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        match &mut self.form {
            SystemForm::NonAutonomous(p) => p.dfdt = Some(Arc::new(dfdt)),
            _ => panic!("with_dfdt applies to non-autonomous systems"),
        }
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_autonomous(&self) -> bool {
        !matches!(self.form, SystemForm::NonAutonomous(_))
    }

    pub fn semilinear(&self) -> Option<&SemilinearSplit> {
        match &self.form {
            SystemForm::Autonomous(p) => p.semilinear.as_ref(),
            _ => None,
        }
    }

    /// Rewrite a non-autonomous system over the augmented state `[t; u]`
    /// with right-hand side `[1; F(t, u)]`.
    pub fn autonomize(self) -> Result<Self, ModelError> {
        match self.form {
            SystemForm::NonAutonomous(parts) => Ok(Self {
                dim: self.dim + 1,
                form: SystemForm::Autonomized(parts),
            }),
            _ => Err(ModelError::AlreadyAutonomous),
        }
    }

    /// Evaluate F on the (autonomous) state.
    pub fn f(&self, u: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        self.check_state(u)?;
        match &self.form {
            SystemForm::Autonomous(p) => Ok((p.f)(u)),
            SystemForm::Autonomized(p) => {
                let (t, inner) = split_state(u);
                let fu = (p.rhs)(t, &inner);
                Ok(join_state(1.0, &fu))
            }
            SystemForm::NonAutonomous(_) => Err(ModelError::NotAutonomous),
        }
    }

    /// Action of the Jacobian at `u` on `v`, analytic when available,
    /// central finite differences of F otherwise.
    pub fn jac_apply(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        self.check_state(u)?;
        match &self.form {
            SystemForm::Autonomous(p) => {
                if let Some(jac) = &p.jac_apply {
                    return Ok(jac(u, v));
                }
                if let Some(split) = &p.semilinear {
                    let mut out = split.a.apply(v);
                    let d = (split.f_prime_diag)(u);
                    for i in 0..out.len() {
                        out[i] += d[i] * v[i];
                    }
                    return Ok(out);
                }
                Ok(fd_directional(&|x| (p.f)(x), u, v))
            }
            SystemForm::Autonomized(p) => {
                let (t, inner_u) = split_state(u);
                let (vt, inner_v) = split_state(v);
                let mut out = self.time_jac_apply(p, t, &inner_u, &inner_v);
                if vt != 0.0 {
                    out += self.dfdt_eval(p, t, &inner_u) * vt;
                }
                Ok(join_state(0.0, &out))
            }
            SystemForm::NonAutonomous(_) => Err(ModelError::NotAutonomous),
        }
    }

    fn time_jac_apply(
        &self,
        p: &NonAutonomousParts,
        t: f64,
        u: &DVector<f64>,
        v: &DVector<f64>,
    ) -> DVector<f64> {
        if let Some(jac) = &p.jac_apply {
            return jac(t, u, v);
        }
        if let Some(split) = &p.semilinear {
            let mut out = split.a.apply(v);
            let d = (split.f_prime_diag)(t, u);
            for i in 0..out.len() {
                out[i] += d[i] * v[i];
            }
            return out;
        }
        fd_directional(&|x| (p.rhs)(t, x), u, v)
    }

    fn dfdt_eval(&self, p: &NonAutonomousParts, t: f64, u: &DVector<f64>) -> DVector<f64> {
        if let Some(dfdt) = &p.dfdt {
            return dfdt(t, u);
        }
        let eps = f64::EPSILON.sqrt() * (1.0 + t.abs());
        ((p.rhs)(t + eps, u) - (p.rhs)(t - eps, u)) / (2.0 * eps)
    }

    /// Does this system expose an analytic Jacobian action?
    pub fn has_analytic_jacobian(&self) -> bool {
        match &self.form {
            SystemForm::Autonomous(p) => p.jac_apply.is_some() || p.semilinear.is_some(),
            SystemForm::NonAutonomous(p) | SystemForm::Autonomized(p) => {
                p.jac_apply.is_some() || p.semilinear.is_some()
            }
        }
    }

    fn check_state(&self, u: &DVector<f64>) -> Result<(), ModelError> {
        if u.len() != self.dim {
            return Err(ModelError::DimensionMismatch {
                sys: self.dim,
                state: u.len(),
            });
        }
        if u.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFiniteState);
        }
        Ok(())
    }

    /// Freeze the Jacobian at `u_n` and split off the nonlinear remainder.
    pub fn linearize(&self, u_n: &DVector<f64>) -> Result<Linearization<'_>, ModelError> {
        self.check_state(u_n)?;
        let j_n = match &self.form {
            SystemForm::Autonomous(p) => {
                if let Some(split) = &p.semilinear {
                    LinearOperator::DiagonalShifted {
                        base: Box::new(split.a.clone()),
                        diag: (split.f_prime_diag)(u_n),
                    }
                } else if let Some(jac) = &p.jac_apply {
                    let jac = jac.clone();
                    let frozen = u_n.clone();
                    LinearOperator::matrix_free(self.dim, move |v| jac(&frozen, v))
                } else {
                    let f = p.f.clone();
                    let frozen = u_n.clone();
                    LinearOperator::matrix_free(self.dim, move |v| {
                        fd_directional(&|x| f(x), &frozen, v)
                    })
                }
            }
            SystemForm::Autonomized(p) => {
                let (t, inner_u) = split_state(u_n);
                let inner = if let Some(split) = &p.semilinear {
                    LinearOperator::DiagonalShifted {
                        base: Box::new(split.a.clone()),
                        diag: (split.f_prime_diag)(t, &inner_u),
                    }
                } else if let Some(jac) = &p.jac_apply {
                    let jac = jac.clone();
                    let frozen = inner_u.clone();
                    LinearOperator::matrix_free(self.dim - 1, move |v| jac(t, &frozen, v))
                } else {
                    let rhs = p.rhs.clone();
                    let frozen = inner_u.clone();
                    LinearOperator::matrix_free(self.dim - 1, move |v| {
                        fd_directional(&|x| rhs(t, x), &frozen, v)
                    })
                };
                LinearOperator::Augmented {
                    dt_coupling: self.dfdt_eval(p, t, &inner_u),
                    inner: Box::new(inner),
                }
            }
            SystemForm::NonAutonomous(_) => return Err(ModelError::NotAutonomous),
        };
        let f_un = self.f(u_n)?;
        let g_un = &f_un - j_n.apply(u_n);
        Ok(Linearization {
            sys: self,
            u_n: u_n.clone(),
            f_un,
            g_un,
            j_n,
        })
    }
}

fn split_state(u: &DVector<f64>) -> (f64, DVector<f64>) {
    (
        u[0],
        DVector::from_iterator(u.len() - 1, u.iter().skip(1).copied()),
    )
}

fn join_state(head: f64, tail: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(tail.len() + 1);
    out[0] = head;
    out.rows_mut(1, tail.len()).copy_from(tail);
    out
}

/// Central finite-difference directional derivative of `f` at `u`
/// along `v`, with the step scaled to state and direction magnitudes.
fn fd_directional(
    f: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> DVector<f64> {
    let vnorm = v.norm();
    if vnorm == 0.0 {
        return DVector::zeros(u.len());
    }
    let eps = f64::EPSILON.sqrt() * (1.0 + u.norm()) / vnorm.max(f64::MIN_POSITIVE);
    (f(&(u + v * eps)) - f(&(u - v * eps))) / (2.0 * eps)
}

/// Frozen Rosenbrock linearization at u_n.
pub struct Linearization<'a> {
    sys: &'a NonlinearSystem,
    pub u_n: DVector<f64>,
    /// F(u_n), cached.
    pub f_un: DVector<f64>,
    /// g_n(u_n) = F(u_n) - J_n u_n, cached.
    pub g_un: DVector<f64>,
    pub j_n: LinearOperator,
}

impl Linearization<'_> {
    pub fn system(&self) -> &NonlinearSystem {
        self.sys
    }

    /// F at an arbitrary state.
    pub fn f(&self, u: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        self.sys.f(u)
    }

    /// Nonlinear remainder g_n(u) = F(u) - J_n u.
    pub fn g(&self, u: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        Ok(self.sys.f(u)? - self.j_n.apply(u))
    }

    /// Directional derivative of the remainder: g'_n(u) v = (J(u) - J_n) v.
    pub fn remainder_directional(
        &self,
        u: &DVector<f64>,
        v: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFiniteState);
        }
        Ok(self.sys.jac_apply(u, v)? - self.j_n.apply(v))
    }
}
